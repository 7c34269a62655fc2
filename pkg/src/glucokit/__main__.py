import sys

from glucokit.cli import main

sys.exit(main())
