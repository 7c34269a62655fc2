"""Linear learners: ridge/OLS normal equations, elastic-net coordinate descent, Huber IRLS.

Elastic-net objective (lasso is ``l1_ratio = 1``)::

    (1 / 2n) * ||y - b - Xw||^2 + alpha * (l1_ratio * ||w||_1 + (1 - l1_ratio) / 2 * ||w||^2)

Ridge uses the unnormalised normal equations ``(X'X + alpha I) w = X'y``, so
elastic net with ``l1_ratio = 0`` and penalty ``alpha`` matches ridge with
penalty ``n * alpha``. Intercepts are never penalised.

Coordinate descent stops when the largest per-sweep coefficient change is
below ``tol`` *and* the geometric-tail estimate of the remaining distance,
``change / (1 - ratio)``, is too, so ill-conditioned designs do not stop
short of the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

CD_TOL = 1e-6
CD_MAX_SWEEPS = 10_000
HUBER_TOL = 1e-6
HUBER_MAX_ITER = 1_000


class LinearPredictor:
    kind = "linear"

    def __init__(self, coef, intercept: float):
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef + self.intercept

    def to_arrays(self) -> dict:
        return {"coef": self.coef, "intercept": np.array([self.intercept])}

    @classmethod
    def from_arrays(cls, arrays: dict) -> "LinearPredictor":
        return cls(arrays["coef"].copy(), float(arrays["intercept"][0]))


@dataclass
class SolveInfo:
    converged: bool = True
    iterations: int = 0
    singular: bool = False


def ridge_solve(X, y, alpha: float = 0.0, fit_intercept: bool = True):
    """Solve ``(Xc'Xc + alpha I) w = Xc'yc`` on centred data.

    With ``alpha == 0`` and a rank-deficient design the least-norm solution
    is returned and ``info.singular`` is set.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if fit_intercept:
        x_mean = X.mean(axis=0)
        y_mean = y.mean()
        Xc, yc = X - x_mean, y - y_mean
    else:
        x_mean = np.zeros(X.shape[1])
        y_mean = 0.0
        Xc, yc = X, y
    info = SolveInfo()
    p = X.shape[1]
    if alpha > 0:
        w = np.linalg.solve(Xc.T @ Xc + alpha * np.eye(p), Xc.T @ yc)
    else:
        w, _, rank, _ = np.linalg.lstsq(Xc, yc, rcond=None)
        info.singular = bool(rank < p)
    intercept = y_mean - x_mean @ w
    return w, float(intercept), info


@numba.njit(cache=True)
def _cd_gram(G, c, alpha, l1_ratio, tol, max_sweeps, w):
    # coordinate descent on (1/2) w'Gw - c'w + penalty, G = X'X/n, c = X'y/n
    p = G.shape[0]
    l1 = alpha * l1_ratio
    l2 = alpha * (1.0 - l1_ratio)
    sweeps = 0
    converged = False
    prev_change = np.inf
    while sweeps < max_sweeps:
        sweeps += 1
        max_change = 0.0
        for j in range(p):
            old = w[j]
            rho = c[j]
            for k in range(p):
                rho -= G[j, k] * w[k]
            rho += G[j, j] * old
            denom = G[j, j] + l2
            if rho > l1:
                new = (rho - l1) / denom if denom > 0 else 0.0
            elif rho < -l1:
                new = (rho + l1) / denom if denom > 0 else 0.0
            else:
                new = 0.0
            w[j] = new
            change = abs(new - old)
            if change > max_change:
                max_change = change
        # stop once the projected distance to the fixed point, not just the
        # last step, is below tol: steps shrink geometrically with ratio r,
        # so the remaining path is at most step / (1 - r)
        ratio = max_change / prev_change if prev_change > 0 else 0.0
        prev_change = max_change
        if max_change < tol and (max_change == 0.0 or (ratio < 1.0 and max_change / (1.0 - ratio) < tol)):
            converged = True
            break
    return sweeps, converged


def soft_threshold(z: float, gamma: float) -> float:
    return float(np.sign(z) * max(abs(z) - gamma, 0.0))


def elastic_net_solve(X, y, alpha: float, l1_ratio: float = 1.0, *, tol: float = CD_TOL,
                      max_sweeps: int = CD_MAX_SWEEPS, fit_intercept: bool = True):
    """Cyclic coordinate descent with soft-thresholding; see module docstring for the objective."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if fit_intercept:
        x_mean = X.mean(axis=0)
        y_mean = y.mean()
        Xc, yc = X - x_mean, y - y_mean
    else:
        x_mean, y_mean, Xc, yc = np.zeros(p), 0.0, X, y
    G = np.ascontiguousarray(Xc.T @ Xc / n)
    c = np.ascontiguousarray(Xc.T @ yc / n)
    w = np.zeros(p)
    sweeps, converged = _cd_gram(G, c, float(alpha), float(l1_ratio), float(tol), int(max_sweeps), w)
    intercept = y_mean - x_mean @ w
    return w, float(intercept), SolveInfo(converged=bool(converged), iterations=int(sweeps))


def elastic_net_kkt_residuals(X, y, w, intercept, alpha, l1_ratio=1.0) -> np.ndarray:
    """Per-coefficient violation of the elastic-net optimality conditions."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    r = y - X @ w - intercept
    grad = -(X.T @ r) / n + alpha * (1 - l1_ratio) * w
    l1 = alpha * l1_ratio
    return np.where(w == 0, np.maximum(np.abs(grad) - l1, 0.0), np.abs(grad + l1 * np.sign(w)))


def huber_solve(X, y, delta: float, alpha: float = 0.0, *, tol: float = HUBER_TOL,
                max_iter: int = HUBER_MAX_ITER):
    """Iteratively reweighted least squares for the Huber loss (threshold ``delta``).

    Minimises ``sum huber_delta(y - b - Xw) + alpha * ||w||^2 / 2`` with
    weights ``min(1, delta / |r|)``; stops when no coefficient (or the
    intercept) moves by ``tol`` or more.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p = X.shape[1]
    weights = np.ones(len(y))
    w = np.zeros(p)
    b = 0.0
    info = SolveInfo(converged=False)
    for it in range(1, max_iter + 1):
        sw = weights.sum()
        x_mean = weights @ X / sw
        y_mean = weights @ y / sw
        Xc = X - x_mean
        yc = y - y_mean
        A = Xc.T @ (Xc * weights[:, None])
        rhs = Xc.T @ (weights * yc)
        if alpha > 0:
            w_new = np.linalg.solve(A + alpha * np.eye(p), rhs)
        else:
            w_new, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
            info.singular = info.singular or bool(rank < p)
        b_new = float(y_mean - x_mean @ w_new)
        change = max(np.max(np.abs(w_new - w), initial=0.0), abs(b_new - b))
        w, b = w_new, b_new
        info.iterations = it
        if it > 1 and change < tol:
            info.converged = True
            break
        r = np.abs(y - X @ w - b)
        weights = np.where(r <= delta, 1.0, delta / np.maximum(r, 1e-300))
    return w, b, info
