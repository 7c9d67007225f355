"""Linear soft-margin SVM, one machine per class (one-vs-rest).

Each machine minimizes sum_i hinge(y_i * (w.x_i + b)) + (||w||^2 + b^2) / (2C)
over standardized features, solved in the dual by cyclic coordinate descent
with shrinking (the liblinear algorithm for L1-loss SVM; the bias enters as
an augmented constant feature). Coordinate order is cyclic rather than
shuffled so training is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError


@dataclass
class SvmParams:
    mu: np.ndarray  # (p,) feature means
    sd: np.ndarray  # (p,) feature SDs (1 where constant)
    weights: np.ndarray  # (k, p)
    bias: np.ndarray  # (k,)

    def equals(self, other: "SvmParams") -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("mu", "sd", "weights", "bias")
        )


def _dual_cd(A: np.ndarray, y: np.ndarray, c: float, tol: float, max_epochs: int,
             rescan_every: int = 10) -> np.ndarray:
    """liblinear-style dual coordinate descent for the L1-loss SVM.

    A carries the augmented bias column; returns the primal w (p+1,).
    Shrunk coordinates rejoin the active set every ``rescan_every`` epochs;
    a tolerance below the float noise floor would otherwise freeze them at
    whatever bound they were pinned to early on.
    """
    n, p = A.shape
    q = np.einsum("ij,ij->i", A, A)
    alpha = np.zeros(n)
    w = np.zeros(p)
    active = np.arange(n)
    pg_max_old, pg_min_old = np.inf, -np.inf
    for epoch in range(max_epochs):
        if epoch % rescan_every == rescan_every - 1 and active.size < n:
            active = np.arange(n)
            pg_max_old, pg_min_old = np.inf, -np.inf
        pg_max, pg_min = -np.inf, np.inf
        keep = np.ones(active.size, dtype=bool)
        for pos in range(active.size):
            i = active[pos]
            g = y[i] * float(A[i] @ w) - 1.0
            a_i = alpha[i]
            if a_i == 0.0:
                if g > pg_max_old:
                    keep[pos] = False  # shrink: pinned at lower bound
                    continue
                pg = min(g, 0.0)
            elif a_i == c:
                if g < pg_min_old:
                    keep[pos] = False  # shrink: pinned at upper bound
                    continue
                pg = max(g, 0.0)
            else:
                pg = g
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if pg != 0.0:
                new = min(max(a_i - g / q[i], 0.0), c)
                if new != a_i:
                    alpha[i] = new
                    w += (new - a_i) * y[i] * A[i]
        if pg_max - pg_min <= tol and pg_max <= tol and pg_min >= -tol:
            if active.size == n:
                break
            # Converged on the shrunken set: re-check everything once.
            active = np.arange(n)
            pg_max_old, pg_min_old = np.inf, -np.inf
            continue
        active = active[keep]
        pg_max_old = pg_max if pg_max > 0 else np.inf
        pg_min_old = pg_min if pg_min < 0 else -np.inf
        if active.size == 0:
            active = np.arange(n)
            pg_max_old, pg_min_old = np.inf, -np.inf
    return w


def train_svm(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    c: float = 1.0,
    tol: float = 1e-8,
    max_epochs: int = 2000,
) -> SvmParams:
    if c <= 0:
        raise InvalidInputError("C must be positive")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    Xs = (X - mu) / sd
    A = np.ascontiguousarray(np.hstack([Xs, np.ones((X.shape[0], 1))]))
    weights = np.zeros((n_classes, X.shape[1]))
    bias = np.zeros(n_classes)
    for k in range(n_classes):
        yk = np.where(y == k, 1.0, -1.0)
        w = _dual_cd(A, yk, c, tol, max_epochs)
        weights[k] = w[:-1]
        bias[k] = w[-1]
    return SvmParams(mu=mu, sd=sd, weights=weights, bias=bias)


def svm_margins(params: SvmParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    Xs = (X - params.mu) / params.sd
    return Xs @ params.weights.T + params.bias


def svm_predict(params: SvmParams, X: np.ndarray) -> np.ndarray:
    return np.argmax(svm_margins(params, X), axis=1)


def svm_confidence(params: SvmParams, X: np.ndarray) -> np.ndarray:
    """Logistic squash of the winning one-vs-rest margin into [0, 1]."""
    m = svm_margins(params, X).max(axis=1)
    return 1.0 / (1.0 + np.exp(-m))


def svm_objective(params: SvmParams, X: np.ndarray, y: np.ndarray, k: int, c: float,
                  w_override: np.ndarray | None = None) -> float:
    """Primal objective of machine k at fixed bias: hinge sum + ||w||^2/(2C).

    ``w_override`` evaluates the objective at a different weight vector
    (used by the local-optimality check).
    """
    X = np.asarray(X, dtype=np.float64)
    Xs = (X - params.mu) / params.sd
    w = params.weights[k] if w_override is None else w_override
    yk = np.where(np.asarray(y) == k, 1.0, -1.0)
    margins = yk * (Xs @ w + params.bias[k])
    hinge = np.maximum(0.0, 1.0 - margins).sum()
    return float(hinge + (w @ w) / (2.0 * c))
