"""Dimensionality reduction for dataset inspection: PCA and exact t-SNE.

Desk-scale row counts keep the exact (dense) t-SNE gradient affordable;
there is no tree approximation here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError

MACHINE_EPS = float(np.finfo(np.float64).eps)


class ReducedRankWarning(UserWarning):
    """Input matrix has fewer informative directions than requested."""


@dataclass
class Embedding:
    coords: np.ndarray  # (n, d)
    labels: list[str] | None
    method: str  # "PCA" | "TSNE"
    diagnostics: dict

    def __post_init__(self):
        if not np.all(np.isfinite(self.coords)):
            raise InvalidInputError("embedding coordinates must be finite")


def pca(X: np.ndarray, d: int = 2, labels: list[str] | None = None) -> Embedding:
    """Project centered rows onto the top-d covariance eigenvectors.

    Components are orthonormal with the largest-magnitude loading of each
    forced positive so plots are stable across runs. Directions beyond the
    matrix rank are zero-filled with a ReducedRankWarning.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidInputError("X must be a 2-D matrix")
    n, p = X.shape
    if d not in (1, 2, 3):
        raise InvalidInputError("d must be 1, 2 or 3")
    if n <= d:
        raise InvalidInputError(f"need more than {d} rows, got {n}")
    Xc = X - X.mean(axis=0)
    total_var = float(np.sum(Xc**2)) / (n - 1)
    if total_var == 0.0:
        raise InvalidInputError("X is constant; PCA undefined")
    cov = (Xc.T @ Xc) / (n - 1)
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval)[::-1][:d]
    vals = np.maximum(eigval[order], 0.0)
    comps = eigvec[:, order]
    for j in range(comps.shape[1]):
        k = int(np.argmax(np.abs(comps[:, j])))
        if comps[k, j] < 0:
            comps[:, j] = -comps[:, j]
    coords = Xc @ comps
    tol = max(n, p) * MACHINE_EPS * max(vals[0], 1.0)
    rank = int(np.sum(vals > tol))
    if rank < d:
        warnings.warn(
            f"input rank {rank} below requested {d} axes; trailing axes zero-filled",
            ReducedRankWarning,
        )
        coords[:, rank:] = 0.0
    return Embedding(
        coords=coords,
        labels=labels,
        method="PCA",
        diagnostics={
            "explained_variance": (vals / total_var).tolist(),
            "components": comps,
            "rank": rank,
        },
    )


# ---------------------------------------------------------------------------
# t-SNE.


def _conditional_probabilities(
    sq_dists: np.ndarray, perplexity: float, tol: float = 1e-5, max_steps: int = 50
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row conditional Gaussians whose Shannon entropy matches
    log(perplexity), found by bisecting each row's precision beta."""
    n = sq_dists.shape[0]
    target_entropy = math.log(perplexity)
    P = np.zeros((n, n))
    entropies = np.zeros(n)
    for i in range(n):
        d = np.delete(sq_dists[i], i)
        beta, beta_min, beta_max = 1.0, 0.0, math.inf
        for _ in range(max_steps):
            w = np.exp(-d * beta)
            sum_w = max(float(np.sum(w)), MACHINE_EPS)
            p = w / sum_w
            # H = log(sum_w) + beta * <d>_p
            entropy = math.log(sum_w) + beta * float(np.dot(d, p))
            if abs(entropy - target_entropy) <= tol:
                break
            if entropy > target_entropy:
                beta_min = beta
                beta = beta * 2.0 if beta_max == math.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = (beta + beta_min) / 2.0
        row = np.insert(p, i, 0.0)
        P[i] = row
        entropies[i] = entropy
    return P, entropies


def _pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    s = np.sum(X**2, axis=1)
    d2 = s[:, None] + s[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def _kl_divergence(P: np.ndarray, Y: np.ndarray, dof: float) -> tuple[float, np.ndarray]:
    """KL(P||Q) and its gradient for the Student-t low-dimensional kernel."""
    d2 = _pairwise_sq_dists(Y)
    num = (1.0 + d2 / dof) ** (-(dof + 1.0) / 2.0)
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), MACHINE_EPS)
    kl = float(np.sum(P * np.log(np.maximum(P, MACHINE_EPS) / Q)))
    W = (P - Q) * num
    grad = (2.0 * (dof + 1.0) / dof) * ((np.diag(W.sum(axis=1)) - W) @ Y)
    return kl, grad


def tsne(
    X: np.ndarray,
    d: int = 2,
    perplexity: float = 30.0,
    iters: int = 1000,
    seed: int = 0,
    labels: list[str] | None = None,
    learning_rate: float | str = "auto",
    early_exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
) -> Embedding:
    """Exact-gradient t-SNE with early exaggeration and adaptive gains.

    Momentum switches 0.5 -> 0.8 when exaggeration ends. The "auto"
    learning rate is max(n / (4 * early_exaggeration), 50); a fixed rate in
    the hundreds blows small embeddings apart during exaggeration.
    Diagnostics carry the final KL divergence and the value right after
    exaggeration, both against the unexaggerated P. Deterministic per seed.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if X.ndim != 2 or n < 4:
        raise InvalidInputError("X must be a 2-D matrix with at least 4 rows")
    if d not in (2, 3):
        raise InvalidInputError("d must be 2 or 3")
    if n < 3 * perplexity + 1:
        raise InvalidConfigError(
            f"perplexity {perplexity} too large for {n} rows (need n >= 3*perplexity + 1)"
        )
    if iters < exaggeration_iters:
        raise InvalidConfigError("iters must cover the exaggeration phase")
    if learning_rate == "auto":
        learning_rate = max(n / (4.0 * early_exaggeration), 50.0)
    elif not isinstance(learning_rate, (int, float)) or learning_rate <= 0:
        raise InvalidConfigError("learning_rate must be positive or 'auto'")

    Pc, entropies = _conditional_probabilities(_pairwise_sq_dists(X), perplexity)
    P = (Pc + Pc.T) / (2.0 * n)
    P = np.maximum(P, MACHINE_EPS)
    dof = float(max(d - 1, 1))

    rng = np.random.default_rng(seed)
    Y = rng.normal(scale=1e-4, size=(n, d))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    kl_history: list[float] = []
    kl_after_exaggeration = math.inf

    for it in range(iters):
        exaggerating = it < exaggeration_iters
        momentum = 0.5 if exaggerating else 0.8
        P_eff = P * early_exaggeration if exaggerating else P
        _, grad = _kl_divergence(P_eff, Y, dof)
        if not exaggerating or it == iters - 1:
            kl, _ = _kl_divergence(P, Y, dof)
        else:
            kl = math.nan
        inc = (update * grad) < 0
        gains[inc] += 0.2
        gains[~inc] *= 0.8
        np.clip(gains, 0.01, None, out=gains)
        update = momentum * update - learning_rate * (gains * grad)
        Y = Y + update
        if it == exaggeration_iters:
            kl_after_exaggeration = kl
        if not math.isnan(kl):
            kl_history.append(kl)

    kl_final, _ = _kl_divergence(P, Y, dof)
    return Embedding(
        coords=Y,
        labels=labels,
        method="TSNE",
        diagnostics={
            "kl_final": kl_final,
            "kl_after_exaggeration": kl_after_exaggeration,
            "perplexity": perplexity,
            "conditional_entropies": entropies,
            "conditional_P": Pc,
        },
    )


# ---------------------------------------------------------------------------
# Plot-data output.


def save_embedding(emb: Embedding, path, diagnostics_path=None) -> None:
    """CSV ``x,y[,z],label`` plus an optional sidecar diagnostics text file."""
    d = emb.coords.shape[1]
    header = ",".join("xyz"[:d]) + ",label"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(emb.coords.shape[0]):
            coords = ",".join(repr(float(v)) for v in emb.coords[i])
            label = emb.labels[i] if emb.labels is not None else ""
            fh.write(f"{coords},{label}\n")
    if diagnostics_path is not None:
        with open(diagnostics_path, "w") as fh:
            fh.write(f"method: {emb.method}\n")
            if emb.method == "PCA":
                ev = emb.diagnostics["explained_variance"]
                fh.write(
                    "explained_variance: "
                    + ", ".join(f"{v:.6f}" for v in ev)
                    + "\n"
                )
                fh.write(f"rank: {emb.diagnostics['rank']}\n")
            else:
                fh.write(f"kl_final: {emb.diagnostics['kl_final']:.6f}\n")
                fh.write(
                    f"kl_after_exaggeration: {emb.diagnostics['kl_after_exaggeration']:.6f}\n"
                )
                fh.write(f"perplexity: {emb.diagnostics['perplexity']}\n")


def knn_label_purity(coords: np.ndarray, labels: list[str], k: int = 10) -> float:
    """Fraction of points whose k nearest embedded neighbors share their label."""
    d2 = _pairwise_sq_dists(np.asarray(coords, dtype=float))
    np.fill_diagonal(d2, np.inf)
    idx = np.argsort(d2, axis=1)[:, :k]
    labels_arr = np.asarray(labels)
    same = labels_arr[idx] == labels_arr[:, None]
    return float(np.mean(same))
