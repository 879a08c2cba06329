"""Greedy agglomerative path of partitions and the chi-square guide.

Starting from singletons, every step merges the two clusters whose merged
block estimate is closest to the empirical Kendall vector in the Mahalanobis
metric of the current structured covariance. The covariance is re-averaged
for the chosen partition before the next step.

Scoring is incremental. If ``Sigma`` is constant on the cells of the current
partition, the residual of its block means is ``Sigma^{-1}``-orthogonal to
every block-constant vector, hence for a coarser candidate ``G*``::

    loss(G*) = loss(G) + delta' (B' Sigma^{-1} B) delta

where ``delta`` holds the changes of the per-block means. Only the blocks
touching the two merged clusters change, so each candidate costs O(K) entries
of ``delta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc

from .covariance import (
    DIAG, FULL, SigmaEstimate, SigmaSolver,
    rank_one_scale, shrink, sigma_hat, theta_part)
from .estimator import BlockTauEstimate, project_tau
from .kendall import TauEstimate, as_data_matrix, kendall_tau
from .partitions import (
    BlockStructure, Partition, _check_capacity, cell_average, cell_labels, merge)
from .pairs import n_pairs

AUTO_FULL_MAX_PAIRS = 2000
ZERO_LOSS = 1e-10


def resolve_mode(mode: str, p: int) -> str:
    """Map ``"auto"`` to ``"full"`` for p <= 2000 and ``"diag"`` otherwise."""
    if mode == "auto":
        return FULL if p <= AUTO_FULL_MAX_PAIRS else DIAG
    if mode not in (FULL, DIAG):
        raise ValueError(f"unknown mode {mode!r}")
    return mode


def chi_square_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution.

    ``df = 0`` is the point mass at zero: the tail is 1 for ``x <= 1e-10``
    and 0 otherwise. Negative ``x`` is treated as zero.
    """
    if df < 0:
        raise ValueError(f"degrees of freedom must be nonnegative, got {df}")
    x = max(float(x), 0.0)
    if df == 0:
        return 1.0 if x <= ZERO_LOSS else 0.0
    return float(gammaincc(df / 2.0, x / 2.0))


@dataclass
class PathResult:
    """Sequence of partitions from ``d`` clusters down to one.

    Entry ``k`` of every list belongs to step ``i = d - k``, i.e. the
    partition with ``i`` clusters.
    """

    partitions: list
    losses: np.ndarray
    alphas: np.ndarray
    taus: list
    n_blocks: list
    w: float
    mode: str
    tau_hat: np.ndarray = field(repr=False)
    n: int = 0

    @property
    def d(self) -> int:
        return self.partitions[0].d

    @property
    def p(self) -> int:
        return n_pairs(self.d)

    def position(self, i: int) -> int:
        if not 1 <= i <= self.d:
            raise IndexError(f"step {i} outside 1..{self.d}")
        return self.d - i

    def partition(self, i: int) -> Partition:
        return self.partitions[self.position(i)]

    def tau(self, i: int) -> BlockTauEstimate:
        return self.taus[self.position(i)]

    def alpha(self, i: int) -> float:
        return float(self.alphas[self.position(i)])

    def to_dict(self, emit_steps=()) -> dict:
        """JSON-ready summary; Kendall matrices only for ``emit_steps``."""
        steps = []
        for k, G in enumerate(self.partitions):
            steps.append({
                "i": G.K,
                "partition": G.to_json_obj(),
                "loss": float(self.losses[k]),
                "alpha": float(self.alphas[k]),
                "L_i": int(self.n_blocks[k]),
            })
        out = {"d": self.d, "p": self.p, "n": self.n, "w": self.w,
               "mode": self.mode, "steps": steps}
        if emit_steps:
            out["tau_tilde"] = {
                str(i): self.tau(i).matrix().tolist() for i in emit_steps}
        return out


def _other_clusters(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    """For each candidate ``a < b`` the remaining K - 2 labels, ascending."""
    t = np.arange(K - 2)[None, :]
    c = t + (t >= a[:, None])
    return c + (c >= b[:, None])


def merge_scores(bs: BlockStructure, values: np.ndarray, M: np.ndarray,
                 diagonal: bool, budget: int = 4_000_000) -> np.ndarray:
    """Loss increase of every pairwise merge, candidates in lexicographic order.

    Parameters
    ----------
    bs : BlockStructure
        Current blocks.
    values : ndarray of shape (L,)
        Current per-block means.
    M : ndarray
        ``B' Sigma^{-1} B`` as an L x L matrix, or its diagonal.
    diagonal : bool
        Whether ``M`` is given by its diagonal.
    """
    K = bs.K
    a, b = np.triu_indices(K, k=1)
    idx = bs.index
    cnt = bs.sizes.astype(float)
    # blocks absorbed into the new within-cluster block
    inner = np.stack([idx[a, a], idx[a, b], idx[b, b]], axis=1)
    present = inner >= 0
    safe = np.where(present, inner, 0)
    wts = np.where(present, cnt[safe], 0.0)
    mu_in = np.sum(wts * values[safe], axis=1) / np.sum(wts, axis=1)
    d_in = np.where(present, values[safe] - mu_in[:, None], 0.0)
    # blocks (a, c) and (b, c) fused for every other cluster c
    c = _other_clusters(a, b, K)
    ac, bc = idx[a[:, None], c], idx[b[:, None], c]
    mu_c = (cnt[ac] * values[ac] + cnt[bc] * values[bc]) / (cnt[ac] + cnt[bc])
    J = np.concatenate([safe, ac, bc], axis=1)
    delta = np.concatenate([d_in, values[ac] - mu_c, values[bc] - mu_c], axis=1)
    if diagonal:
        return np.sum(delta * delta * M[J], axis=1)
    out = np.empty(a.size)
    m = J.shape[1]
    step = max(1, budget // (m * m))
    for s in range(0, a.size, step):
        Js, ds = J[s:s + step], delta[s:s + step]
        sub = M[Js[:, :, None], Js[:, None, :]]
        out[s:s + step] = np.einsum("ci,cij,cj->c", ds, sub, ds)
    return out


class _StructuredSigma:
    """Re-averages a fixed plug-in estimate for successive partitions."""

    def __init__(self, sigma: SigmaEstimate, w: float):
        self.kind = sigma.kind
        self.n = sigma.n
        self.w = w
        self.theta = theta_part(sigma)
        self.c = rank_one_scale(sigma.n)

    def for_partition(self, G: Partition, bs: BlockStructure, tau_tilde) -> SigmaEstimate:
        t1 = tau_tilde + 1.0
        if self.kind == FULL and self.w < 1.0:
            lab, n_cells = cell_labels(G, bs=bs)
            values = cell_average(self.theta, lab, n_cells) - self.c * np.outer(t1, t1)
            return shrink(SigmaEstimate(FULL, values, self.n), self.w)
        diag = self.theta if self.theta.ndim == 1 else np.diag(self.theta)
        values = bs.block_means(diag)[bs.block_of] - self.c * t1 * t1
        return SigmaEstimate(DIAG, values, self.n)


def build_path(tau_hat, data, w: float = 1.0, mode: str = "auto",
               sigma: SigmaEstimate | None = None) -> PathResult:
    """Greedy path of partitions from singletons to a single cluster.

    Parameters
    ----------
    tau_hat : TauEstimate or array-like or None
        Empirical Kendall vector; computed from ``data`` when None.
    data : array-like of shape (n, d)
        Sample used for the plug-in covariance.
    w : float
        Shrinkage toward the diagonal, in [0, 1]. With ``w = 1`` only the
        variances are needed and the diagonal route is used.
    mode : {"auto", "full", "diag"}
    sigma : SigmaEstimate, optional
        Precomputed plug-in estimate for ``data``.

    Returns
    -------
    PathResult
    """
    w = float(w)
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"shrinkage weight must lie in [0, 1], got {w}")
    X = as_data_matrix(data)
    n, d = X.shape
    p = n_pairs(d)
    mode = resolve_mode(mode, p)
    if mode == FULL:
        _check_capacity(p, None)
    if tau_hat is None:
        tau_hat = kendall_tau(X)
    t = tau_hat.tau if isinstance(tau_hat, TauEstimate) else np.asarray(tau_hat, dtype=float)
    if t.shape != (p,):
        raise ValueError(f"Kendall vector of length {t.size} does not match d = {d}")
    if sigma is None:
        sigma = sigma_hat(X, mode=DIAG if (mode == DIAG or w == 1.0) else FULL)
    structured = _StructuredSigma(sigma, w)
    diagonal = structured.kind == DIAG or w == 1.0

    G = Partition.singletons(d)
    partitions, losses, taus, n_blk = [], [], [], []
    while True:
        bs = BlockStructure(G)
        est = project_tau(t, G, bs)
        sig = structured.for_partition(G, bs, est.tau_tilde)
        solver = SigmaSolver(sig, context=f"step {G.K} of the path")
        resid = t - est.tau_tilde
        partitions.append(G)
        taus.append(est)
        n_blk.append(bs.L)
        losses.append(float(resid @ solver.solve(resid)))
        if G.K == 1:
            break
        if diagonal:
            M = np.bincount(bs.block_of, weights=1.0 / sig.values, minlength=bs.L)
        else:
            B = bs.membership()
            M = B.T @ solver.solve(B)
            M = (M + M.T) / 2.0
        scores = merge_scores(bs, est.per_block_values, M, diagonal)
        a, b = np.triu_indices(G.K, k=1)
        best = int(np.argmin(scores))
        G = merge(G, int(a[best]), int(b[best]))

    losses = np.asarray(losses)
    alphas = np.array([chi_square_sf(l, p - L) for l, L in zip(losses, n_blk)])
    return PathResult(partitions, losses, alphas, taus, n_blk, w,
                      DIAG if diagonal else FULL, t, n)


def alpha_values(path: PathResult) -> np.ndarray:
    """Chi-square tail of each step loss with ``p - L_i`` degrees of freedom."""
    p = path.p
    return np.array([chi_square_sf(l, p - L)
                     for l, L in zip(path.losses, path.n_blocks)])


def select_structure(path: PathResult, alpha: float) -> tuple[int, Partition]:
    """Coarsest step whose chi-square tail is at least ``alpha``.

    A heuristic guide rather than a formal test. The singleton step always
    qualifies because its loss is zero.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {alpha}")
    for i in range(1, path.d + 1):
        if path.alpha(i) >= alpha:
            return i, path.partition(i)
    return path.d, path.partition(path.d)
