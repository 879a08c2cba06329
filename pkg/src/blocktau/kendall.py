"""Empirical Kendall rank correlation matrices.

Two evaluation routes are provided. ``method="fast"`` counts discordant pairs
by merge-sort inversion counting, O(n log n) per variable pair.
``method="matrix"`` sums products of pairwise sign matrices, O(n^2) per pair,
which is also the route the covariance estimators build on. Both return
``(C - D) / N`` from exact integer counts and agree bit for bit.

The theory assumes continuous margins, so tied observations are rejected
unless ``ties="break"`` is requested.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .pairs import pair_indices, unvectorize


class TieError(ValueError):
    """A column of the data contains tied observations."""

    def __init__(self, column: int, count: int):
        self.column = column
        super().__init__(
            f"column {column + 1} contains {count} tied value(s); Kendall "
            "covariance formulas assume continuous margins (pass "
            "ties='break' to break ties by input order)")


def as_data_matrix(data, ties: str = "error") -> np.ndarray:
    """Validate an n x d sample and return it as a float array.

    Parameters
    ----------
    data : array-like of shape (n, d)
    ties : {"error", "break"}
        With ``"break"``, ties are resolved by order of appearance and a
        warning is issued; the returned array then holds ordinal ranks.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"data must be a 2-d array, got {X.ndim}-d")
    n, d = X.shape
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    if d < 2:
        raise ValueError(f"need at least 2 variables, got {d}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contains non-finite values")
    srt = np.sort(X, axis=0)
    n_ties = np.sum(srt[1:] == srt[:-1], axis=0)
    if np.any(n_ties):
        if ties == "error":
            col = int(np.flatnonzero(n_ties)[0])
            raise TieError(col, int(n_ties[col]))
        if ties != "break":
            raise ValueError(f"unknown ties policy {ties!r}")
        warnings.warn("ties broken by order of appearance", stacklevel=2)
        X = ranks(X)
    return X


def ranks(X) -> np.ndarray:
    """Ordinal ranks 0..n-1 per column, ties resolved by row order."""
    X = np.asarray(X)
    order = np.argsort(X, axis=0, kind="stable")
    R = np.empty(X.shape, dtype=np.int64)
    np.put_along_axis(R, order, np.arange(X.shape[0])[:, None], axis=0)
    return R


@dataclass
class TauEstimate:
    """Vectorized empirical Kendall matrix with its sample size."""

    tau: np.ndarray
    d: int
    n: int

    @property
    def p(self) -> int:
        return self.tau.size

    def matrix(self) -> np.ndarray:
        return unvectorize(self.tau, 1.0)


def count_inversions(seq) -> int:
    """Number of pairs ``a < b`` with ``seq[a] > seq[b]`` (distinct values).

    Bottom-up merge sort; each level merges neighbouring runs at once and
    counts, for every element of a right run, the larger elements in its
    left run.
    """
    v = np.asarray(seq, dtype=np.int64)
    n = v.size
    if n < 2:
        return 0
    # compress to 0..n-1 so run offsets cannot collide
    v = np.argsort(np.argsort(v, kind="stable"), kind="stable")
    pos = np.arange(n)
    total = 0
    width = 1
    while width < n:
        run = pos // width
        pair = run // 2
        key = pair * n + v
        right = (run % 2) == 1
        left_keys = key[~right]  # sorted: pairs ascending, runs already sorted
        rk = key[right]
        # end of left run for each right element
        left_end = np.searchsorted(left_keys, pair[right] * n + n, side="left")
        below = np.searchsorted(left_keys, rk, side="right")
        total += int(np.sum(left_end - below))
        # merge each pair of runs
        v = v[np.argsort(key, kind="stable")]
        width *= 2
    return total


def _discordant(x_rank: np.ndarray, y_rank: np.ndarray) -> int:
    order = np.argsort(x_rank, kind="stable")
    return count_inversions(y_rank[order])


def _tau_fast(R: np.ndarray) -> np.ndarray:
    n, d = R.shape
    N = n * (n - 1) // 2
    i, j = pair_indices(d)
    out = np.empty(i.size)
    for r in range(i.size):
        D = _discordant(R[:, i[r]], R[:, j[r]])
        out[r] = (N - 2 * D) / N
    return out


def sign_row_products(X: np.ndarray, rows: slice) -> np.ndarray:
    """Row sums of products of sign matrices for a chunk of observations.

    Returns an array of shape (rows, d, d) whose ``[m, a, b]`` entry is
    ``sum_t sign(x_ta - x_ma) * sign(x_tb - x_mb)``.
    """
    S = np.sign(X[None, :, :] - X[rows, None, :])
    return np.einsum("mti,mtj->mij", S, S, optimize=True)


def _chunk_rows(n: int, d: int, budget: int = 4_000_000) -> int:
    return max(1, min(n, budget // max(1, n * d)))


def _tau_matrix(X: np.ndarray) -> np.ndarray:
    n, d = X.shape
    N = n * (n - 1) // 2
    acc = np.zeros((d, d))
    step = _chunk_rows(n, d)
    for start in range(0, n, step):
        acc += sign_row_products(X, slice(start, start + step)).sum(axis=0)
    i, j = pair_indices(d)
    # acc counts every unordered pair twice
    return (acc[i, j] / 2) / N


def kendall_tau(data, method: str = "fast", ties: str = "error") -> TauEstimate:
    """Empirical Kendall matrix of an n x d sample.

    Parameters
    ----------
    data : array-like of shape (n, d)
    method : {"fast", "matrix"}
        Merge-sort counting or the sign-matrix sum; results are identical.
    ties : {"error", "break"}
        See :func:`as_data_matrix`.

    Returns
    -------
    TauEstimate
    """
    X = as_data_matrix(data, ties=ties)
    n, d = X.shape
    if method == "fast":
        tau = _tau_fast(ranks(X))
    elif method == "matrix":
        tau = _tau_matrix(X)
    else:
        raise ValueError(f"unknown method {method!r}")
    return TauEstimate(tau=tau, d=d, n=n)


def concordance_indicator(data, i: int, j: int) -> np.ndarray:
    """n x n matrix with entry ``[r, s] = 1(x_ri < x_si and x_rj < x_sj)``."""
    if i == j:
        raise ValueError("concordance indicator needs two distinct columns")
    X = np.asarray(data, dtype=float)
    xi, xj = X[:, i], X[:, j]
    return ((xi[:, None] < xi[None, :]) & (xj[:, None] < xj[None, :])).astype(float)
