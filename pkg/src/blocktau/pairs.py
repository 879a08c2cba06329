"""Vectorization of symmetric matrices over their strict upper triangle.

Pairs ``(i, j)`` with ``i < j`` are enumerated lexicographically, so for
``d = 4`` the order is (0,1), (0,2), (0,3), (1,2), (1,3), (2,3). All indices
are 0-based; error messages report 1-based positions.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

SYMMETRY_TOL = 1e-12


def n_pairs(d: int) -> int:
    """Number of unordered pairs ``d(d-1)/2``."""
    if d < 2:
        raise ValueError(f"dimension must be at least 2, got {d}")
    return d * (d - 1) // 2


@lru_cache(maxsize=64)
def _pair_arrays(d: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(d, k=1)
    i.setflags(write=False)
    j.setflags(write=False)
    return i, j


def pair_indices(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Return read-only arrays ``(i, j)`` of length p giving each flat pair."""
    n_pairs(d)
    return _pair_arrays(d)


class PairIndex:
    """Bijection between flat positions ``0..p-1`` and pairs ``i < j``."""

    def __init__(self, d: int):
        self.d = int(d)
        self.p = n_pairs(self.d)

    def __repr__(self):
        return f"PairIndex(d={self.d}, p={self.p})"

    def to_pair(self, r: int) -> tuple[int, int]:
        if not 0 <= r < self.p:
            raise IndexError(f"pair position {r + 1} outside 1..{self.p}")
        i, j = _pair_arrays(self.d)
        return int(i[r]), int(j[r])

    def to_flat(self, i: int, j: int) -> int:
        if not (0 <= i < j < self.d):
            raise ValueError(
                f"need 1 <= i < j <= {self.d}, got ({i + 1}, {j + 1})")
        # pairs preceding row i: sum_{k<i} (d-1-k)
        return i * (2 * self.d - i - 1) // 2 + (j - i - 1)

    def flat_matrix(self) -> np.ndarray:
        """d x d integer matrix of flat positions, -1 on the diagonal."""
        out = np.full((self.d, self.d), -1, dtype=np.int64)
        i, j = _pair_arrays(self.d)
        out[i, j] = np.arange(self.p)
        out[j, i] = np.arange(self.p)
        return out


def vectorize(R) -> np.ndarray:
    """Stack the strict upper triangle of a symmetric matrix into a vector.

    Raises
    ------
    ValueError
        If ``R`` is not square or deviates from symmetry by more than 1e-12.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {R.shape}")
    if R.shape[0] < 2:
        raise ValueError("matrix must be at least 2 x 2")
    asym = np.max(np.abs(R - R.T))
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric (max deviation {asym:.3g})")
    i, j = _pair_arrays(R.shape[0])
    return R[i, j].copy()


def dimension_for(p: int) -> int:
    """Inverse of :func:`n_pairs`; raises if ``p`` is not triangular."""
    d = int(round((1 + np.sqrt(1 + 8 * p)) / 2))
    if d < 2 or d * (d - 1) // 2 != p:
        raise ValueError(f"{p} is not a valid pair count d(d-1)/2")
    return d


def unvectorize(v, diag_value: float = 1.0) -> np.ndarray:
    """Rebuild the symmetric matrix whose upper triangle is ``v``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError("expected a 1-d vector")
    d = dimension_for(v.size)
    i, j = _pair_arrays(d)
    R = np.empty((d, d))
    R[i, j] = v
    R[j, i] = v
    np.fill_diagonal(R, diag_value)
    return R
