"""Helpers used by the test suite to cross-check the library.

Not part of the public API.
"""
from __future__ import annotations

import numpy as np

from .partitions import BlockStructure, Partition


def weighted_projection_check(tau_hat, G: Partition, sigma) -> np.ndarray:
    """Generalized least-squares fit of a block-constant vector.

    Computes ``B (B' S^{-1} B)^{-1} B' S^{-1} tau_hat`` with dense linear
    algebra. When ``sigma`` is constant on the cells of ``G`` this equals the
    plain block means.
    """
    t = np.asarray(getattr(tau_hat, "tau", tau_hat), dtype=float)
    S = np.asarray(getattr(sigma, "values", sigma), dtype=float)
    B = BlockStructure(G).membership()
    SiB = np.linalg.solve(S, B)
    coef = np.linalg.solve(B.T @ SiB, SiB.T @ t)
    return B @ coef


def random_partition(rng: np.random.Generator, d: int, K: int | None = None) -> Partition:
    """Uniform random labels in ``0..K-1`` (empty clusters are dropped)."""
    K = int(rng.integers(1, d + 1)) if K is None else K
    return Partition.from_labels(rng.integers(0, K, size=d).tolist())


def random_cell_constant_spd(rng: np.random.Generator, G: Partition) -> np.ndarray:
    """Random symmetric positive definite matrix constant on the cells of ``G``.

    A random symmetric cell-constant matrix is shifted by a multiple of the
    identity, which is itself cell-constant.
    """
    from .partitions import cell_labels

    lab, n_cells = cell_labels(G)
    vals = rng.normal(size=n_cells)
    A = vals[lab]
    A = (A + A.T) / 2.0
    lam = np.linalg.eigvalsh(A).min()
    return A + (abs(lam) + rng.uniform(0.5, 2.0)) * np.eye(A.shape[0])
