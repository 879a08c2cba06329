"""Block-averaged Kendall estimator, Mahalanobis loss and elliptical conversions.

Under a partition ``G`` the structured estimate of the Kendall vector is the
per-block mean of the empirical one. Because the covariance of the empirical
vector is constant on the cells implied by ``G``, the generalized least
squares fit coincides with these plain means, so no covariance is needed to
compute them.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lapack, lu_factor

from .covariance import MAX_CONDITION, SigmaEstimate, SingularCovarianceError, SigmaSolver
from .kendall import TauEstimate
from .pairs import dimension_for, unvectorize, vectorize
from .partitions import BlockStructure, Partition

EPS_CORRELATION_SHRINK = 1e-3


@dataclass
class BlockTauEstimate:
    """Block-constant Kendall vector with the values per block.

    Attributes
    ----------
    tau_tilde : ndarray of shape (p,)
    partition : Partition
    per_block_values : ndarray of shape (L,)
        Ordered like ``BlockStructure(partition).keys``.
    """

    tau_tilde: np.ndarray
    partition: Partition
    per_block_values: np.ndarray

    def matrix(self) -> np.ndarray:
        return unvectorize(self.tau_tilde, 1.0)


def _tau_vector(tau_hat) -> np.ndarray:
    if isinstance(tau_hat, TauEstimate):
        return tau_hat.tau
    return np.asarray(tau_hat, dtype=float)


def project_tau(tau_hat, G: Partition, bs: BlockStructure | None = None) -> BlockTauEstimate:
    """Replace every Kendall entry by the mean of its block under ``G``."""
    t = _tau_vector(tau_hat)
    if dimension_for(t.size) != G.d:
        raise ValueError(f"vector of length {t.size} does not match d = {G.d}")
    bs = bs if bs is not None else BlockStructure(G)
    means = bs.block_means(t)
    return BlockTauEstimate(means[bs.block_of], G, means)


def loss(t, tau_hat, sigma: SigmaEstimate | SigmaSolver) -> float:
    """Mahalanobis distance ``(tau_hat - t)' sigma^{-1} (tau_hat - t)``."""
    diff = _tau_vector(tau_hat) - np.asarray(t, dtype=float)
    solver = sigma if isinstance(sigma, SigmaSolver) else SigmaSolver(sigma)
    return float(diff @ solver.solve(diff))


# evaluated in extended precision where the platform has it, so that the
# double results are correctly rounded (1/3 maps to exactly 0.5 and back)
_WIDE = np.longdouble
_HALF_PI = 2 * np.arctan(_WIDE(1))


def sine_transform(tau_matrix) -> np.ndarray:
    """Map a Kendall matrix to linear correlation via ``sin(pi * t / 2)``."""
    T = np.asarray(tau_matrix, dtype=float)
    if np.any(np.abs(T) > 1):
        raise ValueError("Kendall entries must lie in [-1, 1]")
    P = np.sin(T.astype(_WIDE) * _HALF_PI).astype(float)
    if P.ndim == 2:
        np.fill_diagonal(P, 1.0)
    return P


def inverse_sine_transform(P) -> np.ndarray:
    """Map linear correlation back to Kendall via ``(2 / pi) * arcsin(rho)``."""
    P = np.asarray(P, dtype=float)
    if np.any(np.abs(P) > 1):
        raise ValueError("correlations must lie in [-1, 1]")
    T = (np.arcsin(P.astype(_WIDE)) / _HALF_PI).astype(float)
    if T.ndim == 2:
        np.fill_diagonal(T, 1.0)
    return T


def average_symmetric(M, G: Partition) -> np.ndarray:
    """Average off-diagonal entries over blocks and diagonal ones within clusters."""
    M = np.asarray(M, dtype=float)
    bs = BlockStructure(G)
    off = bs.block_means(vectorize((M + M.T) / 2.0))[bs.block_of]
    out = unvectorize(off, 0.0)
    lab = G.labels()
    diag = np.bincount(lab, weights=np.diag(M)) / np.bincount(lab)
    out[np.diag_indices_from(out)] = diag[lab]
    return out


def precision_matrix(P_tilde, G: Partition, shrink: bool = False) -> np.ndarray:
    """Block-structured inverse of a correlation matrix.

    Parameters
    ----------
    P_tilde : ndarray of shape (d, d)
        Correlation matrix, normally block-constant under ``G``.
    G : Partition
    shrink : bool
        Replace ``P`` by ``(1 - eps) P + eps I`` with ``eps = 1e-3`` before
        inverting, a remedy for nearly singular inputs.
    """
    P = np.asarray(P_tilde, dtype=float)
    if shrink:
        P = (1.0 - EPS_CORRELATION_SHRINK) * P + EPS_CORRELATION_SHRINK * np.eye(P.shape[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(P)
    rcond, info = lapack.dgecon(lu, np.max(np.sum(np.abs(P), axis=0)), norm="1")
    if info != 0 or not rcond > 1.0 / MAX_CONDITION:
        raise SingularCovarianceError(
            "correlation matrix is singular or ill-conditioned; "
            "enable the correlation shrinkage option")
    inv = np.linalg.solve(P, np.eye(P.shape[0]))
    return average_symmetric(inv, G)

