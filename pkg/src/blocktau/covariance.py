"""Finite-sample covariance of the vectorized Kendall matrix.

The plug-in estimate is assembled from pairwise sign matrices. For variables
``i, j`` and observations ``m, t`` write ``u[m, t] = sign(x_ti - x_mi) *
sign(x_tj - x_mj)``; it is +1 for a concordant pair of observations, -1 for a
discordant one and 0 on the diagonal. The concordance matrix of the pair is
``A = I + J = (u + 1 - E) / 2`` with ``E`` the identity, so every quantity
needed reduces to row sums of ``u`` and inner products between the ``u``
matrices of two pairs. Both are integer valued and accumulated exactly.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgWarning, lapack, lu_factor, lu_solve

from .kendall import as_data_matrix, concordance_indicator
from .pairs import n_pairs, pair_indices
from .partitions import (
    BlockStructure, Partition, _check_capacity, cell_average, cell_labels)

FULL = "full"
DIAG = "diag"
MAX_CONDITION = 1e12


class SingularCovarianceError(np.linalg.LinAlgError):
    """The covariance estimate cannot be inverted reliably."""


def rank_one_scale(n: int) -> float:
    """Coefficient ``2(2n - 3) / (n(n - 1))`` of the rank-one term."""
    return 2.0 * (2 * n - 3) / (n * (n - 1))


@dataclass
class SigmaEstimate:
    """Covariance estimate of a length-p Kendall vector.

    Attributes
    ----------
    kind : {"full", "diag"}
    values : ndarray
        p x p symmetric matrix, or the length-p diagonal.
    n : int
        Sample size the estimate refers to.
    tau : ndarray, optional
        Kendall vector used in the rank-one term, when known.
    """

    kind: str
    values: np.ndarray
    n: int
    tau: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.kind == FULL:
            v = self.values
            if v.ndim != 2 or v.shape[0] != v.shape[1]:
                raise ValueError("full covariance must be a square matrix")
            scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
            if not np.allclose(v, v.T, rtol=0, atol=1e-12 * scale):
                raise ValueError("full covariance must be symmetric")
        elif self.kind == DIAG:
            if self.values.ndim != 1:
                raise ValueError("diagonal covariance must be a vector")
        else:
            raise ValueError(f"unknown covariance kind {self.kind!r}")

    @property
    def p(self) -> int:
        return self.values.shape[0]

    def diagonal(self) -> np.ndarray:
        return np.diag(self.values).copy() if self.kind == FULL else self.values.copy()

    def dense(self) -> np.ndarray:
        return self.values if self.kind == FULL else np.diag(self.values)


# ---------------------------------------------------------------------------
# individual U-statistics (per pair of pairs)

def theta_hats(data, r: int, s: int) -> dict:
    """U-statistic estimates of theta_1..theta_4 and vartheta_1, vartheta_2.

    Evaluated with row and column sums of the concordance indicators, which
    removes the inner sum of every triple sum.
    """
    X = as_data_matrix(data)
    n, d = X.shape
    if n < 3:
        raise ValueError(f"need at least 3 observations, got {n}")
    i, j = pair_indices(d)
    I1 = concordance_indicator(X, int(i[r]), int(j[r]))
    I2 = concordance_indicator(X, int(i[s]), int(j[s]))
    R1, C1 = I1.sum(axis=1), I1.sum(axis=0)
    R2, C2 = I2.sum(axis=1), I2.sum(axis=0)
    same = float(np.sum(I1 * I2))
    cross = float(np.sum(I1 * I2.T))
    n3 = n * (n - 1) * (n - 2)
    n2 = n * (n - 1)
    return {
        "theta1": (C1 @ C2 - same) / n3,
        "theta2": (R1 @ C2 - cross) / n3,
        "theta3": (C1 @ R2 - cross) / n3,
        "theta4": (R1 @ R2 - same) / n3,
        "vartheta1": same / n2,
        "vartheta2": cross / n2,
    }


def sigma_hat_entry(data, r: int, s: int) -> float:
    """Plug-in covariance of the Kendall entries at pair positions r and s.

    Uses the concordance matrices directly:
    ``1'(I1 + J1)(I2 + J2)1 - 1'{J1 o (I2 + J2)}1`` collects all six
    U-statistics at once.
    """
    X = as_data_matrix(data)
    n, d = X.shape
    if n < 3:
        raise ValueError(f"need at least 3 observations, got {n}")
    i, j = pair_indices(d)
    I1 = concordance_indicator(X, int(i[r]), int(j[r]))
    I2 = concordance_indicator(X, int(i[s]), int(j[s]))
    A1, A2 = I1 + I1.T, I2 + I2.T
    total = A1.sum(axis=0) @ A2.sum(axis=1) - np.sum(I1.T * A2)
    n2 = n * (n - 1)
    t1 = 4.0 * I1.sum() / n2 - 1.0
    t2 = 4.0 * I2.sum() / n2 - 1.0
    return float((4.0 / n2) ** 2 * total - rank_one_scale(n) * (t1 + 1) * (t2 + 1))


# ---------------------------------------------------------------------------
# whole-matrix evaluation

def _chunk(n: int, width: int, budget: int = 4_000_000) -> int:
    return max(1, min(n, budget // max(1, n * width), 2 ** 24 // n))


def pair_moments(X: np.ndarray, gram: bool = True):
    """Row sums and Gram matrix of the per-pair sign products.

    Returns
    -------
    R : ndarray of shape (n, p)
        ``R[m, r] = sum_t u_r[m, t]``.
    G : ndarray of shape (p, p) or None
        ``G[r, s] = sum_{m, t} u_r[m, t] u_s[m, t]``; only when ``gram``.
    """
    n, d = X.shape
    i, j = pair_indices(d)
    p = i.size
    R = np.empty((n, p))
    G = np.zeros((p, p)) if gram else None
    step = _chunk(n, p if gram else d)
    for start in range(0, n, step):
        rows = slice(start, min(n, start + step))
        # entries are -1, 0, 1 and every partial sum stays below 2**24,
        # so single precision accumulates them exactly
        S = np.sign(X[None, :, :] - X[rows, None, :]).astype(np.float32)
        if gram:
            U = S[:, :, i] * S[:, :, j]  # (c, n, p)
            R[rows] = U.sum(axis=1, dtype=np.float64)
            U = U.reshape(-1, p)
            G += (U.T @ U).astype(np.float64)
        else:
            prod = np.matmul(S.transpose(0, 2, 1), S)
            R[rows] = prod[:, i, j]
    return R, G


def sigma_hat(data, mode: str = FULL, limit: int | None = None) -> SigmaEstimate:
    """Plug-in estimate of the covariance of the Kendall vector.

    Parameters
    ----------
    data : array-like of shape (n, d)
    mode : {"full", "diag"}
        ``"diag"`` evaluates only the variances and needs O(p) memory.
    limit : int, optional
        Override of the dense-size guard for ``"full"``.
    """
    X = as_data_matrix(data)
    n, d = X.shape
    if n < 3:
        raise ValueError(f"need at least 3 observations, got {n}")
    p = n_pairs(d)
    if mode == FULL:
        _check_capacity(p, limit)
    elif mode != DIAG:
        raise ValueError(f"unknown mode {mode!r}")
    R, G = pair_moments(X, gram=(mode == FULL))
    n2 = n * (n - 1)
    su = R.sum(axis=0)
    tau = su / n2
    a = (n - 1 + R) / 2.0
    c = rank_one_scale(n)
    t1 = tau + 1.0
    if mode == FULL:
        inner = 0.25 * (n2 + su[:, None] + su[None, :] + G)
        total = a.T @ a - 0.5 * inner
        values = (4.0 / n2) ** 2 * total - c * np.outer(t1, t1)
        values = (values + values.T) / 2.0
    else:
        inner = 0.25 * (2 * n2 + 2 * su)
        total = np.einsum("mr,mr->r", a, a) - 0.5 * inner
        values = (4.0 / n2) ** 2 * total - c * (t1 * t1)
    return SigmaEstimate(mode, values, n, tau)


# ---------------------------------------------------------------------------
# structured averaging and shrinkage

def theta_part(sigma: SigmaEstimate, tau=None) -> np.ndarray:
    """Recover the theta component by adding back the rank-one term."""
    tau = sigma.tau if tau is None else np.asarray(tau, dtype=float)
    if tau is None:
        raise ValueError("the Kendall vector behind the estimate is required")
    c = rank_one_scale(sigma.n)
    t1 = tau + 1.0
    if sigma.kind == FULL:
        return sigma.values + c * np.outer(t1, t1)
    return sigma.values + c * t1 * t1


def sigma_tilde(sigma: SigmaEstimate, tau_tilde, G: Partition,
                mode: str | None = None, tau_hat=None,
                labels: tuple[np.ndarray, int] | None = None) -> SigmaEstimate:
    """Average the estimate over the cells implied by ``G``.

    The theta component is averaged and the rank-one term is rebuilt from the
    block-constant ``tau_tilde``, so the result is cell-constant.

    Parameters
    ----------
    sigma : SigmaEstimate
        Plug-in estimate; must carry its Kendall vector unless ``tau_hat``
        is given.
    tau_tilde : array-like of length p
    G : Partition
    mode : {"full", "diag"}, optional
        Defaults to the kind of ``sigma``.
    labels : (ndarray, int), optional
        Precomputed :func:`cell_labels` output for ``G``.
    """
    mode = sigma.kind if mode is None else mode
    if mode == FULL and sigma.kind == DIAG:
        raise ValueError("a full estimate cannot be built from a diagonal one")
    if mode not in (FULL, DIAG):
        raise ValueError(f"unknown mode {mode!r}")
    tt = np.asarray(tau_tilde, dtype=float)
    theta = theta_part(sigma, tau_hat)
    c = rank_one_scale(sigma.n)
    t1 = tt + 1.0
    if mode == FULL:
        lab, n_cells = labels if labels is not None else cell_labels(G)
        values = cell_average(theta, lab, n_cells) - c * np.outer(t1, t1)
        return SigmaEstimate(FULL, values, sigma.n, sigma.tau)
    diag = theta if theta.ndim == 1 else np.diag(theta)
    bs = BlockStructure(G)
    values = bs.block_means(diag)[bs.block_of] - c * t1 * t1
    return SigmaEstimate(DIAG, values, sigma.n, sigma.tau)


def shrink(sigma: SigmaEstimate, w: float) -> SigmaEstimate:
    """Convex combination ``(1 - w) * sigma + w * diag(sigma)``."""
    w = float(w)
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"shrinkage weight must lie in [0, 1], got {w}")
    if sigma.kind == DIAG or w == 0.0:
        return sigma
    if w == 1.0:
        return SigmaEstimate(DIAG, sigma.diagonal(), sigma.n, sigma.tau)
    values = (1.0 - w) * sigma.values
    np.fill_diagonal(values, np.diag(sigma.values))
    return replace(sigma, values=values)


# ---------------------------------------------------------------------------
# solving

class SigmaSolver:
    """Factorization of a covariance estimate for repeated solves."""

    def __init__(self, sigma: SigmaEstimate, context: str = ""):
        self.kind = sigma.kind
        where = f" at {context}" if context else ""
        hint = "; increase the shrinkage weight w"
        if sigma.kind == DIAG:
            v = sigma.values
            if np.any(v <= 0):
                raise SingularCovarianceError(
                    f"covariance diagonal has non-positive entries{where}{hint}")
            if v.max() / v.min() > MAX_CONDITION:
                raise SingularCovarianceError(
                    f"covariance is ill-conditioned{where}{hint}")
            self._diag = v
        else:
            A = sigma.values
            with warnings.catch_warnings():
                # singularity is reported through the condition estimate
                warnings.simplefilter("ignore", LinAlgWarning)
                lu, piv = lu_factor(A, check_finite=True)
            anorm = np.max(np.sum(np.abs(A), axis=0))
            rcond, info = lapack.dgecon(lu, anorm, norm="1")
            if info != 0 or not rcond > 1.0 / MAX_CONDITION:
                cond = np.inf if rcond == 0 else 1.0 / rcond
                raise SingularCovarianceError(
                    f"covariance is singular or ill-conditioned "
                    f"(condition estimate {cond:.3g}){where}{hint}")
            self._lu = (lu, piv)

    def solve(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == DIAG:
            return v / (self._diag if v.ndim == 1 else self._diag[:, None])
        return lu_solve(self._lu, v)


def solve_sigma(sigma: SigmaEstimate, v) -> np.ndarray:
    """Solve ``sigma @ x = v``; raises :class:`SingularCovarianceError`."""
    return SigmaSolver(sigma).solve(v)


# ---------------------------------------------------------------------------
# binary dump of a full estimate

_MAGIC = b"SIGM"
_HEADER = struct.Struct("<4sIII")


def write_sigma_binary(path, sigma: SigmaEstimate):
    """Store the lower triangle (row-major, float64 little-endian)."""
    if sigma.kind != FULL:
        raise ValueError("only full estimates can be dumped")
    p = sigma.p
    rows, cols = np.tril_indices(p)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, p, 0, 0))
        fh.write(sigma.values[rows, cols].astype("<f8").tobytes())


def read_sigma_binary(path, n: int = 0) -> SigmaEstimate:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, p, _, _ = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError("not a covariance dump (bad magic)")
    tri = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if tri.size != p * (p + 1) // 2:
        raise ValueError("truncated covariance dump")
    out = np.empty((p, p))
    rows, cols = np.tril_indices(p)
    out[rows, cols] = tri
    out[cols, rows] = tri
    return SigmaEstimate(FULL, out, n)
