"""Partitions of variables and the block structures they induce on pairs.

A :class:`Partition` groups the variables ``0..d-1`` into clusters. It induces
a partition of the ``p = d(d-1)/2`` pair positions into blocks: pair ``(i, j)``
lands in block ``(k1, k2)`` when ``i`` and ``j`` belong to clusters ``k1`` and
``k2``. Averaging a pair vector over these blocks is the projector ``Gamma``.

The covariance of a pair vector has a finer structure indexed by the block
pair of ``(r, s)`` and by how the two index pairs overlap; see
:func:`phi`, :func:`varphi` and :func:`cell_labels`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .pairs import n_pairs, pair_indices

MAX_DENSE_PAIRS = 10_000


class CapacityError(RuntimeError):
    """A dense p x p object was requested beyond the configured guard."""


def _check_capacity(p: int, limit: int | None):
    limit = MAX_DENSE_PAIRS if limit is None else limit
    if p > limit:
        raise CapacityError(
            f"p = {p} pairs exceeds the dense limit of {limit}; "
            "use the diagonal covariance mode instead")


@dataclass(frozen=True)
class Partition:
    """Disjoint cover of ``0..d-1`` kept in canonical order.

    Clusters are sorted internally and ordered by their smallest member, so
    two partitions compare equal exactly when they group the same variables.
    """

    clusters: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        clusters = tuple(sorted(
            (tuple(sorted(int(i) for i in c)) for c in self.clusters),
            key=lambda c: c[0] if c else -1))
        if not clusters or any(len(c) == 0 for c in clusters):
            raise ValueError("partition clusters must be nonempty")
        members = [i for c in clusters for i in c]
        d = len(members)
        if sorted(members) != list(range(d)):
            raise ValueError(
                "clusters must be disjoint and cover 1..d exactly")
        object.__setattr__(self, "clusters", clusters)

    @classmethod
    def singletons(cls, d: int) -> "Partition":
        return cls(tuple((i,) for i in range(d)))

    @classmethod
    def single(cls, d: int) -> "Partition":
        return cls((tuple(range(d)),))

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "Partition":
        """Build from a per-variable cluster label (any hashable values)."""
        groups: dict = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        return cls(tuple(tuple(g) for g in groups.values()))

    @classmethod
    def from_json(cls, obj) -> "Partition":
        """Parse a JSON array of arrays of 1-based indices (str or list)."""
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            return cls(tuple(tuple(int(i) - 1 for i in c) for c in obj))
        except TypeError as exc:
            raise ValueError(f"malformed partition: {obj!r}") from exc

    def to_json_obj(self) -> list[list[int]]:
        return [[i + 1 for i in c] for c in self.clusters]

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @property
    def d(self) -> int:
        return sum(len(c) for c in self.clusters)

    @property
    def K(self) -> int:
        return len(self.clusters)

    def __len__(self):
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    def __repr__(self):
        return f"Partition({self.to_json_obj()})"

    def labels(self) -> np.ndarray:
        """Cluster label (position in canonical order) of every variable."""
        out = np.empty(self.d, dtype=np.int64)
        for k, c in enumerate(self.clusters):
            out[list(c)] = k
        return out


def delta_matrix(G: Partition) -> np.ndarray:
    """Cluster membership matrix: 1 where two variables share a cluster."""
    lab = G.labels()
    return (lab[:, None] == lab[None, :]).astype(float)


class BlockStructure:
    """Blocks of pair positions induced by a partition.

    Attributes
    ----------
    partition : Partition
    block_of : ndarray of shape (p,)
        Block label of every pair position.
    sizes : ndarray of shape (L,)
        Number of pairs in each block.
    keys : list of (k1, k2)
        Cluster labels behind each block, ``k1 <= k2``, sorted.
    """

    def __init__(self, partition: Partition):
        self.partition = partition
        self.d = partition.d
        self.p = n_pairs(self.d)
        self.K = partition.K
        lab = partition.labels()
        i, j = pair_indices(self.d)
        k1 = np.minimum(lab[i], lab[j])
        k2 = np.maximum(lab[i], lab[j])
        codes, block_of = np.unique(k1 * self.K + k2, return_inverse=True)
        self.block_of = block_of.astype(np.int64)
        self.keys = [(int(c) // self.K, int(c) % self.K) for c in codes]
        self.L = len(self.keys)
        self.sizes = np.bincount(self.block_of, minlength=self.L)
        # K x K lookup of block labels, -1 where a block is empty
        self.index = np.full((self.K, self.K), -1, dtype=np.int64)
        for ell, (a, b) in enumerate(self.keys):
            self.index[a, b] = self.index[b, a] = ell

    def __repr__(self):
        return f"BlockStructure(K={self.K}, L={self.L}, p={self.p})"

    def blocks(self) -> list[np.ndarray]:
        order = np.argsort(self.block_of, kind="stable")
        return np.split(order, np.cumsum(self.sizes)[:-1])

    def block_means(self, v) -> np.ndarray:
        """Per-block arithmetic means of a length-p vector."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.p,):
            raise ValueError(f"expected a vector of length {self.p}, "
                             f"got shape {v.shape}")
        return np.bincount(self.block_of, weights=v, minlength=self.L) / self.sizes

    def membership(self) -> np.ndarray:
        """Dense p x L block membership matrix B."""
        B = np.zeros((self.p, self.L))
        B[np.arange(self.p), self.block_of] = 1.0
        return B


def n_blocks(G: Partition) -> int:
    """Number of nonempty blocks: between-cluster pairs plus non-trivial clusters."""
    K = G.K
    return K * (K - 1) // 2 + sum(len(c) > 1 for c in G.clusters)


def pair_blocks(G: Partition) -> BlockStructure:
    return BlockStructure(G)


def gamma_apply(bs: BlockStructure, v) -> np.ndarray:
    """Replace every entry of ``v`` by the mean over its block (``Gamma v``)."""
    return bs.block_means(v)[bs.block_of]


def gamma_matrix(bs: BlockStructure, limit: int | None = None) -> np.ndarray:
    """Materialize ``Gamma = B B^+``; only for small p."""
    _check_capacity(bs.p, limit)
    same = bs.block_of[:, None] == bs.block_of[None, :]
    return same / bs.sizes[bs.block_of][:, None]


def is_refinement(G_star: Partition, G: Partition) -> bool:
    """True when ``G_star`` has more clusters and each fits inside one of ``G``."""
    if G_star.d != G.d:
        raise ValueError(f"dimension mismatch: {G_star.d} vs {G.d}")
    if G_star.K <= G.K:
        return False
    lab = G.labels()
    return all(len(set(lab[list(c)])) == 1 for c in G_star.clusters)


def merge(G: Partition, a: int, b: int) -> Partition:
    """Merge clusters ``a`` and ``b`` (positions in canonical order)."""
    if a == b or not (0 <= a < G.K and 0 <= b < G.K):
        raise ValueError(f"invalid cluster labels ({a}, {b}) for K = {G.K}")
    keep = [c for k, c in enumerate(G.clusters) if k not in (a, b)]
    return Partition(tuple(keep) + (G.clusters[a] + G.clusters[b],))


class VarphiKey(NamedTuple):
    """Overlap pattern of two index pairs.

    ``(0, 0)``: disjoint. ``(0, k)``: one shared index, in cluster ``k``.
    ``(k1, k2)`` with ``k1 >= 1``: the same pair, spanning clusters k1, k2.
    Cluster numbers are 1-based so that 0 can mean "no shared index".
    """

    first: int
    second: int

    @property
    def kind(self) -> str:
        if self.first == 0 and self.second == 0:
            return "none"
        return "one" if self.first == 0 else "two"


def phi(bs: BlockStructure, r: int, s: int) -> tuple[int, int]:
    a, b = int(bs.block_of[r]), int(bs.block_of[s])
    return (min(a, b), max(a, b))


def varphi(G: Partition, r: int, s: int) -> VarphiKey:
    d = G.d
    i, j = pair_indices(d)
    if not (0 <= r < i.size and 0 <= s < i.size):
        raise IndexError(f"pair positions ({r + 1}, {s + 1}) outside 1..{i.size}")
    lab = G.labels() + 1
    shared = {int(i[r]), int(j[r])} & {int(i[s]), int(j[s])}
    if not shared:
        return VarphiKey(0, 0)
    if len(shared) == 1:
        return VarphiKey(0, int(lab[shared.pop()]))
    k1, k2 = sorted((int(lab[i[r]]), int(lab[j[r]])))
    return VarphiKey(k1, k2)


def _varphi_parts(G: Partition) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`varphi` over all p x p position pairs."""
    i, j = pair_indices(G.d)
    lab = G.labels() + 1
    ir, jr = i[:, None], j[:, None]
    is_, js = i[None, :], j[None, :]
    eq_ii, eq_ij = ir == is_, ir == js
    eq_ji, eq_jj = jr == is_, jr == js
    nshared = eq_ii.astype(np.int8) + eq_ij + eq_ji + eq_jj
    # the shared index when exactly one coincides
    one = lab[np.where(eq_ii | eq_ij, ir, jr)]
    kr1 = np.minimum(lab[i], lab[j])[:, None]
    kr2 = np.maximum(lab[i], lab[j])[:, None]
    first = np.where(nshared == 2, kr1, 0)
    second = np.where(nshared == 2, kr2, np.where(nshared == 1, one, 0))
    return first, second


def _cell_codes(G: Partition, bs: BlockStructure) -> np.ndarray:
    b = bs.block_of
    lo = np.minimum(b[:, None], b[None, :])
    hi = np.maximum(b[:, None], b[None, :])
    first, second = _varphi_parts(G)
    K1 = G.K + 1
    return ((lo * bs.L + hi) * K1 + first) * K1 + second


def cell_labels(G: Partition, limit: int | None = None,
                bs: BlockStructure | None = None) -> tuple[np.ndarray, int]:
    """Label every entry of a p x p matrix by its covariance cell.

    Entries share a label exactly when they share both the unordered block
    pair and the overlap pattern. Labels are consecutive integers; the
    second return value is their count. The labelling is symmetric.
    """
    bs = bs if bs is not None else BlockStructure(G)
    _check_capacity(bs.p, limit)
    _, inv = np.unique(_cell_codes(G, bs), return_inverse=True)
    inv = inv.reshape(bs.p, bs.p)
    return inv, int(inv.max()) + 1


def sigma_cells(G: Partition, limit: int | None = None) -> dict:
    """Map ``((l1, l2), VarphiKey)`` to the sorted positions ``(r, s)``, r <= s."""
    bs = BlockStructure(G)
    _check_capacity(bs.p, limit)
    codes = _cell_codes(G, bs)
    r, s = np.triu_indices(bs.p)
    K1 = G.K + 1
    cells: dict = {}
    order = np.argsort(codes[r, s], kind="stable")
    for t in order:
        c = int(codes[r[t], s[t]])
        c, second = divmod(c, K1)
        c, first = divmod(c, K1)
        lo, hi = divmod(c, bs.L)
        key = ((lo, hi), VarphiKey(first, second))
        cells.setdefault(key, []).append((int(r[t]), int(s[t])))
    return cells


def cell_average(S, labels: np.ndarray, n_cells: int) -> np.ndarray:
    """Average a p x p matrix over the cells given by :func:`cell_labels`."""
    S = np.asarray(S, dtype=float)
    flat = labels.ravel()
    sums = np.bincount(flat, weights=S.ravel(), minlength=n_cells)
    counts = np.bincount(flat, minlength=n_cells)
    return (sums / counts)[labels]
