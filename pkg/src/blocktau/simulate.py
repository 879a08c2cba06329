"""Monte Carlo studies with elliptical copulas of prescribed block Kendall matrices.

Samples are drawn from the Normal or Student t copula whose Kendall matrix is
given. The latent correlation is ``sin(pi * tau / 2)``; margins are left on the
latent scale since every downstream statistic depends on ranks only.

Random streams are counter based (Philox). Latent column ``k`` of replicate
``r`` is drawn from ``SeedSequence([seed, r, k])`` and the radial chi-square
factor of a t copula from ``SeedSequence([seed, r, d])``, so any replicate can
be regenerated alone and results do not depend on the number of workers.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimator import inverse_sine_transform, sine_transform
from .kendall import kendall_tau
from .pairs import vectorize
from .partitions import BlockStructure, Partition
from .path import PathResult, build_path, select_structure


class DegenerateInputError(ValueError):
    """The empirical Kendall vector equals the truth, so no ratio exists."""


def block_tau_matrix(G: Partition, within, between) -> np.ndarray:
    """Kendall matrix constant on the blocks of ``G``.

    Parameters
    ----------
    within : sequence of float
        Value inside each cluster (ignored for singletons).
    between : array-like of shape (K, K)
        Value between clusters; only the off-diagonal part is used.
    """
    lab = G.labels()
    between = np.asarray(between, dtype=float)
    T = between[lab[:, None], lab[None, :]]
    same = lab[:, None] == lab[None, :]
    T[same] = np.asarray(within, dtype=float)[lab[np.nonzero(same)[0]]]
    np.fill_diagonal(T, 1.0)
    return T


def _between(K, entries):
    B = np.zeros((K, K))
    for (a, b), v in entries.items():
        B[a, b] = B[b, a] = v
    return B


def _preset_table():
    g10 = Partition(((0, 1, 2, 3), (4, 5, 6), (7, 8, 9)))
    g6 = Partition(((0, 1, 2), (3, 4, 5)))
    strong10 = dict(
        true_tau=block_tau_matrix(
            g10, [0.45, 0.40, 0.35],
            _between(3, {(0, 1): 0.30, (0, 2): 0.22, (1, 2): 0.26})),
        partition=g10)
    weak10 = dict(
        true_tau=block_tau_matrix(
            g10, [0.35, 0.30, 0.28],
            _between(3, {(0, 1): 0.25, (0, 2): 0.20, (1, 2): 0.22})),
        partition=g10)
    ar = 0.7 ** np.abs(np.subtract.outer(np.arange(20), np.arange(20)))
    return {
        "example10": dict(strong10, family="normal", n=250, w=0.75),
        "example10_weak": dict(weak10, family="normal", n=250, w=0.75),
        "example10_cauchy": dict(strong10, family="cauchy", n=250, w=0.75),
        "toeplitz20": dict(true_tau=inverse_sine_transform(ar),
                           partition=Partition.singletons(20),
                           family="normal", n=250, w=1.0),
        "calibration6": dict(
            true_tau=block_tau_matrix(g6, [0.5, 0.3], _between(2, {(0, 1): 0.15})),
            partition=g6, family="normal", n=1000, w=0.0),
    }


PRESETS = tuple(_preset_table())


@dataclass(eq=False)
class Scenario:
    """Simulation design.

    Attributes
    ----------
    true_tau : ndarray of shape (d, d)
        Kendall matrix, constant on the blocks of ``partition``.
    partition : Partition
    family : {"normal", "t", "cauchy"}
    df : float, optional
        Degrees of freedom of the t family; "cauchy" fixes it to 1.
    n, replicates : int
    w : float
        Shrinkage weight passed to the path construction.
    alpha_levels : tuple of float
        Levels at which a structure is selected.
    seed : int
    mode : {"auto", "full", "diag"}
    """

    true_tau: np.ndarray
    partition: Partition
    family: str = "normal"
    df: float | None = None
    n: int = 250
    replicates: int = 100
    w: float = 0.75
    alpha_levels: tuple = (0.05,)
    seed: int = 0
    mode: str = "auto"
    name: str = ""
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        T = np.asarray(self.true_tau, dtype=float)
        d = self.partition.d
        if T.shape != (d, d):
            raise ValueError(f"true_tau must be {d} x {d}, got {T.shape}")
        if np.max(np.abs(T - T.T)) > 1e-12:
            raise ValueError("true_tau must be symmetric")
        if np.any(np.diag(T) != 1.0):
            raise ValueError("true_tau must have a unit diagonal")
        off = T[~np.eye(d, dtype=bool)]
        if np.any(np.abs(off) >= 1):
            raise ValueError("off-diagonal Kendall values must lie in (-1, 1)")
        v = vectorize(T)
        bs = BlockStructure(self.partition)
        if np.max(np.abs(bs.block_means(v)[bs.block_of] - v)) > 1e-12:
            raise ValueError("true_tau is not constant on the blocks of the partition")
        family = self.family.lower()
        if family == "cauchy":
            family, self.df = "t", 1.0
        if family not in ("normal", "t"):
            raise ValueError(f"unknown family {self.family!r}")
        if family == "t" and not (self.df and self.df > 0):
            raise ValueError("the t family needs positive degrees of freedom")
        self.family = family
        self.true_tau = T
        self.alpha_levels = tuple(float(a) for a in self.alpha_levels)
        if self.replicates < 0 or self.n < 3:
            raise ValueError("need n >= 3 and replicates >= 0")
        try:
            self._chol = np.linalg.cholesky(sine_transform(T))
        except np.linalg.LinAlgError:
            raise ValueError("latent correlation sin(pi * tau / 2) is not "
                             "positive definite") from None

    @property
    def d(self) -> int:
        return self.partition.d

    def tau_vector(self) -> np.ndarray:
        return vectorize(self.true_tau)

    @classmethod
    def preset(cls, name: str, **overrides) -> "Scenario":
        table = _preset_table()
        if name not in table:
            raise KeyError(f"unknown preset {name!r}; choose from {sorted(table)}")
        kw = dict(table[name], name=name)
        kw.update(overrides)
        return cls(**kw)

    @classmethod
    def from_dict(cls, obj: dict) -> "Scenario":
        obj = dict(obj)
        if "preset" in obj:
            return cls.preset(obj.pop("preset"), **_coerce(obj))
        if "true_tau" not in obj or "partition" not in obj:
            raise ValueError("scenario needs 'true_tau' and 'partition' (or 'preset')")
        return cls(**_coerce(obj))

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "name": self.name, "true_tau": self.true_tau.tolist(),
            "partition": self.partition.to_json_obj(), "family": self.family,
            "df": self.df, "n": self.n, "replicates": self.replicates,
            "w": self.w, "alpha_levels": list(self.alpha_levels),
            "seed": self.seed, "mode": self.mode,
        }


_FIELDS = {"true_tau", "partition", "family", "df", "n", "replicates", "w",
           "alpha_levels", "seed", "mode", "name"}


def _coerce(obj: dict) -> dict:
    unknown = set(obj) - _FIELDS
    if unknown:
        raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
    out = dict(obj)
    if "partition" in out and not isinstance(out["partition"], Partition):
        out["partition"] = Partition.from_json(out["partition"])
    if "true_tau" in out:
        out["true_tau"] = np.asarray(out["true_tau"], dtype=float)
    if "alpha_levels" in out:
        out["alpha_levels"] = tuple(out["alpha_levels"])
    return out


def _stream(seed: int, replicate: int, column: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence([int(seed), int(replicate), int(column)])))


def sample_copula(scenario: Scenario, n: int | None = None, seed: int | None = None,
                  replicate: int = 0) -> np.ndarray:
    """Draw an n x d sample whose copula has Kendall matrix ``true_tau``."""
    n = scenario.n if n is None else int(n)
    seed = scenario.seed if seed is None else seed
    d = scenario.d
    Z = np.column_stack([_stream(seed, replicate, k).standard_normal(n)
                         for k in range(d)])
    Y = Z @ scenario._chol.T
    if scenario.family == "t":
        W = _stream(seed, replicate, d).chisquare(scenario.df, size=n)
        Y = Y / np.sqrt(W / scenario.df)[:, None]
    return Y


def _sq_err_ratio(est, truth, tau_hat) -> tuple[float, float]:
    den = float(np.sum((tau_hat - truth) ** 2))
    if den == 0.0:
        raise DegenerateInputError("empirical Kendall vector equals the truth")
    return float(np.sum((est - truth) ** 2)), den


def metric_nu2(path: PathResult, true_tau_vector) -> float:
    """Best squared-error reduction attainable on the path, relative to tau_hat."""
    truth = np.asarray(true_tau_vector, dtype=float)
    den = _sq_err_ratio(path.tau_hat, truth, path.tau_hat)[1]
    best = min(float(np.sum((t.tau_tilde - truth) ** 2)) for t in path.taus)
    return 1.0 - best / den


def metric_xi(path: PathResult, selected_step: int, true_tau_vector) -> float:
    """Squared-error reduction of the estimate at ``selected_step``."""
    truth = np.asarray(true_tau_vector, dtype=float)
    num, den = _sq_err_ratio(path.tau(selected_step).tau_tilde, truth, path.tau_hat)
    return 1.0 - num / den


@dataclass
class StudyResult:
    records: list
    aggregates: dict

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


def run_replicate(scenario: Scenario, replicate: int, n: int | None = None) -> dict:
    data = sample_copula(scenario, n=n, replicate=replicate)
    tau = kendall_tau(data)
    path = build_path(tau, data, w=scenario.w, mode=scenario.mode)
    truth = scenario.tau_vector()
    rec = {
        "replicate": replicate,
        "nu2": metric_nu2(path, truth),
        "contains_truth": scenario.partition in path.partitions,
        "xi": {}, "selected": {},
    }
    for level in scenario.alpha_levels:
        i, _ = select_structure(path, level)
        rec["selected"][repr(level)] = i
        rec["xi"][repr(level)] = metric_xi(path, i, truth)
    return rec


def run_study(scenario: Scenario, workers: int = 1, n: int | None = None) -> StudyResult:
    """Run all replicates and average the metrics.

    Parameters
    ----------
    scenario : Scenario
    workers : int
        Threads used for replicates; results do not depend on it.
    n : int, optional
        Overrides the scenario sample size.
    """
    reps = range(scenario.replicates)
    if workers > 1 and scenario.replicates > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda r: run_replicate(scenario, r, n), reps))
    else:
        records = [run_replicate(scenario, r, n) for r in reps]
    agg: dict = {"replicates": len(records)}
    if records:
        agg["nu2_mean"] = float(np.mean([r["nu2"] for r in records]))
        agg["xi_mean"] = {k: float(np.mean([r["xi"][k] for r in records]))
                          for k in records[0]["xi"]}
        agg["truth_rate"] = float(np.mean([r["contains_truth"] for r in records]))
    return StudyResult(records, agg)
