"""Discrete-time stochastic SEIR dynamics on a contact graph.

Every day, synchronously: a susceptible vertex with ``k`` infectious
in-neighbours is exposed with probability ``1 - (1 - beta)**k``, an exposed
vertex becomes infectious with probability ``sigma`` and an infectious one
recovers with probability ``gamma``. Quarantined vertices sit in ``Q`` for
the whole run and never interact.

Each run owns one random generator and draws exactly one uniform per vertex
per simulated day, so runs simulated together in a batch are bit-identical
to the same runs simulated alone.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Collection, Sequence

import numpy as np

from .contact import ContactGraph

S, E, I, R, Q = range(5)
COMPARTMENTS = ("S", "E", "I", "R", "Q")
METRICS = ("doubling_time", "total_infected_fraction", "peak_infected_time", "peak_infected_fraction")

BATCH = 64


@dataclass(frozen=True)
class SeirParams:
    beta: float = 0.155
    sigma: float = 1 / 5.2
    gamma: float = 1 / 12.39
    initial_infected: int = 50
    max_days: int = 300
    runs: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        for name in ("sigma", "gamma"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if self.initial_infected < 0:
            raise ValueError("initial_infected must be >= 0")
        if self.max_days < 1:
            raise ValueError("max_days must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")


@dataclass
class SeirTrace:
    """Per-day compartment counts, day 0 .. max_days."""

    counts: np.ndarray  # (max_days + 1, 5), columns S E I R Q
    n: int
    states: np.ndarray | None = None  # (max_days + 1, N) when recorded

    def __getattr__(self, name):
        if name in COMPARTMENTS:
            return self.counts[:, COMPARTMENTS.index(name)]
        raise AttributeError(name)

    @property
    def cumulative_infected(self) -> np.ndarray:
        return self.counts[:, E] + self.counts[:, I] + self.counts[:, R]

    @property
    def days(self) -> int:
        return len(self.counts) - 1


@dataclass(frozen=True)
class EpidemicMetrics:
    doubling_time: float | None
    total_infected_fraction: float
    peak_infected_time: float
    peak_infected_fraction: float


def derive_seed(master: int, *key: int) -> int:
    """Child seed: SeedSequence hash of ``(master, *key)`` as an unsigned 64-bit int.

    Run ``i`` of an ensemble uses ``derive_seed(master, i)``.
    """
    ss = np.random.SeedSequence(entropy=int(master) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _quarantine_mask(g: ContactGraph, quarantine: Collection[str]) -> np.ndarray:
    mask = np.zeros(g.n, dtype=bool)
    for v in quarantine:
        mask[g.index(v)] = True
    return mask


def _run_batch(At, n: int, qmasks: Sequence[np.ndarray], seeds: Sequence[int],
               params: SeirParams, keep_states: bool = False):
    runs = len(seeds)
    T = params.max_days
    rngs = [np.random.default_rng(s) for s in seeds]
    states = np.full((n, runs), S, dtype=np.int8)
    for r in range(runs):
        qm = qmasks[r]
        states[qm, r] = Q
        pool = np.flatnonzero(~qm)
        if params.initial_infected > len(pool):
            raise ValueError(f"initial_infected={params.initial_infected} exceeds the "
                             f"{len(pool)} non-quarantined vertices")
        states[rngs[r].choice(pool, size=params.initial_infected, replace=False), r] = I

    counts = np.zeros((runs, T + 1, 5), dtype=np.int64)

    def tally(block):
        return np.stack([(block == c).sum(axis=0) for c in range(5)], axis=-1)

    counts[:, 0] = tally(states)
    history = [states[:, 0].copy()] if keep_states else None
    active = (counts[:, 0, E] + counts[:, 0, I]) > 0
    log_keep = math.log1p(-params.beta) if params.beta < 1 else None
    for day in range(1, T + 1):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            counts[:, day:] = counts[:, day - 1:day]
            break
        sub = states[:, idx]
        k = At @ (sub == I).astype(np.float64)
        if log_keep is None:
            p_inf = (k > 0).astype(np.float64)
        else:
            p_inf = -np.expm1(k * log_keep)
        u = np.empty((n, len(idx)))
        for j, r in enumerate(idx):
            u[:, j] = rngs[r].random(n)
        new = sub.copy()
        new[(sub == S) & (u < p_inf)] = E
        new[(sub == E) & (u < params.sigma)] = I
        new[(sub == I) & (u < params.gamma)] = R
        states[:, idx] = new
        counts[:, day] = counts[:, day - 1]
        counts[idx, day] = tally(new)
        active[idx] = (counts[idx, day, E] + counts[idx, day, I]) > 0
        if keep_states:
            history.append(states[:, 0].copy())
    if keep_states:
        last = history[-1]
        history.extend(last.copy() for _ in range(T + 1 - len(history)))
        history = np.stack(history)
    return counts, history


def simulate(g: ContactGraph, params: SeirParams, quarantine: Collection[str] = (),
             rng_seed: int | None = None, keep_states: bool = False) -> SeirTrace:
    """One stochastic run; ``rng_seed`` defaults to ``params.seed``."""
    seed = params.seed if rng_seed is None else rng_seed
    At = g.adjacency().T.tocsr()
    counts, history = _run_batch(At, g.n, [_quarantine_mask(g, quarantine)], [seed], params, keep_states)
    return SeirTrace(counts[0], g.n, history)


def run_metrics(trace: SeirTrace, n: int, initial_infected: int) -> EpidemicMetrics:
    cum = trace.cumulative_infected.astype(float)
    infected = trace.I.astype(float)
    doubling = None
    if initial_infected > 0:
        target = 2 * initial_infected
        hit = np.flatnonzero(cum >= target)
        if len(hit):
            d = int(hit[0])
            if d == 0:
                doubling = 0.0
            else:
                doubling = float((d - 1) + (target - cum[d - 1]) / (cum[d] - cum[d - 1]))
    peak_day = int(np.argmax(infected))
    return EpidemicMetrics(
        doubling_time=doubling,
        total_infected_fraction=float(100.0 * cum[-1] / n),
        peak_infected_time=float(peak_day),
        peak_infected_fraction=float(100.0 * infected[peak_day] / n),
    )


@dataclass
class EnsembleResult:
    runs: list[EpidemicMetrics]
    mean: dict[str, float | None]
    std: dict[str, float | None]
    undefined_doubling_count: int
    mean_counts: np.ndarray = field(repr=False)

    def stderr(self, metric: str) -> float:
        vals = self.values(metric)
        if len(vals) < 2:
            return 0.0
        return self.std[metric] / math.sqrt(len(vals))

    def values(self, metric: str) -> list[float]:
        return [getattr(m, metric) for m in self.runs if getattr(m, metric) is not None]

    def to_dict(self) -> dict:
        out = dict(self.mean)
        out["stddevs"] = dict(self.std)
        out["undefined_doubling_count"] = self.undefined_doubling_count
        out["runs"] = len(self.runs)
        return out


def _aggregate(metrics: list[EpidemicMetrics], mean_counts) -> EnsembleResult:
    mean, std = {}, {}
    for name in METRICS:
        vals = np.array([getattr(m, name) for m in metrics if getattr(m, name) is not None], dtype=float)
        if len(vals) == 0:
            mean[name] = std[name] = None
            continue
        mean[name] = float(vals.mean())
        std[name] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    undefined = sum(1 for m in metrics if m.doubling_time is None)
    return EnsembleResult(metrics, mean, std, undefined, mean_counts)


QuarantineSpec = Collection[str] | Callable[[int], Collection[str]]


def ensemble(g: ContactGraph, params: SeirParams, quarantine: QuarantineSpec = (),
             master_seed: int | None = None) -> EnsembleResult:
    """``params.runs`` independent runs; run ``i`` uses ``derive_seed(master, i)``.

    ``quarantine`` is either one fixed set or a callable giving the set for
    run ``i`` (used for baselines that redraw their selection every run).
    """
    master = params.seed if master_seed is None else master_seed
    At = g.adjacency().T.tocsr()
    fixed = None if callable(quarantine) else _quarantine_mask(g, quarantine)
    metrics: list[EpidemicMetrics] = []
    total = np.zeros((params.max_days + 1, 5))
    for lo in range(0, params.runs, BATCH):
        idx = range(lo, min(lo + BATCH, params.runs))
        seeds = [derive_seed(master, i) for i in idx]
        qmasks = [fixed if fixed is not None else _quarantine_mask(g, quarantine(i)) for i in idx]
        counts, _ = _run_batch(At, g.n, qmasks, seeds, params)
        for c in counts:
            metrics.append(run_metrics(SeirTrace(c, g.n), g.n, params.initial_infected))
        total += counts.sum(axis=0)
    return _aggregate(metrics, total / params.runs)


def write_trace(counts: np.ndarray, path) -> None:
    """CSV ``day,S,E,I,R,Q,cumulative_infected`` for one run or an ensemble mean."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["day", *COMPARTMENTS, "cumulative_infected"])
        for d, row in enumerate(counts):
            vals = [_fmt(x) for x in row]
            w.writerow([d, *vals, _fmt(row[E] + row[I] + row[R])])


def _fmt(x) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def write_metrics(result: EnsembleResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def metrics_dict(m: EpidemicMetrics) -> dict:
    return asdict(m)
