"""Quarantine experiments: baselines vs centrality-selected quarantine.

Every epidemic runs on the hybrid graph. What differs between rows is only
who gets quarantined: nobody, a random draw, the top-k of a centrality
measure on the symmetric graph (SymC) or on the hybrid graph (Hybrid).
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .centrality import CentralityScores, Measure, centrality, top_k
from .contact import ContactGraph
from .seir import METRICS, EnsembleResult, SeirParams, derive_seed, ensemble

REFERENCE_POPULATION = 3748
REFERENCE_K = 100
REFERENCE_SEEDS = 50

COLUMN_NAMES = {
    "doubling_time": "DB-Time",
    "total_infected_fraction": "T-Inf",
    "peak_infected_time": "PK-Time",
    "peak_infected_fraction": "PK-Inf",
}


class StrategyKind(str, Enum):
    NO_QUARANTINE = "No quarantine"
    RANDOM = "Random"
    SYMC = "SymC"
    HYBRID = "Hybrid"


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    measure: Measure | None = None
    k: int = 0

    def __post_init__(self):
        kind = StrategyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.measure is not None:
            object.__setattr__(self, "measure", Measure(self.measure))
        if kind is StrategyKind.NO_QUARANTINE and self.k != 0:
            raise ValueError("No quarantine requires k = 0")
        if kind is StrategyKind.RANDOM and self.measure is not None:
            raise ValueError("Random quarantine takes no centrality measure")
        if kind in (StrategyKind.SYMC, StrategyKind.HYBRID) and self.measure is None:
            raise ValueError(f"{kind.value} needs a centrality measure")
        if self.k < 0:
            raise ValueError("k must be >= 0")

    @property
    def label(self) -> str:
        return self.kind.value if self.measure is None else f"{self.kind.value}/{self.measure.value}"


def scaled_k(n: int, k_ref: int = REFERENCE_K) -> int:
    """Quarantine size scaled from the reference population."""
    return int(round(k_ref * n / REFERENCE_POPULATION))


def paper_strategies(k: int, measures=tuple(Measure)) -> list[Strategy]:
    rows = [Strategy(StrategyKind.NO_QUARANTINE), Strategy(StrategyKind.RANDOM, k=k)]
    for m in measures:
        rows.append(Strategy(StrategyKind.SYMC, m, k))
        rows.append(Strategy(StrategyKind.HYBRID, m, k))
    return rows


class ScoreCache:
    """Centrality scores computed once per (graph, measure)."""

    def __init__(self):
        self._cache: dict[tuple[int, Measure], CentralityScores] = {}

    def get(self, g: ContactGraph, measure: Measure) -> CentralityScores:
        key = (id(g), Measure(measure))
        if key not in self._cache:
            self._cache[key] = centrality(g, measure)
        return self._cache[key]


def select_quarantine(strategy: Strategy, sym_g: ContactGraph, hybrid_g: ContactGraph,
                      rng_seed: int = 0, scores: ScoreCache | None = None) -> list[str]:
    if set(sym_g.vertices) != set(hybrid_g.vertices):
        raise ValueError("symmetric and hybrid graphs must share their vertex set")
    n = hybrid_g.n
    if strategy.k > n:
        raise ValueError(f"k={strategy.k} exceeds population {n}")
    kind = strategy.kind
    if kind is StrategyKind.NO_QUARANTINE:
        return []
    if kind is StrategyKind.RANDOM:
        rng = np.random.default_rng(rng_seed)
        picks = rng.choice(n, strategy.k, replace=False)
        return sorted(hybrid_g.vertices[i] for i in picks)
    scores = scores or ScoreCache()
    g = sym_g if kind is StrategyKind.SYMC else hybrid_g
    return top_k(scores.get(g, strategy.measure), strategy.k)


@dataclass
class ReportRow:
    strategy: Strategy
    result: EnsembleResult


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    metadata: dict = field(default_factory=dict)

    def row(self, kind: StrategyKind | str, measure: Measure | str | None = None) -> ReportRow:
        kind = StrategyKind(kind)
        measure = Measure(measure) if measure is not None else None
        for r in self.rows:
            if r.strategy.kind is kind and r.strategy.measure == measure:
                return r
        raise KeyError((kind, measure))

    def deltas(self) -> dict[Measure, dict[str, float | None]]:
        """Hybrid minus SymC mean, per measure and metric."""
        out = {}
        for r in self.rows:
            if r.strategy.kind is not StrategyKind.HYBRID:
                continue
            try:
                base = self.row(StrategyKind.SYMC, r.strategy.measure)
            except KeyError:
                continue
            out[r.strategy.measure] = {
                m: (None if r.result.mean[m] is None or base.result.mean[m] is None
                    else r.result.mean[m] - base.result.mean[m])
                for m in METRICS
            }
        return out

    def to_csv(self, path) -> None:
        deltas = self.deltas()
        names = [COLUMN_NAMES[m] for m in METRICS]
        header = (["Method", "Measure"] + names + [f"{n}-std" for n in names]
                  + [f"{n}-delta" for n in names] + ["undefined_doubling", "runs"])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in self.rows:
                s, res = r.strategy, r.result
                d = deltas.get(s.measure) if s.kind is StrategyKind.HYBRID else None
                w.writerow([s.kind.value, s.measure.value if s.measure else "-"]
                           + [_num(res.mean[m]) for m in METRICS]
                           + [_num(res.std[m]) for m in METRICS]
                           + [_num(d[m]) if d else "" for m in METRICS]
                           + [res.undefined_doubling_count, len(res.runs)])


def _num(x) -> str:
    return "" if x is None else f"{x:.4f}"


def run_table(strategies: list[Strategy], sym_g: ContactGraph, hybrid_g: ContactGraph,
              params: SeirParams, threads: int = 1, scores: ScoreCache | None = None,
              metadata: dict | None = None) -> ExperimentReport:
    """One ensemble per strategy, all simulated on the hybrid graph.

    Every row shares the master seed, so rows differ only by their
    quarantine set. Random quarantine is redrawn for every run.
    """
    scores = scores or ScoreCache()
    # centralities first so worker threads only read the cache
    for s in strategies:
        if s.measure is not None:
            scores.get(sym_g if s.kind is StrategyKind.SYMC else hybrid_g, s.measure)

    def one(s: Strategy) -> ReportRow:
        if s.kind is StrategyKind.RANDOM:
            def quarantine(i, s=s):
                return select_quarantine(s, sym_g, hybrid_g, derive_seed(params.seed, i, 1), scores)
        else:
            quarantine = select_quarantine(s, sym_g, hybrid_g, params.seed, scores)
        return ReportRow(s, ensemble(hybrid_g, params, quarantine))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, strategies))
    else:
        rows = [one(s) for s in strategies]
    meta = dict(metadata or {})
    meta.setdefault("seed", params.seed)
    meta.setdefault("N", hybrid_g.n)
    return ExperimentReport(rows, meta)


@dataclass
class SweepGrid:
    """Mean total infected fraction per (initial infected %, quarantined %) cell."""

    infected_fracs: list[float]
    quarantine_fracs: list[float]
    mean: np.ndarray  # NaN marks infeasible cells
    stderr: np.ndarray

    def feasible(self, i: int, j: int) -> bool:
        return not math.isnan(self.mean[i, j])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["infected_pct\\quarantined_pct"] + [_pct(q) for q in self.quarantine_fracs])
            for i, inf in enumerate(self.infected_fracs):
                w.writerow([_pct(inf)] + ["infeasible" if math.isnan(x) else f"{x:.4f}" for x in self.mean[i]])

    def stderr_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["infected_pct\\quarantined_pct"] + [_pct(q) for q in self.quarantine_fracs])
            for i, inf in enumerate(self.infected_fracs):
                w.writerow([_pct(inf)] + ["" if math.isnan(x) else f"{x:.4f}" for x in self.stderr[i]])


def _pct(x: float) -> str:
    return f"{x:g}"


def default_fracs(step: float = 5.0, hi: float = 100.0) -> list[float]:
    return [round(step * i, 6) for i in range(int(round(hi / step)) + 1)]


def budget_sweep(hybrid_g: ContactGraph, measure: Measure | str, infected_fracs, quarantine_fracs,
                 params: SeirParams, scores: ScoreCache | None = None, threads: int = 1) -> SweepGrid:
    """Ensemble mean T-Inf over a grid of initial-infected and quarantined shares.

    Quarantine takes the top of the ranking, so larger budgets are supersets.
    All cells of one row share a derived master seed (common random numbers
    along the quarantine axis).
    """
    scores = scores or ScoreCache()
    ranking = scores.get(hybrid_g, measure).ranking
    n = hybrid_g.n
    fi, fq = list(infected_fracs), list(quarantine_fracs)
    for f in fi + fq:
        if not 0 <= f <= 100:
            raise ValueError(f"fraction {f} outside [0, 100]")
    mean = np.full((len(fi), len(fq)), np.nan)
    err = np.full_like(mean, np.nan)
    cells = []
    for i, inf in enumerate(fi):
        for j, q in enumerate(fq):
            n_inf = math.ceil(inf * n / 100 - 1e-9)
            n_q = math.ceil(q * n / 100 - 1e-9)
            if inf + q <= 100 and n_inf + n_q <= n:
                cells.append((i, j, n_inf, n_q))

    def one(cell):
        i, _, n_inf, n_q = cell
        p = replace(params, initial_infected=n_inf, seed=derive_seed(params.seed, i))
        return ensemble(hybrid_g, p, ranking[:n_q])

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, cells))
    else:
        results = [one(c) for c in cells]
    for (i, j, _, _), res in zip(cells, results):
        mean[i, j] = res.mean["total_infected_fraction"]
        err[i, j] = res.stderr("total_infected_fraction")
    return SweepGrid(fi, fq, mean, err)


def turning_point(grid: SweepGrid, threshold: float = 1.0, step: float = 5.0) -> float | None:
    """Smallest quarantine share after which more quarantine stops paying off.

    For each consecutive pair of quarantine shares the drop in mean T-Inf is
    rescaled to a ``step``-percent increment and averaged over the infected
    rows where both cells are feasible. The first share whose following drop
    is below ``threshold`` percentage points is returned.
    """
    q = grid.quarantine_fracs
    for j in range(len(q) - 1):
        drops = [(grid.mean[i, j] - grid.mean[i, j + 1]) * step / (q[j + 1] - q[j])
                 for i in range(len(grid.infected_fracs))
                 if grid.feasible(i, j) and grid.feasible(i, j + 1)]
        if drops and float(np.mean(drops)) < threshold:
            return q[j]
    return None


def monotone_violations(grid: SweepGrid, tolerance_se: float = 1.0) -> list[tuple[float, float]]:
    """Cells where mean T-Inf rises with quarantine by more than ``tolerance_se`` standard errors."""
    bad = []
    for i, inf in enumerate(grid.infected_fracs):
        for j in range(len(grid.quarantine_fracs) - 1):
            if not (grid.feasible(i, j) and grid.feasible(i, j + 1)):
                continue
            se = max(grid.stderr[i, j], grid.stderr[i, j + 1])
            if grid.mean[i, j + 1] > grid.mean[i, j] + tolerance_se * se:
                bad.append((inf, grid.quarantine_fracs[j + 1]))
    return bad
