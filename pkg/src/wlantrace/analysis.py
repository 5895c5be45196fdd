"""Stability of superspreader rankings across accumulated weeks.

Rankings are compared with extrapolated rank-biased overlap. The finite sum
is evaluated in exact rational arithmetic and rounded once at the end, so
identical lists score exactly 1 and the score is exactly symmetric.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .centrality import Measure, centrality, top_k
from .contact import ContactConfig, GraphMode, build_graph
from .trajectory import DAY, Trajectory, restrict

WEEK = 7 * DAY
DEFAULT_P = 0.9


@dataclass(frozen=True)
class RankedList:
    ids: tuple[str, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        if len(set(self.ids)) != len(self.ids):
            raise ValueError(f"ranked list {self.label!r} contains duplicate ids")

    def __len__(self) -> int:
        return len(self.ids)


def rbo(list_a: RankedList | Sequence[str], list_b: RankedList | Sequence[str], p: float = DEFAULT_P) -> float:
    """Extrapolated rank-biased overlap at depth ``min(len(a), len(b))``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"persistence p must be in (0, 1), got {p}")
    a = list_a.ids if isinstance(list_a, RankedList) else tuple(list_a)
    b = list_b.ids if isinstance(list_b, RankedList) else tuple(list_b)
    if not a or not b:
        raise ValueError("rbo needs two non-empty lists")
    RankedList(a), RankedList(b)  # duplicate check
    d = min(len(a), len(b))
    q = Fraction(p)
    seen_a, seen_b = set(), set()
    overlap = 0
    total = Fraction(0)
    weight = Fraction(1)  # p^(i-1)
    for i in range(d):
        x, y = a[i], b[i]
        if x == y:
            overlap += 1
        else:
            overlap += (x in seen_b) + (y in seen_a)
        seen_a.add(x)
        seen_b.add(y)
        total += weight * Fraction(overlap, i + 1)
        weight *= q
    # after the loop weight == p^d
    return float(total * (1 - q) + Fraction(overlap, d) * weight)


@dataclass
class SimilarityMatrix:
    labels: list[str]
    values: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        if self.values.shape != (n, n):
            raise ValueError(f"matrix shape {self.values.shape} does not match {n} labels")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window"] + self.labels)
            for label, row in zip(self.labels, self.values):
                w.writerow([label] + [repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "SimilarityMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        labels = rows[0][1:]
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        return cls(labels, values)


def similarity_matrix(lists: Sequence[RankedList], p: float = DEFAULT_P) -> SimilarityMatrix:
    n = len(lists)
    values = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = rbo(lists[i], lists[j], p)
    return SimilarityMatrix([r.label for r in lists], values)


def data_span(trajectories: dict[str, Trajectory], utc_offset: int = 0) -> tuple[int, int]:
    """First local midnight at or before the earliest arrival, and the latest departure."""
    first = min((t.arrival for tr in trajectories.values() for t in tr.tracklets), default=None)
    if first is None:
        raise ValueError("trajectory store is empty")
    last = max(t.arrival + t.stay for tr in trajectories.values() for t in tr.tracklets)
    start = ((first + utc_offset) // DAY) * DAY - utc_offset
    return start, last


def weeks_covered(trajectories: dict[str, Trajectory], utc_offset: int = 0) -> int:
    """Number of calendar weeks (from the first midnight) that contain data."""
    start, last = data_span(trajectories, utc_offset)
    return max(1, math.ceil((last - start) / WEEK))


def window_label(n_weeks: int) -> str:
    return f"first-{n_weeks}-weeks"


def accumulated_week_matrix(trajectories: dict[str, Trajectory], weeks: int,
                            measure: Measure | str = Measure.BETWEENNESS, k: int = 100,
                            cfg: ContactConfig = ContactConfig(), p: float = DEFAULT_P,
                            utc_offset: int = 0, threads: int = 1) -> SimilarityMatrix:
    """RBO between the top-k of hybrid graphs over weeks 1..N, for N = 1..weeks.

    Every accumulated graph keeps the full person set as vertices so that
    scores are comparable across windows.
    """
    if weeks < 1:
        raise ValueError("weeks must be >= 1")
    have = weeks_covered(trajectories, utc_offset)
    if have < weeks:
        raise ValueError(f"trajectory store covers {have} week(s) but {weeks} were requested "
                         f"(short by {weeks - have})")
    start, _ = data_span(trajectories, utc_offset)

    def ranked(n_weeks: int) -> RankedList:
        window = restrict(trajectories, start, start + n_weeks * WEEK, keep_empty=True)
        g = build_graph(window, cfg, GraphMode.HYBRID)
        return RankedList(top_k(centrality(g, measure), min(k, g.n)), window_label(n_weeks))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            lists = list(pool.map(ranked, range(1, weeks + 1)))
    else:
        lists = [ranked(n) for n in range(1, weeks + 1)]
    return similarity_matrix(lists, p)
