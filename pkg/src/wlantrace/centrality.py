"""Degree, closeness and betweenness centrality on contact graphs.

Closeness and betweenness share one breadth-first sweep that processes a
block of sources at a time with sparse matrix products: path counts are
pushed level by level along arcs, and Brandes' dependency accumulation runs
the levels backwards.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .contact import ContactGraph

BLOCK = 256


class Measure(str, Enum):
    DEGREE = "degree"
    CLOSENESS = "closeness"
    BETWEENNESS = "betweenness"


@dataclass(frozen=True)
class CentralityScores:
    measure: Measure
    scores: dict[str, float]
    ranking: tuple[str, ...]

    @classmethod
    def from_array(cls, measure, vertices, values) -> "CentralityScores":
        scores = {v: float(x) for v, x in zip(vertices, values)}
        ranking = tuple(sorted(vertices, key=lambda v: (-scores[v], v)))
        return cls(Measure(measure), scores, ranking)

    def rank_of(self, person_id: str) -> int:
        """1-based rank."""
        return self.ranking.index(person_id) + 1


def _require(g: ContactGraph):
    if g.n < 2:
        raise ValueError(f"centrality needs at least 2 vertices, graph has {g.n}")


def degree_centrality(g: ContactGraph) -> CentralityScores:
    """Out-degree divided by N - 1."""
    _require(g)
    A = g.adjacency()
    out = np.diff(A.indptr).astype(float) / (g.n - 1)
    return CentralityScores.from_array(Measure.DEGREE, g.vertices, out)


def _sweep(g: ContactGraph, with_dependencies: bool):
    """Yield ``(sources, dist, sigma, delta)`` per block of BFS sources.

    Arrays are (N, block): column ``j`` belongs to source ``sources[j]``.
    ``dist`` is -1 where unreachable. ``delta`` is None unless requested.
    """
    A = g.adjacency()
    At = A.T.tocsr()
    n = g.n
    for lo in range(0, n, BLOCK):
        sources = np.arange(lo, min(lo + BLOCK, n))
        b = len(sources)
        cols = np.arange(b)
        dist = np.full((n, b), -1, dtype=np.int32)
        sigma = np.zeros((n, b))
        dist[sources, cols] = 0
        sigma[sources, cols] = 1.0
        frontier = sigma.copy()
        depth = 0
        while True:
            reach = At @ frontier
            reach[dist >= 0] = 0.0
            new = reach > 0
            if not new.any():
                break
            depth += 1
            dist[new] = depth
            sigma += reach
            frontier = reach
        delta = None
        if with_dependencies:
            delta = np.zeros((n, b))
            for d in range(depth, 1, -1):
                at_d = dist == d
                coef = np.where(at_d, (1.0 + delta) / np.where(at_d, sigma, 1.0), 0.0)
                pulled = A @ coef
                at_prev = dist == d - 1
                delta[at_prev] += sigma[at_prev] * pulled[at_prev]
        yield sources, dist, sigma, delta


def closeness_centrality(g: ContactGraph) -> CentralityScores:
    """Closeness rescaled by the reachable set, defined on disconnected digraphs.

    With ``r`` vertices reachable from ``u`` at total distance ``s``:
    ``(r / (N - 1)) * (r / s)``, and 0 when nothing is reachable.
    """
    _require(g)
    cl = np.zeros(g.n)
    for sources, dist, _, _ in _sweep(g, with_dependencies=False):
        pos = dist > 0
        r = pos.sum(axis=0).astype(float)
        total = np.where(pos, dist, 0).sum(axis=0).astype(float)
        ok = r > 0
        vals = np.zeros(len(sources))
        vals[ok] = (r[ok] / (g.n - 1)) * (r[ok] / total[ok])
        cl[sources] = vals
    return CentralityScores.from_array(Measure.CLOSENESS, g.vertices, cl)


def betweenness_centrality(g: ContactGraph) -> CentralityScores:
    """Unnormalised betweenness over ordered (s, t) pairs with unit arc lengths."""
    _require(g)
    bw = np.zeros(g.n)
    for _, _, _, delta in _sweep(g, with_dependencies=True):
        bw += delta.sum(axis=1)
    return CentralityScores.from_array(Measure.BETWEENNESS, g.vertices, bw)


_MEASURES = {
    Measure.DEGREE: degree_centrality,
    Measure.CLOSENESS: closeness_centrality,
    Measure.BETWEENNESS: betweenness_centrality,
}


def centrality(g: ContactGraph, measure: Measure | str) -> CentralityScores:
    return _MEASURES[Measure(measure)](g)


def top_k(scores: CentralityScores, k: int) -> list[str]:
    if not 0 <= k <= len(scores.ranking):
        raise ValueError(f"k={k} outside [0, {len(scores.ranking)}]")
    return list(scores.ranking[:k])


def distribution_summary(scores: CentralityScores, bins: int = 20) -> dict:
    vals = np.array([scores.scores[v] for v in scores.ranking])
    counts, edges = np.histogram(vals, bins=bins)
    return {
        "measure": scores.measure.value,
        "N": int(len(vals)),
        "mean": float(vals.mean()),
        "std": float(vals.std()),
        "min": float(vals.min()),
        "max": float(vals.max()),
        "quantiles": {str(q): float(np.quantile(vals, q)) for q in (0.5, 0.9, 0.99)},
        "nonzero": int((vals > 0).sum()),
        "histogram": {"counts": counts.tolist(), "edges": edges.tolist()},
    }


def write_scores(scores: CentralityScores, path) -> None:
    """CSV ``person_id,score,rank`` plus a sibling ``.summary.json``."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["person_id", "score", "rank"])
        for r, v in enumerate(scores.ranking, 1):
            w.writerow([v, repr(scores.scores[v]), r])
    path.with_suffix(".summary.json").write_text(
        json.dumps(distribution_summary(scores), indent=2) + "\n")


def read_ranking(path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = sorted(csv.DictReader(fh), key=lambda r: int(r["rank"]))
    return [r["person_id"] for r in rows]
