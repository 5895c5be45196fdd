"""Symmetric, asymmetric and hybrid contact graphs from trajectories.

Symmetric contact: two people at the same AP whose stays overlap for at
least ``d_sym`` seconds get arcs in both directions.

Asymmetric contact: a person who stays at an AP for at least ``d_env``
seconds contaminates it; anyone present at that AP for at least ``d_asym``
seconds after the first ``d_env`` seconds of the stay gets an arc from the
long-staying person.

All intervals are closed, thresholds are inclusive.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import sparse

from .trajectory import Trajectory


class ArcKind(str, Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


class GraphMode(str, Enum):
    SYMMETRIC = "sym"
    ASYMMETRIC = "asym"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class ContactConfig:
    d_sym: int = 900
    d_env: int = 3000
    d_asym: int = 300

    def __post_init__(self):
        for name in ("d_sym", "d_asym"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        # d_env = 0 is allowed: asymmetric tracing then degenerates to plain overlap
        if self.d_env < 0:
            raise ValueError(f"d_env must be >= 0, got {self.d_env}")
        if self.d_asym > self.d_sym:
            raise ValueError(f"d_asym ({self.d_asym}) must not exceed d_sym ({self.d_sym})")


def overlap_duration(t_q, st_q, t_p, st_p):
    """Co-presence length of two stays; negative when they are disjoint."""
    return st_q + st_p - max(t_q + st_q, t_p + st_p) + min(t_q, t_p)


def env_overlap_duration(t_q, st_q, t_p, st_p, d_env):
    """Time ``p`` spends at the AP after ``q``'s first ``d_env`` seconds there."""
    return (st_q - d_env) + st_p - max(t_q + st_q, t_p + st_p) + min(t_q + d_env, t_p)


def is_symmetric_contact(q, p, cfg: ContactConfig) -> bool:
    return q.ap_id == p.ap_id and overlap_duration(q.arrival, q.stay, p.arrival, p.stay) >= cfg.d_sym


def is_asymmetric_contact(q, p, cfg: ContactConfig) -> bool:
    return (q.ap_id == p.ap_id and q.stay >= cfg.d_env
            and env_overlap_duration(q.arrival, q.stay, p.arrival, p.stay, cfg.d_env) >= cfg.d_asym)


# vectorised forms of the two criteria; q scalar, p arrays
def _overlap_v(t_q, st_q, t_p, st_p):
    return st_q + st_p - np.maximum(t_q + st_q, t_p + st_p) + np.minimum(t_q, t_p)


def _env_overlap_v(t_q, st_q, t_p, st_p, d_env):
    return (st_q - d_env) + st_p - np.maximum(t_q + st_q, t_p + st_p) + np.minimum(t_q + d_env, t_p)


class _ApIndex:
    """Tracklets grouped per AP and sorted by arrival time."""

    def __init__(self, trajectories: dict[str, Trajectory]):
        self.people = sorted(trajectories)
        rows = [(t.ap_id, t.arrival, t.stay, i)
                for i, pid in enumerate(self.people) for t in trajectories[pid].tracklets]
        arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
        order = np.lexsort((arr[:, 3], arr[:, 2], arr[:, 1], arr[:, 0]))
        arr = arr[order]
        self.ap, self.start, self.stay, self.person = arr.T.copy()
        self.groups = []
        if len(arr):
            cuts = np.flatnonzero(np.diff(self.ap)) + 1
            bounds = np.concatenate(([0], cuts, [len(arr)]))
            for lo, hi in zip(bounds[:-1], bounds[1:]):
                self.groups.append((int(lo), int(hi), int(self.stay[lo:hi].max())))

    def candidates(self, lo, hi, maxlen, win_start, win_end, need):
        """Slice of tracklets in [lo, hi) that could overlap [win_start, win_end] by ``need``."""
        starts = self.start[lo:hi]
        a = lo + int(np.searchsorted(starts, win_start + need - maxlen, side="left"))
        b = lo + int(np.searchsorted(starts, win_end - need, side="right"))
        return a, b


def symmetric_edges(trajectories: dict[str, Trajectory], cfg: ContactConfig) -> set[tuple[str, str]]:
    """Both arcs for every pair co-located at one AP for at least ``d_sym``."""
    idx = _ApIndex(trajectories)
    pairs = set()
    d = cfg.d_sym
    for lo, hi, maxlen in idx.groups:
        for i in range(lo, hi):
            t_q, st_q, who = idx.start[i], idx.stay[i], idx.person[i]
            if st_q < d:
                continue
            a, b = idx.candidates(lo, hi, maxlen, t_q, t_q + st_q, d)
            if b - a <= 1:
                continue
            ov = _overlap_v(t_q, st_q, idx.start[a:b], idx.stay[a:b])
            hit = idx.person[a:b][ov >= d]
            for j in np.unique(hit[hit != who]):
                pairs.add((int(who), int(j)))
                pairs.add((int(j), int(who)))
    return {(idx.people[u], idx.people[v]) for u, v in pairs}


def asymmetric_edges(trajectories: dict[str, Trajectory], cfg: ContactConfig) -> set[tuple[str, str]]:
    """Directed arcs from long stays to people present during their contaminated window."""
    idx = _ApIndex(trajectories)
    arcs = set()
    for lo, hi, maxlen in idx.groups:
        for i in np.flatnonzero(idx.stay[lo:hi] >= cfg.d_env) + lo:
            t_q, st_q, who = idx.start[i], idx.stay[i], idx.person[i]
            a, b = idx.candidates(lo, hi, maxlen, t_q + cfg.d_env, t_q + st_q, cfg.d_asym)
            if b <= a:
                continue
            ov = _env_overlap_v(t_q, st_q, idx.start[a:b], idx.stay[a:b], cfg.d_env)
            hit = idx.person[a:b][ov >= cfg.d_asym]
            for j in np.unique(hit[hit != who]):
                arcs.add((int(who), int(j)))
    return {(idx.people[u], idx.people[v]) for u, v in arcs}


def brute_force_edges(trajectories: dict[str, Trajectory], cfg: ContactConfig):
    """All-pairs scan over tracklets; returns (symmetric arcs, asymmetric arcs)."""
    flat = [(pid, t) for pid, tr in trajectories.items() for t in tr.tracklets]
    sym, asym = set(), set()
    for pq, q in flat:
        for pp, p in flat:
            if pq == pp:
                continue
            if is_symmetric_contact(q, p, cfg):
                sym.add((pq, pp))
                sym.add((pp, pq))
            if is_asymmetric_contact(q, p, cfg):
                asym.add((pq, pp))
    return sym, asym


class ContactGraph:
    """Directed contact graph over person ids with kind-tagged arcs."""

    def __init__(self, vertices, arcs: dict[tuple[str, str], frozenset], mode: GraphMode):
        self.vertices: tuple[str, ...] = tuple(sorted(set(vertices)))
        self.mode = GraphMode(mode)
        vs = set(self.vertices)
        for (u, v), kinds in arcs.items():
            if u == v:
                raise ValueError(f"self-arc on {u!r}")
            if u not in vs or v not in vs:
                raise ValueError(f"arc {u!r}->{v!r} references an unknown vertex")
            if not kinds:
                raise ValueError(f"arc {u!r}->{v!r} carries no kind")
        self.arcs: dict[tuple[str, str], frozenset] = dict(sorted(arcs.items()))
        self._index = {v: i for i, v in enumerate(self.vertices)}
        self._csr = None

    @property
    def n(self) -> int:
        return len(self.vertices)

    def index(self, person_id: str) -> int:
        return self._index[person_id]

    def arc_count(self, kind: ArcKind | None = None) -> int:
        if kind is None:
            return len(self.arcs)
        return sum(1 for ks in self.arcs.values() if kind in ks)

    def arc_set(self, kind: ArcKind | None = None) -> set[tuple[str, str]]:
        return {a for a, ks in self.arcs.items() if kind is None or kind in ks}

    def adjacency(self) -> sparse.csr_matrix:
        """0/1 matrix with ``A[u, v] = 1`` for every arc u->v; kinds are ignored."""
        if self._csr is None:
            n = self.n
            if self.arcs:
                src = np.fromiter((self._index[u] for u, _ in self.arcs), dtype=np.int64, count=len(self.arcs))
                dst = np.fromiter((self._index[v] for _, v in self.arcs), dtype=np.int64, count=len(self.arcs))
            else:
                src = dst = np.zeros(0, dtype=np.int64)
            self._csr = sparse.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
        return self._csr

    def summary(self) -> dict:
        return {
            "mode": self.mode.value,
            "N": self.n,
            "arcs": self.arc_count(),
            "symmetric_arcs": self.arc_count(ArcKind.SYMMETRIC),
            "asymmetric_arcs": self.arc_count(ArcKind.ASYMMETRIC),
        }

    def __eq__(self, other):
        return (isinstance(other, ContactGraph) and self.vertices == other.vertices
                and self.arcs == other.arcs and self.mode == other.mode)

    def __repr__(self):
        return f"ContactGraph(mode={self.mode.value}, N={self.n}, arcs={len(self.arcs)})"


def _graph(vertices, arcs, kind: ArcKind, mode: GraphMode) -> ContactGraph:
    tag = frozenset((kind,))
    return ContactGraph(vertices, {a: tag for a in arcs}, mode)


def build_graph(trajectories: dict[str, Trajectory], cfg: ContactConfig,
                mode: GraphMode | str = GraphMode.HYBRID) -> ContactGraph:
    mode = GraphMode(mode)
    people = list(trajectories)
    if mode is GraphMode.SYMMETRIC:
        return _graph(people, symmetric_edges(trajectories, cfg), ArcKind.SYMMETRIC, mode)
    if mode is GraphMode.ASYMMETRIC:
        return _graph(people, asymmetric_edges(trajectories, cfg), ArcKind.ASYMMETRIC, mode)
    sym = build_graph(trajectories, cfg, GraphMode.SYMMETRIC)
    asym = build_graph(trajectories, cfg, GraphMode.ASYMMETRIC)
    return merge_graphs(sym, asym)


def merge_graphs(sym: ContactGraph, asym: ContactGraph) -> ContactGraph:
    """Union of vertices and arcs; an arc found by both tracings keeps both tags."""
    arcs: dict[tuple[str, str], frozenset] = dict(sym.arcs)
    for a, ks in asym.arcs.items():
        arcs[a] = arcs.get(a, frozenset()) | ks
    return ContactGraph(set(sym.vertices) | set(asym.vertices), arcs, GraphMode.HYBRID)


def _kind_label(kinds: frozenset) -> str:
    return "+".join(k.value for k in sorted(kinds, key=lambda k: k.value))


def write_graph(g: ContactGraph, out_dir) -> Path:
    """Write ``edges.csv`` (src,dst,kind), ``vertices.csv`` and ``summary.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "kind"])
        for (u, v), ks in g.arcs.items():
            w.writerow([u, v, _kind_label(ks)])
    with open(out / "vertices.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("person_id\n")
        fh.writelines(f"{v}\n" for v in g.vertices)
    (out / "summary.json").write_text(json.dumps(g.summary(), indent=2, sort_keys=True) + "\n")
    return out


def read_graph(path) -> ContactGraph:
    path = Path(path)
    with open(path / "vertices.csv", newline="", encoding="utf-8") as fh:
        vertices = [r["person_id"] for r in csv.DictReader(fh)]
    arcs = {}
    with open(path / "edges.csv", newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            arcs[(r["src"], r["dst"])] = frozenset(ArcKind(k) for k in r["kind"].split("+"))
    mode = GraphMode.HYBRID
    summary = path / "summary.json"
    if summary.exists():
        mode = GraphMode(json.loads(summary.read_text())["mode"])
    return ContactGraph(vertices, arcs, mode)
