"""Per-person trajectories of (AP, arrival, stay) tracklets.

Stay times are inferred from the next association: within one building the
stay runs until the next arrival; across buildings the walking time between
the two buildings is subtracted (and the result clamped at zero). The last
tracklet of every day has no successor and receives a capped tail.
"""
from __future__ import annotations

import csv
import datetime as dt
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple

DAY = 86400

DEFAULT_SESSION_TIMEOUT = 3600
DEFAULT_MAX_TERMINAL_STAY = 7200
DEFAULT_WALK = 300


class Event(NamedTuple):
    timestamp: int
    person_id: str
    ap_id: int
    building_id: str


class Tracklet(NamedTuple):
    ap_id: int
    arrival: int
    stay: int

    @property
    def departure(self) -> int:
        return self.arrival + self.stay


@dataclass(frozen=True)
class Trajectory:
    person_id: str
    tracklets: tuple[Tracklet, ...]

    def __len__(self) -> int:
        return len(self.tracklets)

    def within(self, start: int, end: int) -> "Trajectory":
        return Trajectory(self.person_id,
                          tuple(t for t in self.tracklets if start <= t.arrival < end))


class WalkTimeMatrix:
    """Symmetric building-to-building walking times in seconds."""

    def __init__(self, entries: dict | None = None, default_walk: int = DEFAULT_WALK):
        if default_walk < 0:
            raise ValueError("default_walk must be >= 0")
        self.default_walk = int(default_walk)
        self._t: dict[frozenset, int] = {}
        for (a, b), secs in (entries or {}).items():
            self.set(a, b, secs)

    def set(self, a: str, b: str, seconds: int) -> None:
        if seconds < 0:
            raise ValueError(f"negative walking time {a}-{b}: {seconds}")
        self._t[frozenset((a, b))] = int(seconds)

    def walk(self, a: str, b: str) -> int:
        if a == b:
            return 0
        return self._t.get(frozenset((a, b)), self.default_walk)

    def items(self):
        for key, secs in sorted(self._t.items(), key=lambda kv: sorted(kv[0])):
            a, b = sorted(key)
            yield a, b, secs

    @classmethod
    def from_csv(cls, path, default_walk: int = DEFAULT_WALK) -> "WalkTimeMatrix":
        m = cls(default_walk=default_walk)
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                m.set(row["building_a"].strip(), row["building_b"].strip(), int(float(row["seconds"])))
        return m

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["building_a", "building_b", "seconds"])
            w.writerows(self.items())


def terminal_stay(t_last: int, cutoff: int, max_terminal_stay: int = DEFAULT_MAX_TERMINAL_STAY) -> int:
    if cutoff < t_last:
        raise ValueError("cutoff precedes the last event")
    return min(cutoff - t_last, max_terminal_stay)


def day_index(ts: int, utc_offset: int = 0) -> int:
    return (ts + utc_offset) // DAY


def _day_tracklets(events, walk: WalkTimeMatrix, session_timeout: int,
                   max_terminal_stay: int, cutoff: int) -> list[Tracklet]:
    # events: sorted (timestamp, ap_id, building) of one person within one day,
    # at most one event per timestamp
    out = []
    t0, ap, bld = events[0]
    last_seen = t0
    for t, a, b in events[1:]:
        if a == ap and t - last_seen <= session_timeout:
            last_seen = t
            continue
        stay = t - t0 - walk.walk(bld, b)
        out.append(Tracklet(ap, t0, max(stay, 0)))
        t0, ap, bld, last_seen = t, a, b, t
    tail = terminal_stay(last_seen, cutoff, max_terminal_stay)
    out.append(Tracklet(ap, t0, last_seen - t0 + tail))
    return out


def build_trajectories(events: Iterable[Event], walk: WalkTimeMatrix,
                       session_timeout: int = DEFAULT_SESSION_TIMEOUT,
                       max_terminal_stay: int = DEFAULT_MAX_TERMINAL_STAY,
                       window: tuple[int, int] | None = None,
                       utc_offset: int = 0) -> dict[str, Trajectory]:
    """Build one trajectory per person from validated association events.

    Events are grouped by person and by local day, sorted by time, and turned
    into tracklets. Consecutive associations to the same AP no more than
    ``session_timeout`` apart are one tracklet. When several events of one
    person share a timestamp only the one with the largest AP id is kept, so
    the result does not depend on input order.
    """
    per_person: dict[str, dict[int, dict[int, tuple]]] = defaultdict(lambda: defaultdict(dict))
    for ts, pid, ap, bld in events:
        if window is not None and not (window[0] <= ts < window[1]):
            continue
        slot = per_person[pid][day_index(ts, utc_offset)]
        prev = slot.get(ts)
        if prev is None or ap > prev[0]:
            slot[ts] = (ap, bld)

    trajectories = {}
    for pid in sorted(per_person):
        tracklets: list[Tracklet] = []
        for day in sorted(per_person[pid]):
            evs = sorted((t, a, b) for t, (a, b) in per_person[pid][day].items())
            cutoff = (day + 1) * DAY - utc_offset
            if window is not None:
                cutoff = min(cutoff, window[1])
            tracklets.extend(_day_tracklets(evs, walk, session_timeout, max_terminal_stay, cutoff))
        trajectories[pid] = Trajectory(pid, tuple(tracklets))
    return trajectories


def parse_window(text: str, utc_offset: int = 0) -> tuple[int, int]:
    """``YYYY-MM-DD`` or ``YYYY-MM-DD/YYYY-MM-DD`` (inclusive) to [start, end) seconds."""
    if "/" in text:
        a, b = text.split("/", 1)
    elif ".." in text:
        a, b = text.split("..", 1)
    else:
        a = b = text
    first = dt.date.fromisoformat(a.strip())
    last = dt.date.fromisoformat(b.strip())
    if last < first:
        raise ValueError(f"window end {last} precedes start {first}")
    epoch = dt.date(1970, 1, 1)
    start = (first - epoch).days * DAY - utc_offset
    end = ((last - epoch).days + 1) * DAY - utc_offset
    return start, end


def write_trajectories(trajectories: dict[str, Trajectory], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["person_id", "ap_id", "arrival_time", "stay_time"])
        for pid in sorted(trajectories):
            for t in trajectories[pid].tracklets:
                w.writerow([pid, t.ap_id, t.arrival, t.stay])


def read_trajectories(path) -> dict[str, Trajectory]:
    rows: dict[str, list[Tracklet]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            rows[r["person_id"]].append(
                Tracklet(int(r["ap_id"]), int(r["arrival_time"]), int(r["stay_time"])))
    return {pid: Trajectory(pid, tuple(sorted(ts, key=lambda t: t.arrival)))
            for pid, ts in sorted(rows.items())}


def restrict(trajectories: dict[str, Trajectory], start: int, end: int,
             keep_empty: bool = False) -> dict[str, Trajectory]:
    """Tracklets arriving in [start, end); people without any are dropped unless ``keep_empty``."""
    out = {}
    for pid, tr in trajectories.items():
        sub = tr.within(start, end)
        if sub.tracklets or keep_empty:
            out[pid] = sub
    return out
