"""Synthetic campus WLAN logs with planted superspreaders.

Background students belong to cohorts that attend 3-5 weekly class blocks
together, packed into one or two campus days. A share of cross-enrolled
students sits in on sessions of other cohorts and bridges them. Long gaps
between classes are spent in building lounges, and students often drop by a
service desk right before a class. Two planted profiles sit on top:

* hub: attends several class sessions every weekday and stays through each
  one, so it has many long simultaneous overlaps;
* environmental: one early class, then a whole-day shift at a service desk.
  Visitors only stay a few minutes, so the person is nearly invisible to
  symmetric tracing but contaminates the desk for everyone passing by.

The schedule repeats every week; only arrival jitter and desk visits are
redrawn per day.
"""
from __future__ import annotations

import datetime as dt
import json
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .trajectory import DAY, WalkTimeMatrix
from .wlan_log import ApDirectory

SLOT_STARTS = [8 * 3600 + j * 90 * 60 for j in range(7)]
CLASS_LEN = 75 * 60
SECURE_SSID = "SecureNet"
GUEST_SSID = "CampusGuest"
DESK_OPEN = 9 * 3600 + 20 * 60
DESK_LAST_EVENT = 17 * 3600


@dataclass(frozen=True)
class CampusSpec:
    n_students: int = 3748
    n_buildings: int = 16
    classrooms_per_building: int = 6
    lounges_per_building: int = 3
    desks_per_building: int = 2
    weeks: int = 4
    start_date: str = "2015-03-02"
    n_hubs: int = 25
    n_env: int = 12
    hub_sessions_per_day: int = 5
    blocks_min: int = 3
    blocks_max: int = 5
    days_min: int = 1
    days_max: int = 2
    cross_enrolled: float = 0.1
    section_min: int = 15
    section_max: int = 30
    desk_visit_prob: float = 0.8
    desk_visit_min: int = 300
    desk_visit_max: int = 750
    jitter: int = 300
    failure_rate: float = 0.01
    n_guests: int = 20
    seed: int = 7

    def __post_init__(self):
        for name in ("n_students", "n_buildings", "classrooms_per_building", "lounges_per_building",
                     "desks_per_building", "weeks", "blocks_min", "section_min", "hub_sessions_per_day"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_hubs < 0 or self.n_env < 0:
            raise ValueError("planted spreader counts must be >= 0")
        if self.planted_spreaders >= self.n_students:
            raise ValueError("planted_spreaders must be < n_students")
        if not 1 <= self.days_min <= self.days_max <= 5:
            raise ValueError("campus days per week must satisfy 1 <= days_min <= days_max <= 5")
        if self.blocks_max > self.days_min * len(SLOT_STARTS):
            raise ValueError("blocks_max does not fit into days_min campus days")
        if self.blocks_max < self.blocks_min or self.section_max < self.section_min:
            raise ValueError("max bounds must not be below min bounds")
        if self.n_env > self.n_buildings * self.desks_per_building:
            raise ValueError("more environmental spreaders than service desks")
        if self.hub_sessions_per_day > len(SLOT_STARTS):
            raise ValueError(f"at most {len(SLOT_STARTS)} sessions per day")
        if not 0.0 <= self.cross_enrolled <= 1.0:
            raise ValueError("cross_enrolled must be a share in [0, 1]")
        if not 0.0 <= self.desk_visit_prob <= 1.0:
            raise ValueError("desk_visit_prob must be in [0, 1]")
        if self.desk_visit_max > 899:
            raise ValueError("desk visits must stay below 15 minutes")
        dt.date.fromisoformat(self.start_date)

    @property
    def planted_spreaders(self) -> int:
        return self.n_hubs + self.n_env

    @property
    def aps_per_building(self) -> int:
        return self.classrooms_per_building + self.lounges_per_building + self.desks_per_building

    @property
    def start_epoch(self) -> int:
        d = dt.date.fromisoformat(self.start_date)
        return (d - dt.date(1970, 1, 1)).days * DAY

    @classmethod
    def from_dict(cls, data: dict) -> "CampusSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown campus spec key(s): {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class Campus:
    spec: CampusSpec
    directory: ApDirectory
    walk: WalkTimeMatrix
    students: list[str]
    hubs: list[str]
    env: list[str]
    desk_of: dict[str, str]
    blocks: dict[str, list[tuple[int, int, str]]]  # person -> (weekday, slot, ap)
    visits: dict[str, list[tuple[str, int, int]]]  # person -> (ap, arrive, leave)
    lines: list[str]

    def building(self, ap: str) -> str:
        return self.directory.building_of(self.directory.ap_id(ap))

    def expected_tracklets(self) -> dict[str, int]:
        return {s: len(self.visits.get(s, ())) for s in self.students}


def _layout(spec: CampusSpec, rng):
    side = int(np.ceil(np.sqrt(spec.n_buildings)))
    buildings = [f"B{b + 1:02d}" for b in range(spec.n_buildings)]
    coords = {b: (i % side, i // side) for i, b in enumerate(buildings)}
    rows, classrooms, lounges, desks = [], defaultdict(list), defaultdict(list), []
    for bi, b in enumerate(buildings):
        for c in range(spec.classrooms_per_building):
            name = f"AP-{b}-C{c + 1}"
            rows.append((name, b))
            classrooms[(bi + c) % 2].append(name)
        for c in range(spec.lounges_per_building):
            name = f"AP-{b}-L{c + 1}"
            rows.append((name, b))
            lounges[b].append(name)
        for c in range(spec.desks_per_building):
            name = f"AP-{b}-D{c + 1}"
            rows.append((name, b))
            desks.append(name)
    walk = WalkTimeMatrix(default_walk=300)
    for i, a in enumerate(buildings):
        for b in buildings[i + 1:]:
            (xa, ya), (xb, yb) = coords[a], coords[b]
            walk.set(a, b, int(90 + 110 * (abs(xa - xb) + abs(ya - yb)) + rng.integers(0, 60)))
    return ApDirectory(rows), walk, classrooms, lounges, desks


def build_campus(spec: CampusSpec) -> Campus:
    rng = np.random.default_rng(spec.seed)
    directory, walk, classrooms, lounges, desks = _layout(spec, rng)
    width = len(str(spec.n_students))
    students = [f"s{i + 1:0{width}d}" for i in range(spec.n_students)]
    planted = rng.choice(spec.n_students, spec.planted_spreaders, replace=False)
    hubs = sorted(students[i] for i in planted[:spec.n_hubs])
    env = sorted(students[i] for i in planted[spec.n_hubs:])
    hub_set, env_set = set(hubs), set(env)
    bld = {name: directory.building_of(directory.ap_id(name)) for name in directory.names}

    # cohorts attend all their weekly blocks together; cross-enrolled students
    # sit in on sessions of several cohorts and bridge them
    background = [who for who in students if who not in hub_set and who not in env_set]
    rng.shuffle(background)
    n_cross = int(round(spec.cross_enrolled * len(background)))
    cross, core = background[:n_cross], background[n_cross:]
    sessions = defaultdict(list)  # (day, slot) -> member lists
    pos = 0
    while pos < len(core):
        size = int(rng.integers(spec.section_min, spec.section_max + 1))
        members = core[pos:pos + size]
        pos += size
        for c in _weekly_picks(spec, rng):
            sessions[c].append(list(members))

    def sit_in(who, c):
        if sessions[c]:
            sessions[c][int(rng.integers(len(sessions[c])))].append(who)
        else:
            sessions[c].append([who])

    for who in cross:
        for c in _weekly_picks(spec, rng):
            sit_in(who, c)
    for who in env:
        for d in range(5):
            sit_in(who, (d, 0))

    sections = defaultdict(list)  # (day, slot) -> [(ap, members)]
    for (d, s) in sorted(sessions):
        rooms = list(classrooms[s % 2])
        if len(sessions[(d, s)]) > len(rooms):
            raise ValueError(f"not enough classrooms for weekday {d} slot {s}")
        rng.shuffle(rooms)
        for members in sessions[(d, s)]:
            sections[(d, s)].append((rooms.pop(), members))

    blocks = defaultdict(list)
    for (d, s), secs in sections.items():
        for ap, members in secs:
            for who in members:
                blocks[who].append((d, s, ap))
    for who in hubs:
        for d in range(5):
            slots = sorted(rng.choice(len(SLOT_STARTS), spec.hub_sessions_per_day, replace=False))
            for s in slots:
                secs = sections.get((d, int(s)))
                if secs:
                    ap, _ = secs[int(rng.integers(len(secs)))]
                    blocks[who].append((d, int(s), ap))
    for who in blocks:
        blocks[who].sort()

    desk_of = dict(zip(env, [desks[i] for i in rng.choice(len(desks), len(env), replace=False)]))
    campus = Campus(spec, directory, walk, students, hubs, env, desk_of, dict(blocks), {}, [])
    _simulate_days(campus, rng, bld, lounges)
    return campus


def _weekly_picks(spec: CampusSpec, rng) -> list[tuple[int, int]]:
    """Distinct (weekday, slot) blocks packed into a few campus days."""
    k = int(rng.integers(spec.blocks_min, spec.blocks_max + 1))
    n_days = int(rng.integers(spec.days_min, spec.days_max + 1))
    days = sorted(int(d) for d in rng.choice(5, n_days, replace=False))
    combos = [(d, s) for d in days for s in range(len(SLOT_STARTS))]
    return [combos[i] for i in sorted(rng.choice(len(combos), k, replace=False))]


def _reassociations(arrive, leave, rng):
    out = []
    t = arrive + int(rng.integers(1200, 2700))
    while t < leave - 300:
        out.append(t)
        t += int(rng.integers(1200, 2700))
    return out


def _simulate_days(campus: Campus, rng, bld, lounges):
    spec = campus.spec
    w = campus.walk.walk
    env_set = set(campus.env)
    desks = [campus.desk_of[e] for e in campus.env]
    macs = {s: "02:" + ":".join(f"{b:02x}" for b in rng.integers(0, 256, 5)) for s in campus.students}
    events = []  # (ts, sid, ap, result, ssid)
    visits = defaultdict(list)
    start = spec.start_epoch
    for day in range(spec.weeks * 7):
        weekday = day % 7
        if weekday >= 5:
            continue
        base = start + day * DAY
        for who in campus.students:
            todays = [(s, ap) for d, s, ap in campus.blocks.get(who, ()) if d == weekday]
            if not todays:
                continue
            plan = []  # (ap, arrive, natural_end)
            for i, (s, ap) in enumerate(todays):
                arrive = base + SLOT_STARTS[s] - int(rng.integers(0, spec.jitter))
                if i > 0 and s - todays[i - 1][0] >= 2:
                    prev_ap, prev_end = plan[-1][0], plan[-1][2]
                    lounge = lounges[bld[prev_ap]][int(rng.integers(len(lounges[bld[prev_ap]])))]
                    plan.append((lounge, prev_end + int(rng.integers(60, 420)), None))
                if desks and who not in env_set and rng.random() < spec.desk_visit_prob:
                    desk = desks[int(rng.integers(len(desks)))]
                    length = int(rng.integers(spec.desk_visit_min, spec.desk_visit_max + 1))
                    d_arrive = arrive - w(bld[desk], bld[ap]) - length
                    fits = DESK_OPEN + 4200 <= d_arrive - base <= DESK_LAST_EVENT - length
                    if plan:
                        p_ap, p_arr, p_end = plan[-1]
                        earliest = (p_end if p_end is not None else p_arr + 1800) + w(bld[p_ap], bld[desk])
                        fits = fits and d_arrive >= earliest
                    if fits:
                        plan.append((desk, d_arrive, d_arrive + length))
                plan.append((ap, arrive, arrive + CLASS_LEN + 300))
            if who in env_set:
                desk = campus.desk_of[who]
                p_ap, _, p_end = plan[-1]
                arrive = max(p_end, base + DESK_OPEN - 600) + w(bld[p_ap], bld[desk]) + int(rng.integers(0, 300))
                plan.append((desk, arrive, base + DESK_LAST_EVENT))
            for i, (ap, arrive, end) in enumerate(plan):
                if i + 1 < len(plan):
                    nxt_ap, nxt_arrive, _ = plan[i + 1]
                    leave = nxt_arrive - w(bld[ap], bld[nxt_ap])
                else:
                    leave = end
                visits[who].append((ap, arrive, leave))
                events.append((arrive, who, ap))
                events.extend((t, who, ap) for t in _reassociations(arrive, leave, rng))
    campus.visits = dict(visits)

    rows = [(t, who, ap, "success", SECURE_SSID) for t, who, ap in events]
    n_fail = int(len(events) * spec.failure_rate)
    names = campus.directory.names
    for i in rng.choice(len(events), n_fail, replace=False) if n_fail else ():
        t, who, _ = events[int(i)]
        rows.append((t + int(rng.integers(1, 120)), who, names[int(rng.integers(len(names)))], "failure", SECURE_SSID))
    span = spec.weeks * 7 * DAY
    for g in range(spec.n_guests):
        gid = f"g{g + 1:03d}"
        macs[gid] = "06:" + ":".join(f"{b:02x}" for b in rng.integers(0, 256, 5))
        for t in sorted(rng.integers(0, span, 40)):
            rows.append((start + int(t), gid, names[int(rng.integers(len(names)))], "success", GUEST_SSID))
    rows.sort()
    campus.lines = [f"{t},auth,{ap},{who},{'guest' if ssid == GUEST_SSID else 'student'},{macs[who]},{ssid},{res}"
                    for t, who, ap, res, ssid in rows]


def manifest(campus: Campus, log_path=None, ap_dir_path=None, walk_path=None) -> dict:
    spreaders = ([{"id": h, "profile": "hub"} for h in campus.hubs]
                 + [{"id": e, "profile": "environmental", "desk": campus.desk_of[e]} for e in campus.env])
    return {
        "spec": asdict(campus.spec),
        "start_epoch": campus.spec.start_epoch,
        "log": str(log_path) if log_path else None,
        "ap_directory": str(ap_dir_path) if ap_dir_path else None,
        "walk": str(walk_path) if walk_path else None,
        "spreaders": sorted(spreaders, key=lambda r: r["id"]),
        "schedules": {s: [list(b) for b in campus.blocks.get(s, [])] for s in campus.students},
        "expected_tracklets": campus.expected_tracklets(),
        "visits": {s: [list(v) for v in vs] for s, vs in sorted(campus.visits.items())},
    }


@dataclass
class SynthOutput:
    campus: Campus
    log: Path
    manifest: Path
    ap_directory: Path
    walk: Path


def generate(spec: CampusSpec, log_path, manifest_path) -> SynthOutput:
    """Write the log, the manifest, and the AP directory / walking-time sidecars.

    Sidecars land next to the log as ``ap_directory.csv`` and ``walk.csv``.
    """
    log_path, manifest_path = Path(log_path), Path(manifest_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    campus = build_campus(spec)
    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(line + "\n" for line in campus.lines)
    ap_dir = log_path.parent / "ap_directory.csv"
    walk = log_path.parent / "walk.csv"
    campus.directory.to_csv(ap_dir)
    campus.walk.to_csv(walk)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest(campus, log_path.name, ap_dir.name, walk.name), fh, sort_keys=True)
        fh.write("\n")
    return SynthOutput(campus, log_path, manifest_path, ap_dir, walk)
