"""Parsing and validation of raw WLAN (dis)association logs.

A log line carries eight comma separated fields::

    timestamp,process,ap-name,student-id,role,MAC,SSID,result

Lines are streamed; malformed or invalid lines are dropped and counted,
never fatal.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

log = logging.getLogger(__name__)

N_FIELDS = 8


class AuthResult(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"


@dataclass(frozen=True)
class LogEntry:
    timestamp: int
    process: str
    ap_name: str
    student_id: str
    role: str
    mac: str
    ssid: str
    result: AuthResult

    def to_line(self) -> str:
        return ",".join(
            [str(self.timestamp), self.process, self.ap_name, self.student_id,
             self.role, self.mac, self.ssid, self.result.value]
        )


@dataclass
class ParseStats:
    """Running line counters, filled while a stream is consumed."""

    accepted: int = 0
    malformed: int = 0
    invalid: int = 0
    ssid_filtered: int = 0

    @property
    def dropped(self) -> int:
        return self.malformed + self.invalid + self.ssid_filtered

    def as_dict(self) -> dict:
        return {"accepted": self.accepted, "malformed": self.malformed, "invalid": self.invalid,
                "ssid_filtered": self.ssid_filtered, "dropped": self.dropped}


@dataclass
class FilterStats:
    passed: int = 0
    failed_auth: int = 0
    missing_ids: int = 0
    unknown_ap: int = 0
    unknown_ap_names: set = field(default_factory=set)

    @property
    def dropped(self) -> int:
        return self.failed_auth + self.missing_ids + self.unknown_ap

    def as_dict(self) -> dict:
        return {"passed": self.passed, "failed_auth": self.failed_auth, "missing_ids": self.missing_ids,
                "unknown_ap": self.unknown_ap, "unknown_ap_names": sorted(self.unknown_ap_names),
                "dropped": self.dropped}


class MalformedLine(ValueError):
    pass


def parse_line(line: str) -> LogEntry:
    parts = line.rstrip("\r\n").split(",")
    if len(parts) != N_FIELDS:
        raise MalformedLine(f"expected {N_FIELDS} fields, got {len(parts)}")
    ts, process, ap, sid, role, mac, ssid, result = parts
    try:
        timestamp = int(ts)
    except ValueError:
        raise MalformedLine(f"bad timestamp {ts!r}") from None
    if timestamp <= 0:
        raise MalformedLine(f"non-positive timestamp {timestamp}")
    try:
        res = AuthResult(result.strip().lower())
    except ValueError:
        raise MalformedLine(f"bad result {result!r}") from None
    return LogEntry(timestamp, process, ap, sid, role, mac, ssid, res)


def parse_log_file(path, ssid_filter: Iterable[str] | None = None,
                   stats: ParseStats | None = None) -> Iterator[LogEntry]:
    """Yield entries of ``path`` in file order.

    Entries whose SSID is not in ``ssid_filter`` (when given) are dropped,
    as are malformed lines and lines with an empty AP name or student id.
    Counters are accumulated into ``stats``.
    """
    stats = stats if stats is not None else ParseStats()
    allowed = set(ssid_filter) if ssid_filter else None
    # opening eagerly so an unreadable file fails at call time
    fh = open(path, encoding="utf-8")
    return _iter_lines(fh, allowed, stats)


def _iter_lines(fh, allowed, stats: ParseStats) -> Iterator[LogEntry]:
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                entry = parse_line(line)
            except MalformedLine as exc:
                stats.malformed += 1
                log.debug("line %d dropped: %s", lineno, exc)
                continue
            if not entry.student_id or not entry.ap_name:
                stats.invalid += 1
                continue
            if allowed is not None and entry.ssid not in allowed:
                stats.ssid_filtered += 1
                continue
            stats.accepted += 1
            yield entry


class ApDirectory:
    """Maps AP names to dense integer ids and to their building."""

    def __init__(self, rows: Iterable[tuple[str, str]]):
        self.names: list[str] = []
        self.buildings: list[str] = []
        self._ids: dict[str, int] = {}
        for name, building in rows:
            if not name or not building:
                raise ValueError(f"AP directory row needs ap_name and building_id: {(name, building)!r}")
            if name in self._ids:
                if self.buildings[self._ids[name]] != building:
                    raise ValueError(f"AP {name!r} mapped to two buildings")
                continue
            self._ids[name] = len(self.names)
            self.names.append(name)
            self.buildings.append(building)

    @classmethod
    def from_csv(cls, path) -> "ApDirectory":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"ap_name", "building_id"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: header must contain ap_name,building_id")
            return cls((r["ap_name"].strip(), r["building_id"].strip()) for r in reader)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ap_name", "building_id"])
            w.writerows(zip(self.names, self.buildings))

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, ap_name: str) -> bool:
        return ap_name in self._ids

    def ap_id(self, ap_name: str) -> int:
        return self._ids[ap_name]

    def building_of(self, ap_id: int) -> str:
        return self.buildings[ap_id]


def validate_and_filter(entries: Iterable[LogEntry], directory: ApDirectory,
                        stats: FilterStats | None = None) -> Iterator[LogEntry]:
    """Keep successful authentications with both ids present and a known AP."""
    stats = stats if stats is not None else FilterStats()
    for e in entries:
        if e.result is not AuthResult.SUCCESS:
            stats.failed_auth += 1
        elif not e.student_id or not e.ap_name:
            stats.missing_ids += 1
        elif e.ap_name not in directory:
            stats.unknown_ap += 1
            stats.unknown_ap_names.add(e.ap_name)
        else:
            stats.passed += 1
            yield e


EVENT_HEADER = ["timestamp", "process", "ap_name", "student_id", "role", "mac",
                "ssid", "result", "ap_id", "building_id"]


def write_events(entries: Iterable[LogEntry], directory: ApDirectory, path) -> int:
    """Write validated entries with their resolved AP id and building.

    ``.parquet`` paths go through pandas; anything else is CSV with header.
    """
    rows = []
    for e in entries:
        aid = directory.ap_id(e.ap_name)
        rows.append([e.timestamp, e.process, e.ap_name, e.student_id, e.role, e.mac,
                     e.ssid, e.result.value, aid, directory.building_of(aid)])
    path = Path(path)
    if path.suffix == ".parquet":
        import pandas as pd

        pd.DataFrame(rows, columns=EVENT_HEADER).to_parquet(path, index=False)
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EVENT_HEADER)
            w.writerows(rows)
    return len(rows)


def read_events(path) -> list[tuple[int, str, int, str]]:
    """Read an ingested event file as ``(timestamp, student_id, ap_id, building_id)``."""
    path = Path(path)
    if path.suffix == ".parquet":
        import pandas as pd

        df = pd.read_parquet(path)
        return [(int(t), str(s), int(a), str(b)) for t, s, a, b in
                zip(df["timestamp"], df["student_id"], df["ap_id"], df["building_id"])]
    with open(path, newline="", encoding="utf-8") as fh:
        return [(int(r["timestamp"]), r["student_id"], int(r["ap_id"]), r["building_id"])
                for r in csv.DictReader(fh)]
