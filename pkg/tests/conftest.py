from __future__ import annotations

from dataclasses import dataclass

import pytest

from wlantrace.contact import ContactConfig, ContactGraph, GraphMode, build_graph
from wlantrace.harness import ScoreCache
from wlantrace.synth import Campus, CampusSpec, generate
from wlantrace.trajectory import DAY, Event, Trajectory, WalkTimeMatrix, build_trajectories, restrict
from wlantrace.wlan_log import ApDirectory, parse_log_file, validate_and_filter


def ingest_to_trajectories(log_path, ap_dir_path, walk_path, people=()) -> dict[str, Trajectory]:
    """The library path from a raw log to trajectories, as the CLI runs it."""
    directory = ApDirectory.from_csv(ap_dir_path)
    walk = WalkTimeMatrix.from_csv(walk_path)
    events = [Event(e.timestamp, e.student_id, directory.ap_id(e.ap_name),
                    directory.building_of(directory.ap_id(e.ap_name)))
              for e in validate_and_filter(parse_log_file(log_path, ["SecureNet"]), directory)]
    trajs = build_trajectories(events, walk)
    for pid in people:
        trajs.setdefault(pid, Trajectory(pid, ()))
    return trajs


@dataclass
class DefaultCampus:
    campus: Campus
    trajectories: dict[str, Trajectory]
    daily_sym: ContactGraph
    daily_hybrid: ContactGraph
    scores: ScoreCache

    def window(self, days: int) -> dict[str, Trajectory]:
        start = self.campus.spec.start_epoch
        return restrict(self.trajectories, start, start + days * DAY, keep_empty=True)


@pytest.fixture(scope="session")
def default_campus(tmp_path_factory) -> DefaultCampus:
    """One week of the default synthetic campus, ingested from its raw log."""
    out = tmp_path_factory.mktemp("campus")
    gen = generate(CampusSpec(weeks=1), out / "campus.log", out / "manifest.json")
    trajs = ingest_to_trajectories(gen.log, gen.ap_directory, gen.walk, gen.campus.students)
    start = gen.campus.spec.start_epoch
    day = restrict(trajs, start, start + DAY, keep_empty=True)
    cfg = ContactConfig()
    return DefaultCampus(gen.campus, trajs, build_graph(day, cfg, GraphMode.SYMMETRIC),
                         build_graph(day, cfg, GraphMode.HYBRID), ScoreCache())


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
