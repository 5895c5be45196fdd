from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wlantrace.trajectory import (DAY, Event, Tracklet, Trajectory, WalkTimeMatrix, build_trajectories,
                                  parse_window, read_trajectories, restrict, terminal_stay,
                                  write_trajectories)

# a day well inside 2015 so that day boundaries are easy to reason about
T0 = 16496 * DAY  # 2015-03-02 00:00 UTC


def walk300():
    return WalkTimeMatrix({("A", "B"): 300})


def first(trajs, pid="p"):
    return trajs[pid].tracklets[0]


def test_same_building_stay_is_gap():
    evs = [Event(T0, "p", 1, "A"), Event(T0 + 1800, "p", 2, "A")]
    assert first(build_trajectories(evs, walk300())) == Tracklet(1, T0, 1800)


def test_cross_building_subtracts_walk():
    evs = [Event(T0, "p", 1, "A"), Event(T0 + 1800, "p", 2, "B")]
    assert first(build_trajectories(evs, walk300())) == Tracklet(1, T0, 1500)


def test_negative_stay_clamps_to_zero():
    evs = [Event(T0, "p", 1, "A"), Event(T0 + 100, "p", 2, "B")]
    assert first(build_trajectories(evs, walk300())) == Tracklet(1, T0, 0)


def test_missing_pair_uses_default_walk():
    m = WalkTimeMatrix(default_walk=120)
    assert m.walk("X", "Y") == 120 and m.walk("X", "X") == 0


def test_walk_symmetric_and_non_negative():
    m = WalkTimeMatrix({("A", "B"): 250})
    assert m.walk("A", "B") == m.walk("B", "A") == 250
    with pytest.raises(ValueError):
        m.set("A", "C", -1)


def test_walk_csv_round_trip(tmp_path):
    m = WalkTimeMatrix({("B", "A"): 250, ("C", "A"): 90})
    m.to_csv(tmp_path / "w.csv")
    back = WalkTimeMatrix.from_csv(tmp_path / "w.csv")
    assert list(back.items()) == list(m.items()) == [("A", "B", 250), ("A", "C", 90)]


@pytest.mark.parametrize("t_last,cutoff,cap,expected", [
    (100, 100, 7200, 0),
    (100, 700, 7200, 600),
    (0, 90000, 7200, 7200),
])
def test_terminal_stay(t_last, cutoff, cap, expected):
    assert terminal_stay(t_last, cutoff, cap) == expected


def test_terminal_stay_rejects_cutoff_before_event():
    with pytest.raises(ValueError):
        terminal_stay(10, 5)


def test_reassociations_coalesce_within_timeout():
    evs = [Event(T0 + t, "p", 1, "A") for t in (0, 1200, 2400)] + [Event(T0 + 4000, "p", 2, "A")]
    tr = build_trajectories(evs, walk300())["p"].tracklets
    assert tr[0] == Tracklet(1, T0, 4000)
    assert len(tr) == 2


def test_long_gap_at_same_ap_starts_new_tracklet():
    evs = [Event(T0, "p", 1, "A"), Event(T0 + 5000, "p", 1, "A")]
    tr = build_trajectories(evs, walk300(), session_timeout=3600)["p"].tracklets
    assert tr[0] == Tracklet(1, T0, 5000)
    assert tr[1].arrival == T0 + 5000


def test_last_tracklet_gets_capped_tail():
    evs = [Event(T0 + 3600, "p", 1, "A"), Event(T0 + 4800, "p", 1, "A")]
    (t,) = build_trajectories(evs, walk300(), max_terminal_stay=7200)["p"].tracklets
    # 1200 s of observed presence, then the capped tail
    assert t == Tracklet(1, T0 + 3600, 1200 + 7200)


def test_tail_stops_at_midnight():
    late = T0 + DAY - 600
    (t,) = build_trajectories([Event(late, "p", 1, "A")], walk300())["p"].tracklets
    assert t.stay == 600


def test_days_are_split_at_local_midnight():
    evs = [Event(T0 + DAY - 1000, "p", 1, "A"), Event(T0 + DAY + 1000, "p", 2, "A")]
    tr = build_trajectories(evs, walk300())["p"].tracklets
    assert [t.arrival for t in tr] == [T0 + DAY - 1000, T0 + DAY + 1000]
    assert tr[0].stay == 1000


def test_utc_offset_moves_the_day_boundary():
    # at +02:00 local midnight is 22:00 UTC of the previous day
    evs = [Event(T0 + DAY - 7200 - 1000, "p", 1, "A"), Event(T0 + DAY - 7200 + 1000, "p", 2, "A")]
    tr = build_trajectories(evs, walk300(), utc_offset=7200)["p"].tracklets
    assert tr[0].stay == 1000


def test_window_drops_outside_events():
    evs = [Event(T0 + 10, "p", 1, "A"), Event(T0 + DAY + 10, "p", 1, "A")]
    trajs = build_trajectories(evs, walk300(), window=parse_window("2015-03-02"))
    assert [t.arrival for t in trajs["p"].tracklets] == [T0 + 10]


def test_parse_window_forms():
    assert parse_window("2015-03-02") == (T0, T0 + DAY)
    assert parse_window("2015-03-02/2015-03-08") == (T0, T0 + 7 * DAY)
    assert parse_window("2015-03-02..2015-03-03") == (T0, T0 + 2 * DAY)
    with pytest.raises(ValueError):
        parse_window("2015-03-05/2015-03-02")


def test_duplicate_timestamps_resolved_by_largest_ap():
    evs = [Event(T0, "p", 3, "A"), Event(T0, "p", 7, "A"), Event(T0 + 600, "p", 1, "A")]
    assert first(build_trajectories(evs, walk300())).ap_id == 7
    assert first(build_trajectories(list(reversed(evs)), walk300())).ap_id == 7


events_strategy = st.lists(
    st.builds(Event, st.integers(T0, T0 + 3 * DAY), st.sampled_from(["p", "q", "r"]),
              st.integers(0, 5), st.sampled_from(["A", "B", "C"])),
    max_size=60,
)


@settings(max_examples=60, deadline=None)
@given(events_strategy, st.randoms(use_true_random=False))
def test_order_independence(events, rnd):
    # one building per AP, as in a real directory
    events = [Event(t, p, a, "ABC"[a % 3]) for t, p, a, _ in events]
    walk = WalkTimeMatrix({("A", "B"): 200, ("B", "C"): 400}, default_walk=300)
    shuffled = list(events)
    rnd.shuffle(shuffled)
    assert build_trajectories(events, walk) == build_trajectories(shuffled, walk)


@settings(max_examples=60, deadline=None)
@given(events_strategy)
def test_tracklets_ordered_and_disjoint(events):
    events = [Event(t, p, a, "ABC"[a % 3]) for t, p, a, _ in events]
    walk = WalkTimeMatrix({("A", "B"): 200}, default_walk=300)
    for tr in build_trajectories(events, walk).values():
        ts = tr.tracklets
        assert all(t.stay >= 0 for t in ts)
        assert all(a.arrival < b.arrival for a, b in zip(ts, ts[1:]))
        assert all(a.departure <= b.arrival for a, b in zip(ts, ts[1:]))


@settings(max_examples=40, deadline=None)
@given(events_strategy)
def test_stays_plus_walks_fit_in_window(events):
    events = [Event(t, p, a, "ABC"[a % 3]) for t, p, a, _ in events]
    walk = WalkTimeMatrix(default_walk=300)
    trajs = build_trajectories(events, walk, window=(T0, T0 + 3 * DAY + 1))
    for tr in trajs.values():
        total = sum(t.stay for t in tr.tracklets)
        walks = sum(300 for _ in tr.tracklets)
        assert total <= 3 * DAY + 1 + walks
        assert all(t.departure <= T0 + 3 * DAY + 1 for t in tr.tracklets)


def test_trajectory_csv_round_trip(tmp_path):
    trajs = {"b": Trajectory("b", (Tracklet(2, 50, 10),)),
             "a": Trajectory("a", (Tracklet(1, 10, 5), Tracklet(3, 20, 0)))}
    write_trajectories(trajs, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["person_id,ap_id,arrival_time,stay_time", "a,1,10,5", "a,3,20,0", "b,2,50,10"]
    assert read_trajectories(tmp_path / "t.csv") == {k: trajs[k] for k in ("a", "b")}


def test_restrict_keeps_or_drops_empty():
    trajs = {"a": Trajectory("a", (Tracklet(1, 10, 5),)), "b": Trajectory("b", (Tracklet(1, 500, 5),))}
    assert list(restrict(trajs, 0, 100)) == ["a"]
    kept = restrict(trajs, 0, 100, keep_empty=True)
    assert set(kept) == {"a", "b"} and kept["b"].tracklets == ()


def test_single_event_gives_single_tracklet():
    trajs = build_trajectories([Event(T0 + 100, "p", 1, "A")], walk300(), max_terminal_stay=60)
    assert trajs["p"].tracklets == (Tracklet(1, T0 + 100, 60),)
    assert build_trajectories([], walk300()) == {}


def test_random_person_order_gives_sorted_output():
    evs = [Event(T0 + i, f"p{i % 5}", 1, "A") for i in range(20)]
    random.Random(0).shuffle(evs)
    assert list(build_trajectories(evs, walk300())) == sorted({e.person_id for e in evs})
