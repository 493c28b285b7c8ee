import math
import random
from datetime import datetime, timedelta

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pricelimit.contagion import run_cascade
from pricelimit.critical import find_alpha_c
from pricelimit.metrics import k_core_index
from pricelimit.network import stock_projection
from pricelimit.synthetic import core_periphery
from pricelimit.waves import (
    FailureEvent,
    cascade_buckets,
    detect_waves,
    event_buckets,
    kcore_trajectory,
    max_pd_timeline,
    normalize_events,
    parse_sessions,
    read_events_csv,
    simulated_kcore_trajectory,
)

DAY = datetime(2015, 6, 26, 9, 30)


def at(minute, stock):
    return FailureEvent(DAY + timedelta(minutes=minute), stock)


def burst(counts, start=0, prefix="S"):
    evs, k = [], 0
    for off, n in enumerate(counts):
        for _ in range(n):
            evs.append(at(start + off, f"{prefix}{k:04d}"))
            k += 1
    return evs


def test_two_waves():
    evs = [at(1, "a"), at(2, "b"), at(3, "c"), at(30, "d"), at(31, "e")]
    waves = detect_waves(evs)
    assert len(waves) == 2
    assert [len(w.counts) for w in waves] == [3, 2]


def test_single_failure():
    (w,) = detect_waves([at(5, "a")])
    assert w.start == w.end == w.peak


def test_peak_argmax():
    (w,) = detect_waves(burst([1, 3, 2, 5, 1]))
    assert w.peak == DAY + timedelta(minutes=3)


def test_earliest_of_tied_peaks():
    (w,) = detect_waves(burst([2, 4, 1, 4]))
    assert len(w.peaks) == 2 and w.peak == DAY + timedelta(minutes=1)


def test_empty_stream():
    assert detect_waves([]) == []


def test_gap_tolerance():
    evs = [at(0, "a"), at(2, "b")]
    assert len(detect_waves(evs, gap_tolerance=0)) == 2
    assert len(detect_waves(evs, gap_tolerance=1)) == 1


def test_lunch_break_splits():
    morning = FailureEvent(datetime(2015, 6, 26, 11, 30), "a")
    afternoon = FailureEvent(datetime(2015, 6, 26, 13, 0), "b")
    assert len(detect_waves([morning, afternoon], gap_tolerance=1000)) == 2


def test_first_touch_and_session_filter():
    evs = [at(5, "a"), at(1, "a"), FailureEvent(datetime(2015, 6, 26, 12, 0), "b")]
    assert normalize_events(evs) == [at(1, "a")]


def test_three_wave_fixture():
    evs = burst([1, 2], 0, "A") + burst([3, 1], 10, "B") + burst([1], 60, "C")
    assert len(detect_waves(evs)) == 3


events_strategy = st.lists(
    st.tuples(st.integers(0, 120), st.integers(0, 60)), min_size=1, max_size=60
).map(lambda xs: [at(m, f"S{s}") for m, s in xs])


@given(events_strategy, st.integers(0, 3), st.randoms(use_true_random=False))
def test_waves_partition_minutes(evs, gap, rnd):
    waves = detect_waves(evs, gap)
    minutes = [t for w in waves for t in w.counts]
    assert len(minutes) == len(set(minutes))
    assert set(minutes) == {e.timestamp for e in normalize_events(evs)}
    for w in waves:
        assert w.start <= w.end
        assert all(w.counts[t] >= 1 for t in w.counts)
    shuffled = list(evs)
    rnd.shuffle(shuffled)
    assert detect_waves(shuffled, gap) == waves
    flat = [FailureEvent(t, s) for t, s in ((e.timestamp, e.stock_id) for e in normalize_events(evs))]
    assert detect_waves(flat, gap) == waves


@given(events_strategy, st.dictionaries(st.sampled_from([f"S{k}" for k in range(61)]), st.floats(0, 1)))
def test_max_pd_brute_force(evs, p_d):
    waves = detect_waves(evs)
    tl = max_pd_timeline(evs, p_d, waves)
    evs = normalize_events(evs)
    for t, _, _, m in tl.rows:
        assert m == max(p_d[e.stock_id] for e in evs if e.timestamp == t and e.stock_id in p_d)


def ramp_fixture():
    # max P_D climbs to the peak minute and decays after it
    counts = [1, 2, 3, 4, 8, 3, 2, 1]
    evs = burst(counts)
    pd_level = [0.1, 0.2, 0.3, 0.4, 0.5, 0.35, 0.2, 0.05]
    p_d, k = {}, 0
    for off, n in enumerate(counts):
        for q in range(n):
            p_d[f"S{k:04d}"] = pd_level[off] if q == 0 else 0.0
            k += 1
    return evs, p_d


def test_ramp_sign_pattern():
    evs, p_d = ramp_fixture()
    tl = max_pd_timeline(evs, p_d, detect_waves(evs))
    assert tl.pre_peak.r > 0 and tl.post_peak.r < 0
    assert tl.pre_peak.n == 5 and tl.post_peak.n == 4


def test_constant_pd_undefined():
    evs = burst([1, 2, 3, 2, 1])
    tl = max_pd_timeline(evs, {e.stock_id: 0.3 for e in evs}, detect_waves(evs))
    assert not tl.pre_peak.defined and not tl.post_peak.defined


def test_short_side_undefined_and_missing_counted():
    evs = burst([5, 1])
    tl = max_pd_timeline(evs, {"S0000": 0.2}, detect_waves(evs))
    assert math.isnan(tl.post_peak.r)
    assert tl.n_missing == 5


def test_flat_kcore_trajectory():
    traj = kcore_trajectory([(0, "a"), (1, "b"), (1, "c")], {"a": 4, "b": 4, "c": 4})
    assert [s.mean for s in traj.values()] == [4.0, 4.0]


def test_kcore_trajectory_skips_unknown():
    traj = kcore_trajectory([(0, "a"), (1, "zz")], {"a": 2})
    assert list(traj) == [0]


def test_event_buckets_interval():
    evs = [at(0, "a"), at(4, "b"), at(5, "c")]
    buckets = [b for b, _ in event_buckets(evs, interval=5)]
    assert buckets == [DAY, DAY, DAY + timedelta(minutes=5)]


def test_core_periphery_trajectory_rises_then_falls():
    net = core_periphery()
    core = k_core_index(stock_projection(net))
    a = find_alpha_c(net, "EDGE00_0", 0.1, tol=1e-4)
    res = run_cascade(net, "EDGE00_0", a.value - 2e-4, 0.1)
    means = [s.mean for s in kcore_trajectory(cascade_buckets(res), core).values()]
    assert means[1] < max(means)
    assert means[-1] < max(means)


def test_simulated_trajectory_shape():
    net = core_periphery()
    core = k_core_index(stock_projection(net))
    results = [run_cascade(net, s, 0.9, 0.1) for s in net.stocks if s.startswith("EDGE")]
    traj = simulated_kcore_trajectory(results, core)
    assert traj[0].n == len(results)


def test_read_events_csv(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("timestamp,stock_id\n2015-06-26 09:31,S1\n")
    assert read_events_csv(p) == [FailureEvent(datetime(2015, 6, 26, 9, 31), "S1")]
    p.write_text("time,stock\n")
    with pytest.raises(ValueError):
        read_events_csv(p)


def test_parse_sessions():
    s = parse_sessions(["09:30-11:30", "13:00-15:00"])
    assert s[1][0].hour == 13
