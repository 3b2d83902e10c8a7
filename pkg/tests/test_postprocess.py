import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import series
from mdlevents.model import DetectionConfig, Event
from mdlevents.postprocess import (build_steady_diff, detect_fluctuation_segments, fluctuation_bound,
                                   remove_unreasonable, vad_windows)
from mdlevents.stage1 import adaptive_threshold

CFG = DetectionConfig()
# ten differences: squared sum 60, excursion 8 W
WIGGLE = np.array([3, 3, 2, -2, -3, -3, 2, -2, 2, -2], dtype=float)


def test_no_events_whole_diff():
    p = np.array([1.0, 4.0, 2.0, 2.0, 7.0])
    sd = build_steady_diff(series(p), [])
    np.testing.assert_array_equal(sd.diff, np.diff(p))
    assert sd.segments == ((0, 4),)


def test_no_difference_across_event():
    p = np.r_[np.full(10, 100.0), 300, 500, np.full(10, 500.0)]
    sd = build_steady_diff(series(p), [Event(9, 11)])
    assert sd.segments == ((0, 8), (12, 21))
    assert sd.diff.size == 8 + 9
    assert np.all(sd.diff == 0)
    assert 10 not in sd.orig_idx and 11 not in sd.orig_idx and 12 not in sd.orig_idx


def test_constant_segments_zero_diff():
    p = np.r_[np.full(10, 5.0), np.full(10, 50.0)]
    sd = build_steady_diff(series(p), [Event(9, 10)])
    assert np.all(sd.diff == 0)


def test_all_zero_no_fluctuation():
    s = series(np.full(100, 70.0))
    assert detect_fluctuation_segments(build_steady_diff(s, []), s, CFG) == []


def wiggle_series(flagged_windows, n_windows):
    p = [100.0]
    for k in range(n_windows):
        step = WIGGLE if k in flagged_windows else np.zeros(10)
        p += list(p[-1] + np.cumsum(step))
    return series(p)


def test_single_window_flagged():
    s = wiggle_series({1}, 3)
    sd = build_steady_diff(s, [])
    windows = vad_windows(sd, s, CFG)
    assert [w.flagged for w in windows] == [False, True, False]
    assert windows[1].energy == 60 and windows[1].range_p == 8
    assert (windows[1].orig_start, windows[1].orig_end) == (10, 20)
    [seg] = detect_fluctuation_segments(sd, s, CFG)
    assert (seg.first_window, seg.last_window) == (1, 1)


def test_consecutive_windows_merge():
    s = wiggle_series({1, 2, 3}, 5)
    segs = detect_fluctuation_segments(build_steady_diff(s, []), s, CFG)
    assert len(segs) == 1
    seg = segs[0]
    assert (seg.first_window, seg.last_window) == (1, 3)
    assert (seg.orig_start, seg.orig_end) == (10, 40)


def test_energy_alone_is_not_enough():
    # squared sum 100 but the level only moves 5 W
    s = series(100 + np.r_[0, np.tile([5.0, 0.0], 10)])
    assert detect_fluctuation_segments(build_steady_diff(s, []), s, CFG) == []


def test_removal_bound_arithmetic():
    bound = fluctuation_bound([12.0, 18.0], 3.0)       # mean 15, spread 3
    assert bound == pytest.approx(24.0)
    assert 20 < bound and not 30 < bound
    assert fluctuation_bound([], 3.0) is None


def noisy_day(rng, n=3000):
    p = 400 + rng.normal(0, 1, n)
    p[1000:2000] += 8 * rng.standard_normal(1000)
    return p


def test_small_event_inside_fluctuation_removed(rng):
    p = noisy_day(rng)
    p[1500:] += 40.0
    s = series(p)
    th = np.full(p.size, 15.0)
    e = Event(1499, 1500)
    kept, removed = remove_unreasonable([e], s, th, CFG)
    assert removed == [e]


def test_large_event_inside_fluctuation_kept(rng):
    p = noisy_day(rng)
    p[1500:] += 400.0
    s = series(p)
    kept, removed = remove_unreasonable([Event(1499, 1500)], s, np.full(p.size, 15.0), CFG)
    assert kept and not removed


def test_event_outside_fluctuation_kept(rng):
    p = noisy_day(rng)
    p[2500:] += 40.0
    kept, removed = remove_unreasonable([Event(2499, 2500)], series(p), np.full(p.size, 15.0), CFG)
    assert kept and not removed


def test_event_below_threshold_removed():
    p = np.r_[np.full(50, 100.0), np.full(50, 110.0)]
    kept, removed = remove_unreasonable([Event(49, 50)], series(p), np.full(100, 15.0), CFG)
    assert removed and not kept


# ---------------------------------------------------------------- properties

@st.composite
def series_with_events(draw):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    r = np.random.default_rng(seed)
    n = draw(st.integers(30, 800))
    p = 200 + np.cumsum(r.normal(0, draw(st.floats(0.1, 6.0)), n))
    events, t = [], int(r.integers(0, 20))
    while t < n - 2 and len(events) < 10:
        length = int(r.integers(1, 30))
        end = min(n - 1, t + length)
        events.append(Event(t, end))
        p[t:end + 1] += np.linspace(0, r.uniform(-500, 500), end - t + 1)
        t = end + 1 + int(r.integers(0, 80))
    return p, events


@given(series_with_events())
def test_differencing_never_crosses_events(pe):
    p, events = pe
    sd = build_steady_diff(series(p), events)
    inside = np.zeros(p.size, dtype=bool)
    for e in events:
        inside[e.start_idx:e.end_idx + 1] = True
    assert not inside[sd.orig_idx].any() and not inside[sd.orig_idx - 1].any()
    np.testing.assert_array_equal(sd.diff, p[sd.orig_idx] - p[sd.orig_idx - 1])


@given(series_with_events(), st.floats(1.0, 4.0), st.floats(1.0, 4.0))
def test_raising_vad_thresholds_only_unflags(pe, k1, k2):
    p, events = pe
    s = series(p)
    sd = build_steady_diff(s, events)
    base = DetectionConfig()
    strict = DetectionConfig(lambda1=base.lambda1 * k1, lambda2=base.lambda2 * k2)
    loose_flags = {w.index for w in vad_windows(sd, s, base) if w.flagged}
    strict_flags = {w.index for w in vad_windows(sd, s, strict) if w.flagged}
    assert strict_flags <= loose_flags
    covered = lambda cfg: sum(g.last_window - g.first_window + 1
                              for g in detect_fluctuation_segments(sd, s, cfg))
    assert covered(strict) <= covered(base)


@given(series_with_events(), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_removal_monotone_in_eta(pe, eta_a, eta_b):
    # the bound mean + eta * std grows with eta, so a larger eta can only add removals
    p, events = pe
    lo, hi = sorted((eta_a, eta_b))
    s = series(p)
    th = adaptive_threshold(s)
    _, removed_lo = remove_unreasonable(events, s, th, DetectionConfig(eta=max(lo, 1e-9)))
    _, removed_hi = remove_unreasonable(events, s, th, DetectionConfig(eta=max(hi, 1e-9)))
    assert set(removed_lo) <= set(removed_hi)
