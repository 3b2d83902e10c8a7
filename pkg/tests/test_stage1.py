import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import series
from mdlevents.model import DetectionConfig, Event, Stage, events_overlap
from mdlevents.stage1 import (InsufficientDataError, adaptive_threshold, change_samples,
                              detect_step_events, rolling_mad)


def flat_th(n, value=15.0):
    return np.full(n, value)


def test_constant_series_floors_at_d_min():
    th = adaptive_threshold(series(np.full(400, 230.0)))
    assert np.all(th == 15.0)


def test_threshold_matches_brute_force_mad(rng):
    p = 300 + rng.normal(0, 6.0, 700)
    th = adaptive_threshold(series(p))
    ref = oracles.threshold_profile(list(p))
    np.testing.assert_allclose(th, ref, rtol=1e-12)
    assert th.min() > 15.0            # the noise, not the floor, sets this profile


def test_threshold_short_series_uses_whole_series(rng):
    p = rng.normal(0, 10.0, 50)
    th = adaptive_threshold(series(p))
    np.testing.assert_allclose(th, oracles.threshold_profile(list(p)), rtol=1e-12)


def test_threshold_robust_to_one_step(rng):
    base = 200 + rng.normal(0, 5.0, 1500)
    p = base.copy()
    p[700:] += 2000
    th = adaptive_threshold(series(p))
    before, after = th[650], th[1400]
    assert abs(after - before) / before < 0.10
    # the outlier difference moves every window containing it by under 10%
    th0 = adaptive_threshold(series(base))
    assert np.all(np.abs(th - th0) / th0 < 0.10)


def test_threshold_needs_two_samples():
    with pytest.raises(InsufficientDataError):
        adaptive_threshold(series([1.0]))


def test_rolling_mad_oracle(rng):
    x = rng.normal(0, 1, 40)
    got = rolling_mad(x, 7)
    ref = [oracles.mad(list(x[i:i + 7])) for i in range(34)]
    np.testing.assert_allclose(got, ref)


def test_clean_step():
    p = np.r_[np.zeros(10), np.full(20, 500.0)]
    assert detect_step_events(series(p), flat_th(p.size)) == [Event(9, 10, 1, Stage.STEP)]


def test_two_separate_steps():
    p = np.r_[np.zeros(10), np.full(3, 500.0), np.full(20, 800.0)]
    s = series(p)
    flags = change_samples(s, flat_th(p.size))
    assert list(np.flatnonzero(flags)) == [10, 13]
    assert detect_step_events(s, flat_th(p.size)) == [Event(9, 10), Event(12, 13)]


def test_multi_sample_edge_is_one_event():
    p = np.r_[np.zeros(10), 200, 400, np.full(10, 600.0)]
    assert detect_step_events(series(p), flat_th(p.size)) == [Event(9, 12)]


def test_ramp_yields_no_steps():
    p = np.r_[np.zeros(20), np.arange(1, 61) * 5.0, np.full(20, 300.0)]
    assert detect_step_events(series(p), flat_th(p.size)) == []


def test_adjacent_opposite_edges_stay_separate():
    p = np.r_[np.zeros(10), 500, 700, 700, 700, np.full(10, 100.0)]
    # rise over [9, 11], fall at 14
    assert detect_step_events(series(p), flat_th(p.size)) == [Event(9, 11), Event(13, 14)]
    q = np.r_[np.zeros(10), 500, 800, 300, np.full(10, 300.0)]
    events = detect_step_events(series(q), flat_th(q.size))
    assert len(events) == 2 and not events_overlap(*events)


def test_misaligned_threshold():
    with pytest.raises(ValueError):
        detect_step_events(series(np.zeros(10)), np.zeros(9))


# ---------------------------------------------------------------- properties

@st.composite
def step_signals(draw, min_noise=0.0):
    n = draw(st.integers(20, 400))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    r = np.random.default_rng(seed)
    noise = draw(st.floats(min_noise, 40.0))
    p = 500 + r.normal(0, noise, n) if noise > 0 else np.full(n, 500.0)
    for _ in range(draw(st.integers(0, 8))):
        t = int(r.integers(1, n))
        p[t:] += r.choice([-1, 1]) * r.uniform(20, 1500)
        if r.random() < 0.3 and t + 1 < n:
            p[t + 1:] += r.uniform(-300, 300)
    return p


@given(step_signals())
def test_step_events_disjoint_and_significant(p):
    s = series(p)
    th = adaptive_threshold(s)
    events = detect_step_events(s, th)
    for a, b in zip(events[:-1], events[1:]):
        assert not events_overlap(a, b)
    for e in events:
        assert e.window_len == 1 and e.stage is Stage.STEP
        assert abs(p[e.end_idx] - p[e.start_idx]) > th[e.start_idx:e.end_idx + 1].min()


@given(step_signals(min_noise=20.0), st.floats(1.0, 8.0))
def test_scaling_preserves_change_samples(p, alpha):
    cfg = DetectionConfig()
    s = series(p)
    th = adaptive_threshold(s, cfg)
    if th.min() <= cfg.d_min:
        return                      # only the MAD-governed regime scales
    scaled = series(alpha * p)
    th2 = adaptive_threshold(scaled, cfg)
    np.testing.assert_allclose(th2, alpha * th, rtol=1e-9)
    d = np.abs(np.diff(p))
    clear = np.abs(d / th[1:] - 1) > 1e-9
    f1 = change_samples(s, th)[1:][clear]
    f2 = change_samples(scaled, th2)[1:][clear]
    assert np.array_equal(f1, f2)
