import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import series
from mdlevents.model import (DetectionConfig, Event, EventFeatures, PowerSeries, Stage,
                             event_features, events_overlap)


def test_features_rising_segment():
    f = event_features(Event(0, 3), series([100, 350, 600, 620]))
    assert f.delta_p == 520 and f.range_p == 520 and f.delta_q == 0


def test_features_single_sample():
    f = event_features(Event(2, 2), series([1, 5, 9, 3]))
    assert f == EventFeatures(0.0, 0.0, 0.0)


def test_features_falling_with_excursion():
    f = event_features(Event(0, 2), series([500, 800, 300]))
    assert f.delta_p == -200 and f.range_p == 500


def test_features_reactive():
    f = event_features(Event(1, 2), series([0, 10, 30], reactive=[5, 6, 9]))
    assert f.delta_q == 3


def test_features_out_of_bounds():
    with pytest.raises(IndexError):
        event_features(Event(2, 5), series([1, 2, 3]))


@pytest.mark.parametrize("a, b, expected", [
    ((10, 20), (20, 30), True),
    ((10, 20), (21, 30), False),
    ((10, 30), (15, 18), True),
])
def test_overlap_examples(a, b, expected):
    assert events_overlap(Event(*a), Event(*b)) is expected


def test_event_validation():
    with pytest.raises(ValueError):
        Event(5, 4)
    with pytest.raises(ValueError):
        Event(-1, 4)
    with pytest.raises(ValueError):
        Event(1, 4, window_len=0)
    e = Event(3, 7, 10, Stage.LONG_TRANSIENT)
    assert e.n_samples == 5 and e.span == 4


def test_powerseries_validation():
    with pytest.raises(ValueError):
        PowerSeries(0, np.array([]))
    with pytest.raises(ValueError):
        PowerSeries(0, np.ones(3), np.ones(4))
    with pytest.raises(ValueError):
        PowerSeries(0, np.ones(3), sample_period=0.5)
    s = PowerSeries(100, [1, 2, 3])
    assert len(s) == 3 and s.epoch_of(2) == 102 and s.index_of(101) == 1


def test_config_validation():
    with pytest.raises(ValueError):
        DetectionConfig(k_th1=2.0, k_th2=1.0)
    with pytest.raises(ValueError):
        DetectionConfig(dp_th1=50.0)
    with pytest.raises(ValueError):
        DetectionConfig(window_set=(10, 5))
    with pytest.raises(ValueError):
        DetectionConfig(window_set=(1, 5))
    with pytest.raises(ValueError):
        DetectionConfig(lambda1=0)


# ---------------------------------------------------------------- properties

values = st.lists(st.floats(-5000, 5000, allow_nan=False), min_size=2, max_size=60)


@st.composite
def series_and_event(draw):
    v = draw(values)
    a = draw(st.integers(0, len(v) - 1))
    b = draw(st.integers(a, len(v) - 1))
    return v, Event(a, b)


@given(series_and_event(), st.integers(1, 50))
def test_features_translation_invariant(se, k):
    v, e = se
    shifted = series([0.0] * k + v)
    assert event_features(Event(e.start_idx + k, e.end_idx + k), shifted) == event_features(e, series(v))


@given(series_and_event(), st.floats(-1e4, 1e4, allow_nan=False))
def test_features_offset_invariant(se, c):
    v, e = se
    f0 = event_features(e, series(v))
    f1 = event_features(e, series(np.asarray(v) + c))
    assert f1.delta_p == pytest.approx(f0.delta_p, abs=1e-6)
    assert f1.range_p == pytest.approx(f0.range_p, abs=1e-6)
    assert f1.range_p >= 0


intervals = st.tuples(st.integers(0, 100), st.integers(0, 30)).map(lambda t: Event(t[0], t[0] + t[1]))


@given(intervals, intervals)
def test_overlap_symmetric_and_reflexive(a, b):
    assert events_overlap(a, b) == events_overlap(b, a)
    assert events_overlap(a, a)
