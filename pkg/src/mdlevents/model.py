"""Domain types shared by every detection stage.

Sample indices are zero-based and event spans are inclusive on both ends,
so two events sharing a single boundary sample overlap.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


class Stage(str, Enum):
    STEP = "step"
    LONG_TRANSIENT = "long_transient"


@dataclass(frozen=True)
class EventFeatures:
    delta_p: float
    delta_q: float
    range_p: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.delta_p, self.delta_q, self.range_p], dtype=float)


@dataclass(frozen=True)
class Event:
    """A transient segment ``[start_idx, end_idx]`` of a power series.

    ``window_len`` is the sliding-window length that produced the event
    (1 for edge-detected steps). ``motif_id`` is filled in by motif mining
    when the event belongs to a recurring pattern.
    """

    start_idx: int
    end_idx: int
    window_len: int = 1
    stage: Stage = Stage.STEP
    features: Optional[EventFeatures] = field(default=None, compare=False)
    motif_id: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        if self.start_idx > self.end_idx:
            raise ValueError(f"event start {self.start_idx} after end {self.end_idx}")
        if self.start_idx < 0:
            raise ValueError("event start must be non-negative")
        if self.window_len < 1:
            raise ValueError("window_len must be >= 1")

    @property
    def n_samples(self) -> int:
        return self.end_idx - self.start_idx + 1

    @property
    def span(self) -> int:
        return self.end_idx - self.start_idx

    def with_features(self, s: "PowerSeries") -> "Event":
        return Event(self.start_idx, self.end_idx, self.window_len, self.stage,
                     event_features(self, s), self.motif_id)

    def with_motif(self, motif_id: Optional[int]) -> "Event":
        return Event(self.start_idx, self.end_idx, self.window_len, self.stage,
                     self.features, motif_id)


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """Uniformly sampled 1 Hz active (and optionally reactive) power."""

    start_epoch: float
    active: np.ndarray
    reactive: Optional[np.ndarray] = None
    sample_period: float = 1.0

    def __post_init__(self):
        active = np.asarray(self.active, dtype=float)
        if active.ndim != 1 or active.size == 0:
            raise ValueError("active power must be a non-empty 1-D sequence")
        object.__setattr__(self, "active", active)
        if self.reactive is not None:
            reactive = np.asarray(self.reactive, dtype=float)
            if reactive.shape != active.shape:
                raise ValueError("reactive power must match active power length")
            object.__setattr__(self, "reactive", reactive)
        if self.sample_period != 1.0:
            raise ValueError("only 1 Hz series are supported")

    def __len__(self) -> int:
        return self.active.size

    def epoch_of(self, idx: int) -> float:
        return self.start_epoch + idx * self.sample_period

    def index_of(self, epoch: float) -> int:
        return int(round((epoch - self.start_epoch) / self.sample_period))

    def __eq__(self, other):
        if not isinstance(other, PowerSeries):
            return NotImplemented
        if self.start_epoch != other.start_epoch or len(self) != len(other):
            return False
        if not np.array_equal(self.active, other.active):
            return False
        if (self.reactive is None) != (other.reactive is None):
            return False
        return self.reactive is None or np.array_equal(self.reactive, other.reactive)

    __hash__ = None


@dataclass(frozen=True)
class DetectionConfig:
    """Tunable parameters of the detection pipeline (1 Hz defaults)."""

    window_set: tuple = (5, 10, 15, 20, 25, 30, 60)
    k_th1: float = 0.5
    k_th2: float = 1.0
    dp_th1: float = 10.0
    dp_th2: float = 40.0
    dt_steady: float = 10.0
    n_days: int = 4
    n_th: int = 3
    vad_window: int = 10
    lambda1: float = 50.0
    lambda2: float = 5.0
    w_post: int = 300
    eta: float = 3.0
    t_test_alpha: float = 0.05
    rho: float = 0.8
    penalty: float = 0.1
    # adaptive step threshold
    mad_scale: float = 5.0
    d_min: float = 15.0
    threshold_window: int = 300
    # trend segmentation and clustering
    plr_tolerance: float = 5.0
    bandwidth: float = 0.8
    feature_scale_floor: float = 15.0
    day_length: int = 86400

    def __post_init__(self):
        ws = tuple(int(w) for w in self.window_set)
        object.__setattr__(self, "window_set", ws)
        if not ws or list(ws) != sorted(set(ws)) or ws[0] < 2:
            raise ValueError("window_set must be strictly ascending with every w >= 2")
        if not self.k_th1 < self.k_th2:
            raise ValueError("k_th1 must be below k_th2")
        if not self.dp_th1 < self.dp_th2:
            raise ValueError("dp_th1 must be below dp_th2")
        positive = ("k_th1", "k_th2", "dp_th1", "dp_th2", "dt_steady", "n_days",
                    "vad_window", "lambda1", "lambda2", "eta", "rho", "penalty",
                    "mad_scale", "d_min", "threshold_window", "plr_tolerance",
                    "bandwidth", "day_length")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_th < 0 or self.w_post < 0:
            raise ValueError("n_th and w_post must be non-negative")
        if not 0 < self.t_test_alpha < 1:
            raise ValueError("t_test_alpha must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window_set"] = list(self.window_set)
        return d


def check_within(e: Event, s: PowerSeries) -> None:
    if e.end_idx >= len(s):
        raise IndexError(f"event [{e.start_idx}, {e.end_idx}] outside series of length {len(s)}")


def event_features(e: Event, s: PowerSeries) -> EventFeatures:
    """Net active/reactive change and active-power range over the event."""
    check_within(e, s)
    seg = s.active[e.start_idx:e.end_idx + 1]
    dq = 0.0
    if s.reactive is not None:
        dq = float(s.reactive[e.end_idx] - s.reactive[e.start_idx])
    return EventFeatures(
        delta_p=float(seg[-1] - seg[0]),
        delta_q=dq,
        range_p=float(seg.max() - seg.min()),
    )


def events_overlap(a: Event, b: Event) -> bool:
    return a.start_idx <= b.end_idx and b.start_idx <= a.end_idx


def sort_events(events) -> list:
    return sorted(events, key=lambda e: (e.start_idx, e.end_idx, e.window_len))
