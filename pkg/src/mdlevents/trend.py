"""Trend screening of candidate events via piecewise linear segmentation."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import DetectionConfig, Event, PowerSeries


class Trend(str, Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    STEADY = "steady"


@dataclass(frozen=True)
class TrendSegment:
    start_idx: int
    end_idx: int
    slope: float
    dp: float
    label: Trend

    @property
    def duration(self) -> int:
        return self.end_idx - self.start_idx


def is_steady(dp: float, duration: float, cfg: DetectionConfig = DetectionConfig()) -> bool:
    return classify_trend(dp / duration, dp, duration, cfg) is Trend.STEADY


def classify_trend(slope: float, dp: float, duration: float,
                   cfg: DetectionConfig = DetectionConfig()) -> Trend:
    if not duration > 0:
        raise ValueError("segment duration must be positive")
    k, d = abs(slope), abs(dp)
    if k < cfg.k_th1 or d < cfg.dp_th1 or (k < cfg.k_th2 and d < cfg.dp_th2):
        return Trend.STEADY
    return Trend.INCREASING if dp > 0 else Trend.DECREASING


def plr_segment(seg, tolerance: float = 5.0) -> list[tuple[int, int]]:
    """Top-down piecewise linear segmentation.

    A span is split at the sample farthest (perpendicular distance) from the
    chord joining its endpoints while that distance exceeds ``tolerance``
    watts. Adjacent spans share their breakpoint sample, so every first
    difference of ``seg`` belongs to exactly one span.
    """
    y = np.asarray(seg, dtype=float)
    if y.size < 2:
        raise ValueError("segmentation needs at least two samples")
    spans = []
    stack = [(0, y.size - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo >= 2:
            x = np.arange(lo + 1, hi)
            slope = (y[hi] - y[lo]) / (hi - lo)
            dist = np.abs(y[lo + 1:hi] - (y[lo] + slope * (x - lo))) / np.hypot(1.0, slope)
            k = int(np.argmax(dist))
            if dist[k] > tolerance:
                mid = lo + 1 + k
                stack.append((mid, hi))
                stack.append((lo, mid))
                continue
        spans.append((lo, hi))
    return spans


def trend_segments(p, cfg: DetectionConfig = DetectionConfig(), offset: int = 0) -> list[TrendSegment]:
    y = np.asarray(p, dtype=float)
    out = []
    for lo, hi in plr_segment(y, cfg.plr_tolerance):
        dp = float(y[hi] - y[lo])
        slope = dp / (hi - lo)
        out.append(TrendSegment(lo + offset, hi + offset, slope, dp,
                                classify_trend(slope, dp, hi - lo, cfg)))
    return out


def unreasonable_rules(segments: list[TrendSegment], net_dp: float,
                       cfg: DetectionConfig = DetectionConfig()) -> list[str]:
    """Names of the unreasonable-shape rules an event's trend word triggers.

    R1: the first moving segment runs against the net change.
    R2: rises and falls both occur and the opposing movement outweighs the
        supporting one.
    R3: a steady stretch lasts longer than ``dt_steady``.
    R4: the last moving segment runs against the net change.
    """
    fired = []
    moving = [g for g in segments if g.label is not Trend.STEADY]
    if net_dp > 0:
        support, against = Trend.INCREASING, Trend.DECREASING
    elif net_dp < 0:
        support, against = Trend.DECREASING, Trend.INCREASING
    else:
        support = against = None
    if against is not None and moving and moving[0].label is against:
        fired.append("R1")
    labels = {g.label for g in moving}
    if Trend.INCREASING in labels and Trend.DECREASING in labels:
        rise = sum(abs(g.dp) for g in moving if g.label is Trend.INCREASING)
        fall = sum(abs(g.dp) for g in moving if g.label is Trend.DECREASING)
        if support is None or (fall > rise if support is Trend.INCREASING else rise > fall):
            fired.append("R2")
    if any(g.label is Trend.STEADY and g.duration > cfg.dt_steady for g in segments):
        fired.append("R3")
    if against is not None and moving and moving[-1].label is against:
        fired.append("R4")
    return fired


def screen_events(events, s: PowerSeries, cfg: DetectionConfig = DetectionConfig()):
    """Split events into ``(kept, removed)`` by their trend shape."""
    kept, removed = [], []
    p = s.active
    for e in events:
        if e.end_idx >= len(s):
            raise IndexError("event outside series")
        if e.span < 1:
            kept.append(e)
            continue
        segs = trend_segments(p[e.start_idx:e.end_idx + 1], cfg, offset=e.start_idx)
        if unreasonable_rules(segs, float(p[e.end_idx] - p[e.start_idx]), cfg):
            removed.append(e)
        else:
            kept.append(e)
    return kept, removed
