"""Stage I: adaptive noise threshold and edge detection of step-like events."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .model import DetectionConfig, Event, PowerSeries, Stage

MAD_NORMAL = 1.4826
_CHUNK = 16384


class InsufficientDataError(ValueError):
    pass


def rolling_mad(x: np.ndarray, window: int) -> np.ndarray:
    """Median absolute deviation of every length-``window`` slice of ``x``.

    Element ``i`` of the result covers ``x[i:i + window]``.
    """
    views = sliding_window_view(x, window)
    out = np.empty(views.shape[0])
    for lo in range(0, views.shape[0], _CHUNK):
        block = views[lo:lo + _CHUNK]
        med = np.median(block, axis=1, keepdims=True)
        out[lo:lo + _CHUNK] = np.median(np.abs(block - med), axis=1)
    return out


def adaptive_threshold(s: PowerSeries, cfg: DetectionConfig = DetectionConfig()) -> np.ndarray:
    """Per-sample detection threshold D_th(t) in watts.

    ``D_th(t) = max(d_min, c * 1.4826 * MAD(|dP|))`` where the MAD runs over
    the trailing ``threshold_window`` first differences ending at the change
    into sample ``t``. Samples before the first full window reuse its value;
    series shorter than one window use a single whole-series estimate.
    """
    n = len(s)
    if n < 2:
        raise InsufficientDataError("need at least two samples to estimate a threshold")
    mag = np.abs(np.diff(s.active))
    window = min(cfg.threshold_window, mag.size)
    mad = rolling_mad(mag, window)
    level = np.maximum(cfg.d_min, cfg.mad_scale * MAD_NORMAL * mad)
    # diff k is the change into sample k + 1; window j ends at diff j + window - 1
    th = np.empty(n)
    first = window
    th[:first] = level[0]
    th[first:] = level[np.arange(first, n) - window]
    return th


def change_samples(s: PowerSeries, th: np.ndarray) -> np.ndarray:
    """Signed change flags: +1/-1 at sample t when |P(t) - P(t-1)| > D_th(t)."""
    d = np.diff(s.active)
    flags = np.zeros(len(s), dtype=np.int8)
    hit = np.abs(d) > th[1:]
    flags[1:][hit] = np.sign(d[hit]).astype(np.int8)
    return flags


def detect_step_events(s: PowerSeries, th: np.ndarray) -> list[Event]:
    """Group same-sign runs of change samples into step events.

    Each run ``[t0, t1]`` yields the event ``[t0 - 1, t1]``: the last steady
    sample before the edge through the final changed sample. Runs of
    opposite sign stay separate so near-simultaneous on/off pairs survive.
    """
    th = np.asarray(th, dtype=float)
    if th.shape != (len(s),):
        raise ValueError("threshold profile is not aligned with the series")
    flags = change_samples(s, th)
    events = []
    t, n = 1, len(s)
    while t < n:
        sign = flags[t]
        if sign == 0:
            t += 1
            continue
        start = t
        while t + 1 < n and flags[t + 1] == sign:
            t += 1
        events.append(Event(start - 1, t, 1, Stage.STEP))
        t += 1
    return _split_shared_edges(events, s, th)


def _split_shared_edges(events, s, th):
    # opposite-sign runs that touch share one boundary sample; give it to one side
    out = []
    for e in events:
        if out and out[-1].end_idx >= e.start_idx:
            prev = out[-1]
            if e.span >= 2:
                e = Event(e.start_idx + 1, e.end_idx, 1, Stage.STEP)
            elif prev.span >= 2:
                out[-1] = Event(prev.start_idx, prev.end_idx - 1, 1, Stage.STEP)
            else:
                # one-sample excursion: keep the net transition if it is still an edge
                out[-1] = Event(prev.start_idx, e.end_idx, 1, Stage.STEP)
                continue
        out.append(e)
    p = s.active
    return [e for e in out
            if abs(p[e.end_idx] - p[e.start_idx]) > th[e.start_idx:e.end_idx + 1].min()]
