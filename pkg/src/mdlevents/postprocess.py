"""Post-processing: locate load-fluctuation stretches and drop events explained by them.

Fluctuations are found VAD-style on the first differences of the steady
stretches between events, scanned in fixed non-overlapping windows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DetectionConfig, Event, PowerSeries


@dataclass(frozen=True)
class SteadyDiff:
    diff: np.ndarray          # concatenated first differences of the steady stretches
    orig_idx: np.ndarray      # original index of the later sample of each difference
    seg_id: np.ndarray        # steady stretch each difference belongs to
    segments: tuple           # (start, end) original spans of the steady stretches


@dataclass(frozen=True)
class VadWindow:
    index: int
    energy: float
    range_p: float
    orig_start: int
    orig_end: int
    flagged: bool


@dataclass(frozen=True)
class FluctuationSegment:
    first_window: int
    last_window: int
    diff_start: int
    diff_end: int
    orig_start: int
    orig_end: int


def steady_mask(n: int, events) -> np.ndarray:
    steady = np.ones(n, dtype=bool)
    for e in events:
        steady[e.start_idx:e.end_idx + 1] = False
    return steady


def build_steady_diff(s: PowerSeries, events) -> SteadyDiff:
    """First differences of every inter-event steady stretch, concatenated.

    No difference is ever taken across an event, so transients never leak
    into the result.
    """
    n = len(s)
    steady = steady_mask(n, events)
    edges = np.flatnonzero(np.diff(np.r_[False, steady, False].astype(np.int8)))
    spans = [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]
    diffs, idx, sid = [], [], []
    for k, (a, b) in enumerate(spans):
        if b > a:
            diffs.append(np.diff(s.active[a:b + 1]))
            idx.append(np.arange(a + 1, b + 1))
            sid.append(np.full(b - a, k))
    if not diffs:
        empty = np.zeros(0)
        return SteadyDiff(empty, empty.astype(int), empty.astype(int), tuple(spans))
    return SteadyDiff(np.concatenate(diffs), np.concatenate(idx), np.concatenate(sid), tuple(spans))


def vad_windows(sd: SteadyDiff, s: PowerSeries, cfg: DetectionConfig = DetectionConfig()) -> list[VadWindow]:
    """Energy and steady-range statistics for each non-overlapping window of ``sd``.

    The range of a window is the largest max-minus-min over the pieces of
    the steady stretches that the window's differences cover.
    """
    m = sd.diff.size
    if m == 0:
        return []
    nw = cfg.vad_window
    win = np.arange(m) // nw
    p = s.active
    lo = np.minimum(p[sd.orig_idx - 1], p[sd.orig_idx])
    hi = np.maximum(p[sd.orig_idx - 1], p[sd.orig_idx])
    key_change = np.flatnonzero(np.r_[True, (win[1:] != win[:-1]) | (sd.seg_id[1:] != sd.seg_id[:-1])])
    piece_range = np.maximum.reduceat(hi, key_change) - np.minimum.reduceat(lo, key_change)
    piece_win = win[key_change]
    starts = np.flatnonzero(np.r_[True, piece_win[1:] != piece_win[:-1]])
    win_range = np.maximum.reduceat(piece_range, starts)
    energy = np.add.reduceat(sd.diff ** 2, np.arange(0, m, nw))
    first = np.arange(0, m, nw)
    last = np.minimum(first + nw, m) - 1
    out = []
    for l in range(energy.size):
        e, r = float(energy[l]), float(win_range[l])
        out.append(VadWindow(l, e, r, int(sd.orig_idx[first[l]] - 1), int(sd.orig_idx[last[l]]),
                             e > cfg.lambda1 and r > cfg.lambda2))
    return out


def detect_fluctuation_segments(sd: SteadyDiff, s: PowerSeries,
                                cfg: DetectionConfig = DetectionConfig(),
                                windows: list[VadWindow] | None = None) -> list[FluctuationSegment]:
    """Merge runs of consecutive fluctuating windows into segments."""
    if windows is None:
        windows = vad_windows(sd, s, cfg)
    nw = cfg.vad_window
    out = []
    run = None
    for w in windows + [None]:
        if w is not None and w.flagged:
            run = (run[0], w) if run else (w, w)
            continue
        if run:
            a, b = run
            out.append(FluctuationSegment(a.index, b.index, a.index * nw,
                                          min((b.index + 1) * nw, sd.diff.size) - 1,
                                          a.orig_start, b.orig_end))
            run = None
    return out


def fluctuation_mask(sd: SteadyDiff, segments, n: int, cfg: DetectionConfig = DetectionConfig()) -> np.ndarray:
    """Original samples touched by a difference inside a fluctuation segment."""
    mask = np.zeros(n, dtype=bool)
    for seg in segments:
        idx = sd.orig_idx[seg.diff_start:seg.diff_end + 1]
        mask[idx] = True
        mask[idx - 1] = True
    return mask


def in_fluctuation(e: Event, steady: np.ndarray, fluct: np.ndarray, nw: int) -> bool:
    """At least half of the steady samples within ``nw`` of the event are fluctuating."""
    n = steady.size
    near = np.r_[np.arange(max(0, e.start_idx - nw), e.start_idx),
                 np.arange(e.end_idx + 1, min(n, e.end_idx + 1 + nw))]
    near = near[steady[near]]
    return near.size > 0 and fluct[near].mean() >= 0.5


def fluctuation_bound(ranges, eta: float) -> float | None:
    """``mean(R) + eta * std(R)`` of window ranges; None when there are none."""
    r = np.asarray(ranges, dtype=float)
    if r.size == 0:
        return None
    return float(r.mean() + eta * r.std())


def remove_unreasonable(events, s: PowerSeries, th: np.ndarray,
                        cfg: DetectionConfig = DetectionConfig(),
                        windows: list[VadWindow] | None = None,
                        segments: list[FluctuationSegment] | None = None):
    """Split ``events`` into ``(kept, removed)``.

    An event is removed when its |dP| is below the adaptive threshold at its
    start, or when it sits in a fluctuation segment and |dP| stays below
    ``mean(R) + eta * std(R)`` of the window ranges within ``w_post``
    samples of it.
    """
    p = s.active
    n = len(s)
    sd = build_steady_diff(s, events)
    if windows is None:
        windows = vad_windows(sd, s, cfg)
    if segments is None:
        segments = detect_fluctuation_segments(sd, s, cfg, windows)
    steady = steady_mask(n, events)
    fluct = fluctuation_mask(sd, segments, n, cfg)
    w_start = np.array([w.orig_start for w in windows], dtype=int)
    w_end = np.array([w.orig_end for w in windows], dtype=int)
    w_range = np.array([w.range_p for w in windows])

    kept, removed = [], []
    for e in events:
        dp = abs(p[e.end_idx] - p[e.start_idx])
        if dp < th[e.start_idx]:
            removed.append(e)
            continue
        if segments and in_fluctuation(e, steady, fluct, cfg.vad_window):
            lo, hi = e.start_idx - cfg.w_post, e.end_idx + cfg.w_post
            bound = fluctuation_bound(w_range[(w_end >= lo) & (w_start <= hi)], cfg.eta)
            if bound is not None and dp < bound:
                removed.append(e)
                continue
        kept.append(e)
    return kept, removed
