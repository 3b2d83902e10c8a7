"""Stage II: long-transient detection with moving averages and a moving t-test.

Detection runs once per window length. The before/after windows never
straddle a Stage I step, so the series is effectively cut at every step
transient and each piece is scanned on its own.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pandas as pd
from scipy import stats

from .model import DetectionConfig, Event, PowerSeries, Stage, events_overlap
from .trend import is_steady


@dataclass(frozen=True)
class WindowStats:
    mean_before: float
    mean_after: float
    std_before: float
    std_after: float


@lru_cache(maxsize=None)
def t_critical(alpha: float, df: int) -> float:
    """Two-sided critical value of Student's t with ``df`` degrees of freedom."""
    return float(stats.t.ppf(1.0 - alpha / 2.0, df))


def window_stats(s: PowerSeries, t: int, w: int) -> WindowStats:
    if w < 2:
        raise ValueError("window length must be at least 2")
    if t - w < 0 or t + w - 1 >= len(s):
        raise IndexError(f"windows of length {w} around t={t} leave the series")
    before = s.active[t - w:t]
    after = s.active[t:t + w]
    return WindowStats(before.mean(), after.mean(), before.std(ddof=1), after.std(ddof=1))


def t_statistic(ws: WindowStats, w: int) -> float:
    diff = abs(ws.mean_after - ws.mean_before)
    pooled = np.sqrt((ws.std_before ** 2 + ws.std_after ** 2) / w)
    if pooled == 0:
        return np.inf if diff > 0 else 0.0
    return diff / pooled


def ttest_change_at(s: PowerSeries, t: int, w: int, d_th: float, alpha: float = 0.05) -> bool:
    """Whether a change occurs at ``t`` under window length ``w``.

    Both the mean shift must exceed ``d_th`` and the two-sample t statistic
    must exceed the two-sided critical value with ``2w - 2`` degrees of
    freedom. Noiseless windows with a nonzero shift count as infinitely
    significant.
    """
    ws = window_stats(s, t, w)
    if not abs(ws.mean_after - ws.mean_before) > d_th:
        return False
    return t_statistic(ws, w) > t_critical(alpha, 2 * w - 2)


def _segment_ids(n: int, exclusions) -> np.ndarray:
    excluded = np.zeros(n, dtype=bool)
    for e in exclusions:
        excluded[e.start_idx:e.end_idx + 1] = True
    ids = np.cumsum(np.r_[True, excluded[1:] != excluded[:-1]]) - 1
    ids[excluded] = -1
    return ids


def trigger_signs(p: np.ndarray, w: int, th: np.ndarray, alpha: float,
                  seg_ids: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised Eq-1 style test at every sample.

    Returns ``(signs, shift)``: ``signs[t]`` is +1/-1 where a change of that
    direction triggers at ``t`` and 0 elsewhere; ``shift[t]`` is the mean
    difference after minus before (NaN where the windows do not fit).
    """
    n = p.size
    signs = np.zeros(n, dtype=np.int8)
    shift = np.full(n, np.nan)
    if n < 2 * w:
        return signs, shift
    roll = pd.Series(p).rolling(w)
    mean = roll.mean().to_numpy()
    var = roll.var(ddof=1).to_numpy().clip(min=0.0)
    t = np.arange(w, n - w + 1)
    d = mean[t + w - 1] - mean[t - 1]
    pooled = np.sqrt((var[t - 1] + var[t + w - 1]) / w)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(pooled > 0, np.abs(d) / pooled, np.where(d != 0, np.inf, 0.0))
    hit = (np.abs(d) > th[t]) & (stat > t_critical(alpha, 2 * w - 2))
    if seg_ids is not None:
        hit &= (seg_ids[t - w] >= 0) & (seg_ids[t - w] == seg_ids[t + w - 1])
    shift[t] = d
    signs[t[hit]] = np.sign(d[hit]).astype(np.int8)
    return signs, shift


def _runs(signs: np.ndarray):
    """(first, last) index pairs of maximal same-sign nonzero runs."""
    nz = signs != 0
    edges = np.flatnonzero(np.diff(np.r_[0, signs, 0]) != 0)
    for lo, hi in zip(edges[:-1], edges[1:]):
        if nz[lo]:
            yield lo, hi - 1


def hinge_breakpoints(y: np.ndarray, a_max: int | None = None, b_min: int | None = None):
    """Least-squares flat/linear/flat fit; returns breakpoints ``(a, b)``, ``a < b``.

    The fitted curve is constant up to ``a``, linear between ``a`` and ``b``
    and constant after ``b``. ``a`` is searched in ``[0, a_max]`` and ``b``
    in ``[b_min, len(y) - 1]``.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 2:
        raise ValueError("need at least two samples")
    a_max = n - 2 if a_max is None else min(a_max, n - 2)
    b_min = 1 if b_min is None else max(b_min, 1)
    y = y - y.mean()
    x = np.arange(n, dtype=float)
    Y = np.r_[0.0, np.cumsum(y)]
    XY = np.r_[0.0, np.cumsum(x * y)]
    syy = float(y @ y)
    a = np.arange(a_max + 1, dtype=float)[:, None]
    b = np.arange(b_min, n, dtype=float)[None, :]
    ai, bi = a.astype(int), b.astype(int)
    m = b - a
    valid = m >= 1
    m = np.where(valid, m, 1.0)
    tail = (n - 1) - b
    sz = m * (m + 1) / 2 + tail * m
    szz = m * (m + 1) * (2 * m + 1) / 6 + tail * m * m - sz * sz / n
    szy = (XY[bi + 1] - XY[ai]) - a * (Y[bi + 1] - Y[ai]) + m * (Y[n] - Y[bi + 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(valid & (szz > 0), szy * szy / szz, -np.inf)
    if syy == 0 or not np.isfinite(gain).any():
        a0 = min(a_max, b_min - 1)
        return a0, max(b_min, a0 + 1)
    ia, ib = np.unravel_index(np.argmax(gain), gain.shape)
    return int(ia), int(ib + b_min)


def localize_event_bounds(s: PowerSeries, trigger_span, w: int,
                          cfg: DetectionConfig = DetectionConfig(),
                          anchor: int | None = None, limits=None) -> tuple[int, int]:
    """Start and end samples of the transient behind a run of triggers.

    Starting from ``anchor`` (default: the middle of the run) the search
    walks backwards to the latest sample whose trailing length-``w`` window
    is steady and forwards to the earliest sample whose leading window is
    steady, never further than ``4w`` beyond the trigger run nor outside
    ``limits``. The transient is then pinned inside that bracket by a
    flat/linear/flat least-squares fit.
    """
    p = s.active
    first, last = trigger_span
    lo_lim, hi_lim = limits if limits is not None else (0, len(s) - 1)
    if anchor is None:
        anchor = (first + last) // 2
    anchor = min(max(anchor, lo_lim), hi_lim)

    floor = max(lo_lim, first - 4 * w)
    start = floor
    for i in range(anchor, floor - 1, -1):
        j = i - w + 1
        if j < lo_lim:
            start = lo_lim
            break
        if is_steady(p[i] - p[j], w - 1, cfg):
            start = i
            break

    ceil = min(hi_lim, last + 4 * w)
    end = ceil
    for i in range(anchor, ceil + 1):
        j = i + w - 1
        if j > hi_lim:
            end = hi_lim
            break
        if is_steady(p[j] - p[i], w - 1, cfg):
            end = i
            break

    r_lo = max(lo_lim, start - w + 1)
    r_hi = min(hi_lim, end + w - 1)
    if r_hi - r_lo < 1:
        return int(r_lo), int(min(r_lo + 1, len(s) - 1))
    a, b = _fit_in(p, r_lo, r_hi, anchor)
    # re-fit on a bracket derived from the fit itself so that every window
    # length settles on the same bounds for the same transient
    for _ in range(MAX_REFITS):
        margin = int(np.clip(b - a, REFIT_MARGIN[0], REFIT_MARGIN[1]))
        lo, hi = max(lo_lim, a - margin), min(hi_lim, b + margin)
        nxt = _fit_in(p, lo, hi, (a + b) // 2)
        if nxt == (a, b):
            break
        a, b = nxt
    return int(a), int(b)


MAX_REFITS = 5
REFIT_MARGIN = (10, 60)


def _fit_in(p, lo, hi, anchor):
    anchor = min(max(anchor, lo), hi)
    n = hi - lo
    a, b = hinge_breakpoints(p[lo:hi + 1], a_max=min(max(anchor - lo, 0), n - 1),
                             b_min=min(max(anchor - lo, 1), n))
    return lo + a, lo + b


def detect_long_transients(s: PowerSeries, w: int, exclusions, th: np.ndarray,
                           cfg: DetectionConfig = DetectionConfig()) -> list[Event]:
    p = s.active
    n = p.size
    th = np.asarray(th, dtype=float)
    seg_ids = _segment_ids(n, exclusions)
    signs, shift = trigger_signs(p, w, th, cfg.t_test_alpha, seg_ids)

    sids, first_idx = np.unique(seg_ids, return_index=True)
    _, last_rev = np.unique(seg_ids[::-1], return_index=True)
    seg_lo = dict(zip(sids, first_idx))
    seg_hi = dict(zip(sids, n - 1 - last_rev))

    found = []
    for first, last in _runs(signs):
        anchor = first + int(np.argmax(np.abs(shift[first:last + 1])))
        sid = seg_ids[anchor]
        if sid < 0:
            continue
        lo, hi = localize_event_bounds(s, (first, last), w, cfg, anchor=anchor,
                                       limits=(seg_lo[sid], seg_hi[sid]))
        e = Event(lo, hi, w, Stage.LONG_TRANSIENT)
        if any(events_overlap(e, x) for x in exclusions):
            continue
        if not abs(p[hi] - p[lo]) > th[lo:hi + 1].min():
            continue
        found.append(e)

    found.sort(key=lambda e: (e.start_idx, e.end_idx))
    out = []
    for e in found:
        if out and events_overlap(out[-1], e):
            prev = out[-1]
            if abs(p[e.end_idx] - p[e.start_idx]) > abs(p[prev.end_idx] - p[prev.start_idx]):
                out[-1] = e
            continue
        out.append(e)
    return out
