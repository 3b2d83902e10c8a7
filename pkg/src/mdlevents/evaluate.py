"""Overlap-based scoring of detected events against ground truth."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DetectionConfig, Event, PowerSeries


def total_variation(p: np.ndarray, start: int, end: int) -> float:
    """Sum of |first differences| of ``p`` over the inclusive span ``[start, end]``."""
    if end <= start:
        return 0.0
    return float(np.abs(np.diff(p[start:end + 1])).sum())


def overlap_coefficient(det: Event, gt: Event, s: PowerSeries) -> float:
    """Share of transient variation common to a detected and a true event.

    Spans without any variation count as a perfect match only when they
    are identical.
    """
    p = s.active
    lo, hi = max(det.start_idx, gt.start_idx), min(det.end_idx, gt.end_idx)
    if lo > hi:
        return 0.0
    denom = max(total_variation(p, det.start_idx, det.end_idx),
                total_variation(p, gt.start_idx, gt.end_idx))
    if denom == 0:
        return 1.0 if (det.start_idx, det.end_idx) == (gt.start_idx, gt.end_idx) else 0.0
    return total_variation(p, lo, hi) / denom


@dataclass
class OvlMatrix:
    raw: np.ndarray
    values: np.ndarray

    @property
    def n_d(self) -> int:
        return self.raw.shape[0]

    @property
    def n_t(self) -> int:
        return self.raw.shape[1]


def modify_matrix(raw: np.ndarray, rho: float = 0.8, penalty: float = 0.1) -> np.ndarray:
    """Apply the match (> rho -> 1) and split-penalty rules to a raw overlap matrix.

    Both rules read the raw matrix; the penalty hits nonzero entries whose
    row and column together hold more than two nonzeros. Results are
    clamped at zero.
    """
    raw = np.asarray(raw, dtype=float)
    nz = raw != 0
    crowded = nz.sum(axis=1)[:, None] + nz.sum(axis=0)[None, :] > 2
    out = np.where(raw > rho, 1.0, raw)
    out = np.where(nz & crowded, out - penalty, out)
    return np.maximum(out, 0.0)


def build_match_matrix(dets, gts, s: PowerSeries, cfg: DetectionConfig = DetectionConfig()) -> OvlMatrix:
    dets, gts = list(dets), list(gts)
    raw = np.zeros((len(dets), len(gts)))
    order = sorted(range(len(gts)), key=lambda j: gts[j].start_idx)
    starts = np.array([gts[j].start_idx for j in order])
    longest = max((g.span for g in gts), default=0)
    for i, d in enumerate(dets):
        # only true events starting in [d.start - longest, d.end] can overlap d
        lo = np.searchsorted(starts, d.start_idx - longest, side="left")
        hi = np.searchsorted(starts, d.end_idx, side="right")
        for k in range(lo, hi):
            j = order[k]
            raw[i, j] = overlap_coefficient(d, gts[j], s)
    return OvlMatrix(raw, modify_matrix(raw, cfg.rho, cfg.penalty))


def prf_scores(m: OvlMatrix) -> tuple[float, float, float]:
    """Precision, recall and modified F1 from the adjusted overlap matrix."""
    if m.n_d == 0 or m.n_t == 0:
        return 0.0, 0.0, 0.0
    tp = float(m.values.sum())
    pr, re = tp / m.n_d, tp / m.n_t
    f1 = 0.0 if pr + re == 0 else 2 * pr * re / (pr + re)
    return pr, re, f1


def evaluation_report(dets, gts, s: PowerSeries, cfg: DetectionConfig = DetectionConfig()) -> dict:
    m = build_match_matrix(dets, gts, s, cfg)
    pr, re, f1 = prf_scores(m)
    return _report(m, pr, re, f1)


def _report(m: OvlMatrix, pr, re, f1) -> dict:
    rows = []
    for i in range(m.n_d):
        js = np.flatnonzero(m.raw[i])
        rows.append({"det": i, "matches": [
            {"gt": int(j), "overlap": float(m.raw[i, j]), "score": float(m.values[i, j])} for j in js]})
    return {"n_d": m.n_d, "n_t": m.n_t, "TP": float(m.values.sum()),
            "Pr": pr, "Re": re, "F1_mod": f1, "rows": rows}


def combine_reports(reports: list[dict]) -> dict:
    """Pool reports from independent series (no cross-series overlap exists)."""
    n_d = sum(r["n_d"] for r in reports)
    n_t = sum(r["n_t"] for r in reports)
    tp = sum(r["TP"] for r in reports)
    pr = tp / n_d if n_d and n_t else 0.0
    re = tp / n_t if n_d and n_t else 0.0
    f1 = 2 * pr * re / (pr + re) if pr + re > 0 else 0.0
    rows, d_off, t_off = [], 0, 0
    for r in reports:
        for row in r["rows"]:
            rows.append({"det": row["det"] + d_off, "matches": [
                dict(m, gt=m["gt"] + t_off) for m in row["matches"]]})
        d_off += r["n_d"]
        t_off += r["n_t"]
    return {"n_d": n_d, "n_t": n_t, "TP": tp, "Pr": pr, "Re": re, "F1_mod": f1, "rows": rows}
