"""End-to-end detection: steps, multi-window long transients, trend screening,
multi-day motif mining with MDL selection, and fluctuation post-processing."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ingest
from .evaluate import combine_reports, evaluation_report
from .model import DetectionConfig, Event, PowerSeries, Stage, events_overlap, sort_events
from .motif import (Resolution, cluster_events, dedupe_cluster, dl_areas_given_group, dl_group,
                    enumerate_motif_groups, find_overlap_areas, form_motifs, resolve_competitions)
from .postprocess import build_steady_diff, detect_fluctuation_segments, remove_unreasonable, vad_windows
from .stage1 import adaptive_threshold, detect_step_events
from .stage2 import detect_long_transients
from .trend import screen_events

log = logging.getLogger(__name__)


@dataclass
class MiningOutcome:
    events: list
    anchors: dict
    motifs: list
    resolution: Resolution
    areas: list
    groups: list


@dataclass
class DetectionResult:
    series: PowerSeries
    events: list
    threshold: np.ndarray
    step_events: list = field(default_factory=list)
    candidates: dict = field(default_factory=dict)      # window length -> events kept by trend screening
    screened_out: list = field(default_factory=list)
    post_removed: list = field(default_factory=list)
    fluctuations: list = field(default_factory=list)
    mining: list = field(default_factory=list)          # per-day MiningOutcome
    report: Optional[dict] = None


def mine_events(pool: list[Event], s: PowerSeries, cfg: DetectionConfig = DetectionConfig(),
                motif_offset: int = 0) -> MiningOutcome:
    """Cluster candidates into motifs and keep one explanation per overlapping area."""
    pool = [e if e.features is not None else e.with_features(s) for e in pool]
    clusters = [[pool[i] for i in idx] for idx in cluster_events([e.features for e in pool], cfg.bandwidth,
                                                                    cfg.feature_scale_floor)]
    deduped = [dedupe_cluster(c)[0] for c in clusters]
    deduped.sort(key=lambda c: min((e.start_idx, e.end_idx, e.window_len) for e in c))
    motifs = form_motifs(deduped, cfg.n_th, first_id=motif_offset)
    motif_of = {e: m.id for m in motifs for e in m.member_events}
    omega = [e.with_motif(motif_of.get(e)) for c in deduped for e in c]
    areas, free = find_overlap_areas(omega)
    groups = enumerate_motif_groups(areas, motifs)
    res = resolve_competitions(areas, groups, free)
    anchors = {e: (areas[res.area_of[e]].start_idx if e in res.area_of else e.start_idx)
               for e in res.events}
    return MiningOutcome(res.events, anchors, motifs, res, areas, groups)


def _day_of(s: PowerSeries, idx, cfg: DetectionConfig):
    return np.floor((s.start_epoch + np.asarray(idx)) / cfg.day_length).astype(np.int64)


def run_detect(s: PowerSeries, cfg: DetectionConfig = DetectionConfig(), labels=None,
               postprocess: bool = True) -> DetectionResult:
    th = adaptive_threshold(s, cfg)
    steps = detect_step_events(s, th)
    result = DetectionResult(s, [], th, step_events=steps)

    long_events = []
    for w in cfg.window_set:
        found = detect_long_transients(s, w, steps, th, cfg)
        kept, removed = screen_events(found, s, cfg)
        result.candidates[w] = kept
        result.screened_out += removed
        long_events += kept
        log.debug("w=%d: %d candidates, %d screened out", w, len(kept), len(removed))

    # steps that overlap a long-transient candidate compete as window-1 candidates
    long_sorted = sort_events(long_events)
    starts = np.array([e.start_idx for e in long_sorted], dtype=int)
    ends_max = np.maximum.accumulate(np.array([e.end_idx for e in long_sorted], dtype=int)) \
        if long_sorted else np.zeros(0, dtype=int)
    bypass, pooled_steps = [], []
    for e in steps:
        k = np.searchsorted(starts, e.end_idx, side="right")
        hit = k > 0 and ends_max[k - 1] >= e.start_idx
        (pooled_steps if hit else bypass).append(e)

    pool = [e.with_features(s) for e in long_events + pooled_steps]
    final: list[Event] = []
    if pool:
        days = _day_of(s, [e.start_idx for e in pool], cfg)
        motif_offset = 0
        for d in np.unique(days):
            buf = [e for e, de in zip(pool, days) if d - cfg.n_days < de <= d]
            outcome = mine_events(buf, s, cfg, motif_offset)
            motif_offset += len(outcome.motifs)
            result.mining.append(outcome)
            for e in outcome.events:
                if _day_of(s, outcome.anchors[e], cfg) == d:
                    final.append(e)
    final = _drop_overlaps(sort_events(final))
    final = sort_events(final + [e.with_features(s) for e in bypass])

    if postprocess:
        sd = build_steady_diff(s, final)
        windows = vad_windows(sd, s, cfg)
        result.fluctuations = detect_fluctuation_segments(sd, s, cfg, windows)
        final, result.post_removed = remove_unreasonable(final, s, th, cfg, windows, result.fluctuations)

    result.events = final
    if labels is not None:
        gts = ingest.labels_to_events(labels, s)
        result.report = evaluation_report(final, gts, s, cfg)
    return result


def _drop_overlaps(events: list[Event]) -> list[Event]:
    out: list[Event] = []
    for e in events:
        if out and events_overlap(out[-1], e):
            continue
        out.append(e)
    return out


def mining_debug(outcome: MiningOutcome, s: PowerSeries) -> list[dict]:
    """Per-area candidate groups with both description-length terms."""
    dump = []
    for i, area in enumerate(outcome.areas):
        cands = []
        for g in outcome.groups:
            if i in g.area_ids:
                cands.append({"motifs": list(g.key), "occurrences": g.occurrences,
                              "dl_group": dl_group(g), "dl_area_given_group": dl_areas_given_group([area], g)})
        winner = outcome.resolution.winners.get(i)
        dump.append({
            "start_epoch": s.epoch_of(area.start_idx), "end_epoch": s.epoch_of(area.end_idx),
            "raw_len": area.raw_len, "n_events": len(area.events),
            "groups": cands, "winner": list(winner.key) if winner else None,
        })
    return dump


def run_eval(events_path, labels_path, series_path, cfg: DetectionConfig = DetectionConfig(),
             schema: ingest.CsvSchema = ingest.CsvSchema()) -> dict:
    """Score an events file against a labels file over the given power series."""
    series = ingest.load_power_csv(series_path, schema)
    labels = ingest.load_labels(labels_path)
    records = ingest.read_events_jsonl(events_path)
    reports = []
    lab_left, rec_left = list(labels), list(records)
    for s in series:
        lo, hi = s.start_epoch, s.epoch_of(len(s) - 1)
        mine_l = [r for r in lab_left if lo <= r.start_epoch and r.end_epoch <= hi]
        mine_r = [r for r in rec_left if lo <= r["start_epoch"] and r["end_epoch"] <= hi]
        lab_left = [r for r in lab_left if r not in mine_l]
        rec_left = [r for r in rec_left if r not in mine_r]
        reports.append(evaluation_report(ingest.records_to_events(mine_r, s),
                                         ingest.labels_to_events(mine_l, s), s, cfg))
    if lab_left:
        r = lab_left[0]
        raise ValueError(f"label [{r.start_epoch}, {r.end_epoch}] lies outside the series time range")
    if rec_left:
        r = rec_left[0]
        raise ValueError(f"event [{r['start_epoch']}, {r['end_epoch']}] lies outside the series time range")
    return combine_reports(reports)
