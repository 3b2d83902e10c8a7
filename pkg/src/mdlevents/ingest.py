"""Readers and writers for power CSVs, label CSVs, event JSON lines and configs."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from .model import DetectionConfig, Event, PowerSeries, Stage, event_features

MAX_FILL_GAP = 5
DIRECTIONS = ("on", "off", "transition")


class ParseError(ValueError):
    """A malformed row in an input file."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


class EmptyInputError(ValueError):
    pass


@dataclass(frozen=True)
class CsvSchema:
    timestamp: str = "timestamp"
    active: str = "active"
    reactive: Optional[str] = None


@dataclass(frozen=True)
class LabelRecord:
    start_epoch: float
    end_epoch: float
    appliance: str = ""
    direction: str = "transition"

    def __post_init__(self):
        if self.end_epoch < self.start_epoch:
            raise ValueError(f"label ends ({self.end_epoch}) before it starts ({self.start_epoch})")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown label direction {self.direction!r}")


def parse_timestamp(text: str) -> float:
    """Epoch seconds (integer or decimal) or an ISO-8601 string; naive times are UTC."""
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        pass
    else:
        if not math.isfinite(value):
            raise ValueError(f"non-finite timestamp {text!r}")
        return value
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = [(reader.line_num, row) for row in reader if row and any(c.strip() for c in row)]
    return header, rows


def load_power_csv(path, schema: CsvSchema = CsvSchema()) -> list[PowerSeries]:
    """Load a power CSV as a list of gapless 1 Hz series.

    Duplicate timestamps keep the last row, sub-second samples are averaged
    into 1 s buckets, gaps of up to five seconds are linearly interpolated
    and longer gaps start a new series.
    """
    header, rows = _read_rows(path)
    cols = [schema.timestamp, schema.active] + ([schema.reactive] if schema.reactive else [])
    missing = [c for c in cols if c not in header]
    if missing:
        raise ParseError(path, 1, f"missing column(s) {missing}")
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    i_ts, i_p = header.index(schema.timestamp), header.index(schema.active)
    i_q = header.index(schema.reactive) if schema.reactive else None

    last = {}
    for line, row in rows:
        try:
            ts = parse_timestamp(row[i_ts])
            p = _parse_float(row[i_p])
            q = _parse_float(row[i_q]) if i_q is not None else 0.0
        except (ValueError, IndexError) as exc:
            raise ParseError(path, line, str(exc)) from None
        last[ts] = (p, q)

    ts = np.array(sorted(last))
    vals = np.array([last[t] for t in ts])
    buckets = np.floor(ts).astype(np.int64)
    secs, inverse = np.unique(buckets, return_inverse=True)
    counts = np.bincount(inverse)
    p = np.bincount(inverse, weights=vals[:, 0]) / counts
    q = np.bincount(inverse, weights=vals[:, 1]) / counts

    out = []
    breaks = np.flatnonzero(np.diff(secs) > MAX_FILL_GAP) + 1
    for lo, hi in zip(np.r_[0, breaks], np.r_[breaks, secs.size]):
        t = secs[lo:hi]
        grid = np.arange(t[0], t[-1] + 1)
        active = np.interp(grid, t, p[lo:hi])
        reactive = np.interp(grid, t, q[lo:hi]) if i_q is not None else None
        out.append(PowerSeries(float(t[0]), active, reactive))
    return out


def write_power_csv(path, s: PowerSeries, schema: CsvSchema = CsvSchema()) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        reactive = s.reactive is not None
        header = [schema.timestamp, schema.active]
        if reactive:
            header.append(schema.reactive or "reactive")
        w.writerow(header)
        for i in range(len(s)):
            row = [_fmt_epoch(s.epoch_of(i)), repr(float(s.active[i]))]
            if reactive:
                row.append(repr(float(s.reactive[i])))
            w.writerow(row)


def _fmt_epoch(t: float):
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def load_labels(path) -> list[LabelRecord]:
    try:
        header, rows = _read_rows(path)
    except EmptyInputError:
        return []
    need = ["start", "end", "appliance", "direction"]
    if any(c not in header for c in need):
        raise ParseError(path, 1, f"label header must contain {need}")
    idx = {c: header.index(c) for c in need}
    labels = []
    for line, row in rows:
        try:
            labels.append(LabelRecord(
                parse_timestamp(row[idx["start"]]),
                parse_timestamp(row[idx["end"]]),
                row[idx["appliance"]].strip(),
                row[idx["direction"]].strip().lower(),
            ))
        except (ValueError, IndexError) as exc:
            raise ParseError(path, line, str(exc)) from None
    return sorted(labels, key=lambda r: (r.start_epoch, r.end_epoch))


def write_labels(path, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start", "end", "appliance", "direction"])
        for r in labels:
            w.writerow([_fmt_epoch(r.start_epoch), _fmt_epoch(r.end_epoch), r.appliance, r.direction])


def labels_to_events(labels, s: PowerSeries) -> list[Event]:
    """Map labels onto sample indices of ``s``; labels outside the series are rejected."""
    events = []
    for r in labels:
        a, b = s.index_of(r.start_epoch), s.index_of(r.end_epoch)
        if a < 0 or b >= len(s):
            raise ValueError(f"label [{r.start_epoch}, {r.end_epoch}] outside the series time range")
        events.append(Event(a, b, 1, Stage.STEP))
    return events


def event_record(e: Event, s: PowerSeries) -> dict:
    f = e.features or event_features(e, s)
    return {
        "start_epoch": _json_epoch(s.epoch_of(e.start_idx)),
        "end_epoch": _json_epoch(s.epoch_of(e.end_idx)),
        "delta_p": f.delta_p,
        "delta_q": f.delta_q,
        "range_p": f.range_p,
        "window_len": e.window_len,
        "stage": e.stage.value,
    }


def _json_epoch(t: float):
    return int(t) if float(t).is_integer() else float(t)


def write_events_jsonl(path, events, s: PowerSeries) -> None:
    with open(path, "w") as fh:
        for e in events:
            fh.write(json.dumps(event_record(e, s)) + "\n")


def read_events_jsonl(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rec["start_epoch"] = float(rec["start_epoch"])
                rec["end_epoch"] = float(rec["end_epoch"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(path, line_no, str(exc)) from None
            records.append(rec)
    return records


def records_to_events(records, s: PowerSeries) -> list[Event]:
    events = []
    for rec in records:
        a, b = s.index_of(rec["start_epoch"]), s.index_of(rec["end_epoch"])
        if a < 0 or b >= len(s):
            raise ValueError(f"event [{rec['start_epoch']}, {rec['end_epoch']}] outside the series")
        events.append(Event(a, b, int(rec.get("window_len", 1)),
                            Stage(rec.get("stage", Stage.STEP.value))))
    return events


def load_config(path) -> DetectionConfig:
    """Read a flat TOML key/value file whose keys are DetectionConfig fields."""
    import tomli

    with open(path, "rb") as fh:
        data = tomli.load(fh)
    known = {f.name for f in fields(DetectionConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(unknown)}")
    if "window_set" in data:
        data["window_set"] = tuple(data["window_set"])
    return DetectionConfig(**data)


