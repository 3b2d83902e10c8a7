"""Command line entry point: ``mdlevents detect|eval|synth``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import ingest
from .evaluate import combine_reports
from .model import DetectionConfig
from .pipeline import mining_debug, run_detect, run_eval
from .synth import ApplianceSpec, SynthSpec, archetype_corpus, synth_generate

LOG_ENV = "MDLEVENTS_LOG_LEVEL"
log = logging.getLogger("mdlevents")


def _config(path) -> DetectionConfig:
    return ingest.load_config(path) if path else DetectionConfig()


def _schema(args) -> ingest.CsvSchema:
    return ingest.CsvSchema(args.timestamp_col, args.active_col, args.reactive_col)


def _spans(events, s):
    return [[s.epoch_of(e.start_idx), s.epoch_of(e.end_idx)] for e in events]


def _debug_entry(result) -> dict:
    s = result.series
    return {
        "start_epoch": s.start_epoch,
        "length": len(s),
        "step_events": _spans(result.step_events, s),
        "candidates": {str(w): _spans(ev, s) for w, ev in result.candidates.items()},
        "screened_out": _spans(result.screened_out, s),
        "fluctuations": [[s.epoch_of(f.orig_start), s.epoch_of(f.orig_end)] for f in result.fluctuations],
        "post_removed": _spans(result.post_removed, s),
        "mdl_areas": [area for outcome in result.mining for area in mining_debug(outcome, s)],
        "final": [dict(ingest.event_record(e, s), motif=e.motif_id) for e in result.events],
    }


def cmd_detect(args) -> int:
    cfg = _config(args.config)
    series = ingest.load_power_csv(args.input, _schema(args))
    labels = ingest.load_labels(args.labels) if args.labels else None
    results, reports = [], []
    for s in series:
        mine = None
        if labels is not None:
            lo, hi = s.start_epoch, s.epoch_of(len(s) - 1)
            mine = [r for r in labels if lo <= r.start_epoch and r.end_epoch <= hi]
        res = run_detect(s, cfg, mine, postprocess=not args.no_post)
        results.append(res)
        if res.report is not None:
            reports.append(res.report)
        log.info("series at %s: %d events", s.start_epoch, len(res.events))
    with open(args.out, "w") as fh:
        for res in results:
            for e in res.events:
                fh.write(json.dumps(ingest.event_record(e, res.series)) + "\n")
    if args.dump_debug:
        with open(args.dump_debug, "w") as fh:
            json.dump([_debug_entry(r) for r in results], fh)
    if labels is not None:
        report = combine_reports(reports)
        n_in = report["n_t"]
        if n_in != len(labels):
            raise ValueError(f"{len(labels) - n_in} label(s) fall outside the series time range")
        json.dump(report, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def cmd_eval(args) -> int:
    report = run_eval(args.events, args.labels, args.series, _config(args.config), _schema(args))
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def load_synth_spec(path) -> SynthSpec:
    import tomli

    with open(path, "rb") as fh:
        data = tomli.load(fh)
    corpus = data.pop("corpus", None)
    if corpus is not None:
        return archetype_corpus(**corpus)
    apps = tuple(ApplianceSpec(**a) for a in data.pop("appliances", []))
    return SynthSpec(appliances=apps, **data)


def cmd_synth(args) -> int:
    spec = load_synth_spec(args.spec)
    s, labels = synth_generate(spec)
    ingest.write_power_csv(f"{args.out_prefix}.csv", s)
    ingest.write_labels(f"{args.out_prefix}.labels.csv", labels)
    log.info("wrote %d samples and %d labels", len(s), len(labels))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdlevents", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def csv_opts(p):
        p.add_argument("--timestamp-col", default="timestamp")
        p.add_argument("--active-col", default="active")
        p.add_argument("--reactive-col", default=None)

    p = sub.add_parser("detect", help="detect load events in a power CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--config", help="flat TOML file of DetectionConfig fields")
    p.add_argument("--out", required=True, help="events JSON-lines output")
    p.add_argument("--labels", help="ground-truth label CSV; prints an evaluation report")
    p.add_argument("--no-post", action="store_true", help="skip fluctuation post-processing")
    p.add_argument("--dump-debug", metavar="PATH", help="write per-stage plot-ready JSON")
    csv_opts(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detected events against labels")
    p.add_argument("--events", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--series", required=True)
    p.add_argument("--config")
    p.add_argument("--out")
    csv_opts(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a labelled synthetic power series")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
