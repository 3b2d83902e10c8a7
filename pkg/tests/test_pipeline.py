import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import series
from mdlevents import ingest
from mdlevents.evaluate import evaluation_report
from mdlevents.model import DetectionConfig, Event, Stage
from mdlevents.pipeline import mine_events, mining_debug, run_detect, run_eval
from mdlevents.synth import ApplianceSpec, SynthSpec, synth_generate


def spans(events):
    return [(e.start_idx, e.end_idx) for e in events]


def test_pure_step_day_equals_stage_one():
    apps = (ApplianceSpec("kettle", "step", 1800.0, ((1000, 200), (9000, 150), (30000, 240))),
            ApplianceSpec("fridge", "step", 150.0, ((4000, 800), (20000, 700), (60000, 900))))
    s, labels = synth_generate(SynthSpec(86400, seed=2, appliances=apps))
    res = run_detect(s, labels=labels)
    assert spans(res.events) == spans(res.step_events)
    assert all(e.stage is Stage.STEP for e in res.events)
    assert res.report["F1_mod"] == 1


def test_repeated_ramp_day():
    ons = tuple((5000 + 15000 * k, 3000) for k in range(5))
    s, labels = synth_generate(SynthSpec(86400, seed=4, appliances=(
        ApplianceSpec("ac", "ramp", 300.0, ons, transient=60),)))
    res = run_detect(s)
    clean = synth_generate(SynthSpec(86400, seed=4, noise=0.0, appliances=(
        ApplianceSpec("ac", "ramp", 300.0, ons, transient=60),)))[0].active
    for on, _ in ons:
        hits = [e for e in res.events if e.start_idx <= on + 60 and e.end_idx >= on]
        assert len(hits) == 1
        e = hits[0]
        lo, hi = max(on, e.start_idx), min(on + 60, e.end_idx)
        mass = oracles.total_variation(list(clean), lo, hi) / oracles.total_variation(list(clean), on, on + 60)
        assert mass >= 0.9


def test_fluctuation_span_emits_nothing():
    spans_ = ((5000, 1800), (20000, 2400))
    a = ApplianceSpec("laptop", "fluctuating", 0.0, spans_, fluct_std=8.0)
    s, _ = synth_generate(SynthSpec(30000, seed=0, appliances=(a,)))
    res = run_detect(s)
    for on, dur in spans_:
        assert not [e for e in res.events if e.end_idx >= on and e.start_idx <= on + dur]
    assert res.fluctuations


def test_debug_dump_lists_areas():
    # five staircases: each offers its full 41-sample rise and its first half as competitors
    p = np.full(6000, 100.0)
    pool = []
    for k in range(5):
        base = 500 + 1000 * k
        p[base:base + 41] += np.linspace(0, 400, 41)
        p[base + 41:base + 600] += 400
        pool += [Event(base, base + 40, 30, Stage.LONG_TRANSIENT), Event(base, base + 20, 5, Stage.LONG_TRANSIENT)]
    s = series(p)
    outcome = mine_events(pool, s)
    assert len(outcome.motifs) == 2 and len(outcome.areas) == 5
    dump = mining_debug(outcome, s)
    assert len(dump) == 5
    for area in dump:
        assert area["raw_len"] == 41 and area["winner"] is not None
        assert sorted(len(g["motifs"]) for g in area["groups"]) == [1, 1]
        for g in area["groups"]:
            assert g["dl_group"] > 0 and g["dl_area_given_group"] >= 0
    # the full rise explains each area at lower cost than its half
    assert all(e.n_samples == 41 for e in outcome.events)


def write_inputs(tmp_path, s, labels, events=None):
    series_path, labels_path, events_path = tmp_path / "x.csv", tmp_path / "y.csv", tmp_path / "e.jsonl"
    ingest.write_power_csv(series_path, s)
    ingest.write_labels(labels_path, labels)
    ingest.write_events_jsonl(events_path, events if events is not None else [], s)
    return events_path, labels_path, series_path


def small_day(seed=0):
    return synth_generate(SynthSpec(3000, seed=seed, appliances=(
        ApplianceSpec("k", "step", 900.0, ((300, 400),)),
        ApplianceSpec("h", "ramp", 200.0, ((1200, 500),), transient=40))))


def test_eval_identical_detections(tmp_path):
    s, labels = small_day()
    events = ingest.labels_to_events(labels, s)
    rep = run_eval(*write_inputs(tmp_path, s, labels, events))
    assert rep["F1_mod"] == 1 and rep["n_d"] == rep["n_t"] == 4


def test_eval_empty_detections(tmp_path):
    s, labels = small_day()
    rep = run_eval(*write_inputs(tmp_path, s, labels, []))
    assert rep["F1_mod"] == 0 and rep["n_d"] == 0


def test_eval_smoke_fields_finite(tmp_path):
    s, labels = small_day(3)
    res = run_detect(s)
    rep = run_eval(*write_inputs(tmp_path, s, labels, res.events))
    for key in ("n_d", "n_t", "TP", "Pr", "Re", "F1_mod"):
        assert np.isfinite(rep[key])
    assert rep["F1_mod"] > 0.9


def test_eval_rejects_labels_outside_series(tmp_path):
    s, labels = small_day()
    labels = labels + [ingest.LabelRecord(5000, 5001, "ghost", "on")]
    with pytest.raises(ValueError):
        run_eval(*write_inputs(tmp_path, s, labels, []))


@given(st.integers(0, 2 ** 31 - 1))
def test_end_to_end_deterministic(seed):
    r = np.random.default_rng(seed)
    apps = (ApplianceSpec("k", "step", float(r.uniform(100, 2000)), ((int(r.integers(100, 600)), 300),)),
            ApplianceSpec("h", "ramp", float(r.uniform(100, 500)), ((int(r.integers(1100, 1500)), 600),),
                          transient=int(r.integers(10, 90))),
            ApplianceSpec("l", "fluctuating", 0.0, ((2300, 500),), fluct_std=float(r.uniform(0, 10))))
    spec = SynthSpec(3000, seed=seed, noise=float(r.uniform(0.2, 3)), appliances=apps)

    def once():
        s, _ = synth_generate(spec)
        out = io.StringIO()
        for e in run_detect(s).events:
            out.write(json.dumps(ingest.event_record(e, s)) + "\n")
        return out.getvalue()

    assert once() == once()
