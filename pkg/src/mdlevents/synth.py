"""Seeded synthetic aggregate-power days with exact ground-truth labels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ingest import LabelRecord
from .model import PowerSeries

KINDS = ("step", "multi_step", "ramp", "fluctuating")


@dataclass(frozen=True)
class ApplianceSpec:
    """One appliance and its usage schedule.

    ``schedule`` holds ``(on_time, on_duration)`` pairs in seconds from the
    start of the series. ``transient`` is the ramp length of ``ramp`` loads
    and of every sub-step of ``multi_step`` loads; ``stages`` and ``hold``
    shape the staircase. ``fluctuating`` loads wander as an AR(1) process
    with stationary spread ``fluct_std`` while on; with ``power == 0`` they
    model pure fluctuation and produce no labels.
    """

    name: str
    kind: str
    power: float
    schedule: tuple = ()
    transient: int = 0
    stages: int = 1
    hold: int = 0
    fluct_std: float = 0.0
    fluct_ar: float = 0.7

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown appliance kind {self.kind!r}")
        object.__setattr__(self, "schedule", tuple((int(a), int(b)) for a, b in self.schedule))

    @property
    def on_length(self) -> int:
        """Seconds from switch-on until the on-transition completes."""
        if self.kind == "ramp":
            return self.transient
        if self.kind == "multi_step":
            return self.stages * self.transient + (self.stages - 1) * self.hold
        return 0


@dataclass(frozen=True)
class SynthSpec:
    duration: int
    seed: int = 0
    noise: float = 1.0
    base_load: float = 100.0
    start_epoch: float = 0.0
    appliances: tuple = field(default_factory=tuple)

    def __post_init__(self):
        apps = tuple(a if isinstance(a, ApplianceSpec) else ApplianceSpec(**a) for a in self.appliances)
        object.__setattr__(self, "appliances", apps)
        if self.duration < 2:
            raise ValueError("duration must be at least two seconds")
        for a in apps:
            for on, dur in a.schedule:
                if on < 1 or dur <= a.on_length or on + dur >= self.duration:
                    raise ValueError(f"{a.name}: usage ({on}, {dur}) does not fit the series")


def _on_profile(a: ApplianceSpec, dur: int) -> np.ndarray:
    """Power drawn at offsets ``0..dur-1`` from switch-on (sample 0 is still off)."""
    k = np.arange(dur, dtype=float)
    if a.kind == "ramp":
        return a.power * np.clip(k / a.transient, 0.0, 1.0) if a.transient else np.where(k > 0, a.power, 0.0)
    if a.kind == "multi_step":
        level = a.power / a.stages
        out = np.zeros(dur)
        for j in range(a.stages):
            t0 = j * (a.transient + a.hold)
            out += level * np.clip((k - t0) / max(a.transient, 1), 0.0, 1.0)
        return out
    return np.where(k > 0, a.power, 0.0)


def synth_generate(spec: SynthSpec) -> tuple[PowerSeries, list[LabelRecord]]:
    """Superpose every scheduled appliance on a base load plus Gaussian noise.

    Labels follow the sample conventions of the detectors: an instant edge at
    ``t`` spans ``[t - 1, t]`` and a ramp switched on at ``t`` spans
    ``[t, t + on_length]``.
    """
    rng = np.random.default_rng(spec.seed)
    p = np.full(spec.duration, float(spec.base_load))
    labels = []
    for a in spec.appliances:
        for on, dur in a.schedule:
            off = on + dur
            if a.kind in ("ramp", "multi_step"):
                p[on:off] += _on_profile(a, dur)
                on_span = (on, on + a.on_length)
            else:
                p[on:off] += a.power
                on_span = (on - 1, on)
            if a.kind == "fluctuating":
                x = np.empty(max(dur - 2, 0))
                innov = a.fluct_std * np.sqrt(1 - a.fluct_ar ** 2)
                state = 0.0
                for i in range(x.size):
                    state = a.fluct_ar * state + rng.normal(0.0, innov)
                    x[i] = state
                p[on + 1:off - 1] += x
            if a.power != 0:
                labels.append(LabelRecord(spec.start_epoch + on_span[0], spec.start_epoch + on_span[1], a.name, "on"))
                labels.append(LabelRecord(spec.start_epoch + off - 1, spec.start_epoch + off, a.name, "off"))
    if spec.noise > 0:
        p += rng.normal(0.0, spec.noise, p.size)
    labels.sort(key=lambda r: (r.start_epoch, r.end_epoch))
    return PowerSeries(float(spec.start_epoch), p), labels


# --------------------------------------------------------------------------- corpora

ARCHETYPES = (
    # name, kind, power, uses/day, (min, max) on-duration, extra fields
    ("kettle", "step", 1800.0, 4, (120, 240), {}),
    ("fridge", "step", 150.0, 8, (600, 900), {}),
    ("heater", "ramp", 150.0, 4, (600, 1200), {"transient": 30}),
    ("pump", "ramp", 240.0, 4, (600, 1200), {"transient": 60}),
    ("ac", "ramp", 450.0, 3, (1800, 3600), {"transient": 300}),
    ("ac_stage", "multi_step", 360.0, 4, (600, 1200), {"transient": 15, "stages": 3, "hold": 5}),
    ("laptop", "fluctuating", 80.0, 2, (1200, 2400), {"fluct_std": 8.0, "fluct_ar": 0.7}),
)
PAIR = (("lamp", 500.0), ("tv", 300.0))
PAIR_GAP = 3


def _transitions(a: ApplianceSpec, on: int, dur: int) -> list[tuple[int, int]]:
    spans = [(on - 1, on + a.on_length), (on + dur - 1, on + dur)]
    if a.kind == "fluctuating":
        spans.append((on - 1, on + dur))
    return spans


def archetype_corpus(days: int = 4, seed: int = 0, noise: float = 1.0,
                     min_sep: int = 400, start_epoch: float = 0.0,
                     archetypes=ARCHETYPES, pairs_per_day: int = 3) -> SynthSpec:
    """A multi-day corpus mixing steps, near-simultaneous step pairs, ramps,
    staircases and a fluctuating load, scheduled so that no two transitions
    (or a transition and a fluctuating session) come within ``min_sep``
    seconds of each other."""
    rng = np.random.default_rng(seed)
    day = 86400
    busy: list[tuple[int, int]] = []
    schedules: dict[str, list] = {}

    def free(lo, hi):
        return all(hi + min_sep <= a or lo - min_sep >= b for a, b in busy)

    jobs = []
    for name, kind, power, per_day, (dmin, dmax), extra in archetypes:
        for d in range(days):
            jobs += [(d, name, kind, power, dmin, dmax, extra)] * per_day
    for d in range(days):
        jobs += [(d, "pair", None, None, 600, 1200, {})] * pairs_per_day
    # place long sessions first so rejection sampling stays cheap
    jobs.sort(key=lambda j: (j[1] != "laptop", -j[5]))

    specs = {name: ApplianceSpec(name, kind, power, (), **extra)
             for name, kind, power, _, _, extra in archetypes}
    for d, name, kind, power, dmin, dmax, extra in jobs:
        for _ in range(10000):
            dur = int(rng.integers(dmin, dmax + 1))
            on = d * day + int(rng.integers(min_sep, day - dur - min_sep))
            if name == "pair":
                dur2 = int(rng.integers(dmin, dmax + 1))
                spans = [(on - 1, on), (on + PAIR_GAP - 1, on + PAIR_GAP),
                         (on + dur - 1, on + dur), (on + PAIR_GAP + dur2 - 1, on + PAIR_GAP + dur2)]
                if all(free(a, b) for a, b in spans):
                    lo_name, hi_name = PAIR[0][0], PAIR[1][0]
                    schedules.setdefault(lo_name, []).append((on, dur))
                    schedules.setdefault(hi_name, []).append((on + PAIR_GAP, dur2))
                    busy += [(on - 1, on + PAIR_GAP), spans[2], spans[3]]
                    break
                continue
            spans = _transitions(specs[name], on, dur)
            if all(free(a, b) for a, b in spans):
                schedules.setdefault(name, []).append((on, dur))
                busy += spans
                break
        else:
            raise RuntimeError(f"could not schedule {name} on day {d}")

    apps = [ApplianceSpec(a.name, a.kind, a.power, tuple(sorted(schedules.get(a.name, ()))),
                          a.transient, a.stages, a.hold, a.fluct_std, a.fluct_ar)
            for a in specs.values()]
    apps += [ApplianceSpec(n, "step", pw, tuple(sorted(schedules.get(n, ())))) for n, pw in PAIR]
    return SynthSpec(duration=days * day, seed=seed, noise=noise, start_epoch=start_epoch,
                     appliances=tuple(apps))
