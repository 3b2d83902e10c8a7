"""Motif discovery over candidate events and MDL selection between competing motif groups.

Description lengths are measured in samples: an event costs its sample
count, a motif costs the mean length of its members, and every motif
occurrence that replaces raw samples inside an overlapping area costs one
symbol.
"""
from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

from .model import Event, EventFeatures, events_overlap

log = logging.getLogger(__name__)

MAX_MOTIFS_PER_AREA = 20


class CapacityError(RuntimeError):
    pass


# --------------------------------------------------------------------------- clustering

def standardize(x: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Per-column z-scores; scales below ``floor`` are raised to it.

    The floor keeps a homogeneous population (one appliance, spread of a
    few watts) from being blown up into noise-sized clusters.
    """
    x = np.asarray(x, dtype=float)
    mu = x.mean(axis=0)
    sd = np.maximum(x.std(axis=0), floor)
    safe = np.where(sd > 0, sd, 1.0)
    return np.where(sd > 0, (x - mu) / safe, 0.0)


def _sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def mean_shift(x: np.ndarray, bandwidth: float, tol: float = 1e-7, max_iter: int = 500) -> np.ndarray:
    """Flat-kernel mean shift; returns an integer cluster label per row of ``x``.

    Every point climbs to the mean of the samples within ``bandwidth`` of its
    current position until it stops moving. Modes closer than ``bandwidth``
    are merged, strongest (most supported) first, and labels are numbered
    in order of first appearance.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n == 0:
        return np.zeros(0, dtype=int)
    y = x.copy()
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        within = _sq_dist(y[idx], x) <= bandwidth ** 2
        counts = within.sum(axis=1)
        moved = (within.astype(float) @ x) / np.maximum(counts, 1)[:, None]
        moved[counts == 0] = y[idx[counts == 0]]
        step = np.linalg.norm(moved - y[idx], axis=1)
        y[idx] = moved
        active[idx[step <= tol]] = False

    support = (_sq_dist(y, x) <= bandwidth ** 2).sum(axis=1)
    order = np.lexsort((np.arange(n), -support))
    centers: list[np.ndarray] = []
    center_of = np.empty(n, dtype=int)
    for i in order:
        for c, mode in enumerate(centers):
            if np.linalg.norm(y[i] - mode) < bandwidth:
                center_of[i] = c
                break
        else:
            centers.append(y[i])
            center_of[i] = len(centers) - 1
    relabel: dict[int, int] = {}
    labels = np.empty(n, dtype=int)
    for i in range(n):
        labels[i] = relabel.setdefault(center_of[i], len(relabel))
    return labels


def cluster_events(features: list[EventFeatures], bandwidth: float = 0.8,
                   scale_floor: float = 0.0) -> list[list[int]]:
    """Partition event indices by mean shift over z-scored (dP, dQ, range) features."""
    if not features:
        return []
    z = standardize(np.array([f.as_vector() for f in features]), scale_floor)
    labels = mean_shift(z, bandwidth)
    clusters: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        clusters.setdefault(int(lab), []).append(i)
    return list(clusters.values())


def _overlap_components(events: list[Event]) -> list[list[Event]]:
    """Connected components of the time-overlap graph, in time order."""
    comps: list[list[Event]] = []
    reach = -1
    for e in sorted(events, key=lambda e: (e.start_idx, e.end_idx, e.window_len)):
        if comps and e.start_idx <= reach:
            comps[-1].append(e)
            reach = max(reach, e.end_idx)
        else:
            comps.append([e])
            reach = e.end_idx
    return comps


def dedupe_cluster(cluster: list[Event]) -> tuple[list[Event], list[Event]]:
    """Keep the shortest event of every overlapping set inside one cluster.

    Ties go to the smaller window length, then the earlier start. Returns
    ``(kept, removed)``.
    """
    kept, removed = [], []
    for comp in _overlap_components(cluster):
        best = min(comp, key=lambda e: (e.span, e.window_len, e.start_idx))
        kept.append(best)
        removed.extend(e for e in comp if e is not best)
    return kept, removed


# --------------------------------------------------------------------------- motifs and areas

@dataclass(frozen=True)
class Motif:
    id: int
    member_events: tuple

    @property
    def n_motif(self) -> int:
        return len(self.member_events)

    @property
    def mean_length(self) -> float:
        return sum(e.n_samples for e in self.member_events) / self.n_motif


def form_motifs(clusters: list[list[Event]], n_th: int = 3, first_id: int = 0) -> list[Motif]:
    """Clusters with strictly more than ``n_th`` members become motifs."""
    motifs = []
    for members in clusters:
        if len(members) > n_th:
            mid = first_id + len(motifs)
            tagged = tuple(e.with_motif(mid) for e in
                           sorted(members, key=lambda e: (e.start_idx, e.end_idx, e.window_len)))
            motifs.append(Motif(mid, tagged))
    return motifs


@dataclass(frozen=True)
class OverlapArea:
    start_idx: int
    end_idx: int
    events: tuple

    @property
    def raw_len(self) -> int:
        return self.end_idx - self.start_idx + 1


def find_overlap_areas(events: list[Event]) -> tuple[list[OverlapArea], list[Event]]:
    """Group events into overlapping areas; isolated events are returned as free."""
    areas, free = [], []
    for comp in _overlap_components(events):
        if len(comp) == 1:
            free.append(comp[0])
        else:
            areas.append(OverlapArea(min(e.start_idx for e in comp),
                                     max(e.end_idx for e in comp), tuple(comp)))
    return areas, free


@dataclass(frozen=True)
class MotifGroup:
    motifs: tuple                      # Motif objects sorted by id
    occurrences: int = 0
    area_ids: tuple = ()

    @property
    def key(self) -> tuple:
        return tuple(m.id for m in self.motifs)

    @property
    def motif_ids(self) -> frozenset:
        return frozenset(self.key)

    def events_in(self, area: OverlapArea) -> list[Event]:
        ids = self.motif_ids
        return [e for e in area.events if e.motif_id in ids]


def _motifs_in_area(area: OverlapArea) -> dict[int, list[Event]]:
    present: dict[int, list[Event]] = {}
    for e in area.events:
        if e.motif_id is not None:
            present.setdefault(e.motif_id, []).append(e)
    return present


def _conflicts(present: dict[int, list[Event]]) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(present)
    ids = sorted(present)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if any(events_overlap(x, y) for x in present[a] for y in present[b]):
                g.add_edge(a, b)
    return g


def _admissible(key, present, conflicts: nx.Graph) -> bool:
    if not all(m in present for m in key):
        return False
    return not any(conflicts.has_edge(a, b) for i, a in enumerate(key) for b in key[i + 1:])


def enumerate_motif_groups(areas: list[OverlapArea], motifs: list[Motif],
                           max_motifs: int = MAX_MOTIFS_PER_AREA) -> list[MotifGroup]:
    """Every maximal set of mutually non-overlapping motifs seen in some area.

    A group occurs in an area when all of its motifs have a member there and
    none of them overlap each other inside it.
    """
    by_id = {m.id: m for m in motifs}
    keys: set[tuple] = set()
    per_area = []
    for area in areas:
        present = {k: v for k, v in _motifs_in_area(area).items() if k in by_id}
        if len(present) > max_motifs:
            raise CapacityError(f"{len(present)} motifs in one overlapping area (limit {max_motifs})")
        conflicts = _conflicts(present)
        if present:
            for clique in nx.find_cliques(nx.complement(conflicts)):
                keys.add(tuple(sorted(clique)))
        per_area.append((present, conflicts))

    groups = []
    for key in sorted(keys):
        where = tuple(i for i, (present, conflicts) in enumerate(per_area)
                      if _admissible(key, present, conflicts))
        groups.append(MotifGroup(tuple(by_id[k] for k in key), len(where), where))
    return groups


# --------------------------------------------------------------------------- description lengths

def dl_group(mg: MotifGroup) -> float:
    """Model cost: the sum of each member motif's mean event length."""
    return float(sum(m.mean_length for m in mg.motifs))


def dl_areas_given_group(areas: list[OverlapArea], mg: MotifGroup) -> float:
    """Data cost of ``areas`` when the group's events are replaced by motif symbols."""
    total = 0
    for area in areas:
        covered = sum(e.n_samples for e in mg.events_in(area))
        rest = area.raw_len - covered
        if rest < 0:
            raise ValueError("group events exceed the overlapping area they belong to")
        total += rest
    return float(total + len(areas) * len(mg.motifs))


def mdl_score(areas: list[OverlapArea], mg: MotifGroup) -> float:
    return dl_areas_given_group(areas, mg) + dl_group(mg)


# --------------------------------------------------------------------------- tournament

@dataclass
class Comparison:
    area_ids: tuple
    winner: tuple
    loser: tuple
    winner_score: float
    loser_score: float


@dataclass
class Resolution:
    events: list
    area_of: dict = field(default_factory=dict)      # event -> area index (absent when free)
    winners: dict = field(default_factory=dict)      # area index -> MotifGroup or None
    comparisons: list = field(default_factory=list)


def max_event_set(events: list[Event]) -> list[Event]:
    """Largest set of mutually non-overlapping events.

    Ties prefer the larger total |dP|, then the shorter total span.
    """
    evs = sorted(events, key=lambda e: (e.end_idx, e.start_idx, e.window_len))
    if not evs:
        return []
    ends = [e.end_idx for e in evs]
    best: list[tuple] = [(0, 0.0, 0)]
    choice: list[Optional[int]] = [None]
    for i, e in enumerate(evs):
        j = bisect.bisect_left(ends, e.start_idx, 0, i)     # events ending before e starts
        dp = abs(e.features.delta_p) if e.features is not None else 0.0
        base = best[j]
        take = (base[0] + 1, base[1] + dp, base[2] - e.span)
        if take > best[i]:
            best.append(take)
            choice.append(i)
        else:
            best.append(best[i])
            choice.append(None)
    out = []
    k = len(evs)
    while k > 0:
        if choice[k] is None:
            k -= 1
        else:
            e = evs[choice[k]]
            out.append(e)
            k = bisect.bisect_left(ends, e.start_idx, 0, choice[k])
    return out[::-1]


def _tiebreak(g: MotifGroup, areas) -> tuple:
    n_events = sum(len(g.events_in(a)) for a in areas)
    return (-n_events, -len(g.motifs), g.key)


def resolve_competitions(areas: list[OverlapArea], groups: list[MotifGroup],
                         free_events: list[Event]) -> Resolution:
    """Pairwise MDL tournament between motif groups that share overlapping areas.

    The group occurring most often is compared with the most frequent group
    it shares areas with; in the shared areas only the one with the smaller
    MDL score survives. This repeats until every area keeps one group. Each
    area then contributes its winning group's events plus the largest set
    of remaining events that overlap none of them.
    """
    present = {g.key: set(g.area_ids) for g in groups}
    by_key = {g.key: g for g in groups}
    res = Resolution(events=list(free_events))

    while True:
        order = sorted(present, key=lambda k: (-len(present[k]), k))
        pair = None
        for ka in order:
            for kb in order:
                if kb != ka and present[ka] & present[kb]:
                    pair = (ka, kb)
                    break
            if pair:
                break
        if pair is None:
            break
        ka, kb = pair
        shared = sorted(present[ka] & present[kb])
        arena = [areas[i] for i in shared]
        sa, sb = mdl_score(arena, by_key[ka]), mdl_score(arena, by_key[kb])
        if sa < sb or (sa == sb and _tiebreak(by_key[ka], arena) < _tiebreak(by_key[kb], arena)):
            win, lose, ws, ls = ka, kb, sa, sb
        else:
            win, lose, ws, ls = kb, ka, sb, sa
        present[lose] -= set(shared)
        res.comparisons.append(Comparison(tuple(shared), win, lose, ws, ls))
        log.debug("areas %s: group %s (%.1f) beats %s (%.1f)", shared, win, ws, lose, ls)

    for i, area in enumerate(areas):
        holders = [k for k in present if i in present[k]]
        winner = by_key[holders[0]] if holders else None
        chosen = winner.events_in(area) if winner else []
        rest = [e for e in area.events
                if e not in chosen and not any(events_overlap(e, c) for c in chosen)]
        picked = sorted(chosen + max_event_set(rest), key=lambda e: e.start_idx)
        res.winners[i] = winner
        for e in picked:
            res.events.append(e)
            res.area_of[e] = i
    res.events.sort(key=lambda e: (e.start_idx, e.end_idx))
    return res
