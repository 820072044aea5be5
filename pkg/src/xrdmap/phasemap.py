"""Incremental phase computation on binary peak patterns.

Samples are grouped by peak count and processed in increasing order; within
a group each sample is matched against existing pure phases, then against
mixed-phase candidates assembled from them, under a threshold-based fuzzy
peak-location comparison.  Unmatched samples seed new pure phases; after a
group completes, representatives are replaced by member averages and
under-populated phases are filtered out as outliers.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    BinaryPeakPattern,
    ContractViolation,
    MembershipTable,
    ParameterError,
    PhaseCatalog,
    PhaseId,
    PhaseMapResult,
    PurePhase,
)

__all__ = [
    "PhaseMapParams",
    "MixedPhaseCandidate",
    "fuzzy_equals",
    "compute_mixed_phases",
    "average_representation",
    "phase_computation",
    "remove_outlier_phases",
    "run_incremental_phase_mapping",
]


@dataclass(frozen=True)
class PhaseMapParams:
    """Adjacency threshold `th` (windows), outlier member-count threshold `ot`."""

    th: int
    ot: int
    max_mixed_constituents: int = 3

    def __post_init__(self) -> None:
        if self.th < 0:
            raise ParameterError("th must be >= 0")
        if self.ot < 1:
            raise ParameterError("ot must be >= 1")
        if self.max_mixed_constituents < 2:
            raise ParameterError("max_mixed_constituents must be >= 2")


@dataclass(frozen=True)
class MixedPhaseCandidate:
    """A combination of pure phases and the peak pattern their union implies."""

    constituents: tuple[PhaseId, ...]
    merged_pattern: BinaryPeakPattern


def _all_within(a: np.ndarray, b: np.ndarray, th: int) -> bool:
    """True iff every index in `a` is within `th` windows of some index in `b`."""
    pos = np.searchsorted(b, a)
    dist = np.full(a.shape, np.iinfo(np.int64).max, dtype=np.int64)
    right_ok = pos < b.size
    dist[right_ok] = b[pos[right_ok]] - a[right_ok]
    left_ok = pos > 0
    dist[left_ok] = np.minimum(dist[left_ok], a[left_ok] - b[pos[left_ok] - 1])
    return bool(np.all(dist <= th))


def fuzzy_equals(s1: BinaryPeakPattern, s2: BinaryPeakPattern, th: int) -> bool:
    """Threshold-based fuzzy comparison of two binary peak patterns.

    True iff the patterns have equal peak counts and, in both directions,
    every peak lies within `th` windows of the other pattern's nearest peak.
    """
    if s1.width != s2.width:
        raise ParameterError(f"width mismatch: {s1.width} vs {s2.width}")
    if s1.peak_count != s2.peak_count:
        return False
    if s1.peak_count == 0:
        return True
    l1, l2 = s1.locations_array, s2.locations_array
    return _all_within(l1, l2, th) and _all_within(l2, l1, th)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def coalesce_peaks(indices: Iterable[int], th: int) -> tuple[int, ...]:
    """Merge runs of indices whose consecutive gaps are <= th into their rounded mean.

    Two peaks closer than the adjacency threshold are indistinguishable under
    fuzzy comparison, so a union containing them represents a single peak.
    """
    uniq = sorted(set(int(i) for i in indices))
    if not uniq:
        return ()
    groups: list[list[int]] = [[uniq[0]]]
    for idx in uniq[1:]:
        if idx - groups[-1][-1] <= th:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    return tuple(_round_half_up(sum(g) / len(g)) for g in groups)


def compute_mixed_phases(
    pp: PhaseCatalog, pc: int, th: int, max_constituents: int = 3
) -> list[MixedPhaseCandidate]:
    """Enumerate combinations of existing pure phases whose merged pattern has `pc` peaks.

    A mixed-phase sample carries peaks at all of its constituents' peak
    locations, so the candidate pattern is the union of constituent peaks,
    coalesced under `th`.  Output is sorted by constituent ids.
    """
    width = pp.width
    if width is None:
        return []
    by_id = sorted(pp.phases, key=lambda p: p.id)
    out: list[MixedPhaseCandidate] = []
    for size in range(2, max_constituents + 1):
        for combo in itertools.combinations(by_id, size):
            union = set()
            for phase in combo:
                union.update(phase.representative.peaks)
            merged = coalesce_peaks(union, th)
            if len(merged) == pc:
                out.append(
                    MixedPhaseCandidate(
                        constituents=tuple(p.id for p in combo),
                        merged_pattern=BinaryPeakPattern(width, merged),
                    )
                )
    out.sort(key=lambda c: c.constituents)
    return out


def average_representation(members: Sequence[BinaryPeakPattern], pc: int) -> BinaryPeakPattern:
    """Positional average of same-count patterns.

    The k-th smallest peak of each member forms matching group k; the output
    sets bit round-half-up(mean) per group, yielding exactly `pc` set bits.
    """
    if not members:
        raise ContractViolation("cannot average zero patterns")
    width = members[0].width
    for m in members:
        if m.peak_count != pc:
            raise ContractViolation(f"member has {m.peak_count} peaks, expected {pc}")
        if m.width != width:
            raise ContractViolation("members disagree on width")
    if pc == 0:
        return BinaryPeakPattern(width, ())
    stacked = np.stack([m.locations_array for m in members])
    means = stacked.mean(axis=0)
    return BinaryPeakPattern(width, tuple(_round_half_up(v) for v in means))


def phase_computation(
    group: Sequence[tuple[str, BinaryPeakPattern]],
    pc: int,
    params: PhaseMapParams,
    pp: PhaseCatalog,
    mm: MembershipTable,
) -> tuple[PhaseCatalog, MembershipTable]:
    """One group of the incremental computation (all samples with `pc` peaks).

    Mixed candidates are assembled once from the phases existing when the
    group starts.  Each sample is matched first against pure phases in
    catalog order, then against candidates in sorted order; first match
    wins.  Unmatched samples are appended as new pure phases and compared
    against by the rest of the group.  Finally every phase with `pc` peaks
    has its representative replaced by the average of its members in this
    group.
    """
    patterns: dict[str, BinaryPeakPattern] = {}
    for sid, pat in group:
        if pat.peak_count != pc:
            raise ContractViolation(
                f"sample {sid!r} has {pat.peak_count} peaks in group of {pc}"
            )
        if sid in patterns:
            raise ContractViolation(f"duplicate sample id {sid!r}")
        patterns[sid] = pat

    mp = compute_mixed_phases(pp, pc, params.th, params.max_mixed_constituents)

    for sid, pat in group:
        matched = False
        for phase in pp.phases:
            if fuzzy_equals(pat, phase.representative, params.th):
                mm[sid] = frozenset({phase.id})
                phase.member_ids.append(sid)
                matched = True
                break
        if matched:
            continue
        for cand in mp:
            if fuzzy_equals(pat, cand.merged_pattern, params.th):
                mm[sid] = frozenset(cand.constituents)
                matched = True
                break
        if not matched:
            phase = pp.add_phase(pat, [sid])
            mm[sid] = frozenset({phase.id})

    for phase in pp.phases:
        if phase.representative.peak_count == pc:
            group_members = [patterns[s] for s in phase.member_ids if s in patterns]
            if group_members:
                phase.representative = average_representation(group_members, pc)
    return pp, mm


def remove_outlier_phases(
    pp: PhaseCatalog, mm: MembershipTable, ot: int
) -> tuple[PhaseCatalog, MembershipTable, list[PhaseId]]:
    """Delete pure phases with fewer than `ot` pure members.

    Every membership set is stripped of the removed ids: pure members of a
    removed phase become outliers; mixed memberships drop the removed
    constituent and collapse to a pure membership of the survivor when only
    one remains.
    """
    counts = {p.id: 0 for p in pp.phases}
    for ms in mm.values():
        if len(ms) == 1:
            (pid,) = ms
            if pid in counts:
                counts[pid] += 1
    removed = [p.id for p in pp.phases if counts[p.id] < ot]
    if not removed:
        return pp, mm, []
    removed_set = set(removed)
    pp.phases = [p for p in pp.phases if p.id not in removed_set]
    survivors = {p.id: p for p in pp.phases}
    for sid, ms in mm.items():
        if not (ms & removed_set):
            continue
        new_ms = frozenset(ms - removed_set)
        mm[sid] = new_ms
        if len(new_ms) == 1 and len(ms) >= 2:
            (pid,) = new_ms
            survivors[pid].member_ids.append(sid)
    return pp, mm, removed


def _representative_collisions(pp: PhaseCatalog, th: int) -> list[tuple[str, str]]:
    """Pairs of distinct representatives that drifted into fuzzy equality after averaging."""
    out = []
    for a, b in itertools.combinations(pp.phases, 2):
        if fuzzy_equals(a.representative, b.representative, th):
            out.append((str(a.id), str(b.id)))
    return out


def run_incremental_phase_mapping(
    patterns: Sequence[tuple[str, BinaryPeakPattern]],
    params: PhaseMapParams,
    extra_params: dict | None = None,
) -> PhaseMapResult:
    """Full incremental phase mapping over binarized samples.

    Zero-peak patterns are outliers up front; groups run in ascending peak
    count with outlier filtering after each group so later mixed-phase
    enumeration never builds on noise phases.
    """
    widths = {p.width for _, p in patterns}
    if len(widths) > 1:
        raise ContractViolation(f"patterns disagree on width: {sorted(widths)}")
    if widths and params.th >= next(iter(widths)):
        raise ParameterError(f"th {params.th} must be < width {next(iter(widths))}")
    seen: set[str] = set()
    for sid, _ in patterns:
        if sid in seen:
            raise ContractViolation(f"duplicate sample id {sid!r}")
        seen.add(sid)

    mm = MembershipTable((sid, frozenset()) for sid, _ in patterns)
    pp = PhaseCatalog(th=params.th)

    groups: dict[int, list[tuple[str, BinaryPeakPattern]]] = {}
    for sid, pat in patterns:
        if pat.peak_count > 0:
            groups.setdefault(pat.peak_count, []).append((sid, pat))

    collisions: list[tuple[str, str]] = []
    for pc in sorted(groups):
        phase_computation(groups[pc], pc, params, pp, mm)
        remove_outlier_phases(pp, mm, params.ot)
        collisions.extend(_representative_collisions(pp, params.th))

    record = {
        "th": params.th,
        "ot": params.ot,
        "max_mixed_constituents": params.max_mixed_constituents,
        "width": next(iter(widths)) if widths else None,
        "outlier_filtering": "per_group",
        **(extra_params or {}),
    }
    if collisions:
        record["representative_collisions"] = sorted(set(collisions))
    return PhaseMapResult(catalog=pp, memberships=mm, params=record, lineage=[])
