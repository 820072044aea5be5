"""Second-stage consolidation of pure phases.

The incremental computation over-splits when the adjacency threshold is
tight, so near-duplicate phases are combined here: either automatically by
average-linkage agglomeration over peak-location distances, or by an
explicit merge of named phases.  Every merge is appended to the result's
lineage so a session can be replayed or undone.
"""
from __future__ import annotations

import itertools
from typing import Iterable, Mapping, Sequence

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
from .phasemap import average_representation

__all__ = [
    "PHASE_DISTANCE_METRICS",
    "phase_distance",
    "hierarchical_merge",
    "apply_hierarchical_merge",
    "manual_merge",
    "replay_lineage",
]

PHASE_DISTANCE_METRICS = ("avg_peak_diff", "max_peak_diff", "sum_peak_diff")


def _matched_diffs(p1: BinaryPeakPattern, p2: BinaryPeakPattern) -> tuple[list[int], int]:
    """Greedy closest-pair matching of peak indices across two patterns.

    Returns the |difference| of each of the min(count) matched pairs plus the
    number left unmatched.  Ties go to the lowest index pair, after ordering
    the patterns canonically so the result is symmetric in its arguments.
    """
    a, b = sorted((p1.peak_locations(), p2.peak_locations()))
    m = min(len(a), len(b))
    if m == 0:
        return [], len(a) + len(b)
    pairs = sorted(
        (abs(ai - bj), ai, bj) for ai, bj in itertools.product(a, b)
    )
    used_a: set[int] = set()
    used_b: set[int] = set()
    diffs: list[int] = []
    for d, ai, bj in pairs:
        if ai in used_a or bj in used_b:
            continue
        used_a.add(ai)
        used_b.add(bj)
        diffs.append(d)
        if len(diffs) == m:
            break
    return diffs, (len(a) - m) + (len(b) - m)


def phase_distance(p1: BinaryPeakPattern, p2: BinaryPeakPattern, metric: str) -> float:
    """Peak-location distance between two patterns.

    The min(count) closest cross pairs are matched greedily; every unmatched
    peak of the longer pattern contributes a penalty of the full width W,
    which makes cross-count merges effectively opt-in.  `metric` selects the
    aggregation: mean, max, or sum of the matched differences and penalties.
    """
    if metric not in PHASE_DISTANCE_METRICS:
        raise ParameterError(f"unknown metric {metric!r}")
    if p1.width != p2.width:
        raise ParameterError(f"width mismatch: {p1.width} vs {p2.width}")
    diffs, unmatched = _matched_diffs(p1, p2)
    terms = [float(d) for d in diffs] + [float(p1.width)] * unmatched
    if not terms:
        return 0.0
    if metric == "avg_peak_diff":
        return sum(terms) / len(terms)
    if metric == "max_peak_diff":
        return max(terms)
    return sum(terms)


def _cluster_representatives(distances: np.ndarray, cutoff: float) -> list[list[int]]:
    """Average-linkage agglomeration over a small dense distance matrix.

    Merges the lowest-index closest pair while the minimum inter-cluster
    distance stays <= cutoff.  Returns clusters as sorted index lists,
    ordered by their smallest member.
    """
    n = distances.shape[0]
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    d = distances.astype(float).copy()
    np.fill_diagonal(d, np.inf)
    active = sorted(clusters)
    while len(active) > 1:
        sub = d[np.ix_(active, active)]
        flat = int(np.argmin(sub))
        r, c = divmod(flat, len(active))
        if sub[r, c] > cutoff:
            break
        i, j = active[r], active[c]
        if i > j:
            i, j = j, i
        ni, nj = len(clusters[i]), len(clusters[j])
        merged_row = (ni * d[i, :] + nj * d[j, :]) / (ni + nj)
        d[i, :] = merged_row
        d[:, i] = merged_row
        d[i, i] = np.inf
        d[j, :] = np.inf
        d[:, j] = np.inf
        clusters[i] = sorted(clusters[i] + clusters[j])
        del clusters[j]
        active = sorted(clusters)
    return [clusters[i] for i in sorted(clusters)]


def _merged_phase(constituents: Sequence[PurePhase], use_average: bool) -> tuple[PurePhase, bool]:
    """Build the merged phase for one cluster of constituents.

    With equal peak counts the representative is the member-count-weighted
    average of constituent representatives; otherwise (flagged) the
    representative of the constituent with most pure members wins, ties to
    the lowest id.  The merged phase keeps the lowest constituent id so
    colors stay stable across merges.
    """
    counts = {p.id.index for p in constituents}
    new_id = PhaseId(min(counts))
    by_size = max(constituents, key=lambda p: (len(p.member_ids), -p.id.index))
    peak_counts = {p.representative.peak_count for p in constituents}
    cross_count = len(peak_counts) > 1
    if cross_count or not use_average:
        rep = by_size.representative
    else:
        weighted = []
        for p in constituents:
            weighted.extend([p.representative] * max(1, len(p.member_ids)))
        rep = average_representation(weighted, next(iter(peak_counts)))
    members: list[str] = []
    for p in sorted(constituents, key=lambda p: p.id):
        members.extend(p.member_ids)
    return PurePhase(id=new_id, representative=rep, member_ids=members), cross_count


def _rewrite_memberships(
    mm: MembershipTable, mapping: Mapping[PhaseId, PhaseId], catalog: PhaseCatalog
) -> MembershipTable:
    """Map every membership set through `mapping`; collapsed mixed sets become pure.

    Samples whose mixed set collapses to one phase are appended to that
    phase's member list.
    """
    phases = {p.id: p for p in catalog.phases}
    out = MembershipTable()
    for sid, ms in mm.items():
        new_ms = frozenset(mapping.get(pid, pid) for pid in ms)
        out[sid] = new_ms
        if len(new_ms) == 1 and len(ms) >= 2:
            (pid,) = new_ms
            if sid not in phases[pid].member_ids:
                phases[pid].member_ids.append(sid)
    return out


def hierarchical_merge(
    catalog: PhaseCatalog,
    mm: MembershipTable,
    metric: str,
    cutoff: float,
) -> tuple[PhaseCatalog, MembershipTable, dict[PhaseId, PhaseId]]:
    """Merge pure phases by average-linkage clustering of their representatives.

    Clusters are cut at `cutoff`; each merged phase keeps its lowest
    constituent id and memberships are rewritten through the returned
    mapping (identity entries included for untouched phases).
    """
    if cutoff < 0:
        raise ParameterError("cutoff must be >= 0")
    phases = list(catalog.phases)
    n = len(phases)
    mapping: dict[PhaseId, PhaseId] = {p.id: p.id for p in phases}
    if n <= 1:
        return catalog, mm, mapping
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = phase_distance(
                phases[i].representative, phases[j].representative, metric
            )
    groups = _cluster_representatives(d, cutoff)
    new_catalog = PhaseCatalog(th=catalog.th)
    for idx_group in groups:
        constituents = [phases[i].copy() for i in idx_group]
        if len(constituents) == 1:
            new_catalog.phases.append(constituents[0])
            continue
        merged, _ = _merged_phase(constituents, use_average=True)
        new_catalog.phases.append(merged)
        for p in constituents:
            mapping[p.id] = merged.id
    new_catalog.phases.sort(key=lambda p: p.id)
    new_catalog._next_index = catalog._next_index
    new_mm = _rewrite_memberships(mm, mapping, new_catalog)
    return new_catalog, new_mm, mapping


def apply_hierarchical_merge(
    result: PhaseMapResult,
    metric: str,
    cutoff: float,
    timestamp: str | None = None,
) -> PhaseMapResult:
    """Run hierarchical_merge on a result and append the lineage entry."""
    out = result.clone()
    catalog, mm, mapping = hierarchical_merge(out.catalog, out.memberships, metric, cutoff)
    merged_groups = {}
    for old, new in mapping.items():
        if old != new:
            merged_groups.setdefault(str(new), []).append(str(old))
    peak_counts = {
        p.id: p.representative.peak_count for p in result.catalog.phases
    }
    cross = sorted(
        new
        for new, olds in merged_groups.items()
        if len({peak_counts[PhaseId.parse(o)] for o in olds + [new]}) > 1
    )
    entry = {
        "action": "hierarchical_merge",
        "metric": metric,
        "cutoff": cutoff,
        "mapping": {str(k): str(v) for k, v in sorted(mapping.items()) if k != v},
        "merged": {k: sorted(v + [k]) for k, v in sorted(merged_groups.items())},
        "cross_peak_count": cross,
        "actor": "auto",
        "timestamp": timestamp,
    }
    out.catalog = catalog
    out.memberships = mm
    out.lineage.append(entry)
    return out


def manual_merge(
    result: PhaseMapResult,
    ids: Iterable[PhaseId],
    actor: str = "user",
    timestamp: str | None = None,
) -> PhaseMapResult:
    """Merge the named pure phases into one.

    The merged phase takes the representative of the constituent with most
    pure members (ties: lowest id) and the lowest constituent id; members
    are unioned and mixed memberships rewritten.  Cross-peak-count merges
    are allowed but flagged in the lineage entry.
    """
    id_set = set(ids)
    if len(id_set) < 2:
        raise ParameterError("manual merge needs at least 2 phase ids")
    out = result.clone()
    known = {p.id for p in out.catalog.phases}
    missing = sorted(id_set - known)
    if missing:
        raise ParameterError(f"unknown phase ids: {[str(i) for i in missing]}")
    constituents = [p for p in out.catalog.phases if p.id in id_set]
    merged, cross_count = _merged_phase(constituents, use_average=False)
    mapping = {pid: merged.id for pid in id_set}
    survivors = [p for p in out.catalog.phases if p.id not in id_set]
    out.catalog.phases = sorted(survivors + [merged], key=lambda p: p.id)
    out.memberships = _rewrite_memberships(out.memberships, mapping, out.catalog)
    out.lineage.append(
        {
            "action": "manual_merge",
            "ids": sorted(str(i) for i in id_set),
            "new_id": str(merged.id),
            "cross_peak_count": cross_count,
            "actor": actor,
            "timestamp": timestamp,
        }
    )
    return out


def replay_lineage(initial: PhaseMapResult, entries: Sequence[dict]) -> PhaseMapResult:
    """Re-apply a lineage log on top of an initial result.

    Timestamps are copied verbatim from the entries so a replayed session is
    byte-identical to the original.
    """
    out = initial.clone()
    for entry in entries:
        action = entry.get("action")
        if action == "manual_merge":
            out = manual_merge(
                out,
                [PhaseId.parse(s) for s in entry["ids"]],
                actor=entry.get("actor", "user"),
                timestamp=entry.get("timestamp"),
            )
        elif action == "hierarchical_merge":
            out = apply_hierarchical_merge(
                out,
                entry["metric"],
                entry["cutoff"],
                timestamp=entry.get("timestamp"),
            )
        else:
            raise ContractViolation(f"unknown lineage action {action!r}")
    return out
