"""Shared wafer fixtures and invariant helpers.

Three synthetic cases drive most tests: a clean wafer (three planted
phases, no noise), a noisy wafer (counting noise plus intensity spikes),
and an over-split wafer where one planted phase appears twice with a one
window offset so the merge stage has real work to do.  All are seeded, so
every fixture is bit-reproducible.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import pytest

from xrdmap.core import BinaryPeakPattern, MembershipTable, PhaseMapResult, QGrid, XrdSample
from xrdmap.io import result_to_jsonable
from xrdmap.phasemap import PhaseMapParams, fuzzy_equals, run_incremental_phase_mapping
from xrdmap.signal import BinarizationParams, binarize_dataset
from xrdmap.synth import PlantedPhase, SynthConfig, generate, planted_patterns

N_POINTS = 499
N_WINDOWS = 100
Q_MIN, Q_MAX = 1.0, 4.2


def q_at_index(i: int) -> float:
    return Q_MIN + (Q_MAX - Q_MIN) * i / (N_POINTS - 1)


def q_at_window(w: int, offset: int = 2) -> float:
    """Q position at a given window's center index (first 99 windows hold 5 points)."""
    return q_at_index(5 * w + offset)


def _phase(windows: tuple[int, ...], amp: float = 100.0) -> PlantedPhase:
    return PlantedPhase(
        peaks=tuple(q_at_window(w) for w in windows),
        amplitudes=(amp,) * len(windows),
        sigma=0.03,
    )


CLEAN_CONFIG = SynthConfig(
    seed=7,
    phases=(
        _phase((12, 40, 65)),
        _phase((25, 53, 90)),
        _phase((18, 77)),
    ),
    n_samples=500,
    n_points=N_POINTS,
    window_count=N_WINDOWS,
    separation_th=2,
)

NOISY_CONFIG = SynthConfig(
    seed=11,
    phases=CLEAN_CONFIG.phases,
    n_samples=500,
    n_points=N_POINTS,
    window_count=N_WINDOWS,
    separation_th=2,
    noise_sigma=5.0,
    spike_rate=0.02,
    spike_amplitude=300.0,
)

# twin of the second phase shifted by exactly one window; separable only at th=0
OVERSPLIT_CONFIG = SynthConfig(
    seed=5,
    phases=(
        _phase((12, 40, 65)),
        _phase((25, 53, 90)),
        _phase((18, 77)),
        PlantedPhase(
            peaks=tuple(q_at_window(w + 1) for w in (25, 53, 90)),
            amplitudes=(100.0,) * 3,
            sigma=0.03,
        ),
    ),
    n_samples=400,
    n_points=N_POINTS,
    window_count=N_WINDOWS,
    separation_th=0,
)

CLEAN_BIN = BinarizationParams(window_count=N_WINDOWS, intensity_threshold=30.0)
CLEAN_MAP = PhaseMapParams(th=2, ot=5)
OVERSPLIT_MAP = PhaseMapParams(th=0, ot=5)


class WaferCase(NamedTuple):
    config: SynthConfig
    grid: QGrid
    samples: list[XrdSample]
    truth: MembershipTable
    patterns: list[tuple[str, BinaryPeakPattern]]
    map_params: PhaseMapParams
    result: PhaseMapResult


def _build_case(config: SynthConfig, bin_params: BinarizationParams, map_params: PhaseMapParams) -> WaferCase:
    samples, truth = generate(config)
    pats = binarize_dataset(samples, bin_params)
    patterns = [(s.id, p) for s, p in zip(samples, pats)]
    result = run_incremental_phase_mapping(patterns, map_params)
    return WaferCase(config, config.q_grid(), samples, truth, patterns, map_params, result)


@pytest.fixture(scope="session")
def clean_case() -> WaferCase:
    return _build_case(CLEAN_CONFIG, CLEAN_BIN, CLEAN_MAP)


@pytest.fixture(scope="session")
def noisy_case() -> WaferCase:
    return _build_case(NOISY_CONFIG, CLEAN_BIN, CLEAN_MAP)


@pytest.fixture(scope="session")
def oversplit_case() -> WaferCase:
    return _build_case(OVERSPLIT_CONFIG, CLEAN_BIN, OVERSPLIT_MAP)


def planted_to_recovered(case: WaferCase) -> dict:
    """Map planted phase index -> recovered PhaseId by fuzzy-matching representatives."""
    mapping = {}
    for i, pat in enumerate(planted_patterns(case.config)):
        for phase in case.result.catalog:
            if fuzzy_equals(phase.representative, pat, case.map_params.th):
                mapping[i] = phase.id
    return mapping


def assigned_correctly(case: WaferCase) -> list[str]:
    """Sample ids whose recovered membership equals the planted one under the rep mapping."""
    mapping = planted_to_recovered(case)
    good = []
    for sid, planted in case.truth.items():
        want = frozenset(mapping.get(p.index) for p in planted)
        if None not in want and case.result.memberships[sid] == want:
            good.append(sid)
    return good


def assert_result_invariants(result: PhaseMapResult, patterns=None, ot: int | None = None) -> None:
    """Structural checks every mapping result must satisfy.

    Pure members carry exactly their phase's id and the same peak count as
    its representative; memberships reference only catalog phases; member
    lists and the membership table agree sample for sample.
    """
    ids = set(result.catalog.ids())
    assert len(ids) == len(result.catalog.phases), "duplicate phase ids"
    widths = {p.representative.width for p in result.catalog.phases}
    assert len(widths) <= 1, f"catalog mixes widths {widths}"
    pattern_of = dict(patterns) if patterns is not None else None
    for sid, ms in result.memberships.items():
        assert ms <= ids, f"{sid} references unknown phases {ms - ids}"
    for phase in result.catalog.phases:
        assert phase.member_ids, f"{phase.id} has no members"
        assert len(set(phase.member_ids)) == len(phase.member_ids)
        for sid in phase.member_ids:
            assert result.memberships[sid] == frozenset({phase.id})
            if pattern_of is not None:
                assert pattern_of[sid].peak_count == phase.representative.peak_count
        pure = result.memberships.pure_member_ids(phase.id)
        assert sorted(pure) == sorted(phase.member_ids)
        if ot is not None:
            assert len(phase.member_ids) >= ot, f"{phase.id} survived with {len(phase.member_ids)} < {ot}"


def results_equal(a: PhaseMapResult, b: PhaseMapResult) -> bool:
    return result_to_jsonable(a) == result_to_jsonable(b)


def fuzzy_equals_oracle(p1: BinaryPeakPattern, p2: BinaryPeakPattern, th: int) -> bool:
    """Quadratic nearest-peak reference for the threshold comparison."""
    if p1.peak_count != p2.peak_count:
        return False
    a, b = p1.peak_locations(), p2.peak_locations()
    return all(any(abs(x - y) <= th for y in b) for x in a) and all(
        any(abs(x - y) <= th for x in a) for y in b
    )


def random_pattern(rng: np.random.Generator, width: int, max_peaks: int | None = None) -> BinaryPeakPattern:
    cap = width if max_peaks is None else min(max_peaks, width)
    k = int(rng.integers(0, cap + 1))
    locs = np.sort(rng.choice(width, size=k, replace=False))
    return BinaryPeakPattern(width, tuple(int(x) for x in locs))


def reference_agglomerate(dist: np.ndarray, cutoff: float) -> list[list[int]]:
    """O(n^3) average-linkage reference recomputing cluster distances from scratch.

    Merges the pair with smallest (mean cross distance, lowest min member,
    other min member) while that distance is <= cutoff; clusters come back
    as sorted index lists ordered by smallest member.
    """
    import itertools

    clusters = [frozenset([i]) for i in range(dist.shape[0])]
    while len(clusters) > 1:
        best = None
        for ca, cb in itertools.combinations(clusters, 2):
            d = float(np.mean([dist[i, j] for i in ca for j in cb]))
            lo, hi = sorted((min(ca), min(cb)))
            key = (d, lo, hi)
            if best is None or key < best[0]:
                best = (key, ca, cb)
        if best[0][0] > cutoff:
            break
        _, ca, cb = best
        clusters = [c for c in clusters if c not in (ca, cb)] + [ca | cb]
    return sorted((sorted(c) for c in clusters), key=lambda c: c[0])


def min_transport_cost(supply, demand) -> int:
    """Exhaustive minimum-cost transport between integer histograms.

    Enumerates every integer shipping plan (memoized on the remaining demand
    suffix state) and returns min total units * |source - destination|.
    Exponential; only for small bins/masses.
    """
    from functools import lru_cache

    supply = tuple(int(x) for x in supply)
    demand = tuple(int(x) for x in demand)
    assert sum(supply) == sum(demand) > 0
    n = len(demand)
    big = 10**9

    @lru_cache(maxsize=None)
    def best(i: int, demands: tuple[int, ...]) -> int:
        if i == len(supply):
            return 0

        def place(j: int, units: int, demands_left: tuple[int, ...], cost: int) -> int:
            if units == 0:
                return cost + best(i + 1, demands_left)
            if j == n:
                return big
            out = big
            for amt in range(min(units, demands_left[j]) + 1):
                nd = demands_left[:j] + (demands_left[j] - amt,) + demands_left[j + 1 :]
                sub = place(j + 1, units - amt, nd, cost + amt * abs(i - j))
                if sub < out:
                    out = sub
            return out

        return place(0, supply[i], demands, 0)

    return best(0, demand)


def mixed_phases_oracle(catalog, pc, th, max_constituents=3):
    """compute_mixed_phases by brute force: subsets via index mask, integer coalescing."""
    phases = sorted(catalog.phases, key=lambda p: p.id.index)
    results = []
    for mask in range(1, 1 << len(phases)):
        chosen = [p for i, p in enumerate(phases) if mask >> i & 1]
        if not 2 <= len(chosen) <= max_constituents:
            continue
        union = sorted({loc for p in chosen for loc in p.representative.peaks})
        runs: list[list[int]] = []
        for loc in union:
            if runs and loc - runs[-1][-1] <= th:
                runs[-1].append(loc)
            else:
                runs.append([loc])
        # round-half-up of the mean, in exact integer arithmetic
        merged = tuple((2 * sum(r) + len(r)) // (2 * len(r)) for r in runs)
        if len(merged) == pc:
            results.append((tuple(p.id for p in chosen), merged))
    results.sort(key=lambda item: item[0])
    return results
