"""Shared wafer recipe and scoring helpers for the experiment scripts."""
from __future__ import annotations

import numpy as np

from xrdmap.core import PhaseMapResult
from xrdmap.phasemap import fuzzy_equals
from xrdmap.synth import PlantedPhase, SynthConfig, planted_patterns

N_POINTS = 499
N_WINDOWS = 100
Q_MIN, Q_MAX = 1.0, 4.2


def _q_at_window(w: int) -> float:
    # center index of window w (the first 99 windows hold 5 grid points each)
    i = 5 * w + 2
    return Q_MIN + (Q_MAX - Q_MIN) * i / (N_POINTS - 1)


def _phase(windows: tuple[int, ...], amp: float = 100.0) -> PlantedPhase:
    return PlantedPhase(
        peaks=tuple(_q_at_window(w) for w in windows),
        amplitudes=(amp,) * len(windows),
        sigma=0.03,
    )


def default_config(
    seed: int,
    n_samples: int = 500,
    noise_sigma: float = 5.0,
    spike_rate: float = 0.02,
) -> SynthConfig:
    """Three well-separated planted phases on the standard grid."""
    return SynthConfig(
        seed=seed,
        phases=(
            _phase((12, 40, 65)),
            _phase((25, 53, 90)),
            _phase((18, 77)),
        ),
        n_samples=n_samples,
        n_points=N_POINTS,
        window_count=N_WINDOWS,
        separation_th=2,
        noise_sigma=noise_sigma,
        spike_rate=spike_rate,
        spike_amplitude=300.0,
    )


def score_against_truth(result: PhaseMapResult, truth, config: SynthConfig, th: int) -> dict:
    """Fraction of samples whose recovered membership equals the planted one."""
    mapping = {}
    for i, pat in enumerate(planted_patterns(config)):
        for phase in result.catalog:
            if fuzzy_equals(phase.representative, pat, th):
                mapping[i] = phase.id
    good = 0
    mixed_good = 0
    n_mixed = 0
    for sid, planted in truth.items():
        want = frozenset(mapping.get(p.index) for p in planted)
        hit = None not in want and result.memberships[sid] == want
        good += hit
        if len(planted) >= 2:
            n_mixed += 1
            mixed_good += hit
    return {
        "planted_recovered": len(mapping),
        "accuracy": good / len(truth) if truth else 1.0,
        "dual_membership_recall": mixed_good / n_mixed if n_mixed else 1.0,
    }


def intensity_matrix(samples) -> np.ndarray:
    return np.array([s.intensities for s in samples])
