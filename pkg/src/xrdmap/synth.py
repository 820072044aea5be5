"""Synthetic composition-spread wafers with planted phase regions.

The wafer is a pitch grid of sample positions inside a circle, split into
angular sectors, one planted phase per sector.  Samples nearest a sector
boundary form the mixed band and carry the union signal of both adjacent
phases.  Every draw is keyed to the config seed, so a config is a complete
recipe for a dataset with known ground truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

import numpy as np

from .core import (
    BinaryPeakPattern,
    MembershipTable,
    ParameterError,
    PhaseId,
    QGrid,
    XrdSample,
)
from .phasemap import coalesce_peaks, fuzzy_equals
from .signal import window_of_index

__all__ = ["PlantedPhase", "SynthConfig", "generate", "planted_patterns"]


@dataclass(frozen=True)
class PlantedPhase:
    """Peak positions (Q units), matching amplitudes, and a shared Gaussian width."""

    peaks: tuple[float, ...]
    amplitudes: tuple[float, ...]
    sigma: float

    def __post_init__(self) -> None:
        if not self.peaks:
            raise ParameterError("planted phase needs at least one peak")
        if len(self.peaks) != len(self.amplitudes):
            raise ParameterError("peaks and amplitudes must have equal length")
        if self.sigma <= 0:
            raise ParameterError("sigma must be positive")
        if any(a <= 0 for a in self.amplitudes):
            raise ParameterError("amplitudes must be positive")


@dataclass(frozen=True)
class SynthConfig:
    """Recipe for one synthetic wafer.

    `window_count` and `separation_th` define the binarization geometry the
    planted phases are validated against: every pair of planted peak sets
    must fail the fuzzy comparison at that threshold, otherwise recovery is
    ill-posed and generate() refuses the config.
    """

    seed: int
    phases: tuple[PlantedPhase, ...]
    wafer_radius: float = 50.0
    pitch: float = 2.0
    n_samples: int | None = None
    q_min: float = 1.0
    q_max: float = 4.2
    n_points: int = 499
    boundary_band: float = 0.1
    background: tuple[float, float] = (20.0, 5.0)
    spike_rate: float = 0.0
    spike_amplitude: float = 300.0
    noise_sigma: float = 0.0
    window_count: int = 100
    separation_th: int = 2
    sector_rotation: float = 0.0

    def __post_init__(self) -> None:
        if len(self.phases) < 1:
            raise ParameterError("need at least one planted phase")
        if self.wafer_radius <= 0 or self.pitch <= 0:
            raise ParameterError("radius and pitch must be positive")
        if not 0.0 <= self.boundary_band < 1.0:
            raise ParameterError("boundary_band must be in [0, 1)")
        if not 0.0 <= self.spike_rate <= 1.0:
            raise ParameterError("spike_rate must be in [0, 1]")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be >= 0")
        if self.q_max <= self.q_min:
            raise ParameterError("q_max must exceed q_min")
        if self.n_points < 2:
            raise ParameterError("n_points must be >= 2")
        for phase in self.phases:
            for q in phase.peaks:
                if not self.q_min < q < self.q_max:
                    raise ParameterError(f"peak {q} outside grid ({self.q_min}, {self.q_max})")

    def q_grid(self) -> QGrid:
        return QGrid.from_array(np.linspace(self.q_min, self.q_max, self.n_points))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        payload = dict(data)
        payload["phases"] = tuple(
            PlantedPhase(
                peaks=tuple(p["peaks"]),
                amplitudes=tuple(p["amplitudes"]),
                sigma=p["sigma"],
            )
            for p in payload.get("phases", ())
        )
        for key in ("background",):
            if key in payload:
                payload[key] = tuple(payload[key])
        return cls(**payload)


def planted_patterns(config: SynthConfig) -> list[BinaryPeakPattern]:
    """Expected binary pattern of each planted phase under the config's geometry."""
    grid = config.q_grid().array
    out = []
    for phase in config.phases:
        idx = [int(np.argmin(np.abs(grid - q))) for q in phase.peaks]
        windows = [int(window_of_index(i, config.n_points, config.window_count)) for i in idx]
        out.append(
            BinaryPeakPattern(config.window_count, coalesce_peaks(windows, 0))
        )
    return out


def _check_separation(config: SynthConfig) -> None:
    pats = planted_patterns(config)
    for i in range(len(pats)):
        for j in range(i + 1, len(pats)):
            if fuzzy_equals(pats[i], pats[j], config.separation_th):
                raise ParameterError(
                    f"planted phases {i} and {j} are not separable at th={config.separation_th}"
                )


def _positions(config: SynthConfig) -> np.ndarray:
    """Pitch-grid points inside the wafer, nearest-center first, tie-broken on (y, x)."""
    r = config.wafer_radius
    k = int(math.floor(r / config.pitch))
    axis = np.arange(-k, k + 1) * config.pitch
    xx, yy = np.meshgrid(axis, axis)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    pts = pts[np.einsum("ij,ij->i", pts, pts) <= r * r + 1e-9]
    order = np.lexsort((pts[:, 0], pts[:, 1], np.einsum("ij,ij->i", pts, pts)))
    pts = pts[order]
    n = config.n_samples
    if n is None:
        return pts
    if n > len(pts):
        raise ParameterError(f"n_samples {n} exceeds {len(pts)} grid positions")
    return pts[:n]


def _sector_geometry(config: SynthConfig, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sector index, nearest boundary angle distance, and the neighbor across it."""
    k = len(config.phases)
    step = 2 * math.pi / k
    theta = np.mod(np.arctan2(pts[:, 1], pts[:, 0]) - config.sector_rotation, 2 * math.pi)
    sector = np.minimum((theta / step).astype(int), k - 1)
    frac = theta - sector * step
    dist_lo = frac
    dist_hi = step - frac
    boundary_dist = np.minimum(dist_lo, dist_hi)
    neighbor = np.where(dist_lo <= dist_hi, (sector - 1) % k, (sector + 1) % k)
    return sector, boundary_dist, neighbor


def _compositions(config: SynthConfig, pts: np.ndarray) -> np.ndarray:
    """Three-gun deposition profile: weight falls linearly with distance to each gun."""
    r = config.wafer_radius
    angles = [config.sector_rotation + 2 * math.pi * i / 3 for i in range(3)]
    guns = np.array([[r * math.cos(a), r * math.sin(a)] for a in angles])
    d = np.sqrt(((pts[:, None, :] - guns[None, :, :]) ** 2).sum(axis=2))
    w = np.maximum(1.0 - d / (2 * r), 1e-9)
    return w / w.sum(axis=1, keepdims=True)


def _sample_ids(n: int) -> list[str]:
    width = max(4, len(str(n)))
    return [f"s{i + 1:0{width}d}" for i in range(n)]


def generate(config: SynthConfig) -> tuple[list[XrdSample], MembershipTable]:
    """Build the wafer: samples with synthesized intensities plus planted truth.

    Exactly ceil(boundary_band * N) samples, those nearest a sector
    boundary, carry the union signal of the two adjacent phases and a
    2-element truth membership.  Intensity = linear background + Gaussian
    peaks + optional single-bin spike + Gaussian noise, clamped at zero.
    Deterministic: each sample draws from its own spawned child generator.
    """
    _check_separation(config)
    pts = _positions(config)
    n = len(pts)
    if n == 0:
        return [], MembershipTable()
    k = len(config.phases)
    sector, boundary_dist, neighbor = _sector_geometry(config, pts)

    n_mixed = math.ceil(config.boundary_band * n) if k > 1 else 0
    mixed_idx = np.argsort(boundary_dist, kind="stable")[:n_mixed]
    is_mixed = np.zeros(n, dtype=bool)
    is_mixed[mixed_idx] = True

    grid = config.q_grid().array
    base = config.background[0] + config.background[1] * grid
    peak_profiles = []
    for phase in config.phases:
        prof = np.zeros_like(grid)
        for q, amp in zip(phase.peaks, phase.amplitudes):
            prof += amp * np.exp(-0.5 * ((grid - q) / phase.sigma) ** 2)
        peak_profiles.append(prof)

    comps = _compositions(config, pts)
    ids = _sample_ids(n)
    seqs = np.random.SeedSequence(config.seed).spawn(n)

    samples: list[XrdSample] = []
    truth = MembershipTable()
    for i in range(n):
        rng = np.random.default_rng(seqs[i])
        plant = {int(sector[i])}
        if is_mixed[i]:
            plant.add(int(neighbor[i]))
        y = base.copy()
        for p in sorted(plant):
            y = y + peak_profiles[p]
        if config.spike_rate > 0 and rng.random() < config.spike_rate:
            y[int(rng.integers(len(grid)))] += config.spike_amplitude
        if config.noise_sigma > 0:
            y = y + rng.normal(0.0, config.noise_sigma, len(grid))
        samples.append(
            XrdSample(
                id=ids[i],
                intensities=np.maximum(y, 0.0),
                composition=tuple(comps[i]),
                wafer_pos=(float(pts[i, 0]), float(pts[i, 1])),
            )
        )
        truth[ids[i]] = frozenset(PhaseId(p) for p in plant)
    return samples, truth
