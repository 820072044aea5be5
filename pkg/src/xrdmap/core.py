"""Shared domain types for composition-spread XRD phase mapping.

Value types (QGrid, XrdSample, BinaryPeakPattern, PhaseId) are frozen and
safe to share across threads.  The pipeline containers (PhaseCatalog,
MembershipTable, PhaseMapResult) are mutated only while a run or a merge
operation is constructing them; consumers treat them as read-only snapshots.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "XrdMapError",
    "ParameterError",
    "ContractViolation",
    "DatasetError",
    "QGrid",
    "XrdSample",
    "BinaryPeakPattern",
    "PhaseId",
    "Membership",
    "PurePhase",
    "PhaseCatalog",
    "MembershipTable",
    "PhaseMapResult",
    "COMPOSITION_TOL",
]

COMPOSITION_TOL = 1e-6


class XrdMapError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(XrdMapError):
    """Invalid parameter or argument combination."""


class ContractViolation(XrdMapError):
    """Input data does not satisfy an operation's contract."""


class DatasetError(XrdMapError):
    """Dataset-level inconsistency (mixed grids, malformed files)."""


@dataclass(frozen=True)
class QGrid:
    """Shared momentum-transfer axis (inverse angstrom), strictly increasing."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 2:
            raise ParameterError("Q grid needs at least 2 values")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ParameterError("Q grid must be strictly increasing")

    def __len__(self) -> int:
        return len(self.values)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.asarray(self.values, dtype=float)
        arr.setflags(write=False)
        return arr

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "QGrid":
        return cls(tuple(float(v) for v in values))


@dataclass(frozen=True, eq=False)
class XrdSample:
    """One measured 1D pattern: intensity vs. Q plus composition and wafer position."""

    id: str
    intensities: np.ndarray
    composition: tuple[float, float, float]
    wafer_pos: tuple[float, float]

    def __post_init__(self) -> None:
        arr = np.asarray(self.intensities, dtype=float)
        if arr.ndim != 1:
            raise ParameterError(f"sample {self.id!r}: intensities must be 1D")
        if not np.all(np.isfinite(arr)):
            raise ParameterError(f"sample {self.id!r}: non-finite intensity")
        if np.any(arr < 0):
            raise ParameterError(f"sample {self.id!r}: negative intensity")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "intensities", arr)
        comp = tuple(float(c) for c in self.composition)
        if len(comp) != 3 or any(c < 0 for c in comp):
            raise ParameterError(f"sample {self.id!r}: composition must be 3 non-negative fractions")
        if abs(sum(comp) - 1.0) > COMPOSITION_TOL:
            raise ParameterError(
                f"sample {self.id!r}: composition sums to {sum(comp):.8f}, expected 1"
            )
        object.__setattr__(self, "composition", comp)
        object.__setattr__(self, "wafer_pos", tuple(float(v) for v in self.wafer_pos))


@dataclass(frozen=True)
class BinaryPeakPattern:
    """Fixed-width bit vector marking peak presence per window.

    Stored as the sorted tuple of set-bit indices; `bits` materializes the
    0/1 vector.  `peak_locations` is the exact inverse of "set these bits in
    a zero vector of width `width`".
    """

    width: int
    peaks: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ParameterError("pattern width must be >= 1")
        pk = tuple(int(p) for p in self.peaks)
        if any(b <= a for a, b in zip(pk, pk[1:])):
            raise ParameterError("peak indices must be strictly increasing")
        if pk and (pk[0] < 0 or pk[-1] >= self.width):
            raise ParameterError("peak index out of range")
        object.__setattr__(self, "peaks", pk)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "BinaryPeakPattern":
        if any(b not in (0, 1) for b in bits):
            raise ParameterError("bits must be 0 or 1")
        return cls(len(bits), tuple(i for i, b in enumerate(bits) if b))

    @property
    def bits(self) -> tuple[int, ...]:
        out = [0] * self.width
        for p in self.peaks:
            out[p] = 1
        return tuple(out)

    @property
    def peak_count(self) -> int:
        return len(self.peaks)

    def peak_locations(self) -> tuple[int, ...]:
        """Strictly increasing window indices where the bit is set."""
        return self.peaks

    @cached_property
    def locations_array(self) -> np.ndarray:
        arr = np.asarray(self.peaks, dtype=np.intp)
        arr.setflags(write=False)
        return arr

    def bitstring(self) -> str:
        return "".join(str(b) for b in self.bits)


_PHASE_ID_RE = re.compile(r"^P(\d+)$")


@dataclass(frozen=True, order=True)
class PhaseId:
    """Identifier of a pure phase; mixed phases are sets of these."""

    index: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ParameterError("phase index must be non-negative")

    def __str__(self) -> str:
        return f"P{self.index}"

    @classmethod
    def parse(cls, text: str) -> "PhaseId":
        m = _PHASE_ID_RE.match(text.strip())
        if not m:
            raise ParameterError(f"not a phase id: {text!r}")
        return cls(int(m.group(1)))


# A sample's membership: empty = outlier, singleton = pure, >= 2 = mixed.
Membership = frozenset


@dataclass
class PurePhase:
    """Catalog entry: a pure phase, its representative pattern, and its pure members."""

    id: PhaseId
    representative: BinaryPeakPattern
    member_ids: list[str] = field(default_factory=list)

    @property
    def peak_count(self) -> int:
        return self.representative.peak_count

    def copy(self) -> "PurePhase":
        return PurePhase(self.id, self.representative, list(self.member_ids))


class PhaseCatalog:
    """Ordered set of pure phases; iteration follows insertion order."""

    def __init__(self, phases: Iterable[PurePhase] = (), th: int | None = None):
        self.phases: list[PurePhase] = list(phases)
        self.th = th
        self._next_index = 1 + max((p.id.index for p in self.phases), default=-1)

    def __iter__(self) -> Iterator[PurePhase]:
        return iter(self.phases)

    def __len__(self) -> int:
        return len(self.phases)

    @property
    def width(self) -> int | None:
        return self.phases[0].representative.width if self.phases else None

    def ids(self) -> list[PhaseId]:
        return [p.id for p in self.phases]

    def get(self, pid: PhaseId) -> PurePhase:
        for p in self.phases:
            if p.id == pid:
                return p
        raise ParameterError(f"unknown phase id {pid}")

    def has(self, pid: PhaseId) -> bool:
        return any(p.id == pid for p in self.phases)

    def add_phase(self, representative: BinaryPeakPattern, member_ids: Iterable[str]) -> PurePhase:
        if self.phases and representative.width != self.width:
            raise ContractViolation(
                f"pattern width {representative.width} != catalog width {self.width}"
            )
        phase = PurePhase(PhaseId(self._next_index), representative, list(member_ids))
        self._next_index += 1
        self.phases.append(phase)
        return phase

    def copy(self) -> "PhaseCatalog":
        dup = PhaseCatalog((p.copy() for p in self.phases), th=self.th)
        # keep allocating fresh ids even when the highest-id phase was removed
        dup._next_index = self._next_index
        return dup


class MembershipTable(dict):
    """Map sample id -> frozenset of pure PhaseIds (empty set = outlier)."""

    def pure_member_ids(self, pid: PhaseId) -> list[str]:
        want = frozenset({pid})
        return [sid for sid, ms in self.items() if ms == want]

    def outlier_ids(self) -> list[str]:
        return [sid for sid, ms in self.items() if not ms]

    def mixed_ids(self) -> list[str]:
        return [sid for sid, ms in self.items() if len(ms) >= 2]

    def copy(self) -> "MembershipTable":
        return MembershipTable(self)


@dataclass
class PhaseMapResult:
    """Catalog + memberships + the parameters that produced them.

    `params` fully determines the result given the dataset; `lineage` is the
    append-only log of merge operations applied after the initial run.
    """

    catalog: PhaseCatalog
    memberships: MembershipTable
    params: dict
    lineage: list[dict] = field(default_factory=list)

    def clone(self) -> "PhaseMapResult":
        return PhaseMapResult(
            catalog=self.catalog.copy(),
            memberships=self.memberships.copy(),
            params=dict(self.params),
            lineage=[dict(e) for e in self.lineage],
        )
