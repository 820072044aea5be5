"""Phase mapping for combinatorial XRD wafers.

Raw 1D diffraction patterns are smoothed, baseline-subtracted, and reduced
to binary peak representations; an incremental fuzzy comparison then groups
samples into pure phases and flags coexistence regions as mixed-phase
samples, followed by an interactive merge stage.
"""
from .core import (
    BinaryPeakPattern,
    ContractViolation,
    DatasetError,
    MembershipTable,
    ParameterError,
    PhaseCatalog,
    PhaseId,
    PhaseMapResult,
    PurePhase,
    QGrid,
    XrdMapError,
    XrdSample,
)
from .phasemap import (
    PhaseMapParams,
    average_representation,
    compute_mixed_phases,
    fuzzy_equals,
    run_incremental_phase_mapping,
)
from .signal import BinarizationParams, binarize_dataset, binarize_sample
from .merge import apply_hierarchical_merge, hierarchical_merge, manual_merge, phase_distance
from .synth import PlantedPhase, SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "BinaryPeakPattern",
    "BinarizationParams",
    "ContractViolation",
    "DatasetError",
    "MembershipTable",
    "ParameterError",
    "PhaseCatalog",
    "PhaseId",
    "PhaseMapParams",
    "PhaseMapResult",
    "PlantedPhase",
    "PurePhase",
    "QGrid",
    "SynthConfig",
    "XrdMapError",
    "XrdSample",
    "apply_hierarchical_merge",
    "average_representation",
    "binarize_dataset",
    "binarize_sample",
    "compute_mixed_phases",
    "fuzzy_equals",
    "generate",
    "hierarchical_merge",
    "manual_merge",
    "phase_distance",
    "run_incremental_phase_mapping",
    "__version__",
]
