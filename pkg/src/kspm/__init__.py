"""Sandpile fixed points with a tunable kick range.

Grains stack on column 0; a column whose slope exceeds ``p`` may fire,
sending ``p`` units of slope left and one unit ``p`` columns right.
Stabilization always reaches the same fixed point, whose slope tail
organizes into descending waves.  The subpackages cover simulation
(:mod:`kspm.stabilizer`), exact shot-vector dynamics (:mod:`kspm.dds`),
pattern analysis (:mod:`kspm.analyzer`), the spectral side
(:mod:`kspm.spectral`) and a CLI (:mod:`kspm.cli`).
"""

from .errors import (
    CapacityError,
    Divergence,
    InsufficientData,
    KSPMError,
    NoConvergence,
    NonIntegral,
    NotFireable,
    RecurrenceMismatch,
)
from .model import (
    HeightConfig,
    SlopeConfig,
    add_grain_col0,
    fire,
    fireable,
    grain_count,
    heights_from_slopes,
    is_stable,
    slopes_from_heights,
)
from .stabilizer import (
    Avalanche,
    FixedPoint,
    IncrementalStabilizer,
    density_column,
    global_density_column,
    leftmost_avalanche,
    stabilize,
    stabilize_incremental,
)

__version__ = "0.1.0"

__all__ = [
    "Avalanche",
    "CapacityError",
    "Divergence",
    "FixedPoint",
    "HeightConfig",
    "IncrementalStabilizer",
    "InsufficientData",
    "KSPMError",
    "NoConvergence",
    "NonIntegral",
    "NotFireable",
    "RecurrenceMismatch",
    "SlopeConfig",
    "add_grain_col0",
    "density_column",
    "fire",
    "fireable",
    "global_density_column",
    "grain_count",
    "heights_from_slopes",
    "is_stable",
    "leftmost_avalanche",
    "slopes_from_heights",
    "stabilize",
    "stabilize_incremental",
]
