"""Svetlichny functional, unsharp joint measurements and no-signaling audits."""

__version__ = "0.1.0"

from .measure import (  # noqa: E402
    AdmissibilityError,
    BinaryPovm,
    JointPovm,
    Setting,
    busch_margin,
    equal_sharpness_max,
    joint_povm,
    projective_povm,
    unsharp_povm,
    verify_proportionality,
)
from .qcore import DensityMatrix, Direction, PreconditionError, make_ghz, partial_trace, random_state  # noqa: E402
from .svetlichny import (  # noqa: E402
    CorrelatorTable,
    SettingsGrid,
    SvetlichnyResult,
    bounds,
    correlator_table,
    parity_counts,
    sign_v,
    svetlichny_joint_value,
    svetlichny_value,
)

__all__ = [
    "AdmissibilityError",
    "BinaryPovm",
    "CorrelatorTable",
    "DensityMatrix",
    "Direction",
    "JointPovm",
    "PreconditionError",
    "Setting",
    "SettingsGrid",
    "SvetlichnyResult",
    "bounds",
    "busch_margin",
    "correlator_table",
    "equal_sharpness_max",
    "joint_povm",
    "make_ghz",
    "parity_counts",
    "partial_trace",
    "projective_povm",
    "random_state",
    "sign_v",
    "svetlichny_joint_value",
    "svetlichny_value",
    "unsharp_povm",
    "verify_proportionality",
]
