"""Fractal counterexample weights, maximal bounds and singular integral harnesses."""
from ._accel import BACKEND
from .errors import (
    BallNotContained,
    CertificateMissing,
    ConeTooNarrow,
    EmptySelection,
    FormatError,
    InvariantViolation,
    NoConeFound,
    NotOnSupport,
    OutOfParent,
    SingularityTooClose,
    SingularPoint,
    SWLError,
    TooDeep,
    TooLarge,
)
from .kernel import ConeData, KernelSpec, find_cones, parse_kernel, riesz_kernel
from .triadic import TriadicAddress
from .weight import DROP_TAIL, LEAF_UNIFORM, BuildParams, WeightTree, build, deserialize, serialize

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BallNotContained",
    "CertificateMissing",
    "ConeTooNarrow",
    "EmptySelection",
    "FormatError",
    "InvariantViolation",
    "NoConeFound",
    "NotOnSupport",
    "OutOfParent",
    "SingularityTooClose",
    "SingularPoint",
    "SWLError",
    "TooDeep",
    "TooLarge",
    "ConeData",
    "KernelSpec",
    "find_cones",
    "parse_kernel",
    "riesz_kernel",
    "TriadicAddress",
    "DROP_TAIL",
    "LEAF_UNIFORM",
    "BuildParams",
    "WeightTree",
    "build",
    "deserialize",
    "serialize",
    "__version__",
]
