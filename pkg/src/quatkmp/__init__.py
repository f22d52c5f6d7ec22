"""Orientation learning and adaptation with kernelized movement primitives."""

from .errors import (
    AlignmentError,
    ConditionError,
    DimError,
    DomainError,
    FitError,
    LayoutError,
    LengthError,
    QuatKmpError,
    SolveError,
)
from .gmm import GaussianMixture, Reference, RefPoint, build_reference, fit_em, gmr_condition
from .highdim import DesiredPose, PoseDemo, PoseModel, adapt_pose, learn_pose, predict_pose
from .kmp import BlockLayout, DesiredEuclid, KernelSpec, KmpModel
from .orient import (
    DesiredQuatState,
    OrientationModel,
    OrientationTrajectory,
    adapt,
    learn,
    metrics,
    rollout,
    verify_theorems,
)
from .quat import QuatDemo, qexp, qlog, qprod, quat_distance

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "BlockLayout",
    "ConditionError",
    "DesiredEuclid",
    "DesiredPose",
    "DesiredQuatState",
    "DimError",
    "DomainError",
    "FitError",
    "GaussianMixture",
    "KernelSpec",
    "KmpModel",
    "LayoutError",
    "LengthError",
    "OrientationModel",
    "OrientationTrajectory",
    "PoseDemo",
    "PoseModel",
    "QuatDemo",
    "QuatKmpError",
    "RefPoint",
    "Reference",
    "SolveError",
    "adapt",
    "adapt_pose",
    "build_reference",
    "fit_em",
    "gmr_condition",
    "learn",
    "learn_pose",
    "metrics",
    "predict_pose",
    "qexp",
    "qlog",
    "qprod",
    "quat_distance",
    "rollout",
    "verify_theorems",
]
