"""Pose primitives driven by a multi-dimensional input instead of time.

Each sample pairs an input ``s`` (e.g. a tracked hand position) with a robot
pose ``xi = [p; log(q * conj(q_a))]``.  Inputs are z-scored per dimension
using the demonstration statistics before the GMM and the kernel see them;
a single Gaussian kernel length would otherwise be meaningless for inputs
of mixed scale.  No time derivatives are modeled, so the kernel machine uses
the plain ``k(s, s') I_6`` layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kmp
from .errors import DimError, DomainError, LayoutError
from .gmm import GaussianMixture, Reference, build_reference, fit_em, marginal_sample
from .quat import (
    IDENTITY,
    QuatDemo,
    align_hemispheres,
    conj,
    is_antipode,
    minimum_jerk,
    normalize,
    qexp,
    qlog,
    qprod,
    renormalize,
)


@dataclass(frozen=True)
class PoseDemo:
    inputs: np.ndarray  # (N, I)
    positions: np.ndarray  # (N, 3)
    quats: np.ndarray  # (N, 4)

    def __post_init__(self):
        quats = np.asarray(self.quats, dtype=float).reshape(-1, 4)
        n = len(quats)
        inputs = np.asarray(self.inputs, dtype=float).reshape(n, -1)
        positions = np.asarray(self.positions, dtype=float).reshape(n, 3)
        if np.any(np.abs(np.linalg.norm(quats, axis=1) - 1.0) > 1e-6):
            raise DomainError("demonstration quaternions must be unit norm")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "quats", renormalize(quats))

    def __len__(self) -> int:
        return len(self.quats)


@dataclass(frozen=True)
class DesiredPose:
    input: np.ndarray
    position: np.ndarray
    quat: np.ndarray
    cov: np.ndarray = field(default_factory=lambda: 1e-8 * np.eye(6))

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 0:
            cov = float(cov) * np.eye(6)
        if cov.shape != (6, 6) or not np.allclose(cov, cov.T) or np.min(np.linalg.eigvalsh(cov)) <= 0:
            raise DimError("desired-pose covariance must be symmetric positive definite 6x6")
        object.__setattr__(self, "input", np.atleast_1d(np.asarray(self.input, dtype=float)))
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "quat", normalize(self.quat))
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class PoseModel:
    """Fitted pose primitive; ``reference`` lives in standardized input space."""

    q_a: np.ndarray
    gmm: GaussianMixture | None
    kmp: kmp.KmpModel
    reference: Reference
    input_mean: np.ndarray
    input_scale: np.ndarray

    @property
    def input_dim(self) -> int:
        return len(self.input_mean)

    def standardize(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if s.shape[-1] != self.input_dim:
            raise DimError(f"expected inputs of dimension {self.input_dim}, got {s.shape[-1]}")
        return (s - self.input_mean) / self.input_scale


def _pose_coords(positions, quats, q_a) -> np.ndarray:
    rel = qprod(quats, conj(q_a))
    if np.any(is_antipode(rel)):
        raise DomainError("a quaternion is antipodal to q_a")
    return np.hstack([positions, qlog(rel)])


def _chain_signs(quats, anchor) -> np.ndarray:
    # demos of unequal length: align each to the anchor, then keep consecutive dots positive
    q = quats.copy()
    if np.dot(q[0], anchor) < 0:
        q[0] = -q[0]
    for n in range(1, len(q)):
        if np.dot(q[n - 1], q[n]) < 0:
            q[n] = -q[n]
    return q


def transform_pose_demos(demos: Sequence[PoseDemo], q_a=IDENTITY) -> tuple[np.ndarray, np.ndarray]:
    """Stack demos into raw inputs ``(n, I)`` and outputs ``xi`` ``(n, 6)``."""
    demos = list(demos)
    if not demos:
        raise ValueError("no demonstrations")
    if len({d.inputs.shape[1] for d in demos}) != 1:
        raise DimError("all demonstrations must share the input dimension")
    if len({len(d) for d in demos}) == 1:
        aligned = [a.quats for a in align_hemispheres([QuatDemo(np.arange(len(d)), d.quats) for d in demos])]
    else:
        aligned = [_chain_signs(d.quats, demos[0].quats[0]) for d in demos]
    q_a = normalize(q_a)
    S = np.vstack([d.inputs for d in demos])
    Xi = np.vstack([_pose_coords(d.positions, a, q_a) for d, a in zip(demos, aligned)])
    return S, Xi


def learn_pose(
    demos: Sequence[PoseDemo],
    q_a=IDENTITY,
    C: int = 5,
    spec: kmp.KernelSpec | None = None,
    lam: float = 2.0,
    sample_N: int | None = None,
    seed: int = 0,
) -> PoseModel:
    """GMM over ``(s, xi)``, GMR at inputs sampled from the input marginal,
    then a plain multi-output kernel fit.
    """
    spec = spec or kmp.KernelSpec.gaussian(1.0)
    if spec.kind != "gaussian":
        raise LayoutError("input-driven primitives need the Gaussian kernel")
    q_a = normalize(q_a)
    S, Xi = transform_pose_demos(demos, q_a)
    mean = S.mean(axis=0)
    scale = S.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Z = (S - mean) / scale
    I = S.shape[1]
    gmm = fit_em(np.hstack([Z, Xi]), C, seed=seed, input_dim=I)
    sample_N = len(demos[0]) if sample_N is None else int(sample_N)
    inputs = marginal_sample(gmm, sample_N, seed=seed)
    reference = build_reference(gmm, inputs)
    fitted = kmp.fit(reference, spec, kmp.plain(6), lam)
    return PoseModel(q_a, gmm, fitted, reference, mean, scale)


def transform_desired_poses(model: PoseModel, desired: Sequence[DesiredPose]) -> list[kmp.DesiredEuclid]:
    out = []
    for d in desired:
        xi = _pose_coords(d.position[None], d.quat[None], model.q_a)[0]
        out.append(kmp.DesiredEuclid(model.standardize(d.input), xi, d.cov))
    return out


def adapt_pose(
    model: PoseModel, desired: Sequence[DesiredPose], reference: Reference | None = None
) -> PoseModel:
    """Append desired poses to the reference and refit; returns a new model."""
    base = model.reference if reference is None else kmp.as_reference(reference)
    points = transform_desired_poses(model, desired)
    if not points and reference is None:
        return model
    extended = kmp.adapt_reference(base, points)
    fitted = kmp.fit(extended, model.kmp.kernel, model.kmp.layout, model.kmp.lam)
    return replace(model, kmp=fitted, reference=extended)


def predict_poses(model: PoseModel, inputs) -> tuple[np.ndarray, np.ndarray]:
    """Positions ``(n, 3)`` and quaternions ``(n, 4)`` for a batch of inputs."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    xi = kmp.predict(model.kmp, model.standardize(inputs))
    if np.any(np.linalg.norm(xi[:, 3:], axis=1) >= np.pi):
        raise DomainError("predicted orientation left the log-map domain")
    return xi[:, :3], qprod(qexp(xi[:, 3:]), model.q_a)


def predict_pose(model: PoseModel, s) -> tuple[np.ndarray, np.ndarray]:
    """Position and unit quaternion for one input vector."""
    s = np.asarray(s, dtype=float).reshape(1, -1)
    p, q = predict_poses(model, s)
    return p[0], q[0]


def handover_pose(s, q_a=IDENTITY) -> tuple[np.ndarray, np.ndarray]:
    """Smooth ground-truth map from a hand position to a robot pose.

    The robot reaches to a point just short of the hand and tilts its
    end-effector toward it.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    base = np.array([0.0, 0.0, 0.3])
    pos = base + 0.85 * (s - base) + 0.05 * np.sin(2.0 * s[:, ::-1])
    z = np.column_stack([0.6 * s[:, 1], -0.5 * s[:, 0], 0.4 * (s[:, 2] - 0.3) + 0.2 * s[:, 0]])
    return pos, qprod(qexp(z), normalize(q_a))


def gen_handover_demos(
    N: int = 200,
    M: int = 5,
    start=(0.2, -0.3, 0.2),
    end_center=(0.5, 0.1, 0.5),
    end_spread: float = 0.1,
    noise_scale: float = 0.005,
    seed: int = 0,
) -> list[PoseDemo]:
    """Synthetic handover demonstrations with 3-D hand-position inputs.

    In each demo the hand moves on a minimum-jerk path from ``start`` to a
    random end point around ``end_center``.  The robot pose follows
    :func:`handover_pose` of the current hand position plus small noise.
    """
    rng = np.random.default_rng(seed)
    start = np.asarray(start, dtype=float)
    s = minimum_jerk(np.linspace(0.0, 1.0, N))[:, None]
    demos = []
    for _ in range(M):
        end = np.asarray(end_center, dtype=float) + end_spread * rng.uniform(-1, 1, 3)
        bend = 0.05 * rng.standard_normal(3) * np.sin(np.pi * s)
        hand = start + s * (end - start) + bend
        pos, q = handover_pose(hand)
        pos = pos + noise_scale * rng.standard_normal(pos.shape)
        q = qprod(qexp(noise_scale * rng.standard_normal((N, 3))), q)
        demos.append(PoseDemo(hand, pos, q))
    return demos
