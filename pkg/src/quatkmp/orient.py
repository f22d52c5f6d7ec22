"""Time-driven orientation learning and adaptation on top of the kernel machine.

Demonstrated quaternions are projected to ``zeta = log(q * conj(q_a))``
around an auxiliary quaternion ``q_a``.  Each sample then carries
``eta = [zeta; zeta_dot]``.  A GMM/GMR reference over time is fitted by
the kernel machine, and predictions are mapped back with
``q = exp(zeta) * q_a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kmp
from .errors import DimError, DomainError, LengthError
from .gmm import GaussianMixture, Reference, build_reference, fit_em
from .quat import (
    QuatDemo,
    align_hemispheres,
    check_alignment,
    conj,
    integrate_omega,
    is_antipode,
    normalize,
    omegas_from_quats,
    qexp,
    qlog,
    qprod,
    quat_distance,
)

DEFAULT_DESIRED_COV = 1e-8
DEFAULT_DELTA_T = 1e-3


@dataclass(frozen=True)
class DesiredQuatState:
    """Desired orientation ``q`` and angular velocity ``omega`` at time ``t``."""

    t: float
    q: np.ndarray
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    cov: np.ndarray = field(default_factory=lambda: DEFAULT_DESIRED_COV * np.eye(6))

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 0:
            cov = float(cov) * np.eye(6)
        if cov.shape != (6, 6) or not np.allclose(cov, cov.T):
            raise DimError("desired-state covariance must be a symmetric 6x6 matrix")
        if np.min(np.linalg.eigvalsh(cov)) <= 0:
            raise DimError("desired-state covariance must be positive definite")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "q", normalize(self.q))
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float).reshape(3))
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class OrientationModel:
    """Fitted orientation primitive.

    ``reference`` is the 6-D ``[zeta; zeta_dot]`` reference the kernel machine
    was fitted on, desired points included; it is what :func:`adapt`
    extends when no other reference is given.
    """

    q_a: np.ndarray
    kmp: kmp.KmpModel
    gmm: GaussianMixture | None
    reference: Reference
    delta_t: float = DEFAULT_DELTA_T
    jerk: bool = False

    @property
    def lam(self) -> float:
        return self.kmp.lam

    @property
    def lam_a(self) -> float:
        return self.kmp.lam_a


@dataclass(frozen=True)
class OrientationTrajectory:
    times: np.ndarray
    quats: np.ndarray
    omegas: np.ndarray
    zetas: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.times)
        if len(self.quats) != n or len(self.omegas) != n:
            raise LengthError("trajectory fields must have equal lengths")

    def __len__(self) -> int:
        return len(self.times)


def _project(quats, q_a) -> np.ndarray:
    rel = qprod(quats, conj(q_a))
    if np.any(is_antipode(rel)):
        raise DomainError("a quaternion is antipodal to q_a; choose another auxiliary quaternion")
    return qlog(rel)


def transform_demos(demos: Sequence[QuatDemo], q_a) -> tuple[np.ndarray, np.ndarray]:
    """Stack all demos into ``(times (n,), eta (n, 6))``.

    ``zeta_dot`` is a forward difference per demo; its last sample repeats
    the previous one.
    """
    demos = list(demos)
    if not demos:
        raise ValueError("no demonstrations")
    check_alignment(demos)
    q_a = normalize(q_a)
    ts, etas = [], []
    for d in demos:
        zeta = _project(d.quats, q_a)
        if len(d) > 1:
            zd = np.diff(zeta, axis=0) / np.diff(d.times)[:, None]
            zd = np.vstack([zd, zd[-1:]])
        else:
            zd = np.zeros_like(zeta)
        ts.append(d.times)
        etas.append(np.hstack([zeta, zd]))
    return np.concatenate(ts), np.vstack(etas)


def _fit_reference(reference, spec, lam, lam_a, jerk):
    if lam_a > 0:
        return kmp.fit_accel_constrained(reference, spec, lam, lam_a, jerk=jerk)
    return kmp.fit(reference, spec, kmp.time_deriv(), lam)


def learn(
    demos: Sequence[QuatDemo],
    q_a=None,
    C: int = 5,
    spec: kmp.KernelSpec | None = None,
    lam: float = 1.0,
    lam_a: float = 0.0,
    grid_N: int | None = None,
    seed: int = 0,
    jerk: bool = False,
    delta_t: float = DEFAULT_DELTA_T,
) -> OrientationModel:
    """Learn an orientation primitive from time-indexed demonstrations.

    Demos are sign-aligned, projected around ``q_a`` (default: the first
    sample of the first demo), summarized by a ``C``-component GMM over
    ``(t, eta)`` and GMR on ``grid_N`` uniform times spanning the demos
    (default: the demo length).  With ``lam_a > 0`` the fit also penalizes
    angular acceleration (or jerk, with ``jerk=True``).
    """
    demos = align_hemispheres(demos)
    if not demos:
        raise ValueError("no demonstrations")
    spec = spec or kmp.KernelSpec()
    q_a = demos[0].quats[0] if q_a is None else normalize(q_a)
    times, eta = transform_demos(demos, q_a)
    gmm = fit_em(np.column_stack([times, eta]), C, seed=seed)
    grid_N = len(demos[0]) if grid_N is None else int(grid_N)
    grid = np.linspace(times.min(), times.max(), grid_N)
    reference = build_reference(gmm, grid)
    model = _fit_reference(reference, spec, lam, lam_a, jerk)
    return OrientationModel(q_a, model, gmm, reference, delta_t, jerk)


def transform_desired(
    points: Sequence[DesiredQuatState], q_a, delta_t: float = DEFAULT_DELTA_T
) -> list[kmp.DesiredEuclid]:
    """Map desired quaternion states to desired ``[zeta; zeta_dot]`` points.

    ``zeta_dot`` is the forward difference between the desired quaternion
    and the one reached by rotating it at ``omega`` for ``delta_t``.
    """
    q_a = normalize(q_a)
    out = []
    for p in points:
        zeta = _project(p.q, q_a)
        if np.any(p.omega):
            ahead = integrate_omega(p.q, p.omega, delta_t)
            zdot = (_project(ahead, q_a) - zeta) / delta_t
        else:
            zdot = np.zeros(3)
        out.append(kmp.DesiredEuclid(np.array([p.t]), np.concatenate([zeta, zdot]), p.cov))
    return out


def adapt(
    model: OrientationModel,
    desired: Sequence[DesiredQuatState],
    reference: Reference | None = None,
) -> OrientationModel:
    """Refit with desired states appended to the reference (a new model is returned)."""
    base = model.reference if reference is None else kmp.as_reference(reference)
    points = transform_desired(desired, model.q_a, model.delta_t)
    if not points:
        return model if reference is None else replace(
            model,
            kmp=_fit_reference(base, model.kmp.kernel, model.lam, model.lam_a, model.jerk),
            reference=base,
        )
    extended = kmp.adapt_reference(base, points)
    fitted = _fit_reference(extended, model.kmp.kernel, model.lam, model.lam_a, model.jerk)
    return replace(model, kmp=fitted, reference=extended)


def with_lam_a(model: OrientationModel, lam_a: float, jerk: bool | None = None) -> OrientationModel:
    """Refit the same reference with a different acceleration (or jerk) penalty."""
    jerk = model.jerk if jerk is None else jerk
    fitted = _fit_reference(model.reference, model.kmp.kernel, model.lam, lam_a, jerk)
    return replace(model, kmp=fitted, jerk=jerk)


def predict_eta(model: OrientationModel, times) -> np.ndarray:
    """``[zeta; zeta_dot]`` at each time, shape ``(n, 6)``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    return kmp.predict(model.kmp, times.reshape(-1, 1))[:, :6]


def rollout(model: OrientationModel, times) -> OrientationTrajectory:
    """Recover quaternions ``exp(zeta) * q_a`` and angular velocities at ``times``.

    Velocities are forward differences of consecutive recovered quaternions
    (the last one repeats).  A single time uses the predicted ``zeta_dot``
    over ``delta_t`` instead.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    eta = predict_eta(model, times)
    zeta = eta[:, :3]
    if np.any(np.linalg.norm(zeta, axis=1) >= np.pi):
        raise DomainError("predicted ||zeta|| reached pi; the trajectory left the log-map domain")
    quats = qprod(qexp(zeta), model.q_a)
    if len(times) == 1:
        ahead = qprod(qexp(zeta + model.delta_t * eta[:, 3:]), model.q_a)
        omegas = (2.0 / model.delta_t) * qlog(qprod(ahead, conj(quats)))
    else:
        omegas = omegas_from_quats(times, quats)
    return OrientationTrajectory(times, quats, omegas, zeta)


def metrics(traj: OrientationTrajectory) -> dict:
    """Smoothness costs ``c_q``, ``c_omega`` and ``c_omegad`` of a trajectory.

    Each is normalized by the trajectory length N.  Angular accelerations are
    forward differences of ``omega`` with the last one repeated.
    """
    n = len(traj)
    if n < 3:
        raise LengthError("metrics need at least three samples")
    times = np.asarray(traj.times, dtype=float)
    q = np.asarray(traj.quats, dtype=float)
    om = np.asarray(traj.omegas, dtype=float)
    c_q = np.sum(np.linalg.norm(np.diff(q, axis=0), axis=1)) / n
    c_w = np.sum(np.linalg.norm(np.diff(om, axis=0), axis=1)) / n
    wdot = np.diff(om, axis=0) / np.diff(times)[:, None]
    wdot = np.vstack([wdot, wdot[-1:]])
    c_wd = np.sum(np.sum(wdot**2, axis=1)) / n
    return {"c_q": float(c_q), "c_omega": float(c_w), "c_omegad": float(c_wd)}


def desired_errors(model: OrientationModel, desired: Sequence[DesiredQuatState]) -> list[dict]:
    """Quaternion distance and angular-velocity error at each desired time.

    The orientation at ``t`` and the velocity over ``[t, t + delta_t]`` come
    from a two-sample rollout.
    """
    out = []
    for p in desired:
        traj = rollout(model, [p.t, p.t + model.delta_t])
        out.append(_point_error(p, traj.quats[0], traj.omegas[0]))
    return out


def trajectory_desired_errors(
    traj: OrientationTrajectory, desired: Sequence[DesiredQuatState]
) -> list[dict]:
    """Like :func:`desired_errors` but read off the nearest trajectory sample."""
    times = np.asarray(traj.times, dtype=float)
    out = []
    for p in desired:
        i = int(np.argmin(np.abs(times - p.t)))
        out.append(_point_error(p, traj.quats[i], traj.omegas[i]))
    return out


def _point_error(p: DesiredQuatState, q, omega) -> dict:
    return {
        "t": p.t,
        "quat_distance": quat_distance(q, p.q),
        "omega_error": float(np.linalg.norm(np.asarray(omega) - p.omega)),
    }


@dataclass(frozen=True)
class TheoremReport:
    omega_const: np.ndarray  # predicted constant omega 2*Delta/dt
    linear_max_omega_dot: float
    linear_omega_err: float  # max |omega_n - 2 Delta / dt|
    quadratic_max_omega_ddot: float
    quadratic_step_err: float  # max |omega_{n+1} - omega_n - 2 Delta|

    def passed(self, tol1: float = 1e-8, tol2: float = 1e-6) -> bool:
        return self.linear_max_omega_dot <= tol1 and self.quadratic_max_omega_ddot <= tol2


def verify_theorems(delta, q_a, N: int, delta_t: float) -> TheoremReport:
    """Check numerically that constant-step and linearly growing-step zeta
    sequences give zero angular acceleration and zero angular jerk.
    """
    delta = np.asarray(delta, dtype=float).reshape(3)
    q_a = normalize(q_a)
    if np.linalg.norm((N + 2) * delta) >= np.pi:
        raise DomainError("(N + 2) * Delta leaves the log-map domain")
    if np.linalg.norm((N + 2) * (N + 1) * delta_t * delta / 2.0) >= np.pi:
        raise DomainError("the quadratic zeta sequence leaves the log-map domain")

    def omegas(zeta):
        q = qprod(qexp(zeta), q_a)
        return (2.0 / delta_t) * qlog(qprod(q[1:], conj(q[:-1])))

    n = np.arange(1, N + 3)
    w1 = omegas((n - 1)[:, None] * delta)  # N + 1 velocities
    wdot = np.diff(w1, axis=0) / delta_t
    expected = 2.0 * delta / delta_t

    n = np.arange(1, N + 4)
    w2 = omegas(((n - 1) * (n - 2) / 2.0 * delta_t)[:, None] * delta)  # N + 2 velocities
    wddot = np.diff(w2, n=2, axis=0) / delta_t**2
    return TheoremReport(
        omega_const=expected,
        linear_max_omega_dot=float(np.max(np.linalg.norm(wdot, axis=1))),
        linear_omega_err=float(np.max(np.linalg.norm(w1 - expected, axis=1))),
        quadratic_max_omega_ddot=float(np.max(np.linalg.norm(wddot, axis=1))),
        quadratic_step_err=float(np.max(np.linalg.norm(np.diff(w2, axis=0) - 2.0 * delta, axis=1))),
    )
