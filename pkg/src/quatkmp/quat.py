"""Unit-quaternion algebra and the log/exp maps between S^3 and R^3.

Quaternions are numpy arrays ``[w, x, y, z]`` (scalar first).  Every
function accepts a single quaternion of shape ``(4,)`` or a stack of
shape ``(..., 4)``; tangent vectors likewise have shape ``(..., 3)``.

The log map used here is ``log(q) = arccos(w) * u / ||u||`` (no factor of
two), so ``||log(q)|| < pi`` and ``exp`` is its inverse on the open ball of
radius pi.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AlignmentError, DomainError

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

ANTIPODE_TOL = 1e-9
ZERO_AXIS_TOL = 1e-12


def normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise DomainError("cannot normalize a zero quaternion")
    return q / n


def renormalize(q, tol: float = 1e-14):
    """Normalize only rows whose norm is off by more than ``tol``.

    Unlike :func:`normalize` this is a bitwise fixed point, so stored
    demonstrations survive repeated load/save cycles unchanged.
    """
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    return np.where(np.abs(n - 1.0) > tol, normalize(q), q)


def qprod(a, b):
    """Hamilton product ``a * b``, renormalized to unit norm."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, av = a[..., :1], a[..., 1:]
    bw, bv = b[..., :1], b[..., 1:]
    w = aw * bw - np.sum(av * bv, axis=-1, keepdims=True)
    v = aw * bv + bw * av + np.cross(av, bv)
    return normalize(np.concatenate([w, v], axis=-1))


def conj(q):
    q = np.asarray(q, dtype=float)
    return np.concatenate([q[..., :1], -q[..., 1:]], axis=-1)


def is_antipode(q) -> np.ndarray:
    """True where ``q`` is numerically ``[-1, 0, 0, 0]``."""
    q = np.asarray(q, dtype=float)
    return (q[..., 0] < -1.0 + ANTIPODE_TOL) & (
        np.linalg.norm(q[..., 1:], axis=-1) < ANTIPODE_TOL
    )


def qlog(q):
    """Log map S^3 -> R^3, excluding the antipode of the identity.

    Raises
    ------
    DomainError
        If any input is within 1e-9 of ``[-1, 0, 0, 0]``.
    """
    q = np.asarray(q, dtype=float)
    if np.any(is_antipode(q)):
        raise DomainError("log undefined at [-1, 0, 0, 0]")
    w = q[..., 0]
    u = q[..., 1:]
    un = np.linalg.norm(u, axis=-1)
    # atan2(|u|, w) == arccos(w) on S^3 but keeps full precision near w = +-1
    angle = np.arctan2(un, w)
    safe = np.where(un < ZERO_AXIS_TOL, 1.0, un)
    scale = np.where(un < ZERO_AXIS_TOL, 0.0, angle / safe)
    return u * scale[..., None]


def qexp(z):
    """Exp map R^3 -> S^3 on the open ball ``||z|| < pi``."""
    z = np.asarray(z, dtype=float)
    n = np.linalg.norm(z, axis=-1)
    if np.any(n >= np.pi):
        raise DomainError(f"exp requires ||z|| < pi, got {np.max(n):.6g}")
    safe = np.where(n == 0.0, 1.0, n)
    w = np.cos(n)
    v = z * (np.sin(n) / safe)[..., None]
    return normalize(np.concatenate([w[..., None], v], axis=-1))


def quat_distance(a, b):
    """Orientation distance in [0, 2*pi]: ``2 ||log(a * conj(b))||``.

    Returns ``2*pi`` when ``a * conj(b)`` is the antipode of the identity,
    so ``q`` and ``-q`` are maximally distant under this metric.
    """
    d = qprod(a, conj(b))
    anti = is_antipode(d)
    d = np.where(anti[..., None], IDENTITY, d)
    dist = 2.0 * np.linalg.norm(qlog(d), axis=-1)
    out = np.where(anti, 2.0 * np.pi, dist)
    return float(out) if out.ndim == 0 else out


def integrate_omega(q, omega, dt: float):
    """Advance ``q`` by angular velocity ``omega`` over ``dt``: exp(w dt/2) * q."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    return qprod(qexp(0.5 * dt * np.asarray(omega, dtype=float)), q)


def differentiate_omega(q_t, q_next, dt: float):
    """Angular velocity taking ``q_t`` to ``q_next`` in ``dt`` seconds."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    return (2.0 / dt) * qlog(qprod(q_next, conj(q_t)))


def omegas_from_quats(times, quats) -> np.ndarray:
    """Forward-difference angular velocities; the last sample repeats the previous one."""
    times = np.asarray(times, dtype=float)
    quats = np.asarray(quats, dtype=float)
    n = len(times)
    if n < 2:
        return np.zeros((n, 3))
    dt = np.diff(times)
    if np.any(dt <= 0):
        raise DomainError("times must be strictly increasing")
    rel = qprod(quats[1:], conj(quats[:-1]))
    om = (2.0 / dt)[:, None] * qlog(rel)
    return np.vstack([om, om[-1:]])


@dataclass(frozen=True)
class QuatDemo:
    """One demonstration: sample times and unit quaternions."""

    times: np.ndarray
    quats: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        quats = np.asarray(self.quats, dtype=float).reshape(-1, 4)
        if len(times) != len(quats):
            raise ValueError("times and quats must have equal length")
        if np.any(np.abs(np.linalg.norm(quats, axis=1) - 1.0) > 1e-6):
            raise DomainError("demonstration quaternions must be unit norm")
        if np.any(np.diff(times) <= 0):
            raise ValueError("demonstration times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "quats", renormalize(quats))

    def __len__(self) -> int:
        return len(self.times)


def check_alignment(demos: Sequence[QuatDemo]) -> None:
    """Raise AlignmentError unless both hemisphere conditions hold strictly."""
    for m, d in enumerate(demos):
        dots = np.sum(d.quats[:-1] * d.quats[1:], axis=1)
        if np.any(dots <= 0):
            n = int(np.argmax(dots <= 0))
            raise AlignmentError(f"demo {m}: q_{n} . q_{n + 1} <= 0")
    if len(demos) < 2:
        return
    if len({len(d) for d in demos}) != 1:
        raise AlignmentError("all demonstrations must have the same length")
    stack = np.stack([d.quats for d in demos])  # (M, N, 4)
    for m in range(1, len(demos)):
        for j in range(m):
            dots = np.sum(stack[j] * stack[m], axis=1)
            if np.any(dots <= 0):
                n = int(np.argmax(dots <= 0))
                raise AlignmentError(
                    f"demos {j} and {m} are not in a common hemisphere at step {n}"
                )


def align_hemispheres(demos: Sequence[QuatDemo]) -> list[QuatDemo]:
    """Flip quaternion signs so all demos share one hemisphere.

    Each demo is first flipped as a whole so that its initial sample agrees
    with the first demo's initial sample, then consecutive samples are
    flipped to keep ``q_n . q_{n+1} > 0``.  Cross-demo violations that remain
    cannot be repaired by sign choices and raise AlignmentError.
    """
    demos = list(demos)
    if not demos:
        return []
    lengths = {len(d) for d in demos}
    if len(lengths) != 1:
        raise AlignmentError("all demonstrations must have the same length")
    anchor = demos[0].quats[0]
    out = []
    for d in demos:
        q = d.quats.copy()
        if np.dot(q[0], anchor) < 0:
            q[0] = -q[0]
        for n in range(1, len(q)):
            if np.dot(q[n - 1], q[n]) < 0:
                q[n] = -q[n]
        out.append(QuatDemo(d.times, q))
    check_alignment(out)
    return out


def minimum_jerk(tau):
    """Normalized minimum-jerk profile 10 t^3 - 15 t^4 + 6 t^5 on [0, 1]."""
    tau = np.clip(np.asarray(tau, dtype=float), 0.0, 1.0)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


def _perturbation_basis(s):
    # low-frequency shapes; the first two move the end points, the third the middle
    return np.stack([np.cos(0.5 * np.pi * s), np.sin(0.5 * np.pi * s), np.sin(np.pi * s)])


def gen_minjerk_demos(
    key_orientations,
    duration: float = 10.0,
    N: int = 1000,
    M: int = 5,
    noise_scale: float = 0.05,
    seed: int = 0,
) -> list[QuatDemo]:
    """Synthetic orientation demonstrations built from minimum-jerk profiles.

    Keys are mapped to the tangent space at the first key, joined by
    minimum-jerk segments of equal duration (zero velocity and acceleration
    at every key), perturbed per demo by a random combination of smooth
    sinusoids of amplitude ``noise_scale`` and mapped back through ``qexp``.
    """
    keys = normalize(np.asarray(key_orientations, dtype=float).reshape(-1, 4))
    if len(keys) < 2:
        raise ValueError("need at least two key orientations")
    if N < 2 or M < 1:
        raise ValueError("need N >= 2 and M >= 1")
    base = keys[0]
    z_keys = qlog(qprod(keys, conj(base)))
    if np.any(np.linalg.norm(z_keys, axis=1) >= np.pi):
        raise DomainError("key orientations too far from the first key")

    times = np.linspace(0.0, duration, N)
    n_seg = len(keys) - 1
    u = times / duration * n_seg
    seg = np.minimum(u.astype(int), n_seg - 1)
    s = minimum_jerk(u - seg)
    z_mean = z_keys[seg] + s[:, None] * (z_keys[seg + 1] - z_keys[seg])

    rng = np.random.default_rng(seed)
    basis = _perturbation_basis(times / duration)  # (3, N)
    demos = []
    for _ in range(M):
        coeff = rng.standard_normal((3, 3))  # (basis, axis)
        z = z_mean + noise_scale * basis.T @ coeff
        demos.append(QuatDemo(times, qprod(qexp(z), base)))
    return align_hemispheres(demos)


def gen_rhythmic_demos(
    base=IDENTITY,
    amplitudes=((0.35, 0.2, 0.25), (0.1, 0.15, -0.05)),
    period: float = 10.0,
    N: int = 500,
    M: int = 5,
    noise_scale: float = 0.03,
    seed: int = 0,
) -> list[QuatDemo]:
    """Synthetic periodic orientation demonstrations over one period.

    Row ``h`` of ``amplitudes`` scales harmonic ``h + 1`` of a sinusoid in
    tangent space; each demo adds a random first-harmonic perturbation, so
    every demo stays exactly periodic.  Samples cover ``[0, period)``.
    """
    base = normalize(np.asarray(base, dtype=float))
    amps = np.atleast_2d(np.asarray(amplitudes, dtype=float))
    times = np.linspace(0.0, period, N, endpoint=False)
    phase = 2.0 * np.pi * times / period
    phases = np.array([0.0, 0.7, 1.9])
    z_mean = sum(
        np.sin((h + 1) * phase[:, None] + phases[None, :]) * amps[h] for h in range(len(amps))
    )
    rng = np.random.default_rng(seed)
    demos = []
    for _ in range(M):
        c = rng.standard_normal((2, 3))
        z = z_mean + noise_scale * (np.sin(phase)[:, None] * c[0] + np.cos(phase)[:, None] * c[1])
        demos.append(QuatDemo(times, qprod(qexp(z), base)))
    return align_hemispheres(demos)
