"""Kernelized movement primitives: covariance-weighted kernel ridge regression.

Outputs at each input are stacked derivative orders of a trajectory, e.g.
``[zeta; zeta_dot]`` for the ``time_deriv`` layout.  The basis functions are
never formed: the Gram blocks between derivative orders ``p`` and ``q`` are
forward finite differences of the scalar kernel,

    k_pq(a, b) = sum_{k,l} w_pk w_ql k(a + k delta, b + l delta) / delta^(p+q)

with ``w_pk = (-1)^(p-k) C(p, k)``.  Evaluated literally this cancels
catastrophically for small ``delta`` (1/delta^4 for the acceleration
blocks), so both supported kernels, being functions of ``r = a - b`` only,
are evaluated through the exact expansion

    k(r + m delta) / k(r) = exp(sum_j alpha_j(r) m^j) = sum_k beta_k(r) m^k,

which turns the stencil sum into ``k(r) sum_k beta_k P_k / delta^(p+q)``
with integer power sums ``P_k = sum w m^k`` that vanish for ``k < p+q``.
The leading cancellations are thereby done exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import DimError, LayoutError, SolveError
from .gmm import Reference

log = logging.getLogger(__name__)

MAX_CONDITION = 1e14
SERIES_EXTRA_TERMS = 20


@dataclass(frozen=True)
class KernelSpec:
    """Scalar kernel plus the finite-difference step for derivative blocks.

    ``gaussian``: ``exp(-length * ||a - b||^2)``.
    ``periodic``: ``exp(-length * sin^2(pi (a - b) / period))`` (1-D inputs only).
    """

    kind: str = "gaussian"
    length: float = 0.01
    period: float | None = None
    delta: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("gaussian", "periodic"):
            raise LayoutError(f"unknown kernel kind {self.kind!r}")
        if not self.length > 0:
            raise LayoutError("kernel length parameter must be positive")
        if self.kind == "periodic" and not (self.period and self.period > 0):
            raise LayoutError("periodic kernel needs a positive period")
        if not self.delta > 0:
            raise LayoutError("finite-difference step must be positive")

    @classmethod
    def gaussian(cls, length: float, delta: float = 1e-4) -> "KernelSpec":
        return cls("gaussian", length, None, delta)

    @classmethod
    def periodic(cls, length: float, period: float, delta: float = 1e-4) -> "KernelSpec":
        return cls("periodic", length, period, delta)


@dataclass(frozen=True)
class BlockLayout:
    """Which derivative orders are stacked per input, and their dimension.

    ``orders=(0, 1)`` with ``dim=3`` gives 6x6 blocks ``[zeta; zeta_dot]``;
    ``(0, 1, 2)`` adds the acceleration block; ``(0,)`` with ``dim=D`` is the
    plain multi-output kernel ``k(a, b) I_D``.
    """

    kind: str
    orders: tuple
    dim: int

    @property
    def block_dim(self) -> int:
        return len(self.orders) * self.dim

    @property
    def is_time(self) -> bool:
        return self.kind != "plain"


def time_deriv() -> BlockLayout:
    return BlockLayout("time_deriv", (0, 1), 3)


def time_accel() -> BlockLayout:
    return BlockLayout("time_accel", (0, 1, 2), 3)


def time_jerk() -> BlockLayout:
    return BlockLayout("time_jerk", (0, 1, 3), 3)


def plain(dim: int) -> BlockLayout:
    return BlockLayout("plain", (0,), int(dim))


LAYOUTS = {"time_deriv": time_deriv, "time_accel": time_accel, "time_jerk": time_jerk}


def layout_from_name(kind: str, dim: int | None = None) -> BlockLayout:
    if kind == "plain":
        if dim is None:
            raise LayoutError("plain layout needs an output dimension")
        return plain(dim)
    try:
        return LAYOUTS[kind]()
    except KeyError:
        raise LayoutError(f"unknown layout {kind!r}") from None


def _as_inputs(x, input_dim=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if input_dim in (None, 1) else x.reshape(1, -1)
    if input_dim is not None and x.shape[1] != input_dim:
        raise LayoutError(f"expected inputs of dimension {input_dim}, got {x.shape[1]}")
    return x


def kernel_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Scalar kernel between all rows of ``A`` and ``B``."""
    A = _as_inputs(A)
    B = _as_inputs(B, A.shape[1])
    if spec.kind == "gaussian":
        d2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
        return np.exp(-spec.length * d2)
    if A.shape[1] != 1:
        raise LayoutError("periodic kernel requires 1-D inputs")
    r = A[:, :1] - B[:, 0][None, :]
    return np.exp(-spec.length * np.sin(np.pi * r / spec.period) ** 2)


def scalar_kernel(spec: KernelSpec, a, b) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise LayoutError("kernel inputs must have matching dimensions")
    return float(kernel_matrix(spec, a.reshape(1, -1), b.reshape(1, -1))[0, 0])


def stencil(order: int) -> np.ndarray:
    """Unnormalized forward-difference weights for the given derivative order."""
    return np.array([(-1) ** (order - k) * comb(order, k) for k in range(order + 1)], dtype=float)


@lru_cache(maxsize=None)
def _power_sums(p: int, q: int, n_terms: int) -> tuple:
    # exact integer sums over the combined stencil offsets m = k - l
    wp = [(-1) ** (p - k) * comb(p, k) for k in range(p + 1)]
    wq = [(-1) ** (q - k) * comb(q, k) for k in range(q + 1)]
    sums = []
    for j in range(n_terms):
        s = 0
        for k, a in enumerate(wp):
            for l, b in enumerate(wq):
                s += a * b * (k - l) ** j
        sums.append(s)
    return tuple(float(s) for s in sums)


def _log_kernel_taylor(spec: KernelSpec, r: np.ndarray, n_terms: int) -> list:
    """Coefficients alpha_j (j = 0..n_terms-1) of log k(r + m delta) - log k(r) in m."""
    d = spec.delta
    alphas = [np.zeros_like(r) for _ in range(n_terms)]
    if spec.kind == "gaussian":
        if n_terms > 1:
            alphas[1] = -2.0 * spec.length * r * d
        if n_terms > 2:
            alphas[2] = np.full_like(r, -spec.length * d * d)
        return alphas
    w = 2.0 * np.pi / spec.period
    c, s = np.cos(w * r), np.sin(w * r)
    for j in range(1, n_terms):
        coef = (w * d) ** j / factorial(j)
        if j % 2 == 0:
            # 1 - cos(w x) term
            alphas[j] = -0.5 * spec.length * c * ((-1) ** (j // 2 + 1)) * coef
        else:
            alphas[j] = -0.5 * spec.length * s * ((-1) ** ((j - 1) // 2)) * coef
    return alphas


def _series_exp(alphas: list) -> list:
    # coefficients of exp(sum_j alpha_j m^j) as a power series in m
    n = len(alphas)
    betas = [np.ones_like(alphas[0])]
    for k in range(1, n):
        acc = np.zeros_like(alphas[0])
        for i in range(1, k + 1):
            if np.any(alphas[i]):
                acc = acc + i * alphas[i] * betas[k - i]
        betas.append(acc / k)
    return betas


def derivative_blocks(spec: KernelSpec, orders, A, B) -> np.ndarray:
    """Finite-difference kernel blocks ``S[p, q]`` between all input pairs.

    Returns an array of shape ``(len(orders), len(orders), len(A), len(B))``
    whose entry ``[p, q, i, j]`` is the order-``orders[p]`` (in the first
    argument) / order-``orders[q]`` (in the second) stencil of the kernel.
    """
    orders = tuple(orders)
    A = _as_inputs(A)
    B = _as_inputs(B, A.shape[1])
    P = len(orders)
    base = kernel_matrix(spec, A, B)
    out = np.empty((P, P, len(A), len(B)))
    if max(orders) == 0:
        out[0, 0] = base
        return out
    if A.shape[1] != 1:
        raise LayoutError("derivative blocks require 1-D (time) inputs")
    r = A[:, :1] - B[:, 0][None, :]
    n_terms = 2 * max(orders) + SERIES_EXTRA_TERMS
    betas = _series_exp(_log_kernel_taylor(spec, r, n_terms))
    for a, p in enumerate(orders):
        for b, q in enumerate(orders):
            if p == 0 and q == 0:
                out[a, b] = base
                continue
            sums = _power_sums(p, q, n_terms)
            acc = np.zeros_like(r)
            for k in range(p + q, n_terms):
                if sums[k]:
                    acc += betas[k] * sums[k]
            out[a, b] = base * acc / spec.delta ** (p + q)
    return out


def derivative_kernel_direct(spec: KernelSpec, p: int, q: int, a: float, b: float) -> float:
    """Literal stencil sum of kernel evaluations; only accurate for large delta."""
    d = spec.delta
    wp, wq = stencil(p), stencil(q)
    total = 0.0
    for k, x in enumerate(wp):
        for l, y in enumerate(wq):
            total += x * y * scalar_kernel(spec, [a + k * d], [b + l * d])
    return total / d ** (p + q)


def _expand(S: np.ndarray, dim: int) -> np.ndarray:
    # (P, P, n, m) -> (n*P*dim, m*P*dim), identity over the spatial dimension
    P, _, n, m = S.shape
    full = np.zeros((n, P, dim, m, P, dim))
    St = S.transpose(2, 0, 3, 1)
    for a in range(dim):
        full[:, :, a, :, :, a] = St
    return full.reshape(n * P * dim, m * P * dim)


def block_kernel(spec: KernelSpec, layout: BlockLayout, a, b) -> np.ndarray:
    """The ``block_dim x block_dim`` kernel matrix between two inputs."""
    a = np.atleast_1d(np.asarray(a, dtype=float)).reshape(1, -1)
    b = np.atleast_1d(np.asarray(b, dtype=float)).reshape(1, -1)
    if a.shape != b.shape:
        raise LayoutError("kernel inputs must have matching dimensions")
    if layout.is_time and a.shape[1] != 1:
        raise LayoutError(f"{layout.kind} layout requires scalar time inputs")
    S = derivative_blocks(spec, layout.orders, a, b)
    return _expand(S, layout.dim)


def gram_matrix(spec: KernelSpec, layout: BlockLayout, inputs) -> np.ndarray:
    inputs = _as_inputs(inputs)
    if layout.is_time and inputs.shape[1] != 1:
        raise LayoutError(f"{layout.kind} layout requires scalar time inputs")
    S = derivative_blocks(spec, layout.orders, inputs, inputs)
    K = _expand(S, layout.dim)
    K += K.T
    K *= 0.5
    return K


@dataclass(frozen=True)
class KmpModel:
    """A fitted kernel machine; ``dual_coeffs = (K + lam * Sigma)^-1 mu``."""

    train_inputs: np.ndarray
    kernel: KernelSpec
    layout: BlockLayout
    lam: float
    dual_coeffs: np.ndarray
    lam_a: float = 0.0
    rcond: float = field(default=float("nan"), compare=False)

    @property
    def input_dim(self) -> int:
        return self.train_inputs.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layout.block_dim


def _solve_spd(A: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    anorm = np.linalg.norm(A, 1)
    try:
        c, lower = scipy.linalg.cho_factor(A, lower=True, overwrite_a=False, check_finite=False)
        rcond, info = lapack.dpocon(c, anorm, uplo="L")
        solver = lambda: scipy.linalg.cho_solve((c, lower), rhs, check_finite=False)  # noqa: E731
    except np.linalg.LinAlgError:
        log.info("Cholesky failed; falling back to pivoted LU")
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
        rcond, info = lapack.dgecon(lu, anorm, norm="1")
        solver = lambda: scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)  # noqa: E731
    if info != 0 or not rcond > 1.0 / MAX_CONDITION:
        raise SolveError(f"K + lam*Sigma is numerically singular (rcond={rcond:.3g})")
    x = solver()
    if not np.all(np.isfinite(x)):
        raise SolveError("non-finite dual coefficients")
    return x, float(rcond)


def fit(reference, spec: KernelSpec, layout: BlockLayout, lam: float, lam_a: float = 0.0) -> KmpModel:
    """Solve ``(K + lam * blockdiag(Sigma_n)) x = mu`` for the dual coefficients."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    reference = as_reference(reference)
    if reference is None or len(reference) == 0:
        raise ValueError("reference trajectory is empty")
    if reference.output_dim != layout.block_dim:
        raise DimError(
            f"reference outputs have dim {reference.output_dim}, layout expects {layout.block_dim}"
        )
    n, bd = len(reference), layout.block_dim
    A = gram_matrix(spec, layout, reference.inputs)
    Ar = A.reshape(n, bd, n, bd)
    idx = np.arange(n)
    covs = 0.5 * (reference.covs + np.transpose(reference.covs, (0, 2, 1)))
    Ar[idx, :, idx, :] += lam * covs
    x, rcond = _solve_spd(A, reference.means.reshape(-1))
    log.debug("fitted %s KMP on %d points, rcond=%.3g", layout.kind, n, rcond)
    return KmpModel(reference.inputs.copy(), spec, layout, float(lam), x, float(lam_a), rcond)


def predict(model: KmpModel, queries) -> np.ndarray:
    """Predicted outputs at each query; shape ``(n_queries, block_dim)``.

    A single query (scalar time or 1-D input vector) returns a 1-D array.
    """
    q = np.asarray(queries, dtype=float)
    single = q.ndim == 0 or (q.ndim == 1 and model.input_dim > 1)
    q = _as_inputs(q, model.input_dim)
    layout = model.layout
    S = derivative_blocks(model.kernel, layout.orders, q, model.train_inputs)
    X = model.dual_coeffs.reshape(len(model.train_inputs), len(layout.orders), layout.dim)
    out = np.einsum("pqmj,jqa->mpa", S, X).reshape(len(q), layout.block_dim)
    return out[0] if single else out


@dataclass(frozen=True)
class DesiredEuclid:
    """A desired output ``mean`` at ``input`` with precision set by ``cov``."""

    input: np.ndarray
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float).reshape(len(mean), len(mean))
        if not np.allclose(cov, cov.T) or np.min(np.linalg.eigvalsh(cov)) <= 0:
            raise DimError("desired-point covariance must be symmetric positive definite")
        object.__setattr__(self, "input", np.atleast_1d(np.asarray(self.input, dtype=float)))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def as_reference(points) -> Reference | None:
    """Accept a Reference or a sequence of RefPoint / DesiredEuclid items."""
    if points is None or isinstance(points, Reference):
        return points
    points = list(points)
    if not points:
        return None
    return Reference.from_points(points)


def adapt_reference(reference, desired) -> Reference:
    """Append desired points after the reference points (indices N+1..N+H).

    Both arguments may be a :class:`Reference` or a list of points.
    """
    reference = as_reference(reference)
    desired = as_reference(desired)
    if desired is None or len(desired) == 0:
        if reference is None:
            raise ValueError("nothing to adapt: empty reference and no desired points")
        return reference
    if reference is None:
        return desired
    if len(reference) == 0:
        return desired
    if desired.output_dim != reference.output_dim:
        raise DimError("desired points and reference have different output dimensions")
    if desired.input_dim != reference.input_dim:
        raise DimError("desired points and reference have different input dimensions")
    for cov in desired.covs:
        if np.min(np.linalg.eigvalsh(0.5 * (cov + cov.T))) <= 0:
            raise DimError("desired-point covariance must be positive definite")
    return Reference(
        np.vstack([reference.inputs, desired.inputs]),
        np.vstack([reference.means, desired.means]),
        np.concatenate([reference.covs, desired.covs]),
    )


def augment_reference(reference: Reference, lam_a: float) -> Reference:
    """Append a zero-mean, ``(1/lam_a) I`` derivative target to every point."""
    if not lam_a > 0:
        raise ValueError("lam_a must be positive")
    n, o = len(reference), reference.output_dim
    means = np.hstack([reference.means, np.zeros((n, 3))])
    covs = np.zeros((n, o + 3, o + 3))
    covs[:, :o, :o] = reference.covs
    covs[:, o:, o:] = np.eye(3) / lam_a
    return Reference(reference.inputs, means, covs)


def fit_accel_constrained(
    reference: Reference, spec: KernelSpec, lam: float, lam_a: float, jerk: bool = False
) -> KmpModel:
    """Fit with an angular acceleration (or, with ``jerk``, jerk) penalty.

    ``reference`` holds 6-D ``[zeta; zeta_dot]`` outputs.  Each point gets
    an extra zero target on the second (third) derivative with covariance
    ``I / lam_a``, and the model is fitted with the matching layout.
    """
    reference = as_reference(reference)
    if reference is None or len(reference) == 0:
        raise ValueError("reference trajectory is empty")
    if reference.output_dim != 6:
        raise DimError("acceleration-constrained fitting needs [zeta; zeta_dot] outputs")
    layout = time_jerk() if jerk else time_accel()
    return fit(augment_reference(reference, lam_a), spec, layout, lam, lam_a)
