"""Gaussian mixture modeling of joint (input, output) data and GMR."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConditionError, DimError, FitError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GaussianMixture:
    """C weighted Gaussians over ``[input; output]`` vectors.

    The first ``input_dim`` coordinates of every component are the input
    block (time, or a high-dimensional input), the rest the output block.
    """

    priors: np.ndarray  # (C,)
    means: np.ndarray  # (C, D)
    covs: np.ndarray  # (C, D, D)
    input_dim: int = 1
    log_likelihood: tuple = field(default=(), compare=False)

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=float).reshape(-1)
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        covs = np.asarray(self.covs, dtype=float).reshape(len(priors), means.shape[1], -1)
        if means.shape[0] != len(priors) or covs.shape[1] != covs.shape[2]:
            raise DimError("inconsistent mixture parameter shapes")
        if abs(priors.sum() - 1.0) > 1e-12:
            priors = priors / priors.sum()
        if not 0 < self.input_dim < means.shape[1]:
            raise DimError("input_dim must split the joint dimension")
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "log_likelihood", tuple(self.log_likelihood))

    @property
    def n_components(self) -> int:
        return len(self.priors)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def output_dim(self) -> int:
        return self.dim - self.input_dim


@dataclass(frozen=True)
class RefPoint:
    input: np.ndarray
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class Reference:
    """A probabilistic reference trajectory: inputs with Gaussian outputs.

    Stored as stacked arrays; iterating yields :class:`RefPoint` items.
    """

    inputs: np.ndarray  # (n, I)
    means: np.ndarray  # (n, O)
    covs: np.ndarray  # (n, O, O)

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        if means.ndim != 2:
            raise DimError("reference means must be a 2-D array (points, outputs)")
        n = means.shape[0]
        inputs = np.asarray(self.inputs, dtype=float)
        if n:
            inputs = inputs.reshape(n, -1)
        else:
            inputs = inputs.reshape(0, inputs.shape[1] if inputs.ndim == 2 else 1)
        o = means.shape[1]
        covs = np.asarray(self.covs, dtype=float).reshape(n, o, o)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    def __len__(self) -> int:
        return self.means.shape[0]

    def __getitem__(self, i) -> RefPoint:
        return RefPoint(self.inputs[i], self.means[i], self.covs[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def output_dim(self) -> int:
        return self.means.shape[1]

    @classmethod
    def from_points(cls, points) -> "Reference":
        points = list(points)
        if not points:
            raise ValueError("cannot infer dimensions from an empty point list")
        return cls(
            np.stack([np.atleast_1d(p.input) for p in points]),
            np.stack([p.mean for p in points]),
            np.stack([p.cov for p in points]),
        )


def _gauss_logpdf(x, mean, cov):
    """Log density of N(mean, cov) at rows of x; raises LinAlgError if not PD."""
    L = np.linalg.cholesky(cov)
    diff = np.linalg.solve(L, (x - mean).T)
    maha = np.sum(diff**2, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (maha + logdet + mean.shape[0] * LOG_2PI)


def _kmeans_pp_labels(data, C, rng):
    n = len(data)
    centers = [data[rng.integers(n)]]
    d2 = np.sum((data - centers[0]) ** 2, axis=1)
    for _ in range(1, C):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(data[idx])
        d2 = np.minimum(d2, np.sum((data - data[idx]) ** 2, axis=1))
    centers = np.array(centers)

    def assign(c):
        return np.argmin(((data[:, None, :] - c[None]) ** 2).sum(-1), axis=1)

    labels = assign(centers)
    # one Lloyd pass
    moved = np.array(
        [data[labels == k].mean(0) if np.any(labels == k) else centers[k] for k in range(C)]
    )
    new_labels = assign(moved)
    if len(np.unique(new_labels)) == C:
        labels = new_labels
    return labels


def fit_em(
    data,
    C: int,
    seed: int = 0,
    max_iter: int = 500,
    tol: float = 1e-10,
    cov_reg: float = 1e-6,
    input_dim: int = 1,
) -> GaussianMixture:
    """Fit a C-component mixture by EM.

    Initialized with k-means++ seeding and one Lloyd pass.  ``cov_reg * I``
    is added to every covariance in each M-step.  Stops when the relative
    log-likelihood improvement drops below ``tol`` or after ``max_iter``
    iterations; the per-iteration log-likelihoods are kept on the result.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise FitError("data must be a 2-D array (samples, dims)")
    n, D = data.shape
    if C < 1 or n < C:
        raise FitError(f"need at least C={C} samples, got {n}")
    if not 0 < input_dim < D:
        raise FitError("input_dim must split the joint dimension")
    rng = np.random.default_rng(seed)
    reg = cov_reg * np.eye(D)

    labels = _kmeans_pp_labels(data, C, rng)
    resp = np.zeros((n, C))
    resp[np.arange(n), labels] = 1.0
    global_cov = np.cov(data.T, bias=True).reshape(D, D) + reg

    priors, means, covs = _m_step(data, resp, reg, global_cov)
    history = []
    for _ in range(max_iter):
        try:
            log_p = np.column_stack(
                [np.log(priors[c]) + _gauss_logpdf(data, means[c], covs[c]) for c in range(C)]
            )
        except np.linalg.LinAlgError as exc:
            raise FitError("covariance lost positive definiteness") from exc
        ll_rows = logsumexp(log_p, axis=1)
        ll = float(ll_rows.sum())
        history.append(ll)
        resp = np.exp(log_p - ll_rows[:, None])
        if len(history) > 1 and (ll - history[-2]) <= tol * abs(history[-2]):
            break
        priors, means, covs = _m_step(data, resp, reg, None)

    return GaussianMixture(priors, means, covs, input_dim, tuple(history))


def _m_step(data, resp, reg, fallback_cov):
    n, D = data.shape
    nk = resp.sum(axis=0)
    priors = nk / n
    if np.any(priors < 1e-8):
        raise FitError("a mixture component collapsed (prior < 1e-8)")
    means = (resp.T @ data) / nk[:, None]
    covs = np.empty((len(nk), D, D))
    for c in range(len(nk)):
        diff = data - means[c]
        if fallback_cov is not None and nk[c] < 2:
            covs[c] = fallback_cov
            continue
        covs[c] = (resp[:, c, None] * diff).T @ diff / nk[c] + reg
        covs[c] = 0.5 * (covs[c] + covs[c].T)
        if np.min(np.linalg.eigvalsh(covs[c])) <= 0:
            raise FitError("covariance not positive definite despite regularization")
    return priors, means, covs


@dataclass(frozen=True)
class _Conditioner:
    """Per-component quantities reused across GMR queries."""

    log_priors: np.ndarray
    mu_in: np.ndarray
    mu_out: np.ndarray
    chol_in: np.ndarray
    gain: np.ndarray  # Sigma_oi Sigma_ii^-1, (C, O, I)
    cond_cov: np.ndarray  # (C, O, O)
    logdet_in: np.ndarray


def _conditioner(gmm: GaussianMixture) -> _Conditioner:
    i = gmm.input_dim
    s_ii = gmm.covs[:, :i, :i]
    s_oi = gmm.covs[:, i:, :i]
    s_oo = gmm.covs[:, i:, i:]
    chol = np.linalg.cholesky(s_ii)
    gain = np.transpose(np.linalg.solve(s_ii, np.transpose(s_oi, (0, 2, 1))), (0, 2, 1))
    cond_cov = s_oo - gain @ np.transpose(s_oi, (0, 2, 1))
    cond_cov = 0.5 * (cond_cov + np.transpose(cond_cov, (0, 2, 1)))
    logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    return _Conditioner(
        np.log(gmm.priors), gmm.means[:, :i], gmm.means[:, i:], chol, gain, cond_cov, logdet
    )


def responsibilities(gmm: GaussianMixture, inputs) -> np.ndarray:
    """h_c(x) for each input row, computed in the log domain; shape (n, C)."""
    inputs = np.asarray(inputs, dtype=float).reshape(-1, gmm.input_dim)
    return _responsibilities(_conditioner(gmm), inputs)


def _responsibilities(cd: _Conditioner, inputs) -> np.ndarray:
    C, I = cd.mu_in.shape
    log_w = np.empty((len(inputs), C))
    for c in range(C):
        z = np.linalg.solve(cd.chol_in[c], (inputs - cd.mu_in[c]).T)
        log_w[:, c] = cd.log_priors[c] - 0.5 * (
            np.sum(z**2, axis=0) + cd.logdet_in[c] + I * LOG_2PI
        )
    return np.exp(log_w - logsumexp(log_w, axis=1, keepdims=True))


def build_reference(gmm: GaussianMixture, inputs) -> Reference:
    """GMR over a sequence of inputs; moment-matched mean and covariance per input."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.size == 0:
        O = gmm.output_dim
        return Reference(np.zeros((0, gmm.input_dim)), np.zeros((0, O)), np.zeros((0, O, O)))
    inputs = inputs.reshape(-1, gmm.input_dim)
    cd = _conditioner(gmm)
    h = _responsibilities(cd, inputs)  # (n, C)
    # conditional means per component: (n, C, O)
    diff = inputs[:, None, :] - cd.mu_in[None]
    mu_bar = cd.mu_out[None] + np.einsum("coi,nci->nco", cd.gain, diff)
    mean = np.einsum("nc,nco->no", h, mu_bar)
    second = np.einsum("nc,ncp,ncq->npq", h, mu_bar, mu_bar) + np.einsum(
        "nc,cpq->npq", h, cd.cond_cov
    )
    cov = second - mean[:, :, None] * mean[:, None, :]
    cov = 0.5 * (cov + np.transpose(cov, (0, 2, 1)))
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise ConditionError("GMR produced non-finite values")
    return Reference(inputs, mean, cov)


def gmr_condition(gmm: GaussianMixture, x) -> RefPoint:
    """Condition the mixture on one input and moment-match a single Gaussian."""
    return build_reference(gmm, np.reshape(x, (1, gmm.input_dim)))[0]


def marginal_sample(gmm: GaussianMixture, n: int, seed: int = 0, return_labels: bool = False):
    """Ancestral samples from the input marginal; shape (n, input_dim).

    A component index is drawn with probability pi_c, then the input from
    that component's input block.  With ``return_labels`` the drawn
    component indices are returned as well.
    """
    rng = np.random.default_rng(seed)
    i = gmm.input_dim
    z = rng.choice(gmm.n_components, size=n, p=gmm.priors)
    eps = rng.standard_normal((n, i))
    chol = np.linalg.cholesky(gmm.covs[:, :i, :i])
    samples = gmm.means[z, :i] + np.einsum("nij,nj->ni", chol[z], eps)
    return (samples, z) if return_labels else samples
