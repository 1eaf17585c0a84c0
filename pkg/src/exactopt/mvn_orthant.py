"""Orthant probabilities of multivariate normal distributions and their
gradients with respect to the mean.

The estimator follows Genz's sequential-conditioning construction: the region
{t >= 0} with t = mean + L z (z standard normal) is rewritten as a product of
one-dimensional truncated-normal draws, each contributing the length of an
admissible probability interval.  Every per-sample contribution therefore lies
in [0, 1] and the sample mean is an unbiased estimate of the probability.

Two covariance paths exist:

* a general path that works with any lower-triangular Cholesky factor, and
* a structured fast path for matrices of the form I + c * ones(d, d), whose
  Cholesky factor has constant entries below the diagonal in each column
  (a single alpha/beta pair per column).

The score-difference covariance used by the expected-accuracy loss is
I + ones (diagonal 2, off-diagonal 1), and all of its conditional covariances
are I + ones/2, so the structured path covers the entire training workload.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .normal import clipped_quantile, normal_pdf, std_normal_cdf

RECONSTRUCTION_TOL = 1e-10
SAMPLERS = ("qmc", "plain")

_sobol_base_cache = {}


def _sobol_base(n, k):
    key = (n, k)
    if key not in _sobol_base_cache:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # non-power-of-2 draw counts are fine here
            _sobol_base_cache[key] = qmc.Sobol(d=k, scramble=False).random(n)
    return _sobol_base_cache[key]


def draw_uniforms(rng, batch, n, k, sampler="qmc"):
    """Uniform sample block of shape (batch, n, k).

    "plain": i.i.d. pseudo-random uniforms.
    "qmc": randomized quasi-Monte-Carlo — a shared Sobol base sequence with an
    independent uniform shift per batch row (Cranley-Patterson rotation).
    Each point is marginally uniform, so estimators stay unbiased, while the
    low-discrepancy structure sharply reduces integration error.
    """
    if sampler == "plain":
        return rng.random((batch, n, k))
    if sampler != "qmc":
        raise ValueError(f"unknown sampler {sampler!r}")
    base = _sobol_base(n, k)
    shift = rng.random((batch, 1, k))
    return (base[None, :, :] + shift) % 1.0


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix passed as a covariance has a non-positive pivot."""


def philox_rng(seed, stream=0):
    """Counter-based generator keyed by (seed, stream).

    Distinct (seed, stream) pairs yield independent streams; identical pairs
    yield bit-identical draws.
    """
    key = np.array([np.uint64(seed), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def cholesky(sigma):
    """Lower-triangular Cholesky factor of a symmetric positive definite matrix.

    Raises NotPositiveDefiniteError when any pivot is <= 0.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("expected a square matrix")
    d = sigma.shape[0]
    L = np.zeros((d, d))
    for j in range(d):
        pivot = sigma[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= 0.0:
            raise NotPositiveDefiniteError(
                f"pivot {pivot:.3e} at column {j} is not positive"
            )
        L[j, j] = np.sqrt(pivot)
        if j + 1 < d:
            L[j + 1 :, j] = (sigma[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def ones_shifted_chol_factors(dim, off=1.0):
    """Column factors (alphas, betas) of the Cholesky of I + off * ones(dim, dim).

    Each column j of the factor has alphas[j] on the diagonal and the constant
    betas[j] everywhere below it, so a d x d matrix never needs materializing.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    alphas = np.empty(dim)
    betas = np.empty(dim)
    acc = 0.0  # running sum of betas[:j] ** 2
    for j in range(dim):
        alphas[j] = np.sqrt(1.0 + off - acc)
        betas[j] = (off - acc) / alphas[j]
        acc += betas[j] ** 2
    return alphas, betas


def exact_sigma_cholesky(dim):
    """Cholesky factor of the score-difference covariance (2 on the diagonal,
    1 elsewhere), built from its closed-form column structure."""
    alphas, betas = ones_shifted_chol_factors(dim, off=1.0)
    L = np.zeros((dim, dim))
    for j in range(dim):
        L[j, j] = alphas[j]
        L[j + 1 :, j] = betas[j]
    return L


def _check_lower_triangular(L):
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError("chol must be a square matrix")
    if np.any(np.triu(L, k=1) != 0.0):
        raise ValueError("chol must be lower triangular")
    if np.any(np.diag(L) <= 0.0):
        raise NotPositiveDefiniteError("chol must have strictly positive diagonal")
    return L


@dataclass
class OrthantProblem:
    """Mean vector and Cholesky factor defining P(t >= 0), t ~ N(mean, L L^T)."""

    mean: np.ndarray
    chol: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.chol = _check_lower_triangular(self.chol)
        if self.chol.shape[0] != self.mean.shape[0]:
            raise ValueError("mean and chol dimensions do not match")

    @property
    def dim(self):
        return self.mean.shape[0]

    @classmethod
    def from_covariance(cls, mean, sigma):
        sigma = np.asarray(sigma, dtype=float)
        L = cholesky(sigma)
        if np.max(np.abs(L @ L.T - sigma)) > RECONSTRUCTION_TOL:
            raise NotPositiveDefiniteError("covariance reconstruction failed")
        return cls(mean=mean, chol=L)


@dataclass
class GenzConfig:
    sample_size: int = 16
    seed: int = 0
    sampler: str = "qmc"

    def __post_init__(self):
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")


@dataclass
class ConditionalNormal:
    """Parameters of the remaining coordinates given one coordinate fixed at 0."""

    mean: np.ndarray
    chol: np.ndarray


@dataclass
class OrthantEstimate:
    value: float
    stderr: float
    sample_size: int


def genz_products(means, chol, uniforms):
    """Per-sample Genz contributions for a batch of problems sharing one factor.

    means: (B, d); chol: (d, d) lower triangular; uniforms: (B, N, d - 1).
    Returns products of shape (B, N).
    """
    means = np.asarray(means, dtype=float)
    B, d = means.shape
    N = uniforms.shape[1]
    prod = np.ones((B, N))
    if d == 1:
        f = 1.0 - std_normal_cdf(-means[:, 0] / chol[0, 0])
        return np.broadcast_to(f[:, None], (B, N)).copy()
    z = np.zeros((B, N, d - 1))
    for i in range(d):
        shift = z[:, :, :i] @ chol[i, :i] if i > 0 else 0.0
        lower = (-means[:, i, None] - shift) / chol[i, i]
        di = std_normal_cdf(lower)
        fi = 1.0 - di
        prod *= fi
        if i < d - 1:
            z[:, :, i] = clipped_quantile(di + uniforms[:, :, i] * fi)
    return prod


def genz_products_structured(means, alphas, betas, uniforms):
    """Structured-covariance variant of ``genz_products``.

    Exploits the constant sub-diagonal columns of the Cholesky factor of
    I + c * ones: the partial inner product reduces to a running scalar sum.
    """
    means = np.asarray(means, dtype=float)
    B, d = means.shape
    N = uniforms.shape[1]
    prod = np.ones((B, N))
    if d == 1:
        f = 1.0 - std_normal_cdf(-means[:, 0] / alphas[0])
        return np.broadcast_to(f[:, None], (B, N)).copy()
    shift = np.zeros((B, N))
    for i in range(d):
        lower = (-means[:, i, None] - shift) / alphas[i]
        di = std_normal_cdf(lower)
        fi = 1.0 - di
        prod *= fi
        if i < d - 1:
            zi = clipped_quantile(di + uniforms[:, :, i] * fi)
            shift += betas[i] * zi
    return prod


def _estimate_from_products(prod):
    n = prod.shape[-1]
    value = float(np.mean(prod))
    if n > 1:
        stderr = float(np.std(prod, ddof=1) / np.sqrt(n))
    else:
        stderr = 0.0
    return OrthantEstimate(value=value, stderr=stderr, sample_size=n)


def orthant_estimate(problem: OrthantProblem, config: GenzConfig) -> OrthantEstimate:
    """Genz estimate of P(t >= 0) with its sample standard error."""
    d = problem.dim
    rng = philox_rng(config.seed, 0)
    u = draw_uniforms(rng, 1, config.sample_size, max(d - 1, 1), config.sampler)
    prod = genz_products(problem.mean[None, :], problem.chol, u)
    return _estimate_from_products(prod[0])


def orthant_probability(problem: OrthantProblem, config: GenzConfig) -> float:
    return orthant_estimate(problem, config).value


def conditional_parameters(mean, chol, i) -> ConditionalNormal:
    """Distribution of the remaining coordinates given coordinate ``i`` = 0.

    Works in the shifted frame where the orthant bound is at the origin, so the
    conditioning point is zero and the Schur-complement mean adjustment is
    -sigma[not-i, i] * mean[i] / sigma[i, i].
    """
    mean = np.asarray(mean, dtype=float).reshape(-1)
    chol = np.asarray(chol, dtype=float)
    d = mean.shape[0]
    if d < 2:
        raise ValueError("conditioning requires dimension >= 2")
    if not (0 <= i < d):
        raise IndexError(f"index {i} out of range for dimension {d}")
    sigma = chol @ chol.T
    keep = [j for j in range(d) if j != i]
    cross = sigma[keep, i]
    cond_mean = mean[keep] - cross * mean[i] / sigma[i, i]
    cond_sigma = sigma[np.ix_(keep, keep)] - np.outer(cross, cross) / sigma[i, i]
    return ConditionalNormal(mean=cond_mean, chol=cholesky(cond_sigma))


def orthant_probability_gradient(problem: OrthantProblem, config: GenzConfig):
    """Estimate of (P(t >= 0), dP/d mean).

    Each gradient entry is the univariate normal density at the bound times the
    orthant probability of the conditioned lower-dimensional normal; for d = 1
    the inner integral is the empty product, defined as 1.
    """
    d = problem.dim
    value = orthant_probability(problem, config)
    sigma_diag = np.einsum("ij,ij->i", problem.chol, problem.chol)
    grad = np.empty(d)
    for i in range(d):
        density = normal_pdf(0.0, problem.mean[i], sigma_diag[i])
        if d == 1:
            inner = 1.0
        else:
            cond = conditional_parameters(problem.mean, problem.chol, i)
            sub = OrthantProblem(mean=cond.mean, chol=cond.chol)
            inner = _conditional_prob(sub, config, i)
        grad[i] = density * inner
    return value, grad


def _conditional_prob(sub: OrthantProblem, config: GenzConfig, i: int) -> float:
    rng = philox_rng(config.seed, i + 1)
    u = draw_uniforms(rng, 1, config.sample_size, max(sub.dim - 1, 1), config.sampler)
    prod = genz_products(sub.mean[None, :], sub.chol, u)
    return float(np.mean(prod))
