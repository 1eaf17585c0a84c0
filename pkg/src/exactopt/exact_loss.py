"""Expected-accuracy loss: 1 - P(correct) for a batch of stochastic score
vectors, with analytic gradients for the mean scores and the noise scale.

The per-example correct-classification probability is the orthant probability
of the score differences, which always share the covariance I + ones
regardless of the label.  Training refinements are implemented here as well:
an element-wise margin clip on the score differences and batch normalization
of the mean-score branch (part of the loss, removed at inference).
"""

from dataclasses import dataclass

import numpy as np

from .mvn_orthant import (
    SAMPLERS,
    GenzConfig,
    OrthantProblem,
    draw_uniforms,
    exact_sigma_cholesky,
    genz_products_structured,
    ones_shifted_chol_factors,
    orthant_probability,
    philox_rng,
)
from .normal import normal_pdf


@dataclass
class LogitBatch:
    """Mean score vectors (B x C) and per-example noise scale sigma."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if self.mu.ndim != 2 or self.mu.shape[1] < 2:
            raise ValueError("mu must be a B x C matrix with C >= 2")
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim == 0:
            sigma = np.full(self.mu.shape[0], float(sigma))
        if sigma.shape != (self.mu.shape[0],):
            raise ValueError("sigma must be scalar or one value per batch row")
        if np.any(sigma <= 0.0):
            raise ValueError("sigma must be positive")
        self.sigma = sigma


@dataclass
class ExactConfig:
    margin: float | None = None
    sample_size: int = 16
    bn_enabled: bool = True
    bn_epsilon: float = 1e-5
    bn_mode: str = "per_class"  # or "global": scalar stats over the whole batch
    seed: int = 0
    sampler: str = "qmc"

    def __post_init__(self):
        if self.margin is not None and self.margin <= 0.0:
            raise ValueError("margin must be positive when present")
        if self.bn_mode not in ("per_class", "global"):
            raise ValueError("bn_mode must be 'per_class' or 'global'")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")


def _others_index(n_classes):
    """idx[k] lists the class indices other than k (0-based), in order."""
    base = np.arange(n_classes)
    return np.stack([np.delete(base, k) for k in range(n_classes)])


def delta_apply(mu_row, y):
    """Score differences mu[y] - mu[j] for j != y, without materializing the
    difference matrix. Labels are 1-indexed."""
    mu_row = np.asarray(mu_row, dtype=float)
    n = mu_row.shape[0]
    if not (1 <= y <= n):
        raise IndexError(f"label {y} out of range 1..{n}")
    k = y - 1
    return mu_row[k] - np.delete(mu_row, k)


def delta_transpose_apply(g, y):
    """Adjoint of ``delta_apply``: scatters a difference-space gradient back to
    class-score space.  Satisfies <delta_apply(mu, y), g> == <mu, result>."""
    g = np.asarray(g, dtype=float)
    n = g.shape[0] + 1
    if not (1 <= y <= n):
        raise IndexError(f"label {y} out of range 1..{n}")
    k = y - 1
    out = np.empty(n)
    out[:k] = -g[:k]
    out[k] = np.sum(g)
    out[k + 1 :] = -g[k:]
    return out


@dataclass
class BatchNormStats:
    mean: np.ndarray
    var: np.ndarray
    normalized: np.ndarray
    epsilon: float
    mode: str


def batch_normalize_mu(mu, epsilon, mode="per_class"):
    """Normalize the mean-score branch over the batch (no learned affine).

    per_class: each output dimension is centred/scaled over the batch axis.
    global: a single scalar mean/std over all B*C entries, as in a whole-tensor
    normalization of the score matrix.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape[0] < 2:
        raise ValueError("batch normalization requires at least 2 rows")
    if mode == "per_class":
        mean = mu.mean(axis=0)
        var = mu.var(axis=0)
    elif mode == "global":
        mean = mu.mean()
        var = mu.var()
    else:
        raise ValueError("mode must be 'per_class' or 'global'")
    normalized = (mu - mean) / np.sqrt(var + epsilon)
    return normalized, BatchNormStats(
        mean=np.asarray(mean), var=np.asarray(var), normalized=normalized,
        epsilon=epsilon, mode=mode,
    )


def batch_normalize_backward(grad_out, stats: BatchNormStats):
    """Full Jacobian backward pass through ``batch_normalize_mu``."""
    grad_out = np.asarray(grad_out, dtype=float)
    xhat = stats.normalized
    inv_std = 1.0 / np.sqrt(stats.var + stats.epsilon)
    if stats.mode == "per_class":
        n = grad_out.shape[0]
        s1 = grad_out.sum(axis=0)
        s2 = (grad_out * xhat).sum(axis=0)
    else:
        n = grad_out.size
        s1 = grad_out.sum()
        s2 = (grad_out * xhat).sum()
    return inv_std / n * (n * grad_out - s1 - xhat * s2)


def apply_margin(deltas, r):
    """Element-wise min(deltas, r); also returns the gradient mask (1 where the
    clip is inactive, with the subgradient at equality chosen as 1)."""
    deltas = np.asarray(deltas, dtype=float)
    clipped = np.minimum(deltas, r)
    mask = (deltas <= r).astype(float)
    return clipped, mask


def batch_value_and_grad(m, sample_size, seed, step=0, sampler="qmc"):
    """Orthant probabilities and mean-gradients for a batch of difference
    vectors sharing the covariance I + ones.

    m: (B, d).  Returns (P (B,), grad (B, d)).  The gradient uses the
    conditional decomposition: a univariate density at the bound times the
    orthant probability under the conditional covariance I + ones / 2, which is
    identical for every conditioned coordinate.
    """
    m = np.asarray(m, dtype=float)
    B, d = m.shape
    a1, b1 = ones_shifted_chol_factors(d, 1.0)
    rng_v = philox_rng(seed, 2 * step)
    u_v = draw_uniforms(rng_v, B, sample_size, max(d - 1, 1), sampler)
    values = genz_products_structured(m, a1, b1, u_v).mean(axis=1)

    density = normal_pdf(0.0, m, 2.0)
    if d == 1:
        inner = np.ones((B, 1))
    else:
        idx = _others_index(d)
        mhat = m[:, idx] - 0.5 * m[:, :, None]  # (B, d, d-1)
        a2, b2 = ones_shifted_chol_factors(d - 1, 0.5)
        rng_g = philox_rng(seed, 2 * step + 1)
        u_g = draw_uniforms(rng_g, B * d, sample_size, max(d - 2, 1), sampler)
        inner = (
            genz_products_structured(mhat.reshape(B * d, d - 1), a2, b2, u_g)
            .mean(axis=1)
            .reshape(B, d)
        )
    return values, density * inner


def correct_probability(mu_row, sigma, y, config: ExactConfig) -> float:
    """P(sampled argmax equals y) for a single example (no batch norm)."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    deltas = delta_apply(mu_row, y)
    if config.margin is not None:
        deltas, _ = apply_margin(deltas, config.margin)
    m = deltas / sigma
    problem = OrthantProblem(mean=m, chol=exact_sigma_cholesky(m.shape[0]))
    return orthant_probability(
        problem, GenzConfig(sample_size=config.sample_size, seed=config.seed)
    )


def exact_loss_batch(batch: LogitBatch, labels, config: ExactConfig, step=0):
    """Loss 1 - mean P(correct) with gradients for mu and sigma.

    Rows consume disjoint blocks of a single counter-based stream keyed by
    (config.seed, step), so loss evaluations at different steps are
    independent draws.  Returns (loss, grad_mu (B x C), grad_sigma (B,)).
    """
    labels = np.asarray(labels, dtype=int)
    mu = batch.mu
    sigma = batch.sigma
    B, C = mu.shape
    if labels.shape != (B,):
        raise ValueError("labels must have one entry per batch row")
    if np.any(labels < 1) or np.any(labels > C):
        raise IndexError("labels must lie in 1..C")
    y0 = labels - 1

    if config.bn_enabled:
        mu_n, bn_stats = batch_normalize_mu(mu, config.bn_epsilon, config.bn_mode)
    else:
        mu_n, bn_stats = mu, None

    idx = _others_index(C)
    rows = np.arange(B)
    deltas = mu_n[rows, y0][:, None] - mu_n[rows[:, None], idx[y0]]

    if config.margin is not None:
        clipped, mask = apply_margin(deltas, config.margin)
    else:
        clipped, mask = deltas, np.ones_like(deltas)

    m = clipped / sigma[:, None]
    values, grad_m = batch_value_and_grad(
        m, config.sample_size, config.seed, step, config.sampler
    )
    loss = 1.0 - float(np.mean(values))

    g = grad_m / sigma[:, None] * mask
    grad_mu_n = np.zeros((B, C))
    grad_mu_n[rows[:, None], idx[y0]] = -g
    grad_mu_n[rows, y0] = g.sum(axis=1)
    if bn_stats is not None:
        grad_mu = batch_normalize_backward(grad_mu_n, bn_stats)
    else:
        grad_mu = grad_mu_n
    grad_mu *= -1.0 / B

    grad_sigma = np.sum(m * grad_m, axis=1) / sigma / B
    return loss, grad_mu, grad_sigma
