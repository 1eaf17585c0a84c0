"""Independent estimators used to cross-check the main implementation.

None of these share code with the sequential-conditioning estimator beyond
the RNG and the normal CDF/quantile primitives: the value oracle samples raw
score vectors and counts argmax hits, the gradient oracle uses the
log-derivative (score-function) estimator, and finite differences provide a
third route for gradients.
"""

from dataclasses import dataclass

import numpy as np

from .exact_loss import delta_apply, delta_transpose_apply
from .mvn_orthant import (
    OrthantEstimate,
    draw_uniforms,
    genz_products_structured,
    ones_shifted_chol_factors,
    philox_rng,
)
from .normal import normal_pdf

# Fixed 10-class benchmark problem for the integration comparison; the label
# is the argmax entry of the mean vector and the noise scale is 1.
BENCHMARK_MU = np.array([1.0, 2.0, 0.5, 10.0, 6.0, -3.0, -4.0, 5.0, 1.0, 0.0])
BENCHMARK_Y = int(np.argmax(BENCHMARK_MU)) + 1
BENCHMARK_SIGMA = 1.0
GROUND_TRUTH_SAMPLES = 1_000_000


@dataclass
class RmseReport:
    method: str  # genz | mc_value | exact_grad | reinforce_grad
    sample_size: int
    rmse: float
    n_trials: int = 1000

    def __post_init__(self):
        if self.rmse < 0.0:
            raise ValueError("rmse must be nonnegative")


def mc_correct_probability(mu, sigma, y, n, seed) -> OrthantEstimate:
    """Fraction of sampled score vectors whose unique argmax equals y."""
    mu = np.asarray(mu, dtype=float)
    rng = philox_rng(seed, 0)
    s = mu + sigma * rng.standard_normal((n, mu.shape[0]))
    hits = _unique_argmax_hits(s, y)
    value = float(np.mean(hits))
    stderr = float(np.sqrt(max(value * (1.0 - value), 0.0) / n))
    return OrthantEstimate(value=value, stderr=stderr, sample_size=n)


def _unique_argmax_hits(s, y):
    top = s.max(axis=-1, keepdims=True)
    unique = (s == top).sum(axis=-1) == 1
    return unique & (s.argmax(axis=-1) == y - 1)


def mc_orthant(mean, chol, n, seed) -> OrthantEstimate:
    """Direct sampling check of an orthant probability: t = mean + L z."""
    mean = np.asarray(mean, dtype=float)
    chol = np.asarray(chol, dtype=float)
    rng = philox_rng(seed, 0)
    z = rng.standard_normal((n, mean.shape[0]))
    t = mean + z @ chol.T
    hits = np.all(t >= 0.0, axis=1)
    value = float(np.mean(hits))
    stderr = float(np.sqrt(max(value * (1.0 - value), 0.0) / n))
    return OrthantEstimate(value=value, stderr=stderr, sample_size=n)


def reinforce_gradient(mu, sigma, y, n, seed):
    """Log-derivative gradient estimate of P(argmax = y) w.r.t. mu.

    Monte-Carlo average of indicator * (s - mu) / sigma^2.  Unbiased but
    high-variance; used only as a verification baseline.
    """
    mu = np.asarray(mu, dtype=float)
    rng = philox_rng(seed, 0)
    s = mu + sigma * rng.standard_normal((n, mu.shape[0]))
    hits = _unique_argmax_hits(s, y).astype(float)
    score = (s - mu) / sigma**2
    return (hits[:, None] * score).mean(axis=0)


def finite_difference(f, x, h=1e-3):
    """Central finite differences per coordinate.

    For stochastic f the caller must make f reuse the same seed at both
    evaluation points (common random numbers).
    """
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad


def grad_check(dims, trials=20, seed=0, sample_size=10_000, h=1e-3, corruption=0.0):
    """Compare analytic orthant-probability gradients against central finite
    differences under common random numbers, on random problems with the
    score-difference covariance.

    ``corruption`` scales the analytic gradient (nonzero values are used to
    verify the harness itself fails when it should).  Returns one record per
    (dim, trial) with the relative error.
    """
    rows = []
    for d in dims:
        a1, b1 = ones_shifted_chol_factors(d, 1.0)
        if d > 1:
            a2, b2 = ones_shifted_chol_factors(d - 1, 0.5)
            base = np.arange(d)
            idx = np.stack([np.delete(base, i) for i in range(d)])
        for t in range(trials):
            mean = philox_rng(seed, d * 1000 + t).normal(0.0, 1.0, d)
            rng_v = philox_rng(seed + 7919 * d + t, 0)
            # All 2d shifted evaluations share one uniform block (common
            # random numbers), so the difference quotient is smooth in h.
            u = draw_uniforms(rng_v, 1, sample_size, max(d - 1, 1))
            shifts = np.vstack([mean + h * np.eye(d), mean - h * np.eye(d)])
            vals = genz_products_structured(shifts, a1, b1, u).mean(axis=1)
            fd = (vals[:d] - vals[d:]) / (2.0 * h)

            if d == 1:
                inner = np.ones(1)
            else:
                mhat = mean[idx] - 0.5 * mean[:, None]
                rng_g = philox_rng(seed + 7919 * d + t, 1)
                u_g = draw_uniforms(rng_g, d, sample_size, max(d - 2, 1))
                inner = genz_products_structured(mhat, a2, b2, u_g).mean(axis=1)
            analytic = normal_pdf(0.0, mean, 2.0) * inner * (1.0 + corruption)

            rel = float(
                np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-12)
            )
            rows.append({"dim": d, "trial": t, "rel_error": rel})
    return rows


def _benchmark_m():
    return delta_apply(BENCHMARK_MU, BENCHMARK_Y) / BENCHMARK_SIGMA


def _genz_values(m, size, n_trials, seed):
    d = m.shape[0]
    alphas, betas = ones_shifted_chol_factors(d, 1.0)
    u = draw_uniforms(philox_rng(seed, 0), n_trials, size, max(d - 1, 1))
    means = np.broadcast_to(m, (n_trials, d))
    return genz_products_structured(means, alphas, betas, u).mean(axis=1)


def _exact_gradients_m(m, size, n_trials, seed):
    """Analytic mean-gradient estimates: one conditional integral per
    coordinate, all sharing the conditional covariance I + ones / 2."""
    d = m.shape[0]
    base = np.arange(d)
    idx = np.stack([np.delete(base, i) for i in range(d)])
    mhat = m[idx] - 0.5 * m[:, None]  # (d, d-1)
    alphas, betas = ones_shifted_chol_factors(d - 1, 0.5)
    u = draw_uniforms(philox_rng(seed, 1), n_trials * d, size, max(d - 2, 1))
    means = np.broadcast_to(mhat, (n_trials, d, d - 1)).reshape(n_trials * d, d - 1)
    inner = (
        genz_products_structured(means, alphas, betas, u)
        .mean(axis=1)
        .reshape(n_trials, d)
    )
    return normal_pdf(0.0, m, 2.0) * inner


def benchmark_ground_truth(seed=123456789):
    """Reference value (argmax sampling) and mu-space gradient (analytic route
    at a large sample size) for the fixed benchmark problem."""
    value = mc_correct_probability(
        BENCHMARK_MU, BENCHMARK_SIGMA, BENCHMARK_Y, GROUND_TRUTH_SAMPLES, seed
    ).value
    m = _benchmark_m()
    grad_m = np.empty_like(m)
    d = m.shape[0]
    alphas, betas = ones_shifted_chol_factors(d - 1, 0.5)
    for i in range(d):
        mhat = np.delete(m, i) - 0.5 * m[i]
        u = draw_uniforms(philox_rng(seed, 10 + i), 1, GROUND_TRUTH_SAMPLES, d - 2)
        inner = float(
            genz_products_structured(mhat[None, :], alphas, betas, u).mean()
        )
        grad_m[i] = normal_pdf(0.0, m[i], 2.0) * inner
    grad_mu = delta_transpose_apply(grad_m, BENCHMARK_Y) / BENCHMARK_SIGMA
    return value, grad_mu


def rmse_benchmark(sample_sizes, n_trials=1000, seed=0):
    """RMSE of each estimator against ground truth on the fixed benchmark
    problem, per sample size.  Trials differ only in their derived seeds."""
    if not sample_sizes:
        raise ValueError("sample_sizes must be nonempty")
    m = _benchmark_m()
    d = m.shape[0]
    c = BENCHMARK_MU.shape[0]
    truth_value, truth_grad = benchmark_ground_truth()

    reports = []
    for k, size in enumerate(sample_sizes):
        values = _genz_values(m, size, n_trials, seed=(seed + 1) * 1000 + k)
        reports.append(RmseReport(
            "genz", size, float(np.sqrt(np.mean((values - truth_value) ** 2))),
            n_trials,
        ))

        rng = philox_rng(seed, 100 + k)
        s = BENCHMARK_MU + BENCHMARK_SIGMA * rng.standard_normal((n_trials, size, c))
        mc_vals = _unique_argmax_hits(s, BENCHMARK_Y).mean(axis=1)
        reports.append(RmseReport(
            "mc_value", size, float(np.sqrt(np.mean((mc_vals - truth_value) ** 2))),
            n_trials,
        ))

        grads_m = _exact_gradients_m(m, size, n_trials, seed=(seed + 1) * 2000 + k)
        err2 = np.empty(n_trials)
        for t in range(n_trials):
            g_mu = delta_transpose_apply(grads_m[t], BENCHMARK_Y) / BENCHMARK_SIGMA
            err2[t] = np.mean((g_mu - truth_grad) ** 2)
        reports.append(RmseReport(
            "exact_grad", size, float(np.sqrt(np.mean(err2))), n_trials,
        ))

        rng = philox_rng(seed, 200 + k)
        s = BENCHMARK_MU + BENCHMARK_SIGMA * rng.standard_normal((n_trials, size, c))
        hits = _unique_argmax_hits(s, BENCHMARK_Y).astype(float)
        score = (s - BENCHMARK_MU) / BENCHMARK_SIGMA**2
        r_grads = (hits[:, :, None] * score).mean(axis=1)
        err2 = np.mean((r_grads - truth_grad) ** 2, axis=1)
        reports.append(RmseReport(
            "reinforce_grad", size, float(np.sqrt(np.mean(err2))), n_trials,
        ))
    return reports
