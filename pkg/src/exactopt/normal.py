"""Standard normal CDF, quantile and PDF helpers.

Thin wrappers around scipy.special so the rest of the code base has a single
place that owns clamping behaviour and domain checks.
"""

import numpy as np
from scipy.special import ndtr, ndtri

# Probabilities are clamped to this range before quantile inversion so that
# extreme conditional bounds never produce infinities downstream.
PROB_CLIP = 1e-12


def std_normal_cdf(x):
    """Phi(x) for scalar or array input. Total function, handles +-inf."""
    return ndtr(x)


def std_normal_quantile(p):
    """Inverse of ``std_normal_cdf``. Requires 0 < p < 1 (element-wise)."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("quantile argument must lie strictly inside (0, 1)")
    out = ndtri(p)
    return float(out) if out.ndim == 0 else out


def clipped_quantile(p):
    """Quantile with probabilities clamped to [PROB_CLIP, 1 - PROB_CLIP]."""
    return ndtri(np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP))


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return float(out) if out.ndim == 0 else out


def normal_pdf(x, mean, var):
    """PDF of N(mean, var) at x."""
    sd = np.sqrt(var)
    return std_normal_pdf((np.asarray(x, dtype=float) - mean) / sd) / sd
