"""Cross-entropy and multiclass hinge baselines with analytic gradients.

The hinge form is the sum-over-classes (Weston-Watkins) variant: for each
example it penalizes every class whose score comes within ``margin`` of the
true-class score.  With two classes and the first logit pinned to zero it
reduces exactly to the familiar binary max(0, 1 - y * f(x)).
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class HingeConfig:
    margin: float = 1.0

    def __post_init__(self):
        if self.margin <= 0.0:
            raise ValueError("margin must be positive")


def _check_labels(logits, labels):
    logits = np.asarray(logits, dtype=float)
    labels = np.asarray(labels, dtype=int)
    B, C = logits.shape
    if labels.shape != (B,):
        raise ValueError("labels must have one entry per row")
    if np.any(labels < 1) or np.any(labels > C):
        raise IndexError("labels must lie in 1..C")
    return logits, labels - 1


def cross_entropy_batch(logits, labels):
    """Mean softmax cross-entropy and its gradient (softmax - onehot) / B."""
    logits, y0 = _check_labels(logits, labels)
    B = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    rows = np.arange(B)
    log_probs = shifted - np.log(exp.sum(axis=1, keepdims=True))
    loss = -float(np.mean(log_probs[rows, y0]))
    grad = probs.copy()
    grad[rows, y0] -= 1.0
    grad /= B
    return loss, grad


def hinge_batch(logits, labels, config: HingeConfig):
    """Mean Weston-Watkins hinge loss and gradient; subgradient 0 at kinks."""
    logits, y0 = _check_labels(logits, labels)
    B, C = logits.shape
    rows = np.arange(B)
    true_scores = logits[rows, y0][:, None]
    violations = config.margin - (true_scores - logits)
    violations[rows, y0] = 0.0
    active = violations > 0.0
    loss = float(np.sum(np.where(active, violations, 0.0)) / B)
    grad = active.astype(float)
    grad[rows, y0] = -active.sum(axis=1)
    grad /= B
    return loss, grad
