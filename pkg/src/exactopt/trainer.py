"""Linear-model training: SGD with momentum and weight decay, exponential
learning-rate decay, the noise-scale schedule and running-mean gradient
normalizer used by the expected-accuracy loss, and deterministic run history.

The model predicts C - 1 free logits via A x + b; the first class's logit is
pinned to zero, so a two-class model is an ordinary binary classifier.
"""

from dataclasses import dataclass, field

import numpy as np

from .exact_loss import ExactConfig, LogitBatch, exact_loss_batch
from .mvn_orthant import philox_rng
from .surrogate import HingeConfig, cross_entropy_batch, hinge_batch
from .tabular import TabularDataset

LOSS_KINDS = ("exact", "cross_entropy", "hinge")


@dataclass
class LinearModel:
    weights: np.ndarray  # (C - 1, d)
    bias: np.ndarray  # (C - 1,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError("weights must be (C-1, d) with matching bias")

    @property
    def n_classes(self):
        return self.weights.shape[0] + 1

    @property
    def n_features(self):
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, n_classes, n_features):
        return cls(np.zeros((n_classes - 1, n_features)), np.zeros(n_classes - 1))


@dataclass
class TrainConfig:
    loss_kind: str = "exact"
    lr_init: float = 1.0
    lr_final: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 1e-4
    l2: float = 0.0
    steps: int = 8000
    batch_size: int = 256
    sigma_init: float = 10.0
    sigma_final: float = 0.01
    margin: float | None = None
    grad_clip: float | None = None
    grad_norm_smoothing: float = 0.9
    sample_size: int = 16
    seed: int = 0
    bn_enabled: bool = True
    bn_mode: str = "per_class"
    grad_normalizer: bool = True  # applies to the exact loss only
    train_weights: bool = True  # freeze weights for bias-only toy fits
    eval_every: int = 0  # 0: train accuracy recorded at the final step only

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
        if self.sigma_final > self.sigma_init:
            raise ValueError("sigma_final must not exceed sigma_init")
        if self.lr_final > self.lr_init:
            raise ValueError("lr_final must not exceed lr_init")
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be positive")


@dataclass
class SigmaSchedule:
    sigma_init: float
    sigma_final: float
    total_steps: int


@dataclass
class GradientNormalizer:
    smoothing: float = 0.9
    running_mean_norm: float = 0.0
    initialized: bool = False


@dataclass
class RunHistory:
    records: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def predict_logits(model: LinearModel, x):
    """Score vector (0, A x + b) for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise ValueError("feature dimension mismatch")
    return np.concatenate(([0.0], model.weights @ x + model.bias))


def predict_logits_batch(model: LinearModel, features):
    features = np.asarray(features, dtype=float)
    if features.shape[1] != model.n_features:
        raise ValueError("feature dimension mismatch")
    free = features @ model.weights.T + model.bias
    return np.hstack([np.zeros((features.shape[0], 1)), free])


def _geometric_at(step, start, end, total):
    if total <= 1:
        return start
    return start * (end / start) ** (step / (total - 1))


def lr_at(step, config: TrainConfig):
    if not (0 <= step < config.steps):
        raise ValueError("step out of range")
    return _geometric_at(step, config.lr_init, config.lr_final, config.steps)


def sigma_at(step, schedule: SigmaSchedule):
    if not (0 <= step < schedule.total_steps):
        raise ValueError("step out of range")
    return _geometric_at(
        step, schedule.sigma_init, schedule.sigma_final, schedule.total_steps
    )


def normalize_gradient(g, state: GradientNormalizer):
    """Divide by a running mean of the gradient norm (exponential smoothing;
    the first call initializes the running mean to the observed norm)."""
    g = np.asarray(g, dtype=float)
    norm = float(np.linalg.norm(g))
    if not state.initialized:
        state.running_mean_norm = norm
        state.initialized = True
    else:
        state.running_mean_norm = (
            state.smoothing * state.running_mean_norm
            + (1.0 - state.smoothing) * norm
        )
    return g / (state.running_mean_norm + 1e-12)


def _batches(n_rows, batch_size, rng):
    """Seeded per-epoch shuffle; singleton tails merge into the previous batch."""
    order = rng.permutation(n_rows)
    out = [order[i : i + batch_size] for i in range(0, n_rows, batch_size)]
    if len(out) > 1 and len(out[-1]) == 1:
        out[-2] = np.concatenate([out[-2], out[-1]])
        out.pop()
    return out


def train(dataset: TabularDataset, config: TrainConfig, init_model=None):
    """Run the configured number of SGD steps and return (model, history).

    Fully deterministic given (dataset, config, init_model).  The exact-loss
    path wires batch normalization of the score means, the optional margin,
    the scheduled noise scale, and the gradient normalizer; baseline paths
    support global-norm gradient clipping instead.
    """
    n, d = dataset.features.shape
    n_classes = dataset.n_classes
    if n == 0:
        raise ValueError("dataset is empty")
    model = init_model or LinearModel.zeros(n_classes, d)
    if model.n_features != d or model.n_classes != n_classes:
        raise ValueError("init_model does not match the dataset shape")

    history = RunHistory()
    if config.loss_kind == "cross_entropy" and config.margin is not None:
        history.warnings.append("margin is ignored for cross_entropy")
    if config.loss_kind == "exact" and config.grad_clip is not None:
        history.warnings.append("grad_clip is ignored for the exact loss")

    schedule = SigmaSchedule(config.sigma_init, config.sigma_final, config.steps)
    normalizer = GradientNormalizer(smoothing=config.grad_norm_smoothing)
    hinge_cfg = HingeConfig(margin=config.margin if config.margin else 1.0)

    vel_w = np.zeros_like(model.weights)
    vel_b = np.zeros_like(model.bias)
    batch_rng = philox_rng(config.seed, 1)
    queue = []
    for step in range(config.steps):
        if not queue:
            queue = _batches(n, config.batch_size, batch_rng)
        idx = queue.pop(0)
        x = dataset.features[idx]
        y = dataset.labels[idx]
        logits = predict_logits_batch(model, x)

        sigma = np.nan
        if config.loss_kind == "exact":
            sigma = sigma_at(step, schedule)
            exact_cfg = ExactConfig(
                margin=config.margin,
                sample_size=config.sample_size,
                bn_enabled=config.bn_enabled and len(idx) >= 2,
                bn_mode=config.bn_mode,
                seed=config.seed,
            )
            loss, grad_logits, _ = exact_loss_batch(
                LogitBatch(logits, sigma), y, exact_cfg, step=step
            )
        elif config.loss_kind == "cross_entropy":
            loss, grad_logits = cross_entropy_batch(logits, y)
        else:
            loss, grad_logits = hinge_batch(logits, y, hinge_cfg)

        grad_w = grad_logits[:, 1:].T @ x
        grad_b = grad_logits[:, 1:].sum(axis=0)
        grad_norm = float(np.sqrt(np.sum(grad_w**2) + np.sum(grad_b**2)))

        if config.loss_kind == "exact" and config.grad_normalizer:
            flat = normalize_gradient(
                np.concatenate([grad_w.ravel(), grad_b]), normalizer
            )
            grad_w = flat[: grad_w.size].reshape(grad_w.shape)
            grad_b = flat[grad_w.size :]
        elif config.loss_kind != "exact" and config.grad_clip is not None:
            if grad_norm > config.grad_clip:
                scale = config.grad_clip / grad_norm
                grad_w = grad_w * scale
                grad_b = grad_b * scale

        if config.l2 > 0.0:
            grad_w = grad_w + config.l2 * model.weights
            grad_b = grad_b + config.l2 * model.bias
        if config.weight_decay > 0.0:
            grad_w = grad_w + config.weight_decay * model.weights
            grad_b = grad_b + config.weight_decay * model.bias
        if not config.train_weights:
            grad_w = np.zeros_like(grad_w)

        lr = lr_at(step, config)
        vel_w = config.momentum * vel_w + grad_w
        vel_b = config.momentum * vel_b + grad_b
        model.weights = model.weights - lr * vel_w
        model.bias = model.bias - lr * vel_b

        record = {
            "step": step,
            "lr": lr,
            "sigma": sigma,
            "loss": loss,
            "grad_norm": grad_norm,
            "train_accuracy": np.nan,
        }
        last = step == config.steps - 1
        if last or (config.eval_every > 0 and (step + 1) % config.eval_every == 0):
            record["train_accuracy"] = evaluate(model, dataset)
        history.records.append(record)
    return model, history


def evaluate(model: LinearModel, dataset: TabularDataset):
    """Fraction of rows whose logit argmax is unique and equals the label.
    Ties count as incorrect."""
    logits = predict_logits_batch(model, dataset.features)
    top = logits.max(axis=1, keepdims=True)
    is_top = logits == top
    unique = is_top.sum(axis=1) == 1
    pred = logits.argmax(axis=1) + 1
    return float(np.mean(unique & (pred == dataset.labels)))
