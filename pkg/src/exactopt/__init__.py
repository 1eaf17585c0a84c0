"""Expected-accuracy optimization for classifiers via Gaussian orthant
integrals, with surrogate-loss baselines and verification oracles."""

import os as _os

# Cap BLAS/OpenMP parallelism before numpy is first imported.
_threads = _os.environ.get("EXACT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from . import exact_loss, mvn_orthant, normal, oracles, surrogate, tabular, trainer
from .exact_loss import ExactConfig, LogitBatch, exact_loss_batch
from .mvn_orthant import (
    GenzConfig,
    OrthantProblem,
    orthant_probability,
    orthant_probability_gradient,
)
from .tabular import TabularDataset
from .trainer import LinearModel, TrainConfig, evaluate, train

__all__ = [
    "ExactConfig",
    "GenzConfig",
    "LinearModel",
    "LogitBatch",
    "OrthantProblem",
    "TabularDataset",
    "TrainConfig",
    "evaluate",
    "exact_loss",
    "exact_loss_batch",
    "mvn_orthant",
    "normal",
    "oracles",
    "orthant_probability",
    "orthant_probability_gradient",
    "surrogate",
    "tabular",
    "train",
    "trainer",
]

__version__ = "0.1.0"
