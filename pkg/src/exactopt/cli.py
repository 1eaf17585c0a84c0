"""Command-line entry points: toy experiments, tabular training runs, the
integration benchmark, and the gradient checking harness.

All commands are deterministic given --seed and write plain CSV or key=value
text artifacts so results can be plotted or diffed with standard tools.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .exact_loss import apply_margin
from .normal import std_normal_cdf
from .oracles import grad_check, rmse_benchmark
from .surrogate import HingeConfig, cross_entropy_batch, hinge_batch
from .tabular import (
    BUILTIN_TABLES,
    TableSchema,
    load_builtin_table,
    load_csv,
    prepare,
    toy1,
    toy2,
)
from .trainer import LinearModel, TrainConfig, evaluate, train

GRAD_CHECK_THRESHOLD = 1e-2

# Keys accepted in a training run config file.  Everything else is an error.
RUN_CONFIG_KEYS = {
    "dataset", "schema", "out", "test_fraction", "split_seed",
    "loss_kind", "lr_init", "lr_final", "momentum", "weight_decay", "l2",
    "steps", "batch_size", "sigma_init", "sigma_final", "margin", "grad_clip",
    "grad_norm_smoothing", "sample_size", "seed", "bn_enabled", "bn_mode",
}

# Training settings for the toy problems.  The exact-loss runs use a margin:
# without it the optimum at large noise scales pushes every score toward the
# majority class and the threshold diverges.
TOY1_EXACT = dict(loss_kind="exact", lr_init=0.1, steps=500, batch_size=3,
                  sigma_init=10.0, sigma_final=0.01, margin=0.25,
                  bn_enabled=False, weight_decay=0.0, train_weights=False)
TOY1_SURROGATE = dict(lr_init=0.5, steps=2000, batch_size=3,
                      weight_decay=0.0, train_weights=False)
TOY2_EXACT = dict(loss_kind="exact", lr_init=0.1, steps=2000, batch_size=5,
                  sigma_init=2.0, sigma_final=0.01, margin=1.0,
                  bn_enabled=False, weight_decay=0.0)
TOY2_GRID_W = (-3.0, 3.0)
TOY2_GRID_B = (-15.0, 15.0)
TOY2_GRID_STEP = 0.05


def _write_keyvalues(path, pairs):
    with open(path, "w") as f:
        for key, value in pairs:
            f.write(f"{key}={value}\n")


def _write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(str(v) for v in row) + "\n")


def _write_history(path, history):
    rows = [
        (r["step"], f"{r['lr']:.8g}", f"{r['sigma']:.8g}", f"{r['loss']:.8g}",
         f"{r['grad_norm']:.8g}", f"{r['train_accuracy']:.8g}")
        for r in history.records
    ]
    _write_csv(path, ("step", "lr", "sigma", "loss", "grad_norm",
                      "train_accuracy"), rows)


def write_model(path, model: LinearModel):
    """Text format: dims header, then row-major weights, then the bias."""
    with open(path, "w") as f:
        f.write(f"classes {model.n_classes}\n")
        f.write(f"features {model.n_features}\n")
        f.write("weights\n")
        for row in model.weights:
            f.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        f.write("bias\n")
        f.write(" ".join(f"{v:.17g}" for v in model.bias) + "\n")


def read_model(path) -> LinearModel:
    lines = Path(path).read_text().splitlines()
    n_classes = int(lines[0].split()[1])
    n_features = int(lines[1].split()[1])
    assert lines[2] == "weights"
    rows = [[float(v) for v in lines[3 + i].split()] for i in range(n_classes - 1)]
    assert lines[3 + n_classes - 1] == "bias"
    bias = [float(v) for v in lines[4 + n_classes - 1].split()]
    model = LinearModel(np.array(rows), np.array(bias))
    if model.n_features != n_features:
        raise ValueError("model file header does not match its weight rows")
    return model


def _binary_losses_on_grid(logits_free, labels):
    """Cross-entropy and hinge losses for a grid of 2-class models.

    logits_free: (..., n) free-class logits for n data points (class-1 logit
    pinned to 0); labels: (n,) in {1, 2}.  Returns (ce, hinge) of shape (...).
    """
    sign = np.where(labels == 2, 1.0, -1.0)
    z = sign * logits_free
    ce = np.logaddexp(0.0, -z).sum(axis=-1)
    hinge = np.maximum(0.0, 1.0 - z).sum(axis=-1)
    return ce, hinge


def _toy1_exact_loss(b_grid, sigma, margin=None):
    """Closed-form exact loss on the toy-1 data for thresholds b (w fixed 1).

    Each point is a 2-class problem, so the correct-classification probability
    is the univariate Phi((delta or its clip) / (sigma * sqrt(2)))."""
    x = np.array([-0.25, 0.0, 0.25])
    sign = np.array([-1.0, -1.0, 1.0])
    deltas = sign * (x - b_grid[:, None])
    if margin is not None:
        deltas, _ = apply_margin(deltas, margin)
    return 1.0 - std_normal_cdf(deltas / (sigma * np.sqrt(2.0))).mean(axis=1)


def _toy1_report(loss, out, seed):
    ds = toy1()
    init = LinearModel(np.array([[1.0]]), np.array([0.0]))
    if loss == "exact":
        cfg = TrainConfig(seed=seed, **TOY1_EXACT)
    else:
        cfg = TrainConfig(loss_kind=loss, seed=seed, **TOY1_SURROGATE)
    model, history = train(ds, cfg, init_model=init)
    threshold = -model.bias[0]
    accuracy = evaluate(model, ds)
    _write_history(out / f"toy1_{loss}_history.csv", history)

    b_grid = np.round(np.arange(-2.0, 2.0 + 1e-9, 0.01), 10)
    logits_free = np.array([-0.25, 0.0, 0.25]) - b_grid[:, None]
    ce, hinge = _binary_losses_on_grid(logits_free, np.array([1, 1, 2]))
    sigmas = (10.0, 1.0, 0.3, 0.1)
    cols = [b_grid, ce, hinge]
    header = ["b", "ce", "hinge"]
    for s in sigmas:
        cols.append(_toy1_exact_loss(b_grid, s))
        header.append(f"exact_sigma_{s:g}")
        cols.append(_toy1_exact_loss(b_grid, s, margin=TOY1_EXACT["margin"]))
        header.append(f"exact_margin_sigma_{s:g}")
    _write_csv(out / "toy1_sweep.csv", header, zip(*cols))

    ce_argmin = float(b_grid[np.argmin(ce)])
    plateau = b_grid[np.abs(hinge - hinge.min()) < 1e-9]
    return [
        ("toy", 1), ("loss", loss), ("seed", seed),
        ("threshold", f"{threshold:.6f}"),
        ("accuracy", f"{accuracy:.6f}"),
        ("ce_sweep_minimizer", f"{ce_argmin:.2f}"),
        ("hinge_plateau_low", f"{plateau.min():.2f}"),
        ("hinge_plateau_high", f"{plateau.max():.2f}"),
    ]


def _toy2_report(loss, out, seed):
    ds = toy2()
    x = np.array([-6.0, -5.0, -4.0, 0.0, 2.0])
    labels = np.array([1, 2, 2, 1, 2])
    ws = np.round(np.arange(TOY2_GRID_W[0], TOY2_GRID_W[1] + 1e-9,
                            TOY2_GRID_STEP), 10)
    bs = np.round(np.arange(TOY2_GRID_B[0], TOY2_GRID_B[1] + 1e-9,
                            TOY2_GRID_STEP), 10)
    W, B = np.meshgrid(ws, bs, indexing="ij")
    logits_free = W[:, :, None] * x + B[:, :, None]
    ce, hinge = _binary_losses_on_grid(logits_free, labels)
    _write_csv(
        out / "toy2_sweep.csv", ("w", "b", "ce", "hinge"),
        zip(W.ravel(), B.ravel(),
            (f"{v:.8g}" for v in ce.ravel()),
            (f"{v:.8g}" for v in hinge.ravel())),
    )

    pairs = [("toy", 2), ("loss", loss), ("seed", seed)]
    if loss == "exact":
        model, history = train(ds, TrainConfig(seed=seed, **TOY2_EXACT))
        _write_history(out / "toy2_exact_history.csv", history)
        w, b = model.weights[0, 0], model.bias[0]
        pairs += [
            ("weight", f"{w:.6f}"), ("bias", f"{b:.6f}"),
            ("threshold", f"{-b / w:.6f}" if w != 0 else "nan"),
            ("accuracy", f"{evaluate(model, ds):.6f}"),
        ]
    else:
        grid_loss = ce if loss == "ce" else hinge
        i, j = np.unravel_index(np.argmin(grid_loss), grid_loss.shape)
        w, b = float(ws[i]), float(bs[j])
        model = LinearModel(np.array([[w]]), np.array([b]))
        pairs += [
            ("weight", f"{w:.2f}"), ("bias", f"{b:.2f}"),
            ("threshold", f"{-b / w:.6f}" if w != 0 else "nan"),
            ("grid_loss", f"{grid_loss[i, j]:.6f}"),
            ("accuracy", f"{evaluate(model, ds):.6f}"),
        ]
    return pairs


def cmd_toy(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    loss = {"ce": "cross_entropy", "hinge": "hinge", "exact": "exact"}[args.loss]
    if args.which == 1:
        pairs = _toy1_report(loss, out, args.seed)
    else:
        pairs = _toy2_report(args.loss, out, args.seed)
    _write_keyvalues(out / f"toy{args.which}_{args.loss}_report.txt", pairs)
    for key, value in pairs:
        print(f"{key}={value}")
    return 0


def load_run_config(path):
    """Parse and validate a training run config; collects every error."""
    errors = []
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        return None, [f"cannot read config: {e}"]
    except json.JSONDecodeError as e:
        return None, [f"config is not valid JSON: {e}"]
    if not isinstance(raw, dict):
        return None, ["config root must be a JSON object"]
    for key in sorted(set(raw) - RUN_CONFIG_KEYS):
        errors.append(f"unknown config key: {key}")
    if "dataset" not in raw:
        errors.append("missing required key: dataset")
    dataset = raw.get("dataset")
    if dataset is not None and dataset not in BUILTIN_TABLES:
        if not Path(dataset).exists():
            errors.append(f"dataset path does not exist: {dataset}")
        if "schema" not in raw:
            errors.append("schema is required for CSV datasets")
        elif not Path(raw["schema"]).exists():
            errors.append(f"schema path does not exist: {raw['schema']}")
    train_keys = {k: v for k, v in raw.items()
                  if k in RUN_CONFIG_KEYS
                  and k not in ("dataset", "schema", "out", "test_fraction",
                                "split_seed")}
    cfg = None
    try:
        cfg = TrainConfig(**train_keys)
    except (TypeError, ValueError) as e:
        errors.append(f"invalid training settings: {e}")
    if errors:
        return None, errors
    run = {
        "dataset": dataset,
        "schema": raw.get("schema"),
        "out": raw.get("out", "."),
        "test_fraction": float(raw.get("test_fraction", 0.2)),
        "split_seed": int(raw.get("split_seed", 0)),
        "train": cfg,
    }
    return run, []


def cmd_train(args):
    run, errors = load_run_config(args.config)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        run["train"].seed = args.seed
    out = Path(args.out if args.out is not None else run["out"])
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.time()
    if run["dataset"] in BUILTIN_TABLES:
        table = load_builtin_table(run["dataset"])
    else:
        schema = TableSchema.from_json(run["schema"])
        table = load_csv(run["dataset"], schema)
    train_ds, test_ds = prepare(table, run["test_fraction"], run["split_seed"])
    model, history = train(train_ds, run["train"])
    wall = time.time() - t0

    write_model(out / "model.txt", model)
    _write_history(out / "history.csv", history)
    metrics = [
        ("dataset", run["dataset"]),
        ("loss", run["train"].loss_kind),
        ("seed", run["train"].seed),
        ("split_seed", run["split_seed"]),
        ("train_accuracy", f"{evaluate(model, train_ds):.6f}"),
        ("test_accuracy", f"{evaluate(model, test_ds):.6f}"),
        ("steps", run["train"].steps),
        ("wall_time_s", f"{wall:.2f}"),
    ]
    for w in history.warnings:
        metrics.append(("warning", w))
    _write_keyvalues(out / "metrics.txt", metrics)
    for key, value in metrics:
        print(f"{key}={value}")
    return 0


def cmd_bench_integration(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sizes = [int(s) for s in args.sizes.split(",")]
    reports = rmse_benchmark(sizes, n_trials=args.trials, seed=args.seed)
    rows = [(r.method, r.sample_size, f"{r.rmse:.8g}", r.n_trials)
            for r in reports]
    _write_csv(out / "integration_rmse.csv",
               ("method", "sample_size", "rmse", "n_trials"), rows)
    for row in rows:
        print(",".join(str(v) for v in row))
    return 0


def cmd_grad_check(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dims = [int(d) for d in args.dims.split(",")]
    rows = grad_check(dims, trials=args.trials, seed=args.seed,
                      sample_size=args.sample_size, corruption=args.corruption)
    _write_csv(out / "grad_check.csv", ("dim", "trial", "rel_error"),
               [(r["dim"], r["trial"], f"{r['rel_error']:.8g}") for r in rows])
    worst = max(r["rel_error"] for r in rows)
    passed = worst <= GRAD_CHECK_THRESHOLD
    summary = [
        ("dims", args.dims), ("trials", args.trials), ("seed", args.seed),
        ("sample_size", args.sample_size),
        ("max_rel_error", f"{worst:.6g}"),
        ("threshold", GRAD_CHECK_THRESHOLD),
        ("passed", passed),
    ]
    _write_keyvalues(out / "grad_check_summary.txt", summary)
    for key, value in summary:
        print(f"{key}={value}")
    return 0 if passed else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="exactopt",
        description="Expected-accuracy training experiments and checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy", help="run a toy threshold experiment")
    p.add_argument("which", type=int, choices=(1, 2))
    p.add_argument("--loss", choices=("exact", "ce", "hinge"), default="exact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="toy_out")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("train", help="train a linear model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's training seed")
    p.add_argument("--out", default=None, help="override the output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench-integration",
                       help="RMSE of integral and gradient estimators")
    p.add_argument("--sizes", default="1,4,16,64,256")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="bench_out")
    p.set_defaults(func=cmd_bench_integration)

    p = sub.add_parser("grad-check",
                       help="analytic vs finite-difference gradients")
    p.add_argument("--dims", default="1,2,3,4,5,6,7,8,9")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-size", type=int, default=10_000)
    p.add_argument("--corruption", type=float, default=0.0,
                   help="scale the analytic gradient by 1 + corruption "
                        "(harness self-test)")
    p.add_argument("--out", default="grad_check_out")
    p.set_defaults(func=cmd_grad_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
