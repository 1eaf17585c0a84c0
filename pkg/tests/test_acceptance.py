"""End-to-end acceptance checks.

Each numbered check prints a single PASS/FAIL line (visible even without -s)
and enforces its own runtime budget.  Dataset checks that need files fetched
by scripts/fetch_uci.py are skipped when the files are absent.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from exactopt.cli import (
    TOY1_EXACT,
    TOY2_EXACT,
    TOY2_GRID_B,
    TOY2_GRID_STEP,
    TOY2_GRID_W,
    _binary_losses_on_grid,
    load_run_config,
)
from exactopt.exact_loss import (
    ExactConfig,
    LogitBatch,
    delta_apply,
    delta_transpose_apply,
    exact_loss_batch,
)
from exactopt.mvn_orthant import (
    GenzConfig,
    OrthantProblem,
    exact_sigma_cholesky,
    orthant_estimate,
    philox_rng,
)
from exactopt.normal import std_normal_cdf
from exactopt.oracles import grad_check, rmse_benchmark
from exactopt.tabular import load_builtin_table, load_csv, prepare, toy1, toy2
from exactopt.tabular import TableSchema
from exactopt.trainer import LinearModel, TrainConfig, evaluate, train

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

_wall_times = {}


def _report(capsys, label, ok, detail, elapsed=None):
    stamp = f" ({elapsed:.1f}s)" if elapsed is not None else ""
    with capsys.disabled():
        print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}{stamp}")
    assert ok, f"{label}: {detail}"


def _skip(capsys, label, reason):
    with capsys.disabled():
        print(f"[SKIP] {label}: {reason}")
    pytest.skip(reason)


def test_criterion_1_toy1(capsys):
    t0 = time.time()
    ds = toy1()
    init = LinearModel(np.array([[1.0]]), np.array([0.0]))
    model, _ = train(ds, TrainConfig(seed=0, **TOY1_EXACT), init_model=init)
    threshold = -model.bias[0]
    acc = evaluate(model, ds)

    b_grid = np.round(np.arange(-2.0, 2.0 + 1e-9, 0.01), 10)
    logits_free = np.array([-0.25, 0.0, 0.25]) - b_grid[:, None]
    ce, hinge = _binary_losses_on_grid(logits_free, np.array([1, 1, 2]))
    ce_argmin = float(b_grid[np.argmin(ce)])
    ce_acc = evaluate(LinearModel(np.array([[1.0]]), np.array([-ce_argmin])), ds)
    plateau = b_grid[np.abs(hinge - hinge.min()) < 1e-9]
    hinge_acc = evaluate(
        LinearModel(np.array([[1.0]]), np.array([-float(plateau[0])])), ds)
    elapsed = time.time() - t0

    ok = (0.0 < threshold < 0.25 and acc == 1.0
          and abs(ce_argmin - 0.7) <= 0.05 and ce_acc == pytest.approx(2 / 3)
          and plateau.min() <= 0.75 and plateau.max() >= 1.0
          and hinge_acc == pytest.approx(2 / 3)
          and elapsed < 5.0)
    _report(capsys, "criterion 1", ok,
            f"toy 1: threshold {threshold:.3f} acc {acc:.2f}, "
            f"ce min {ce_argmin:.2f}, hinge plateau "
            f"[{plateau.min():.2f}, {plateau.max():.2f}]", elapsed)


def test_criterion_2_toy2(capsys):
    t0 = time.time()
    ds = toy2()
    model, _ = train(ds, TrainConfig(seed=0, **TOY2_EXACT))
    exact_acc = evaluate(model, ds)

    x = np.array([-6.0, -5.0, -4.0, 0.0, 2.0])
    labels = np.array([1, 2, 2, 1, 2])
    ws = np.round(np.arange(TOY2_GRID_W[0], TOY2_GRID_W[1] + 1e-9,
                            TOY2_GRID_STEP), 10)
    bs = np.round(np.arange(TOY2_GRID_B[0], TOY2_GRID_B[1] + 1e-9,
                            TOY2_GRID_STEP), 10)
    W, B = np.meshgrid(ws, bs, indexing="ij")
    ce, hinge = _binary_losses_on_grid(W[:, :, None] * x + B[:, :, None], labels)
    accs = {}
    for name, grid in (("ce", ce), ("hinge", hinge)):
        i, j = np.unravel_index(np.argmin(grid), grid.shape)
        m = LinearModel(np.array([[float(ws[i])]]), np.array([float(bs[j])]))
        accs[name] = evaluate(m, ds)
    elapsed = time.time() - t0

    ok = (exact_acc == pytest.approx(0.8)
          and accs["ce"] == pytest.approx(0.6)
          and accs["hinge"] == pytest.approx(0.6)
          and elapsed < 30.0)
    _report(capsys, "criterion 2", ok,
            f"toy 2: exact {exact_acc:.2f}, ce {accs['ce']:.2f}, "
            f"hinge {accs['hinge']:.2f}", elapsed)


def test_criterion_3_symmetry(capsys):
    t0 = time.time()
    worst = 0.0
    ok = True
    for d in range(1, 10):
        truth = 1.0 / (d + 1)
        problem = OrthantProblem(np.zeros(d), exact_sigma_cholesky(d))
        for seed in range(20):
            est = orthant_estimate(problem, GenzConfig(sample_size=10_000,
                                                       seed=seed))
            diff = abs(est.value - truth)
            worst = max(worst, diff)
            if diff > 4 * est.stderr + 1e-15:
                ok = False
    elapsed = time.time() - t0
    ok = ok and elapsed < 10.0
    _report(capsys, "criterion 3", ok,
            f"symmetry 1/(d+1) for d=1..9, worst |err| {worst:.2e}", elapsed)


def test_criterion_4_binary_closed_form(capsys):
    t0 = time.time()
    worst = 0.0
    for m in range(-3, 4):
        problem = OrthantProblem(np.array([float(m)]), exact_sigma_cholesky(1))
        est = orthant_estimate(problem, GenzConfig(sample_size=1000, seed=0))
        worst = max(worst, abs(est.value - std_normal_cdf(m / np.sqrt(2.0))))
    elapsed = time.time() - t0
    ok = worst <= 1e-3 and elapsed < 1.0
    _report(capsys, "criterion 4", ok,
            f"binary closed form, worst |err| {worst:.2e}", elapsed)


def test_criterion_5_gradients(capsys):
    t0 = time.time()
    rows = grad_check(dims=list(range(2, 10)), trials=20, seed=0,
                      sample_size=10_000)
    worst_multi = max(r["rel_error"] for r in rows)
    rows1 = grad_check(dims=[1], trials=20, seed=0, sample_size=10)
    worst_uni = max(r["rel_error"] for r in rows1)
    elapsed = time.time() - t0
    ok = worst_multi <= 1e-2 and worst_uni <= 1e-6 and elapsed < 60.0
    _report(capsys, "criterion 5", ok,
            f"gradient vs finite differences, rel err d>=2 {worst_multi:.2e}, "
            f"d=1 {worst_uni:.2e}", elapsed)


def test_criterion_6_rmse_benchmark(capsys):
    t0 = time.time()
    sizes = [1, 4, 16, 64, 256]
    reports = rmse_benchmark(sizes, n_trials=1000, seed=0)
    by = {(r.method, r.sample_size): r.rmse for r in reports}
    genz_beats_mc = all(by[("genz", n)] < by[("mc_value", n)] for n in sizes)
    grad_beats_reinforce = by[("exact_grad", 1)] <= by[("reinforce_grad", 256)]
    elapsed = time.time() - t0
    ok = genz_beats_mc and grad_beats_reinforce and elapsed < 600.0
    _report(capsys, "criterion 6", ok,
            "estimator RMSE orderings: sequential < plain MC at every size "
            f"({genz_beats_mc}), analytic grad @1 <= score grad @256 "
            f"({grad_beats_reinforce})", elapsed)


def _run_reproduction(config_name, target, tol, capsys, label):
    import json

    raw = json.loads((CONFIGS / config_name).read_text())
    dataset = raw["dataset"]
    if dataset not in ("balance-scale", "breast-cancer-wisconsin", "wine"):
        if not (ROOT / dataset).exists():
            _skip(capsys, label,
                  f"{config_name}: dataset file {dataset} not present "
                  "(offline build); run scripts/fetch_uci.py first")
    run, errors = load_run_config(CONFIGS / config_name)
    assert not errors, errors
    if dataset in ("balance-scale", "breast-cancer-wisconsin", "wine"):
        table = load_builtin_table(dataset)
    else:
        table = load_csv(ROOT / dataset,
                         TableSchema.from_json(ROOT / run["schema"]))
    t0 = time.time()
    train_ds, test_ds = prepare(table, run["test_fraction"], run["split_seed"])
    accs = []
    for seed in range(5):
        cfg = run["train"]
        cfg.seed = seed
        model, _ = train(train_ds, cfg)
        accs.append(100.0 * evaluate(model, test_ds))
    mean = float(np.mean(accs))
    elapsed = time.time() - t0
    _wall_times[config_name] = elapsed
    ok = abs(mean - target) <= tol
    _report(capsys, label, ok,
            f"{config_name}: mean test accuracy {mean:.2f} "
            f"(target {target:.2f} +/- {tol:g}, 5 seeds)", elapsed)


@pytest.mark.parametrize("config_name,target,tol", [
    ("breast-cancer-wisconsin-exact.json", 97.37, 1.5),
    ("balance-scale-exact.json", 92.00, 1.5),
    ("balance-scale-ce.json", 92.00, 1.5),
    ("balance-scale-hinge.json", 92.00, 1.5),
    ("wine-exact.json", 100.00, 1.5),
    ("wine-ce.json", 100.00, 1.5),
    ("wine-hinge.json", 100.00, 1.5),
    ("car-exact.json", 95.20, 1.5),
    ("cylinder-bands-exact.json", 77.22, 3.0),
])
def test_criterion_7_tabular_reproduction(config_name, target, tol, capsys):
    _run_reproduction(config_name, target, tol, capsys, "criterion 7")


def test_criterion_7_total_runtime(capsys):
    total = sum(_wall_times.values())
    ok = total < 600.0
    _report(capsys, "criterion 7", ok,
            f"total reproduction wall time {total:.0f}s < 600s")


def test_criterion_8_deep_vision_out_of_scope(capsys):
    with capsys.disabled():
        print("[INFO] criterion 8: deep-vision benchmarks are out of scope "
              "at desk scale; no check covers them")


def test_criterion_9_property_suite(capsys):
    t0 = time.time()
    rng = philox_rng(0, 0)
    ok = True
    notes = []

    for _ in range(5):
        b, c = int(rng.integers(2, 6)), int(rng.integers(2, 8))
        mu = rng.normal(0, 3, (b, c))
        labels = rng.integers(1, c + 1, b)
        loss, _, _ = exact_loss_batch(LogitBatch(mu, 0.7), labels,
                                      ExactConfig(sample_size=64))
        if not 0.0 <= loss <= 1.0:
            ok = False
            notes.append("loss bounds")

    mu = np.round(rng.normal(0, 1, (4, 5)) * 1024) / 1024
    labels = np.array([1, 5, 2, 3])
    cfg = ExactConfig(bn_enabled=False, sample_size=64, seed=1)
    base = exact_loss_batch(LogitBatch(mu, 1.0), labels, cfg)[0]
    if base != exact_loss_batch(LogitBatch(mu + 3.0, 1.0), labels, cfg)[0]:
        ok = False
        notes.append("shift invariance")
    if base != exact_loss_batch(LogitBatch(mu * 2.0, 2.0), labels, cfg)[0]:
        ok = False
        notes.append("scale invariance")

    for _ in range(20):
        c = int(rng.integers(2, 12))
        y = int(rng.integers(1, c + 1))
        v = rng.normal(0, 1, c)
        g = rng.normal(0, 1, c - 1)
        if abs(delta_apply(v, y) @ g - v @ delta_transpose_apply(g, y)) > 1e-12:
            ok = False
            notes.append("adjoint identity")

    for c in range(2, 33):
        target = np.eye(c - 1) + np.ones((c - 1, c - 1))
        for y in range(1, c + 1):
            d_y = np.array([delta_transpose_apply(row, y)
                            for row in np.eye(c - 1)])
            if not np.array_equal(d_y @ d_y.T, target):
                ok = False
                notes.append("difference covariance")

    ds = toy2()
    tcfg = TrainConfig(loss_kind="exact", lr_init=0.1, steps=40, batch_size=5,
                       sigma_init=2.0, sigma_final=0.5, margin=1.0,
                       bn_enabled=False, seed=3)
    m1, h1 = train(ds, tcfg)
    m2, h2 = train(ds, tcfg)
    if not (np.array_equal(m1.weights, m2.weights)
            and np.array_equal(m1.bias, m2.bias) and h1.records == h2.records):
        ok = False
        notes.append("training determinism")

    elapsed = time.time() - t0
    ok = ok and elapsed < 60.0
    detail = "invariants hold" if not notes else "failed: " + ", ".join(notes)
    _report(capsys, "criterion 9", ok, f"property suite, {detail}", elapsed)
