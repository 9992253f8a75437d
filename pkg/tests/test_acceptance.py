"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured numbers;
the lines are repeated in the terminal summary. Tolerances and sizes are
pinned here and are not tuned per run.
"""

import time
import warnings
from dataclasses import replace

import numpy as np
import pytest

import conftest
from oracles import DfsOracle, ista_oracle
from topkfs import mlp
from topkfs.approx import ApproxConfig, approx_study, sinusoid_target
from topkfs.cli import main as cli_main
from topkfs.data import inject_noise_features, make_blobs, make_sparse_classification, make_sparse_regression, split
from topkfs.evaluate import accuracy, extra_trees_fit, f1_selection, mae, ols_fit, r2
from topkfs.gradcheck import LINEAR_TOL, MLP_TOL, run_suite
from topkfs.linear import Hyperparams, fit, objective_value, smooth_gradient
from topkfs.mlp import TrainConfig, backward, branch_gradients, loss_components, train
from topkfs.selection import SelectConfig, select, stability
from topkfs.topk import active_set, apply_mask

# pinned tolerances and budgets
OPERATOR_BUDGET_S = 1.0
GRADIENT_BUDGET_S = 30.0
IDENTITY_TOL = 1e-12
DESCENT_SLACK = 1e-10
RECOVERY_BUDGET_S = 300.0
RECOVERY_MIN_F1 = 0.8
BLOBS_MIN_ACC = 0.95
OLS_MAX_MAE = 1e-8
OLS_MIN_R2 = 1 - 1e-8


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, soft=False):
        tag = "PASS" if ok else ("SOFT-FAIL" if soft else "FAIL")
        line = f"{tag} criterion {n}: {detail}"
        conftest.ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return emit


def test_criterion_01_operator_oracle(report):
    rng = np.random.default_rng(0)
    vectors = []
    for _ in range(1000):
        m = int(rng.integers(1, 65))
        # integer draws make magnitude ties common
        vectors.append(rng.integers(-5, 6, m).astype(float) if rng.random() < 0.5 else rng.standard_normal(m))
    cases = [(w, k) for w in vectors for k in range(1, w.size + 1)]
    t0 = time.perf_counter()
    got = [(s.indices, apply_mask(w, s)) for w, k in cases for s in (active_set(w, k),)]
    elapsed = time.perf_counter() - t0
    checks = len(cases)
    mismatches = 0
    for (w, k), (indices, masked) in zip(cases, got):
        # full-sort oracle: a stable sort on -|w| keeps the lower index first among ties
        expected = np.sort(np.argsort(-np.abs(w), kind="stable")[:k])
        want = np.zeros_like(w)
        want[expected] = w[expected]
        mismatches += indices != tuple(expected.tolist()) or not np.array_equal(masked, want)
    ok = mismatches == 0 and elapsed < OPERATOR_BUDGET_S
    report(1, ok, f"{checks} (vector, k) pairs, {mismatches} mismatches, operator time {elapsed:.2f}s "
                  f"(< {OPERATOR_BUDGET_S}s)")
    assert ok


def test_criterion_02_gradient_fidelity(report):
    t0 = time.perf_counter()
    results = run_suite(seed=0)
    elapsed = time.perf_counter() - t0
    lin = max(r.rel_error for r in results if r.component == "linear")
    net = max(r.rel_error for r in results if r.component != "linear")
    ok = lin < LINEAR_TOL and net < MLP_TOL and elapsed < GRADIENT_BUDGET_S
    report(2, ok, f"{len(results)} cases, max rel error linear {lin:.1e} (< {LINEAR_TOL:g}), "
                  f"mlp {net:.1e} (< {MLP_TOL:g}), {elapsed:.1f}s")
    assert ok


def test_criterion_03_reduction_identities(report):
    rng = np.random.default_rng(1)
    # lambda_topk = 0: identical iterates to the plain elastic-net and DFS code paths
    X = rng.standard_normal((40, 9))
    y = X @ rng.standard_normal(9) + 0.1 * rng.standard_normal(40)
    step = 1.0 / (2.0 * np.linalg.norm(X, 2) ** 2)
    h = Hyperparams(lambda_l2=0.5, lambda_l1=1.0, lambda_topk=0.0, k=3, max_iters=400, tol=0.0, step=step,
                    backtracking=False)
    linear_same = np.array_equal(fit(X, y, h).weights, ista_oracle(X, y, 1.0, 0.5, step, 400))
    config = TrainConfig(h=Hyperparams(lambda_l2=0.02, lambda_l1=0.01, lambda_topk=0.0, k=2),
                         epochs=60, rate=1e-2, hidden=(6, 5), seed=5)
    res = train(X, y, config)
    ref = DfsOracle(9, (6, 5), 5, 0.01, 0.02, 1e-2, 60).fit(X, y)
    dfs_same = np.array_equal(res.params.w, ref.w) and all(
        np.array_equal(W[:-1], Wr) and np.array_equal(W[-1], br)
        for W, Wr, br in zip(res.params.layers, ref.W, ref.b))

    # k = m: objective = (1 + lambda_topk) * lead + penalties, gradients likewise
    lam = 0.7
    worst_obj = worst_grad = 0.0
    for seed in range(10):
        r = np.random.default_rng(100 + seed)
        X = r.standard_normal((30, 6))
        y = r.standard_normal(30)
        w = r.standard_normal(6)
        full = Hyperparams(lambda_l2=0.3, lambda_l1=0.2, lambda_topk=lam, k=6)
        plain = replace(full, lambda_topk=0.0)
        res_ = y - X @ w
        lead = res_ @ res_
        expected = (1 + lam) * lead + 0.2 * np.abs(w).sum() + 0.3 * np.linalg.norm(w)
        worst_obj = max(worst_obj, abs(objective_value(X, y, w, full) - expected) / expected)
        g_exp = smooth_gradient(X, y, w, plain) + lam * 2.0 * X.T @ (X @ w - y)
        g = smooth_gradient(X, y, w, full)
        worst_grad = max(worst_grad, np.max(np.abs(g - g_exp)) / np.max(np.abs(g_exp)))

        for task, yy in (("regression", y), ("multiclass", np.arange(30) % 3)):
            p = mlp.init_params(6, mlp.infer_outputs(yy, task), (5, 4), task, r)
            p.w = r.standard_normal(6)
            cfg = TrainConfig(h=Hyperparams(lambda_l2=0.3, lambda_l1=0.2, lambda_topk=lam, k=6), hidden=(5, 4))
            parts = loss_components(p, X, yy, cfg)
            pen = 0.2 * np.abs(p.w).sum() + 0.3 * np.linalg.norm(p.w)
            want = (1 + lam) * parts["lead"] + pen
            worst_obj = max(worst_obj, abs(parts["total"] - want) / want)
            _, grads = backward(p, X, yy, cfg)
            _, g0 = backward(p, X, yy, replace(cfg, h=replace(cfg.h, lambda_topk=0.0)))
            _, gv, gl = branch_gradients(p, X, mlp._targets(p, yy), p.w)
            for a, b0, extra in zip(grads.arrays(), g0.arrays(), [gv, *gl]):
                b = b0 + lam * extra
                worst_grad = max(worst_grad, np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
    ok = linear_same and dfs_same and worst_obj <= IDENTITY_TOL and worst_grad <= IDENTITY_TOL
    report(3, ok, f"lambda_topk=0 bit-identical: linear {linear_same}, mlp {dfs_same}; k=m relative gaps "
                  f"objective {worst_obj:.1e}, gradient {worst_grad:.1e} (<= {IDENTITY_TOL:g})")
    assert ok


def test_criterion_04_monotone_descent(report):
    worst = -np.inf
    min_iters = np.inf
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(20, 80)), int(rng.integers(5, 40))
        X = rng.standard_normal((n, m))
        y = X @ (rng.standard_normal(m) * (rng.random(m) < 0.3)) + rng.standard_normal(n)
        h = Hyperparams(lambda_l2=float(rng.uniform(0, 2)), lambda_l1=float(rng.uniform(0, 2)),
                        lambda_topk=float(rng.uniform(0, 2)), k=int(rng.integers(1, m + 1)),
                        max_iters=500, tol=0.0, step=float(rng.uniform(0.1, 1.0)))
        res = fit(X, y, h, seed=seed)
        tr = res.objective_trace
        worst = max(worst, float(np.max(np.diff(tr) / np.maximum(1.0, np.abs(tr[:-1])))))
        # stopping early is only allowed when no step descends at all
        min_iters = min(min_iters, res.n_iter if not res.converged else 500)
    ok = worst <= DESCENT_SLACK and min_iters >= 500
    report(4, ok, f"20 instances x 500 iterations, largest relative increase {worst:.1e} (<= {DESCENT_SLACK:g})")
    assert ok


def test_criterion_05_synthetic_recovery(report):
    t0 = time.perf_counter()
    kinds = ("lasso", "ridge", "enet", "mlp_reg")
    f1 = {(kind, tk): [] for kind in kinds for tk in (True, False)}
    for seed in range(20):
        d = make_sparse_regression(200, 100, 25, noise_sd=5.0, seed=seed)
        for kind in kinds:
            for tk in (True, False):
                rep = select(d, kind, SelectConfig(k=25, topk=tk, seed=seed))
                f1[kind, tk].append(f1_selection(rep.selected.indices, d.informative)[2])
    elapsed = time.perf_counter() - t0
    med = {key: float(np.median(v)) for key, v in f1.items()}
    ok = all(med[kind, True] >= med[kind, False] for kind in kinds)
    ok &= med["enet", True] >= RECOVERY_MIN_F1 and elapsed < RECOVERY_BUDGET_S
    detail = ", ".join(f"{kind} {med[kind, True]:.3f} vs {med[kind, False]:.3f}" for kind in kinds)
    report(5, ok, f"median F1 top-k vs plain over 20 seeds: {detail}; {elapsed:.0f}s")
    assert ok


def test_criterion_06_noise_rejection(report):
    kinds = ("lasso", "ridge", "enet", "mlp_reg")
    frac = {(kind, tk): [] for kind in kinds for tk in (True, False)}
    for seed in range(10):
        base = make_sparse_regression(100, 20, 20, noise_sd=5.0, seed=seed)
        d = inject_noise_features(base, seed=seed)
        for kind in kinds:
            for tk in (True, False):
                rep = select(d, kind, SelectConfig(k=20, topk=tk, seed=seed))
                frac[kind, tk].append(float(np.mean(rep.selected.array >= base.m)))
    med = {key: float(np.median(v)) for key, v in frac.items()}
    ok = all(med[kind, True] <= med[kind, False] for kind in kinds)
    detail = ", ".join(f"{kind} {med[kind, True]:.3f} vs {med[kind, False]:.3f}" for kind in kinds)
    report(6, ok, f"median noise fraction in S^k, top-k vs plain over 10 seeds: {detail}")
    assert ok


def test_criterion_07_approximation_trend(report):
    table = approx_study(sinusoid_target(), [16, 64, 256], range(5), config=ApproxConfig())
    med = table.medians()
    found = sum(r.support_found for r in table.rows)
    ok = table.non_increasing()
    report(7, ok, "median sup error by width " + ", ".join(f"{M}: {e:.3f}" for M, e in med.items())
           + f"; support found in {found}/{len(table.rows)} runs")
    assert ok


def test_criterion_08_downstream_sanity(report):
    d = make_blobs(400, 2, sep=6.0, seed=0)
    tr, te = split(d, 0.5, seed=0)
    acc = accuracy(te.y, extra_trees_fit(tr.X, tr.y, n_trees=100, seed=0).predict(te.X))
    rng = np.random.default_rng(0)
    X = rng.standard_normal((100, 5))
    y = X @ rng.standard_normal(5) - 2.0
    yhat = ols_fit(X, y).predict(X)
    err, fit_r2 = mae(y, yhat), r2(y, yhat)
    ok = acc >= BLOBS_MIN_ACC and err < OLS_MAX_MAE and fit_r2 > OLS_MIN_R2
    report(8, ok, f"extra-trees accuracy {acc:.3f} (>= {BLOBS_MIN_ACC}); OLS MAE {err:.1e}, "
                  f"1 - R2 {1 - fit_r2:.1e}")
    assert ok


SMALL = ["--set", "data.n=60", "--set", "data.m=12", "--set", "data.n_informative=3", "--set", "selection.k=3"]
COMMANDS = {
    "select": ["select", *SMALL, "--set", "experiment.model_kind=mlp_reg", "--set", "mlp.epochs=30"],
    "sweep-k": ["sweep-k", *SMALL, "--set", "sweep.k_values=2,3,4"],
    "stability": ["stability", *SMALL, "--set", "stability.n_splits=3", "--set", "experiment.workers=3"],
    "simulate": ["simulate"],
    "gradcheck": ["gradcheck"],
    "approx-study": ["approx-study", "--set", "approx.widths=4,8", "--set", "approx.seeds=0",
                     "--set", "approx.n_train=100", "--set", "approx.epochs=20", "--set", "approx.polish_epochs=20"],
}


def test_criterion_09_determinism(report, tmp_path):
    same = {}
    for name, args in COMMANDS.items():
        runs = []
        for rep in ("a", "b"):
            out = tmp_path / rep / name
            assert cli_main([*args, "--out", str(out)]) == 0
            [d] = list(out.iterdir())
            runs.append({f.name: f.read_bytes() for f in d.iterdir()})
        same[name] = runs[0] == runs[1]
    ok = all(same.values())
    report(9, ok, "byte-identical reruns: " + ", ".join(f"{k} {v}" for k, v in same.items()))
    assert ok


def test_criterion_10_stability_diagnostic(report):
    means = {True: [], False: []}
    for rep in range(5):
        d = make_sparse_classification(300, 50, 5, n_classes=3, seed=rep, class_sep=1.0)
        for tk in (True, False):
            res = stability(d, "mlp_clf", SelectConfig(k=5, topk=tk, seed=100 * rep), n_splits=10)
            means[tk].append(res.mean_jaccard)
    top, plain = float(np.median(means[True])), float(np.median(means[False]))
    ok = top >= plain
    report(10, ok, f"median mean-Jaccard over 5 repetitions: top-k {top:.3f}, plain {plain:.3f} "
                   f"(per repetition top-k {np.round(means[True], 3).tolist()}, "
                   f"plain {np.round(means[False], 3).tolist()})", soft=True)
    assert len(means[True]) == 5 and all(0.0 <= v <= 1.0 for v in means[True] + means[False])
    if not ok:
        warnings.warn("soft stability criterion not met; see the investigation note in the decisions ledger")
