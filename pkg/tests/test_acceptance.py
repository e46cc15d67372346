"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Sweeps use the preset master seed and the default iteration count (the first
multiple of 100 at which the step has decayed below 1% of its initial value).
"""

import dataclasses
import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from dsrl.baselines import centralized_l1_subgradient
from dsrl.checks import check_consensus, check_lemma2, check_subgradient
from dsrl.core import PUBLISHED_SCHEDULE, dsrl_run
from dsrl.harness import (
    ExperimentConfig,
    ScenarioConfig,
    SweepConfig,
    draw_instance,
    presets,
    run_sweep,
)
from dsrl.measurement import laplace_rates, sample_cauchy, sample_laplace
from dsrl.metrics import disagreement, mean_bias, rmse

SEED = 2024


def report(label, ok, detail, seconds):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail} ({seconds:.1f}s)"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def sweep_config(kind, values, params=None, solvers=("dsrl",), trials=100):
    return dataclasses.replace(
        presets()["fig1_outliers"], name=f"acceptance-{kind}", trials=trials, solvers=solvers,
        scenario=ScenarioConfig(kind, params or {}, SweepConfig(values=tuple(values))),
    )


def test_c1_subgradient_oracle():
    res = check_subgradient(seed=SEED, points=100, margin=1e-3, tol=1e-5)
    report("C1 sub-gradient vs finite differences", res.passed and res.seconds < 1.0, res.detail, res.seconds)


def test_c2_far_field_bound():
    res = check_lemma2(seed=SEED, instances=20, samples=1000)
    report("C2 far-field sub-gradient bound", res.passed and res.seconds < 10.0, res.detail, res.seconds)


def test_c3_consensus():
    res = check_consensus(seed=SEED, a=0.05, tau_alpha=0.3, K=10_000, target=1e-3)
    report("C3 consensus-only dynamics", res.passed and res.seconds < 5.0, res.detail, res.seconds)


def test_c4_noiseless_convergence():
    t0 = time.perf_counter()
    cfg = sweep_config("noiseless", [0.0], trials=50)
    K = 2000
    dsrl_err, l1_err, dis = [], [], []
    for t in range(cfg.trials):
        net, x_true, m, X0 = draw_instance(cfg, 0, t)
        trace = dsrl_run(net, m, PUBLISHED_SCHEDULE, K, X0, x_true, trace_cadence=K)
        dsrl_err.append(trace.rmse[-1])
        dis.append(trace.disagreement[-1])
        l1 = centralized_l1_subgradient(net, m, PUBLISHED_SCHEDULE, K, X0.mean(axis=0), x_true)
        l1_err.append(np.linalg.norm(l1.estimate - x_true))
    secs = time.perf_counter() - t0
    med_d, med_c, worst_dis = np.median(dsrl_err), np.median(l1_err), max(dis)
    ok = med_d <= 2 * med_c and worst_dis < 0.1 and secs < 120
    report("C4 noiseless convergence vs centralized L1", ok,
           f"median DSRL RMSE {med_d:.4g} vs 2 x centralized {2 * med_c:.4g}; "
           f"max final disagreement {worst_dis:.3g} (limit 0.1)", secs)


def non_decreasing_with_one_inversion(rows):
    """At most one decrease, and that one within a standard error."""
    drops = [(a, b) for a, b in zip(rows, rows[1:]) if b.mean_rmse < a.mean_rmse]
    if not drops:
        return True
    if len(drops) > 1:
        return False
    a, b = drops[0]
    return a.mean_rmse - b.mean_rmse <= max(a.stderr_rmse, b.stderr_rmse)


@pytest.mark.slow
def test_c5_outlier_trend():
    t0 = time.perf_counter()
    ps = [0.1, 0.3, 0.5, 0.7, 0.9]
    res = run_sweep(sweep_config("outlier", ps, {"upper": 6 * math.sqrt(3)}, solvers=("dsrl", "l2")))
    secs = time.perf_counter() - t0
    d = [res.row(p, "dsrl") for p in ps]
    l2 = [res.row(p, "l2") for p in ps]
    trend = non_decreasing_with_one_inversion(d)
    beats = all(a.mean_rmse < b.mean_rmse for p, a, b in zip(ps, d, l2) if p >= 0.3)
    failed = sum(r.trials_failed for r in res.rows)
    detail = ", ".join(f"p={p:g}: {a.mean_rmse:.3f}+-{a.stderr_rmse:.3f} vs L2 {b.mean_rmse:.3f}"
                       for p, a, b in zip(ps, d, l2))
    report("C5 outlier sweep trend", trend and beats and failed == 0 and secs < 600,
           f"{detail}; non-decreasing={trend}, beats L2 at p>=0.3={beats}, failed trials={failed}", secs)


@pytest.mark.slow
def test_c6_laplace_and_cauchy_trends():
    t0 = time.perf_counter()
    sigmas = [1.0, 5.0, 10.0, 20.0]
    gammas = [0.1, 0.5, 1.0, 2.0]
    # variance-consistent rates: the published rate formula makes the noise
    # shrink as sigma grows, which cannot produce a rising error curve
    lap = run_sweep(sweep_config("laplace", sigmas, {"variance_consistent": True}))
    cau = run_sweep(sweep_config("cauchy", gammas))
    secs = time.perf_counter() - t0
    lap_means = [lap.row(s, "dsrl").mean_rmse for s in sigmas]
    cau_means = [cau.row(g, "dsrl").mean_rmse for g in gammas]
    lap_up = all(b > a for a, b in zip(lap_means, lap_means[1:]))
    cau_up = all(b > a for a, b in zip(cau_means, cau_means[1:]))
    non_finite = sum(tr.status["dsrl"] == "non_finite" for tr in cau.trials)
    finite = non_finite == 0 and all(math.isfinite(tr.rmse["dsrl"]) for tr in cau.trials)
    detail = ("laplace " + ", ".join(f"{s:g}:{v:.3f}" for s, v in zip(sigmas, lap_means))
              + "; cauchy " + ", ".join(f"{g:g}:{v:.3f}" for g, v in zip(gammas, cau_means))
              + f"; increasing={lap_up}/{cau_up}; non-finite Cauchy trials={non_finite}")
    report("C6 Laplace/Cauchy sweep trends", lap_up and cau_up and finite and secs < 600, detail, secs)


def test_c7_determinism_across_parallelism(tmp_path):
    t0 = time.perf_counter()
    doc = presets()["fig3_cauchy"].to_dict()
    doc.update(trials=4, iterations=500, curve_stride=100)
    doc["scenario"]["sweep"] = {"values": [0.5, 1.5]}
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps(doc))
    outs = {}
    for threads in ("1", "0", "3"):  # sequential, auto, forced pool
        out = tmp_path / f"threads{threads}"
        env = dict(os.environ, DSRL_THREADS=threads)
        proc = subprocess.run([sys.executable, "-m", "dsrl", "sweep", "--config", str(config),
                               "--seed", str(SEED), "--out", str(out)],
                              capture_output=True, text=True, env=env)
        assert proc.returncode == 0, proc.stderr
        outs[threads] = out
    names = sorted(p.name for p in outs["1"].iterdir())
    same = all(len({(o / n).read_bytes() for o in outs.values()}) == 1 for n in names)
    report("C7 byte-identical sweeps across DSRL_THREADS", same and len(names) == 4,
           f"compared {', '.join(names)} for DSRL_THREADS=1, 0 (auto), 3", time.perf_counter() - t0)


def test_c8_metric_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(1000):
        L = int(rng.integers(1, 64))
        n = int(rng.integers(1, 4))
        X = rng.normal(scale=rng.uniform(0.01, 10), size=(L, n)) + rng.normal(size=n)
        x = rng.uniform(-3, 3, n)
        lhs = rmse(X, x) ** 2
        rhs = disagreement(X) ** 2 + mean_bias(X, x) ** 2
        worst = max(worst, abs(lhs - rhs) / lhs)
    report("C8 rmse^2 = disagreement^2 + bias^2", worst < 1e-10,
           f"max relative error {worst:.2e} over 1000 states", time.perf_counter() - t0)


def test_c9_sampler_calibration():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    N = 10**6
    lam1, lam2 = laplace_rates(math.sqrt(10.9))
    lap_err = [abs(sample_laplace(lam, N, rng).var() / (2 / lam**2) - 1) for lam in (lam1, lam2)]
    gamma_err = [abs(np.median(np.abs(sample_cauchy(g, N, rng))) / g - 1) for g in (1.0, 2.0)]
    secs = time.perf_counter() - t0
    ok = max(lap_err) < 0.02 and max(gamma_err) < 0.01 and secs < 5
    report("C9 noise sampler calibration", ok,
           f"Laplace variance rel. error {max(lap_err):.2%} (limit 2%), "
           f"Cauchy median |e| rel. error {max(gamma_err):.2%} (limit 1%)", secs)
