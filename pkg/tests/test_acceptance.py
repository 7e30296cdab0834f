"""Acceptance criteria, one test each.

Every test prints a single ``CRITERION n: PASS|FAIL ...`` line (visible even
without ``-s``) and then asserts. Tolerances are the stated ones; nothing is
loosened to make a criterion pass.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from oracles import largest_root_bisection, random_dyadic_symmetric
from swarmctl.dde import DelayProcess, convergence_metrics, integrate_errors, lyapunov_values, random_initial_errors
from swarmctl.linalg import lyapunov_residual, max_eigenvalue_symmetric, solve_lyapunov
from swarmctl.stability import ControlGains, build_error_matrices, delay_bound
from swarmctl.wireless import (WirelessParams, interference_laplace, interference_laplace_quadrature,
                               max_spacing_for_reliability, mc_reliability_sweep, reliability_at)

TAU_REF = 0.0182
PARAMS = WirelessParams()


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def test_criterion_1_delay_bound(report):
    gains = ControlGains()
    t0 = time.perf_counter()
    taus = {v: delay_bound(build_error_matrices(gains, v), 1.01).tau_max for v in ("derived", "printed")}
    elapsed = time.perf_counter() - t0
    matches = [v for v, t in taus.items() if abs(t - TAU_REF) <= 0.05 * TAU_REF]
    ok = bool(matches) and elapsed < 10e-3
    detail = (f"derived {taus['derived'] * 1e3:.4f} ms, printed {taus['printed'] * 1e3:.4f} ms, "
              f"target 18.2 ms +/-5%, matching variants {matches or 'none'}, {elapsed * 1e3:.2f} ms")
    report(1, ok, detail)


def test_criterion_2_reliability_anchors(report):
    t0 = time.perf_counter()
    r4 = reliability_at(4.0, TAU_REF, PARAMS)
    r10 = reliability_at(10.0, TAU_REF, PARAMS)
    d10 = max_spacing_for_reliability(0.9, TAU_REF, PARAMS.with_density(0.10))
    d01 = max_spacing_for_reliability(0.9, TAU_REF, PARAMS.with_density(0.01))
    elapsed = time.perf_counter() - t0
    checks = [abs(r4 - 0.901) <= 0.005, abs(r10 - 0.355) <= 0.02,
              abs(d10 - 2.8) <= 0.2, abs(d01 - 9.0) <= 0.5, elapsed < 1.0]
    detail = (f"R(0.05,4)={r4:.4f} R(0.05,10)={r10:.4f} d90(0.10)={d10:.3f} m "
              f"d90(0.01)={d01:.3f} m, {elapsed * 1e3:.1f} ms")
    report(2, all(checks), detail)


def test_criterion_3_monte_carlo(report):
    densities = (0.01, 0.05, 0.10)
    spacings = (2.0, 4.0, 6.0, 8.0, 10.0)
    t0 = time.perf_counter()
    worst, failures = 0.0, []
    for lam in densities:
        params = PARAMS.with_density(lam)
        ests = mc_reliability_sweep(spacings, TAU_REF, params, 1_000_000, seed=2024)
        for d, est in zip(spacings, ests):
            gap = abs(est.value - reliability_at(d, TAU_REF, params))
            budget = max(0.015, 3 * est.ci_halfwidth_95)
            worst = max(worst, gap)
            if gap > budget:
                failures.append(f"({lam},{d:g}) gap {gap:.4f}")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    detail = (f"15 points at 1e6 trials, worst |MC-analytic| {worst:.4f}, {elapsed:.1f} s; "
              f"over budget: {', '.join(failures) or 'none'}")
    report(3, ok, detail)


def test_criterion_4_laplace(report):
    t0 = time.perf_counter()
    worst = 0.0
    for alpha in (2.5, 3.0, 4.0):
        params = WirelessParams(alpha=alpha)
        for n in np.logspace(-4, 2, 61):
            a = interference_laplace(n, params)
            b = interference_laplace_quadrature(n, params)
            worst = max(worst, abs(a - b) / abs(b))
    elapsed = time.perf_counter() - t0
    report(4, worst <= 1e-6 and elapsed < 1.0, f"worst relative gap {worst:.2e}, {elapsed * 1e3:.1f} ms")


def test_criterion_5_stability_simulation(report):
    mats = build_error_matrices(ControlGains())
    c = delay_bound(mats).c
    integrate_errors(np.zeros(8), mats, DelayProcess("constant", TAU_REF), 5e-4, 0.01)   # compile
    t0 = time.perf_counter()
    converged = 0
    for seed in range(100):
        rng = np.random.default_rng([seed, 0])
        delay = DelayProcess("uniform-resampled", TAU_REF, seed=seed)
        traj = integrate_errors(random_initial_errors(rng).as_vector(), mats, delay, 5e-4, 60.0)
        converged += convergence_metrics(traj, 1e-2, 2.0).converged
    worst_rise = -math.inf
    for seed in range(10):
        rng = np.random.default_rng([seed, 1])
        traj = integrate_errors(random_initial_errors(rng).as_vector(), mats,
                                DelayProcess("constant", 0.0), 5e-4, 30.0)
        worst_rise = max(worst_rise, float(np.max(np.diff(lyapunov_values(traj, c)))))
    elapsed = time.perf_counter() - t0
    ok = converged == 100 and worst_rise <= 1e-9 and elapsed < 30
    report(5, ok, f"{converged}/100 converged, max per-step V increase {worst_rise:.2e}, {elapsed:.1f} s")


def test_criterion_6_linear_algebra(report):
    t0 = time.perf_counter()
    a = build_error_matrices(ControlGains()).closed_loop
    res = lyapunov_residual(solve_lyapunov(a), a)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        m, k, bits = random_dyadic_symmetric(rng)
        ref = largest_root_bisection(k, bits)
        worst = max(worst, abs(max_eigenvalue_symmetric(m) - ref) / abs(ref))
    elapsed = time.perf_counter() - t0
    ok = res <= 1e-10 and worst <= 1e-9 and elapsed < 5
    report(6, ok, f"Lyapunov residual {res:.1e}, worst eigenvalue rel error {worst:.1e}, {elapsed:.2f} s")


def test_criterion_7_power_invariance(report):
    worst = 0.0
    for lam in (0.01, 0.05, 0.1):
        for d in (2.0, 4.0, 10.0):
            vals = [reliability_at(d, TAU_REF, WirelessParams(noise_psd=0.0, p_t=pt, density_lambda=lam))
                    for pt in (1e-3, 0.1, 10.0)]
            worst = max(worst, max(vals) - min(vals))
    report(7, worst < 1e-12, f"max variation across P_t {worst:.1e}")


def _cli(args, threads, cwd):
    env = dict(os.environ, SWARMCTL_THREADS=str(threads))
    r = subprocess.run([sys.executable, "-m", "swarmctl", *args], cwd=cwd, env=env, capture_output=True)
    return r.returncode, r.stdout


def test_criterion_8_determinism(report, tmp_path):
    commands = {
        "delay-bound": ["delay-bound", "--seed", "5", "--out", "{o}.json"],
        "simulate": ["simulate", "--seed", "5", "--horizon-s", "20", "--out", "{o}.csv", "--report", "{o}.rep.json"],
        "reliability": ["reliability", "--seed", "5", "--out", "{o}.csv"],
        "montecarlo": ["montecarlo", "--seed", "5", "--densities", "0.01,0.05", "--spacing-min", "2",
                       "--spacing-max", "8", "--spacing-step", "3", "--mc-trials", "150000", "--out", "{o}.csv"],
        "joint": ["joint", "--seed", "5", "--horizon-s", "20", "--out", "{o}.csv", "--report", "{o}.rep.json"],
    }
    mismatched = []
    for name, template in commands.items():
        snapshots = []
        for run, threads in ((0, 1), (1, 1), (2, 4)):
            d = tmp_path / f"{name}-{run}"
            d.mkdir()
            args = [a.replace("{o}", str(d / "out")) for a in template]
            code, stdout = _cli(args, threads, d)
            files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
            snapshots.append((code, stdout, files))
        if not (snapshots[0] == snapshots[1] == snapshots[2]) or not snapshots[0][2]:
            mismatched.append(name)
    detail = f"{len(commands)} commands x (2 runs at 1 worker, 1 run at 4 workers); differing: {mismatched or 'none'}"
    report(8, not mismatched, detail)
