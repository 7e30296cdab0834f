"""End-to-end experiments behind the command-line interface."""

from __future__ import annotations

import csv
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dde import (ConvergenceReport, DelayProcess, Trajectory, convergence_metrics,
                  integrate_errors, random_initial_errors)
from .errors import UnstableSystemError
from .formation import ERROR_COLUMNS, FormationTargets, follower_separation
from .scenario import Scenario
from .stability import M1Variant, build_error_matrices, delay_bound
from .wireless import (MC_EXPLICIT_RADIUS, MC_REGION_RADIUS, WirelessParams, _draw_interference,
                       link_delay, mc_reliability_sweep, reliability_at, sample_signal_gain)

TRAJECTORY_HEADER = ["t", *ERROR_COLUMNS, "tau_ms"]
SWEEP_HEADER = ["density_per_m2", "spacing_m", "reliability_analytic", "reliability_mc", "mc_ci95"]
JOINT_HEADER = ["period", "t", "distance_m", "sinr", "delay_ms", "lost", "met"]

CONVERGENCE_EPS = 1e-2
HOLD_WINDOW = 2.0


def fmt(x: float) -> str:
    """Locale-independent float text with 9 significant digits."""
    return format(float(x), ".9g")


@contextmanager
def _open_out(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def _stream_seed(seed: int, purpose: int) -> int:
    return int(np.random.SeedSequence([seed, purpose]).generate_state(1, np.uint64)[0])


def _rng(seed: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, purpose])))


# -------------------------------------------------------------- delay bound

def delay_bound_report(scenario: Scenario, variant: M1Variant = "derived") -> dict:
    """Maximum tolerable delay plus the numbers needed to audit it.

    Raises UnstableSystemError when M1 + M2 is not Hurwitz.
    """
    mats = build_error_matrices(scenario.gains, variant)
    if not mats.hurwitz:
        raise UnstableSystemError("M1 + M2 is not Hurwitz for these gains")
    bound = delay_bound(mats, scenario.k)
    return {
        "m1_variant": variant,
        "k": scenario.k,
        "tau_max_s": bound.tau_max,
        "tau_max_ms": bound.tau_max_ms,
        "lambda_max": bound.lambda_max,
        "lyapunov_residual": bound.residual(mats),
        "hurwitz": True,
    }


def required_delay(scenario: Scenario, delay_ms: float | None = None) -> float:
    """The delay requirement in seconds: the stability bound unless overridden."""
    if delay_ms is not None:
        return delay_ms * 1e-3
    return delay_bound_report(scenario)["tau_max_s"]


# ---------------------------------------------------------------- simulate

@dataclass(frozen=True, eq=False)
class SimulationResult:
    trajectory: Trajectory
    report: ConvergenceReport
    tau_max: float


def simulate(scenario: Scenario, delay_ms: float | None = None, step: float | None = None,
             horizon: float | None = None) -> SimulationResult:
    """Random initial errors, uniform time-varying delay on (0, tau_max]."""
    tau_max = required_delay(scenario, delay_ms)
    mats = build_error_matrices(scenario.gains)
    step = scenario.sim.step if step is None else step
    horizon = scenario.sim.horizon if horizon is None else horizon
    e0 = random_initial_errors(_rng(scenario.seed, 0)).as_vector()
    if tau_max > 0:
        delay = DelayProcess("uniform-resampled", tau_max, scenario.sim.delay_resample,
                             _stream_seed(scenario.seed, 1))
    else:
        delay = DelayProcess("constant", 0.0, scenario.sim.delay_resample)
    traj = integrate_errors(e0, mats, delay, step, horizon, scenario.digest())
    return SimulationResult(traj, convergence_metrics(traj, CONVERGENCE_EPS, HOLD_WINDOW), tau_max)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for t, row, tau in zip(traj.t, traj.errors, traj.tau):
            w.writerow([fmt(t), *(fmt(v) for v in row), fmt(tau * 1e3)])


# ------------------------------------------------------------- reliability

@dataclass(frozen=True)
class SweepRow:
    density: float
    spacing: float
    analytic: float
    mc: float | None = None
    ci95: float | None = None


def spacing_grid(lo: float, hi: float, step: float) -> list[float]:
    if not (lo > 0 and hi >= lo and step > 0):
        raise ValueError("spacing grid needs 0 < min <= max and step > 0")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(n)]


def reliability_sweep(scenario: Scenario, densities: Sequence[float], spacings: Sequence[float],
                      required: float, mc_trials: int = 0, workers: int | None = None) -> list[SweepRow]:
    """Analytic (and optionally Monte Carlo) reliability on a density x spacing grid.

    Rows are ordered by (density, spacing) whatever the scheduling.
    """
    if not densities or not spacings:
        raise ValueError("density list and spacing grid must be non-empty")
    rows = []
    for lam in sorted(densities):
        params = scenario.radio.with_density(lam)
        grid = sorted(spacings)
        mc = (mc_reliability_sweep(grid, required, params, mc_trials, scenario.seed, workers)
              if mc_trials else [None] * len(grid))
        for d, est in zip(grid, mc):
            rows.append(SweepRow(lam, d, reliability_at(d, required, params),
                                 None if est is None else est.value,
                                 None if est is None else est.ci_halfwidth_95))
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([fmt(r.density), fmt(r.spacing), fmt(r.analytic),
                        "" if r.mc is None else fmt(r.mc), "" if r.ci95 is None else fmt(r.ci95)])


# ------------------------------------------------------------------- joint

@dataclass(frozen=True)
class PeriodRecord:
    period: int
    t: float
    distance: float
    sinr: float
    delay: float
    lost: bool
    met: bool


class WirelessLink:
    """Follower-to-follower link feeding sampled delays into the integrator.

    Each control period draws a Nakagami signal gain and a PPP interference
    power, evaluates the SINR at the current follower separation and turns it
    into a packet delay. Packets slower than the history depth are lost.
    """

    block = 1024

    def __init__(self, params: WirelessParams, targets: FormationTargets, tau_max: float,
                 period: float, depth_factor: float = 2.0):
        self.params = params
        self.targets = targets
        self.tau_max = tau_max
        self.period = period
        self.history_depth = depth_factor * tau_max
        self.records: list[PeriodRecord] = []

    def sampler(self, seed: int):
        rng = np.random.Generator(np.random.PCG64(seed))
        params = self.params
        self.records = []
        cache = {"h": np.empty(0), "i": np.empty(0)}

        def draw(p: int, e: np.ndarray) -> tuple[float, bool]:
            j = p % self.block
            if j == 0:
                cache["h"] = sample_signal_gain(rng, params, self.block)
                cache["i"] = _draw_interference(rng, self.block, params, MC_REGION_RADIUS, MC_EXPLICIT_RADIUS)
            d = max(follower_separation(e, self.targets), 1e-6)
            sinr = params.p_t * cache["h"][j] * d ** (-params.alpha) / (params.noise_power + cache["i"][j])
            delay = link_delay(sinr, params)
            lost = not delay <= self.history_depth
            self.records.append(PeriodRecord(p, p * self.period, d, sinr, delay, lost, delay <= self.tau_max))
            return (0.0 if lost else delay), lost

        return draw


@dataclass(frozen=True, eq=False)
class JointRunRecord:
    periods: list[PeriodRecord]
    trajectory: Trajectory
    report: ConvergenceReport
    tau_max: float
    met_fraction: float
    analytic_reliability: float = field(default=math.nan)


def joint_run(scenario: Scenario, delay_ms: float | None = None, step: float | None = None,
              horizon: float | None = None, initial_errors: np.ndarray | None = None) -> JointRunRecord:
    """Control loop driven by delays sampled from the wireless model."""
    tau_max = required_delay(scenario, delay_ms)
    if not tau_max > 0:
        raise ValueError("joint run needs a positive delay requirement")
    mats = build_error_matrices(scenario.gains)
    step = scenario.sim.step if step is None else step
    horizon = scenario.sim.horizon if horizon is None else horizon
    if initial_errors is None:
        e0 = random_initial_errors(_rng(scenario.seed, 0)).as_vector()
    else:
        e0 = np.asarray(initial_errors, dtype=float).reshape(8)
    link = WirelessLink(scenario.radio, scenario.targets, tau_max, scenario.sim.delay_resample)
    delay = DelayProcess("wireless-coupled", tau_max, scenario.sim.delay_resample,
                         _stream_seed(scenario.seed, 2), link=link)
    traj = integrate_errors(e0, mats, delay, step, horizon, scenario.digest())
    periods = list(link.records)
    met = float(np.mean([r.met for r in periods])) if periods else math.nan
    analytic = reliability_at(scenario.targets.follower_distance(), tau_max, scenario.radio)
    return JointRunRecord(periods, traj, convergence_metrics(traj, CONVERGENCE_EPS, HOLD_WINDOW),
                          tau_max, met, analytic)


def write_joint_csv(record: JointRunRecord, path) -> None:
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(JOINT_HEADER)
        for r in record.periods:
            w.writerow([r.period, fmt(r.t), fmt(r.distance), fmt(r.sinr),
                        fmt(r.delay * 1e3), int(r.lost), int(r.met)])


def trajectory_path_for(out: Path) -> Path:
    return out.with_name(out.stem + "_trajectory" + out.suffix)
