"""Fixed-step integration of the delayed error dynamics.

The state is the 8-vector of x- and y-axis errors. Both axes share (M1, M2)
and the same follower-to-follower delay. Delayed states come from a ring
buffer of past grid values by linear interpolation. The history before t = 0
is the constant initial error.

The delay is piecewise constant over control periods. At the start of each
period a delay sampler returns ``(tau, lost)``. A lost packet means the
follower keeps the last velocity it received (zero-order hold). The age of
that held value is capped at the history depth.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Protocol

import numba
import numpy as np

from .formation import ErrorState, FormationTargets, SwarmState, compute_errors
from .stability import ControlGains, SystemMatrices, build_error_matrices

DelayKind = Literal["constant", "uniform-resampled", "wireless-coupled"]

MIN_DELAY = 1e-5          # lower cutoff of the uniform delay draw, seconds
MAX_STEP = 1e-3           # seconds
DEFAULT_STEP = 5e-4       # seconds
DEFAULT_PERIOD = 1e-2     # seconds
DIVERGENCE_LIMIT = 1e9    # |error| beyond this is treated as divergence

STATUS_OK = "ok"
STATUS_DIVERGED = "diverged"


class LinkModel(Protocol):
    """Source of per-period delays for the wireless-coupled process."""

    history_depth: float

    def sampler(self, seed: int) -> Callable[[int, np.ndarray], tuple[float, bool]]: ...


@dataclass(frozen=True)
class DelayProcess:
    kind: DelayKind
    tau_max: float
    resample_period: float = DEFAULT_PERIOD
    seed: int = 0
    link: LinkModel | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("constant", "uniform-resampled", "wireless-coupled"):
            raise ValueError(f"unknown delay kind {self.kind!r}")
        if not (self.tau_max >= 0 and math.isfinite(self.tau_max)):
            raise ValueError(f"tau_max must be finite and >= 0, got {self.tau_max}")
        if self.kind == "uniform-resampled" and self.tau_max <= 0:
            raise ValueError("uniform-resampled delay needs tau_max > 0")
        if not self.resample_period > 0:
            raise ValueError("resample_period must be > 0")
        if self.kind == "wireless-coupled" and self.link is None:
            raise ValueError("wireless-coupled delay needs a link model")

    @property
    def history_depth(self) -> float:
        if self.kind == "wireless-coupled":
            return self.link.history_depth
        return self.tau_max

    def sampler(self) -> Callable[[int, np.ndarray], tuple[float, bool]]:
        """Fresh, seeded per-period delay source: ``f(period, errors) -> (tau, lost)``."""
        if self.kind == "constant":
            tau = self.tau_max
            return lambda p, e: (tau, False)
        if self.kind == "uniform-resampled":
            rng = np.random.Generator(np.random.PCG64(self.seed))
            lo, hi = MIN_DELAY, self.tau_max
            if hi <= lo:
                return lambda p, e: (hi, False)

            def draw(p, e):
                # hi - U*(hi - lo) with U in [0, 1) lies in (lo, hi]
                return hi - rng.random() * (hi - lo), False
            return draw
        return self.link.sampler(self.seed)


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray            # (n,)
    errors: np.ndarray       # (n, 8), columns as formation.ERROR_COLUMNS
    tau: np.ndarray          # (n,) age of the delayed sample in use, seconds
    step: float
    horizon: float
    status: str = STATUS_OK
    scenario_hash: str = ""

    @property
    def diverged(self) -> bool:
        return self.status == STATUS_DIVERGED

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    settle_time: float
    max_overshoot: float
    diverged: bool = False


@numba.njit(cache=True)
def _lookup(td, n_cur, h, ring, e0, stage_t, y_stage, out):
    nbuf = ring.shape[0]
    t_cur = n_cur * h
    if td <= 0.0:
        for i in range(8):
            out[i] = e0[i]
        return
    if td > t_cur:
        # delayed instant lies inside the current step: interpolate toward the stage value
        frac = (td - t_cur) / (stage_t - t_cur)
        base = n_cur % nbuf
        for i in range(8):
            out[i] = ring[base, i] + frac * (y_stage[i] - ring[base, i])
        return
    q = td / h
    lo = int(math.floor(q))
    if lo >= n_cur:
        base = n_cur % nbuf
        for i in range(8):
            out[i] = ring[base, i]
        return
    frac = q - lo
    i0 = lo % nbuf
    i1 = (lo + 1) % nbuf
    for i in range(8):
        out[i] = ring[i0, i] * (1.0 - frac) + ring[i1, i] * frac


@numba.njit(cache=True)
def _rhs(y, yd, m1, m2, out):
    for ax in range(2):
        o = 4 * ax
        for r in range(4):
            acc = 0.0
            for c in range(4):
                acc += m1[r, c] * y[o + c] + m2[r, c] * yd[o + c]
            out[o + r] = acc


@numba.njit(cache=True)
def _delayed_time(s, tau, held, hold_td, depth):
    if held:
        return max(hold_td, s - depth)
    return s - tau


@numba.njit(cache=True)
def _advance(ring, e0, n_start, n_steps, h, m1, m2, tau, held, hold_td, depth,
             out_states, out_tau, limit):
    """RK4 over ``n_steps`` grid steps from grid index ``n_start``.

    Writes each new state to the ring and to ``out_states``; returns the
    number of steps completed (fewer than ``n_steps`` on divergence).
    """
    nbuf = ring.shape[0]
    y = np.empty(8)
    yd = np.empty(8)
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    ys = np.empty(8)
    for s in range(n_steps):
        n = n_start + s
        t = n * h
        base = n % nbuf
        for i in range(8):
            y[i] = ring[base, i]

        _lookup(_delayed_time(t, tau, held, hold_td, depth), n, h, ring, e0, t, y, yd)
        _rhs(y, yd, m1, m2, k1)

        th = t + 0.5 * h
        for i in range(8):
            ys[i] = y[i] + 0.5 * h * k1[i]
        _lookup(_delayed_time(th, tau, held, hold_td, depth), n, h, ring, e0, th, ys, yd)
        _rhs(ys, yd, m1, m2, k2)

        for i in range(8):
            ys[i] = y[i] + 0.5 * h * k2[i]
        _lookup(_delayed_time(th, tau, held, hold_td, depth), n, h, ring, e0, th, ys, yd)
        _rhs(ys, yd, m1, m2, k3)

        t1 = t + h
        for i in range(8):
            ys[i] = y[i] + h * k3[i]
        _lookup(_delayed_time(t1, tau, held, hold_td, depth), n, h, ring, e0, t1, ys, yd)
        _rhs(ys, yd, m1, m2, k4)

        nxt = (n + 1) % nbuf
        bad = False
        for i in range(8):
            v = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            ring[nxt, i] = v
            out_states[s, i] = v
            if not (abs(v) <= limit):
                bad = True
        out_tau[s] = t1 - _delayed_time(t1, tau, held, hold_td, depth)
        if bad:
            return s + 1
    return n_steps


def _grid_count(length: float, step: float, what: str) -> int:
    n = int(round(length / step))
    if n < 1 or abs(n * step - length) > 1e-9 * max(length, step):
        raise ValueError(f"{what} ({length}) must be a positive integer multiple of step ({step})")
    return n


def check_step(step: float, delay: DelayProcess) -> None:
    if not (step > 0 and step <= MAX_STEP * (1 + 1e-12)):
        raise ValueError(f"step must be in (0, {MAX_STEP}] s, got {step}")
    if delay.tau_max > 0 and step > delay.tau_max / 10 * (1 + 1e-12):
        raise ValueError(f"step {step} s exceeds tau_max/10 = {delay.tau_max / 10} s")


def integrate_errors(e0, mats: SystemMatrices, delay: DelayProcess,
                     step: float = DEFAULT_STEP, horizon: float = 30.0,
                     scenario_hash: str = "",
                     on_period: Callable[[int, float, float, bool], None] | None = None) -> Trajectory:
    """Integrate de/dt = M1 e + M2 e(t - dtau) for both axes from ``e0``.

    ``on_period(p, t_start, tau, lost)`` is called once per control period
    with the sampled delay, before that period is integrated.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    check_step(step, delay)
    n_total = _grid_count(horizon, step, "horizon")
    per_period = _grid_count(delay.resample_period, step, "resample_period")

    e0 = np.ascontiguousarray(e0, dtype=float).reshape(8)
    depth = delay.history_depth
    nbuf = int(math.ceil(depth / step)) + 4
    ring = np.zeros((nbuf, 8))
    ring[0] = e0
    states = np.empty((n_total + 1, 8))
    taus = np.empty(n_total + 1)
    states[0] = e0
    m1 = np.ascontiguousarray(mats.m1, dtype=float)
    m2 = np.ascontiguousarray(mats.m2, dtype=float)

    sample = delay.sampler()
    hold_td = 0.0
    n = 0
    p = 0
    status = STATUS_OK
    while n < n_total:
        tau, lost = sample(p, states[n])
        tau = float(tau)
        if not lost and not 0.0 <= tau <= depth * (1 + 1e-12):
            raise ValueError(f"sampled delay {tau} s outside [0, history depth {depth} s]")
        t_start = n * step
        if on_period is not None:
            on_period(p, t_start, tau, lost)
        if lost:
            taus_first = t_start - max(hold_td, t_start - depth)
        else:
            taus_first = tau
        if n == 0:
            taus[0] = taus_first
        k = min(per_period, n_total - n)
        done = _advance(ring, e0, n, k, step, m1, m2, tau, lost, hold_td, depth,
                        states[n + 1:n + 1 + k], taus[n + 1:n + 1 + k], DIVERGENCE_LIMIT)
        t_end = (n + k) * step
        hold_td = max(hold_td, t_end - depth) if lost else t_end - tau
        n += done
        p += 1
        if done < k:
            status = STATUS_DIVERGED
            break

    t = np.arange(n + 1) * step
    return Trajectory(t=t, errors=states[:n + 1].copy(), tau=taus[:n + 1].copy(),
                      step=step, horizon=horizon, status=status, scenario_hash=scenario_hash)


def integrate_dde(initial: SwarmState, targets: FormationTargets, gains: ControlGains,
                  delay: DelayProcess, step: float = DEFAULT_STEP, horizon: float = 30.0,
                  scenario_hash: str = "") -> Trajectory:
    """Simulate the formation from a full swarm state.

    The leader is not integrated; its velocity is pinned to the target, so
    only the follower errors evolve.
    """
    e = compute_errors(initial, targets)
    mats = build_error_matrices(gains)
    return integrate_errors(e.as_vector(), mats, delay, step, horizon, scenario_hash)


def random_initial_errors(rng: np.random.Generator, spacing_spread: float = 5.0,
                          velocity_spread: float = 2.0) -> ErrorState:
    """Random follower offsets and velocity mismatches (uniform, symmetric)."""
    d = rng.uniform(-spacing_spread, spacing_spread, size=(2, 2))
    z = rng.uniform(-velocity_spread, velocity_spread, size=(2, 2))
    return ErrorState(np.array([d[0, 0], d[0, 1], z[0, 0], z[0, 1]]),
                      np.array([d[1, 0], d[1, 1], z[1, 0], z[1, 1]]))


def convergence_metrics(traj: Trajectory, eps: float = 1e-2, hold_window: float = 2.0) -> ConvergenceReport:
    """Settling summary of a trajectory.

    ``settle_time`` is the first grid instant after which every error stays
    below ``eps`` until the end of the run; the run counts as converged when
    that tail lasts at least ``hold_window`` seconds and did not diverge.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    mag = np.max(np.abs(traj.errors), axis=1)
    finite = np.isfinite(mag)
    overshoot = float(np.max(mag[finite])) if finite.any() else math.inf
    above = np.nonzero(~(mag < eps))[0]
    idx = 0 if len(above) == 0 else int(above[-1]) + 1
    if idx >= len(traj) or traj.diverged:
        return ConvergenceReport(False, math.inf, overshoot, traj.diverged)
    settle = float(traj.t[idx])
    converged = (float(traj.t[-1]) - settle) >= hold_window - 1e-12
    return ConvergenceReport(converged, settle, overshoot, False)


def lyapunov_values(traj: Trajectory, c: np.ndarray) -> np.ndarray:
    """V = e_x^T C e_x + e_y^T C e_y along the trajectory."""
    ex = traj.errors[:, :4]
    ey = traj.errors[:, 4:]
    return np.einsum("ni,ij,nj->n", ex, c, ex) + np.einsum("ni,ij,nj->n", ey, c, ey)


def scenario_digest(payload: str) -> str:
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
