"""Intra-swarm link reliability under a Poisson field of interferers.

The desired link sees Nakagami-beta fading (unit-mean Gamma power); each
interferer sees Rayleigh fading (unit-mean exponential power). Interferers
form a planar Poisson point process of density ``density_lambda`` around
the receiver. Packet delay is S / (omega * log2(1 + SINR)).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np
from scipy import integrate

NOISE_PSD_DBM_HZ = -174.0
DEFAULT_NOISE_PSD = 10 ** (NOISE_PSD_DBM_HZ / 10) * 1e-3   # W/Hz
DEFAULT_TX_POWER = 0.1                                      # 20 dBm, W

MC_REGION_RADIUS = 2000.0   # m
MC_EXPLICIT_RADIUS = 30.0   # m; interferers beyond this enter through their mean power
MC_CHUNK = 1 << 16          # trials per independently seeded chunk
MIN_MC_TRIALS = 10_000
_INTERFERER_BATCH = 1 << 21   # interferers held in memory at once

INFINITE_DELAY = math.inf


def dbm_to_watts(dbm: float) -> float:
    return 10 ** (dbm / 10) * 1e-3


@dataclass(frozen=True)
class WirelessParams:
    beta: int = 3
    alpha: float = 3.0
    density_lambda: float = 0.05       # interferers per m^2
    p_t: float = DEFAULT_TX_POWER      # W
    noise_psd: float = DEFAULT_NOISE_PSD  # W/Hz
    bandwidth_omega: float = 20e6      # Hz
    packet_bits_s: float = 3200.0      # bits

    def __post_init__(self):
        if isinstance(self.beta, bool) or not isinstance(self.beta, (int, np.integer)) or self.beta < 1:
            raise ValueError(f"beta must be a positive integer, got {self.beta!r}")
        if not self.alpha > 2:
            raise ValueError(f"alpha must be > 2 for the interference integral to converge, got {self.alpha}")
        if not self.density_lambda >= 0:
            raise ValueError("density_lambda must be >= 0")
        if not self.p_t > 0:
            raise ValueError("p_t must be > 0")
        if not self.noise_psd >= 0:
            raise ValueError("noise_psd must be >= 0")
        if not self.bandwidth_omega > 0:
            raise ValueError("bandwidth_omega must be > 0")
        if not self.packet_bits_s > 0:
            raise ValueError("packet_bits_s must be > 0")

    @property
    def eta(self) -> float:
        """beta * (beta!)^(-1/beta)."""
        return self.beta * math.factorial(self.beta) ** (-1.0 / self.beta)

    @property
    def noise_power(self) -> float:
        """Thermal noise over the link bandwidth, W."""
        return self.noise_psd * self.bandwidth_omega

    def with_density(self, density: float) -> "WirelessParams":
        return replace(self, density_lambda=density)


@dataclass(frozen=True)
class LinkBudget:
    distance_d: float
    sinr_threshold: float
    required_delay: float = math.nan

    def __post_init__(self):
        if not self.distance_d > 0:
            raise ValueError("distance_d must be > 0")
        if not self.sinr_threshold >= 0:
            raise ValueError("sinr_threshold must be >= 0")

    @classmethod
    def from_delay(cls, distance: float, required_delay: float, params: WirelessParams) -> "LinkBudget":
        return cls(distance, sinr_threshold(required_delay, params), required_delay)


@dataclass(frozen=True)
class ReliabilityEstimate:
    value: float
    method: Literal["analytic", "monte-carlo"]
    trials: int | None = None
    ci_halfwidth_95: float | None = None
    successes: int | None = None


def link_delay(sinr: float, params: WirelessParams) -> float:
    """Transmission delay of one packet at the given SINR (inf if SINR is 0)."""
    if sinr < 0:
        raise ValueError("sinr must be >= 0")
    if sinr == 0:
        return INFINITE_DELAY
    return params.packet_bits_s / (params.bandwidth_omega * math.log2(1.0 + sinr))


def sinr_threshold(required_delay: float, params: WirelessParams) -> float:
    """Smallest SINR whose packet delay does not exceed ``required_delay``."""
    if not required_delay > 0:
        raise ValueError(f"required delay must be > 0, got {required_delay}")
    if math.isinf(required_delay):
        return 0.0
    return math.expm1(math.log(2.0) * params.packet_bits_s / (params.bandwidth_omega * required_delay))


def _laplace_shape_integral(alpha: float) -> float:
    """int_0^inf u / (1 + u^alpha) du, in closed form."""
    return math.pi / (alpha * math.sin(2.0 * math.pi / alpha))


def interference_laplace(n: float, params: WirelessParams) -> float:
    """E[exp(-n I)] for the Rayleigh-faded PPP interference, closed form."""
    if not params.alpha > 2:
        raise ValueError("interference Laplace transform diverges for alpha <= 2")
    if n < 0:
        raise ValueError("n must be >= 0")
    s = n * params.p_t
    if s == 0 or params.density_lambda == 0:
        return 1.0
    exponent = 2.0 * math.pi * params.density_lambda * s ** (2.0 / params.alpha) * _laplace_shape_integral(params.alpha)
    return math.exp(-exponent)


def interference_laplace_quadrature(n: float, params: WirelessParams, rtol: float = 1e-9) -> float:
    """Same transform by adaptive quadrature.

    With r = s^(1/alpha) u the radial integral becomes s^(2/alpha) times
    int_0^inf u / (1 + u^alpha) du, split at u = 1; the tail is mapped to
    (0, 1] by u = 1/w, leaving w^(alpha-3) / (1 + w^alpha), whose endpoint
    power is handled by an algebraic quadrature weight.
    """
    if not params.alpha > 2:
        raise ValueError("interference Laplace transform diverges for alpha <= 2")
    if n < 0:
        raise ValueError("n must be >= 0")
    s = n * params.p_t
    if s == 0 or params.density_lambda == 0:
        return 1.0
    alpha = params.alpha
    head, _ = integrate.quad(lambda u: u / (1.0 + u ** alpha), 0.0, 1.0, epsabs=0.0, epsrel=rtol, limit=200)
    tail, _ = integrate.quad(lambda w: 1.0 / (1.0 + w ** alpha), 0.0, 1.0, weight="alg",
                             wvar=(alpha - 3.0, 0.0), epsabs=0.0, epsrel=rtol, limit=200)
    exponent = 2.0 * math.pi * params.density_lambda * s ** (2.0 / alpha) * (head + tail)
    return math.exp(-exponent)


def link_reliability(budget: LinkBudget, params: WirelessParams) -> ReliabilityEstimate:
    """Probability that the link meets its SINR threshold (Alzer-type approximation).

    The threshold on the fading gain is gamma_th * d^alpha / P_t times the
    noise-plus-interference power, so the distance enters with +alpha.
    """
    beta = params.beta
    base = params.eta * budget.sinr_threshold * budget.distance_d ** params.alpha / params.p_t
    total = 0.0
    for k in range(1, beta + 1):
        n = k * base
        total += ((-1) ** (k + 1) * math.comb(beta, k)
                  * math.exp(-n * params.noise_power) * interference_laplace(n, params))
    return ReliabilityEstimate(min(1.0, max(0.0, total)), "analytic")


def reliability_at(distance: float, required_delay: float, params: WirelessParams) -> float:
    return link_reliability(LinkBudget.from_delay(distance, required_delay, params), params).value


def max_spacing_for_reliability(target: float, required_delay: float, params: WirelessParams,
                                lo: float = 1e-3, hi: float = 1e3) -> float:
    """Largest spacing whose analytic reliability is still >= ``target`` (bisection)."""
    f = lambda d: reliability_at(d, required_delay, params) - target
    if f(lo) < 0:
        return 0.0
    if f(hi) >= 0:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return lo


# ---------------------------------------------------------------- sampling

def _draw_interference(rng: np.random.Generator, trials: int, params: WirelessParams,
                       region_radius: float, explicit_radius: float, r_min: float = 0.0) -> np.ndarray:
    """Aggregate interference power for ``trials`` independent PPP realizations.

    Interferers in the annulus [r_min, explicit_radius] are drawn one by one;
    the annulus [explicit_radius, region_radius] contributes its mean power.
    """
    lam = params.density_lambda
    out = np.zeros(trials)
    if lam == 0 or trials == 0:
        return out
    r_in = min(explicit_radius, region_radius)
    area = math.pi * (r_in ** 2 - r_min ** 2)
    counts = rng.poisson(lam * area, size=trials)
    # walk the trials in groups of bounded interferer count to cap memory;
    # the grouping depends only on the counts, so the stream is reproducible
    ends = np.cumsum(counts)
    start = 0
    while start < trials:
        base = int(ends[start - 1]) if start else 0
        stop = max(start + 1, int(np.searchsorted(ends, base + _INTERFERER_BATCH, side="right")))
        total = int(ends[stop - 1]) - base
        if total:
            r = np.sqrt(r_min ** 2 + rng.random(total) * (r_in ** 2 - r_min ** 2))
            g = rng.standard_exponential(total)
            owner = np.repeat(np.arange(stop - start), counts[start:stop])
            out[start:stop] += np.bincount(owner, weights=params.p_t * g * r ** (-params.alpha),
                                           minlength=stop - start)
        start = stop
    if region_radius > r_in:
        out += campbell_mean(params, r_in, region_radius)
    return out


def campbell_mean(params: WirelessParams, r_min: float, r_max: float) -> float:
    """Mean interference from the annulus [r_min, r_max]: 2 pi lambda P_t int r^(1-alpha) dr."""
    a = params.alpha
    if r_min <= 0:
        return math.inf
    return 2.0 * math.pi * params.density_lambda * params.p_t * (r_min ** (2 - a) - r_max ** (2 - a)) / (a - 2)


def sample_interference(params: WirelessParams, region_radius: float, seed: int,
                        r_min: float = 0.0, size: int | None = None):
    """Interference power at the receiver from a full PPP draw on a disc.

    Draws N ~ Poisson(lambda * pi * (R^2 - r_min^2)) interferers uniformly on
    the disc (or annulus), each with unit-mean exponential fading. Returns a
    float, or an array of ``size`` independent draws.
    """
    if not region_radius > r_min >= 0:
        raise ValueError("need region_radius > r_min >= 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = 1 if size is None else int(size)
    out = _draw_interference(rng, n, params, region_radius, region_radius, r_min)
    return float(out[0]) if size is None else out


def sample_signal_gain(rng: np.random.Generator, params: WirelessParams, size: int) -> np.ndarray:
    """Unit-mean Nakagami-beta power gains: Gamma(shape=beta, scale=1/beta)."""
    return rng.gamma(params.beta, 1.0 / params.beta, size=size)


def wilson_halfwidth(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Centre and half-width of the Wilson score interval."""
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return centre, half


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2 ** 64 - 1), chunk])))


def _chunk_successes(args) -> np.ndarray:
    params, distances, required_delay, seed, chunk, n, predicate, explicit_radius, region_radius = args
    rng = _chunk_rng(seed, chunk)
    h = sample_signal_gain(rng, params, n)
    interference = _draw_interference(rng, n, params, region_radius, explicit_radius)
    denom = params.noise_power + interference
    counts = np.empty(len(distances), dtype=np.int64)
    gamma_th = sinr_threshold(required_delay, params)
    with np.errstate(divide="ignore"):
        for j, d in enumerate(distances):
            sinr = params.p_t * h * d ** (-params.alpha) / denom
            if predicate == "delay":
                delay = params.packet_bits_s / (params.bandwidth_omega * np.log2(1.0 + sinr))
                ok = delay <= required_delay
            else:
                ok = sinr >= gamma_th
            counts[j] = int(np.count_nonzero(ok))
    return counts


def worker_count(requested: int | None = None) -> int:
    """Worker processes to use; ``SWARMCTL_THREADS`` caps the count."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("SWARMCTL_THREADS")
    if cap:
        try:
            n = min(n, int(cap)) if requested is not None else int(cap)
        except ValueError:
            raise ValueError(f"SWARMCTL_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def mc_success_counts(distances: Sequence[float], required_delay: float, params: WirelessParams,
                      trials: int, seed: int, workers: int | None = None,
                      predicate: Literal["delay", "sinr"] = "delay",
                      explicit_radius: float = MC_EXPLICIT_RADIUS,
                      region_radius: float = MC_REGION_RADIUS) -> np.ndarray:
    """Successful trials per distance, sharing fading and interference draws across distances.

    Trials are split into fixed chunks whose random streams are keyed by
    (seed, chunk index), so the counts do not depend on how many workers run.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    distances = [float(d) for d in distances]
    sizes = [MC_CHUNK] * (trials // MC_CHUNK)
    if trials % MC_CHUNK:
        sizes.append(trials % MC_CHUNK)
    jobs = [(params, distances, required_delay, seed, c, n, predicate, explicit_radius, region_radius)
            for c, n in enumerate(sizes)]
    nworkers = min(worker_count(workers), len(jobs))
    if nworkers <= 1:
        parts = [_chunk_successes(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            parts = list(pool.map(_chunk_successes, jobs))
    return np.sum(parts, axis=0)


def mc_reliability(budget: LinkBudget, params: WirelessParams, trials: int, seed: int,
                   workers: int | None = None, predicate: Literal["delay", "sinr"] = "delay",
                   explicit_radius: float = MC_EXPLICIT_RADIUS) -> ReliabilityEstimate:
    """Monte Carlo estimate of the link reliability with a Wilson 95% interval."""
    if trials < MIN_MC_TRIALS:
        raise ValueError(f"trials must be >= {MIN_MC_TRIALS}, got {trials}")
    required = budget.required_delay
    if not required > 0:
        raise ValueError("Monte Carlo reliability needs a budget built from a delay requirement")
    succ = int(mc_success_counts([budget.distance_d], required, params, trials, seed, workers,
                                 predicate, explicit_radius)[0])
    _, half = wilson_halfwidth(succ, trials)
    return ReliabilityEstimate(succ / trials, "monte-carlo", trials, half, succ)


def mc_reliability_sweep(distances: Sequence[float], required_delay: float, params: WirelessParams,
                         trials: int, seed: int, workers: int | None = None) -> list[ReliabilityEstimate]:
    if trials < MIN_MC_TRIALS:
        raise ValueError(f"trials must be >= {MIN_MC_TRIALS}, got {trials}")
    counts = mc_success_counts(distances, required_delay, params, trials, seed, workers)
    out = []
    for c in counts:
        _, half = wilson_halfwidth(int(c), trials)
        out.append(ReliabilityEstimate(int(c) / trials, "monte-carlo", trials, half, int(c)))
    return out
