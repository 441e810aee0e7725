"""Holding-time sampling, the jump counting process, and randomized compilation.

For an admissible model the waiting time between jumps is Exp(Gamma)
independently of the state, so a whole trajectory skeleton (the list of
holding times) can be drawn before anything is simulated. Plans with more
than ``r`` jumps are rejected and redrawn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError, NumericalFailure

MAX_RESTARTS = 10**6
_UINT64 = (1 << 64) - 1


def trajectory_stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for trajectory ``index`` under a global ``seed``.

    Philox keyed by the seed, with the trajectory index in the second counter
    word; each trajectory owns 2^64 counter blocks, so streams never overlap and
    any partition of indices over workers reproduces the serial draws.
    """
    bitgen = np.random.Philox(key=int(seed) & _UINT64, counter=[0, int(index) & _UINT64, 0, 0])
    return np.random.Generator(bitgen)


@dataclass(frozen=True)
class TrajectoryPlan:
    holding_times: tuple[float, ...]
    total_time: float
    restarts: int = 0

    def __post_init__(self):
        s = math.fsum(self.holding_times)
        if s > self.total_time or any(t < 0 for t in self.holding_times):
            raise ValueError("holding times must be nonnegative and sum to at most total_time")

    @property
    def jump_count(self) -> int:
        return len(self.holding_times)

    @property
    def residual_time(self) -> float:
        return max(0.0, self.total_time - math.fsum(self.holding_times))


@dataclass(frozen=True)
class SimulationBudget:
    epsilon: float
    r: int
    epsilon_h: float


def sample_holding_time(rng: np.random.Generator, gamma: float) -> float:
    """Inversion sample ``(1/Gamma) ln(1/(1 - eta))`` with ``eta ~ U[0, 1)``."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    return holding_time_from_uniform(rng.random(), gamma)


def holding_time_from_uniform(eta: float, gamma: float) -> float:
    return -math.log1p(-eta) / gamma


def compile_trajectory(rng: np.random.Generator, gamma: float, total_time: float, r: int) -> TrajectoryPlan:
    """Draw holding times until the running sum passes ``total_time``.

    The overshooting draw is discarded and the plan accepted with the jumps so
    far. If ``r + 1`` draws all fit inside ``total_time`` the attempt had more
    than ``r`` jumps; it is discarded and sampling restarts.
    """
    if not total_time > 0:
        raise DomainError("total_time must be positive")
    if gamma < 0:
        raise DomainError("gamma must be nonnegative")
    if gamma == 0:
        return TrajectoryPlan((), float(total_time))
    if r < 1:
        raise DomainError("r must be at least 1 when gamma > 0")
    for restart in range(MAX_RESTARTS):
        times: list[float] = []
        elapsed = 0.0
        for _ in range(r + 1):
            t = sample_holding_time(rng, gamma)
            if elapsed + t > total_time:
                return TrajectoryPlan(tuple(times), float(total_time), restart)
            times.append(t)
            elapsed += t
    raise NumericalFailure(f"no plan with at most {r} jumps after {MAX_RESTARTS} restarts")


def _log_tail_bound(x: float, r: int) -> float:
    return r * (1.0 + math.log(x) - math.log(r)) - x


def tail_bound(gamma: float, total_time: float, r: int) -> float:
    """Chernoff bound ``(e Gamma T / r)^r exp(-Gamma T)`` on ``Pr(N(T) > r)``."""
    if r < 1:
        raise DomainError("r must be at least 1")
    x = gamma * total_time
    if x <= 0:
        return 0.0
    return math.exp(_log_tail_bound(x, r))


def truncation_order(gamma: float, total_time: float, epsilon: float) -> int:
    """Smallest ``r >= max(1, ceil(Gamma T))`` whose tail bound is at most ``epsilon / 2``."""
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    if gamma < 0 or total_time <= 0:
        raise DomainError("need gamma >= 0 and total_time > 0")
    x = gamma * total_time
    if x == 0:
        return 0
    target = math.log(epsilon / 2)
    r = max(1, math.ceil(x))
    while _log_tail_bound(x, r) > target:
        r += 1
    return r


def allocate_budget(gamma: float, total_time: float, epsilon: float) -> SimulationBudget:
    """Split ``epsilon`` between the jump-count tail and ``r + 1`` Hamiltonian segments."""
    r = truncation_order(gamma, total_time, epsilon)
    return SimulationBudget(epsilon, r, epsilon / (2 * (r + 1)))


def erlang_tail(n: int, gamma: float, total_time: float) -> float:
    """``G_n(T) = Pr(S_n > T) = sum_{a<n} exp(-Gamma T) (Gamma T)^a / a!``."""
    if n < 1:
        raise DomainError("n must be at least 1")
    return math.fsum(counting_pmf(a, gamma, total_time) for a in range(n))


def counting_pmf(n: int, gamma: float, total_time: float) -> float:
    """``Pr(N(T) = n)`` for the Poisson counting process of rate Gamma."""
    if n < 0:
        return 0.0
    x = gamma * total_time
    if x == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(x) - x - math.lgamma(n + 1))


# -- distribution diagnostics -------------------------------------------------


@dataclass(frozen=True)
class DistributionReport:
    gamma: float
    total_time: float
    samples: int
    ks_statistic: float
    ks_critical: float
    r: int
    jump_histogram: dict[int, float]
    tv_distance: float
    raw_runs: int
    empirical_tail: float
    tail_bound: float
    tail_sigma: float

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "time": self.total_time, "samples": self.samples,
            "ks_statistic": self.ks_statistic, "ks_critical_alpha_0.01": self.ks_critical,
            "ks_pass": self.ks_statistic < self.ks_critical,
            "r": self.r, "jump_histogram": {str(k): v for k, v in self.jump_histogram.items()},
            "tv_distance_poisson": self.tv_distance,
            "raw_runs": self.raw_runs, "empirical_tail": self.empirical_tail,
            "tail_bound": self.tail_bound, "tail_sigma": self.tail_sigma,
            "tail_pass": self.empirical_tail <= self.tail_bound + 3 * self.tail_sigma,
        }


def distribution_report(gamma: float, total_time: float, samples: int, seed: int,
                        epsilon: float = 1e-3) -> DistributionReport:
    """KS test of holding times, Poisson TV of jump counts, and tail frequency."""
    if not (gamma > 0 and total_time > 0 and samples > 0):
        raise DomainError("need gamma > 0, total_time > 0, samples > 0")
    rng = trajectory_stream(seed, 0)
    holding = np.array([sample_holding_time(rng, gamma) for _ in range(samples)])
    ks = float(stats.kstest(holding, "expon", args=(0, 1 / gamma)).statistic)
    critical = 1.63 / math.sqrt(samples)

    r = truncation_order(gamma, total_time, epsilon)
    counts: dict[int, int] = {}
    restarts = 0
    for i in range(samples):
        plan = compile_trajectory(trajectory_stream(seed, i + 1), gamma, total_time, r)
        counts[plan.jump_count] = counts.get(plan.jump_count, 0) + 1
        restarts += plan.restarts
    hist = {n: counts[n] / samples for n in sorted(counts)}
    covered = sum(counting_pmf(n, gamma, total_time) for n in range(r + 1))
    tv = 0.5 * (sum(abs(hist.get(n, 0.0) - counting_pmf(n, gamma, total_time)) for n in range(r + 1))
                + (1.0 - covered))
    raw = samples + restarts
    bound = tail_bound(gamma, total_time, r)
    return DistributionReport(
        gamma, total_time, samples, ks, critical, r, hist, tv, raw,
        restarts / raw, bound, math.sqrt(bound * (1 - bound) / raw),
    )
