"""Ground-truth propagation and the Monte Carlo trajectory engine.

Two routes to the same channel are kept separate on purpose: the reference
functions here compose superoperator matrices directly, while the sampling
engine works in the eigenbasis of the Hamiltonian, where every unitary segment
is a diagonal phase, and batches plans with equal jump count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import matcore as mc
from .errors import DomainError, InvalidInputError
from .gadgets import build_jump_gadget
from .lindblad import LindbladModel, liouvillian, require_admissible
from .trajectory import (
    SimulationBudget,
    TrajectoryPlan,
    compile_trajectory,
    tail_bound,
    trajectory_stream,
    truncation_order,
)

MODES = ("exact-unitary", "gadget-simulated", "error-injected")
N_BATCHES = 20
CHUNK = 2048


# -- reference channels -------------------------------------------------------


def exact_propagator(model: LindbladModel, total_time: float) -> np.ndarray:
    """``exp(T L)`` for the full Liouvillian (admissible or not)."""
    if total_time < 0:
        raise DomainError("T must be nonnegative")
    return mc.expm(total_time * liouvillian(model))


def jump_channel(model: LindbladModel) -> np.ndarray:
    """Averaged jump map with Kraus operators ``L_mu / sqrt(Gamma)``."""
    gamma = require_admissible(model)
    if gamma == 0:
        raise DomainError("Gamma = 0: the model has no jump channel")
    s = math.sqrt(gamma)
    return mc.kraus_to_superop([l / s for l in model.jumps])


def unitary_propagator(model: LindbladModel, t: float) -> np.ndarray:
    return mc.expm(-1j * t * model.hamiltonian)


def unitary_channel(model: LindbladModel, t: float) -> np.ndarray:
    return mc.unitary_superop(unitary_propagator(model, t))


def perturbation_unitary(dim: int, epsilon_h: float) -> np.ndarray:
    """``exp(-i delta Y)`` on the first qubit, at diamond distance exactly ``epsilon_h`` from I.

    The spectrum is ``exp(+-i delta)`` so the distance is ``sin(delta)``.
    """
    if not 0 <= epsilon_h <= 1:
        raise DomainError("epsilon_H must lie in [0, 1]")
    if dim < 2 or dim % 2:
        raise DomainError("perturbation needs at least one system qubit")
    delta = math.asin(epsilon_h)
    rot = math.cos(delta) * np.eye(2) - 1j * math.sin(delta) * mc.pauli("Y")
    return np.kron(rot, np.eye(dim // 2))


def trajectory_channel(model: LindbladModel, plan: TrajectoryPlan, jump=None, perturbation=None) -> np.ndarray:
    """``U_res o J o U_tN o ... o J o U_t1``; the first holding segment acts first.

    ``jump`` overrides the jump channel; ``perturbation`` (a superoperator) is
    applied after every unitary segment.
    """
    if plan.jump_count and jump is None:
        jump = jump_channel(model)
    out = mc.identity_superop(model.dim)

    def segment(t):
        u = unitary_channel(model, t)
        return u if perturbation is None else perturbation @ u

    for t in plan.holding_times:
        out = jump @ segment(t) @ out
    return segment(plan.residual_time) @ out


# -- statevector trajectories ----------------------------------------------------


def _evolve(eig: tuple[np.ndarray, np.ndarray], psi: np.ndarray, t: float) -> np.ndarray:
    lam, v = eig
    return v @ (np.exp(-1j * lam * t) * (mc.dagger(v) @ psi))


def _apply_jump(jumps, gamma: float, psi: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    outs = [l @ psi for l in jumps]
    probs = np.array([np.vdot(o, o).real for o in outs]) / gamma
    mu = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
    mu = min(mu, len(outs) - 1)
    o = outs[mu]
    return o / np.linalg.norm(o), mu


def jump_probabilities(model: LindbladModel, psi) -> np.ndarray:
    """``||L_mu psi||^2 / Gamma``, a probability vector for admissible models."""
    gamma = require_admissible(model)
    psi = np.asarray(psi, dtype=np.complex128)
    return np.array([np.vdot(l @ psi, l @ psi).real for l in model.jumps]) / gamma


def run_statevector_trajectory(model: LindbladModel, psi0, total_time: float, r: int,
                               rng: np.random.Generator) -> tuple[np.ndarray, list[tuple[float, int]]]:
    """One unraveled pure-state path. Returns the final state and ``(jump time, mu)`` records."""
    gamma = require_admissible(model)
    psi = np.asarray(psi0, dtype=np.complex128).reshape(-1)
    if psi.size != model.dim:
        raise InvalidInputError(f"state has length {psi.size}, model dimension is {model.dim}")
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise InvalidInputError("input state is not normalized")
    eig = np.linalg.eigh(model.hamiltonian)
    plan = compile_trajectory(rng, gamma, total_time, r)
    return _statevector_path(eig, model.jumps, gamma, psi, plan, rng)


def _statevector_path(eig, jumps, gamma, psi, plan, rng):
    record = []
    clock = 0.0
    for t in plan.holding_times:
        psi = _evolve(eig, psi, t)
        clock += t
        psi, mu = _apply_jump(jumps, gamma, psi, rng)
        record.append((clock, mu))
    psi = _evolve(eig, psi, plan.residual_time)
    return psi / np.linalg.norm(psi), record


# -- Monte Carlo engine ---------------------------------------------------------


@dataclass(frozen=True)
class McConfig:
    samples: int
    seed: int
    mode: str = "exact-unitary"
    injected_epsilon_h: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise DomainError("samples must be positive")
        if self.workers < 1:
            raise DomainError("workers must be positive")
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode != "error-injected" and self.injected_epsilon_h != 0:
            raise InvalidInputError("injected_epsilon_h is only meaningful in error-injected mode")
        if not 0 <= self.injected_epsilon_h <= 1:
            raise DomainError("injected_epsilon_h must lie in [0, 1]")


@dataclass(frozen=True)
class McResult:
    sample_count: int
    restart_count: int
    jump_histogram: dict[int, float]
    batch_means: list[np.ndarray]
    mc_sigma: float
    mean_channel: np.ndarray | None = None
    mean_state: np.ndarray | None = None


@dataclass(frozen=True)
class _Kernel:
    """Everything a worker needs, expressed in the Hamiltonian eigenbasis."""

    omega: np.ndarray
    jump: np.ndarray | None
    perturb: np.ndarray | None
    gamma: float
    total_time: float
    r: int
    seed: int


def _eigen_frame(model: LindbladModel) -> tuple[np.ndarray, np.ndarray]:
    """``(Q, omega)`` with ``Q^dag U_t Q = diag(exp(-i omega t))``."""
    lam, v = np.linalg.eigh(model.hamiltonian)
    q = np.kron(np.conj(v), v)
    omega = (lam[None, :] - lam[:, None]).reshape(-1)
    return q, omega


def _plans(kernel: _Kernel, start: int, stop: int) -> list[TrajectoryPlan]:
    if kernel.gamma == 0:
        return [TrajectoryPlan((), kernel.total_time)] * (stop - start)
    return [compile_trajectory(trajectory_stream(kernel.seed, i), kernel.gamma, kernel.total_time, kernel.r)
            for i in range(start, stop)]


def _channel_chunk(kernel: _Kernel, start: int, stop: int):
    plans = _plans(kernel, start, stop)
    dim = kernel.omega.size
    total = np.zeros((dim, dim), dtype=np.complex128)
    groups: dict[int, list[TrajectoryPlan]] = {}
    for p in plans:
        groups.setdefault(p.jump_count, []).append(p)

    def segment(m, t):
        m = np.exp(-1j * np.outer(t, kernel.omega))[:, :, None] * m
        return m if kernel.perturb is None else kernel.perturb @ m

    for n_jumps in sorted(groups):
        group = groups[n_jumps]
        times = np.array([p.holding_times for p in group]).reshape(len(group), n_jumps)
        res = np.array([p.residual_time for p in group])
        m = np.broadcast_to(np.eye(dim, dtype=np.complex128), (len(group), dim, dim))
        for k in range(n_jumps):
            m = kernel.jump @ segment(m, times[:, k])
        total += segment(m, res).sum(axis=0)
    counts: dict[int, int] = {n: len(g) for n, g in groups.items()}
    return total, sum(p.restarts for p in plans), counts


def _chunks(samples: int) -> list[list[tuple[int, int]]]:
    """Contiguous batches (at most 20), each split into chunks of at most CHUNK."""
    k = min(N_BATCHES, samples)
    bounds = [i * samples // k for i in range(k + 1)]
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        out.append([(s, min(s + CHUNK, b)) for s in range(a, b, CHUNK)])
    return out


def _run_tasks(fn, payload, batches, workers: int):
    tasks = [(s, e) for batch in batches for (s, e) in batch]
    if workers == 1:
        results = [fn(payload, s, e) for s, e in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, [payload] * len(tasks), [s for s, _ in tasks], [e for _, e in tasks]))
    # reduce in fixed task order so the result does not depend on scheduling
    it = iter(results)
    per_batch = []
    for batch in batches:
        acc, restarts, counts = None, 0, {}
        for _ in batch:
            total, rs, cs = next(it)
            acc = total if acc is None else acc + total
            restarts += rs
            for n, c in cs.items():
                counts[n] = counts.get(n, 0) + c
        per_batch.append((acc, restarts, counts))
    return per_batch


def _summarize(per_batch, batches, samples: int, to_frame, distance):
    sizes = [batch[-1][1] - batch[0][0] for batch in batches]
    total = None
    restarts = 0
    counts: dict[int, int] = {}
    for acc, rs, cs in per_batch:
        total = acc if total is None else total + acc
        restarts += rs
        for n, c in cs.items():
            counts[n] = counts.get(n, 0) + c
    mean = to_frame(total / samples)
    batch_means = [to_frame(acc / size) for (acc, _, _), size in zip(per_batch, sizes)]
    k = len(batch_means)
    if k < 2:
        sigma = 0.0 if samples == 1 else math.nan
    else:
        sigma = math.sqrt(math.fsum(distance(b, mean) ** 2 for b in batch_means) / (k * (k - 1)))
    hist = {n: counts[n] / samples for n in sorted(counts)}
    return mean, batch_means, sigma, restarts, hist


def _mode_channels(model: LindbladModel, cfg: McConfig):
    jump = None
    if require_admissible(model) > 0:
        jump = build_jump_gadget(model).system_channel() if cfg.mode == "gadget-simulated" else jump_channel(model)
    perturb = None
    if cfg.mode == "error-injected":
        perturb = mc.unitary_superop(perturbation_unitary(model.dim, cfg.injected_epsilon_h))
    return jump, perturb


def mc_channel_estimate(model: LindbladModel, total_time: float, budget: SimulationBudget,
                        cfg: McConfig) -> McResult:
    """Average of trajectory channels over ``cfg.samples`` compiled plans.

    Trajectory ``i`` draws from ``trajectory_stream(cfg.seed, i)`` and the
    reduction order is fixed, so the result is bitwise independent of
    ``cfg.workers``.
    """
    gamma = require_admissible(model)
    if not total_time > 0:
        raise DomainError("T must be positive")
    q, omega = _eigen_frame(model)
    qd = mc.dagger(q)
    jump, perturb = _mode_channels(model, cfg)
    kernel = _Kernel(
        omega,
        None if jump is None else qd @ jump @ q,
        None if perturb is None else qd @ perturb @ q,
        gamma, float(total_time), budget.r, int(cfg.seed),
    )
    batches = _chunks(cfg.samples)
    per_batch = _run_tasks(_channel_chunk, kernel, batches, cfg.workers)
    mean, bm, sigma, restarts, hist = _summarize(
        per_batch, batches, cfg.samples, lambda s: q @ s @ qd, mc.choi_distance)
    return McResult(cfg.samples, restarts, hist, bm, sigma, mean_channel=mean)


@dataclass(frozen=True)
class _StateKernel:
    eig: tuple[np.ndarray, np.ndarray]
    jumps: tuple[np.ndarray, ...]
    gamma: float
    psi0: np.ndarray
    total_time: float
    r: int
    seed: int


def _state_chunk(kernel: _StateKernel, start: int, stop: int):
    d = kernel.psi0.size
    acc = np.zeros((d, d), dtype=np.complex128)
    counts: dict[int, int] = {}
    restarts = 0
    for i in range(start, stop):
        rng = trajectory_stream(kernel.seed, i)
        if kernel.gamma == 0:
            plan = TrajectoryPlan((), kernel.total_time)
        else:
            plan = compile_trajectory(rng, kernel.gamma, kernel.total_time, kernel.r)
        psi, _ = _statevector_path(kernel.eig, kernel.jumps, kernel.gamma, kernel.psi0, plan, rng)
        acc += np.outer(psi, np.conj(psi))
        counts[plan.jump_count] = counts.get(plan.jump_count, 0) + 1
        restarts += plan.restarts
    return acc, restarts, counts


def _trace_distance(a, b) -> float:
    return 0.5 * mc.trace_norm(a - b)


def mc_state_estimate(model: LindbladModel, psi0, total_time: float, budget: SimulationBudget,
                      cfg: McConfig) -> McResult:
    """Average of ``|psi(T)><psi(T)|`` over statevector trajectories (exact-unitary mode only)."""
    if cfg.mode != "exact-unitary":
        raise InvalidInputError("statevector estimation supports exact-unitary mode only")
    gamma = require_admissible(model)
    psi = np.asarray(psi0, dtype=np.complex128).reshape(-1)
    if psi.size != model.dim or abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise InvalidInputError("input state must be a normalized vector of the model dimension")
    kernel = _StateKernel(np.linalg.eigh(model.hamiltonian), model.jumps, gamma, psi,
                          float(total_time), budget.r, int(cfg.seed))
    batches = _chunks(cfg.samples)
    per_batch = _run_tasks(_state_chunk, kernel, batches, cfg.workers)
    mean, bm, sigma, restarts, hist = _summarize(
        per_batch, batches, cfg.samples, mc.hermitian_part, _trace_distance)
    return McResult(cfg.samples, restarts, hist, bm, sigma, mean_state=mean)


# -- error budget -----------------------------------------------------------------


@dataclass(frozen=True)
class BudgetRow:
    epsilon_h: float
    measured: float
    lower: float
    bound: float
    mc_sigma: float

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound + 5 * self.mc_sigma


@dataclass(frozen=True)
class BudgetReport:
    r: int
    truncation_term: float
    rows: list[BudgetRow] = field(default_factory=list)
    slope: float = math.nan

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows) and self.slope <= self.r + 1

    def table(self) -> str:
        lines = ["epsilon_H  measured  bound  mc_sigma"]
        lines += [f"{row.epsilon_h:.3e}  {row.measured:.6e}  {row.bound:.6e}  {row.mc_sigma:.3e}" for row in self.rows]
        return "\n".join(lines)


def validate_error_budget(model: LindbladModel, total_time: float, epsilon: float,
                          eps_h_grid: Sequence[float], samples: int, seed: int = 0,
                          workers: int = 1, r: int | None = None) -> BudgetReport:
    """Error-injected runs checked against ``tail_bound + (r + 1) epsilon_H``.

    Every grid point reuses the same seed, so the plans are shared and the
    fitted slope is not polluted by independent sampling noise.
    """
    gamma = require_admissible(model)
    r = truncation_order(gamma, total_time, epsilon) if r is None else r
    trunc = tail_bound(gamma, total_time, r) if gamma > 0 else 0.0
    exact = exact_propagator(model, total_time)
    rows = []
    for eps_h in eps_h_grid:
        mode = "error-injected" if eps_h > 0 else "exact-unitary"
        cfg = McConfig(samples, seed, mode, float(eps_h), workers)
        res = mc_channel_estimate(model, total_time, SimulationBudget(epsilon, r, float(eps_h)), cfg)
        lo, hi = mc.diamond_distance_bounds(res.mean_channel, exact)
        rows.append(BudgetRow(float(eps_h), hi, lo, trunc + (r + 1) * eps_h, res.mc_sigma))
    xs = np.array([row.epsilon_h for row in rows])
    ys = np.array([row.measured for row in rows])
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(set(xs.tolist())) > 1 else math.nan
    return BudgetReport(r, trunc, rows, slope)
