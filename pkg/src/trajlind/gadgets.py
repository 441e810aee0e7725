"""Unitary-level jump gadget and the query/gate resource ledger.

Register order everywhere is ``index (x) flag ancilla (x) system``. The
select-W circuit post-selected on flag = |0> applies the Stinespring isometry
``|psi> -> sum_mu |mu> K_mu |psi>`` of the jump channel with probability
``Gamma / sum alpha^2``; oblivious amplitude amplification then makes it
deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import matcore as mc
from .errors import DomainError, ShapeError
from .lindblad import ADMISSIBLE_TOL, LindbladModel, require_admissible

_X = mc.pauli("X")


@dataclass(frozen=True)
class BlockEncoding:
    unitary: np.ndarray
    alpha: float
    ancilla_qubits: int
    encoded_dim: int

    def top_left(self) -> np.ndarray:
        """``(<0| (x) I) U (|0> (x) I)``, i.e. A / alpha."""
        d = self.encoded_dim
        return self.unitary[:d, :d]


def build_block_encoding(a, alpha: float) -> BlockEncoding:
    """One-ancilla unitary dilation with top-left block ``A / alpha``."""
    a = mc.as_cmat(a, "A")
    if a.shape[0] != a.shape[1]:
        raise ShapeError("block encodings are built for square operators")
    norm = mc.op_norm(a)
    if not alpha > 0 or alpha < norm - 1e-12:
        raise DomainError(f"alpha={alpha} is below ||A|| = {norm}; no unitary dilation exists")
    d = a.shape[0]
    # one SVD A/alpha = W S V^dag gives both defect square roots in compatible
    # bases, so the off-diagonal products cancel exactly even at singular values 1
    w, s, vh = np.linalg.svd(a / alpha)
    s = np.clip(s, 0.0, 1.0)
    c = np.sqrt((1.0 - s) * (1.0 + s))
    v = mc.dagger(vh)
    u = np.block([
        [(w * s) @ vh, (w * c) @ mc.dagger(w)],
        [(v * c) @ vh, -(v * s) @ mc.dagger(w)],
    ])
    return BlockEncoding(u, float(alpha), 1, d)


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def build_prep_oracle(alphas: Sequence[float], padded_weight: float = 0.0) -> np.ndarray:
    """Householder unitary whose first column is the normalized ``(alpha_1..alpha_m, sqrt(w), 0, ...)``."""
    weights = [float(x) for x in alphas]
    if any(x < 0 for x in weights) or padded_weight < 0:
        raise DomainError("weights must be nonnegative")
    if padded_weight > 0:
        weights.append(math.sqrt(padded_weight))
    dim = _next_pow2(len(weights))
    v = np.zeros(dim)
    v[:len(weights)] = weights
    norm = np.linalg.norm(v)
    if norm == 0:
        raise DomainError("all weights are zero")
    v /= norm
    e0 = np.zeros(dim)
    e0[0] = 1.0
    diff = e0 - v
    dn = np.linalg.norm(diff)
    if dn < 1e-15:
        return np.eye(dim, dtype=np.complex128)
    w = diff / dn
    return (np.eye(dim) - 2.0 * np.outer(w, w)).astype(np.complex128)


def build_select(encodings: Sequence[BlockEncoding], index_dim: int, has_dummy: bool = False) -> np.ndarray:
    """``sum_mu |mu><mu| (x) U(L_mu)``; the dummy branch flips the flag qubit."""
    if not encodings:
        raise ShapeError("need at least one block encoding")
    d = encodings[0].encoded_dim
    a = encodings[0].ancilla_qubits
    if any(e.encoded_dim != d or e.ancilla_qubits != a for e in encodings):
        raise ShapeError("block encodings must share system dimension and ancilla count")
    used = len(encodings) + (1 if has_dummy else 0)
    if used > index_dim:
        raise ShapeError(f"index register of dimension {index_dim} cannot hold {used} branches")
    block = (2 ** a) * d
    blocks = [e.unitary for e in encodings]
    if has_dummy:
        blocks.append(np.kron(np.kron(_X, np.eye(2 ** (a - 1))), np.eye(d)))
    blocks += [np.eye(block)] * (index_dim - used)
    out = np.zeros((index_dim * block, index_dim * block), dtype=np.complex128)
    for k, b in enumerate(blocks):
        out[k * block:(k + 1) * block, k * block:(k + 1) * block] = b
    return out


def build_w(encodings: Sequence[BlockEncoding], prep, has_dummy: bool = False) -> np.ndarray:
    """``W = select * (B (x) I (x) I)`` on index (x) flag (x) system."""
    prep = mc.as_cmat(prep, "prep oracle")
    index_dim = prep.shape[0]
    select = build_select(encodings, index_dim, has_dummy)
    rest = select.shape[0] // index_dim
    return select @ np.kron(prep, np.eye(rest))


def _input_embedding(index_dim: int, ancilla_qubits: int, d: int) -> np.ndarray:
    """Isometry ``|psi> -> |0>_idx |0>_anc |psi>`` as a matrix."""
    return np.eye(index_dim * (2 ** ancilla_qubits) * d, d, dtype=np.complex128)


def success_probability(w, state, index_dim: int, ancilla_qubits: int = 1) -> float:
    """Probability of flag = |0> after one application of W to ``|0>|0> rho``."""
    w = mc.as_cmat(w, "W")
    rho = mc.as_cmat(state, "state")
    d = rho.shape[0]
    na = 2 ** ancilla_qubits
    if w.shape[0] != index_dim * na * d:
        raise ShapeError(f"W of size {w.shape[0]} does not match registers ({index_dim}, {na}, {d})")
    emb = _input_embedding(index_dim, ancilla_qubits, d)
    out = w @ emb @ rho @ mc.dagger(emb) @ mc.dagger(w)
    t = out.reshape(index_dim, na, d, index_dim, na, d)
    return float(np.einsum("iajiaj->", t[:, :1, :, :, :1, :]).real)


@dataclass(frozen=True)
class JumpGadget:
    prep_oracle: np.ndarray
    select_unitary: np.ndarray
    w_circuit: np.ndarray
    circuit: np.ndarray
    p0: float
    p0_padded: float
    theta: float
    iterations: int
    padded_weight: float
    index_dim: int
    ancilla_qubits: int
    system_dim: int

    @property
    def flag_dim(self) -> int:
        return 2 ** self.ancilla_qubits

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        """``(P0, P1)``: flag = |0>, and the input subspace |0>_idx |0>_flag."""
        ni, na, d = self.index_dim, self.flag_dim, self.system_dim
        flag0 = np.zeros((na, na))
        flag0[0, 0] = 1.0
        idx0 = np.zeros((ni, ni))
        idx0[0, 0] = 1.0
        p0 = np.kron(np.kron(np.eye(ni), flag0), np.eye(d))
        p1 = np.kron(np.kron(idx0, flag0), np.eye(d))
        return p0, p1

    def iterate(self) -> np.ndarray:
        """Amplification step ``-W (I - 2 P1) W^dag (I - 2 P0)``."""
        p0, p1 = self.projectors()
        eye = np.eye(p0.shape[0])
        w = self.w_circuit
        return -w @ (eye - 2 * p1) @ mc.dagger(w) @ (eye - 2 * p0)

    def amplitudes(self, psi, steps: int | None = None) -> list[float]:
        """Norm of the flag = |0> component after j = 0..steps iterates."""
        steps = self.iterations if steps is None else steps
        p0, _ = self.projectors()
        g = self.iterate()
        state = self.w_circuit @ _input_embedding(self.index_dim, self.ancilla_qubits, self.system_dim) @ np.asarray(psi)
        out = []
        for _ in range(steps + 1):
            out.append(float(np.linalg.norm(p0 @ state)))
            state = g @ state
        return out

    def output_kraus(self) -> list[np.ndarray]:
        """Kraus operators ``(<k| (x) I) L (|0>|0> (x) I)`` over all register outcomes k."""
        d = self.system_dim
        emb = _input_embedding(self.index_dim, self.ancilla_qubits, d)
        iso = self.circuit @ emb
        return [iso[k * d:(k + 1) * d, :] for k in range(self.index_dim * self.flag_dim)]

    def system_channel(self) -> np.ndarray:
        """Channel on the system after tracing out index and flag registers."""
        return mc.kraus_to_superop(self.output_kraus())

    def success_channel(self) -> np.ndarray:
        """Trace-decreasing part conditioned on flag = |0>."""
        na = self.flag_dim
        ks = self.output_kraus()
        return mc.kraus_to_superop([k for i, k in enumerate(ks) if i % na == 0])

    def final_success_probability(self, rho) -> float:
        return float(np.real(np.trace(mc.apply_superop(self.success_channel(), rho))))

    def unitarity_residuals(self) -> dict[str, float]:
        return {name: mc.unitarity_residual(u) for name, u in (
            ("prep_oracle", self.prep_oracle), ("select", self.select_unitary),
            ("w", self.w_circuit), ("circuit", self.circuit))}


def default_alphas(model: LindbladModel) -> list[float]:
    """Tight block-encoding scales ``||L_mu||`` (1.0 for a zero jump)."""
    return [mc.op_norm(l) or 1.0 for l in model.jumps]


def build_jump_gadget(model: LindbladModel, alphas: Sequence[float] | None = None,
                      tolerance: float = ADMISSIBLE_TOL) -> JumpGadget:
    """Deterministic jump circuit ``[-W (I-2P1) W^dag (I-2P0)]^t W``.

    The raw success probability ``p0 = Gamma / sum alpha^2`` is lowered to
    ``sin^2(pi / (2(2t+1)))`` by adding a dummy branch of weight
    ``padded_weight``, so that t iterates rotate the amplitude exactly to 1.
    """
    gamma = require_admissible(model, tolerance)
    if gamma == 0:
        raise DomainError("model has no jumps (Gamma = 0)")
    alphas = default_alphas(model) if alphas is None else [float(a) for a in alphas]
    if len(alphas) != model.m:
        raise ShapeError(f"expected {model.m} alphas, got {len(alphas)}")
    encodings = [build_block_encoding(l, a) for l, a in zip(model.jumps, alphas)]

    total = math.fsum(a * a for a in alphas)
    p0 = min(1.0, gamma / total)
    theta = math.asin(math.sqrt(p0))
    t = max(0, math.ceil((math.pi / (2 * theta) - 1) / 2 - 1e-9))
    theta_p = math.pi / (2 * (2 * t + 1))
    p0_p = math.sin(theta_p) ** 2
    padded = gamma / p0_p - total
    if padded <= 1e-12 * total:
        padded = 0.0
        p0_p = p0
        theta_p = theta
    has_dummy = padded > 0

    prep = build_prep_oracle(alphas, padded)
    index_dim = prep.shape[0]
    select = build_select(encodings, index_dim, has_dummy)
    rest = select.shape[0] // index_dim
    w = select @ np.kron(prep, np.eye(rest))
    gadget = JumpGadget(prep, select, w, w, p0, p0_p, theta_p, t, padded,
                        index_dim, encodings[0].ancilla_qubits, model.dim)
    circuit = np.linalg.matrix_power(gadget.iterate(), t) @ w if t else w
    return JumpGadget(prep, select, w, circuit, p0, p0_p, theta_p, t, padded,
                      index_dim, encodings[0].ancilla_qubits, model.dim)


# -- resource ledger ----------------------------------------------------------


@dataclass(frozen=True)
class ResourceLedger:
    jump_queries: float
    hamiltonian_queries: float
    gate_count: float
    ancilla_count: int

    def to_dict(self) -> dict:
        return {"jump_queries": self.jump_queries, "hamiltonian_queries": self.hamiltonian_queries,
                "gate_count": self.gate_count, "ancilla_count": self.ancilla_count}


def _log_ratio(x: float, scale: float) -> float:
    """``log(x) / log(e + log(x) / scale)`` with ``log`` floored at 1.

    The floor (argument ``max(x, e)``) keeps the polylog factor positive when
    ``x`` is small, where the asymptotic expression has no meaning.
    """
    lx = math.log(max(x, math.e))
    return lx / math.log(math.e + lx / scale)


def resource_ledger(gamma: float, total_time: float, epsilon: float, alpha_h: float,
                    alphas: Sequence[float], m: int | None = None, a: int = 1) -> ResourceLedger:
    """Worst-case cost expressions with every big-O constant set to one.

    Logarithms are natural; see :func:`_log_ratio` for the small-argument floor.
    """
    m = len(alphas) if m is None else m
    if not (gamma > 0 and total_time > 0 and alpha_h > 0 and m >= 1 and a >= 0):
        raise DomainError("need gamma, time, alpha_h > 0 and m >= 1")
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    if not alphas or any(x <= 0 for x in alphas):
        raise DomainError("block-encoding scales must be positive")
    x = gamma * total_time
    amp = math.sqrt(math.fsum(v * v for v in alphas) / gamma)
    jump_q = amp * (x + _log_ratio(1 / epsilon, x))
    y = (alpha_h + gamma) * total_time
    ham_q = y * _log_ratio(y / epsilon, y) ** 2
    gates = (math.log2(m) + a) * amp * ham_q
    return ResourceLedger(jump_q, ham_q, gates, math.ceil(math.log2(m)) + a)
