"""Lindbladian models, the admissibility constraint, and characterization checks.

A model is admissible when its jump operators satisfy
``sum_mu L_mu^dag L_mu = Gamma * I``. Only admissible models can be unraveled
with state-independent exponential holding times and unitary no-jump evolution,
so the trajectory engine refuses everything else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import matcore as mc
from .errors import ConstraintViolation, DomainError, InvalidInputError, ShapeError

ADMISSIBLE_TOL = 1e-8
HERMITIAN_TOL = 1e-10
JSON_HERMITIAN_TOL = 1e-8


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus an ordered list of jump operators (hbar = 1)."""

    hamiltonian: np.ndarray
    jumps: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        h = mc.as_cmat(self.hamiltonian, "hamiltonian")
        if h.shape[0] != h.shape[1]:
            raise ShapeError(f"hamiltonian must be square, got {h.shape}")
        if not mc.is_hermitian(h, HERMITIAN_TOL):
            raise InvalidInputError("hamiltonian is not Hermitian")
        jumps = tuple(mc.as_cmat(l, "jump operator") for l in self.jumps)
        for l in jumps:
            if l.shape != h.shape:
                raise ShapeError(f"jump operator shape {l.shape} does not match hamiltonian {h.shape}")
        h.setflags(write=False)
        for l in jumps:
            l.setflags(write=False)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jumps", jumps)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def m(self) -> int:
        return len(self.jumps)

    def jump_gram(self) -> np.ndarray:
        """``sum_mu L_mu^dag L_mu``."""
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for l in self.jumps:
            out += mc.dagger(l) @ l
        return out


@dataclass(frozen=True)
class ConstraintReport:
    gamma: float
    residual: float
    admissible: bool
    tol: float = field(default=ADMISSIBLE_TOL)

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "residual": self.residual,
                "admissible": self.admissible, "tol": self.tol}


def check_constraint(model: LindbladModel, tol: float = ADMISSIBLE_TOL) -> ConstraintReport:
    """Best multiple of identity for ``sum L^dag L`` and the operator-norm residual."""
    if model.m == 0:
        return ConstraintReport(0.0, 0.0, True, tol)
    g = model.jump_gram()
    gamma = float(np.trace(g).real / model.dim)
    residual = mc.op_norm(g - gamma * np.eye(model.dim))
    return ConstraintReport(gamma, residual, residual <= tol, tol)


def require_admissible(model: LindbladModel, tol: float = ADMISSIBLE_TOL) -> float:
    """Return Gamma, raising ConstraintViolation for non-admissible models."""
    rep = check_constraint(model, tol)
    if not rep.admissible:
        raise ConstraintViolation(
            f"sum L^dag L is not proportional to identity (residual {rep.residual:.3e} > {tol:.1e})"
        )
    return rep.gamma


def commutator_superop(h) -> np.ndarray:
    """Superoperator of ``rho -> -i[H, rho]``."""
    h = np.asarray(h, dtype=np.complex128)
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def liouvillian(model: LindbladModel) -> np.ndarray:
    """Superoperator of the full Lindblad generator."""
    d = model.dim
    eye = np.eye(d)
    out = commutator_superop(model.hamiltonian)
    for l in model.jumps:
        ldl = mc.dagger(l) @ l
        out += np.kron(np.conj(l), l) - 0.5 * (np.kron(eye, ldl) + np.kron(ldl.T, eye))
    return out


def effective_hamiltonian(model: LindbladModel) -> np.ndarray:
    """Non-Hermitian ``H - (i/2) sum L^dag L`` generating the no-jump evolution."""
    return model.hamiltonian - 0.5j * model.jump_gram()


def unitary_mix(model: LindbladModel, u) -> LindbladModel:
    """Jumps ``L'_mu = sum_a u[mu, a] L_a``; leaves the Liouvillian unchanged."""
    u = mc.as_cmat(u, "mixing matrix")
    if u.shape != (model.m, model.m):
        raise ShapeError(f"mixing matrix must be {model.m}x{model.m}, got {u.shape}")
    if not mc.is_unitary(u, 1e-10):
        raise InvalidInputError("mixing matrix is not unitary")
    stack = np.stack(model.jumps)
    mixed = np.einsum("ma,aij->mij", u, stack)
    return LindbladModel(model.hamiltonian, tuple(mixed))


def inhomogeneous_transform(model: LindbladModel, a: Sequence[complex], b: float = 0.0) -> LindbladModel:
    """Shift ``L_mu -> L_mu + a_mu I`` with the compensating Hamiltonian change."""
    a = np.asarray(a, dtype=np.complex128).reshape(-1)
    if a.size != model.m:
        raise ShapeError(f"expected {model.m} shift coefficients, got {a.size}")
    eye = np.eye(model.dim)
    h = model.hamiltonian + float(b) * eye
    jumps = []
    for coeff, l in zip(a, model.jumps):
        h = h + (np.conj(coeff) * l - coeff * mc.dagger(l)) / 2j
        jumps.append(l + coeff * eye)
    # the correction is Hermitian analytically; symmetrize away round-off
    return LindbladModel(mc.hermitian_part(h), tuple(jumps))


def scan_inhomogeneous_shifts(model: LindbladModel, radius: float = 2.0, step: float = 0.05) -> tuple[float, complex]:
    """Minimum constraint residual over shifts ``a`` on a square complex grid.

    Only defined for single-jump models. Returns ``(min_residual, argmin_a)``.
    """
    if model.m != 1:
        raise ShapeError("shift scan is implemented for single-jump models only")
    n = int(round(2 * radius / step)) + 1
    axis = np.linspace(-radius, radius, n)
    l = model.jumps[0]
    d = model.dim
    eye = np.eye(d)
    best = (np.inf, 0j)
    for re in axis:
        for im in axis:
            a = complex(re, im)
            lp = l + a * eye
            g = mc.dagger(lp) @ lp
            gamma = np.trace(g).real / d
            res = float(np.linalg.norm(g - gamma * eye, 2))
            if res < best[0]:
                best = (res, a)
    return best


def decompose_channel_form(model: LindbladModel, tol: float = ADMISSIBLE_TOL) -> tuple[float, list[np.ndarray]]:
    """Write an admissible generator as ``-i ad_H + Gamma (R - I)``.

    Returns ``Gamma`` and the Kraus set ``L_mu / sqrt(Gamma)`` of the channel R.
    """
    gamma = require_admissible(model, tol)
    if gamma == 0.0:
        return 0.0, []
    s = np.sqrt(gamma)
    return gamma, [l / s for l in model.jumps]


def channel_form_superop(hamiltonian, gamma: float, kraus: Sequence) -> np.ndarray:
    """Superoperator ``-i ad_H + Gamma (R - I)`` for a Kraus set of R."""
    out = commutator_superop(hamiltonian)
    if gamma:
        d = np.asarray(hamiltonian).shape[0]
        out = out + gamma * (mc.kraus_to_superop(kraus) - mc.identity_superop(d))
    return out


def induced_subsystem_generator(model_k: LindbladModel, omega_a, tol: float = ADMISSIBLE_TOL) -> LindbladModel:
    """Generator ``rho -> Tr_A[K(omega_A kron rho)]`` on the second factor.

    The result is returned in admissible form with the same Gamma as ``model_k``.
    """
    omega = mc.as_cmat(omega_a, "omega_A")
    da = omega.shape[0]
    if omega.shape != (da, da) or model_k.dim % da:
        raise ShapeError(f"omega_A of shape {omega.shape} does not divide model dim {model_k.dim}")
    w, v = np.linalg.eigh(mc.hermitian_part(omega))
    if not mc.is_hermitian(omega, 1e-10) or w[0] < -1e-10 or abs(np.sum(w) - 1) > 1e-10:
        raise InvalidInputError("omega_A must be a density matrix")
    gamma, kraus = decompose_channel_form(model_k, tol)
    ds = model_k.dim // da
    eye_s = np.eye(ds)

    # H_A is fixed by Tr(H_A rho) = Tr(H (omega kron rho)) on every basis rho
    h = model_k.hamiltonian
    h_s = np.empty((ds, ds), dtype=np.complex128)
    for i in range(ds):
        for j in range(ds):
            basis = np.zeros((ds, ds))
            basis[i, j] = 1.0
            h_s[j, i] = np.trace(h @ np.kron(omega, basis))

    jumps = []
    w = np.clip(w, 0.0, None)
    for k in kraus:
        for col in range(da):
            if w[col] == 0.0:
                continue
            inp = np.kron(np.sqrt(w[col]) * v[:, col:col + 1], eye_s)
            for row in range(da):
                out = np.kron(np.eye(da)[row:row + 1, :], eye_s)
                e = out @ k @ inp
                if np.max(np.abs(e)) > 1e-15:
                    jumps.append(np.sqrt(gamma) * e)
    return LindbladModel(mc.hermitian_part(h_s), tuple(jumps))


def extract_phi(model_d: LindbladModel, t: float, tol: float = ADMISSIBLE_TOL) -> np.ndarray:
    """Channel ``Phi_t`` with ``exp(tD) = exp(-t Gamma) I + (1 - exp(-t Gamma)) Phi_t``.

    Evaluated as ``R phi1(t Gamma R) * t Gamma / expm1(t Gamma)`` where
    ``phi1(X) = (exp(X) - I) / X``, which avoids cancellation at small t.
    """
    if t <= 0:
        raise DomainError("t must be positive")
    if mc.op_norm(model_d.hamiltonian) > tol:
        raise InvalidInputError("extract_phi needs a purely dissipative model (H = 0)")
    gamma, kraus = decompose_channel_form(model_d, tol)
    if gamma == 0.0:
        raise DomainError("Gamma = 0: the decomposition divides by 1 - exp(-t Gamma)")
    r = mc.kraus_to_superop(kraus)
    n = r.shape[0]
    x = t * gamma
    aug = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    aug[:n, :n] = x * r
    aug[:n, n:] = np.eye(n)
    phi1 = mc.expm(aug)[:n, n:]
    return r @ phi1 * (x / np.expm1(x))


def is_extreme_channel(kraus: Sequence, rank_tol: float = 1e-8) -> bool:
    """Choi's extremality test: ``{K_mu^dag K_nu}`` linearly independent.

    The Kraus set is first reduced to a minimal one (Choi eigenvectors) so the
    answer depends only on the channel.
    """
    ops = [mc.as_cmat(k, "Kraus operator") for k in kraus]
    if not ops:
        raise InvalidInputError("Kraus set is empty")
    d = ops[0].shape[0]
    tp = sum(mc.dagger(k) @ k for k in ops)
    if np.max(np.abs(tp - np.eye(d))) > 1e-8:
        raise InvalidInputError("Kraus set is not trace preserving")
    choi = mc.superop_to_choi(mc.kraus_to_superop(ops))
    w, v = np.linalg.eigh(mc.hermitian_part(choi))
    keep = w > rank_tol * max(w[-1], 1.0)
    # J = sum_mu vec(K_mu) vec(K_mu)^dag with J indexed (out, in), i.e. row-major K
    minimal = [np.sqrt(wi) * v[:, i].reshape(d, d) for i, wi in zip(np.flatnonzero(keep), w[keep])]
    m = len(minimal)
    rows = [(mc.dagger(a) @ b).reshape(-1) for a in minimal for b in minimal]
    sv = np.linalg.svd(np.array(rows), compute_uv=False)
    rank = int(np.sum(sv > rank_tol * sv[0]))
    return rank == m * m


# -- standard models ---------------------------------------------------------


def dephasing_model(gamma: float, hamiltonian=None) -> LindbladModel:
    """Single qubit, ``L = sqrt(gamma) Z``."""
    h = np.zeros((2, 2)) if hamiltonian is None else hamiltonian
    return LindbladModel(h, (np.sqrt(gamma) * mc.pauli("Z"),))


def depolarizing_model(gamma: float, hamiltonian=None) -> LindbladModel:
    """Single qubit, jumps ``sqrt(gamma/2) {X, Y, Z}`` (so Gamma = 3 gamma / 2)."""
    h = np.zeros((2, 2)) if hamiltonian is None else hamiltonian
    c = np.sqrt(gamma / 2)
    return LindbladModel(h, tuple(c * mc.pauli(p) for p in "XYZ"))


def amplitude_damping_model(gamma: float = 1.0) -> LindbladModel:
    """``L = sqrt(gamma) |0><1|``; not admissible for any gamma > 0."""
    return LindbladModel(np.zeros((2, 2)), (np.sqrt(gamma) * np.array([[0, 1], [0, 0]]),))


def random_admissible_model(rng: np.random.Generator, n_qubits: int, m: int, gamma: float,
                            with_hamiltonian: bool = True) -> LindbladModel:
    d = 2 ** n_qubits
    kraus = mc.random_kraus(rng, d, m)
    h = np.zeros((d, d))
    if with_hamiltonian:
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        h = (g + mc.dagger(g)) / 4
    return LindbladModel(h, tuple(np.sqrt(gamma) * k for k in kraus))


# -- JSON model files ---------------------------------------------------------


def _mat_from_json(data, name: str) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise InvalidInputError(f"{name}: expected a nested array of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _mat_to_json(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a)]


def model_from_dict(data: dict) -> LindbladModel:
    try:
        n = int(data["n_qubits"])
        h = _mat_from_json(data["hamiltonian"], "hamiltonian")
        jumps = [_mat_from_json(j, f"jumps[{i}]") for i, j in enumerate(data.get("jumps", []))]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"malformed model: {exc!r}") from exc
    d = 2 ** n
    if h.shape != (d, d):
        raise ShapeError(f"hamiltonian is {h.shape}, expected {(d, d)} for n_qubits={n}")
    if not mc.is_hermitian(h, JSON_HERMITIAN_TOL):
        dev = float(np.max(np.abs(h - mc.dagger(h))))
        raise InvalidInputError(f"hamiltonian is not Hermitian (max |H - H^dag| = {dev:.3e})")
    return LindbladModel(mc.hermitian_part(h), tuple(jumps))


def model_to_dict(model: LindbladModel) -> dict:
    n = int(round(np.log2(model.dim)))
    if 2 ** n != model.dim:
        raise ShapeError("model dimension is not a power of two")
    return {"n_qubits": n, "hamiltonian": _mat_to_json(model.hamiltonian),
            "jumps": [_mat_to_json(l) for l in model.jumps]}


def load_model(path) -> LindbladModel:
    """Read a model file. ``json.JSONDecodeError`` carries line/column info."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InvalidInputError("model file must contain a JSON object")
    return model_from_dict(data)


def save_model(model: LindbladModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")
