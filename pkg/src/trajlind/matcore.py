"""Dense complex linear algebra and channel representations.

Conventions used throughout the package:

* Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.
* A superoperator on d x d matrices is a d^2 x d^2 array acting on
  column-stacked vectors, ``vec(rho)[i + d*j] = rho[i, j]``. With this
  convention ``vec(A X B) = (B^T kron A) vec(X)``, so the map
  ``rho -> K rho K^dag`` is ``kron(conj(K), K)``.
* The Choi matrix is unnormalized, ``J = sum_ij Phi(|i><j|) kron |i><j|``,
  i.e. output factor first, input factor second.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, ShapeError

DEFAULT_TOL = 1e-10


def as_cmat(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D complex array."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.size == 0:
        raise ShapeError(f"{name} must be a nonempty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def _square(a, name: str = "matrix") -> np.ndarray:
    arr = as_cmat(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {arr.shape}")
    return arr


def superop_dim(s: np.ndarray) -> int:
    """Return d for a d^2 x d^2 superoperator, raising ShapeError otherwise."""
    s = np.asarray(s)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeError(f"superoperator must be square, got shape {s.shape}")
    d = int(round(np.sqrt(s.shape[0])))
    if d * d != s.shape[0]:
        raise ShapeError(f"superoperator side {s.shape[0]} is not a perfect square")
    return d


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def op_norm(a) -> float:
    """Largest singular value."""
    arr = as_cmat(a)
    return float(np.linalg.norm(arr, 2))


def trace_norm(a) -> float:
    """Sum of singular values, ``Tr sqrt(A^dag A)``."""
    arr = _square(a)
    return float(np.sum(np.linalg.svd(arr, compute_uv=False)))


def expm(a) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    arr = _square(a)
    return scipy.linalg.expm(arr)


def vec(rho) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(rho, dtype=np.complex128).reshape(-1, order="F")


def unvec(v, d: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ShapeError(f"vector of length {v.size} is not a vectorized {d}x{d} matrix")
    return v.reshape((d, d), order="F")


def apply_superop(s, rho) -> np.ndarray:
    """Apply superoperator ``s`` to the matrix ``rho``."""
    rho = _square(rho, "rho")
    d = superop_dim(s)
    if rho.shape[0] != d:
        raise ShapeError(f"superoperator acts on {d}x{d} matrices, got {rho.shape}")
    return unvec(np.asarray(s) @ vec(rho), d)


def identity_superop(d: int) -> np.ndarray:
    return np.eye(d * d, dtype=np.complex128)


def unitary_superop(u) -> np.ndarray:
    """Superoperator of ``rho -> U rho U^dag``."""
    u = _square(u, "unitary")
    return np.kron(np.conj(u), u)


def kraus_to_superop(kraus: Sequence) -> np.ndarray:
    """Superoperator ``sum_mu conj(K_mu) kron K_mu`` of a Kraus set."""
    ops = [_square(k, "Kraus operator") for k in kraus]
    if not ops:
        raise ShapeError("Kraus set is empty")
    d = ops[0].shape[0]
    if any(k.shape != (d, d) for k in ops):
        raise ShapeError("Kraus operators have mixed dimensions")
    out = np.zeros((d * d, d * d), dtype=np.complex128)
    for k in ops:
        out += np.kron(np.conj(k), k)
    return out


def superop_to_choi(s) -> np.ndarray:
    d = superop_dim(s)
    s4 = np.asarray(s, dtype=np.complex128).reshape(d, d, d, d)
    # s4[b, a, j, i] = Phi(|i><j|)[a, b]; reorder to J[(a, i), (b, j)]
    return s4.transpose(1, 3, 0, 2).reshape(d * d, d * d)


def choi_to_superop(j) -> np.ndarray:
    d = superop_dim(j)
    j4 = np.asarray(j, dtype=np.complex128).reshape(d, d, d, d)
    return j4.transpose(2, 0, 3, 1).reshape(d * d, d * d)


def choi_min_eigenvalue(s) -> float:
    """Smallest eigenvalue of the Hermitian part of the Choi matrix of ``s``."""
    j = superop_to_choi(s)
    return float(np.linalg.eigvalsh((j + dagger(j)) / 2)[0])


def trace_preservation_residual(s) -> float:
    """Max deviation of ``Tr(S(|i><j|))`` from ``delta_ij`` over basis matrices."""
    d = superop_dim(s)
    # Tr(X) = <vec(I), vec(X)>, so Tr o S is the row vector vec(I)^T S
    row = vec(np.eye(d)) @ np.asarray(s)
    return float(np.max(np.abs(row - vec(np.eye(d)))))


def is_cptp(s, tol: float = 1e-9) -> bool:
    return choi_min_eigenvalue(s) >= -tol and trace_preservation_residual(s) <= tol


def diamond_distance_bounds(s1, s2) -> tuple[float, float]:
    """Rigorous interval containing the diamond distance ``1/2 ||S1 - S2||_dia``.

    With ``DJ`` the unnormalized Choi matrix of ``S1 - S2`` the interval is
    ``(||DJ||_1 / (2 d), ||DJ||_1 / 2)``.
    """
    d1, d2 = superop_dim(s1), superop_dim(s2)
    if d1 != d2:
        raise ShapeError(f"superoperators act on different dimensions ({d1} vs {d2})")
    dj = superop_to_choi(np.asarray(s1) - np.asarray(s2))
    half = 0.5 * trace_norm(dj)
    return half / d1, half


def choi_distance(s1, s2) -> float:
    """Upper end of :func:`diamond_distance_bounds`; zero iff the maps agree."""
    return diamond_distance_bounds(s1, s2)[1]


def unitary_diamond_distance(u, v) -> float:
    """Exact diamond distance between the channels of two unitaries.

    Equals ``sqrt(1 - nu^2)`` with ``nu`` the distance from the origin to the
    convex hull of the spectrum of ``U^dag V``.
    """
    u, v = _square(u), _square(v)
    if u.shape != v.shape:
        raise ShapeError("unitaries have different shapes")
    phases = np.sort(np.angle(np.linalg.eigvals(dagger(u) @ v)))
    gaps = np.diff(np.concatenate([phases, [phases[0] + 2 * np.pi]]))
    arc = 2 * np.pi - float(np.max(gaps))
    if arc >= np.pi:
        return 1.0
    nu = np.cos(arc / 2)
    return float(np.sqrt(max(0.0, 1.0 - nu * nu)))


def partial_trace(a, dims: tuple[int, int], keep: int) -> np.ndarray:
    """Partial trace of an operator on ``C^dA kron C^dB``.

    ``keep=0`` traces out the second factor, ``keep=1`` the first.
    """
    a = _square(a)
    da, db = dims
    if da * db != a.shape[0]:
        raise ShapeError(f"dims {dims} do not factor a {a.shape[0]}-dimensional operator")
    if keep not in (0, 1):
        raise InvalidInputError("keep must be 0 or 1")
    t = a.reshape(da, db, da, db)
    if keep == 0:
        return np.einsum("ibjb->ij", t)
    return np.einsum("aiaj->ij", t)


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return (a + dagger(a)) / 2


def is_hermitian(a, tol: float = DEFAULT_TOL) -> bool:
    a = _square(a)
    return bool(np.max(np.abs(a - dagger(a))) <= tol)


def is_unitary(u, tol: float = DEFAULT_TOL) -> bool:
    return unitarity_residual(u) <= tol


def unitarity_residual(u) -> float:
    """``||U^dag U - I||_op``."""
    u = _square(u)
    return op_norm(dagger(u) @ u - np.eye(u.shape[0]))


def psd_sqrt(a: np.ndarray, clip: float = 1e-12) -> np.ndarray:
    """Square root of a Hermitian PSD matrix; eigenvalues in ``[-clip, 0)`` are zeroed."""
    w, v = np.linalg.eigh(hermitian_part(a))
    if w[0] < -clip:
        raise InvalidInputError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ dagger(v)


def pauli(label: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. ``pauli("XZ")``."""
    table = {
        "I": np.eye(2, dtype=np.complex128),
        "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
        "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    }
    out = np.ones((1, 1), dtype=np.complex128)
    for ch in label:
        out = np.kron(out, table[ch])
    return out


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_kraus(rng: np.random.Generator, d: int, m: int) -> list[np.ndarray]:
    """Kraus set of a random CPTP map, cut from a random (m d) x d isometry."""
    z = rng.standard_normal((m * d, d)) + 1j * rng.standard_normal((m * d, d))
    q, _ = np.linalg.qr(z)
    return [q[k * d:(k + 1) * d, :] for k in range(m)]
