"""Dense complex linear algebra and quantum-object primitives.

Everything operates on plain ``numpy`` arrays of ``complex128``. States are
1-d amplitude vectors, density matrices and operators are 2-d square arrays.
Dimensions stay small (<= 64), so all routines are dense and eigen-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonHermitianError(ValueError):
    """Raised when an operator that must be Hermitian is not."""


class DimensionMismatchError(ValueError):
    """Raised when operator/state dimensions are incompatible."""


@dataclass(frozen=True)
class Tolerances:
    """Central numerical tolerances shared by all modules.

    ``hermiticity`` and ``unitarity`` are the defaults used by the
    predicates below; the remaining entries are the validation floors for
    density matrices and completed maps.
    """

    hermiticity: float = 1e-10
    unitarity: float = 1e-9
    trace: float = 1e-9
    psd_floor: float = 1e-9
    map_trace: float = 1e-8
    choi_cp_floor: float = 1e-7


TOL = Tolerances()

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_PAULIS_1Q = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a.T)


def is_hermitian(a: np.ndarray, tol: float = TOL.hermiticity) -> bool:
    """Hermiticity test, relative to the largest matrix entry.

    The relative scaling matters because Hamiltonians in rad/s carry
    entries of order 1e10.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(a))))
    return float(np.max(np.abs(a - dagger(a)))) <= tol * scale


def is_unitary(a: np.ndarray, tol: float = TOL.unitarity) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    d = a.shape[0]
    return float(np.max(np.abs(dagger(a) @ a - np.eye(d)))) <= tol


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; (a (x) b)[i*rb + k, j*cb + l] = a[i, j] b[k, l]."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def expm_skew_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t) for Hermitian h, via eigendecomposition.

    Exactly unitary up to round-off, which is what the propagators rely on.

    Raises
    ------
    NonHermitianError
        If ``h`` fails the Hermiticity test.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise NonHermitianError("generator is not Hermitian within tolerance")
    w, v = np.linalg.eigh((h + dagger(h)) / 2.0)
    phases = np.exp(-1j * w * t)
    return (v * phases) @ dagger(v)


def partial_trace(m: np.ndarray, dims: list[int] | tuple[int, ...], keep: int) -> np.ndarray:
    """Trace out all subsystems except ``keep`` (0-based index into ``dims``)."""
    m = np.asarray(m, dtype=complex)
    dims = tuple(int(d) for d in dims)
    n = int(np.prod(dims))
    if m.shape != (n, n):
        raise DimensionMismatchError(
            f"matrix of shape {m.shape} does not factor as {dims}"
        )
    if not 0 <= keep < len(dims):
        raise DimensionMismatchError(f"keep index {keep} out of range for {dims}")
    k = len(dims)
    t = m.reshape(dims + dims)
    # Pair up row/column axes of every traced subsystem.
    for ax in reversed([i for i in range(k) if i != keep]):
        t = np.trace(t, axis1=ax, axis2=ax + t.ndim // 2)
    return t


def pauli_basis(n_qubits: int) -> list[np.ndarray]:
    """Ordered n-qubit Pauli basis.

    Order is lexicographic with the identity first and the last qubit
    varying fastest: II, IX, IY, IZ, XI, XX, ... for two qubits. This fixed
    order is what gives Pauli transfer matrices a deterministic indexing.
    Normalization is Tr(Pi Pj) = d * delta_ij.
    """
    if n_qubits == 1:
        return [p.copy() for p in _PAULIS_1Q]
    if n_qubits == 2:
        return [tensor(a, b) for a in _PAULIS_1Q for b in _PAULIS_1Q]
    raise ValueError("pauli_basis supports 1 or 2 qubits only")


def normalize(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    nrm = float(np.linalg.norm(ket))
    if nrm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return ket / nrm


def projector(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, np.conj(ket))


def check_density_matrix(
    rho: np.ndarray,
    trace_tol: float = TOL.trace,
    psd_floor: float = TOL.psd_floor,
) -> None:
    """Validate Hermiticity, unit trace and positivity of a density matrix."""
    rho = np.asarray(rho)
    if not is_hermitian(rho):
        raise NonHermitianError("density matrix is not Hermitian")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr} deviates from 1")
    evals = np.linalg.eigvalsh((rho + dagger(rho)) / 2.0)
    if float(evals.min()) < -psd_floor:
        raise ValueError(f"density matrix has negative eigenvalue {evals.min()}")
