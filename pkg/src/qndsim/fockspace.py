"""Truncated Fock-space and qubit operator algebra.

Operators are plain dense ``numpy`` arrays. States carry their subsystem
dimensions so that observables can be padded with identities in the fixed
ordering ``(qubit, oscillator A, oscillator B)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

NORM_TOL = 1e-10


class DimensionError(ValueError):
    """Raised when operator or state dimensions are invalid or mismatched."""


def annihilation_op(dim: int) -> np.ndarray:
    """Truncated lowering operator with ``a[n-1, n] = sqrt(n)``."""
    if int(dim) != dim or dim < 2:
        raise DimensionError(f"annihilation_op needs dim >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def creation_op(dim: int) -> np.ndarray:
    return annihilation_op(dim).conj().T


def number_op(dim: int) -> np.ndarray:
    if int(dim) != dim or dim < 1:
        raise DimensionError(f"number_op needs dim >= 1, got {dim}")
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def pauli_ops() -> tuple[np.ndarray, np.ndarray]:
    """Return ``(sigma_x, sigma_z)``; ``sigma_z = diag(+1, -1)``."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return sx, sz


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of square operators, left factor = first subsystem."""
    for op in ops:
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise DimensionError(f"tensor expects square matrices, got {op.shape}")
    return reduce(np.kron, ops)


def is_hermitian(op: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) < tol)


def embed(op: np.ndarray, index: int, dims: Sequence[int]) -> np.ndarray:
    """Place ``op`` on subsystem ``index`` with identities elsewhere."""
    if op.shape != (dims[index], dims[index]):
        raise DimensionError(
            f"operator of shape {op.shape} does not fit subsystem {index} of {tuple(dims)}"
        )
    factors = [np.eye(d, dtype=complex) for d in dims]
    factors[index] = op
    return tensor(*factors)


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state over a composite truncated space."""

    amplitudes: np.ndarray
    dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        dims = tuple(int(d) for d in self.dims) if self.dims else (amps.size,)
        if int(np.prod(dims)) != amps.size:
            raise DimensionError(f"dims {dims} do not match {amps.size} amplitudes")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def normalized(cls, amplitudes, dims: Sequence[int] = ()) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        norm = np.linalg.norm(amps)
        if norm < 1e-300:
            raise ValueError("cannot normalize a zero vector")
        return cls(amps / norm, tuple(dims))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density_matrix(self) -> "DensityMatrix":
        psi = self.amplitudes
        return DensityMatrix(np.outer(psi, psi.conj()), self.dims)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix."""

    entries: np.ndarray
    dims: tuple[int, ...] = field(default=())
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise DimensionError(f"density matrix must be square, got {rho.shape}")
        dims = tuple(int(d) for d in self.dims) if self.dims else (rho.shape[0],)
        if int(np.prod(dims)) != rho.shape[0]:
            raise DimensionError(f"dims {dims} do not match size {rho.shape[0]}")
        if self.check:
            if not np.allclose(rho, rho.conj().T, atol=1e-10, rtol=0):
                raise ValueError("density matrix is not Hermitian")
            if abs(np.trace(rho) - 1.0) > 1e-8:
                raise ValueError(f"density matrix trace is {np.trace(rho).real!r}")
            if np.linalg.eigvalsh(rho).min() < -1e-8:
                raise ValueError("density matrix has a negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def purity(self) -> float:
        return float(np.real(np.vdot(self.entries, self.entries)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries).min())


def expectation(state: StateVector | DensityMatrix, op: np.ndarray) -> complex:
    """``<psi|op|psi>`` for pure states, ``Tr(rho op)`` for mixed ones."""
    if op.shape != (state.dim, state.dim):
        raise DimensionError(f"operator shape {op.shape} does not match state dim {state.dim}")
    if isinstance(state, StateVector):
        psi = state.amplitudes
        return complex(np.vdot(psi, op @ psi))
    return complex(np.trace(state.entries @ op))


def variance(state: StateVector | DensityMatrix, op: np.ndarray) -> float:
    return float(np.real(expectation(state, op @ op) - expectation(state, op) ** 2))


def truncation_dim(alpha: complex) -> int:
    """Default cutoff ``ceil(|alpha|^2 + 6|alpha| + 10)`` for coherent-class states."""
    r = abs(alpha)
    return int(np.ceil(r * r + 6 * r + 10))
