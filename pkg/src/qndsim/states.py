"""Single-mode state factories: Fock superpositions, coherent, squeezed and cat states.

Squeezing convention: ``S(s) = exp[(s/2)(a^2 - a^dag^2)]`` with real ``s``.
The default ordering is displace-after-squeeze, ``D(alpha) S(s)|0>``; the
alternative ``S(s) D(alpha)|0>`` is available through ``ordering``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal

import numpy as np

from .fockspace import StateVector, annihilation_op, truncation_dim

Ordering = Literal["displace_squeeze", "squeeze_displace"]
ORDERINGS: tuple[str, ...] = ("displace_squeeze", "squeeze_displace")


class TruncationWarning(UserWarning):
    """The requested cutoff is too small to hold the state faithfully."""


class DegenerateSpecError(ValueError):
    """A superposition interferes away to (numerically) nothing."""


@dataclass(frozen=True)
class CatComponent:
    weight: complex
    alpha: complex
    squeeze: float = 0.0


@dataclass(frozen=True)
class CatSpec:
    """Weighted superposition of squeezed coherent states."""

    components: tuple[CatComponent, ...]

    def __post_init__(self):
        comps = tuple(
            c if isinstance(c, CatComponent) else CatComponent(*c) for c in self.components
        )
        if not comps:
            raise ValueError("CatSpec needs at least one component")
        object.__setattr__(self, "components", comps)

    @classmethod
    def shared_squeeze(cls, weights: Iterable[complex], alphas: Iterable[complex], squeeze: float):
        return cls(tuple(CatComponent(w, a, squeeze) for w, a in zip(weights, alphas, strict=True)))

    @property
    def max_alpha(self) -> float:
        return max(abs(c.alpha) for c in self.components)

    def default_dim(self) -> int:
        return truncation_dim(self.max_alpha)

    def to_json(self) -> list[dict]:
        return [
            {
                "weight": [complex(c.weight).real, complex(c.weight).imag],
                "alpha": [complex(c.alpha).real, complex(c.alpha).imag],
                "squeeze": float(c.squeeze),
            }
            for c in self.components
        ]

    @classmethod
    def from_json(cls, data: list[dict]) -> "CatSpec":
        def as_complex(v):
            if isinstance(v, (list, tuple)):
                return complex(v[0], v[1])
            return complex(v)

        return cls(
            tuple(
                CatComponent(
                    as_complex(item.get("weight", 1.0)),
                    as_complex(item["alpha"]),
                    float(item.get("squeeze", 0.0)),
                )
                for item in data
            )
        )


def _check_cutoff(alpha: complex, dim: int, squeeze: float = 0.0) -> None:
    needed = truncation_dim(alpha)
    if dim < needed:
        warnings.warn(
            f"cutoff {dim} is below the recommended {needed} for |alpha|={abs(alpha):.3g}",
            TruncationWarning,
            stacklevel=3,
        )
    if abs(squeeze) > 1:
        warnings.warn(f"strong squeezing s={squeeze} may need a larger cutoff", TruncationWarning, stacklevel=3)


def _work_dim(dim: int) -> int:
    return max(2 * dim, dim + 40)


@lru_cache(maxsize=32)
def _generators(dim: int):
    """Eigendecompositions of the Hermitian displacement and squeeze generators."""
    a = annihilation_op(dim)
    ad = a.conj().T
    # D(r) = exp(r (a^dag - a)) = exp(-i r X) with X = i (a^dag - a)
    disp_vals, disp_vecs = np.linalg.eigh(1j * (ad - a))
    # S(s) = exp(s (a^2 - a^dag^2) / 2) = exp(-i s Y) with Y = i (a^2 - a^dag^2) / 2
    sq_vals, sq_vecs = np.linalg.eigh(0.5j * (a @ a - ad @ ad))
    return (disp_vals, disp_vecs, sq_vals, sq_vecs,
            np.ascontiguousarray(disp_vecs.conj().T), np.ascontiguousarray(sq_vecs.conj().T))


def displace(vec: np.ndarray, alpha: complex) -> np.ndarray:
    """Apply the truncated displacement ``D(alpha)`` to a vector."""
    dim = vec.size
    vals, vecs, _, _, vecs_h, _ = _generators(dim)
    r, phi = abs(alpha), np.angle(alpha)
    if phi == 0:
        return vecs @ (np.exp(-1j * r * vals) * (vecs_h @ vec))
    rot = np.exp(1j * phi * np.arange(dim))
    out = vecs @ (np.exp(-1j * r * vals) * (vecs_h @ (vec * rot.conj())))
    return out * rot


def squeeze(vec: np.ndarray, s: float) -> np.ndarray:
    """Apply the truncated squeeze operator ``S(s)`` to a vector."""
    if s == 0:
        return vec.copy()
    _, _, vals, vecs, _, vecs_h = _generators(vec.size)
    return vecs @ (np.exp(-1j * s * vals) * (vecs_h @ vec))


def fock_state(n: int, dim: int) -> StateVector:
    if not 0 <= n < dim:
        raise ValueError(f"Fock level {n} outside cutoff {dim}")
    amps = np.zeros(dim, dtype=complex)
    amps[n] = 1.0
    return StateVector(amps)


def uniform_fock_superposition(n_levels: int, dim: int) -> StateVector:
    if n_levels < 1:
        raise ValueError("n_levels must be positive")
    if dim < n_levels:
        raise ValueError(f"dim={dim} cannot hold {n_levels} levels")
    amps = np.zeros(dim, dtype=complex)
    amps[:n_levels] = 1 / np.sqrt(n_levels)
    return StateVector(amps)


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Unnormalized ``e^{-|a|^2/2} a^n / sqrt(n!)`` by recurrence."""
    amps = np.empty(dim, dtype=complex)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    return amps


def coherent_state(alpha: complex, dim: int | None = None) -> StateVector:
    dim = truncation_dim(alpha) if dim is None else dim
    _check_cutoff(alpha, dim)
    return StateVector.normalized(coherent_amplitudes(alpha, dim))


def _squeezed_coherent_vector(
    alpha: complex, s: float, dim: int, ordering: Ordering = "displace_squeeze"
) -> np.ndarray:
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown ordering {ordering!r}")
    work = _work_dim(dim)
    vac = np.zeros(work, dtype=complex)
    vac[0] = 1.0
    if ordering == "displace_squeeze":
        vec = displace(squeeze(vac, s), alpha)
    else:
        vec = squeeze(displace(vac, alpha), s)
    return vec[:dim]


def squeezed_coherent_state(
    alpha: complex, s: float, dim: int | None = None, ordering: Ordering = "displace_squeeze"
) -> StateVector:
    """``D(alpha) S(s)|0>`` (or ``S(s) D(alpha)|0>``), renormalized on the cutoff."""
    dim = truncation_dim(alpha) if dim is None else dim
    _check_cutoff(alpha, dim, s)
    return StateVector.normalized(_squeezed_coherent_vector(alpha, s, dim, ordering))


def cat_amplitudes(spec: CatSpec, dim: int, ordering: Ordering = "displace_squeeze") -> np.ndarray:
    """Unnormalized amplitudes of ``sum_i w_i D(alpha_i) S(s_i)|0>``.

    Components sharing a squeeze value reuse one squeezed vacuum.
    """
    work = _work_dim(dim)
    total = np.zeros(work, dtype=complex)
    vac = np.zeros(work, dtype=complex)
    vac[0] = 1.0
    squeezed: dict[float, np.ndarray] = {}
    for comp in spec.components:
        if ordering == "displace_squeeze":
            if comp.squeeze not in squeezed:
                squeezed[comp.squeeze] = squeeze(vac, comp.squeeze)
            vec = displace(squeezed[comp.squeeze], comp.alpha)
        elif ordering == "squeeze_displace":
            vec = squeeze(displace(vac, comp.alpha), comp.squeeze)
        else:
            raise ValueError(f"unknown ordering {ordering!r}")
        total += comp.weight * vec
    return total[:dim]


def cat_superposition(
    spec: CatSpec, dim: int | None = None, ordering: Ordering = "displace_squeeze"
) -> StateVector:
    dim = spec.default_dim() if dim is None else dim
    for comp in spec.components:
        _check_cutoff(comp.alpha, dim, comp.squeeze)
    amps = cat_amplitudes(spec, dim, ordering)
    norm = np.linalg.norm(amps)
    if norm <= 1e-12:
        raise DegenerateSpecError(f"superposition norm {norm:.3g} is numerically zero")
    return StateVector(amps / norm)


def kerr_evolve(state: StateVector, theta: float) -> StateVector:
    """Evolve under ``(a^dag a)^2`` for phase ``theta``: ``c_n -> exp(-i theta n^2) c_n``."""
    n = np.arange(state.dim)
    return StateVector(state.amplitudes * np.exp(-1j * theta * n * n), state.dims)
