"""Projective measurement of the total phonon number of two oscillators.

If the modes are in ``sum_n c_n|n>`` and ``sum_n d_n|n>``, the outcome ``N``
leaves them in ``sum_n c_n d_{N-n} |n>|N-n>``. The states ``|n>_N = |n>|N-n>``
span a "virtual oscillator" indexed by the number difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fockspace import StateVector

MIN_PROBABILITY = 1e-300


class ImpossibleOutcomeError(ValueError):
    """The requested outcome has (numerically) zero probability."""


@dataclass(frozen=True)
class VirtualOscillatorState:
    """Amplitudes ``q_n`` over ``|n>_N``, ``n = 0..N``."""

    N: int
    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=complex).ravel()
        if q.size != self.N + 1:
            raise ValueError(f"need {self.N + 1} amplitudes for N={self.N}, got {q.size}")
        if abs(np.linalg.norm(q) - 1) > 1e-12:
            raise ValueError("virtual-oscillator amplitudes are not normalized")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @classmethod
    def normalized(cls, q) -> "VirtualOscillatorState":
        q = np.asarray(q, dtype=complex)
        return cls(q.size - 1, q / np.linalg.norm(q))

    def populations(self) -> np.ndarray:
        return np.abs(self.q) ** 2


@dataclass(frozen=True)
class JointOutcome(VirtualOscillatorState):
    probability: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not 0 <= self.probability <= 1 + 1e-12:
            raise ValueError(f"probability {self.probability} outside [0, 1]")

    @property
    def state(self) -> VirtualOscillatorState:
        return VirtualOscillatorState(self.N, self.q)

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "probability": float(self.probability),
            "q_re": self.q.real.tolist(),
            "q_im": self.q.imag.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "JointOutcome":
        q = np.asarray(data["q_re"], dtype=float) + 1j * np.asarray(data["q_im"], dtype=float)
        return cls(int(data["N"]), q, float(data["probability"]))


def _coefficients(v) -> np.ndarray:
    return v.amplitudes if isinstance(v, StateVector) else np.asarray(v, dtype=complex).ravel()


def _check_normalized(c: np.ndarray, name: str) -> None:
    norm = np.linalg.norm(c)
    if abs(norm - 1) > 1e-10:
        raise ValueError(f"{name} is not normalized (norm={norm:.12g})")


def outcome_distribution(c, d) -> np.ndarray:
    """``P(N) = sum_n |c_n d_{N-n}|^2`` for ``N = 0 .. len(c) + len(d) - 2``."""
    c, d = _coefficients(c), _coefficients(d)
    _check_normalized(c, "c")
    _check_normalized(d, "d")
    return np.convolve(np.abs(c) ** 2, np.abs(d) ** 2)


def project_joint(c, d, N: int) -> JointOutcome:
    """Post-measurement virtual-oscillator state for total phonon number ``N``."""
    c, d = _coefficients(c), _coefficients(d)
    if not 0 <= N <= c.size + d.size - 2:
        raise ImpossibleOutcomeError(f"N={N} outside representable range 0..{c.size + d.size - 2}")
    n = np.arange(N + 1)
    cn = np.where(n < c.size, c[np.minimum(n, c.size - 1)], 0)
    m = N - n
    dm = np.where(m < d.size, d[np.minimum(m, d.size - 1)], 0)
    q = cn * dm
    prob = float(np.sum(np.abs(q) ** 2))
    if prob < MIN_PROBABILITY:
        raise ImpossibleOutcomeError(f"outcome N={N} has probability {prob:.3g}")
    return JointOutcome(N, q / np.sqrt(prob), min(prob, 1.0))


def sample_outcome(c, d, rng: np.random.Generator) -> JointOutcome:
    """Simulate one joint measurement shot."""
    probs = outcome_distribution(c, d)
    N = int(rng.choice(probs.size, p=probs / probs.sum()))
    return project_joint(c, d, N)


def virtual_to_joint(v: VirtualOscillatorState, dims) -> StateVector:
    """Embed ``sum_n q_n |n>|N-n>`` in the two-mode space with cutoffs ``dims``."""
    da, db = (dims, dims) if np.isscalar(dims) else tuple(dims)
    if da < v.N + 1 or db < v.N + 1:
        raise ValueError(f"cutoffs {(da, db)} cannot hold N={v.N}")
    amps = np.zeros((da, db), dtype=complex)
    n = np.arange(v.N + 1)
    amps[n, v.N - n] = v.q
    return StateVector(amps.ravel(), (da, db))


def extract_virtual(state: StateVector, N: int) -> VirtualOscillatorState:
    """Inverse of :func:`virtual_to_joint` on the ``N`` sector (renormalized)."""
    da, db = state.dims
    amps = state.amplitudes.reshape(da, db)
    n = np.arange(N + 1)
    ok = (n < da) & (N - n < db)
    q = np.zeros(N + 1, dtype=complex)
    q[ok] = amps[n[ok], N - n[ok]]
    return VirtualOscillatorState.normalized(q)
