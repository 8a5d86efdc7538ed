"""Wigner function of a single-mode state from displaced parity.

Convention: hbar = 1, ``a = (x + i p)/sqrt(2)``, ``W`` normalized to
``∬ W dx dp = 1`` so that ``|W| <= 1/pi``. Evaluation uses

    W(x, p) = (1/pi) sum_n (-1)^n |<n| D(-alpha) |psi>|^2,  alpha = (x + i p)/sqrt(2)

with ``D(-alpha) ∝ D(-x/√2) D(-ip/√2)``, so one displacement per grid row and
one per grid column suffice.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .states import TruncationWarning, _generators, displace

EDGE_LEVELS = 5
EDGE_TOL = 1e-6


class UndersizedGridError(ValueError):
    """The phase-space grid does not cover the state."""


@dataclass(frozen=True)
class WignerGrid:
    """``values[i, j] = W(x_axis[i], p_axis[j])``."""

    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray

    def integral(self) -> float:
        return float(simpson(simpson(self.values, x=self.p_axis, axis=1), x=self.x_axis))

    def csv_text(self) -> str:
        lines = ["x,p,W"]
        for i, x in enumerate(self.x_axis):
            for j, p in enumerate(self.p_axis):
                lines.append(f"{float(x)!r},{float(p)!r},{float(self.values[i, j])!r}")
        return "\n".join(lines) + "\n"


def _coefficients(q) -> np.ndarray:
    q = np.asarray(getattr(q, "q", getattr(q, "amplitudes", q)), dtype=complex).ravel()
    if abs(np.linalg.norm(q) - 1) > 1e-10:
        raise ValueError("coefficient vector must be normalized")
    return q


def wigner_function(q, x_axis, p_axis, work_dim: int | None = None) -> WignerGrid:
    """Wigner function of ``sum_n q_n |n>`` on the grid ``x_axis`` x ``p_axis``."""
    q = _coefficients(q)
    x_axis = np.asarray(x_axis, dtype=float)
    p_axis = np.asarray(p_axis, dtype=float)
    r_max = math.hypot(np.abs(x_axis).max(), np.abs(p_axis).max()) / math.sqrt(2)
    if work_dim is None:
        work_dim = int(math.ceil(q.size + r_max**2 + 10 * r_max + 40))
    psi = np.zeros(work_dim, dtype=complex)
    psi[: q.size] = q

    # columns: D(-i p / sqrt 2)|psi>, then move into the eigenbasis of the x-displacement generator
    cols = np.stack([displace(psi, -1j * p / math.sqrt(2)) for p in p_axis], axis=1)
    vals, vecs, _, _, vecs_h, _ = _generators(work_dim)
    cols = vecs_h @ cols
    parity = (-1.0) ** np.arange(work_dim)
    W = np.empty((x_axis.size, p_axis.size))
    edge = 0.0
    for i, x in enumerate(x_axis):
        # D(r) = V exp(-i r lambda) V^dag with r = -x / sqrt 2
        u = vecs @ (np.exp(1j * (x / math.sqrt(2)) * vals)[:, None] * cols)
        prob = np.abs(u) ** 2
        W[i] = parity @ prob / math.pi
        edge = max(edge, float(prob[-EDGE_LEVELS:].sum(axis=0).max()))
    if edge > EDGE_TOL:
        warnings.warn(
            f"edge occupancy {edge:.2g} in work space of {work_dim} levels; enlarge work_dim",
            TruncationWarning,
            stacklevel=2,
        )
    return WignerGrid(x_axis, p_axis, W)


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """Oscillator eigenfunctions ``phi_n(x)``, ``n < n_max``, by stable recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((n_max, x.size))
    out[0] = math.pi**-0.25 * np.exp(-x * x / 2)
    if n_max > 1:
        out[1] = math.sqrt(2) * x * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = math.sqrt(2 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def position_density(q, x) -> np.ndarray:
    q = _coefficients(q)
    return np.abs(q @ hermite_functions(q.size, x)) ** 2


def momentum_density(q, p) -> np.ndarray:
    q = _coefficients(q)
    phases = (-1j) ** np.arange(q.size)
    return np.abs((q * phases) @ hermite_functions(q.size, p)) ** 2


def _quadrature_moments(q: np.ndarray) -> tuple[float, float, float, float]:
    n = q.size
    a = np.diag(np.sqrt(np.arange(1, n + 1, dtype=float)), k=1)
    psi = np.r_[q, 0]
    x = (a + a.T) / math.sqrt(2)
    p = (a - a.T) / (1j * math.sqrt(2))
    mx = np.vdot(psi, x @ psi).real
    mp = np.vdot(psi, p @ psi).real
    vx = np.vdot(psi, x @ x @ psi).real - mx**2
    vp = np.vdot(psi, p @ p @ psi).real - mp**2
    return mx, math.sqrt(max(vx, 0)), mp, math.sqrt(max(vp, 0))


def marginal_check(g: WignerGrid, q) -> tuple[float, float]:
    """Max deviation of the grid marginals from ``|psi(x)|^2`` and ``|psi~(p)|^2``."""
    q = _coefficients(q)
    mx, sx, mp, sp = _quadrature_moments(q)
    for axis, m, s, name in ((g.x_axis, mx, sx, "x"), (g.p_axis, mp, sp, "p")):
        lo, hi = axis.min(), axis.max()
        if hi - lo < 6 * s or not lo < m < hi:
            raise UndersizedGridError(
                f"{name} grid [{lo:.3g}, {hi:.3g}] is narrower than 6 x {s:.3g} around mean {m:.3g}"
            )
    wx = simpson(g.values, x=g.p_axis, axis=1)
    wp = simpson(g.values, x=g.x_axis, axis=0)
    err_x = float(np.max(np.abs(wx - position_density(q, g.x_axis))))
    err_p = float(np.max(np.abs(wp - momentum_density(q, g.p_axis))))
    return err_x, err_p
