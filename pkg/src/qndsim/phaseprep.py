"""Noon and canonical phase states of the number-difference oscillator.

Both oscillators start in the same single-mode state ``c``; a total-number
outcome ``N`` leaves ``q_n ∝ c_n c_{N-n}``. A flat ``|q_n|`` (the zero-phase
state up to free evolution) needs ``c_n c_{N-n}`` constant, which a handful of
squeezed coherent components can approximate. :func:`optimize_phase_prep`
searches over such superpositions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .fockspace import truncation_dim
from .projection import JointOutcome, VirtualOscillatorState, outcome_distribution, project_joint
from .states import CatComponent, CatSpec, Ordering, cat_amplitudes, coherent_amplitudes

log = logging.getLogger(__name__)

MAX_ITER = 2000
SIMPLEX_TOL = 1e-8
SCREEN_POINTS = 32

# Reference optima for two- and three-component inputs: (amplitudes, shared squeeze).
# Weights were not reported with them.
REFERENCE_OPTIMA: dict[int, tuple[tuple[float, ...], float]] = {
    10: ((1.162, 3.277), -0.097),
    20: ((1.241, 3.100, 5.024), -0.1131),
}

# How quoted (alpha, s) pairs map onto D(alpha), S(s) = exp[(s/2)(a^2 - a^dag^2)]:
#   native:     alpha, s used as given
#   quadrature: alpha is the mean of x = (a + a^dag)/sqrt(2), and the squeeze
#               generator carries no 1/2, i.e. S = exp[s (a^2 - a^dag^2)]
PARAMETER_CONVENTIONS = ("native", "quadrature")


class UndefinedDiagnosticError(ValueError):
    """All pair products vanish, so flatness is undefined."""


def noon_target(N: int) -> VirtualOscillatorState:
    """``(|N>|0> + |0>|N>)/sqrt(2)`` in the number-difference basis."""
    if N < 1:
        raise ValueError("noon state needs N >= 1")
    q = np.zeros(N + 1, dtype=complex)
    q[0] = q[N] = 1 / math.sqrt(2)
    return VirtualOscillatorState(N, q)


def phase_target(N: int, theta: float = 0.0) -> VirtualOscillatorState:
    """Canonical phase state ``sum_m e^{i m theta}|m>_N / sqrt(N+1)``.

    The ``N+1`` mutually orthogonal phase states sit at ``theta_j = 2 pi j/(N+1)``.
    """
    if N < 1:
        raise ValueError("phase state needs N >= 1")
    m = np.arange(N + 1)
    return VirtualOscillatorState(N, np.exp(1j * m * theta) / math.sqrt(N + 1))


def phase_grid(N: int) -> np.ndarray:
    return 2 * np.pi * np.arange(N + 1) / (N + 1)


def fidelity(v: VirtualOscillatorState, target: VirtualOscillatorState) -> float:
    if v.N != target.N:
        raise ValueError(f"N mismatch: {v.N} vs {target.N}")
    return float(min(abs(np.vdot(target.q, v.q)) ** 2, 1.0))


def error_f(v: VirtualOscillatorState, target: VirtualOscillatorState) -> float:
    return 1.0 - fidelity(v, target)


def best_phase_overlap(q: np.ndarray) -> tuple[float, float]:
    """Maximize ``|<theta|q>|^2`` over the free-evolution phase ``theta``.

    Coarse FFT search followed by Newton polishing of the trigonometric
    polynomial. Returns ``(fidelity, theta)``.
    """
    q = np.asarray(q, dtype=complex)
    n1 = q.size
    size = max(256, 8 * n1)
    vals = np.abs(np.fft.fft(q, size)) ** 2
    theta = 2 * np.pi * int(np.argmax(vals)) / size
    best = vals.max()
    m = np.arange(n1)
    for _ in range(6):
        e = q * np.exp(-1j * m * theta)
        g, g1, g2 = e.sum(), (-1j * m * e).sum(), (-m * m * e).sum()
        d1 = 2 * (g.conjugate() * g1).real
        d2 = 2 * (abs(g1) ** 2 + (g.conjugate() * g2).real)
        if d2 >= 0:
            break
        trial = theta - d1 / d2
        value = abs(np.sum(q * np.exp(-1j * m * trial))) ** 2
        if value < best:
            break
        theta, best = trial, value
    return float(min(best / n1, 1.0)), float(theta % (2 * np.pi))


@dataclass(frozen=True)
class NoonResult:
    outcome: JointOutcome
    fidelity: float
    probability: float


@dataclass(frozen=True)
class PhasePrepResult:
    outcome: JointOutcome
    error_f: float
    probability: float
    theta: float


def noon_input(alpha: complex, squeeze_vacuumless: float | None = None) -> CatSpec:
    """Per-oscillator input ``|0> + D(alpha)S(s)|0>``."""
    s = 0.0 if squeeze_vacuumless is None else float(squeeze_vacuumless)
    return CatSpec((CatComponent(1.0, 0.0, 0.0), CatComponent(1.0, alpha, s)))


def prepare_noon(
    alpha: complex,
    N: int,
    squeeze_vacuumless: float | None = None,
    dim: int | None = None,
) -> NoonResult:
    """Project two copies of ``(|0> + |alpha>)`` onto total number ``N``."""
    needed = int(math.ceil(N + 6 * math.sqrt(N) + 10))
    dim = max(needed, truncation_dim(alpha)) if dim is None else dim
    if dim < needed:
        raise ValueError(f"cutoff {dim} is below N + 6 sqrt(N) + 10 = {needed}")
    c = cat_amplitudes(noon_input(alpha, squeeze_vacuumless), dim)
    c = c / np.linalg.norm(c)
    out = project_joint(c, c, N)
    return NoonResult(out, fidelity(out.state, noon_target(N)), out.probability)


def success_probability(alpha: complex, n_min: int, squeeze_vacuumless: float | None = None,
                        dim: int | None = None) -> float:
    """Probability that the joint outcome is at least ``n_min``."""
    dim = truncation_dim(alpha) if dim is None else dim
    c = cat_amplitudes(noon_input(alpha, squeeze_vacuumless), dim)
    c = c / np.linalg.norm(c)
    return float(outcome_distribution(c, c)[n_min:].sum())


def prepare_phase(
    spec: CatSpec,
    N: int,
    dim: int | None = None,
    ordering: Ordering = "displace_squeeze",
) -> PhasePrepResult:
    """Project two copies of ``spec`` onto ``N`` and score against the phase state.

    The error is minimized over the free-evolution phase; a global phase never
    enters ``|<theta|psi>|^2``.
    """
    dim = max(spec.default_dim(), N + 1) if dim is None else dim
    c = cat_amplitudes(spec, dim, ordering)
    norm = np.linalg.norm(c)
    if norm <= 1e-12:
        raise ValueError("input superposition has vanishing norm")
    c = c / norm
    out = project_joint(c, c, N)
    fid, theta = best_phase_overlap(out.q)
    return PhasePrepResult(out, max(0.0, 1.0 - fid), out.probability, theta)


def flatness_diagnostic(c, N: int, d=None) -> float:
    """Relative standard deviation of ``|c_n d_{N-n}|`` over ``n = 0..N`` (``d = c`` by default).

    Zero means perfectly flat. A one-hot product vector gives ``sqrt(N)``.
    """
    c = np.asarray(getattr(c, "amplitudes", c), dtype=complex)
    d = c if d is None else np.asarray(getattr(d, "amplitudes", d), dtype=complex)
    n = np.arange(N + 1)

    def pick(v, idx):
        return np.where(idx < v.size, v[np.minimum(idx, v.size - 1)], 0)

    prods = np.abs(pick(c, n) * pick(d, N - n))
    mean = prods.mean()
    if mean == 0:
        raise UndefinedDiagnosticError(f"all products c_n d_(N-n) vanish for N={N}")
    return float(prods.std() / mean)


def spec_from_quoted(
    alphas: Sequence[float],
    s: float,
    weights: Sequence[complex] | None = None,
    convention: str = "native",
) -> CatSpec:
    """Build a CatSpec from quoted ``(alpha_i, s)`` under a parameter convention."""
    if convention not in PARAMETER_CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    weights = [1.0] * len(alphas) if weights is None else list(weights)
    if convention == "quadrature":
        alphas = [a / math.sqrt(2) for a in alphas]
        s = 2 * s
    return CatSpec.shared_squeeze(weights, alphas, s)


@dataclass
class OptimizationResult:
    spec: CatSpec
    N: int
    error_f: float
    success_probability: float
    iterations: int
    converged: bool
    theta: float = 0.0
    ordering: str = "displace_squeeze"
    restarts: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "error_f": self.error_f,
            "success_probability": self.success_probability,
            "iterations": self.iterations,
            "converged": self.converged,
            "theta": self.theta,
            "ordering": self.ordering,
            "spec": self.spec.to_json(),
            "restart_errors": self.restarts,
        }


class _Objective:
    """Error ``f`` as a function of transformed parameters.

    Layout: ``[log w_2..w_n, log alpha_1..alpha_n, s]``; entries that are held
    fixed are taken from ``fixed`` instead.
    """

    def __init__(self, n_components, N, ordering, alphas=None, squeeze=None):
        self.n = n_components
        self.N = N
        self.ordering = ordering
        self.alphas = None if alphas is None else np.asarray(alphas, dtype=float)
        self.squeeze = squeeze
        self.alpha_cap = math.sqrt(2 * N) + 3
        self.dim = max(truncation_dim(self.alpha_cap), N + 1)
        self.work = max(2 * self.dim, self.dim + 40)
        self.evals = 0

    def unpack(self, x):
        x = np.asarray(x, dtype=float)
        k = self.n - 1
        weights = np.r_[1.0, np.exp(x[:k])]
        i = k
        if self.alphas is None:
            alphas = np.exp(x[i : i + self.n])
            i += self.n
        else:
            alphas = self.alphas
        if self.squeeze is None:
            s = float(x[i])
        else:
            s = float(self.squeeze)
        return weights, alphas, s

    def pack(self, weights, alphas, s):
        parts = [np.log(np.asarray(weights[1:], dtype=float))]
        if self.alphas is None:
            parts.append(np.log(np.asarray(alphas, dtype=float)))
        if self.squeeze is None:
            parts.append([s])
        return np.concatenate(parts)

    def spec(self, x) -> CatSpec:
        w, a, s = self.unpack(x)
        return CatSpec.shared_squeeze(w, a, s)

    def error(self, x) -> float:
        self.evals += 1
        w, a, s = self.unpack(x)
        if np.any(a > self.alpha_cap) or abs(s) > 2 or not np.all(np.isfinite(w)):
            return 1.0
        c = cat_amplitudes(CatSpec.shared_squeeze(w, a, s), self.dim, self.ordering)
        n = np.arange(self.N + 1)
        q = c[n] * c[self.N - n]
        norm = np.linalg.norm(q)
        if norm < 1e-150:
            return 1.0
        fid, _ = best_phase_overlap(q / norm)
        return max(0.0, 1.0 - fid)

    def __call__(self, x) -> float:
        # log scale resolves errors far below 1e-4
        return math.log10(self.error(x) + 1e-16)


def _random_start(obj: _Objective, rng: np.random.Generator) -> np.ndarray:
    weights = np.r_[1.0, np.exp(rng.uniform(-1.5, 1.5, obj.n - 1))]
    alphas = np.sort(rng.uniform(0.05, math.sqrt(2 * obj.N) + 1, obj.n))
    # the sign of s separates basins that no rescaling of amplitudes connects
    s = rng.uniform(-0.6, 0.6)
    return obj.pack(weights, alphas, s)


def _simplex_diameter(simplex: np.ndarray) -> float:
    return float(np.max(np.abs(simplex[1:] - simplex[0]), initial=0.0))


def _nelder_mead(obj: _Objective, x0: np.ndarray, max_iter: int):
    res = minimize(
        obj, x0, method="Nelder-Mead",
        options={"maxiter": max_iter, "xatol": SIMPLEX_TOL, "fatol": 1e-12, "adaptive": x0.size > 4},
    )
    diameter = _simplex_diameter(res.final_simplex[0])
    return res.x, int(res.nit), diameter < SIMPLEX_TOL


def optimize_phase_prep(
    n_components: int,
    N: int,
    restarts: int = 16,
    seed: int = 0,
    ordering: Ordering = "displace_squeeze",
    starts: Iterable[CatSpec] = (),
    squeeze: float | None = None,
    max_iter: int = MAX_ITER,
) -> OptimizationResult:
    """Multi-start Nelder-Mead over weights, amplitudes and one shared squeeze.

    Weights and amplitudes are real and positive (optimized in log space) with
    the first weight fixed to 1. ``squeeze`` pins the shared squeeze instead of
    optimizing it. ``starts`` adds extra initial points, e.g. an optimum with
    fewer components padded by a negligible weight. Restart ``i`` draws from its
    own stream keyed by ``seed + i`` and starts from the best of
    ``SCREEN_POINTS`` random candidates; ties resolve to the lowest index.
    """
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    obj = _Objective(n_components, N, ordering, squeeze=squeeze)
    inits = []
    for spec in starts:
        comps = list(spec.components)
        while len(comps) < n_components:
            comps.append(CatComponent(1e-12, comps[-1].alpha * 1.01 + 0.01, comps[0].squeeze))
        inits.append(obj.pack([abs(c.weight) for c in comps], [abs(c.alpha) for c in comps],
                              comps[0].squeeze))
    for i in range(restarts):
        # each restart screens a few random candidates and starts from the best
        rng = np.random.Generator(np.random.Philox(key=seed + i))
        candidates = [_random_start(obj, rng) for _ in range(SCREEN_POINTS)]
        inits.append(min(candidates, key=obj))
    return _best_of(obj, inits, max_iter)


def optimize_weights(
    alphas: Sequence[float],
    s: float,
    N: int,
    restarts: int = 8,
    seed: int = 0,
    ordering: Ordering = "displace_squeeze",
    max_iter: int = MAX_ITER,
) -> OptimizationResult:
    """Re-optimize only the superposition weights for fixed amplitudes and squeeze."""
    obj = _Objective(len(alphas), N, ordering, alphas=alphas, squeeze=s)
    if len(alphas) == 1:
        inits = [np.zeros(0)]
    else:
        inits = [np.zeros(len(alphas) - 1)]
        for i in range(restarts - 1):
            rng = np.random.Generator(np.random.Philox(key=seed + i))
            inits.append(rng.uniform(-2, 2, len(alphas) - 1))
    return _best_of(obj, inits, max_iter)


def _best_of(obj: _Objective, inits: list[np.ndarray], max_iter: int) -> OptimizationResult:
    best = None
    errors = []
    for x0 in inits:
        if x0.size == 0:
            x, nit, conv = x0, 0, True
        else:
            x, nit, conv = _nelder_mead(obj, x0, max_iter)
        err = obj.error(x)
        errors.append(err)
        log.debug("restart %d: f=%.3g after %d iterations", len(errors) - 1, err, nit)
        if best is None or err < best[0]:
            best = (err, x, nit, conv)
    err, x, nit, conv = best
    spec = obj.spec(x)
    final = prepare_phase(spec, obj.N, ordering=obj.ordering)
    return OptimizationResult(
        spec=spec,
        N=obj.N,
        error_f=final.error_f,
        success_probability=final.probability,
        iterations=nit,
        converged=conv,
        theta=final.theta,
        ordering=obj.ordering,
        restarts=errors,
    )


def rescale_number_gauge(spec: CatSpec, lam: float) -> CatSpec:
    """Equivalent input under ``c_n -> lam^n c_n`` (displace-after-squeeze ordering).

    ``q_n ∝ c_n c_{N-n}`` only changes by the constant ``lam^N``, so every
    projected state and error is unchanged. In the Bargmann picture
    ``D(alpha)S(s)|0> ∝ exp(-t z^2/2 + beta z)`` with ``t = tanh s`` and
    ``beta = alpha + t alpha*``; the map sends ``t -> lam^2 t`` and
    ``beta -> lam beta``, and the weights absorb the change in the vacuum
    amplitude. All components must share one squeeze.
    """
    squeezes = {c.squeeze for c in spec.components}
    if len(squeezes) != 1:
        raise ValueError("number gauge needs a shared squeeze")
    (s,) = squeezes
    t = math.tanh(s)
    t_new = lam * lam * t
    if not lam > 0 or abs(t_new) >= 1:
        raise ValueError(f"scale {lam} leaves the squeezed-state family")
    s_new = math.atanh(t_new)

    def vacuum_amplitude(alpha: complex, s: float) -> complex:
        t = math.tanh(s)
        return np.exp(-abs(alpha) ** 2 / 2 - t * np.conj(alpha) ** 2 / 2) / math.sqrt(math.cosh(s))

    comps = []
    for c in spec.components:
        alpha = complex(c.alpha)
        beta = lam * (alpha + t * alpha.conjugate())
        new_alpha = complex(beta.real / (1 + t_new), beta.imag / (1 - t_new))
        weight = c.weight * vacuum_amplitude(alpha, s) / vacuum_amplitude(new_alpha, s_new)
        if new_alpha.imag == 0:
            new_alpha = new_alpha.real
        comps.append(CatComponent(complex(weight), new_alpha, s_new))
    return CatSpec(tuple(comps))


def align_number_gauge(spec: CatSpec, alpha_first: float) -> CatSpec:
    """Gauge-equivalent spec whose first amplitude is ``alpha_first`` (real amplitudes)."""
    t = math.tanh(spec.components[0].squeeze)
    beta = complex(spec.components[0].alpha).real * (1 + t)
    # alpha_first (1 + lam^2 t) = lam beta
    if t == 0:
        lam = alpha_first / beta
    else:
        roots = np.roots([alpha_first * t, -beta, alpha_first])
        ok = [r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0 and abs(r.real**2 * t) < 1]
        if not ok:
            raise ValueError(f"no gauge partner with first amplitude {alpha_first}")
        lam = min(ok, key=lambda r: abs(r - 1))
    return rescale_number_gauge(spec, lam)


def binomial_floor(N: int) -> float:
    """Error of the N-binomial distribution (single coherent input) vs the flat target."""
    c = coherent_amplitudes(1.0, N + 1)
    n = np.arange(N + 1)
    q = c[n] * c[N - n]
    return 1.0 - best_phase_overlap(q / np.linalg.norm(q))[0]
