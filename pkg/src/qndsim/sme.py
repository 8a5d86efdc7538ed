"""Continuous sigma_z monitoring of a probe qubit coupled to one or two oscillators.

The conditioned state obeys the Ito stochastic master equation

    d rho = -i[H, rho] dt - k [sz, [sz, rho]] dt
            + sqrt(2 eta k) (sz rho + rho sz - 2 <sz> rho) dW,
    dr    = <sz> dt + dW,

with ``H = w_R n + w_C sz + w_J sx + mu sx n`` (``n`` is the total phonon
number) in units where ``mu = 1`` sets the frequency scale. Every term
commutes with ``n``, so the integrator stores ``rho`` as 2x2 qubit blocks
indexed by pairs of oscillator basis states. ``sme_step`` is the dense
Euler-Maruyama reference for a single step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numba
import numpy as np

from .fockspace import DensityMatrix, StateVector, embed, number_op, pauli_ops

BLOWUP_LIMIT = 1e6


class InvalidParamsError(ValueError):
    """Parameters violate the SmeParams invariants."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class NumericalBlowupError(FloatingPointError):
    """The integration produced non-finite or runaway entries."""

    def __init__(self, t: float, dt: float, detail: str = ""):
        super().__init__(f"numerical blow-up at t={t:.6g} with dt={dt:.3g}{': ' + detail if detail else ''}")
        self.t = t
        self.dt = dt


class DispersiveWarning(UserWarning):
    """Coupling is not small compared with the detuning."""


def derive_mu(coupling: float, detuning: float) -> float:
    """Dispersive interaction strength ``lambda^2 / Delta``."""
    if detuning == 0:
        raise ZeroDivisionError("detuning must be non-zero")
    if abs(coupling / detuning) > 0.1:
        warnings.warn(
            f"|lambda/Delta| = {abs(coupling / detuning):.3g} > 0.1; dispersive approximation is poor",
            DispersiveWarning,
            stacklevel=2,
        )
    return coupling**2 / detuning


@dataclass(frozen=True)
class SmeParams:
    omega_R: float = 0.0
    omega_C: float = 0.0
    omega_J: float = 0.0
    mu: float = 1.0
    k: float = 1.0
    n_modes: int = 1
    dims: tuple[int, ...] = (10,)
    dt: float = 1e-3
    t_final: float = 20.0
    seed: int = 0
    record_stride: int = 10
    eta: float = 1.0

    def __post_init__(self):
        dims = (self.dims,) if isinstance(self.dims, int) else tuple(int(d) for d in self.dims)
        if len(dims) == 1 and self.n_modes == 2:
            dims = dims * 2
        object.__setattr__(self, "dims", dims)
        self.validate()

    def validate(self) -> None:
        if self.n_modes not in (1, 2):
            raise InvalidParamsError("n_modes", f"must be 1 or 2, got {self.n_modes}")
        if len(self.dims) != self.n_modes or any(d < 1 for d in self.dims):
            raise InvalidParamsError("dims", f"need {self.n_modes} positive cutoffs, got {self.dims}")
        if not self.dt > 0:
            raise InvalidParamsError("dt", f"must be positive, got {self.dt}")
        if not self.t_final >= self.dt:
            raise InvalidParamsError("t_final", f"must be >= dt, got {self.t_final}")
        if not self.k >= 0:
            raise InvalidParamsError("k", f"must be non-negative, got {self.k}")
        if not 0 < self.eta <= 1:
            raise InvalidParamsError("eta", f"must lie in (0, 1], got {self.eta}")
        if self.record_stride < 1:
            raise InvalidParamsError("record_stride", "must be a positive integer")
        if not 0 <= self.seed < 2**64:
            raise InvalidParamsError("seed", "must be an unsigned 64-bit integer")
        if self.dt > self.max_stable_dt():
            raise InvalidParamsError(
                "dt", f"{self.dt} exceeds the stability bound {self.max_stable_dt():.4g}"
            )

    def max_stable_dt(self) -> float:
        max_n = sum(d - 1 for d in self.dims)
        return 0.01 / max(1.0, self.k, abs(self.omega_J), max_n * abs(self.mu))

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_final / self.dt + 1e-9))

    @property
    def n_records(self) -> int:
        return self.n_steps // self.record_stride + 1

    @property
    def hilbert_dims(self) -> tuple[int, ...]:
        return (2, *self.dims)

    def with_(self, **changes) -> "SmeParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        return d


def build_hamiltonian(p: SmeParams) -> np.ndarray:
    sx, sz = pauli_ops()
    dims = p.hilbert_dims
    n_total = sum(embed(number_op(d), i + 1, dims) for i, d in enumerate(p.dims))
    sx_full = embed(sx, 0, dims)
    sz_full = embed(sz, 0, dims)
    return (
        p.omega_R * n_total
        + p.omega_C * sz_full
        + p.omega_J * sx_full
        + p.mu * sx_full @ n_total
    )


def sigma_z_full(dims: Sequence[int]) -> np.ndarray:
    return embed(pauli_ops()[1], 0, dims)


def sme_step(
    rho: DensityMatrix,
    H: np.ndarray,
    k: float,
    dt: float,
    dW: float,
    eta: float = 1.0,
    t: float = 0.0,
) -> tuple[DensityMatrix, float]:
    """One Euler-Maruyama step of the normalized SME on a dense density matrix.

    Returns the renormalized state and the record increment ``<sz> dt + dW``
    evaluated on the pre-step state.
    """
    r = rho.entries
    sz = sigma_z_full(rho.dims)
    mean_sz = float(np.real(np.trace(sz @ r)))
    comm = H @ r - r @ H
    double = sz @ (sz @ r - r @ sz) - (sz @ r - r @ sz) @ sz
    innov = sz @ r + r @ sz - 2 * mean_sz * r
    new = r + (-1j * comm - k * double) * dt + math.sqrt(2 * eta * k) * innov * dW
    if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > BLOWUP_LIMIT:
        raise NumericalBlowupError(t, dt)
    new = new / np.real(np.trace(new))
    return DensityMatrix(new, rho.dims, check=False), mean_sz * dt + dW


def wiener_increments(seed: int, n_steps: int, dt: float) -> np.ndarray:
    """Gaussian increments of variance ``dt`` from the Philox stream keyed by ``seed``."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    return rng.standard_normal(n_steps) * math.sqrt(dt)


def refine_increments(dW: np.ndarray, dt: float, seed: int) -> np.ndarray:
    """Brownian-bridge refinement of a path onto the half-step grid.

    Each coarse increment ``dW`` is split into two increments of variance
    ``dt/2`` whose sum is exactly ``dW``.
    """
    rng = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, 1]))
    first = dW / 2 + rng.standard_normal(dW.size) * math.sqrt(dt / 4)
    fine = np.empty(2 * dW.size)
    fine[0::2] = first
    fine[1::2] = dW - first
    return fine


@dataclass
class TrajectoryResult:
    times: np.ndarray
    record: np.ndarray
    mean_n: np.ndarray  # shape (n_modes, n_records)
    var_n: np.ndarray  # shape (n_modes, n_records)
    sigma_z: np.ndarray
    final_state: DensityMatrix
    seed: int
    purity: np.ndarray = field(default_factory=lambda: np.empty(0))
    min_eigenvalue: np.ndarray = field(default_factory=lambda: np.empty(0))
    max_trace_drift: float = 0.0

    def csv_rows(self) -> tuple[list[str], np.ndarray]:
        """Column header and data for the per-trajectory CSV file."""
        n_modes = self.mean_n.shape[0]
        header = ["t", "r_increment", "mean_n"]
        cols = [self.times, self.record, self.mean_n[0]]
        if n_modes == 2:
            header.append("mean_n_b")
            cols.append(self.mean_n[1])
        header.append("var_n")
        cols.append(self.var_n[0])
        if n_modes == 2:
            header.append("var_n_b")
            cols.append(self.var_n[1])
        header.append("sigma_z")
        cols.append(self.sigma_z)
        return header, np.column_stack(cols)


def _oscillator_numbers(dims: Sequence[int]) -> np.ndarray:
    """Phonon numbers per mode for each flattened oscillator basis index, shape (2, M)."""
    if len(dims) == 1:
        n = np.arange(dims[0], dtype=float)
        return np.vstack([n, np.zeros_like(n)])
    na, nb = np.meshgrid(np.arange(dims[0]), np.arange(dims[1]), indexing="ij")
    return np.vstack([na.ravel(), nb.ravel()]).astype(float)


def to_blocks(rho: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Dense ``(2M, 2M)`` matrix with qubit-first ordering -> blocks ``(M, M, 2, 2)``."""
    m = int(np.prod(dims))
    return np.ascontiguousarray(rho.reshape(2, m, 2, m).transpose(1, 3, 0, 2))


def from_blocks(blocks: np.ndarray) -> np.ndarray:
    m = blocks.shape[0]
    return blocks.transpose(2, 0, 3, 1).reshape(2 * m, 2 * m)


@numba.njit(cache=True, nogil=True)
def _integrate(B, n_a, n_b, omega_R, omega_C, omega_J, mu, k, eta, dt, dW, stride, kraus,
               times, record, mean_n, var_n, sigma_z, purity):
    m = B.shape[0]
    n_steps = dW.size
    n_tot = n_a + n_b
    amp = math.sqrt(2.0 * eta * k)
    lost = 2.0 * (1.0 - eta) * k * dt
    max_drift = 0.0
    acc_dr = 0.0
    rec = 0
    # per-block Kraus factors M_j = [[m00, m01], [m10, m11]]
    M = np.zeros((m, 2, 2), dtype=np.complex128)
    for step in range(n_steps + 1):
        sz = 0.0
        for j in range(m):
            sz += B[j, j, 0, 0].real - B[j, j, 1, 1].real
        if step % stride == 0:
            ma = 0.0
            mb = 0.0
            sa = 0.0
            sb = 0.0
            pur = 0.0
            for j in range(m):
                p = B[j, j, 0, 0].real + B[j, j, 1, 1].real
                ma += n_a[j] * p
                mb += n_b[j] * p
                sa += n_a[j] * n_a[j] * p
                sb += n_b[j] * n_b[j] * p
                for l in range(m):
                    for s1 in range(2):
                        for s2 in range(2):
                            v = B[j, l, s1, s2]
                            pur += v.real * v.real + v.imag * v.imag
            times[rec] = step * dt
            record[rec] = acc_dr
            mean_n[0, rec] = ma
            mean_n[1, rec] = mb
            var_n[0, rec] = sa - ma * ma
            var_n[1, rec] = sb - mb * mb
            sigma_z[rec] = sz
            purity[rec] = pur
            acc_dr = 0.0
            rec += 1
        if step == n_steps:
            break
        w = dW[step]
        acc_dr += sz * dt + w
        trace = 0.0
        if kraus:
            # M_j = K U_j: exact block unitary U_j = exp(-i H_j dt), then the diagonal
            # measurement factor K = 1 - (c^dag c / 2) dt + c dy + (c^2 / 2)(dy^2 - dt), c = amp * sz
            dy = 2.0 * amp * sz * dt + w
            base = 1.0 - k * dt + 0.5 * amp * amp * (dy * dy - dt)
            kp = base + amp * dy
            km = base - amp * dy
            for j in range(m):
                x = omega_J + mu * n_tot[j]
                wj = math.sqrt(omega_C * omega_C + x * x)
                cs = math.cos(wj * dt)
                sn = math.sin(wj * dt) / wj if wj > 0.0 else dt
                ph = complex(math.cos(omega_R * n_tot[j] * dt), -math.sin(omega_R * n_tot[j] * dt))
                M[j, 0, 0] = kp * ph * complex(cs, -omega_C * sn)
                M[j, 0, 1] = kp * ph * complex(0.0, -x * sn)
                M[j, 1, 0] = km * ph * complex(0.0, -x * sn)
                M[j, 1, 1] = km * ph * complex(cs, omega_C * sn)
            for j in range(m):
                for l in range(m):
                    b00 = B[j, l, 0, 0]
                    b01 = B[j, l, 0, 1]
                    b10 = B[j, l, 1, 0]
                    b11 = B[j, l, 1, 1]
                    # T = M_j B
                    t00 = M[j, 0, 0] * b00 + M[j, 0, 1] * b10
                    t01 = M[j, 0, 0] * b01 + M[j, 0, 1] * b11
                    t10 = M[j, 1, 0] * b00 + M[j, 1, 1] * b10
                    t11 = M[j, 1, 0] * b01 + M[j, 1, 1] * b11
                    # T M_l^dag, plus unrecorded dephasing sz B sz
                    u00 = M[l, 0, 0].conjugate()
                    u01 = M[l, 1, 0].conjugate()
                    u10 = M[l, 0, 1].conjugate()
                    u11 = M[l, 1, 1].conjugate()
                    B[j, l, 0, 0] = t00 * u00 + t01 * u10 + lost * b00
                    B[j, l, 0, 1] = t00 * u01 + t01 * u11 - lost * b01
                    B[j, l, 1, 0] = t10 * u00 + t11 * u10 - lost * b10
                    B[j, l, 1, 1] = t10 * u01 + t11 * u11 + lost * b11
                trace += B[j, j, 0, 0].real + B[j, j, 1, 1].real
        else:
            noise = amp * w
            for j in range(m):
                dj = omega_C + omega_R * n_tot[j]
                ej = -omega_C + omega_R * n_tot[j]
                xj = omega_J + mu * n_tot[j]
                for l in range(m):
                    dl = omega_C + omega_R * n_tot[l]
                    el = -omega_C + omega_R * n_tot[l]
                    xl = omega_J + mu * n_tot[l]
                    b00 = B[j, l, 0, 0]
                    b01 = B[j, l, 0, 1]
                    b10 = B[j, l, 1, 0]
                    b11 = B[j, l, 1, 1]
                    # A_j B - B A_l with A = [[d, x], [x, e]]
                    c00 = dj * b00 + xj * b10 - b00 * dl - b01 * xl
                    c01 = dj * b01 + xj * b11 - b00 * xl - b01 * el
                    c10 = xj * b00 + ej * b10 - b10 * dl - b11 * xl
                    c11 = xj * b01 + ej * b11 - b10 * xl - b11 * el
                    B[j, l, 0, 0] = b00 + (-1j * c00) * dt + noise * (2.0 - 2.0 * sz) * b00
                    B[j, l, 0, 1] = b01 + (-1j * c01 - 4.0 * k * b01) * dt - noise * 2.0 * sz * b01
                    B[j, l, 1, 0] = b10 + (-1j * c10 - 4.0 * k * b10) * dt - noise * 2.0 * sz * b10
                    B[j, l, 1, 1] = b11 + (-1j * c11) * dt - noise * (2.0 + 2.0 * sz) * b11
                trace += B[j, j, 0, 0].real + B[j, j, 1, 1].real
            drift = abs(trace - 1.0)
            if drift > max_drift:
                max_drift = drift
        if not (trace > 0.0 and trace < BLOWUP_LIMIT):
            return -(step + 1), max_drift
        inv = 1.0 / trace
        for j in range(m):
            for l in range(m):
                for s1 in range(2):
                    for s2 in range(2):
                        v = B[j, l, s1, s2] * inv
                        if not abs(v) < BLOWUP_LIMIT:
                            return -(step + 1), max_drift
                        B[j, l, s1, s2] = v
    return 0, max_drift


def initial_density(initial: StateVector | DensityMatrix) -> DensityMatrix:
    return initial.density_matrix() if isinstance(initial, StateVector) else initial


METHODS = ("kraus", "euler")


def simulate_trajectory(
    initial: StateVector | DensityMatrix,
    p: SmeParams,
    dW: np.ndarray | None = None,
    diagnostics: bool = False,
    method: str = "kraus",
) -> TrajectoryResult:
    """Integrate one conditioned trajectory from ``t = 0`` to ``p.t_final``.

    ``method="kraus"`` (default) applies the completely positive first-order
    map ``rho -> M rho M^dag + (1 - eta) c rho c^dag dt`` with
    ``M = (1 - c^dag c dt / 2 + c dy + c^2 (dy^2 - dt) / 2) exp(-iH dt)`` and
    ``c = sqrt(2 eta k) sz``; the Hamiltonian factor is exact on each
    number block, so free evolution never reweights the blocks. Its average
    over ``dW`` reproduces the Euler step to first order while keeping the
    state positive. ``method="euler"`` is the literal
    Euler-Maruyama step of :func:`sme_step`.

    ``dW`` overrides the increments drawn from ``p.seed``. With
    ``diagnostics`` the minimum eigenvalue of the state is evaluated at every
    recorded sample.
    """
    if method not in METHODS:
        raise InvalidParamsError("method", f"must be one of {METHODS}, got {method!r}")
    rho0 = initial_density(initial)
    if rho0.dims != p.hilbert_dims:
        raise InvalidParamsError(
            "dims", f"initial state dims {rho0.dims} do not match {p.hilbert_dims}"
        )
    n_steps = p.n_steps
    if dW is None:
        dW = wiener_increments(p.seed, n_steps, p.dt)
    dW = np.ascontiguousarray(dW, dtype=float)
    if dW.size != n_steps:
        raise InvalidParamsError("dW", f"expected {n_steps} increments, got {dW.size}")

    numbers = _oscillator_numbers(p.dims)
    B = to_blocks(np.array(rho0.entries), p.dims)
    kraus = method == "kraus"
    stride = p.record_stride
    if not diagnostics:
        times, record, mean_n, var_n, sigma_z, purity, drift = _run_kernel(
            B, numbers, p, dW, stride, 0, kraus
        )
        min_eig = np.empty(0)
    else:
        chunks = [_run_kernel(B.copy(), numbers, p, dW[:0], 1, 0, kraus)]
        min_eig = [np.linalg.eigvalsh(from_blocks(B)).min()]
        for i in range(1, p.n_records):
            part = _run_kernel(B, numbers, p, dW[(i - 1) * stride : i * stride], stride,
                               (i - 1) * stride, kraus)
            chunks.append(tuple(x[..., -1:] if isinstance(x, np.ndarray) else x for x in part))
            min_eig.append(np.linalg.eigvalsh(from_blocks(B)).min())
        times = np.arange(p.n_records) * stride * p.dt
        record = np.concatenate([c[1] for c in chunks])
        mean_n = np.concatenate([c[2] for c in chunks], axis=1)
        var_n = np.concatenate([c[3] for c in chunks], axis=1)
        sigma_z = np.concatenate([c[4] for c in chunks])
        purity = np.concatenate([c[5] for c in chunks])
        drift = max(c[6] for c in chunks)
        min_eig = np.array(min_eig)

    n_modes = p.n_modes
    return TrajectoryResult(
        times=times,
        record=record,
        mean_n=mean_n[:n_modes].copy(),
        var_n=var_n[:n_modes].copy(),
        sigma_z=sigma_z,
        final_state=DensityMatrix(from_blocks(B), p.hilbert_dims, check=False),
        seed=p.seed,
        purity=purity,
        min_eigenvalue=min_eig,
        max_trace_drift=drift,
    )


def _run_kernel(B, numbers, p: SmeParams, dW, stride, step_offset, kraus):
    n_rec = dW.size // stride + 1
    times = np.zeros(n_rec)
    record = np.zeros(n_rec)
    mean_n = np.zeros((2, n_rec))
    var_n = np.zeros((2, n_rec))
    sigma_z = np.zeros(n_rec)
    purity = np.zeros(n_rec)
    status, drift = _integrate(
        B, numbers[0], numbers[1], float(p.omega_R), float(p.omega_C), float(p.omega_J),
        float(p.mu), float(p.k), float(p.eta), float(p.dt), dW, int(stride), kraus,
        times, record, mean_n, var_n, sigma_z, purity,
    )
    if status < 0:
        step = step_offset - status
        raise NumericalBlowupError(step * p.dt, p.dt, f"|rho| entry exceeded {BLOWUP_LIMIT:g}")
    return times + step_offset * p.dt, record, mean_n, var_n, sigma_z, purity, drift


def probe_initial(*oscillators: StateVector, qubit: str = "+z") -> StateVector:
    """Product state ``|qubit> (x) |osc_A> [(x) |osc_B>]`` in the fixed ordering."""
    qubits = {
        "+z": np.array([1, 0], dtype=complex),
        "-z": np.array([0, 1], dtype=complex),
        "+x": np.array([1, 1], dtype=complex) / math.sqrt(2),
        "-x": np.array([1, -1], dtype=complex) / math.sqrt(2),
    }
    if qubit not in qubits:
        raise ValueError(f"unknown qubit state {qubit!r}")
    amps = qubits[qubit]
    dims = [2]
    for osc in oscillators:
        amps = np.kron(amps, osc.amplitudes)
        dims.append(osc.dim)
    return StateVector(amps, tuple(dims))
