"""PNG rendering of ensemble curves, k-sweeps, Wigner grids and number distributions.

Images are written with the Agg backend and without the ``Software`` text
chunk, so identical inputs give identical bytes for a fixed matplotlib and
freetype installation.
"""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import TwoSlopeNorm  # noqa: E402

PLOT_KINDS = ("variance_curve", "ksweep", "wigner_heatmap", "number_distribution")


class UnsupportedPlotError(ValueError):
    pass


def _variance_curve(ax, stats):
    t = np.asarray(stats.times)
    ax.plot(t, stats.mean_var_n, color="C0", lw=1.5)
    lo = stats.mean_var_n - stats.stderr_var_n
    hi = stats.mean_var_n + stats.stderr_var_n
    ax.fill_between(t, lo, hi, color="C0", alpha=0.25, lw=0)
    ax.set_xlim(t[0], t[-1])
    ax.set_ylim(bottom=0)
    ax.set_xlabel(r"$\mu t$")
    ax.set_ylabel(r"$\langle \mathrm{Var}(\hat n) \rangle$")
    p = stats.params
    ax.set_title(
        f"k={p.k:g}, mu={p.mu:g}, omega_J={p.omega_J:g}, dt={p.dt:g}, "
        f"{stats.n_traj - stats.n_failed} traj",
        fontsize=9,
    )


def _ksweep(ax, sweep):
    k = np.asarray(sweep.k_values)
    ax.errorbar(k, sweep.mean_var_at_T, yerr=sweep.stderr, fmt="o-", capsize=3)
    ax.set_xscale("log")
    ax.set_xlabel(r"$k/\mu$")
    ax.set_ylabel(r"$\langle \mathrm{Var}(\hat n) \rangle$ at $T = 2\pi/\mu$")
    ax.set_title(f"{sweep.n_traj} trajectories per point", fontsize=9)


def _wigner(ax, grid):
    W = np.asarray(grid.values)
    bound = float(np.max(np.abs(W))) or 1.0
    extent = (grid.x_axis[0], grid.x_axis[-1], grid.p_axis[0], grid.p_axis[-1])
    im = ax.imshow(
        W.T,
        origin="lower",
        extent=extent,
        cmap="RdBu_r",
        norm=TwoSlopeNorm(vcenter=0.0, vmin=-bound, vmax=bound),
        aspect="equal",
        interpolation="nearest",
    )
    ax.figure.colorbar(im, ax=ax, label="W(x, p)")
    ax.set_xlabel("x")
    ax.set_ylabel("p")


def _number_distribution(ax, state):
    q = np.asarray(getattr(state, "q", state), dtype=complex)
    N = q.size - 1
    n = np.arange(N + 1)
    ax.bar(2 * n - N, np.abs(q) ** 2, width=1.6, color="C2")
    ax.set_xlabel(r"phonon difference $n_A - n_B$")
    ax.set_ylabel("probability")
    ax.set_title(f"N = {N}", fontsize=9)


_RENDERERS = {
    "variance_curve": _variance_curve,
    "ksweep": _ksweep,
    "wigner_heatmap": _wigner,
    "number_distribution": _number_distribution,
}


def emit_plot(data, kind: str, path: str | Path | None = None) -> bytes:
    """Render ``data`` as ``kind`` and return the PNG bytes (also written to ``path``).

    ``variance_curve`` takes an :class:`~qndsim.ensemble.EnsembleStats`,
    ``ksweep`` a :class:`~qndsim.ensemble.KSweepResult`, ``wigner_heatmap`` a
    :class:`~qndsim.wigner.WignerGrid` and ``number_distribution`` anything
    with a ``q`` coefficient vector (or the vector itself).
    """
    if kind not in _RENDERERS:
        raise UnsupportedPlotError(f"unsupported plot kind {kind!r}; expected one of {PLOT_KINDS}")
    fig, ax = plt.subplots(figsize=(5.5, 4.0), dpi=100)
    try:
        _RENDERERS[kind](ax, data)
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="png", metadata={"Software": None})
    finally:
        plt.close(fig)
    png = buf.getvalue()
    if path is not None:
        Path(path).write_bytes(png)
    return png
