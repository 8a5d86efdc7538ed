"""Command-line entry point: ``qndsim <experiment> --config path [--set key=value ...] [--out dir]``.

Every run writes its artifacts plus ``manifest.json`` (resolved config, seed,
tool version) into the output directory. Files are first written to a
scratch directory next to it and only moved in once the experiment has
finished, so a failed run leaves nothing behind.

Exit status: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, SCHEMA_VERSION, ConfigError, RunConfig, cat_spec, load_config
from .ensemble import EnsembleFailure, default_k_grid, dumps, k_sweep, run_ensemble
from .phaseprep import (
    noon_target,
    optimize_phase_prep,
    phase_target,
    prepare_noon,
    prepare_phase,
)
from .plots import emit_plot
from .projection import ImpossibleOutcomeError, JointOutcome, outcome_distribution, project_joint
from .sme import InvalidParamsError, NumericalBlowupError, probe_initial, simulate_trajectory
from .states import DegenerateSpecError
from .wigner import wigner_function

log = logging.getLogger("qndsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
MANIFEST_VERSION = 1


class _Outputs:
    """Collects artifacts in a scratch directory, honouring the requested formats."""

    def __init__(self, root: Path, formats: list[str]):
        self.root = root
        self.formats = set(formats)
        self.files: list[str] = []

    def text(self, name: str, content: str) -> None:
        if name.rsplit(".", 1)[-1] in self.formats:
            (self.root / name).write_text(content)
            self.files.append(name)

    def json(self, name: str, obj) -> None:
        self.text(name, dumps(obj))

    def plot(self, name: str, data, kind: str) -> None:
        if "png" in self.formats:
            emit_plot(data, kind, self.root / name)
            self.files.append(name)


def _probe_state(cfg: RunConfig):
    sme = cfg.sme
    dims = sme.dims * 2 if sme.n_modes == 2 and len(sme.dims) == 1 else sme.dims
    oscillators = [cfg.initial.build(dims[0])]
    if sme.n_modes == 2:
        other = cfg.initial_b or cfg.initial
        oscillators.append(other.build(dims[1]))
    return probe_initial(*oscillators, qubit=cfg.qubit)


def _collapse(cfg: RunConfig, out: _Outputs) -> dict:
    p = cfg.sme.params(cfg.seed)
    initial = _probe_state(cfg)
    stats = run_ensemble(initial, p, cfg.n_traj, base_seed=cfg.seed, workers=cfg.workers)
    out.text("variance_curve.csv", stats.csv_text())
    hist = stats.to_json()
    for key in ("times", "mean_var_n", "stderr_var_n"):
        hist.pop(key)
    out.json("histogram.json", hist)
    out.plot("fig1a.png", stats, "variance_curve")
    for i in range(min(cfg.save_trajectories, cfg.n_traj)):
        traj = simulate_trajectory(initial, p.with_(seed=cfg.seed + i))
        header, rows = traj.csv_rows()
        lines = [",".join(header)] + [",".join(repr(float(v)) for v in row) for row in rows]
        out.text(f"trajectory_{i:03d}.csv", "\n".join(lines) + "\n")

    # first time the ensemble variance falls below a tenth of its initial value
    v0 = stats.mean_var_n[0]
    below = np.nonzero(stats.mean_var_n < 0.1 * v0)[0] if v0 > 0 else np.array([0])
    t10 = float(stats.times[below[0]]) if below.size else None
    return {
        "final_mean_var_n": float(stats.mean_var_n[-1]),
        "n_collapsed": stats.n_collapsed,
        "n_failed": stats.n_failed,
        "collapse_time": t10,
        "collapse_time_s": None if t10 is None else t10 / cfg.mu_hz,
    }


def _ksweep(cfg: RunConfig, out: _Outputs) -> dict:
    p = cfg.sme.params(cfg.seed)
    ks = default_k_grid() if cfg.k_values is None else np.asarray(cfg.k_values) * p.mu
    sweep = k_sweep(_probe_state(cfg), p, ks, cfg.n_traj, base_seed=cfg.seed, workers=cfg.workers)
    out.text("ksweep.csv", sweep.csv_text())
    out.json("ksweep.json", sweep.to_json())
    out.plot("fig1b.png", sweep, "ksweep")
    return {"k_best": sweep.k_best, "T": sweep.T, "T_s": sweep.T / cfg.mu_hz}


def _distribution_csv(P: np.ndarray) -> str:
    return "N,probability\n" + "".join(f"{n},{float(v)!r}\n" for n, v in enumerate(P))


def _noon(cfg: RunConfig, out: _Outputs) -> dict:
    alpha = complex(*cfg.alpha) if isinstance(cfg.alpha, tuple) else complex(cfg.alpha)
    res = prepare_noon(alpha, cfg.N, cfg.squeeze_vacuumless)
    out.json("outcome.json", res.outcome.to_json())
    out.plot("fig2b.png", res.outcome, "number_distribution")
    return {"fidelity": res.fidelity, "probability": res.probability}


def _phase(cfg: RunConfig, out: _Outputs) -> dict:
    spec = cat_spec(cfg.components)
    res = prepare_phase(spec, cfg.N, ordering=cfg.ordering)
    out.json("outcome.json", res.outcome.to_json())
    out.plot("fig2b.png", res.outcome, "number_distribution")
    return {"error_f": res.error_f, "probability": res.probability, "theta": res.theta}


def _optimize(cfg: RunConfig, out: _Outputs) -> dict:
    res = optimize_phase_prep(
        cfg.n_components, cfg.N, restarts=cfg.restarts, seed=cfg.seed,
        ordering=cfg.ordering, squeeze=cfg.fixed_squeeze,
    )
    out.json("optimization.json", res.to_json())
    outcome = prepare_phase(res.spec, cfg.N, ordering=cfg.ordering).outcome
    out.json("outcome.json", outcome.to_json())
    out.plot("fig2b.png", outcome, "number_distribution")
    return {"error_f": res.error_f, "probability": res.success_probability}


def _wigner_state(cfg: RunConfig):
    w = cfg.wigner
    if w.source == "outcome":
        path = Path(w.outcome_path)
        try:
            return JointOutcome.from_json(json.loads(path.read_text())).q
        except FileNotFoundError:
            raise ConfigError([f"wigner.outcome_path: {path} does not exist"]) from None
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError([f"wigner.outcome_path: not a stored outcome ({exc})"]) from None
    if w.source == "noon":
        return noon_target(w.N).q
    if w.source == "phase":
        return phase_target(w.N, w.theta).q
    q = np.array([complex(*a) if isinstance(a, tuple) else complex(a) for a in w.amplitudes])
    return q / np.linalg.norm(q)


def _wigner(cfg: RunConfig, out: _Outputs) -> dict:
    w = cfg.wigner
    q = _wigner_state(cfg)
    x = np.linspace(*w.x_range, w.points)
    p = np.linspace(*w.p_range, w.points)
    grid = wigner_function(q, x, p)
    out.text("wigner.csv", grid.csv_text())
    out.plot("fig2a.png", grid, "wigner_heatmap")
    return {"integral": grid.integral(), "min_W": float(grid.values.min())}


def _project(cfg: RunConfig, out: _Outputs) -> dict:
    a = cfg.state_a.build().amplitudes
    b = cfg.state_b.build().amplitudes
    size = max(a.size, b.size, cfg.N + 1)
    a, b = np.pad(a, (0, size - a.size)), np.pad(b, (0, size - b.size))
    outcome = project_joint(a, b, cfg.N)
    out.json("outcome.json", outcome.to_json())
    out.text("outcome_distribution.csv", _distribution_csv(outcome_distribution(a, b)))
    out.plot("fig2b.png", outcome, "number_distribution")
    return {"probability": outcome.probability}


RUNNERS = {
    "collapse": _collapse,
    "ksweep": _ksweep,
    "noon": _noon,
    "phase": _phase,
    "optimize": _optimize,
    "wigner": _wigner,
    "project": _project,
}


def manifest(cfg: RunConfig, files: list[str], summary: dict) -> dict:
    return {
        "manifest_version": MANIFEST_VERSION,
        "schema_version": SCHEMA_VERSION,
        "tool": "qndsim",
        "version": __version__,
        "seed": cfg.seed,
        "experiment": cfg.experiment,
        "config": cfg.model_dump(mode="json"),
        "files": sorted(files),
        "summary": summary,
    }


def execute(cfg: RunConfig, out_dir: Path) -> dict:
    """Run ``cfg`` and move its artifacts into ``out_dir``. Returns the manifest."""
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".qndsim-", dir=out_dir.parent))
    try:
        out = _Outputs(scratch, cfg.formats)
        summary = RUNNERS[cfg.experiment](cfg, out)
        man = manifest(cfg, out.files, summary)
        (scratch / "manifest.json").write_text(dumps(man))
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in [*out.files, "manifest.json"]:
            (scratch / name).replace(out_dir / name)
        return man
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def run(config_path, overrides: list[str] = (), experiment: str | None = None,
        out: str | None = None) -> int:
    """Load, validate and execute a configuration; returns the process exit status."""
    try:
        cfg = load_config(config_path, overrides, experiment)
        # SmeParams carries checks (e.g. the step-size bound) beyond the schema
        if cfg.experiment in ("collapse", "ksweep"):
            cfg.sme.params(cfg.seed)
        out_dir = Path(out if out is not None else cfg.output_dir)
        if out is not None:
            cfg = cfg.model_copy(update={"output_dir": str(out_dir)})
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            man = execute(cfg, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidParamsError as exc:
        print(f"error: invalid configuration:\n  sme.{exc.field}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalBlowupError, EnsembleFailure, FloatingPointError, DegenerateSpecError,
            ImpossibleOutcomeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for key, value in man["summary"].items():
        print(f"{key}: {value}")
    print(f"wrote {len(man['files']) + 1} files to {out_dir}")
    return EXIT_OK


def _config_source(path: str | None) -> str | None:
    """A manifest can stand in for a config file: unwrap its ``config`` block."""
    if path is None:
        return None
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError):
        return path
    if isinstance(data, dict) and "manifest_version" in data and "config" in data:
        tmp = tempfile.NamedTemporaryFile("w", suffix=".json", delete=False)
        with tmp:
            json.dump(data["config"], tmp)
        return tmp.name
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qndsim",
        description="Continuous QND phonon-number measurement and two-mode state preparation.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="JSON config file (a manifest.json also works)")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key by dotted path")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"qndsim {__version__}")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    source = _config_source(args.config)
    try:
        return run(source, args.overrides, args.experiment, args.out)
    finally:
        if source is not None and source != args.config:
            Path(source).unlink(missing_ok=True)


if __name__ == "__main__":
    sys.exit(main())
