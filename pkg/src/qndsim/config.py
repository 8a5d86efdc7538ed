"""Run-configuration schema (JSON, versioned) and state builders for the CLI."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .fockspace import StateVector
from .sme import SmeParams
from .states import (
    CatSpec,
    cat_superposition,
    coherent_state,
    fock_state,
    uniform_fock_superposition,
)

SCHEMA_VERSION = 1
EXPERIMENTS = ("collapse", "ksweep", "noon", "phase", "optimize", "wigner", "project")

Complexish = Union[float, tuple[float, float]]


class ConfigError(ValueError):
    """The configuration does not match the schema; ``problems`` lists every offending key."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SmeSection(_Strict):
    omega_R: float = 0.0
    omega_C: float = 0.0
    omega_J: float = 0.0
    mu: float = Field(1.0, gt=0)
    k: float = Field(1.0, ge=0)
    n_modes: Literal[1, 2] = 1
    dims: list[int] = [10]
    dt: float = Field(1e-3, gt=0)
    t_final: float = Field(20.0, gt=0)
    record_stride: int = Field(10, ge=1)
    eta: float = Field(1.0, gt=0, le=1)

    def params(self, seed: int) -> SmeParams:
        return SmeParams(**self.model_dump(), seed=seed)


class ComponentModel(_Strict):
    weight: Complexish = 1.0
    alpha: Complexish
    squeeze: float = 0.0


def _as_complex(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, (tuple, list)) else complex(v)


def cat_spec(components: list[ComponentModel]) -> CatSpec:
    return CatSpec.from_json([c.model_dump() for c in components])


class StateModel(_Strict):
    """Single-mode state: uniform Fock superposition, Fock, coherent or cat."""

    kind: Literal["uniform_fock", "fock", "coherent", "cat", "amplitudes"]
    n_levels: int | None = Field(None, ge=1)
    n: int | None = Field(None, ge=0)
    alpha: Complexish | None = None
    components: list[ComponentModel] | None = None
    amplitudes: list[Complexish] | None = None
    dim: int | None = Field(None, ge=1)

    @model_validator(mode="after")
    def _required(self):
        need = {
            "uniform_fock": ["n_levels"],
            "fock": ["n"],
            "coherent": ["alpha"],
            "cat": ["components"],
            "amplitudes": ["amplitudes"],
        }[self.kind]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"kind={self.kind!r} requires {', '.join(missing)}")
        return self

    def build(self, dim: int | None = None) -> StateVector:
        dim = self.dim or dim
        if self.kind == "uniform_fock":
            return uniform_fock_superposition(self.n_levels, dim or self.n_levels)
        if self.kind == "fock":
            return fock_state(self.n, dim or self.n + 1)
        if self.kind == "coherent":
            return coherent_state(_as_complex(self.alpha), dim)
        if self.kind == "cat":
            return cat_superposition(cat_spec(self.components), dim)
        return StateVector.normalized([_as_complex(a) for a in self.amplitudes])


class WignerSection(_Strict):
    source: Literal["outcome", "noon", "phase", "amplitudes"] = "outcome"
    outcome_path: str | None = None
    N: int | None = Field(None, ge=1)
    theta: float = 0.0
    amplitudes: list[Complexish] | None = None
    x_range: tuple[float, float] = (-6.0, 6.0)
    p_range: tuple[float, float] = (-6.0, 6.0)
    points: int = Field(201, ge=3)


class RunConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    experiment: Literal["collapse", "ksweep", "noon", "phase", "optimize", "wigner", "project"]
    seed: int = Field(0, ge=0, lt=2**64)
    output_dir: str = "results"
    formats: list[Literal["csv", "json", "png"]] = ["csv", "json", "png"]
    mu_hz: float = Field(1e6, gt=0)
    workers: int | None = Field(None, ge=1)

    # trajectory experiments
    sme: SmeSection = SmeSection()
    initial: StateModel | None = None
    initial_b: StateModel | None = None
    qubit: Literal["+z", "-z", "+x", "-x"] = "+z"
    n_traj: int = Field(1000, ge=1)
    save_trajectories: int = Field(1, ge=0)
    k_values: list[float] | None = None

    # state preparation
    N: int | None = Field(None, ge=0)
    alpha: Complexish | None = None
    squeeze_vacuumless: float | None = None
    components: list[ComponentModel] | None = None
    ordering: Literal["displace_squeeze", "squeeze_displace"] = "displace_squeeze"
    n_components: int | None = Field(None, ge=1)
    restarts: int = Field(16, ge=0)
    fixed_squeeze: float | None = None

    # projection
    state_a: StateModel | None = None
    state_b: StateModel | None = None

    wigner: WignerSection = WignerSection()

    @model_validator(mode="after")
    def _experiment_fields(self):
        required = {
            "collapse": ["initial"],
            "ksweep": ["initial"],
            "noon": ["alpha", "N"],
            "phase": ["components", "N"],
            "optimize": ["n_components", "N"],
            "wigner": [],
            "project": ["state_a", "state_b", "N"],
        }[self.experiment]
        missing = [k for k in required if getattr(self, k) is None]
        if self.experiment == "wigner":
            w = self.wigner
            need = {"outcome": "outcome_path", "noon": "N", "phase": "N", "amplitudes": "amplitudes"}[w.source]
            if getattr(w, need) is None:
                missing.append(f"wigner.{need}")
        if missing:
            raise ValueError(
                f"experiment {self.experiment!r} requires: " + ", ".join(missing)
            )
        return self


def _format_errors(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        out.append(f"{loc}: {err['msg']}")
    return out


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.key=value`` overrides; values parse as JSON when possible."""
    problems = []
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            problems.append(f"{item!r}: expected key=value")
            continue
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                problems.append(f"{key}: {part} is not a section")
                break
        else:
            node[parts[-1]] = parse_value(value)
    if problems:
        raise ConfigError(problems)
    return data


def load_config(
    path: str | Path | None,
    overrides: list[str] = (),
    experiment: str | None = None,
) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError([f"config file {path} does not exist"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config file {path} is not valid JSON: {exc}"]) from None
        if not isinstance(data, dict):
            raise ConfigError(["config root must be a JSON object"])
    if experiment is not None:
        data["experiment"] = experiment
    data = apply_overrides(data, list(overrides))
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
