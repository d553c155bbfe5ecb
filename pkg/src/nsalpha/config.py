"""Run configuration: YAML schema, validation and defaults.

Every field is checked before any solve.  Validation failures are collected
and reported together, each prefixed with its dotted key path.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .fixtures import FORCING_FIXTURES, INITIAL_FIXTURES, TARGET_FIXTURES
from .io import SnapshotFormatError, read_snapshot

MODES = ("simulate", "optimize", "sweep-alpha", "verify")


class ConfigError(ValueError):
    """All validation problems of one config, one message per entry."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))
        self.errors = errors


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Mesh(_Strict):
    dim: Literal[2, 3] = 2
    n: int = Field(8, ge=4)
    m_steps: int = Field(32, ge=1)

    @field_validator("n")
    @classmethod
    def _even(cls, n):
        if n % 2:
            raise ValueError(f"n must be even, got {n}")
        return n


class Physics(_Strict):
    nu: float = Field(0.1, gt=0)
    alpha: float = Field(0.1, ge=0)
    t_final: float = Field(0.5, gt=0)


class Weights(_Strict):
    gamma_u: float = Field(1.0, ge=0)
    gamma_T: float = Field(1.0, ge=0)
    gamma_f: float = Field(0.5, ge=0)

    @model_validator(mode="after")
    def _not_all_zero(self):
        if self.gamma_u == self.gamma_T == self.gamma_f == 0:
            raise ValueError("weights must not all be zero")
        return self


class Admissible(_Strict):
    kind: Literal["unconstrained", "ball"] = "unconstrained"
    radius: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _radius(self):
        if self.kind == "ball" and self.radius is None:
            raise ValueError("a ball needs a radius")
        if self.kind == "unconstrained" and self.radius is not None:
            raise ValueError("radius is only allowed with kind 'ball'")
        return self


class _Source(_Strict):
    """Either a built-in fixture name or a snapshot file."""

    fixture: Optional[str] = None
    file: Optional[Path] = None

    @model_validator(mode="before")
    @classmethod
    def _file_replaces_fixture(cls, data):
        if isinstance(data, dict) and "file" in data and "fixture" not in data:
            data = {**data, "fixture": None}
        return data

    @model_validator(mode="after")
    def _one_of(self):
        if (self.fixture is None) == (self.file is None):
            raise ValueError("give exactly one of 'fixture' or 'file'")
        return self


class InitialCondition(_Source):
    fixture: Optional[Literal[INITIAL_FIXTURES]] = "taylor-green"
    amplitude: float = Field(0.5, gt=0)


class Target(_Strict):
    """Tracking targets: a fixture, or snapshot files for u_d and/or u_T."""

    fixture: Optional[Literal[TARGET_FIXTURES]] = "tracking"
    u_d: Optional[Path] = None
    u_T: Optional[Path] = None
    control_scale: float = Field(1.0, gt=0)
    alpha: Optional[float] = Field(None, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _files_replace_fixture(cls, data):
        if isinstance(data, dict) and ("u_d" in data or "u_T" in data) and "fixture" not in data:
            data = {**data, "fixture": None}
        return data

    @model_validator(mode="after")
    def _one_of(self):
        files = self.u_d is not None or self.u_T is not None
        if files == (self.fixture is not None):
            raise ValueError("give either 'fixture' or target files 'u_d'/'u_T'")
        return self


class Forcing(_Source):
    fixture: Optional[Literal[FORCING_FIXTURES]] = "smooth"
    scale: float = Field(1.0, ge=0)


class Optimizer(_Strict):
    max_iters: int = Field(200, ge=0)
    tol: float = Field(1e-8, gt=0)
    s0: float = Field(1.0, gt=0)


class Sweep(_Strict):
    alphas: Optional[list[float]] = None
    start: float = Field(1.0, gt=0)
    stop: float = Field(1 / 64, gt=0)

    @model_validator(mode="after")
    def _ordering(self):
        a = self.alphas
        if a is not None:
            if not a or a[-1] != 0:
                raise ValueError("alphas must end with 0")
            if any(x <= y for x, y in zip(a, a[1:])) or any(x <= 0 for x in a[:-1]):
                raise ValueError("alphas must be positive and strictly decreasing before the final 0")
        elif self.stop > self.start:
            raise ValueError("stop must not exceed start")
        return self


class RunConfig(_Strict):
    mode: Literal[MODES] = "simulate"
    mesh: Mesh = Mesh()
    physics: Physics = Physics()
    scheme: Literal["cn", "euler"] = "cn"
    weights: Weights = Weights()
    cost: Literal["J", "J0"] = "J"
    admissible: Admissible = Admissible()
    initial_condition: InitialCondition = InitialCondition()
    target: Target = Target()
    forcing: Forcing = Forcing()
    optimizer: Optimizer = Optimizer()
    sweep: Sweep = Sweep()
    output: Path = Path("out")
    seed: int = Field(0, ge=0, lt=2 ** 64)

    @model_validator(mode="after")
    def _cross_checks(self):
        if self.weights.gamma_f == 0 and self.admissible.kind == "unconstrained":
            raise ValueError("weights.gamma_f must be > 0 when the admissible set is unconstrained")
        return self


def _format_error(err: dict) -> str:
    path = ".".join(str(p) for p in err["loc"]) or "<root>"
    msg = err["msg"]
    ctx = err.get("ctx") or {}
    name = str(err["loc"][-1]) if err["loc"] else "value"
    for key, op in (("gt", ">"), ("ge", ">="), ("lt", "<"), ("le", "<=")):
        if key in ctx:
            msg += f" (constraint {name} {op} {ctx[key]})"
    return f"{path}: {msg}"


def _check_files(cfg: RunConfig, base: Path) -> list[str]:
    """Snapshot paths must exist and match the configured mesh."""
    problems = []
    m = cfg.mesh
    checks = [("initial_condition.file", cfg.initial_condition.file, 1),
              ("forcing.file", cfg.forcing.file, m.m_steps),
              ("target.u_d", cfg.target.u_d, m.m_steps + 1),
              ("target.u_T", cfg.target.u_T, 1)]
    for key, path, count in checks:
        if path is None:
            continue
        full = resolve_path(path, base)
        if not full.is_file():
            problems.append(f"{key}: file {full} does not exist")
            continue
        try:
            modes, data = read_snapshot(full)
        except SnapshotFormatError as exc:
            problems.append(f"{key}: {exc}")
            continue
        if (modes.dim, modes.n) != (m.dim, m.n) or len(data) != count:
            problems.append(f"{key}: snapshot has dim={modes.dim} n={modes.n} count={len(data)}, "
                            f"mesh needs dim={m.dim} n={m.n} count={count}")
    return problems


def resolve_path(path, base) -> Path:
    path = Path(path)
    return path if path.is_absolute() else Path(base) / path


def parse_config(text: str, base_dir=".", overrides: dict | None = None) -> RunConfig:
    """Validate YAML text into a RunConfig or raise :class:`ConfigError` listing every problem.

    Relative snapshot paths are resolved against ``base_dir``.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<root>: not valid YAML ({exc})"]) from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a mapping of sections"])
    raw = {**raw, **(overrides or {})}
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError([_format_error(e) for e in exc.errors()]) from None
    problems = _check_files(cfg, Path(base_dir))
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"<file>: cannot read {path} ({exc.strerror})"]) from exc
    return parse_config(text, path.parent, overrides)


def default_config_text() -> str:
    """The shipped example config."""
    return resources.files("nsalpha").joinpath("data/default.yaml").read_text()
