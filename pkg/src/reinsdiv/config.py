"""Run configuration: a single YAML file with fixed sections and keys."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .hjb import JUMP_FORMULAS, SolverConfig
from .model import ClaimLaw, ModelParams, ParameterError

BUNDLED = ("fig1", "fig2")


class ConfigError(ValueError):
    pass


@dataclass
class ModelSection:
    k1: float
    k2: float
    beta: float
    r: float
    rho: float
    claims: list[dict]
    zeta0: float = 0.04


@dataclass
class GridSection:
    n: int = 2000
    control_points: int = 101


@dataclass
class SolverSection:
    tol: float = 1e-8
    max_iter: int = 500
    jump_formula: str = "derived"


@dataclass
class McSection:
    paths: int = 100_000
    seed: int = 42
    t_max_override: float | None = None


@dataclass
class OutputSection:
    directory: str = "out"


@dataclass
class RunConfig:
    model: ModelSection
    grid: GridSection = field(default_factory=GridSection)
    solver: SolverSection = field(default_factory=SolverSection)
    mc: McSection = field(default_factory=McSection)
    output: OutputSection = field(default_factory=OutputSection)

    def params(self) -> ModelParams:
        m = self.model
        try:
            atoms = tuple((float(c["y"]), float(c["prob"])) for c in m.claims)
            return ModelParams(k1=m.k1, k2=m.k2, beta=m.beta, zeta0=m.zeta0, r=m.r, rho=m.rho,
                               claims=ClaimLaw(atoms))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"model.claims entries need numeric 'y' and 'prob': {exc}") from exc
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc

    def solver_config(self) -> SolverConfig:
        return SolverConfig(n=self.grid.n, control_points=self.grid.control_points, tol=self.solver.tol,
                            max_iter=self.solver.max_iter, jump_formula=self.solver.jump_formula)


_SECTIONS = {"model": ModelSection, "grid": GridSection, "solver": SolverSection,
             "mc": McSection, "output": OutputSection}


def _build(cls, raw: Any, where: str):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{where}' must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in '{where}': {', '.join(sorted(unknown))}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"section '{where}': {exc}") from exc


def parse_config(data: Any) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    if "model" not in data:
        raise ConfigError("missing 'model' section")
    parts = {name: _build(cls, data.get(name), name) for name, cls in _SECTIONS.items() if name in data}
    cfg = RunConfig(**parts)
    _coerce(cfg)
    return cfg


def _coerce(cfg: RunConfig) -> None:
    try:
        for name in ("k1", "k2", "beta", "r", "rho", "zeta0"):
            setattr(cfg.model, name, float(getattr(cfg.model, name)))
        cfg.grid.n = int(cfg.grid.n)
        cfg.grid.control_points = int(cfg.grid.control_points)
        cfg.solver.tol = float(cfg.solver.tol)
        cfg.solver.max_iter = int(cfg.solver.max_iter)
        cfg.mc.paths = int(cfg.mc.paths)
        cfg.mc.seed = int(cfg.mc.seed)
        if cfg.mc.t_max_override is not None:
            cfg.mc.t_max_override = float(cfg.mc.t_max_override)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-numeric config value: {exc}") from exc
    if cfg.solver.jump_formula not in JUMP_FORMULAS:
        raise ConfigError(f"solver.jump_formula must be one of {JUMP_FORMULAS}")
    if not isinstance(cfg.model.claims, list) or not cfg.model.claims:
        raise ConfigError("model.claims must be a nonempty list")
    if cfg.grid.n < 3 or cfg.grid.control_points < 1:
        raise ConfigError("grid.n must be >= 3 and grid.control_points >= 1")
    if cfg.mc.paths < 2:
        raise ConfigError("mc.paths must be at least 2")


def load_config(source: str | Path) -> RunConfig:
    """Parse a config file, or one of the bundled names ``fig1`` / ``fig2``."""
    if str(source) in BUNDLED:
        text = resources.files("reinsdiv.configs").joinpath(f"{source}.yaml").read_text()
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {source}: {exc}") from exc
    return parse_config(data)
