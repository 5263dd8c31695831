"""Run configuration: schema, validation, canonical serialization.

Configs are JSON documents with a fixed schema; unknown keys are rejected
so typos fail loudly.  serialize_config(parse_config(text)) round-trips
losslessly, and config_hash covers exactly the semantically meaningful
fields (output directory and worker count are excluded).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

from .basis import ModelParams

__all__ = [
    "ConfigError",
    "SweepAxis",
    "KPathSpec",
    "OmegaGridSpec",
    "IntegratorSpec",
    "EquilibriumSpec",
    "RunConfig",
    "parse_config",
    "parse_config_file",
    "serialize_config",
    "config_hash",
]

TASKS = ("ness", "phase_diagram", "spectrum", "response", "equilibrium")

_MODEL_KEYS = {"J", "U", "hard_core", "omega_c", "omega_at", "Omega",
               "Gamma_l", "Gamma_p", "gamma", "d"}
_SWEEPABLE = {"J", "U", "omega_c", "omega_at", "Omega", "Gamma_l", "Gamma_p", "gamma"}


class ConfigError(ValueError):
    """Invalid or unparseable run configuration."""


@dataclass(frozen=True)
class SweepAxis:
    param: str
    min: float
    max: float
    count: int

    def values(self):
        import numpy as np
        return np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class KPathSpec:
    kind: str = "diagonal"          # "diagonal" or "explicit"
    count: int = 50
    k_max: float = 3.141592653589793
    k_min: float = 0.0
    points: tuple = ()              # explicit k-vectors

    def resolve(self, d: int):
        if self.kind == "diagonal":
            from .spectrum import diagonal_k_path
            return diagonal_k_path(self.count, d, self.k_max, self.k_min)
        return [tuple(float(x) for x in pt) for pt in self.points]


@dataclass(frozen=True)
class OmegaGridSpec:
    min: float
    max: float
    count: int = 2001

    def values(self):
        import numpy as np
        return np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class IntegratorSpec:
    dt: float | None = None
    t_max: float | None = None
    tol: float = 1e-8
    window: float | None = None

    def opts(self):
        from .meanfield import PropagateOpts
        return PropagateOpts(dt=self.dt, t_max=self.t_max, tol=self.tol,
                             window=self.window)


@dataclass(frozen=True)
class EquilibriumSpec:
    J: float = 1.0
    Ubar: float = 0.0
    omega_c: float = 0.0
    z: int = 4
    k_count: int = 100
    k_max: float = 3.141592653589793


@dataclass(frozen=True)
class RunConfig:
    task: str
    model: ModelParams
    sweep: tuple = ()               # up to two SweepAxis entries
    k_path: KPathSpec = KPathSpec()
    omega_grid: OmegaGridSpec | None = None
    integrator: IntegratorSpec = IntegratorSpec()
    equilibrium: EquilibriumSpec = EquilibriumSpec()
    n_max: int | None = None
    eta_L: float | None = None
    eta_R: float | None = None
    seed_eps: float = 1e-3
    warm_start: bool = True
    cold_check_fraction: float = 0.05
    output_dir: str = "."
    workers: int | None = None


def _require_keys(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _number(d: dict, key: str, where: str, default=None, required=False,
            nonneg=False, positive=False):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(f"missing required key '{key}' in {where}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(f"{where}.{key} must be >= 0, got {v}")
    if positive and v <= 0:
        raise ConfigError(f"{where}.{key} must be > 0, got {v}")
    return float(v)


def _integer(d: dict, key: str, where: str, default=None, required=False,
             minimum=None):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(f"missing required key '{key}' in {where}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key} must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where}.{key} must be >= {minimum}, got {v}")
    return v


def _parse_model(d: dict) -> ModelParams:
    if not isinstance(d, dict):
        raise ConfigError("'model' must be an object")
    _require_keys(d, _MODEL_KEYS, "model")
    try:
        return ModelParams(
            J=_number(d, "J", "model", required=True),
            Omega=_number(d, "Omega", "model", required=True, nonneg=True),
            Gamma_l=_number(d, "Gamma_l", "model", required=True, nonneg=True),
            Gamma_p=_number(d, "Gamma_p", "model", default=1.0, positive=True),
            gamma=_number(d, "gamma", "model", required=True, nonneg=True),
            omega_c=_number(d, "omega_c", "model", default=0.0),
            omega_at=_number(d, "omega_at", "model", default=None),
            U=_number(d, "U", "model", default=0.0),
            hard_core=d.get("hard_core", True),
            d=_integer(d, "d", "model", default=2, minimum=1),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a JSON run configuration."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be an object")
    allowed = {"task", "model", "sweep", "k_path", "omega_grid", "integrator",
               "equilibrium", "n_max", "eta_L", "eta_R", "seed_eps",
               "warm_start", "cold_check_fraction", "output_dir", "workers"}
    _require_keys(raw, allowed, "config")
    task = raw.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
    model = _parse_model(raw.get("model", {}) if task != "equilibrium"
                         else raw.get("model", _DEFAULT_EQ_MODEL))

    sweep = []
    for i, ax in enumerate(raw.get("sweep", []) or []):
        where = f"sweep[{i}]"
        if not isinstance(ax, dict):
            raise ConfigError(f"{where} must be an object")
        _require_keys(ax, {"param", "min", "max", "count"}, where)
        param = ax.get("param")
        if param not in _SWEEPABLE:
            raise ConfigError(f"{where}.param must be one of {sorted(_SWEEPABLE)}, got {param!r}")
        count = _integer(ax, "count", where, required=True, minimum=1)
        sweep.append(SweepAxis(param=param,
                               min=_number(ax, "min", where, required=True),
                               max=_number(ax, "max", where, required=True),
                               count=count))
    if len(sweep) > 2:
        raise ConfigError("at most two sweep axes are supported")

    kp_raw = raw.get("k_path", {}) or {}
    _require_keys(kp_raw, {"kind", "count", "k_max", "k_min", "points"}, "k_path")
    kind = kp_raw.get("kind", "diagonal")
    if kind not in ("diagonal", "explicit"):
        raise ConfigError(f"k_path.kind must be 'diagonal' or 'explicit', got {kind!r}")
    points = tuple(tuple(float(x) for x in pt) for pt in kp_raw.get("points", []))
    if kind == "explicit" and not points:
        raise ConfigError("k_path.kind='explicit' requires k_path.points")
    if kind == "explicit" and any(len(pt) != model.d for pt in points):
        raise ConfigError(f"every explicit k-point needs {model.d} components")
    k_path = KPathSpec(kind=kind,
                       count=_integer(kp_raw, "count", "k_path", default=50, minimum=2),
                       k_max=_number(kp_raw, "k_max", "k_path", default=math.pi),
                       k_min=_number(kp_raw, "k_min", "k_path", default=0.0),
                       points=points)

    og_raw = raw.get("omega_grid")
    omega_grid = None
    if og_raw is not None:
        _require_keys(og_raw, {"min", "max", "count"}, "omega_grid")
        omega_grid = OmegaGridSpec(
            min=_number(og_raw, "min", "omega_grid", required=True),
            max=_number(og_raw, "max", "omega_grid", required=True),
            count=_integer(og_raw, "count", "omega_grid", default=2001, minimum=2))
        if omega_grid.max <= omega_grid.min:
            raise ConfigError("omega_grid.max must exceed omega_grid.min")

    it_raw = raw.get("integrator", {}) or {}
    _require_keys(it_raw, {"dt", "t_max", "tol", "window"}, "integrator")
    integrator = IntegratorSpec(
        dt=_number(it_raw, "dt", "integrator", default=None, positive=True),
        t_max=_number(it_raw, "t_max", "integrator", default=None, positive=True),
        tol=_number(it_raw, "tol", "integrator", default=1e-8, positive=True),
        window=_number(it_raw, "window", "integrator", default=None, positive=True))

    eq_raw = raw.get("equilibrium", {}) or {}
    _require_keys(eq_raw, {"J", "Ubar", "omega_c", "z", "k_count", "k_max"},
                  "equilibrium")
    equilibrium = EquilibriumSpec(
        J=_number(eq_raw, "J", "equilibrium", default=1.0),
        Ubar=_number(eq_raw, "Ubar", "equilibrium", default=0.0),
        omega_c=_number(eq_raw, "omega_c", "equilibrium", default=0.0),
        z=_integer(eq_raw, "z", "equilibrium", default=4, minimum=2),
        k_count=_integer(eq_raw, "k_count", "equilibrium", default=100, minimum=2),
        k_max=_number(eq_raw, "k_max", "equilibrium", default=math.pi))

    workers = _integer(raw, "workers", "config", default=None, minimum=1)
    n_max = _integer(raw, "n_max", "config", default=None, minimum=1)
    cfg = RunConfig(
        task=task, model=model, sweep=tuple(sweep), k_path=k_path,
        omega_grid=omega_grid, integrator=integrator, equilibrium=equilibrium,
        n_max=n_max,
        eta_L=_number(raw, "eta_L", "config", default=None),
        eta_R=_number(raw, "eta_R", "config", default=None),
        seed_eps=_number(raw, "seed_eps", "config", default=1e-3, nonneg=True),
        warm_start=bool(raw.get("warm_start", True)),
        cold_check_fraction=_number(raw, "cold_check_fraction", "config",
                                    default=0.05, nonneg=True),
        output_dir=str(raw.get("output_dir", ".")),
        workers=workers)
    if cfg.model.hard_core and cfg.n_max not in (None, 1):
        raise ConfigError("hard_core model uses n_max = 1")
    if not cfg.model.hard_core and (cfg.n_max is None or cfg.n_max < 2):
        raise ConfigError("soft-core model requires n_max >= 2")
    return cfg


def parse_config_file(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _config_dict(cfg: RunConfig) -> dict:
    d = {
        "task": cfg.task,
        "model": asdict(cfg.model),
        "sweep": [asdict(ax) for ax in cfg.sweep],
        "k_path": {**asdict(cfg.k_path), "points": [list(pt) for pt in cfg.k_path.points]},
        "omega_grid": None if cfg.omega_grid is None else asdict(cfg.omega_grid),
        "integrator": asdict(cfg.integrator),
        "equilibrium": asdict(cfg.equilibrium),
        "n_max": cfg.n_max,
        "eta_L": cfg.eta_L,
        "eta_R": cfg.eta_R,
        "seed_eps": cfg.seed_eps,
        "warm_start": cfg.warm_start,
        "cold_check_fraction": cfg.cold_check_fraction,
        "output_dir": cfg.output_dir,
        "workers": cfg.workers,
    }
    return d


def serialize_config(cfg: RunConfig) -> str:
    """Canonical JSON (sorted keys); parse(serialize(cfg)) == cfg."""
    return json.dumps(_config_dict(cfg), sort_keys=True, indent=2)


def config_hash(cfg: RunConfig) -> str:
    """Hash of the semantically meaningful fields only."""
    d = _config_dict(cfg)
    d.pop("output_dir")
    d.pop("workers")
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


_DEFAULT_EQ_MODEL = {"J": 1.0, "Omega": 0.0, "Gamma_l": 0.0, "gamma": 0.0,
                     "Gamma_p": 1.0}
