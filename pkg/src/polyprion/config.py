"""Run configuration: TOML (dotted sections) or an equivalent JSON document."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .integrator import get_tableau
from .mesh import (PolyMesh, agglomerate, all_grey, generate_disc, generate_structured, generate_triangles,
                   load_mesh, split_rule)
from .models import AXES, ModelParams
from .sensitivity import (MODELS, PROTEIN_STATS, SeedRegion, SolverSettings, SweepSpec, default_seed)


class ConfigError(ValueError):
    pass


MESH_KINDS = ("structured", "triangles", "disc")


@dataclass
class MeshConfig:
    file: str | None = None
    kind: str = "structured"
    nx: int = 10                # number of rings for the disc generator
    ny: int = 10
    width: float = 1.0          # cm
    height: float = 1.0
    white_from: float | None = 0.5   # fraction of the width where white matter starts; None = all grey
    axonal: tuple[float, float] = (1.0, 0.0)
    agglomerate: int | None = None
    agglomerate_seed: int = 0


@dataclass
class ModelConfig:
    model: str = "heterodimer"
    protein: str = "tau"
    p_min: float | None = None
    p_delta: float | None = None
    q_max: float | None = None
    k12: float = 0.2            # 1/year
    d_ext: float = 8e-6         # cm^2/year
    d_axn: float = 8e-5         # cm^2/year, white matter only


@dataclass
class SeedConfig:
    center: tuple[float, float] | None = None
    radius: float | None = None
    polygon: list | None = None
    width: float | None = None
    amplitude: float = 0.1


@dataclass
class OutputConfig:
    directory: str = "out"
    snapshot_times: tuple[float, ...] = ()
    vtk: bool = True


@dataclass
class SweepConfig:
    axis: str | None = None
    values: tuple[float, ...] | None = None
    quantiles: tuple[float, ...] | None = None
    workers: int = 1


@dataclass
class RunConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)
    seed: SeedConfig = field(default_factory=SeedConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    rng_seed: int = 0

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a table/object")
        sections = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(d) - set(sections)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        kw = {}
        for name, f in sections.items():
            if name not in d:
                continue
            if name == "rng_seed":
                kw[name] = _coerce(int, d[name], "rng_seed")
                continue
            sub_cls = type(f.default_factory())
            kw[name] = _section(sub_cls, d[name], name)
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        m = self.model
        if m.model not in MODELS:
            raise ConfigError(f"model.model must be one of {MODELS}, got {m.model!r}")
        if m.protein not in PROTEIN_STATS:
            raise ConfigError(f"model.protein must be one of {sorted(PROTEIN_STATS)}, got {m.protein!r}")
        if self.mesh.file is None and self.mesh.kind not in MESH_KINDS:
            raise ConfigError(f"mesh.kind must be one of {MESH_KINDS}, got {self.mesh.kind!r}")
        s = self.solver
        if s.degree < 1:
            raise ConfigError("solver.degree must be at least 1")
        if not (s.dt > 0 and s.T > 0 and s.eta0 > 0):
            raise ConfigError("solver.dt, solver.T and solver.eta0 must be positive")
        if s.linear_solver not in ("direct", "cg"):
            raise ConfigError("solver.linear_solver must be 'direct' or 'cg'")
        if self.sweep.axis is not None and self.sweep.axis not in AXES:
            raise ConfigError(f"sweep.axis must be one of {AXES}")
        try:
            self.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def params(self) -> ModelParams:
        m = self.model
        stats = PROTEIN_STATS[m.protein]
        vals = {axis: (getattr(m, axis) if getattr(m, axis) is not None else stats[axis][0]) for axis in AXES}
        return ModelParams(**vals, k12=m.k12, d_ext=m.d_ext, d_axn=m.d_axn)

    def build_mesh(self) -> PolyMesh:
        mc = self.mesh
        if mc.file is not None:
            path = Path(mc.file)
            if not path.is_file():
                raise FileNotFoundError(f"mesh file not found: {path}")
            mesh = load_mesh(path)
        else:
            if mc.white_from is None:
                rule = all_grey
            else:
                rule = split_rule(mc.white_from * mc.width, mc.axonal)
            if mc.kind == "structured":
                mesh = generate_structured(mc.nx, mc.ny, mc.width, mc.height, rule)
            elif mc.kind == "triangles":
                mesh = generate_triangles(mc.nx, mc.ny, mc.width, mc.height, rule)
            else:
                mesh = generate_disc(mc.nx, 0.5 * mc.width, (0.5 * mc.width, 0.5 * mc.width), rule)
        if mc.agglomerate is not None:
            mesh = agglomerate(mesh, mc.agglomerate, mc.agglomerate_seed)
        return mesh

    def seed_region(self, mesh: PolyMesh) -> SeedRegion:
        sc = self.seed
        base = default_seed(self.model.protein, mesh, sc.amplitude)
        if sc.polygon is not None:
            return SeedRegion(polygon=tuple(tuple(map(float, p)) for p in sc.polygon),
                              width=base.width if sc.width is None else sc.width, amplitude=sc.amplitude)
        return SeedRegion(center=base.center if sc.center is None else tuple(map(float, sc.center)),
                          radius=base.radius if sc.radius is None else sc.radius,
                          width=base.width if sc.width is None else sc.width, amplitude=sc.amplitude)

    def sweep_spec(self, mesh: PolyMesh) -> SweepSpec:
        sw = self.sweep
        if sw.axis is None:
            raise ConfigError("sweep.axis is required for a sweep")
        m = self.model
        fixed = {axis: getattr(m, axis) for axis in AXES if axis != sw.axis and getattr(m, axis) is not None}
        try:
            return SweepSpec(model=m.model, protein=m.protein, axis=sw.axis,
                             values=None if sw.values is None else tuple(sw.values),
                             quantiles=None if sw.quantiles is None else tuple(sw.quantiles),
                             fixed=fixed, solver=self.solver,
                             snapshot_times=tuple(self.output.snapshot_times),
                             seed=self.seed_region(mesh), k12=m.k12, d_ext=m.d_ext, d_axn=m.d_axn)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _coerce(kind, value, where):
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is bool and isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    raise ConfigError(f"{where}: expected {kind.__name__}, got {value!r}")


_TYPES = {
    "file": str, "kind": str, "nx": int, "ny": int, "width": float, "height": float, "white_from": float,
    "agglomerate": int, "agglomerate_seed": int, "model": str, "protein": str, "p_min": float,
    "p_delta": float, "q_max": float, "k12": float, "d_ext": float, "d_axn": float, "degree": int,
    "eta0": float, "dt": float, "T": float, "tableau": str, "linear_solver": str, "radius": float,
    "amplitude": float, "directory": str, "vtk": bool, "axis": str, "workers": int,
}
_VECTORS = {"axonal", "center", "snapshot_times", "values", "quantiles"}


def _section(cls, d: Any, name: str):
    if not isinstance(d, dict):
        raise ConfigError(f"[{name}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    kw = {}
    for k, v in d.items():
        where = f"{name}.{k}"
        if v is None:
            kw[k] = None
        elif k in _VECTORS:
            if not isinstance(v, (list, tuple)):
                raise ConfigError(f"{where}: expected a list of numbers")
            kw[k] = tuple(_coerce(float, x, where) for x in v)
        elif k == "tableau" and isinstance(v, dict):
            try:
                kw[k] = get_tableau(v).to_dict()
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"{where}: invalid tableau ({exc})") from None
        elif k == "polygon":
            if not isinstance(v, (list, tuple)) or any(not isinstance(p, (list, tuple)) or len(p) != 2 for p in v):
                raise ConfigError(f"{where}: expected a list of [x, y] pairs")
            kw[k] = [[_coerce(float, x, where) for x in p] for p in v]
        else:
            kw[k] = _coerce(_TYPES[k], v, where)
    try:
        return cls(**kw)
    except ValueError as exc:
        raise ConfigError(f"[{name}]: {exc}") from None


def load_config(path) -> RunConfig:
    """Read a ``.toml`` or ``.json`` configuration file."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"configuration file not found: {path}")
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return RunConfig.from_dict(data)
