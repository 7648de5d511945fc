"""Run configuration: strict JSON loading into dataclasses.

Every leaf in a config file may be given either as a bare value or as
``{"value": ..., "source": "paper" | "decision"}``; the shipped default file
uses the labelled form throughout so the origin of every constant is visible.
"""
from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import fem

SOURCES = ("paper", "decision")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialConfig:
    youngs_modulus: float = 2.1e11
    shear_modulus: float = 8.08e10
    density: float = 8500.0


@dataclass(frozen=True)
class MonopileConfig:
    diameter: float = 6.0
    wall_thickness: float = 0.06
    embedded_length: float = 36.0
    water_depth: float = 20.0
    height_above_water: float = 10.0


@dataclass(frozen=True)
class TowerConfig:
    length: float = 77.6
    base_diameter: float = 6.0
    top_diameter: float = 3.87
    base_thickness: float = 0.0351
    top_thickness: float = 0.0247
    n_segments: int = 10


@dataclass(frozen=True)
class TurbineConfig:
    material: MaterialConfig = field(default_factory=MaterialConfig)
    monopile: MonopileConfig = field(default_factory=MonopileConfig)
    tower: TowerConfig = field(default_factory=TowerConfig)
    tip_mass: float = 350000.0
    water_density: float = 1025.0
    added_mass_coefficient: float = 1.0
    rotary_inertia: bool = True
    target_element_length: float = 1.0
    embedded_element_length: float = 0.1
    eigen_solver: str = "sparse"


@dataclass(frozen=True)
class FoundationConfig:
    lateral_stiffness: float = 2.5e7
    base_axial_stiffness: float = 1e9


@dataclass(frozen=True)
class SurrogateConfig:
    domain: tuple[float, float] = (1e7, 5e7)
    degree: int = 5
    n_points: int = 50


@dataclass(frozen=True)
class TruthConfig:
    mu: float = 2.5e7
    sigma: float = 2.5e6
    spread_fraction: float = 0.05
    noise_sd: float = 1e-4
    n_obs: tuple[int, ...] = (10, 10, 10, 10, 2)
    seed: int = 2023


@dataclass(frozen=True)
class HyperPriorConfig:
    mu_mu: float = 3e7
    sigma_mu: float = 1e7
    beta_sigma: float = 5e6
    beta_gamma: float = 0.01


@dataclass(frozen=True)
class SamplerBlock:
    n_chains: int = 4
    n_warmup: int = 2000
    n_samples: int = 2000
    target_accept: float = 0.8
    max_tree_depth: int = 10
    step_size: typing.Optional[float] = None
    seed: int = 20230901


@dataclass(frozen=True)
class AnomalyConfig:
    mass: float = 0.999
    depths: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4)
    n_samples: int = 5
    predictive_draws: int = 4000
    include_noise: bool = False


@dataclass(frozen=True)
class RunConfig:
    turbine: TurbineConfig = field(default_factory=TurbineConfig)
    foundation: FoundationConfig = field(default_factory=FoundationConfig)
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    truth: TruthConfig = field(default_factory=TruthConfig)
    hyperpriors: HyperPriorConfig = field(default_factory=HyperPriorConfig)
    sampler: SamplerBlock = field(default_factory=SamplerBlock)
    anomaly: AnomalyConfig = field(default_factory=AnomalyConfig)

    def validate(self) -> "RunConfig":
        lo, hi = self.surrogate.domain
        if not lo < hi:
            raise ConfigError(f"surrogate.domain: min {lo} must be below max {hi}")
        if lo <= 0:
            raise ConfigError("surrogate.domain must be positive")
        if self.surrogate.degree < 0:
            raise ConfigError("surrogate.degree must be non-negative")
        if self.surrogate.n_points < self.surrogate.degree + 1:
            raise ConfigError("surrogate.n_points must be at least degree + 1")
        hp = self.hyperpriors
        if min(hp.sigma_mu, hp.beta_sigma, hp.beta_gamma) <= 0:
            raise ConfigError("hyperprior scales must be positive")
        s = self.sampler
        if min(s.n_chains, s.n_warmup, s.n_samples) < 1:
            raise ConfigError("sampler counts must be >= 1")
        if not 0 < s.target_accept < 1:
            raise ConfigError("sampler.target_accept must lie in (0, 1)")
        if s.max_tree_depth < 0:
            raise ConfigError("sampler.max_tree_depth must be >= 0")
        if s.step_size is not None and s.step_size <= 0:
            raise ConfigError("sampler.step_size must be positive")
        t = self.truth
        if not t.n_obs or min(t.n_obs) < 1:
            raise ConfigError("truth.n_obs needs at least one turbine with >= 1 observation")
        if t.mu <= 0 or t.sigma < 0 or t.noise_sd < 0 or t.spread_fraction < 0:
            raise ConfigError("truth values must be non-negative (mu positive)")
        a = self.anomaly
        if not 0 < a.mass < 1:
            raise ConfigError("anomaly.mass must lie in (0, 1)")
        if a.n_samples < 1 or a.predictive_draws < 10:
            raise ConfigError("anomaly.n_samples >= 1 and anomaly.predictive_draws >= 10")
        emb = self.turbine.monopile.embedded_length
        if any(not 0 <= d <= emb for d in a.depths):
            raise ConfigError(f"anomaly.depths must lie in [0, {emb}]")
        if self.turbine.eigen_solver not in ("dense", "sparse"):
            raise ConfigError("turbine.eigen_solver must be 'dense' or 'sparse'")
        try:
            self.turbine_model()
        except fem.InvalidGeometryError as exc:
            raise ConfigError(f"turbine: {exc}") from exc
        return self

    def turbine_model(self) -> fem.TurbineModel:
        return turbine_model(self.turbine, self.foundation)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# --------------------------------------------------------------------------
# geometry construction
# --------------------------------------------------------------------------

def tower_segments(tower: TowerConfig, material: fem.Material) -> list[fem.TubularSegment]:
    """Linearly tapered tower split into segments of constant wall thickness."""
    n = tower.n_segments
    segs = []
    for i in range(n):
        a, b = i / n, (i + 1) / n
        d0 = tower.base_diameter + a * (tower.top_diameter - tower.base_diameter)
        d1 = tower.base_diameter + b * (tower.top_diameter - tower.base_diameter)
        t = tower.base_thickness + 0.5 * (a + b) * (tower.top_thickness - tower.base_thickness)
        segs.append(fem.TubularSegment(tower.length / n, d0, d1, t, material, fem.Environment.AIR))
    return segs


def turbine_model(turbine: TurbineConfig, foundation: FoundationConfig) -> fem.TurbineModel:
    mc = turbine.material
    mat = fem.Material(mc.youngs_modulus, mc.shear_modulus, mc.density)
    mp = turbine.monopile
    segs = [fem.TubularSegment(mp.embedded_length, mp.diameter, mp.diameter,
                               mp.wall_thickness, mat, fem.Environment.EMBEDDED)]
    if mp.water_depth > 0:
        segs.append(fem.TubularSegment(mp.water_depth, mp.diameter, mp.diameter,
                                       mp.wall_thickness, mat, fem.Environment.SUBMERGED))
    if mp.height_above_water > 0:
        segs.append(fem.TubularSegment(mp.height_above_water, mp.diameter, mp.diameter,
                                       mp.wall_thickness, mat, fem.Environment.AIR))
    segs += tower_segments(turbine.tower, mat)
    geometry = fem.TurbineGeometry(tuple(segs), turbine.tip_mass, turbine.water_density)
    return fem.TurbineModel(
        geometry=geometry,
        foundation=fem.FoundationModel(foundation.lateral_stiffness,
                                       foundation.base_axial_stiffness),
        target_element_length=turbine.target_element_length,
        embedded_element_length=turbine.embedded_element_length,
        added_mass_coefficient=turbine.added_mass_coefficient,
        rotary_inertia=turbine.rotary_inertia,
        eigen_solver=turbine.eigen_solver,
    )


def reference_tower_model(turbine: TurbineConfig | None = None) -> fem.TurbineModel:
    """Land-based reference tower (87.6 m, clamped at ground) with the RNA as a tip mass.

    Used to check the beam model against the published fixed-base tower frequency.
    """
    turbine = turbine or TurbineConfig()
    mc = turbine.material
    mat = fem.Material(mc.youngs_modulus, mc.shear_modulus, mc.density)
    tower = dataclasses.replace(turbine.tower, length=87.6)
    geometry = fem.TurbineGeometry(tuple(tower_segments(tower, mat)), turbine.tip_mass,
                                   turbine.water_density)
    return fem.TurbineModel(geometry, target_element_length=turbine.target_element_length,
                            rotary_inertia=turbine.rotary_inertia, clamped_base=True,
                            eigen_solver="dense")


# --------------------------------------------------------------------------
# loading
# --------------------------------------------------------------------------

def _unwrap(node):
    if isinstance(node, dict):
        if set(node) == {"value", "source"}:
            if node["source"] not in SOURCES:
                raise ConfigError(f"source label must be one of {SOURCES}, got {node['source']!r}")
            return _unwrap(node["value"])
        return {k: _unwrap(v) for k, v in node.items()}
    return node


def _coerce(value, tp, path):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        return _build(tp, value, path)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(value, inner, path)
    if origin is tuple:
        args = typing.get_args(tp)
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0], f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{path}: expected {len(args)} entries")
        return tuple(_coerce(v, a, f"{path}[{i}]") for i, (v, a) in enumerate(zip(value, args)))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    raise ConfigError(f"{path}: unsupported type {tp}")


def _build(cls, data: dict, path: str = ""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) at {path or '<root>'}: {sorted(unknown)}")
    kwargs = {k: _coerce(v, hints[k], f"{path}.{k}" if path else k) for k, v in data.items()}
    return cls(**kwargs)


def from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, _unwrap(data)).validate()


def load_config(path: str | Path | None = None) -> RunConfig:
    """Load a config file; ``None`` gives the shipped defaults.

    Missing keys fall back to the defaults, unknown keys are rejected.
    """
    if path is None:
        return default_config()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return from_dict(data)


def default_config_text() -> str:
    return resources.files("scourhbm").joinpath("data/default_config.json").read_text()


def default_config() -> RunConfig:
    return from_dict(json.loads(default_config_text()))


def dump_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
