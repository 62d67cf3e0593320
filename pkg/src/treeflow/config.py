"""Run configuration: one YAML file with sections, plus ``section.key=value`` overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .offspring import EnergySpec, OffspringDistribution, from_probabilities, solve_gibbs

__all__ = [
    "ModelSection",
    "TreeSection",
    "SpdeSection",
    "DiagnosticsSection",
    "RunConfig",
    "load_config",
    "apply_overrides",
]


@dataclass
class ModelSection:
    D: int | None = 2
    energies: list[float] | None = None
    beta: float = 1.0
    p: list[float] | None = None

    def validate(self):
        if (self.p is None) == (self.energies is None):
            raise ConfigError("model: give exactly one of `energies` (with D, beta) or `p`")
        if self.energies is not None:
            if self.D is None or len(self.energies) != self.D + 1:
                raise ConfigError("model: `energies` must have D + 1 entries")
            if not self.beta > 0:
                raise ConfigError("model: beta must be positive")

    def distribution(self) -> OffspringDistribution:
        if self.p is not None:
            return from_probabilities(self.p)
        return solve_gibbs(EnergySpec(self.D, tuple(self.energies), self.beta))


@dataclass
class TreeSection:
    n: int = 100
    generations: int = 600
    initial_size: int = 1
    cuts: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    foliation_every: int = 10
    foliation_parts: int = 10

    def validate(self):
        if self.n < 1 or self.generations < 0 or self.initial_size < 1:
            raise ConfigError("tree: need n >= 1, generations >= 0, initial_size >= 1")
        if self.foliation_every < 1 or self.foliation_parts < 1:
            raise ConfigError("tree: foliation cadence must be positive")
        _check_cuts(self.cuts)


@dataclass
class SpdeSection:
    dt: float = 1e-3
    dy: float = 2.0**-10
    depth: int = 10
    t_max: float = 1.0
    z0: float = 1.0
    noise: str = "exact"
    replicas: int = 1

    def validate(self):
        if not (self.dt > 0 and self.dy > 0):
            raise ConfigError("spde: dt and dy must be positive")
        if not 0 <= self.depth <= 16:
            raise ConfigError("spde: depth must lie in [0, 16]")
        if not (self.t_max > 0 and self.z0 >= 0):
            raise ConfigError("spde: need t_max > 0 and z0 >= 0")
        if self.noise not in ("exact", "grid"):
            raise ConfigError("spde: noise must be 'exact' or 'grid'")
        if self.replicas < 1:
            raise ConfigError("spde: replicas must be >= 1")


@dataclass
class DiagnosticsSection:
    replicas: int = 10_000
    ks_level: float = 1e-3
    k_max: int = 3
    max_size: int = 16
    n_list: list[int] = field(default_factory=lambda: [20, 2000])
    t_list: list[float] = field(default_factory=lambda: [0.5])
    enum_N_max: int = 10
    holder_levels: list[int] = field(default_factory=lambda: [2, 3, 4, 5, 6])

    def validate(self):
        if self.replicas < 1:
            raise ConfigError("diagnostics: replicas must be >= 1")
        if not 0 < self.ks_level < 1:
            raise ConfigError("diagnostics: ks_level must lie in (0, 1)")
        if self.k_max < 1 or self.max_size < 1:
            raise ConfigError("diagnostics: k_max and max_size must be positive")
        if not self.n_list or min(self.n_list) < 1:
            raise ConfigError("diagnostics: n_list must hold positive integers")
        if not self.t_list or min(self.t_list) <= 0:
            raise ConfigError("diagnostics: t_list must hold positive times")
        if self.enum_N_max < 1:
            raise ConfigError("diagnostics: enum_N_max must be positive")


def _check_cuts(cuts):
    if not cuts or any(c < 0 for c in cuts) or any(b < a for a, b in zip(cuts, cuts[1:])):
        raise ConfigError("cuts must be a nonempty nondecreasing list of nonnegative numbers")


_SECTIONS = {
    "model": ModelSection,
    "tree": TreeSection,
    "spde": SpdeSection,
    "diagnostics": DiagnosticsSection,
}


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=lambda: ModelSection(energies=[0.0, 0.0, 0.0]))
    tree: TreeSection = field(default_factory=TreeSection)
    spde: SpdeSection = field(default_factory=SpdeSection)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)
    seed: int = 20240101

    def validate(self) -> "RunConfig":
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for name in _SECTIONS:
            getattr(self, name).validate()
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        unknown = set(data) - set(_SECTIONS) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for name, section in _SECTIONS.items():
            raw = data.get(name)
            if raw is None:
                continue
            if not isinstance(raw, dict):
                raise ConfigError(f"section `{name}` must be a mapping")
            allowed = {f.name for f in dataclasses.fields(section)}
            bad = set(raw) - allowed
            if bad:
                raise ConfigError(f"unknown keys in `{name}`: {sorted(bad)}")
            if name == "model" and "p" in raw and "energies" not in raw:
                raw = {**raw, "energies": None}
            try:
                kwargs[name] = section(**raw)
            except TypeError as exc:
                raise ConfigError(str(exc)) from exc
        if "seed" in data:
            kwargs["seed"] = data["seed"]
        cfg = cls(**kwargs)
        _coerce(cfg)
        return cfg.validate()


def _coerce(cfg: RunConfig):
    # YAML hands back ints where floats are meant and vice versa; normalize by annotation
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        for f in dataclasses.fields(sec):
            v = getattr(sec, f.name)
            try:
                if v is None:
                    continue
                if f.type in ("int", "int | None"):
                    if isinstance(v, bool) or float(v) != int(v):
                        raise ConfigError(f"{name}.{f.name} must be an integer")
                    setattr(sec, f.name, int(v))
                elif f.type == "float":
                    setattr(sec, f.name, float(v))
                elif f.type.startswith("list[float]"):
                    setattr(sec, f.name, [float(x) for x in v])
                elif f.type.startswith("list[int]"):
                    setattr(sec, f.name, [int(x) for x in v])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{name}.{f.name}: {exc}") from exc
    if isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int):
        raise ConfigError("seed must be an integer")


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings; values are parsed as YAML scalars or lists."""
    data = json.loads(json.dumps(data))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override `{item}` is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value `{raw}`") from exc
        parts = key.strip().split(".")
        if len(parts) == 1 and parts[0] == "seed":
            data["seed"] = value
        elif len(parts) == 2:
            data.setdefault(parts[0], {})
            if not isinstance(data[parts[0]], dict):
                raise ConfigError(f"section `{parts[0]}` must be a mapping")
            data[parts[0]][parts[1]] = value
            if parts[0] == "model" and parts[1] in ("p", "energies"):
                data["model"]["energies" if parts[1] == "p" else "p"] = None
        else:
            raise ConfigError(f"override key `{key}` must be `seed` or `section.key`")
    return data


def load_config(path=None, overrides=None) -> RunConfig:
    data = RunConfig().to_dict()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            loaded = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config root must be a mapping")
        for key, value in loaded.items():
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                if key == "model" and "p" in value:
                    data[key]["energies"] = None
                data[key].update(value)
            else:
                data[key] = value
    return RunConfig.from_dict(apply_overrides(data, overrides))
