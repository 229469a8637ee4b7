"""Run configuration: YAML parsing, validation, and round-tripping.

All quantities in config files use experimentalist units (cm/s, s^-1, um);
conversion to internal units happens in the to_* methods.  Validation
errors name the offending key with its full dotted path.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import yaml

from .errors import ConfigError
from .objective import (KGrid, OptimizationProblem, ParameterBounds,
                        grid_from_velocities, uniform_velocity_grid)
from .potential import LaserProfile, segments_from_dicts
from .units import (AtomSpecies, cesium_default, rate_per_s_to_internal,
                    species_from_si)
from .wavepacket import WavepacketSpec

_MODES = ("one_channel", "two_channel")


def _check_keys(mapping: dict, path: str, allowed: set[str]):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(mapping).__name__}")
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key "
                              f"(known: {', '.join(sorted(allowed))})")


def _number(mapping: dict, key: str, path: str, default=None, required=False):
    if key not in mapping:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = mapping[key]
    if isinstance(v, str):
        # YAML 1.1 reads "1.033e5" (no exponent sign) as a string; be lenient.
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{path}.{key}: expected a number, got {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


def _integer(mapping: dict, key: str, path: str, default=None, required=False):
    if key not in mapping:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = mapping[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    return int(v)


def _boolean(mapping: dict, key: str, path: str, default=False):
    v = mapping.get(key, default)
    if not isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected true/false, got {v!r}")
    return v


@dataclass(frozen=True)
class SpeciesConfig:
    name: str = "cesium"
    mass_kg: float | None = None
    gamma_per_s: float | None = None
    lambda_nm: float | None = None

    @staticmethod
    def parse(mapping: dict, path: str = "species") -> "SpeciesConfig":
        _check_keys(mapping, path, {"name", "mass_kg", "gamma_per_s", "lambda_nm"})
        name = mapping.get("name", "cesium")
        if not isinstance(name, str):
            raise ConfigError(f"{path}.name: expected a string, got {name!r}")
        custom = {k: _number(mapping, k, path)
                  for k in ("mass_kg", "gamma_per_s", "lambda_nm")}
        given = [k for k, v in custom.items() if v is not None]
        if given and len(given) != 3:
            raise ConfigError(
                f"{path}: custom species needs all of mass_kg, gamma_per_s, "
                f"lambda_nm (got only {', '.join(given)})")
        if not given and name != "cesium":
            raise ConfigError(f"{path}.name: unknown species {name!r} "
                              "(only 'cesium' is built in; give explicit constants)")
        return SpeciesConfig(name=name, **custom)

    def to_species(self) -> AtomSpecies:
        if self.mass_kg is None:
            return cesium_default()
        return species_from_si(self.name, self.mass_kg, self.gamma_per_s,
                               self.lambda_nm)


@dataclass(frozen=True)
class SegmentConfig:
    width_um: float
    detuning_per_s: float
    rabi_per_s: float

    @staticmethod
    def parse(mapping: dict, path: str) -> "SegmentConfig":
        _check_keys(mapping, path, {"width_um", "detuning_per_s", "rabi_per_s"})
        w = _number(mapping, "width_um", path, required=True)
        d = _number(mapping, "detuning_per_s", path, required=True)
        r = _number(mapping, "rabi_per_s", path, required=True)
        if w <= 0:
            raise ConfigError(f"{path}.width_um: must be positive, got {w}")
        if r < 0:
            raise ConfigError(f"{path}.rabi_per_s: must be nonnegative, got {r}")
        return SegmentConfig(width_um=w, detuning_per_s=d, rabi_per_s=r)


@dataclass(frozen=True)
class ProfileConfig:
    segments: tuple[SegmentConfig, ...]
    x_start_um: float = 0.0

    @staticmethod
    def parse(mapping: dict, path: str = "profile") -> "ProfileConfig":
        _check_keys(mapping, path, {"x_start_um", "segments"})
        x0 = _number(mapping, "x_start_um", path, default=0.0)
        raw = mapping.get("segments")
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"{path}.segments: expected a nonempty list")
        segs = tuple(SegmentConfig.parse(s, f"{path}.segments[{i}]")
                     for i, s in enumerate(raw))
        return ProfileConfig(segments=segs, x_start_um=x0)

    def to_profile(self, species: AtomSpecies) -> LaserProfile:
        rows = [asdict(s) for s in self.segments]
        return segments_from_dicts(rows, species, x_start=self.x_start_um)


@dataclass(frozen=True)
class GridConfig:
    v_min_cm_s: float
    v_max_cm_s: float
    n: int
    weights: tuple[float, ...] | None = None

    @staticmethod
    def parse(mapping: dict, path: str = "grid") -> "GridConfig":
        _check_keys(mapping, path, {"v_min_cm_s", "v_max_cm_s", "n", "weights"})
        v0 = _number(mapping, "v_min_cm_s", path, required=True)
        v1 = _number(mapping, "v_max_cm_s", path, required=True)
        n = _integer(mapping, "n", path, required=True)
        if not 0 < v0 < v1:
            raise ConfigError(f"{path}: need 0 < v_min_cm_s < v_max_cm_s, "
                              f"got [{v0}, {v1}]")
        if n < 2:
            raise ConfigError(f"{path}.n: need at least 2 points, got {n}")
        weights = mapping.get("weights")
        if weights is not None:
            if (not isinstance(weights, list)
                    or not all(isinstance(w, (int, float)) and not isinstance(w, bool)
                               for w in weights)):
                raise ConfigError(f"{path}.weights: expected a list of numbers")
            if len(weights) != n:
                raise ConfigError(f"{path}.weights: expected {n} entries, "
                                  f"got {len(weights)}")
            weights = tuple(float(w) for w in weights)
        return GridConfig(v_min_cm_s=v0, v_max_cm_s=v1, n=n, weights=weights)

    def velocities(self):
        import numpy as np
        return np.linspace(self.v_min_cm_s, self.v_max_cm_s, self.n)

    def to_grid(self, species: AtomSpecies) -> KGrid:
        if self.weights is None:
            return uniform_velocity_grid(self.v_min_cm_s, self.v_max_cm_s,
                                         self.n, species)
        try:
            return grid_from_velocities(self.velocities(), self.weights, species)
        except ValueError as exc:
            raise ConfigError(f"grid.weights: {exc}") from exc


@dataclass(frozen=True)
class BoundsConfig:
    delta_min_per_s: float = -5.0e8
    delta_max_per_s: float = 5.0e8
    omega_max_per_s: float = 5.0e8

    @staticmethod
    def parse(mapping: dict, path: str) -> "BoundsConfig":
        _check_keys(mapping, path,
                    {"delta_min_per_s", "delta_max_per_s", "omega_max_per_s"})
        out = BoundsConfig(
            delta_min_per_s=_number(mapping, "delta_min_per_s", path, default=-5.0e8),
            delta_max_per_s=_number(mapping, "delta_max_per_s", path, default=5.0e8),
            omega_max_per_s=_number(mapping, "omega_max_per_s", path, default=5.0e8))
        if out.delta_min_per_s >= out.delta_max_per_s:
            raise ConfigError(f"{path}: need delta_min_per_s < delta_max_per_s")
        if out.omega_max_per_s <= 0:
            raise ConfigError(f"{path}.omega_max_per_s: must be positive")
        return out

    def to_bounds(self) -> ParameterBounds:
        return ParameterBounds(
            delta_min=rate_per_s_to_internal(self.delta_min_per_s),
            delta_max=rate_per_s_to_internal(self.delta_max_per_s),
            omega_max=rate_per_s_to_internal(self.omega_max_per_s))


@dataclass(frozen=True)
class OptimizeConfig:
    n_segments: int
    total_length_um: float
    kappa: float = 0.2
    multistart: int = 16
    seed: int = 0
    bounds: BoundsConfig = field(default_factory=BoundsConfig)
    tie_detuning: bool = False
    free_widths: bool = False
    x_start_um: float = 0.0

    @staticmethod
    def parse(mapping: dict, path: str = "optimize") -> "OptimizeConfig":
        _check_keys(mapping, path, {"n_segments", "total_length_um", "kappa",
                                    "multistart", "seed", "bounds",
                                    "tie_detuning", "free_widths", "x_start_um"})
        n = _integer(mapping, "n_segments", path, required=True)
        L = _number(mapping, "total_length_um", path, required=True)
        if n < 1:
            raise ConfigError(f"{path}.n_segments: must be at least 1, got {n}")
        if L <= 0:
            raise ConfigError(f"{path}.total_length_um: must be positive, got {L}")
        kappa = _number(mapping, "kappa", path, default=0.2)
        if not 0 < kappa < 1:
            raise ConfigError(f"{path}.kappa: must lie in (0, 1), got {kappa}")
        multistart = _integer(mapping, "multistart", path, default=16)
        if multistart < 0:
            raise ConfigError(f"{path}.multistart: must be nonnegative")
        seed = _integer(mapping, "seed", path, default=0)
        bounds = BoundsConfig.parse(mapping.get("bounds", {}), f"{path}.bounds")
        return OptimizeConfig(
            n_segments=n, total_length_um=L, kappa=kappa, multistart=multistart,
            seed=seed, bounds=bounds,
            tie_detuning=_boolean(mapping, "tie_detuning", path),
            free_widths=_boolean(mapping, "free_widths", path),
            x_start_um=_number(mapping, "x_start_um", path, default=0.0))

    def to_problem(self, species: AtomSpecies, grid: KGrid) -> OptimizationProblem:
        return OptimizationProblem(
            species=species, grid=grid, n_segments=self.n_segments,
            total_length=self.total_length_um, kappa=self.kappa,
            bounds=self.bounds.to_bounds(), multistart=self.multistart,
            seed=self.seed, tie_detuning=self.tie_detuning,
            free_widths=self.free_widths, x_start=self.x_start_um)


@dataclass(frozen=True)
class WavepacketConfig:
    v_mean_cm_s: float
    sigma_x_um: float
    x0_um: float
    t_max_us: float
    n_times: int = 200
    mode: str = "one_channel"

    @staticmethod
    def parse(mapping: dict, path: str = "wavepacket") -> "WavepacketConfig":
        _check_keys(mapping, path, {"v_mean_cm_s", "sigma_x_um", "x0_um",
                                    "t_max_us", "n_times", "mode"})
        out = WavepacketConfig(
            v_mean_cm_s=_number(mapping, "v_mean_cm_s", path, required=True),
            sigma_x_um=_number(mapping, "sigma_x_um", path, required=True),
            x0_um=_number(mapping, "x0_um", path, required=True),
            t_max_us=_number(mapping, "t_max_us", path, required=True),
            n_times=_integer(mapping, "n_times", path, default=200),
            mode=mapping.get("mode", "one_channel"))
        if out.mode not in _MODES:
            raise ConfigError(f"{path}.mode: expected one of {_MODES}, "
                              f"got {out.mode!r}")
        if out.t_max_us <= 0:
            raise ConfigError(f"{path}.t_max_us: must be positive")
        if out.n_times < 2:
            raise ConfigError(f"{path}.n_times: need at least 2")
        return out

    def to_spec(self, species: AtomSpecies) -> WavepacketSpec:
        try:
            return WavepacketSpec(species=species, v_mean=self.v_mean_cm_s,
                                  sigma_x=self.sigma_x_um, x0=self.x0_um)
        except ValueError as exc:
            raise ConfigError(f"wavepacket: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    species: SpeciesConfig = field(default_factory=SpeciesConfig)
    profile: ProfileConfig | None = None
    grid: GridConfig | None = None
    optimize: OptimizeConfig | None = None
    wavepacket: WavepacketConfig | None = None
    out_dir: str | None = None
    threads: int | None = None


def loads_config(text: str) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    _check_keys(raw, "config", {"species", "profile", "grid", "optimize",
                                "wavepacket", "output", "threads"})
    species = SpeciesConfig.parse(raw.get("species", {}))
    out_dir = None
    if "output" in raw:
        _check_keys(raw["output"], "output", {"directory"})
        out_dir = raw["output"].get("directory")
        if out_dir is not None and not isinstance(out_dir, str):
            raise ConfigError(f"output.directory: expected a string, got {out_dir!r}")
    threads = _integer(raw, "threads", "config", default=None)
    if threads is not None and threads < 1:
        raise ConfigError(f"config.threads: must be at least 1, got {threads}")
    return RunConfig(
        species=species,
        profile=ProfileConfig.parse(raw["profile"]) if "profile" in raw else None,
        grid=GridConfig.parse(raw["grid"]) if "grid" in raw else None,
        optimize=OptimizeConfig.parse(raw["optimize"]) if "optimize" in raw else None,
        wavepacket=WavepacketConfig.parse(raw["wavepacket"]) if "wavepacket" in raw else None,
        out_dir=out_dir,
        threads=threads,
    )


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads_config(text)


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain-dict form mirroring the file syntax (round-trip safe)."""
    out: dict = {}
    sp = asdict(cfg.species)
    out["species"] = {k: v for k, v in sp.items() if v is not None}
    if cfg.profile is not None:
        out["profile"] = {
            "x_start_um": cfg.profile.x_start_um,
            "segments": [asdict(s) for s in cfg.profile.segments],
        }
    if cfg.grid is not None:
        g = asdict(cfg.grid)
        if g["weights"] is None:
            del g["weights"]
        else:
            g["weights"] = list(g["weights"])
        out["grid"] = g
    if cfg.optimize is not None:
        o = asdict(cfg.optimize)
        out["optimize"] = o
    if cfg.wavepacket is not None:
        out["wavepacket"] = asdict(cfg.wavepacket)
    if cfg.out_dir is not None:
        out["output"] = {"directory": cfg.out_dir}
    if cfg.threads is not None:
        out["threads"] = cfg.threads
    return out


def dumps_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
