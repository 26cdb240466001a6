"""Run configuration: material presets, config files and geometry construction.

Config files are flat ``key = value`` lines grouped under section headers.
Section names are only for readability, every key lives in one namespace:

    [ensemble]
    preset = cs
    n = 10, 30
    [design]
    budget = 0.02

Command-line flags override file values.
"""
from __future__ import annotations

import configparser
import enum
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

from .ensemble import DipolePattern, EnsembleGeometry, load_geometry, make_cylinder, make_linear_chain
from .radiation import Weighting


class Preset(str, enum.Enum):
    CS_CHAIN = "cs"
    NV_CYLINDER = "nv"
    CUSTOM = "custom"


# material constants, SI
CS = dict(wavelength=852e-9, spacing=532e-9, lifetime=30e-9, pattern=DipolePattern.SIGMA_PLUS)
NV = dict(
    wavelength=637e-9,
    lifetime=13e-9,
    number_density=2e20,  # 2e14 cm^-3
    aspect_ratio=10.0,
    pattern=DipolePattern.PI,
    inhomogeneous_fwhm=20e9,
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    preset: Preset = Preset.CS_CHAIN
    n: tuple = (10,)
    geometry_file: Optional[str] = None
    seed: int = 0
    runs: int = 100
    out: str = "."
    budget: Optional[float] = None
    init_budget: Optional[float] = None
    target: float = 0.5
    weighting: Weighting = Weighting.SOLID_ANGLE
    interference_factor: float = 1.0
    window_budget: str = "pair"
    max_trials: int = 1_000_000
    rows: int = 2000
    fwhm: Optional[float] = None
    n_polar: Optional[int] = None
    n_azimuth: Optional[int] = None
    emission_rate_scale: float = 1.0
    workers: Optional[int] = None

    def __post_init__(self):
        try:
            self.preset = Preset(self.preset)
            self.weighting = Weighting(self.weighting)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if isinstance(self.n, int):
            self.n = (self.n,)
        self.n = tuple(int(v) for v in self.n)
        if not self.n or any(v < 1 for v in self.n):
            raise ConfigError("n must be one or more positive integers")
        if self.preset is Preset.CUSTOM and not self.geometry_file:
            raise ConfigError("the custom preset needs a geometry file")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.rows < 2:
            raise ConfigError("rows must be at least 2")
        if self.interference_factor not in (0.5, 1.0):
            raise ConfigError("interference_factor must be 0.5 or 1.0")
        if self.window_budget not in ("pair", "each"):
            raise ConfigError("window_budget must be 'pair' or 'each'")
        if self.max_trials < 1:
            raise ConfigError("max_trials must be at least 1")
        if self.budget is not None and not (0.0 < self.budget < 1.0):
            raise ConfigError("budget must lie in (0, 1)")
        if self.emission_rate_scale < 0:
            raise ConfigError("emission_rate_scale must be nonnegative")

    @property
    def linewidth(self) -> float:
        """Inhomogeneous FWHM in Hz: explicit value, else the preset's."""
        if self.fwhm is not None:
            return self.fwhm
        return NV["inhomogeneous_fwhm"] if self.preset is Preset.NV_CYLINDER else 0.0

    def echo(self) -> dict:
        d = asdict(self)
        d["preset"] = self.preset.value
        d["weighting"] = self.weighting.value
        d["n"] = list(self.n)
        return d

    def with_overrides(self, **changes) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _convert(name: str, raw: str):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    if name not in kinds:
        raise ConfigError(f"unknown config key {name!r}")
    raw = raw.strip()
    if name == "n":
        return tuple(int(v) for v in raw.replace(",", " ").split())
    if name in ("seed", "runs", "max_trials", "rows", "n_polar", "n_azimuth", "workers"):
        return int(raw)
    if name in ("budget", "init_budget", "target", "interference_factor", "fwhm", "emission_rate_scale"):
        return float(raw)
    return raw


def read_config_file(path: Union[str, Path]) -> dict:
    """Parse a config file into RunConfig keyword arguments."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        # keys before the first header land in an implicit section
        parser.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            name = key.replace("-", "_")
            if name == "geometry":
                name = "geometry_file"
            try:
                out[name] = _convert(name, value)
            except ValueError as exc:
                raise ConfigError(f"{path}: [{section}] {key}: {exc}") from None
    return out


def build_geometry(cfg: RunConfig, n: int) -> EnsembleGeometry:
    """Geometry for one N under the configured preset."""
    if cfg.preset is Preset.CS_CHAIN:
        return make_linear_chain(n, CS["spacing"], CS["wavelength"], CS["lifetime"], CS["pattern"], label=f"cs-{n}")
    if cfg.preset is Preset.NV_CYLINDER:
        return make_cylinder(
            n,
            NV["number_density"],
            NV["aspect_ratio"],
            seed=cfg.seed,
            wavelength=NV["wavelength"],
            lifetime=NV["lifetime"],
            pattern=NV["pattern"],
            label=f"nv-{n}",
        )
    return load_geometry(cfg.geometry_file)
