"""Suite configuration read from INI files.

[suite]
grid_radius = 12
grid_points = 96
t_grid = 0.04 0.02 0.01 0.005
truncation = 30
catalog = full            ; full | minimal | none
assemble = true           ; run the nu^(2) term-by-term assembly
output = reports
seed = 0

[tolerances]
symbol_identity = 1e-12   ; any check id from DEFAULT_TOLERANCES
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..expansion import T_GRID
from ..stencils import stencil_margin

CATALOG_CHOICES = ("full", "minimal", "none")

DEFAULT_TOLERANCES: dict[str, float] = {
    "round_constants": 1e-8,
    "paneitz_one": 1e-8,
    "fd_slope": 0.3,
    "adjoint_defect": 1e-8,
    "conformal_covariance": 1e-8,
    "green_covariance": 1e-8,
    "first_variation": 1e-6,  # relative to the C^4 norm / scale
    "ii_sign": 1e-8,
    "ii_gauge": 1e-6,  # relative to ||theta||^2
    "ii_negative": 1e-3,  # required margin per unit ||theta||^2
    "route_equivalence": 1e-6,
    "symbol_identity": 1e-12,
    "symbol_nonnegative": 1e-12,
    "null_symbol": 1e-8,
    "tt_orthogonality": 1e-6,
    "gauge_solve": 1e-12,
    "gauge_residual": 1e-10,
    "green_values": 1e-15,
    "green_l2": 1e-8,
    "nu_value": 1e-3,
    "nu_correlation": 1e-3,
    "nu_alpha": 1e-2,
    "nu_bounds": 1e-12,
    "nu_euler_lagrange": 1e-10,
    "nu_dense": 1e-9,
    "energy": 1e-8,
    "reproducing": 1e-8,
    "nu_second_variation": 1e-2,
}


class ConfigError(ValueError):
    """Invalid configuration (exit status 2)."""


@dataclass(frozen=True)
class SuiteConfig:
    grid_radius: float = 12.0
    grid_points: int = 96
    t_grid: tuple[float, ...] = T_GRID
    truncation: int = 30
    catalog: str = "full"
    assemble: bool = True
    output: str = "reports"
    seed: int = 0
    tolerances: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    tol_scale: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for k, v in self.tolerances.items():
            if k not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {k!r}")
            if not v > 0:
                raise ConfigError(f"tolerance {k} must be strictly positive")
        if not self.tol_scale > 0:
            raise ConfigError("tol-scale must be strictly positive")
        if self.grid_points < 2 * stencil_margin(4) + 1:
            raise ConfigError(f"grid_points {self.grid_points} too small for the stencil margin")
        if not self.grid_radius > 0:
            raise ConfigError("grid_radius must be positive")
        if self.truncation < 2:
            raise ConfigError("truncation degree L must be at least 2")
        if self.catalog not in CATALOG_CHOICES:
            raise ConfigError(f"catalog must be one of {CATALOG_CHOICES}")
        if len(self.t_grid) < 2 or any(t <= 0 for t in self.t_grid):
            raise ConfigError("t_grid needs at least two positive values")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def tol(self, key: str) -> float:
        return self.tolerances[key] * self.tol_scale

    def replace(self, **kw) -> "SuiteConfig":
        return dataclasses.replace(self, **kw)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        del d["output"]  # where a report is written does not change it
        d["t_grid"] = list(self.t_grid)
        d["tolerances"] = dict(sorted(self.tolerances.items()))
        return d


def load_config(path: str | Path | None) -> SuiteConfig:
    if path is None:
        return SuiteConfig()
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        read = cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    kw: dict = {}
    try:
        if "suite" in cp:
            s = cp["suite"]
            conv = {"grid_radius": s.getfloat, "grid_points": s.getint, "truncation": s.getint,
                    "seed": s.getint, "assemble": s.getboolean}
            for key, get in conv.items():
                if key in s:
                    kw[key] = get(key)
            for key in ("catalog", "output"):
                if key in s:
                    kw[key] = s.get(key).strip()
            if "t_grid" in s:
                kw["t_grid"] = tuple(float(t) for t in s.get("t_grid").replace(",", " ").split())
            unknown = set(s) - set(conv) - {"catalog", "output", "t_grid"}
            if unknown:
                raise ConfigError(f"unknown [suite] keys: {sorted(unknown)}")
        tols = dict(DEFAULT_TOLERANCES)
        if "tolerances" in cp:
            for key, val in cp["tolerances"].items():
                tols[key] = float(val)
        kw["tolerances"] = tols
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc
    return SuiteConfig(**kw)
