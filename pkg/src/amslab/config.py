"""Experiment configuration in INI form.

A user file is layered over the packaged ``data/default.ini``, so it only
needs the keys it changes.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import GeometryError
from .greenops import FieldOperatorSpec
from .lattice import Region, SpacetimeGrid
from .targets import bump, random_profile


class ConfigError(ValueError):
    pass


def default_text() -> str:
    return resources.files("amslab").joinpath("data/default.ini").read_text()


def _region(text: str) -> Region:
    parts = text.split()
    try:
        kind, nums = parts[0], [int(p) for p in parts[1:]]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"cannot parse region {text!r}") from exc
    if kind == "slab" and len(nums) == 2:
        return Region.slab(*nums)
    if kind == "box" and len(nums) == 4:
        return Region.box(*nums)
    raise ConfigError(f"region must be 'slab t0 t1' or 'box t0 t1 x0 width', got {text!r}")


@dataclass(frozen=True)
class BumpSpec:
    t_center: int
    x_center: int
    radius_t: int
    radius_x: int
    amplitude: float


@dataclass(frozen=True)
class ExperimentConfig:
    nt: int
    nx: int
    dt: float
    dx: float
    system_mass: float
    probe_mass: float
    target: BumpSpec
    target_profile: str
    target_seed: int
    N: Region
    L: Region
    order_k: int
    cut_width: int
    window_ramp: int
    phi_min: float
    lambdas: tuple
    shift: BumpSpec
    epsilon: float
    delta: float
    lam: float
    replications: int
    seed: int
    sigma_minus: int
    sigma_plus: int
    swap_source: BumpSpec
    output_dir: str
    source: Optional[str] = field(default=None, compare=False)

    # derived objects ---------------------------------------------------
    def grid(self) -> SpacetimeGrid:
        return SpacetimeGrid(self.nt, self.nx, self.dt, self.dx)

    def system(self) -> FieldOperatorSpec:
        return FieldOperatorSpec(self.grid(), (self.system_mass,), "system")

    def probe(self) -> FieldOperatorSpec:
        return FieldOperatorSpec(self.grid(), (self.probe_mass,), "probe")

    def target_function(self):
        b = self.target
        if self.target_profile == "bump":
            return bump(self.grid(), b.t_center, b.x_center, b.radius_t, b.radius_x, b.amplitude)
        return random_profile(self.grid(), b.t_center, b.x_center, b.radius_t, b.radius_x,
                              b.amplitude, self.target_seed)

    def shift_function(self):
        b = self.shift
        return bump(self.grid(), b.t_center, b.x_center, b.radius_t, b.radius_x, b.amplitude)

    def swap_source_function(self):
        b = self.swap_source
        return bump(self.grid(), b.t_center, b.x_center, b.radius_t, b.radius_x, b.amplitude)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def validate_geometry(self) -> None:
        """Region and grid checks run before any solve; raises GeometryError."""
        from .lattice import check_admissible_geometry
        g = self.grid()
        for name, reg in (("N", self.N), ("L", self.L)):
            lo, hi = reg.t_range
            if not 0 <= lo <= hi < g.nt:
                raise GeometryError(f"region {name} time range {reg.t_range} outside the grid")
        f = self.target_function()
        supp = f.support_mask()
        if f.is_zero():
            return
        if supp[~self.N.mask(g)].any():
            raise GeometryError("target is not supported inside N")
        if not check_admissible_geometry(g, self.N, self.L, supp):
            raise GeometryError("processing region L is not admissible for N and the target")


def _bump(sec, prefix: str = "") -> BumpSpec:
    return BumpSpec(sec.getint(prefix + "t_center"), sec.getint(prefix + "x_center"),
                    sec.getint(prefix + "radius_t"), sec.getint(prefix + "radius_x"),
                    sec.getfloat(prefix + "amplitude"))


def load_config(path: Optional[str] = None, text: Optional[str] = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string(default_text())
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} not found")
        cp.read_string(p.read_text(), source=str(p))
    if text is not None:
        cp.read_string(text)
    try:
        grid, tgt, sch, q = cp["grid"], cp["target"], cp["scheme"], cp["quantum"]
        st, sw = cp["statistics"], cp["swap"]
        profile = tgt.get("profile").strip()
        if profile not in ("bump", "random"):
            raise ConfigError(f"target profile must be bump or random, got {profile!r}")
        lambdas = tuple(float(x) for x in cp["scan"].get("lambdas").split())
        cfg = ExperimentConfig(
            nt=grid.getint("nt"), nx=grid.getint("nx"),
            dt=grid.getfloat("dt"), dx=grid.getfloat("dx"),
            system_mass=cp["masses"].getfloat("system"), probe_mass=cp["masses"].getfloat("probe"),
            target=_bump(tgt), target_profile=profile, target_seed=tgt.getint("seed"),
            N=_region(cp["regions"].get("N")), L=_region(cp["regions"].get("L")),
            order_k=sch.getint("order_k"), cut_width=sch.getint("cut_width"),
            window_ramp=sch.getint("window_ramp"), phi_min=sch.getfloat("phi_min"),
            lambdas=lambdas, shift=_bump(q, "shift_"),
            epsilon=st.getfloat("epsilon"), delta=st.getfloat("delta"), lam=st.getfloat("lambda"),
            replications=st.getint("replications"), seed=st.getint("seed"),
            sigma_minus=sw.getint("sigma_minus"), sigma_plus=sw.getint("sigma_plus"),
            swap_source=_bump(sw, "source_"),
            output_dir=cp["output"].get("directory"), source=path)
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if cfg.order_k < 1:
        raise ConfigError("order_k must be >= 1")
    return cfg
