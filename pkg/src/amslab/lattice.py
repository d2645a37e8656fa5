"""Spacetime cylinder, lattice functions and discrete causal structure.

The grid has ``nt`` time slices and ``nx`` periodic spatial sites.  A
point ``(t, x)`` can influence ``(t + 1, x - 1)``, ``(t + 1, x)`` and
``(t + 1, x + 1)``; this one-site-per-step cone contains the continuum
light cone whenever ``dt / dx <= 1``.

Point sets are boolean arrays of shape ``(nt, nx)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import GridMismatchError, MarginError

MARGIN = 2  # protected slices at each end of the time axis


@dataclass(frozen=True)
class SpacetimeGrid:
    nt: int
    nx: int
    dt: float
    dx: float

    def __post_init__(self):
        if self.nt < 8 or self.nx < 8:
            raise ValueError(f"grid too small: nt={self.nt}, nx={self.nx} (need >= 8)")
        if not (self.dt > 0 and self.dx > 0):
            raise ValueError("dt and dx must be positive")
        if self.dt / self.dx > 1.0:
            raise ValueError(f"CFL ratio dt/dx = {self.dt / self.dx:g} exceeds 1")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nt, self.nx)

    @property
    def cell(self) -> float:
        """Volume element dt*dx."""
        return self.dt * self.dx

    def to_dict(self) -> dict:
        return {"nt": self.nt, "nx": self.nx, "dt": self.dt, "dx": self.dx}

    @classmethod
    def from_dict(cls, d: dict) -> "SpacetimeGrid":
        return cls(int(d["nt"]), int(d["nx"]), float(d["dt"]), float(d["dx"]))


@dataclass(frozen=True, eq=False)
class LatticeFunction:
    """Real or complex multi-component function, ``values[component, t, x]``.

    The support is derived from the nonzero entries, so it can never
    disagree with the values.
    """

    grid: SpacetimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 2:
            v = v[None]
        if v.ndim != 3 or v.shape[1:] != self.grid.shape:
            raise GridMismatchError(
                f"values of shape {np.shape(self.values)} do not fit grid {self.grid.shape}")
        if not np.iscomplexobj(v):
            v = v.astype(float, copy=False)
        object.__setattr__(self, "values", v)

    # construction -----------------------------------------------------
    @classmethod
    def zeros(cls, grid: SpacetimeGrid, components: int = 1, dtype=float) -> "LatticeFunction":
        return cls(grid, np.zeros((components, grid.nt, grid.nx), dtype=dtype))

    @classmethod
    def stack(cls, parts: Sequence["LatticeFunction"]) -> "LatticeFunction":
        grid = parts[0].grid
        for p in parts:
            _same_grid(grid, p.grid)
        return cls(grid, np.concatenate([p.values for p in parts], axis=0))

    # basic properties -------------------------------------------------
    @property
    def components(self) -> int:
        return self.values.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def component(self, j: int) -> "LatticeFunction":
        return LatticeFunction(self.grid, self.values[j:j + 1])

    def support_mask(self) -> np.ndarray:
        """Points where any component is nonzero, shape ``(nt, nx)``."""
        return np.any(self.values != 0, axis=0)

    def time_support(self) -> Optional[tuple[int, int]]:
        rows = np.nonzero(np.any(self.support_mask(), axis=1))[0]
        if rows.size == 0:
            return None
        return int(rows[0]), int(rows[-1])

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def check_source_margin(self, what: str = "source") -> None:
        ts = self.time_support()
        if ts is None:
            return
        lo, hi = ts
        if lo < MARGIN or hi > self.grid.nt - 1 - MARGIN:
            raise MarginError(
                f"{what} occupies slices [{lo}, {hi}] but must stay within "
                f"[{MARGIN}, {self.grid.nt - 1 - MARGIN}]")

    # arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, LatticeFunction):
            _same_grid(self.grid, other.grid)
            return other.values
        return other

    def __add__(self, other):
        return LatticeFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return LatticeFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return LatticeFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return LatticeFunction(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return LatticeFunction(self.grid, self.values / self._coerce(other))

    def __neg__(self):
        return LatticeFunction(self.grid, -self.values)

    def inner(self, other: "LatticeFunction") -> complex:
        """Bilinear pairing sum(dt*dx*a*b) over all components (no conjugation)."""
        _same_grid(self.grid, other.grid)
        return self.grid.cell * np.sum(self.values * other.values)

    def masked(self, mask: np.ndarray) -> "LatticeFunction":
        """Copy with every point outside ``mask`` (shape ``(nt, nx)``) set to zero."""
        return LatticeFunction(self.grid, np.where(mask[None], self.values, 0))


def _same_grid(a: SpacetimeGrid, b: SpacetimeGrid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True, eq=False)
class Region:
    """Spacetime region: a full slab, a box, or an explicit point set.

    ``t_range`` is inclusive.  ``x_arc = (start, width)`` runs from
    ``start`` over ``width`` consecutive sites modulo ``nx``.
    """

    kind: str
    t_range: tuple[int, int]
    x_arc: Optional[tuple[int, int]] = None
    points: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("slab", "box", "set"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        t0, t1 = self.t_range
        if t1 < t0:
            raise ValueError(f"empty time range {self.t_range}")
        if self.kind == "box" and (self.x_arc is None or self.x_arc[1] < 1):
            raise ValueError("box region needs an arc of positive width")
        if self.kind == "set" and self.points is None:
            raise ValueError("point-set region needs a mask")

    @classmethod
    def slab(cls, t0: int, t1: int) -> "Region":
        return cls("slab", (int(t0), int(t1)))

    @classmethod
    def box(cls, t0: int, t1: int, x0: int, width: int) -> "Region":
        return cls("box", (int(t0), int(t1)), (int(x0), int(width)))

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "Region":
        mask = np.asarray(mask, dtype=bool)
        rows = np.nonzero(mask.any(axis=1))[0]
        if rows.size == 0:
            raise ValueError("empty point set")
        return cls("set", (int(rows[0]), int(rows[-1])), None, mask.copy())

    def mask(self, grid: SpacetimeGrid) -> np.ndarray:
        if self.kind == "set":
            if self.points.shape != grid.shape:
                raise GridMismatchError("point-set region does not fit grid")
            return self.points.copy()
        t0, t1 = self.t_range
        if t0 < 0 or t1 > grid.nt - 1:
            raise GridMismatchError(f"time range {self.t_range} outside grid")
        m = np.zeros(grid.shape, dtype=bool)
        if self.kind == "slab":
            m[t0:t1 + 1, :] = True
        else:
            m[t0:t1 + 1, arc_mask(grid.nx, *self.x_arc)] = True
        return m

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "t_range": list(self.t_range)}
        if self.x_arc is not None:
            d["x_arc"] = list(self.x_arc)
        if self.points is not None:
            d["points"] = self.points.astype(int).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Region":
        pts = d.get("points")
        return cls(d["kind"], tuple(d["t_range"]),
                   tuple(d["x_arc"]) if d.get("x_arc") is not None else None,
                   None if pts is None else np.asarray(pts, dtype=bool))


def arc_mask(nx: int, start: int, width: int) -> np.ndarray:
    m = np.zeros(nx, dtype=bool)
    m[(start + np.arange(min(width, nx))) % nx] = True
    return m


PointSet = Union[Region, np.ndarray]


def as_mask(grid: SpacetimeGrid, region: PointSet) -> np.ndarray:
    if isinstance(region, Region):
        return region.mask(grid)
    m = np.asarray(region, dtype=bool)
    if m.shape != grid.shape:
        raise GridMismatchError(f"point set of shape {m.shape} does not fit grid {grid.shape}")
    return m


# ---------------------------------------------------------------------------
# causal operations


def _dilate(row: np.ndarray) -> np.ndarray:
    return row | np.roll(row, 1) | np.roll(row, -1)


def _erode(row: np.ndarray) -> np.ndarray:
    return row & np.roll(row, 1) & np.roll(row, -1)


def causal_future(grid: SpacetimeGrid, region: PointSet) -> np.ndarray:
    """J+ : every point reachable by forward causal steps (region included)."""
    out = as_mask(grid, region).copy()
    for t in range(grid.nt - 1):
        out[t + 1] |= _dilate(out[t])
    return out


def causal_past(grid: SpacetimeGrid, region: PointSet) -> np.ndarray:
    """J- : every point from which the region is reachable (region included)."""
    out = as_mask(grid, region).copy()
    for t in range(grid.nt - 1, 0, -1):
        out[t - 1] |= _dilate(out[t])
    return out


def domain_of_dependence(grid: SpacetimeGrid, region: PointSet,
                         direction: str = "both") -> np.ndarray:
    """Discrete Cauchy development D+, D- or their union.

    A point outside the region belongs to D+ when all three of its causal
    predecessors do (D- uses successors).  Points on the first or last
    slice have no predecessors or successors and only belong through the
    region itself, so the result is an inner approximation.
    """
    base = as_mask(grid, region)
    if direction not in ("past", "future", "both"):
        raise ValueError(f"direction must be past, future or both, not {direction!r}")
    fut = base.copy()
    if direction in ("future", "both"):
        for t in range(1, grid.nt):
            fut[t] |= _erode(fut[t - 1])
    past = base.copy()
    if direction in ("past", "both"):
        for t in range(grid.nt - 2, -1, -1):
            past[t] |= _erode(past[t + 1])
    if direction == "future":
        return fut
    if direction == "past":
        return past
    return fut | past


def region_is_causally_convex(grid: SpacetimeGrid, region: PointSet) -> bool:
    m = as_mask(grid, region)
    return bool(np.array_equal(causal_future(grid, m) & causal_past(grid, m), m))


def check_admissible_geometry(grid: SpacetimeGrid, N: PointSet, L: PointSet,
                              f_support: PointSet) -> bool:
    """True iff L avoids J-(supp f) and N lies in D-(L)."""
    n = as_mask(grid, N)
    lm = as_mask(grid, L)
    fs = as_mask(grid, f_support)
    if np.any(fs & ~n):
        raise ValueError("f_support is not contained in N")
    if np.any(lm & causal_past(grid, fs)):
        return False
    return bool(np.all(domain_of_dependence(grid, lm, "past")[n]))
