"""Klein-Gordon stencil on the lattice cylinder and its exact Green operators.

With the leapfrog stencil the retarded and advanced solutions are produced
by explicit recursions, so ``P E+ f = f`` and ``E_P P g = 0`` hold up to
rounding rather than up to a discretization error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeFunction, SpacetimeGrid, _same_grid
from .errors import GridMismatchError


@dataclass(frozen=True)
class FieldOperatorSpec:
    """Diagonal Klein-Gordon operator, one mass per component."""

    grid: SpacetimeGrid
    masses: tuple
    label: str = ""

    def __post_init__(self):
        masses = tuple(float(m) for m in np.atleast_1d(self.masses))
        if not masses or any(m < 0 for m in masses):
            raise ValueError("masses must be a non-empty sequence of non-negative reals")
        g = self.grid
        worst = g.dt**2 * (max(masses) ** 2 + 4.0 / g.dx**2)
        if worst > 4.0:
            raise ValueError(f"leapfrog unstable: dt^2 (m^2 + 4/dx^2) = {worst:.4g} exceeds 4")
        object.__setattr__(self, "masses", masses)

    @property
    def components(self) -> int:
        return len(self.masses)

    @property
    def mass_squared(self) -> np.ndarray:
        """Column of squared masses, shape ``(components, 1)`` for broadcasting."""
        return np.asarray(self.masses)[:, None] ** 2

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "masses": list(self.masses), "label": self.label}

    @classmethod
    def from_dict(cls, d: dict) -> "FieldOperatorSpec":
        return cls(SpacetimeGrid.from_dict(d["grid"]), tuple(d["masses"]), d.get("label", ""))


def _check(spec: FieldOperatorSpec, u: LatticeFunction) -> None:
    _same_grid(spec.grid, u.grid)
    if u.components != spec.components:
        raise GridMismatchError(
            f"operator has {spec.components} components, function has {u.components}")


def laplacian(u: np.ndarray, dx: float) -> np.ndarray:
    """Periodic second difference along the last axis."""
    return (np.roll(u, -1, axis=-1) - 2.0 * u + np.roll(u, 1, axis=-1)) / dx**2


def apply_operator(spec: FieldOperatorSpec, u: LatticeFunction) -> LatticeFunction:
    """Stencil ``(d_t^2 - d_x^2 + m^2) u`` on interior slices; first and last slice are zero."""
    _check(spec, u)
    g = spec.grid
    v = u.values
    out = np.zeros_like(v)
    mid = v[:, 1:-1]
    out[:, 1:-1] = ((v[:, 2:] - 2.0 * mid + v[:, :-2]) / g.dt**2
                    - laplacian(mid, g.dx) + spec.mass_squared[:, None] * mid)
    return LatticeFunction(g, out)


def _solve(spec: FieldOperatorSpec, f: LatticeFunction, forward: bool,
           coupling=None) -> LatticeFunction:
    """Leapfrog recursion for ``P u = f`` with zero data on the first (or last) two slices.

    ``coupling`` is an optional callable ``(t, u_t) -> array`` adding a
    same-slice multiplicative term to the operator.
    """
    g = spec.grid
    f.check_source_margin()
    m2 = spec.mass_squared
    dt2 = g.dt**2
    fv = f.values
    u = np.zeros_like(fv)
    steps = range(1, g.nt - 1) if forward else range(g.nt - 2, 0, -1)
    for t in steps:
        ut = u[:, t]
        rhs = laplacian(ut, g.dx) - m2 * ut + fv[:, t]
        if coupling is not None:
            rhs = rhs - coupling(t, ut)
        if forward:
            u[:, t + 1] = 2.0 * ut - u[:, t - 1] + dt2 * rhs
        else:
            u[:, t - 1] = 2.0 * ut - u[:, t + 1] + dt2 * rhs
    return LatticeFunction(g, u)


def retarded_green(spec: FieldOperatorSpec, f: LatticeFunction) -> LatticeFunction:
    """E+ f: the solution of ``P u = f`` vanishing before the support of f."""
    _check(spec, f)
    return _solve(spec, f, forward=True)


def advanced_green(spec: FieldOperatorSpec, f: LatticeFunction) -> LatticeFunction:
    """E- f: the solution of ``P u = f`` vanishing after the support of f."""
    _check(spec, f)
    return _solve(spec, f, forward=False)


def pauli_jordan(spec: FieldOperatorSpec, f: LatticeFunction) -> LatticeFunction:
    """E_P f = E- f - E+ f, a homogeneous solution on the whole grid."""
    return advanced_green(spec, f) - retarded_green(spec, f)


def symplectic_pairing(spec: FieldOperatorSpec, f: LatticeFunction, g: LatticeFunction) -> float:
    """E_P(f, g) = sum dt*dx * f * (E_P g)."""
    _check(spec, f)
    return f.inner(pauli_jordan(spec, g))


def equivalence_check(spec: FieldOperatorSpec, f: LatticeFunction, g: LatticeFunction,
                      rtol: float = 1e-12) -> bool:
    """True iff ``E_P f == E_P g`` up to ``rtol`` times the larger solution's sup norm."""
    a = pauli_jordan(spec, f).values
    b = pauli_jordan(spec, g).values
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1.0)
    return bool(np.max(np.abs(a - b)) <= rtol * scale)


def evolve_homogeneous(spec: FieldOperatorSpec, data0: np.ndarray, data1: np.ndarray,
                       t0: int, dtype=float) -> LatticeFunction:
    """Homogeneous solution on the whole grid with values ``data0`` at ``t0`` and ``data1`` at ``t0+1``.

    ``data0``/``data1`` have shape ``(components, nx)``.
    """
    g = spec.grid
    if not (0 <= t0 < g.nt - 1):
        raise ValueError(f"Cauchy slice {t0} outside grid")
    m2 = spec.mass_squared
    dt2 = g.dt**2
    u = np.zeros((spec.components, g.nt, g.nx), dtype=dtype)
    u[:, t0] = data0
    u[:, t0 + 1] = data1
    for t in range(t0 + 1, g.nt - 1):
        ut = u[:, t]
        u[:, t + 1] = 2.0 * ut - u[:, t - 1] + dt2 * (laplacian(ut, g.dx) - m2 * ut)
    for t in range(t0, 0, -1):
        ut = u[:, t]
        u[:, t - 1] = 2.0 * ut - u[:, t + 1] + dt2 * (laplacian(ut, g.dx) - m2 * ut)
    return LatticeFunction(g, u)


def mode_frequencies(spec: FieldOperatorSpec, component: int = 0) -> np.ndarray:
    """Squared lattice frequencies ``m^2 + (4/dx^2) sin^2(pi k / nx)`` for k = 0..nx-1."""
    g = spec.grid
    k = np.arange(g.nx)
    return spec.masses[component] ** 2 + (4.0 / g.dx**2) * np.sin(np.pi * k / g.nx) ** 2
