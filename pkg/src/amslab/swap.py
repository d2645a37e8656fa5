"""Exchange of two equal-mass fields by a temporal gauge rotation.

System and probe fields of equal mass are combined into one complex field
``Phi = (phi_S + i phi_P) / sqrt(2)``.  The coupled dynamics is the
conjugated operator ``Q = exp(-i chi) P exp(i chi)`` with a profile ``chi(t)``
equal to ``angle`` (default pi/2) in the past of ``sigma_minus`` and zero
after ``sigma_plus``.  For sources ``F`` in the future region the advanced
solution satisfies ``E_Q F = exp(-i angle) E_P F`` in the past, which for
``angle = pi/2`` exchanges the two real components.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AmslabError, GeometryError
from .gaussian import GaussianState, beta_solutions, weyl_expectation, wronskian
from .greenops import FieldOperatorSpec, apply_operator, laplacian, pauli_jordan
from .lattice import LatticeFunction, SpacetimeGrid, _same_grid


@dataclass(frozen=True, eq=False)
class GaugeProfile:
    grid: SpacetimeGrid
    chi: np.ndarray = field(repr=False)       # shape (nt,)
    sigma_minus: int
    sigma_plus: int
    angle: float = math.pi / 2

    def __post_init__(self):
        chi = np.asarray(self.chi, dtype=float)
        if chi.shape != (self.grid.nt,):
            raise ValueError(f"profile must have {self.grid.nt} entries")
        sm, sp = int(self.sigma_minus), int(self.sigma_plus)
        if not 0 <= sm < sp < self.grid.nt:
            raise ValueError("need 0 <= sigma_minus < sigma_plus < nt")
        if not (np.all(chi[:sm + 1] == self.angle) and np.all(chi[sp:] == 0.0)):
            raise ValueError("profile must equal the rotation angle up to sigma_minus "
                             "and vanish from sigma_plus on")
        steps = np.diff(chi[sm:sp + 1])
        if not (np.all(steps <= 0) if self.angle >= 0 else np.all(steps >= 0)):
            raise ValueError("profile must be monotone between sigma_minus and sigma_plus")
        object.__setattr__(self, "chi", chi)

    @classmethod
    def ramp(cls, grid: SpacetimeGrid, sigma_minus: int, sigma_plus: int,
             angle: float = math.pi / 2) -> "GaugeProfile":
        """Raised-cosine descent from ``angle`` at ``sigma_minus`` to 0 at ``sigma_plus``."""
        t = np.arange(grid.nt)
        s = np.clip((t - sigma_minus) / (sigma_plus - sigma_minus), 0.0, 1.0)
        chi = angle * 0.5 * (1.0 + np.cos(np.pi * s))
        chi[t <= sigma_minus] = angle
        chi[t >= sigma_plus] = 0.0
        return cls(grid, chi, sigma_minus, sigma_plus, angle)

    def phase(self, sign: int = 1) -> np.ndarray:
        """``exp(sign * i chi)`` shaped to broadcast over ``[component, t, x]``."""
        return np.exp(sign * 1j * self.chi)[None, :, None]


def _check(P: FieldOperatorSpec, profile: GaugeProfile, psi: LatticeFunction) -> None:
    _same_grid(P.grid, profile.grid)
    _same_grid(P.grid, psi.grid)
    if P.components != 1 or psi.components != 1:
        raise ValueError("the combined field has a single complex component")


def conjugated_operator_apply(P: FieldOperatorSpec, profile: GaugeProfile,
                              psi: LatticeFunction) -> LatticeFunction:
    """``Q psi = exp(-i chi) P (exp(i chi) psi)``."""
    _check(P, profile, psi)
    rotated = LatticeFunction(P.grid, psi.values * profile.phase(+1))
    return LatticeFunction(P.grid, apply_operator(P, rotated).values * profile.phase(-1))


def _q_solve(P: FieldOperatorSpec, profile: GaugeProfile, F: LatticeFunction,
             forward: bool) -> LatticeFunction:
    """Recursion for ``Q psi = F`` written directly in terms of ``psi`` and phase jumps."""
    _check(P, profile, F)
    F.check_source_margin()
    g = P.grid
    chi = profile.chi
    m2 = P.mass_squared
    dt2 = g.dt**2
    fv = F.values.astype(complex)
    u = np.zeros_like(fv)
    steps = range(1, g.nt - 1) if forward else range(g.nt - 2, 0, -1)
    for t in steps:
        ut = u[:, t]
        rhs = 2.0 * ut + dt2 * (fv[:, t] + laplacian(ut, g.dx) - m2 * ut)
        if forward:
            u[:, t + 1] = (cmath.exp(1j * (chi[t] - chi[t + 1])) * rhs
                           - cmath.exp(1j * (chi[t - 1] - chi[t + 1])) * u[:, t - 1])
        else:
            u[:, t - 1] = (cmath.exp(1j * (chi[t] - chi[t - 1])) * rhs
                           - cmath.exp(1j * (chi[t + 1] - chi[t - 1])) * u[:, t + 1])
    return LatticeFunction(g, u)


def conjugated_advanced_green(P, profile, F) -> LatticeFunction:
    return _q_solve(P, profile, F, forward=False)


def conjugated_retarded_green(P, profile, F) -> LatticeFunction:
    return _q_solve(P, profile, F, forward=True)


def conjugated_pauli_jordan(P, profile, F) -> LatticeFunction:
    """E_Q F = E-_Q F - E+_Q F from the direct recursions."""
    return conjugated_advanced_green(P, profile, F) - conjugated_retarded_green(P, profile, F)


def conjugation_deviation(P: FieldOperatorSpec, profile: GaugeProfile, F: LatticeFunction) -> float:
    """``max |E_Q F - exp(-i chi) E_P exp(i chi) F|`` over the grid."""
    direct = conjugated_pauli_jordan(P, profile, F).values
    rotated = LatticeFunction(P.grid, F.values * profile.phase(+1))
    via_p = pauli_jordan(P, rotated).values * profile.phase(-1)
    return float(np.max(np.abs(direct - via_p)))


def _check_future(profile: GaugeProfile, F: LatticeFunction) -> None:
    ts = F.time_support()
    if ts is not None and ts[0] <= profile.sigma_plus:
        raise GeometryError(
            f"source must lie after sigma_plus = {profile.sigma_plus}, starts at {ts[0]}")


def past_rotation_deviation(P: FieldOperatorSpec, profile: GaugeProfile, F: LatticeFunction) -> float:
    """``max_{t <= sigma_minus} |E_Q F - exp(-i angle) E_P F|`` for ``F`` after ``sigma_plus``."""
    _check(P, profile, F)
    _check_future(profile, F)
    sm = profile.sigma_minus
    eq = conjugated_pauli_jordan(P, profile, F).values[:, :sm + 1]
    ep = pauli_jordan(P, F).values[:, :sm + 1]
    return float(np.max(np.abs(eq - cmath.exp(-1j * profile.angle) * ep)))


def swap_scatter_check(P: FieldOperatorSpec, profile: GaugeProfile, F: LatticeFunction) -> float:
    """``max_{t <= sigma_minus} |E_Q F + i E_P F|`` for a quarter-turn profile."""
    if not math.isclose(profile.angle, math.pi / 2, rel_tol=0, abs_tol=1e-15):
        raise ValueError("swap check needs the quarter-turn profile")
    return past_rotation_deviation(P, profile, F)


def double_rotation_check(P: FieldOperatorSpec, sigma_minus: int, sigma_plus: int,
                          F: LatticeFunction) -> float:
    """Deviation of ``E_Q F`` from ``-E_P F`` in the past for a half-turn profile."""
    profile = GaugeProfile.ramp(P.grid, sigma_minus, sigma_plus, angle=math.pi)
    return past_rotation_deviation(P, profile, F)


def combine_fields(phi_s: LatticeFunction, phi_p: LatticeFunction) -> LatticeFunction:
    """``(phi_s + i phi_p) / sqrt(2)``."""
    return LatticeFunction(phi_s.grid, (phi_s.values + 1j * phi_p.values) / math.sqrt(2.0))


@dataclass(frozen=True)
class SwapWeyl:
    value: complex            # omega(W_S(h))
    cross_check: complex      # from the past data of E_Q(i h)
    probe_factor: complex     # sigma(W_P(g)) for the probe remainder g


def swap_induced_weyl(P: FieldOperatorSpec, profile: GaugeProfile, h: LatticeFunction,
                      system_state: GaussianState,
                      probe_state: Optional[GaussianState] = None) -> SwapWeyl:
    """Expectation in ``system_state`` of the element induced by ``W_P(h)``.

    A probe smearing ``h`` is the complex source ``i h``.  In the past its
    solution ``E_Q(i h)`` splits into a real part, which is the system
    solution of the induced smearing, and an imaginary part, the probe
    remainder.  The cross check evaluates the Weyl expectation from these
    past Cauchy data alone.
    """
    _check(P, profile, h)
    if h.is_complex:
        raise ValueError("probe smearing must be real")
    if not math.isclose(profile.angle, math.pi / 2, rel_tol=0, abs_tol=1e-15):
        raise ValueError("swap needs the quarter-turn profile")
    if system_state.operator.masses != P.masses:
        raise AmslabError("system and probe must have equal masses")
    _check_future(profile, h)
    src = LatticeFunction(P.grid, 1j * h.values)
    sol = conjugated_pauli_jordan(P, profile, src).values
    t = profile.sigma_minus - 1
    if t < 0:
        raise GeometryError("sigma_minus leaves no past Cauchy slice")
    induced = LatticeFunction(P.grid, sol.real)
    remainder = LatticeFunction(P.grid, sol.imag)

    phase = 0.0
    if system_state.shift is not None:
        phase = float(np.real(wronskian(induced, system_state.shift, t)))
    b_sys = beta_solutions(system_state, induced, induced, t)
    pstate = probe_state if probe_state is not None else system_state
    if probe_state is not None and probe_state.operator.masses != P.masses:
        raise AmslabError("system and probe must have equal masses")
    b_probe = beta_solutions(pstate, remainder, remainder, t)
    probe_phase = 0.0
    if pstate.shift is not None:
        probe_phase = float(np.real(wronskian(remainder, pstate.shift, t)))
    probe_factor = cmath.exp(1j * probe_phase - 0.25 * b_probe)
    cross = probe_factor * cmath.exp(1j * phase - 0.25 * b_sys)
    return SwapWeyl(weyl_expectation(system_state, h), cross, probe_factor)
