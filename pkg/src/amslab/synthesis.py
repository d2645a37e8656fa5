"""Build measurement schemes for a prescribed system smearing.

Pipeline for a target ``f``:

1. ``f_tilde = S psi_minus`` where ``psi = E_S f`` is switched off by a
   temporal ramp; ``f_tilde`` lives on the ramp slices and
   ``E_S f_tilde = E_S f``.
2. A probe solution ``phi`` equal to one on an arc around the support.
3. ``rho = -f_tilde / phi``.
4. ``h = -P(chi phi)`` with a temporal ramp ``chi`` inside the processing
   region, so that ``E_P h = phi`` and ``E-_P h = phi`` below the ramp.

Higher orders stack further probes whose couplings cancel the leading
residual coefficient of the previous stage exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .coupling import CoupledOperatorSpec, born_expand_induced
from .errors import GeometryError, SynthesisError
from .greenops import FieldOperatorSpec, apply_operator, evolve_homogeneous, pauli_jordan
from .lattice import (LatticeFunction, Region, SpacetimeGrid, arc_mask,
                      check_admissible_geometry, domain_of_dependence, _same_grid)

PHI_FLOOR = 0.1


@dataclass(frozen=True, eq=False)
class SchemeSpec:
    coupled: CoupledOperatorSpec
    target_f: LatticeFunction
    f_tilde: LatticeFunction
    probe_solution_phi: LatticeFunction
    h: LatticeFunction
    N: Region
    N_tilde: Region
    L: Region
    order_k: int = 1
    phi_min: float = 0.5
    t0: Optional[int] = None
    band: Optional[tuple] = None

    @property
    def grid(self) -> SpacetimeGrid:
        return self.coupled.grid

    @property
    def system(self) -> FieldOperatorSpec:
        return self.coupled.system

    @property
    def probe(self) -> FieldOperatorSpec:
        return self.coupled.probe

    @property
    def rho(self) -> LatticeFunction:
        return self.coupled.couplings

    # serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "coupled": self.coupled.to_dict(),
            "target_f": self.target_f.values.tolist(),
            "f_tilde": self.f_tilde.values.tolist(),
            "probe_solution_phi": self.probe_solution_phi.values.tolist(),
            "h": self.h.values.tolist(),
            "N": self.N.to_dict(),
            "N_tilde": self.N_tilde.to_dict(),
            "L": self.L.to_dict(),
            "order_k": self.order_k,
            "phi_min": self.phi_min,
            "t0": self.t0,
            "band": None if self.band is None else list(self.band),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SchemeSpec":
        coupled = CoupledOperatorSpec.from_dict(d["coupled"])
        grid = coupled.grid

        def lf(key):
            return LatticeFunction(grid, np.asarray(d[key], dtype=float))

        return cls(coupled, lf("target_f"), lf("f_tilde"), lf("probe_solution_phi"), lf("h"),
                   Region.from_dict(d["N"]), Region.from_dict(d["N_tilde"]),
                   Region.from_dict(d["L"]), int(d["order_k"]), float(d["phi_min"]),
                   d.get("t0"), None if d.get("band") is None else tuple(d["band"]))

    @classmethod
    def from_json(cls, text: str) -> "SchemeSpec":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# ingredients


def make_equivalent_representative(S: FieldOperatorSpec, f: LatticeFunction, t0: int,
                                   width: int = 1) -> LatticeFunction:
    """Representative ``S psi_minus`` of the class of ``f`` supported on ``[t0, t0 + width]``.

    ``psi_minus = (1 - chi) psi`` with ``psi = E_S f`` and ``chi`` a temporal
    ramp rising from 0 at ``t0`` to 1 at ``t0 + width``.  ``width = 1`` is the
    sharp cut (keep ``psi`` up to ``t0``, drop it above).
    """
    g = S.grid
    if width < 1:
        raise ValueError("cut width must be >= 1")
    if not (2 <= t0 and t0 + width <= g.nt - 3):
        raise SynthesisError(
            f"cut [{t0}, {t0 + width}] leaves no margin (must lie within [2, {g.nt - 3}])")
    psi = pauli_jordan(S, f)
    chi = temporal_ramp(g.nt, (t0, t0 + width))
    ft = apply_operator(S, psi * (1.0 - chi)[None, :, None]).values
    keep = np.zeros(g.nt, dtype=bool)
    keep[t0:t0 + width + 1] = True
    # away from the cut the stencil only returns the rounding residual of S psi = 0
    ft[:, ~keep] = 0.0
    return LatticeFunction(g, ft)


def plateau_profile(nx: int, arc: tuple, ramp: int) -> np.ndarray:
    """One on ``arc``, cosine fall-off to zero over ``ramp`` sites on each side."""
    start, width = arc
    prof = np.zeros(nx)
    prof[arc_mask(nx, start, width)] = 1.0
    for d in range(1, ramp + 1):
        v = 0.5 * (1.0 + np.cos(np.pi * d / (ramp + 1)))
        prof[(start - d) % nx] = max(prof[(start - d) % nx], v)
        prof[(start + width - 1 + d) % nx] = max(prof[(start + width - 1 + d) % nx], v)
    return prof


def make_probe_solution(P: FieldOperatorSpec, B: tuple, t0: int, window: int,
                        ramp: int = 4, phi_min: float = 0.5):
    """Probe solution with plateau one on arc ``B`` at ``t0`` and zero discrete velocity.

    Returns ``(phi, N_tilde, observed_min)`` where ``N_tilde`` is
    ``D(B) ∩ ([t0 - window, t0 + window] x B)`` and ``observed_min`` the
    smallest ``|phi|`` on it.  Raises SynthesisError when that minimum drops
    below ``phi_min``.
    """
    if phi_min < PHI_FLOOR:
        raise ValueError(f"phi_min must be at least {PHI_FLOOR}")
    if P.components != 1:
        raise ValueError("probe solution is built for a single component")
    g = P.grid
    if window < 1 or t0 - window < 0 or t0 + window > g.nt - 1:
        raise SynthesisError(f"window {window} around t0={t0} leaves the grid")
    prof = plateau_profile(g.nx, B, ramp)
    lap = (np.roll(prof, -1) - 2 * prof + np.roll(prof, 1)) / g.dx**2
    nxt = prof + 0.5 * g.dt**2 * (lap - P.masses[0] ** 2 * prof)   # phi[t0+1] = phi[t0-1]
    phi = evolve_homogeneous(P, prof[None], nxt[None], t0)

    base = np.zeros(g.shape, dtype=bool)
    base[t0, arc_mask(g.nx, *B)] = True
    dom = domain_of_dependence(g, base, "both")
    win = Region.box(t0 - window, t0 + window, B[0], B[1]).mask(g)
    nt_mask = dom & win
    observed = float(np.min(np.abs(phi.values[0][nt_mask])))
    if observed < phi_min:
        raise SynthesisError(
            f"probe solution drops to {observed:.3g} < {phi_min} on the candidate set; "
            "shrink the window")
    return phi, Region.from_mask(nt_mask), observed


def make_coupling(f_tilde: LatticeFunction, phi: LatticeFunction, phi_min: float = PHI_FLOOR) -> LatticeFunction:
    """rho = -f_tilde / phi on supp f_tilde and zero elsewhere."""
    return -divide_on_support(f_tilde, phi, phi_min)


def divide_on_support(num: LatticeFunction, phi: LatticeFunction, phi_min: float) -> LatticeFunction:
    _same_grid(num.grid, phi.grid)
    supp = num.support_mask()
    p = phi.values[0]
    if np.any(np.abs(p[supp]) < phi_min):
        raise SynthesisError("probe solution too small on the support of the coupling")
    out = np.zeros_like(num.values)
    out[:, supp] = num.values[:, supp] / p[supp]
    return LatticeFunction(num.grid, out)


def temporal_ramp(nt: int, band: tuple) -> np.ndarray:
    """chi(t): 0 up to band[0], 1 from band[1] on, raised cosine in between."""
    b0, b1 = band
    t = np.arange(nt)
    chi = 0.5 * (1.0 - np.cos(np.pi * (t - b0) / (b1 - b0)))
    chi[t <= b0] = 0.0
    chi[t >= b1] = 1.0
    return chi


def make_probe_smearing(P: FieldOperatorSpec, phi: LatticeFunction, L: Region, band: tuple,
                        N_tilde: Optional[Region] = None) -> LatticeFunction:
    """h = -P(chi phi), supported on ``band x circle`` inside L."""
    g = P.grid
    b0, b1 = int(band[0]), int(band[1])
    if b1 - b0 < 2:
        raise SynthesisError(f"ramp band {band} must span at least three slices")
    lo, hi = L.t_range
    if b0 < max(lo, 2) or b1 > min(hi, g.nt - 3):
        raise SynthesisError(f"ramp band {band} not inside the processing region {L.t_range}")
    if N_tilde is not None and b0 <= N_tilde.t_range[1]:
        raise SynthesisError("ramp band must lie strictly after the coupling candidate set")
    chi = temporal_ramp(g.nt, (b0, b1))
    h = -apply_operator(P, phi * chi[None, :, None]).values
    # outside the band chi is constant and P phi vanishes up to rounding
    h[:, :b0] = 0.0
    h[:, b1 + 1:] = 0.0
    h = LatticeFunction(g, h)
    if np.any(h.support_mask() & ~L.mask(g)):
        raise GeometryError("probe smearing leaves the processing region")
    return h


# ---------------------------------------------------------------------------
# assembly


def _spatial_support(rows: np.ndarray) -> tuple:
    """Smallest arc ``(start, width)`` covering the True entries of a 1-D periodic mask."""
    nx = rows.size
    if not rows.any():
        raise SynthesisError("empty spatial support")
    if rows.all():
        return (0, nx)
    # start right after the longest run of False
    best, best_end, run = -1, 0, 0
    for i in range(2 * nx):
        if not rows[i % nx]:
            run += 1
            if run > best:
                best, best_end = run, i
        else:
            run = 0
    best = min(best, nx)
    start = (best_end + 1) % nx
    return (start, nx - best)


def synthesize_scheme(S: FieldOperatorSpec, P: FieldOperatorSpec, f: LatticeFunction,
                      N: Region, L: Region, order_k: int = 1, *, t0: Optional[int] = None,
                      cut_width: int = 8, arc_margin: int = 2, ramp: int = 4,
                      band: Optional[tuple] = None, band_length: int = 6,
                      phi_min: float = 0.5) -> SchemeSpec:
    """Chain the constructions above into a scheme of order ``2 * order_k``.

    The representative occupies ``[t0, t0 + cut_width]`` (default: centred
    on the target).  The probe's Cauchy slice sits in the middle of that
    range and its plateau arc covers the Cauchy data of ``E_S f`` there plus
    enough sites for the candidate set to contain the representative.

    For ``order_k > 1`` the probes carry weight exponents (1, 2, 4, ..., 2k-2)
    and smearing exponents (0, 1, ..., 1); probe ``j+1`` cancels the exact
    ``lam^(2j)`` coefficient of the ``j``-probe residual.
    """
    g = S.grid
    if order_k < 1:
        raise ValueError("order_k must be >= 1")
    if P.components != 1:
        raise ValueError("pass a single-component probe; it is replicated for higher orders")
    if f.components != 1:
        raise ValueError("target must be a single-component smearing")
    f.check_source_margin("target")
    n_mask = N.mask(g)
    if np.any(f.support_mask() & ~n_mask):
        raise GeometryError("target is not supported in the coupling region N")

    if t0 is None:
        lo, hi = f.time_support() or N.t_range
        t0 = (lo + hi) // 2 - cut_width // 2
    ft = make_equivalent_representative(S, f, t0, cut_width)
    supp = ft.support_mask()
    if np.any(supp & ~n_mask):
        raise GeometryError("representative leaves N; move t0 or enlarge N")
    if not check_admissible_geometry(g, N, L, supp):
        raise GeometryError("processing region L is not admissible for this target and N")

    # probe plateau: arc around E_S f on the slices of the representative
    t_phi = t0 + cut_width // 2
    window = max(t_phi - t0, t0 + cut_width - t_phi)
    psi = pauli_jordan(S, f).values[0]
    rows = np.any(psi[t0:t0 + cut_width + 1] != 0, axis=0) | np.any(supp, axis=0)
    if rows.any():
        start, width = _spatial_support(rows)
    else:
        start, width = (g.nx // 2, 1)
    grow = arc_margin + window
    B = ((start - grow) % g.nx, min(width + 2 * grow, g.nx))
    phi, N_tilde, observed = make_probe_solution(P, B, t_phi, window, ramp, phi_min)
    if np.any(supp & ~N_tilde.mask(g)):
        raise SynthesisError("representative not covered by the probe's candidate set")

    if band is None:
        b0 = max(L.t_range[0], N_tilde.t_range[1] + 1, 2)
        band = (b0, min(b0 + band_length, L.t_range[1], g.nt - 3))
    h1 = make_probe_smearing(P, phi, L, band, N_tilde)
    rho1 = make_coupling(ft, phi, phi_min)

    m = P.masses[0]
    if order_k == 1:
        coupled = CoupledOperatorSpec(S, P, rho1, (1,), (0,))
        return SchemeSpec(coupled, f, ft, phi, h1, N, N_tilde, L, 1, phi_min, t0, tuple(band))

    k = order_k
    exps = (1,) + tuple(2 * j for j in range(1, k))
    smears = (0,) + (1,) * (k - 1)
    rhos = [rho1.values[0]]
    supp = ft.support_mask()
    for j in range(1, k):
        sub = CoupledOperatorSpec(S, FieldOperatorSpec(g, (m,) * j, P.label),
                                  LatticeFunction(g, np.array(rhos)), exps[:j], smears[:j])
        hj = LatticeFunction(g, np.repeat(h1.values, j, axis=0))
        series = born_expand_induced(sub, hj, 2 * j)
        eps = series.f_coefficient(2 * j)
        if np.any(eps.support_mask() & ~supp):
            raise SynthesisError("residual coefficient escaped the support of f_tilde")
        rhos.append(divide_on_support(eps, phi, phi_min).values[0])
    coupled = CoupledOperatorSpec(S, FieldOperatorSpec(g, (m,) * k, P.label),
                                  LatticeFunction(g, np.array(rhos)), exps, smears)
    h = LatticeFunction(g, np.repeat(h1.values, k, axis=0))
    phis = LatticeFunction(g, np.repeat(phi.values, k, axis=0))
    return SchemeSpec(coupled, f, ft, phis, h, N, N_tilde, L, k, phi_min, t0, tuple(band))


def combine_schemes(schemes: Sequence[SchemeSpec]) -> SchemeSpec:
    """Stack single-probe schemes into one scheme for the sum of their targets."""
    if not schemes:
        raise ValueError("nothing to combine")
    if len(schemes) == 1:
        return schemes[0]
    first = schemes[0]
    g = first.grid
    for sc in schemes:
        if sc.order_k != 1 or sc.coupled.k != 1:
            raise ValueError("only single-probe schemes can be combined")
        if sc.grid != g or sc.system != first.system:
            raise ValueError("schemes must share grid and system operator")
        if not (np.array_equal(sc.N.mask(g), first.N.mask(g))
                and np.array_equal(sc.L.mask(g), first.L.mask(g))):
            raise ValueError("schemes must share the regions N and L")
    probe = FieldOperatorSpec(g, tuple(sc.probe.masses[0] for sc in schemes), first.probe.label)
    rho = LatticeFunction.stack([sc.rho for sc in schemes])
    coupled = CoupledOperatorSpec(first.system, probe, rho)
    n_tilde = np.zeros(g.shape, dtype=bool)
    for sc in schemes:
        n_tilde |= sc.N_tilde.mask(g)
    total_f = sum((sc.target_f for sc in schemes[1:]), schemes[0].target_f)
    total_ft = sum((sc.f_tilde for sc in schemes[1:]), schemes[0].f_tilde)
    return SchemeSpec(coupled, total_f, total_ft,
                      LatticeFunction.stack([sc.probe_solution_phi for sc in schemes]),
                      LatticeFunction.stack([sc.h for sc in schemes]),
                      first.N, Region.from_mask(n_tilde), first.L, 1,
                      min(sc.phi_min for sc in schemes), None, None)
