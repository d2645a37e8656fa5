"""Linearly coupled system/probe dynamics and the induced classical observable.

The coupled operator acts on ``(u_0; u_1..u_k)`` (system first) as

    T_lam = [[S,              lam^e_1 rho_1 ... lam^e_k rho_k],
             [lam^e_j rho_j,  P_j (diagonal)                 ]]

with the multiplications applied pointwise on the current time slice.
Probe smearings enter as ``h_lam_j = lam^(s_j - 1) h_j``; the usual single
probe scheme has ``e = (1,)`` and ``s = (0,)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import AmslabError, GridMismatchError
from .greenops import FieldOperatorSpec, _solve, advanced_green
from .lattice import LatticeFunction, causal_past, _same_grid


@dataclass(frozen=True, eq=False)
class CoupledOperatorSpec:
    system: FieldOperatorSpec
    probe: FieldOperatorSpec
    couplings: LatticeFunction            # k components, rho_j = couplings.values[j]
    weight_exponents: tuple = ()
    smearing_exponents: tuple = ()

    def __post_init__(self):
        if self.system.components != 1:
            raise ValueError("system must be a single-component field")
        _same_grid(self.system.grid, self.probe.grid)
        _same_grid(self.system.grid, self.couplings.grid)
        k = self.probe.components
        if self.couplings.components != k:
            raise GridMismatchError(f"{self.couplings.components} couplings for {k} probes")
        e = tuple(int(x) for x in (self.weight_exponents or (1,) * k))
        s = tuple(int(x) for x in (self.smearing_exponents or (0,) * k))
        if len(e) != k or len(s) != k:
            raise ValueError("one weight exponent and one smearing exponent per probe")
        if min(e) < 1:
            raise ValueError("weight exponents must be >= 1")
        if min(s) < 0:
            raise ValueError("smearing exponents must be >= 0")
        if self.couplings.is_complex:
            raise ValueError("couplings must be real")
        object.__setattr__(self, "weight_exponents", e)
        object.__setattr__(self, "smearing_exponents", s)

    @property
    def grid(self):
        return self.system.grid

    @property
    def k(self) -> int:
        return self.probe.components

    @property
    def uncoupled(self) -> FieldOperatorSpec:
        """S + P as one block-diagonal operator on k+1 components."""
        return FieldOperatorSpec(self.grid, self.system.masses + self.probe.masses,
                                 label="uncoupled")

    def coupling_support(self) -> np.ndarray:
        return self.couplings.support_mask()

    def truncated(self, j: int) -> "CoupledOperatorSpec":
        """The same scheme restricted to its first ``j`` probes."""
        return CoupledOperatorSpec(
            self.system,
            FieldOperatorSpec(self.grid, self.probe.masses[:j], self.probe.label),
            LatticeFunction(self.grid, self.couplings.values[:j]),
            self.weight_exponents[:j], self.smearing_exponents[:j])

    def to_dict(self) -> dict:
        return {"system": self.system.to_dict(), "probe": self.probe.to_dict(),
                "couplings": self.couplings.values.tolist(),
                "weight_exponents": list(self.weight_exponents),
                "smearing_exponents": list(self.smearing_exponents)}

    @classmethod
    def from_dict(cls, d: dict) -> "CoupledOperatorSpec":
        system = FieldOperatorSpec.from_dict(d["system"])
        return cls(system, FieldOperatorSpec.from_dict(d["probe"]),
                   LatticeFunction(system.grid, np.asarray(d["couplings"], dtype=float)),
                   tuple(d["weight_exponents"]), tuple(d["smearing_exponents"]))


@dataclass(frozen=True, eq=False)
class ScatteringResult:
    """Output of the coupled scattering of ``(0; h_lam)``.

    ``g_correction`` equals ``g_lambda - h_lam`` and is kept separately so
    that small-lambda corrections can be read without cancellation.
    """

    f_lambda: LatticeFunction
    g_lambda: LatticeFunction
    lam: float
    g_correction: Optional[LatticeFunction] = field(default=None, repr=False)


def _weights(spec: CoupledOperatorSpec, lam: float) -> np.ndarray:
    """``lam^e_j rho_j`` stacked, shape ``(k, nt, nx)``."""
    powers = np.array([lam ** e for e in spec.weight_exponents])
    return powers[:, None, None] * spec.couplings.values


def _interaction(w: np.ndarray):
    """Same-slice interaction ``V u`` for the recursion in greenops."""
    def term(t, ut):
        out = np.empty_like(ut)
        out[0] = np.sum(w[:, t] * ut[1:], axis=0)
        out[1:] = w[:, t] * ut[0]
        return out
    return term


def apply_interaction(spec: CoupledOperatorSpec, lam: float, U: LatticeFunction) -> LatticeFunction:
    """(T_lam - S+P) U, i.e. the off-diagonal multiplication."""
    w = _weights(spec, lam)
    v = U.values
    out = np.empty_like(v)
    out[0] = np.sum(w * v[1:], axis=0)
    out[1:] = w * v[0]
    return LatticeFunction(U.grid, out)


def apply_coupled_operator(spec: CoupledOperatorSpec, lam: float, U: LatticeFunction) -> LatticeFunction:
    """T_lam U on interior slices."""
    from .greenops import apply_operator
    out = apply_operator(spec.uncoupled, U) + apply_interaction(spec, lam, U)
    out.values[:, 0] = 0
    out.values[:, -1] = 0
    return out


def _check_full(spec: CoupledOperatorSpec, F: LatticeFunction) -> None:
    _same_grid(spec.grid, F.grid)
    if F.components != spec.k + 1:
        raise GridMismatchError(f"expected {spec.k + 1} components, got {F.components}")


def coupled_advanced_green(spec: CoupledOperatorSpec, lam: float, F: LatticeFunction) -> LatticeFunction:
    """Unique U with ``T_lam U = F`` on interior slices, vanishing after supp F."""
    _check_full(spec, F)
    return _solve(spec.uncoupled, F, forward=False, coupling=_interaction(_weights(spec, lam)))


def coupled_retarded_green(spec: CoupledOperatorSpec, lam: float, F: LatticeFunction) -> LatticeFunction:
    _check_full(spec, F)
    return _solve(spec.uncoupled, F, forward=True, coupling=_interaction(_weights(spec, lam)))


def scattering_map(spec: CoupledOperatorSpec, lam: float, F: LatticeFunction) -> LatticeFunction:
    """theta_lam F = F - (T_lam - S+P) E-_{T_lam} F for F in the out region."""
    _check_full(spec, F)
    past = causal_past(spec.grid, spec.coupling_support())
    if np.any(F.support_mask() & past):
        raise AmslabError("F must be supported outside the causal past of the coupling zone")
    U = coupled_advanced_green(spec, lam, F)
    return F - apply_interaction(spec, lam, U)


def _smearing_powers(spec: CoupledOperatorSpec, lam: float) -> np.ndarray:
    return np.array([lam ** s for s in spec.smearing_exponents])


def _probe_input(spec: CoupledOperatorSpec, h: LatticeFunction, lam: float) -> LatticeFunction:
    _same_grid(spec.grid, h.grid)
    if h.components != spec.k:
        raise GridMismatchError(f"expected {spec.k} probe smearings, got {h.components}")
    v = np.zeros((spec.k + 1,) + spec.grid.shape)
    v[1:] = _smearing_powers(spec, lam)[:, None, None] * h.values
    return LatticeFunction(spec.grid, v)


def _check_out_region(spec: CoupledOperatorSpec, h: LatticeFunction) -> None:
    past = causal_past(spec.grid, spec.coupling_support())
    if np.any(h.support_mask() & past):
        raise AmslabError("probe smearing meets the causal past of the coupling zone")


def induced_classical(spec: CoupledOperatorSpec, lam: float, h: LatticeFunction) -> ScatteringResult:
    """(f_lam; g_lam) = theta_lam(0; h_lam) with ``h_lam_j = lam^(s_j-1) h_j``.

    The solve is run on ``(0; lam^s h)`` so that no 1/lam enters; the
    overall 1/lam is absorbed into the interaction's ``lam^(e_j - 1)``.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    _check_out_region(spec, h)
    X = _probe_input(spec, h, lam)
    U = coupled_advanced_green(spec, lam, X)       # = lam * E-_{T_lam}(0; h_lam)
    w_red = _weights(spec, lam) / lam                # lam^(e_j - 1) rho_j
    u = U.values
    f = -np.sum(w_red * u[1:], axis=0, keepdims=True)
    corr = -w_red * u[0]
    h_lam = X.values[1:] / lam
    grid = spec.grid
    return ScatteringResult(LatticeFunction(grid, f), LatticeFunction(grid, h_lam + corr),
                            float(lam), LatticeFunction(grid, corr))


# ---------------------------------------------------------------------------
# exact expansion in lambda


@dataclass(frozen=True, eq=False)
class BornSeries:
    """Exact Laurent coefficients in lambda of the induced pair.

    ``f[q]`` is the coefficient of ``lam**q`` in f_lam; ``g[q]`` likewise
    for the probe components (only when requested).  Missing keys are zero.
    """

    f: dict
    g: Optional[dict]
    max_order: int
    grid: object

    def f_coefficient(self, q: int) -> LatticeFunction:
        return self.f.get(q, LatticeFunction.zeros(self.grid, 1))

    def evaluate_f(self, lam: float) -> LatticeFunction:
        out = LatticeFunction.zeros(self.grid, 1)
        for q, c in sorted(self.f.items()):
            out = out + (lam ** q) * c
        return out


MAX_BORN_TERMS = 4096


def born_expand_induced(spec: CoupledOperatorSpec, h: LatticeFunction, max_order: int,
                        include_probe: bool = False) -> BornSeries:
    """Coefficients of lam^0..lam^max_order of f_lam (and g_lam) from the Neumann series.

    E-_{T_lam} = sum_n (-E-_0 V(lam))^n E-_0 with V(lam) = sum_j lam^e_j V_j.
    Each application of V raises the power of lam by some e_j, so the series
    terminates once every live term exceeds the requested order.
    """
    k = spec.k
    if max_order < 0 or max_order > 2 * k + 2:
        raise ValueError(f"max_order must lie in [0, {2 * k + 2}] for {k} probe(s)")
    _check_out_region(spec, h)
    if h.components != k:
        raise GridMismatchError(f"expected {k} probe smearings, got {h.components}")
    grid = spec.grid
    op0 = spec.uncoupled
    rho = spec.couplings.values
    e = spec.weight_exponents
    s = spec.smearing_exponents
    cutoff = max_order - min(e)

    # E-_0 (0; h_lam) grouped by the power of lam it carries
    wave: dict = {}
    for j in range(k):
        p = s[j] - 1
        if p > cutoff:
            continue
        buf = wave.setdefault(p, np.zeros((k + 1,) + grid.shape))
        buf[j + 1] = h.values[j]
    wave = {p: advanced_green(op0, LatticeFunction(grid, v)).values for p, v in wave.items()}
    total = {p: v.copy() for p, v in wave.items()}

    terms = len(wave)
    while wave:
        nxt: dict = {}
        for p, v in wave.items():
            for j in range(k):
                q = p + e[j]
                if q > cutoff:
                    continue
                buf = nxt.setdefault(q, np.zeros((k + 1,) + grid.shape))
                buf[0] -= rho[j] * v[j + 1]
                buf[j + 1] -= rho[j] * v[0]
        wave = {q: advanced_green(op0, LatticeFunction(grid, v)).values for q, v in nxt.items()}
        for q, v in wave.items():
            total[q] = total[q] + v if q in total else v.copy()
        terms += len(wave)
        if terms > MAX_BORN_TERMS:
            raise MemoryError("Born expansion exceeded its term budget")

    f: dict = {}
    g: Optional[dict] = {} if include_probe else None
    for p, v in total.items():
        for j in range(k):
            q = p + e[j]
            if q > max_order:
                continue
            cf = f.setdefault(q, np.zeros((1,) + grid.shape))
            cf[0] -= rho[j] * v[j + 1]
            if include_probe:
                cg = g.setdefault(q, np.zeros((k,) + grid.shape))
                cg[j] -= rho[j] * v[0]
    if include_probe:
        for j in range(k):
            q = s[j] - 1
            cg = g.setdefault(q, np.zeros((k,) + grid.shape))
            cg[j] += h.values[j]
        g = {q: LatticeFunction(grid, v) for q, v in g.items()}
    f = {q: LatticeFunction(grid, v) for q, v in f.items()}
    return BornSeries(f, g, max_order, grid)


def loglog_fit(lambdas, values, floor: float = 1e-13) -> tuple[float, float]:
    """Least-squares ``(slope, intercept)`` of ``log values`` against ``log lambdas``.

    Exactly zero values are dropped; any other value below ``floor`` aborts.
    """
    lams = np.asarray(lambdas, dtype=float)
    vals = np.asarray(values, dtype=float)
    if lams.size < 3 or np.any(lams <= 0):
        raise ValueError("need at least three positive lambda values")
    if lams.max() / lams.min() < 10.0 - 1e-9:
        raise ValueError("lambda values must span at least one decade")
    keep = vals > 0
    if np.any(vals[keep] < floor):
        raise ArithmeticError("residual underflow; use larger lambda values")
    if keep.sum() < 2:
        raise ArithmeticError("too few nonzero residuals to fit")
    slope, intercept = np.polyfit(np.log(lams[keep]), np.log(vals[keep]), 1)
    return float(slope), float(intercept)


def residual_order_fit(spec: CoupledOperatorSpec, h: LatticeFunction, target: LatticeFunction,
                       lambdas: Sequence[float], floor: float = 1e-13):
    """Log-log slope of ``||f_lam - target||_inf`` against lambda.

    Returns ``(slope, intercept, residuals)`` with the residuals ordered by
    decreasing lambda.
    """
    lams = np.asarray(sorted(lambdas, reverse=True), dtype=float)
    if lams.size < 3 or np.any(lams <= 0):
        raise ValueError("need at least three positive lambda values")
    res = np.array([(induced_classical(spec, lam, h).f_lambda - target).sup_norm()
                    for lam in lams])
    slope, intercept = loglog_fit(lams, res, floor)
    return slope, intercept, res
