"""Quasi-free states of the lattice field and induced quantum expectations.

The vacuum is built mode by mode from the leapfrog one-step map

    M_k = [[0, 1], [-1, 2 cos(W_k dt)]],   cos(W_k dt) = 1 - dt^2 w_k^2 / 2,

acting on Cauchy data ``(u_k[t], u_k[t+1])``.  Its invariant complex
structure ``J_k = (M_k - cos I) / sin`` gives ``beta`` through the positive
form ``G_k = (1/sin) [[1, -cos], [-cos, 1]]``, which is preserved by ``M_k``
so ``beta`` does not depend on the slice where it is evaluated.

Conventions: ``E(f, g) = sum dt dx f E_P g``, two-point function
``beta/2 + i E/2`` and ``W(f) W(g) = exp(-i E(f, g)/2) W(f + g)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import GridMismatchError
from .greenops import FieldOperatorSpec, mode_frequencies, pauli_jordan
from .lattice import LatticeFunction, _same_grid
from .series import GaussianSeries, gaussian_moment


@dataclass(frozen=True, eq=False)
class GaussianState:
    operator: FieldOperatorSpec
    reference_slice: int
    cos_omega: np.ndarray = field(repr=False)   # (components, nx), cos(W_k dt)
    sin_omega: np.ndarray = field(repr=False)
    shift: Optional[LatticeFunction] = field(default=None, repr=False)
    label: str = "vacuum"

    @property
    def grid(self):
        return self.operator.grid

    @property
    def omega(self) -> np.ndarray:
        """Principal frequencies W_k (per component and mode)."""
        return np.arccos(self.cos_omega) / self.grid.dt

    def complex_structure(self, component: int, k: int) -> np.ndarray:
        c, s = self.cos_omega[component, k], self.sin_omega[component, k]
        return np.array([[-c, 1.0], [-1.0, c]]) / s

    def form(self, component: int, k: int) -> np.ndarray:
        c, s = self.cos_omega[component, k], self.sin_omega[component, k]
        return np.array([[1.0, -c], [-c, 1.0]]) / s


def vacuum_state(P: FieldOperatorSpec, reference_slice: Optional[int] = None) -> GaussianState:
    g = P.grid
    ref = g.nt // 2 if reference_slice is None else int(reference_slice)
    if not (0 <= ref < g.nt - 1):
        raise ValueError(f"reference slice {ref} outside grid")
    cos = np.empty((P.components, g.nx))
    for c in range(P.components):
        w2 = mode_frequencies(P, c)
        cos[c] = 1.0 - 0.5 * g.dt**2 * w2
    if np.any(cos >= 1.0) or np.any(cos <= -1.0):
        raise ValueError("one-step map is not elliptic for every mode "
                         "(need m > 0 and dt * w_max < 2)")
    sin = np.sqrt(1.0 - cos**2)
    return GaussianState(P, ref, cos, sin, None, "vacuum")


def coherent_state(state: GaussianState, w: LatticeFunction, label: str = "coherent") -> GaussianState:
    """Displace ``state`` by the classical solution ``E_P w``."""
    u = pauli_jordan(state.operator, w)
    if state.shift is not None:
        u = u + state.shift
    return GaussianState(state.operator, state.reference_slice, state.cos_omega,
                         state.sin_omega, u, label)


# ---------------------------------------------------------------------------
# bilinear forms on solutions


def beta_solutions(state: GaussianState, u: LatticeFunction, v: LatticeFunction,
                   t: Optional[int] = None) -> float:
    """beta of two homogeneous solutions from their Cauchy data at slices ``t, t+1``."""
    g = state.grid
    t = state.reference_slice if t is None else t
    U0 = np.fft.fft(u.values[:, t], axis=-1)
    U1 = np.fft.fft(u.values[:, t + 1], axis=-1)
    V0 = np.conj(np.fft.fft(v.values[:, t], axis=-1))
    V1 = np.conj(np.fft.fft(v.values[:, t + 1], axis=-1))
    c, s = state.cos_omega, state.sin_omega
    total = np.sum((U0 * V0 + U1 * V1 - c * (U0 * V1 + U1 * V0)) / s)
    return float(np.real(total)) * g.dx / (g.dt * g.nx)


def wronskian(u: LatticeFunction, v: LatticeFunction, t: int) -> complex:
    """Conserved form ``(dx/dt) sum(u[t] v[t+1] - u[t+1] v[t])``; equals E(f, g) for u = E f, v = E g."""
    g = u.grid
    r = np.sum(u.values[:, t] * v.values[:, t + 1] - u.values[:, t + 1] * v.values[:, t])
    return r * g.dx / g.dt


def _check(state: GaussianState, f: LatticeFunction) -> None:
    _same_grid(state.grid, f.grid)
    if f.components != state.operator.components:
        raise GridMismatchError(
            f"state has {state.operator.components} components, smearing has {f.components}")


def beta(state: GaussianState, f: LatticeFunction, g: LatticeFunction) -> float:
    _check(state, f)
    _check(state, g)
    P = state.operator
    return beta_solutions(state, pauli_jordan(P, f), pauli_jordan(P, g))


def one_point(state: GaussianState, f: LatticeFunction) -> float:
    """<u, f>; zero for an undisplaced state."""
    if state.shift is None:
        return 0.0
    return float(np.real(state.shift.inner(f)))


def two_point(state: GaussianState, f: LatticeFunction, g: LatticeFunction) -> complex:
    """omega(phi(f) phi(g)) = <u,f><u,g> + beta(f,g)/2 + i E(f,g)/2."""
    P = state.operator
    uf, ug = pauli_jordan(P, f), pauli_jordan(P, g)
    E = f.inner(ug)
    return (one_point(state, f) * one_point(state, g)
            + 0.5 * beta_solutions(state, uf, ug) + 0.5j * float(np.real(E)))


def weyl_expectation(state: GaussianState, f: LatticeFunction) -> complex:
    """omega(W(f)) = exp(i <u,f> - beta(f,f)/4)."""
    _check(state, f)
    return complex(np.exp(1j * one_point(state, f) - 0.25 * beta(state, f, f)))


def field_moment(state: GaussianState, f: LatticeFunction, n: int) -> float:
    """omega(phi(f)^n) for the Gaussian law with mean <u,f> and variance beta(f,f)/2."""
    return gaussian_moment(one_point(state, f), 0.5 * beta(state, f, f), n)


# ---------------------------------------------------------------------------
# effort


@dataclass(frozen=True, eq=False)
class SmearedField:
    h: LatticeFunction


@dataclass(frozen=True, eq=False)
class RescaledWeyl:
    """``W(h) / c``; give either the normalizer ``c`` or ``log|c|``."""

    h: LatticeFunction
    normalizer: Optional[complex] = None
    log_abs_normalizer: Optional[float] = None

    def log_abs(self) -> float:
        if self.log_abs_normalizer is not None:
            return float(self.log_abs_normalizer)
        if self.normalizer is None or self.normalizer == 0:
            raise ZeroDivisionError("rescaled Weyl observable needs a nonzero normalizer")
        return math.log(abs(self.normalizer))


def log_effort(state: GaussianState, observable) -> float:
    """Logarithm of the effort; ``-inf`` for a vanishing smearing."""
    if not isinstance(observable, (SmearedField, RescaledWeyl)):
        raise TypeError(f"unsupported observable {type(observable).__name__}")
    b = beta(state, observable.h, observable.h)
    if isinstance(observable, SmearedField):
        return 0.5 * math.log(0.5 * b) if b > 0 else -math.inf
    # cov(B, B) = (1 - |omega(W(h))|^2) / |c|^2 and |omega(W(h))|^2 = exp(-beta/2)
    var = -math.expm1(-0.5 * b)
    return (0.5 * math.log(var) if var > 0 else -math.inf) - observable.log_abs()


def effort(state: GaussianState, observable) -> float:
    """sqrt of the variance of the observable in ``state``."""
    if isinstance(observable, SmearedField):
        # direct form keeps eff(phi(c h)) = |c| eff(phi(h)) free of log/exp rounding
        return math.sqrt(max(0.5 * beta(state, observable.h, observable.h), 0.0))
    le = log_effort(state, observable)
    if le == -math.inf:
        return 0.0
    return math.exp(le) if le < 709.0 else math.inf


# ---------------------------------------------------------------------------
# induced expectations for a scheme


@dataclass(frozen=True)
class InducedWeyl:
    rescaled: complex            # omega(W_S(f_lam))
    unrescaled: complex          # sigma(W_P(g_lam)) * omega(W_S(f_lam)); may underflow
    log_normalizer: float        # log sigma(W_P(g_lam)) = -beta_P(g,g)/4


def _scattered(scheme, lam: float):
    from .coupling import induced_classical
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return induced_classical(scheme.coupled, lam, scheme.h)


def induced_weyl_expectation(scheme, lam: float, system_state: GaussianState,
                             probe_state: GaussianState) -> InducedWeyl:
    res = _scattered(scheme, lam)
    sys_val = weyl_expectation(system_state, res.f_lambda)
    if probe_state.shift is not None:
        raise ValueError("probe preparation state must be undisplaced")
    log_c = -0.25 * beta(probe_state, res.g_lambda, res.g_lambda)
    return InducedWeyl(sys_val, complex(math.exp(log_c) * sys_val), log_c)


def induced_power_expectation(scheme, lam: float, n: int, system_state: GaussianState,
                              probe_state: GaussianState) -> float:
    """n-th induced moment from ``A(x) / sigma(exp(i x phi_P(g_lam)))``.

    ``A(x) = exp(i x <u, f_lam> - x^2 [beta_S(f_lam) + beta_P(g_lam)]/4)`` is the
    generating series of the coupled probe readout.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if probe_state.shift is not None:
        raise ValueError("probe preparation state must be undisplaced")
    res = _scattered(scheme, lam)
    vs = 0.5 * beta(system_state, res.f_lambda, res.f_lambda)
    vp = 0.5 * beta(probe_state, res.g_lambda, res.g_lambda)
    A = GaussianSeries(one_point(system_state, res.f_lambda), (vs, vp))
    Bp = GaussianSeries(0.0, (vp,))
    return (A / Bp).moment(n)


def probe_efforts(scheme, lam: float, probe_state: GaussianState) -> tuple[float, float]:
    """``(log eff phi_P(h_lam), log eff W_P(h_lam)/sigma(W_P(g_lam)))``."""
    res = _scattered(scheme, lam)
    h_lam = res.g_lambda - res.g_correction
    log_c = -0.25 * beta(probe_state, res.g_lambda, res.g_lambda)
    return (log_effort(probe_state, SmearedField(h_lam)),
            log_effort(probe_state, RescaledWeyl(h_lam, log_abs_normalizer=log_c)))


# ---------------------------------------------------------------------------
# polarization


MAX_POLARIZATION = 6


def polarization_expand(fs: Sequence[LatticeFunction]) -> list:
    """Signed powers whose sum is the symmetrized product.

    Returns ``[(weight, F_eps)]`` with ``F_eps = sum_i (-1)^eps_i f_i`` and
    ``weight = (-1)^(sum eps) / 2^n`` such that
    ``sum_pi phi(f_pi1)...phi(f_pin) = sum weight * phi(F_eps)^n``.
    """
    n = len(fs)
    if not 1 <= n <= MAX_POLARIZATION:
        raise ValueError(f"polarization supports 1 <= n <= {MAX_POLARIZATION}, got {n}")
    terms = []
    for eps in itertools.product((0, 1), repeat=n):
        combo = fs[0] * (-1.0) ** eps[0]
        for e, f in zip(eps[1:], fs[1:]):
            combo = combo + f * (-1.0) ** e
        terms.append(((-1.0) ** sum(eps) / 2 ** n, combo))
    return terms


def polarization_moment(state: GaussianState, fs: Sequence[LatticeFunction]) -> float:
    """omega of the symmetrized product, evaluated through the power expansion."""
    n = len(fs)
    return math.fsum(w * field_moment(state, F, n) for w, F in polarization_expand(fs))
