"""Monte Carlo emulation of repeated probe readouts and the resulting estimator.

A single run at coupling ``lam`` reads the probe observable ``phi_P(h_lam)``
after scattering.  Its law in ``omega (x) sigma`` is Gaussian with

    mean     = <u, f_lam>
    variance = beta_S(f_lam, f_lam)/2 + beta_P(g_lam, g_lam)/2

so outcomes are drawn from that law.  The sample mean of ``N`` runs
estimates ``<u, f>`` with bias ``C lam^(2k) + ...`` and Chebyshev's
inequality gives the trial count for an ``(epsilon, delta)`` interval.

Random numbers come from numpy's Philox counter-based generator: draw ``i``
of batch ``b`` uses the counter block ``i`` under the key ``(seed, b)``, so
results do not depend on batching or thread scheduling.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .coupling import born_expand_induced, induced_classical
from .errors import PlanningError
from .gaussian import GaussianState, beta, one_point

MAX_SAMPLES = 10**9


@dataclass(frozen=True)
class MeasurementPlan:
    epsilon: float
    delta: float
    lam: float
    n_trials: int
    bias_constant: float
    seed: int = 0
    order: int = 2                 # bias ~ bias_constant * lam**order
    analytic_mean: float = 0.0
    analytic_variance: float = 0.0
    true_value: float = 0.0

    @property
    def lambda0(self) -> float:
        if self.bias_constant == 0:
            return math.inf
        return (self.epsilon / self.bias_constant) ** (1.0 / self.order)


class CoverageResult(NamedTuple):
    coverage: float
    mean_of_means: float


def _check_states(probe_state: GaussianState) -> None:
    if probe_state.shift is not None:
        raise ValueError("probe preparation state must be undisplaced")


def outcome_distribution(scheme, lam: float, system_state: GaussianState,
                         probe_state: GaussianState) -> tuple[float, float]:
    """(mean, variance) of one probe readout at coupling ``lam``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    _check_states(probe_state)
    res = induced_classical(scheme.coupled, lam, scheme.h)
    mean = one_point(system_state, res.f_lambda)
    var = math.fsum((0.5 * beta(system_state, res.f_lambda, res.f_lambda),
                     0.5 * beta(probe_state, res.g_lambda, res.g_lambda)))
    return mean, var


def variance_expansion(scheme, system_state: GaussianState,
                       probe_state: GaussianState) -> tuple[float, float]:
    """Exact ``(a, b)`` in ``Var = a / lam^2 + b + O(lam^2)`` for a single-probe scheme.

    ``a = beta_P(h, h)/2`` and ``b = beta_S(f0, f0)/2 + beta_P(h, g1)`` with
    ``f0`` and ``g1`` read off the exact expansion of the scattered pair.
    """
    sp = scheme.coupled
    if sp.k != 1 or sp.weight_exponents != (1,) or sp.smearing_exponents != (0,):
        raise ValueError("variance expansion is implemented for the single-probe scheme")
    _check_states(probe_state)
    series = born_expand_induced(sp, scheme.h, 1, include_probe=True)
    f0 = series.f_coefficient(0)
    g1 = series.g.get(1)
    a = 0.5 * beta(probe_state, scheme.h, scheme.h)
    b = 0.5 * beta(system_state, f0, f0)
    if g1 is not None:
        b += beta(probe_state, scheme.h, g1)
    return a, b


# ---------------------------------------------------------------------------
# sampling


def _key(seed: int, stream: int) -> np.ndarray:
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream index must be non-negative")
    return np.array([seed, stream], dtype=np.uint64)


def standard_normals(seed: int, n: int, stream: int = 0, start: int = 0) -> np.ndarray:
    """Draws ``start .. start+n-1`` of the normal stream keyed on ``(seed, stream)``.

    Draw ``i`` is built by Box-Muller from the first two words of Philox
    block ``i``; it depends only on the key and ``i``.
    """
    if n < 0 or start < 0:
        raise ValueError("n and start must be non-negative")
    if n == 0:
        return np.zeros(0)
    # numpy pre-increments the counter, so counter=start yields block start+1 first
    bg = np.random.Philox(key=_key(seed, stream), counter=start)
    words = bg.random_raw(4 * n).reshape(n, 4)
    scale = 1.0 / 9007199254740992.0                  # 2**-53
    u1 = ((words[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * scale   # (0, 1]
    u2 = (words[:, 1] >> np.uint64(11)).astype(np.float64) * scale           # [0, 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def sample_outcomes(scheme, lam: float, system_state: GaussianState, probe_state: GaussianState,
                    n: int, seed: int, stream: int = 0) -> np.ndarray:
    """``n`` reproducible readouts of the rescaled probe observable."""
    if n < 1:
        raise ValueError("n must be >= 1")
    mean, var = outcome_distribution(scheme, lam, system_state, probe_state)
    return mean + math.sqrt(var) * standard_normals(seed, n, stream)


# ---------------------------------------------------------------------------
# planning and coverage


def plan_confidence(scheme, epsilon: float, delta: float, lam: float,
                    system_state: GaussianState, probe_state: GaussianState,
                    seed: int = 0) -> MeasurementPlan:
    """Trial count for ``P(|mean_N - <u,f>| <= epsilon) >= 1 - delta``.

    The bias constant is ``|<u, c>|`` for the leading nonzero coefficient
    ``c`` of ``lam^(2k)`` in ``f_lam - f_tilde``, taken from the exact
    expansion.  Chebyshev then gives
    ``N >= Var / (delta (epsilon - C lam^(2k))^2)`` with the exact variance.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    order = 2 * scheme.order_k
    series = born_expand_induced(scheme.coupled, scheme.h, order)
    C = abs(one_point(system_state, series.f_coefficient(order)))
    margin = epsilon - C * lam ** order
    if margin <= 0:
        lam0 = (epsilon / C) ** (1.0 / order)
        raise PlanningError(f"lambda = {lam:g} is not below lambda0 = {lam0:.6g}; "
                            "the bias alone exceeds epsilon")
    mean, var = outcome_distribution(scheme, lam, system_state, probe_state)
    n = math.ceil(var / (delta * margin ** 2))
    if n > MAX_SAMPLES:
        raise PlanningError(f"plan needs {n} trials, above the budget of {MAX_SAMPLES}")
    return MeasurementPlan(float(epsilon), float(delta), float(lam), int(n), float(C), int(seed),
                           order, float(mean), float(var),
                           float(one_point(system_state, scheme.f_tilde)))


def _batch_mean(plan: MeasurementPlan, replication: int) -> float:
    z = standard_normals(plan.seed, plan.n_trials, stream=replication)
    return plan.analytic_mean + math.sqrt(plan.analytic_variance) * math.fsum(z) / plan.n_trials


def coverage_experiment(plan: MeasurementPlan, replications: int, threads: int = 1) -> CoverageResult:
    """Fraction of ``replications`` batch means lying within ``epsilon`` of the true value.

    Batch ``r`` uses the random stream ``r`` under ``plan.seed``; the thread
    count only changes speed.
    """
    if replications < 100:
        raise ValueError("coverage needs at least 100 replications")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    reps = range(replications)
    if threads == 1:
        means = [_batch_mean(plan, r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            means = list(pool.map(lambda r: _batch_mean(plan, r), reps))
    means = np.array(means)
    hits = np.abs(means - plan.true_value) <= plan.epsilon
    return CoverageResult(float(np.mean(hits)), math.fsum(means) / replications)


def coverage_threshold(delta: float, replications: int) -> float:
    """Lower acceptance bound ``1 - delta - 3 sqrt(delta (1 - delta) / replications)``."""
    return 1.0 - delta - 3.0 * math.sqrt(delta * (1.0 - delta) / replications)
