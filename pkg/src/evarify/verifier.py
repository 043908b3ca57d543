"""Numerical certification of the e-variable property.

The central claim about a composite test e is that sup over the family of
E_theta[e(X)] is at most 1.  This module estimates those expectations with
explicit error bounds and sweeps them over adversarial parameter grids:

* exact truncated summation for the discrete families (binomial, discrete
  uniform, Poisson), with the discarded tail mass times the composite's
  sup charged to the error bound;
* closed-form cellwise integration for continuous families when the
  composite is piecewise constant on estimator cells (which covers spike
  suites and constant components) -- this is the sharp form of
  piecewise-aware quadrature, splitting exactly at cell boundaries;
* closed-form partial-moment integration for interpolated composites with
  equal-height cell-indicator components (the trapezoid weights make the
  integrand piecewise linear);
* adaptive quadrature (split at cell boundaries and ramp knots) and
  Monte Carlo with a 99% CI half-width as the error bound for generic
  components.

Monte Carlo uses a counter-based generator keyed by (master seed, theta
index), so sweeps are reproducible and order-independent.

Adversarial generators include the spike suite (each component is the
reciprocal cell probability on its own cell, the tightest component the
e-variable constraint allows) and the Poisson maximum-likelihood
counterexample E_lambda[exp(X) X! / X^X], which exceeds every fixed
normalizing constant for large enough lambda.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, stats

from .combinator import (
    EVariable,
    CellwiseProfile,
    CompositeEVariable,
    PeriodicTrapezoidProfile,
    calibrated_p_evar,
    combine_discrete,
    combine_interpolated,
)
from .core import CeilDyadic, DomainError, REpsilon
from .families import FamilyBundle

__all__ = [
    "ExpectationPlan",
    "ExpectationResult",
    "VerificationReport",
    "expectation",
    "spike_evar",
    "spike_suite",
    "spike_composite",
    "upper_tail_calibrated_evar",
    "default_theta_grid",
    "sweep",
    "mle_counterexample_poisson",
    "mle_counterexample_poisson_with_bound",
    "uniform_ceiling_budget",
    "uniform_ceiling_budget_max",
    "unit_cell_spikes",
    "interpolated_spike_composite",
    "certify_interpolated_factor",
]

#: Cell half-window used when a statistic has tails too heavy to pin down
#: by quantiles (Cauchy); mass beyond it goes into the error bound.
HEAVY_TAIL_CELL_WINDOW = 10_000

#: Error attributed to closed-form CDF evaluations per cell.
_CDF_EPS = 5e-16


# ---------------------------------------------------------------------------
# Per-family numerics: statistic distribution, sampling, windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Numerics:
    discrete: bool
    heavy_tails: bool
    stat_cdf: Callable[[FamilyBundle, float, np.ndarray], np.ndarray]
    stat_ppf: Callable[[FamilyBundle, float, float], float]
    sample: Callable[[FamilyBundle, float, int, np.random.Generator], np.ndarray]
    stat_sf: Callable[[FamilyBundle, float, np.ndarray], np.ndarray] | None = None

    def sf(self, bundle, theta, v):
        if self.stat_sf is not None:
            return self.stat_sf(bundle, theta, v)
        return 1.0 - self.stat_cdf(bundle, theta, v)


def _du_cdf(bundle, N, v):
    v = np.asarray(v, dtype=float)
    out = np.clip((np.floor(v) + 1.0) / (N + 1.0), 0.0, 1.0)
    return np.where(v < 0.0, 0.0, out)


def _du_sf(bundle, N, v):
    v = np.asarray(v, dtype=float)
    out = np.clip((N - np.floor(v)) / (N + 1.0), 0.0, 1.0)
    return np.where(v < 0.0, 1.0, out)


def _cu_cdf(bundle, theta, v):
    v = np.asarray(v, dtype=float)
    return np.clip(v / theta, 0.0, 1.0)


_NUMERICS: dict[str, _Numerics] = {
    "poisson": _Numerics(
        discrete=True,
        heavy_tails=False,
        stat_cdf=lambda b, t, v: stats.poisson.cdf(v, mu=t),
        stat_ppf=lambda b, t, q: float(stats.poisson.ppf(q, mu=t)),
        sample=lambda b, t, m, rng: rng.poisson(t, m).astype(float),
        stat_sf=lambda b, t, v: stats.poisson.sf(v, mu=t),
    ),
    "binomial": _Numerics(
        discrete=True,
        heavy_tails=False,
        stat_cdf=lambda b, t, v: stats.binom.cdf(v, int(b.params["n"]), t),
        stat_ppf=lambda b, t, q: float(stats.binom.ppf(q, int(b.params["n"]), t)),
        sample=lambda b, t, m, rng: rng.binomial(int(b.params["n"]), t, m).astype(float),
        stat_sf=lambda b, t, v: stats.binom.sf(v, int(b.params["n"]), t),
    ),
    "discrete_uniform": _Numerics(
        discrete=True,
        heavy_tails=False,
        stat_cdf=_du_cdf,
        stat_ppf=lambda b, t, q: float(min(t, math.ceil(q * (t + 1)) - 1)),
        sample=lambda b, t, m, rng: rng.integers(0, int(t) + 1, m).astype(float),
        stat_sf=_du_sf,
    ),
    "continuous_uniform": _Numerics(
        discrete=False,
        heavy_tails=False,
        stat_cdf=_cu_cdf,
        stat_ppf=lambda b, t, q: q * t,
        sample=lambda b, t, m, rng: t * (1.0 - rng.random(m)),
    ),
    "normal_mean": _Numerics(
        discrete=False,
        heavy_tails=False,
        stat_cdf=lambda b, t, v: stats.norm.cdf(
            v, loc=t, scale=1.0 / math.sqrt(b.family.sample_dim)
        ),
        stat_ppf=lambda b, t, q: float(
            stats.norm.ppf(q, loc=t, scale=1.0 / math.sqrt(b.family.sample_dim))
        ),
        sample=lambda b, t, m, rng: t
        + rng.standard_normal((m, b.family.sample_dim)),
        stat_sf=lambda b, t, v: stats.norm.sf(
            v, loc=t, scale=1.0 / math.sqrt(b.family.sample_dim)
        ),
    ),
    "normal_variance": _Numerics(
        discrete=False,
        heavy_tails=False,
        stat_cdf=lambda b, t, v: stats.chi2.cdf(
            b.family.sample_dim * np.asarray(v, dtype=float) / t,
            df=b.family.sample_dim,
        ),
        stat_ppf=lambda b, t, q: float(
            t * stats.chi2.ppf(q, df=b.family.sample_dim) / b.family.sample_dim
        ),
        sample=lambda b, t, m, rng: math.sqrt(t)
        * rng.standard_normal((m, b.family.sample_dim)),
        stat_sf=lambda b, t, v: stats.chi2.sf(
            b.family.sample_dim * np.asarray(v, dtype=float) / t,
            df=b.family.sample_dim,
        ),
    ),
    "cauchy": _Numerics(
        discrete=False,
        heavy_tails=True,
        stat_cdf=lambda b, t, v: stats.cauchy.cdf(v, loc=t),
        stat_ppf=lambda b, t, q: float(stats.cauchy.ppf(q, loc=t)),
        sample=lambda b, t, m, rng: t + rng.standard_cauchy(m),
        stat_sf=lambda b, t, v: stats.cauchy.sf(v, loc=t),
    ),
}


def _rng_for(seed: int, theta_index: int) -> np.random.Generator:
    # counter-based: independent streams per (seed, theta index), merge
    # order cannot matter
    return np.random.Generator(
        np.random.Philox(key=[seed & (2**64 - 1), theta_index & (2**64 - 1)])
    )


# ---------------------------------------------------------------------------
# Plans and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpectationPlan:
    """How to estimate E_theta[e(X)].

    "auto" picks exact summation for discrete families and cellwise /
    piecewise quadrature for continuous ones.  ``tail_mass`` is the
    probability mass allowed outside the truncation window (charged to
    the error bound against the composite's sup).  Monte Carlo reports a
    99% CI half-width as its error bound.
    """

    method: str = "auto"  # auto | exact_sum | quadrature | monte_carlo
    tail_mass: float = 1e-12
    abs_tol: float = 1e-9
    mc_samples: int = 1_000_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in ("auto", "exact_sum", "quadrature", "monte_carlo"):
            raise DomainError(f"unknown expectation method {self.method!r}")
        cap = 1e-12 if self.method in ("auto", "exact_sum") else 1e-6
        if not 0.0 < self.tail_mass <= cap:
            raise DomainError(
                f"tail_mass must lie in (0, {cap:g}] for method {self.method!r}"
            )


@dataclass(frozen=True)
class ExpectationResult:
    estimate: float
    error_bound: float
    method: str


# ---------------------------------------------------------------------------
# Spike components
# ---------------------------------------------------------------------------


def _clip_bounds(bundle: FamilyBundle) -> tuple[float, float]:
    sup = bundle.family.support
    return sup.lo, sup.hi


def _stat_quantile(bundle: FamilyBundle, theta: float, q: float) -> float:
    """Quantile of the estimator's statistic under theta.  The registry
    works in count space for the binomial family; its statistic is the
    success fraction, so the quantile is rescaled."""
    num = _NUMERICS[bundle.family.name]
    value = num.stat_ppf(bundle, theta, q)
    if bundle.family.name == "binomial":
        return value / int(bundle.params["n"])
    return value


def _index_of_stat(bundle: FamilyBundle, v: float) -> int:
    """Net index whose cell contains (or is nearest to) statistic value v."""
    est = bundle.estimator
    if isinstance(est, CeilDyadic):
        if v <= 0.0:
            return est.net.k_min if est.net.k_min is not None else 0
        m, e = math.frexp(v)
        k = e - 1 if m == 0.5 else e
        if est.net.k_min is not None:
            k = max(k, est.net.k_min)
        return k
    if isinstance(est, REpsilon):
        return est.index(v)
    return est.net.round_index(v)


def _binomial_groups(bundle: FamilyBundle) -> dict[int, tuple[int, int]]:
    """Contiguous count ranges per net index (the binomial estimator's
    statistic is k/n, so integer cells are derived from the estimator
    itself rather than from float cell boundaries)."""
    n = int(bundle.params["n"])
    est = bundle.estimator
    groups: dict[int, tuple[int, int]] = {}
    for k in range(n + 1):
        idx = est.index(k)
        a, b = groups.get(idx, (k, k))
        groups[idx] = (min(a, k), max(b, k))
    return groups


def _discrete_cell_int_range(
    bundle: FamilyBundle, k: int, groups: dict | None = None
) -> tuple[int, int]:
    """Inclusive integer range of support points in cell k; (1, 0) when
    the cell holds no support point."""
    if bundle.family.name == "binomial":
        groups = _binomial_groups(bundle) if groups is None else groups
        return groups.get(k, (1, 0))
    lo, hi = _clip_bounds(bundle)
    return bundle.estimator.cell(k).clip(lo, min(hi, 2.0**62)).integer_range()


def _cell_prob(bundle: FamilyBundle, theta: float, k: int) -> float:
    """P_theta(statistic lands in estimator cell k), exact via CDFs."""
    num = _NUMERICS[bundle.family.name]
    if num.discrete:
        a, b = _discrete_cell_int_range(bundle, k)
        if b < a:
            return 0.0
        return float(num.stat_cdf(bundle, theta, np.array([b]))[0]
                     - num.stat_cdf(bundle, theta, np.array([a - 1.0]))[0])
    cell = bundle.estimator.cell(k)
    lo, hi = _clip_bounds(bundle)
    clo = max(cell.lo, lo)
    chi = min(cell.hi, hi)
    if not clo < chi:
        return 0.0
    vals = num.stat_cdf(bundle, theta, np.array([clo, chi]))
    return float(vals[1] - vals[0])


def spike_evar(bundle: FamilyBundle, k: int) -> EVariable:
    """The spike at net index k: the indicator of the cell shat^{-1}(s_k)
    divided by its probability under P_{s_k}.

    By construction E_{P_s}[spike_s] = 1 exactly: it is the tightest
    component the e-variable constraint allows concentrated on its own
    cell.  Raises :class:`DomainError` for a zero-probability cell.
    """
    s = bundle.net.point(k)
    p = _cell_prob(bundle, s, k)
    if not p > 0.0:
        raise DomainError(
            f"cell {k} of {bundle.bundle_id} has zero probability under its own point"
        )
    level = 1.0 / p
    est = bundle.estimator

    def fn(x) -> float:
        return level if est.index(x) == k else 0.0

    return EVariable(
        fn=fn,
        valid_for=s,
        sup_bound=level,
        kind="cell_indicator",
        level=level,
        cell_index=k,
    )


def spike_suite(bundle: FamilyBundle, indices: Sequence[int]) -> dict[int, EVariable]:
    """Spikes for every index in ``indices``."""
    return {int(k): spike_evar(bundle, int(k)) for k in indices}


def _grid_index_envelope(
    bundle: FamilyBundle, theta_grid: Sequence[float], tail: float
) -> tuple[int, int]:
    """Net-index range whose cells carry all but ``tail`` of the mass for
    every theta in the grid (heavy-tailed statistics are capped and the
    remainder charged to the error bound)."""
    num = _NUMERICS[bundle.family.name]
    sup_lo, sup_hi = _clip_bounds(bundle)
    k_lo, k_hi = None, None
    stat_lo = 0.0 if bundle.family.name == "binomial" else sup_lo
    stat_hi = 1.0 if bundle.family.name == "binomial" else sup_hi
    for theta in theta_grid:
        if num.heavy_tails:
            lo_stat = theta - HEAVY_TAIL_CELL_WINDOW
            hi_stat = theta + HEAVY_TAIL_CELL_WINDOW
        else:
            lo_stat = _stat_quantile(bundle, theta, tail / 4.0)
            hi_stat = _stat_quantile(bundle, theta, 1.0 - tail / 4.0)
        if bundle.family.name == "continuous_uniform":
            lo_stat = max(lo_stat, theta * 2.0 ** -60)
        lo_stat = min(max(lo_stat, stat_lo), stat_hi)
        hi_stat = min(max(hi_stat, stat_lo), stat_hi)
        a = _index_of_stat(bundle, lo_stat)
        b = _index_of_stat(bundle, hi_stat)
        k_lo = a if k_lo is None else min(k_lo, a)
        k_hi = b if k_hi is None else max(k_hi, b)
    net = bundle.net
    k_lo -= 2
    k_hi += 2
    if net.k_min is not None:
        k_lo = max(k_lo, net.k_min)
    if net.k_max is not None:
        k_hi = min(k_hi, net.k_max)
    return int(k_lo), int(k_hi)


def spike_composite(
    bundle: FamilyBundle,
    theta_grid: Sequence[float] | None = None,
    factor_C: float | None = None,
    plan: ExpectationPlan | None = None,
) -> CompositeEVariable:
    """The full-spike-suite composite covering every cell the given grid
    can reach (constant-1 defaults beyond, which only lowers it)."""
    plan = plan or ExpectationPlan()
    grid = default_theta_grid(bundle) if theta_grid is None else theta_grid
    k_lo, k_hi = _grid_index_envelope(bundle, grid, plan.tail_mass)
    suite = spike_suite(bundle, range(k_lo, k_hi + 1))
    return combine_discrete(bundle, suite, factor_C=factor_C)


def upper_tail_calibrated_evar(
    bundle: FamilyBundle, k: int, kappa: float
) -> EVariable:
    """kappa * P**(kappa-1) with the upper-tail p-variable
    P(x) = P_{s_k}(stat(X) >= stat(x))."""
    num = _NUMERICS[bundle.family.name]
    s = bundle.net.point(k)
    est = bundle.estimator

    def p_fn(x) -> float:
        # the registry's distributions live in count space for discrete
        # families (the sample itself) and statistic space otherwise
        edge = float(x) - 1.0 if num.discrete else est.statistic(x)
        return float(num.sf(bundle, s, np.array([edge]))[0])

    return calibrated_p_evar(kappa, p_fn, valid_for=s)


# ---------------------------------------------------------------------------
# Cellwise engine: exact expectation of piecewise-constant composites
# ---------------------------------------------------------------------------


class _CellwiseEngine:
    """Exact expectation of a composite that is constant on estimator
    cells, over a fixed index range; mass outside the range is charged at
    the composite's default level (exact, because missing components are
    the constant-1 e-variable)."""

    def __init__(self, composite: CompositeEVariable, k_lo: int, k_hi: int):
        bundle = composite.bundle
        profile: CellwiseProfile = composite.profile
        est = bundle.estimator
        num = _NUMERICS[bundle.family.name]
        lo, hi = _clip_bounds(bundle)
        ks = list(range(k_lo, k_hi + 1))
        if num.discrete:
            groups = (
                _binomial_groups(bundle)
                if bundle.family.name == "binomial"
                else None
            )
            ranges = [_discrete_cell_int_range(bundle, k, groups) for k in ks]
            keep = [i for i, (a, b) in enumerate(ranges) if b >= a]
            ks = [ks[i] for i in keep]
            ranges = [ranges[i] for i in keep]
            edges = [ranges[0][0] - 0.5]
            for (a, b), (prev_a, prev_b) in zip(ranges[1:], ranges[:-1]):
                if a != prev_b + 1:  # pragma: no cover - cells are contiguous
                    raise DomainError("non-contiguous estimator cells")
            for a, b in ranges:
                edges.append(b + 0.5)
        else:
            edges = [max(est.cell(ks[0]).lo, lo)]
            for k in ks:
                edges.append(min(est.cell(k).hi, hi))
        self.bundle = bundle
        self.numerics = num
        self.edges = np.asarray(edges, dtype=float)
        self.levels = np.array([profile.level(k) for k in ks])
        self.default = profile.default_level
        self.sup = profile.sup_level

    def expectation(self, theta: float) -> ExpectationResult:
        cdf = self.numerics.stat_cdf(self.bundle, theta, self.edges)
        probs = np.diff(cdf)
        outside = max(0.0, 1.0 - float(cdf[-1] - cdf[0]))
        estimate = float(np.dot(self.levels, probs)) + outside * self.default
        eb = _CDF_EPS * (len(self.levels) + 2.0) * max(1.0, self.sup)
        method = "exact_sum" if self.numerics.discrete else "quadrature"
        return ExpectationResult(estimate, eb, method)


class _PeriodicTrapezoidEngine:
    """Closed-form expectation of the interpolated composite with
    equal-height unit-cell spikes: height * (1 - deficit) / C with the
    deficit integrated exactly over half-integer neighbourhoods."""

    def __init__(self, composite: CompositeEVariable):
        profile: PeriodicTrapezoidProfile = composite.profile
        self.bundle = composite.bundle
        self.name = self.bundle.family.name
        self.h = profile.height
        self.eps = profile.epsilon
        self.C = profile.factor_C
        self.R = HEAVY_TAIL_CELL_WINDOW if self.name == "cauchy" else 16

    def _cdf_m1(self, theta: float, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """CDF and partial-first-moment antiderivative at v."""
        z = v - theta
        if self.name == "cauchy":
            F = stats.cauchy.cdf(z)
            # d/dv [log(1 + z^2) / (2 pi)] = z * pdf(z)
            G = theta * F + np.log1p(z * z) / (2.0 * math.pi)
        else:
            F = stats.norm.cdf(z)
            G = theta * F - stats.norm.pdf(z)
        return F, G

    def expectation(self, theta: float) -> ExpectationResult:
        m = np.arange(math.floor(theta) - self.R, math.floor(theta) + self.R + 1)
        a = m + (0.5 - self.eps)
        c = m + 0.5
        b = m + (0.5 + self.eps)
        Fa, Ga = self._cdf_m1(theta, a)
        Fc, Gc = self._cdf_m1(theta, c)
        Fb, Gb = self._cdf_m1(theta, b)
        rising = (Gc - Ga) - a * (Fc - Fa)
        falling = b * (Fb - Fc) - (Gb - Gc)
        deficit = float(np.sum(rising + falling)) / (2.0 * self.eps)
        tail = max(0.0, 1.0 - float(Fb[-1] - Fa[0]))
        estimate = self.h * (1.0 - deficit) / self.C
        eb = (self.h * 0.5 * tail) / self.C + _CDF_EPS * len(m)
        return ExpectationResult(estimate, eb, "quadrature")


# ---------------------------------------------------------------------------
# Generic expectation
# ---------------------------------------------------------------------------


def _as_callable(e) -> Callable[[object], float]:
    if callable(e):
        return e
    raise DomainError("e must be callable")


def _generic_discrete(e, theta, bundle, plan) -> ExpectationResult:
    num = _NUMERICS[bundle.family.name]
    lo, hi = _clip_bounds(bundle)
    hi_q = num.stat_ppf(bundle, theta, 1.0 - plan.tail_mass / 2.0)
    hi_x = min(hi, hi_q + 8.0)
    xs = np.arange(max(lo, 0.0), hi_x + 1.0)
    pmf = np.exp(np.asarray(bundle.family.log_density(theta, xs), dtype=float))
    fn = _as_callable(e)
    values = np.array([fn(float(x)) for x in xs])
    charged = values[pmf > 0]
    if np.any(np.isinf(charged)):
        return ExpectationResult(math.inf, 0.0, "exact_sum")
    estimate = float(np.dot(np.where(pmf > 0, values, 0.0), pmf))
    tail = max(0.0, 1.0 - float(np.sum(pmf)))
    sup = getattr(e, "sup_bound", None)
    if sup is None:
        sup = 10.0 * max(1.0, float(np.max(charged, initial=0.0)))
    return ExpectationResult(estimate, tail * sup + 1e-12, "exact_sum")


def _generic_quadrature(e, theta, bundle, plan) -> ExpectationResult:
    num = _NUMERICS[bundle.family.name]
    sup_lo, sup_hi = _clip_bounds(bundle)
    if num.heavy_tails:
        lo = theta - HEAVY_TAIL_CELL_WINDOW
        hi = theta + HEAVY_TAIL_CELL_WINDOW
    else:
        lo = num.stat_ppf(bundle, theta, plan.tail_mass / 2.0)
        hi = num.stat_ppf(bundle, theta, 1.0 - plan.tail_mass / 2.0)
    lo, hi = max(lo, sup_lo), min(hi, sup_hi)
    if bundle.family.name == "continuous_uniform":
        lo = max(lo, theta * plan.tail_mass)
    fn = _as_callable(e)
    if bundle.family.sample_dim > 1:
        raise DomainError(
            "generic quadrature works on scalar samples; use monte_carlo for "
            "product families or give the composite a cellwise profile"
        )

    def integrand(x: float) -> float:
        return fn(x) * math.exp(float(bundle.family.log_density(theta, x)))

    knots = _statistic_knots(bundle, lo, hi, getattr(e, "epsilon", None))
    pieces = [lo, *[k for k in knots if lo < k < hi], hi]
    total, err = 0.0, 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        val, abserr = integrate.quad(integrand, a, b, limit=200,
                                     epsabs=plan.abs_tol, epsrel=1e-10)
        total += val
        err += abserr
    coverage = num.stat_cdf(bundle, theta, np.array([lo, hi]))
    tail = max(0.0, 1.0 - float(coverage[1] - coverage[0]))
    sup = getattr(e, "sup_bound", None)
    if sup is None:
        sup = 10.0 * max(1.0, abs(total))
    return ExpectationResult(total, err + tail * sup, "quadrature")


def _statistic_knots(bundle, lo, hi, epsilon) -> list[float]:
    """Cell boundaries (and ramp knots) between lo and hi."""
    est = bundle.estimator
    net = bundle.net
    knots: list[float] = []
    k = net.round_index(lo)
    k_hi = net.round_index(hi)
    while k <= k_hi:
        cell = est.cell(k)
        if math.isfinite(cell.lo):
            knots.append(cell.lo)
        if math.isfinite(cell.hi):
            knots.append(cell.hi)
        if epsilon is not None:
            center = net.point(k)
            for d in (-0.5 - epsilon, -0.5 + epsilon, 0.5 - epsilon, 0.5 + epsilon):
                knots.append(center + d)
        k += 1
    return sorted(set(knots))


def _monte_carlo(e, theta, bundle, plan, theta_index) -> ExpectationResult:
    num = _NUMERICS[bundle.family.name]
    rng = _rng_for(plan.seed, theta_index)
    xs = num.sample(bundle, theta, plan.mc_samples, rng)
    if isinstance(e, CompositeEVariable):
        values = e.eval_many(xs)
    else:
        fn = _as_callable(e)
        if xs.ndim == 2:
            values = np.array([fn(row) for row in xs])
        else:
            values = np.array([fn(float(v)) for v in xs])
    estimate = float(np.mean(values))
    half_width = 2.576 * float(np.std(values, ddof=1)) / math.sqrt(len(values))
    return ExpectationResult(estimate, half_width, "monte_carlo")


def expectation(
    e,
    theta: float,
    bundle: FamilyBundle | None = None,
    plan: ExpectationPlan | None = None,
    theta_index: int = 0,
) -> ExpectationResult:
    """Estimate E_theta[e(X)] with an explicit error bound.

    ``e`` may be a :class:`CompositeEVariable` (its bundle supplies the
    family) or any callable together with an explicit ``bundle``.
    Deterministic given the plan's seed.
    """
    if bundle is None:
        if not isinstance(e, CompositeEVariable):
            raise DomainError("a bundle is required for non-composite tests")
        bundle = e.bundle
    plan = plan or ExpectationPlan()
    theta = bundle.family.validate_param(theta)
    num = _NUMERICS[bundle.family.name]
    if plan.method == "monte_carlo":
        return _monte_carlo(e, theta, bundle, plan, theta_index)
    if plan.method == "exact_sum" and not num.discrete:
        raise DomainError("exact_sum is only valid for discrete families")
    if isinstance(e, EVariable) and e.kind == "constant":
        method = "exact_sum" if num.discrete else "quadrature"
        return ExpectationResult(e.level, _CDF_EPS, method)
    if isinstance(e, EVariable) and e.kind == "cell_indicator":
        # exact: level times the cell probability (valid for product
        # families too -- the indicator is a function of the statistic)
        p = _cell_prob(bundle, theta, e.cell_index)
        method = "exact_sum" if num.discrete else "quadrature"
        return ExpectationResult(e.level * p, _CDF_EPS * max(1.0, e.level), method)
    if isinstance(e, CompositeEVariable) and isinstance(e.profile, CellwiseProfile):
        keys = list(e.components.keys())
        k_lo, k_hi = _grid_index_envelope(bundle, [theta], plan.tail_mass)
        if keys:
            k_lo, k_hi = min(k_lo, min(keys)), max(k_hi, max(keys))
        return _CellwiseEngine(e, k_lo, k_hi).expectation(theta)
    if isinstance(e, CompositeEVariable) and isinstance(
        e.profile, PeriodicTrapezoidProfile
    ):
        return _PeriodicTrapezoidEngine(e).expectation(theta)
    if num.discrete:
        return _generic_discrete(e, theta, bundle, plan)
    return _generic_quadrature(e, theta, bundle, plan)


# ---------------------------------------------------------------------------
# Parameter grids
# ---------------------------------------------------------------------------


def default_theta_grid(bundle: FamilyBundle) -> list[float]:
    """Adversarial parameter grid for a bundle.

    Location families sweep a wide span plus cell-boundary and
    half-integer points (the worst cases sit at cell boundaries); scale
    families sweep geometric grids over six decades plus net points and
    their perturbations; the discrete uniform hits powers of two and
    their neighbours up to 2**20.
    """
    name = bundle.family.name
    if name == "poisson":
        grid = list(np.geomspace(0.5, 1e4, 97))
        for t in range(1, 13):
            grid += [t * t, t * t + t, t * t + t + 0.25, t * t + t + 0.75,
                     max(0.5, t * t - t)]
    elif name == "binomial":
        net = bundle.net
        pts = [net.point(k) for k in net.indices()]
        grid = [1e-4, 1e-3, 0.01, 0.05, 0.95, 0.99, 0.999, 0.9999]
        grid += list(np.linspace(0.05, 0.95, 19))
        for s in pts:
            grid += [s, min(1 - 1e-9, s * 1.01), max(1e-9, s * 0.99)]
        for a, b in zip(pts[:-1], pts[1:]):
            mid = 0.5 * (a + b)
            grid += [mid, np.nextafter(mid, 0.0), np.nextafter(mid, 1.0)]
    elif name == "discrete_uniform":
        grid = list(range(1, 65))
        for j in range(1, 21):
            grid += [2**j - 1, 2**j, min(2**20, 2**j + 1)]
        grid += [int(v) for v in np.geomspace(64, 2**20, 40)]
        grid = sorted({int(v) for v in grid if 1 <= v <= 2**20})
        return [float(v) for v in grid]
    elif name == "continuous_uniform":
        grid = list(np.geomspace(1e-3, 1e3, 61))
        for j in range(-10, 11):
            s = 2.0**j
            grid += [s, s * (1 + 1e-6), s * (1 - 1e-6)]
    elif name == "normal_mean":
        h = bundle.net.point(1) - bundle.net.point(0)
        offs = [0.0, h / 8, h / 4, 3 * h / 8, h / 2, h / 2 + h / 64,
                5 * h / 8, 3 * h / 4, h]
        grid = []
        for base in (0.0, 1.0, -1.0, 10.0, 500.0, -500.0, 1000.0, -1000.0):
            grid += [base + o for o in offs]
        eps = bundle.params.get("epsilon")
        if eps is not None:
            grid += [0.5 - eps, 0.5 - eps / 2, 0.5, 0.5 + eps / 2, 0.5 + eps]
    elif name == "normal_variance":
        grid = list(np.geomspace(1e-3, 1e3, 61))
        for k in range(-6, 7):
            s = bundle.net.point(k)
            grid += [s, s * (1 + 1e-6), s * (1 - 1e-6)]
        for k in range(-6, 6):
            grid.append(0.5 * (bundle.net.point(k) + bundle.net.point(k + 1)))
    elif name == "cauchy":
        eps = bundle.params.get("epsilon", 0.0)
        offs = [0.0, 0.1, 0.25, 0.5 - eps, 0.5 - eps / 2, 0.5,
                0.5 + eps / 2, 0.5 + eps, 0.75, 1.0]
        grid = []
        for base in (0.0, 1.0, -1.0, 10.0, 500.0, -500.0, 1000.0, -1000.0):
            grid += [base + o for o in offs]
    else:  # pragma: no cover
        raise DomainError(f"no default grid for family {name!r}")
    space = bundle.family.param_space
    out = sorted({float(v) for v in grid if space.contains(float(v))})
    return out


# ---------------------------------------------------------------------------
# Sweeps and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    """Per-parameter expectation estimates with the worst case and a
    pass/fail verdict (pass iff worst <= 1 + 3 * its error bound)."""

    bundle_id: str
    mode: str
    factor_C: float
    rng_seed: int
    plan_method: str
    rows: tuple  # (theta, estimate, error_bound, method) tuples
    worst_theta: float
    worst_value: float
    worst_error_bound: float
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "bundle_id": self.bundle_id,
            "mode": self.mode,
            "factor_C": self.factor_C,
            "rng_seed": self.rng_seed,
            "plan_method": self.plan_method,
            "worst_theta": self.worst_theta,
            "worst_value": self.worst_value,
            "worst_error_bound": self.worst_error_bound,
            "verdict": self.verdict,
            "rows": [
                {"theta": t, "estimate": est, "error_bound": eb, "method": m}
                for (t, est, eb, m) in self.rows
            ],
        }

    def to_json_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2).encode()

    def to_csv(self) -> str:
        lines = ["theta,estimate,error_bound,method"]
        for t, est, eb, m in self.rows:
            lines.append(f"{t!r},{est!r},{eb!r},{m}")
        return "\n".join(lines) + "\n"


def sweep(
    composite: CompositeEVariable,
    theta_grid: Sequence[float] | None = None,
    plan: ExpectationPlan | None = None,
) -> VerificationReport:
    """Certify E_theta[composite] <= 1 across a parameter grid."""
    plan = plan or ExpectationPlan()
    bundle = composite.bundle
    grid = default_theta_grid(bundle) if theta_grid is None else [
        bundle.family.validate_param(t) for t in theta_grid
    ]
    engine = None
    if (
        isinstance(composite.profile, CellwiseProfile)
        and plan.method in ("auto", "exact_sum", "quadrature")
    ):
        k_lo, k_hi = _grid_index_envelope(bundle, grid, plan.tail_mass)
        keys = list(composite.components.keys())
        if keys:
            k_lo, k_hi = min(k_lo, min(keys)), max(k_hi, max(keys))
        engine = _CellwiseEngine(composite, k_lo, k_hi)
    elif (
        isinstance(composite.profile, PeriodicTrapezoidProfile)
        and plan.method in ("auto", "quadrature")
    ):
        engine = _PeriodicTrapezoidEngine(composite)
    rows = []
    for i, theta in enumerate(grid):
        if engine is not None:
            res = engine.expectation(theta)
        else:
            res = expectation(composite, theta, plan=plan, theta_index=i)
        rows.append((float(theta), res.estimate, res.error_bound, res.method))
    worst = max(rows, key=lambda r: (r[1], r[0]))
    verdict = "pass" if worst[1] <= 1.0 + 3.0 * worst[2] else "fail"
    return VerificationReport(
        bundle_id=composite.bundle.bundle_id,
        mode=composite.mode,
        factor_C=composite.factor_C,
        rng_seed=plan.seed,
        plan_method=plan.method,
        rows=tuple(rows),
        worst_theta=worst[0],
        worst_value=worst[1],
        worst_error_bound=worst[2],
        verdict=verdict,
    )


# ---------------------------------------------------------------------------
# Poisson maximum-likelihood counterexample
# ---------------------------------------------------------------------------


def mle_counterexample_poisson_with_bound(
    lam: float, plan: ExpectationPlan | None = None
) -> ExpectationResult:
    """E_lambda[exp(X) X! / X^X] by exact truncated summation in log space.

    The integrand is the inverse own-probability spike selected by the
    maximum-likelihood "estimator" shat(x) = x; because it grows like
    sqrt(2 pi x), no fixed normalizing constant can make this selection
    rule a valid e-variable over all lambda.
    """
    if lam <= 0:
        raise DomainError("lambda must be > 0")
    plan = plan or ExpectationPlan()
    n_max = int(lam + 20.0 * math.sqrt(lam) + 60.0)
    n = np.arange(1, n_max + 1, dtype=float)
    # pmf(n) * e^n n! / n^n  ==  exp(-lam + n (1 + log lam - log n))
    log_terms = -lam + n * (1.0 + math.log(lam) - np.log(n))
    total = math.exp(-lam) + float(np.sum(np.exp(log_terms)))
    t_last = math.exp(-lam + (n_max + 1.0) * (1.0 + math.log(lam) - math.log(n_max + 1.0)))
    ratio = lam * math.e / (n_max + 2.0)  # term ratio bound beyond n_max + 1
    tail = t_last / (1.0 - ratio) if ratio < 1.0 else math.inf
    return ExpectationResult(total, tail, "exact_sum")


def mle_counterexample_poisson(
    lam: float, plan: ExpectationPlan | None = None
) -> float:
    return mle_counterexample_poisson_with_bound(lam, plan).estimate


# ---------------------------------------------------------------------------
# Discrete-uniform budget certificate
# ---------------------------------------------------------------------------


def uniform_ceiling_budget(N: int) -> Fraction:
    """The exact per-cell budget certificate sum_s (s + 1) / (N + 1) over
    every net point s = 2^j reachable from the support {0..N} of the
    discrete uniform family.

    This is the tight upper bound on E_N[e_{shat(X)}(X)] over all valid
    component choices: each component can concentrate its whole budget
    (s + 1 under the uniform on [0:s]) on its cell's intersection with
    [0:N].
    """
    if N < 0:
        raise DomainError("N must be a non-negative integer")
    total = Fraction(2, N + 1)  # s = 1 with cell {0, 1}
    j = 1
    while 2 ** (j - 1) < N:
        total += Fraction(2**j + 1, N + 1)
        j += 1
    return total


def uniform_ceiling_budget_max(n_max: int = 2**20) -> tuple[float, int]:
    """Max of the budget certificate over 1 <= N <= n_max, by a full
    vectorized sweep; returns (max value, argmax N)."""
    N = np.arange(1, n_max + 1, dtype=float)
    m = np.ceil(np.log2(N))
    m[0] = 0.0  # N = 1: only the {0,1} cell
    B = (2.0 ** (m + 1.0) + m) / (N + 1.0)
    i = int(np.argmax(B))
    return float(B[i]), int(N[i])


# ---------------------------------------------------------------------------
# Interpolated spike suites and factor certification
# ---------------------------------------------------------------------------


class _UnitCellSpikes(Mapping):
    """The conceptually total family of unit-cell spikes e_n: the
    indicator of [n - 1/2, n + 1/2) over its probability under P_n (the
    same height for every n by translation invariance)."""

    def __init__(self, bundle: FamilyBundle, height: float):
        self._bundle = bundle
        self.height = height

    def __getitem__(self, n: int) -> EVariable:
        h = self.height
        return EVariable(
            fn=lambda x, _n=n: h if _n - 0.5 <= float(x) < _n + 0.5 else 0.0,
            valid_for=float(n),
            sup_bound=h,
            kind="cell_indicator",
            level=h,
            cell_index=n,
        )

    def get(self, n: int, default=None) -> EVariable:
        return self[n]

    def __iter__(self):  # pragma: no cover - unbounded conceptually
        return iter(())

    def __len__(self) -> int:  # pragma: no cover
        return 0

    def keys(self):
        return ()

    def items(self):
        return ()


def unit_cell_spikes(bundle: FamilyBundle) -> _UnitCellSpikes:
    name = bundle.family.name
    if name == "normal_mean":
        if bundle.family.sample_dim != 1:
            raise DomainError("interpolated spikes need single observations")
        mass = float(stats.norm.cdf(0.5) - stats.norm.cdf(-0.5))
    elif name == "cauchy":
        mass = float(stats.cauchy.cdf(0.5) - stats.cauchy.cdf(-0.5))
    else:
        raise DomainError("interpolation is certified for normal_mean and cauchy")
    return _UnitCellSpikes(bundle, 1.0 / mass)


def interpolated_spike_composite(
    bundle: FamilyBundle, epsilon: float, factor_C: float
) -> CompositeEVariable:
    spikes = unit_cell_spikes(bundle)
    profile = PeriodicTrapezoidProfile(
        height=spikes.height, epsilon=float(epsilon), factor_C=float(factor_C)
    )
    return combine_interpolated(bundle, spikes, epsilon, factor_C, profile=profile)


def certify_interpolated_factor(
    bundle: FamilyBundle,
    epsilons: Sequence[float] = (0.05, 0.1, 0.2),
    theta_grid: Sequence[float] | None = None,
    anchor: float = 36.0,
    tol: float = 1e-6,
) -> tuple[float, dict]:
    """Tightest factor C for which the interpolated spike sweeps pass.

    Starts from the ``anchor`` (a factor valid by the even/odd-split
    argument: twice the discrete factor) and bisects downward against the
    worst unnormalized expectation over the given epsilons and grid.
    Expectations scale exactly as 1/C, so the sweep is evaluated once at
    C = 1 and the bisection runs on the cached values.
    """
    grid = default_theta_grid(bundle) if theta_grid is None else theta_grid
    worst_u, worst_eb = 0.0, 0.0
    per_eps = {}
    for eps in epsilons:
        comp = interpolated_spike_composite(bundle, eps, 1.0)
        engine = _PeriodicTrapezoidEngine(comp)
        us = [engine.expectation(t) for t in grid]
        u = max(r.estimate for r in us)
        eb = max(r.error_bound for r in us)
        per_eps[float(eps)] = u
        if u > worst_u:
            worst_u, worst_eb = u, eb
    lo, hi = 1.0, float(anchor)
    if worst_u / hi > 1.0 + 3.0 * worst_eb / hi:  # pragma: no cover - anchor is safe
        raise DomainError("anchor factor fails; widen it")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if worst_u / mid <= 1.0 + 3.0 * (worst_eb / mid):
            hi = mid
        else:
            lo = mid
    certified = hi
    details = {
        "anchor": float(anchor),
        "worst_unnormalized": worst_u,
        "per_epsilon_unnormalized": per_eps,
        "certified_C": certified,
    }
    return certified, details
