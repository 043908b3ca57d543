"""Concrete family bundles: distribution + net + estimator + factor.

Seven one-parameter families are wired here, each as a ``FamilyBundle``
pairing the distribution family with the parameter net and estimator that
make the selection rule ``e(x) = e_{shat(x)}(x) / C`` a valid e-variable,
together with the normalizing factor C and the route that certifies it:

=================== ============================== ===================== ======
family              net                            estimator             route
=================== ============================== ===================== ======
binomial(n)         sin^2(pi t / (2 floor(sqrt n)))round of k/n          growth
discrete uniform    {2^k}, k >= 0                  2^ceil(log2 x), 0->1  direct
poisson             {t^2}, t >= 1                  round of x            steps
continuous uniform  {2^k}, k in Z                  2^ceil(log2 x)        direct
normal mean (n)     (alpha/sqrt(n)) Z              round of the mean     steps
normal variance (n) {(1+1/sqrt n)^k}, k in Z       round of ||x||^2/n    steps
cauchy              Z                              round or r^epsilon    growth
=================== ============================== ===================== ======

The "steps" route uses ``factor_from_steps`` with the declared constants
(c', c); the "growth" route uses ``factor_from_growth`` with (c', alpha).
For the binomial family no closed-form constants are available, so they
are estimated numerically at construction time (exhaustive enumeration of
the finite support for c', a closure scan over net-point pairs for alpha)
and the factor gets a 10% safety margin.

Divergences are the Kullback-Leibler divergence for the exponential
families, ``log(1 + (t1 - t2)^2)`` for the Cauchy location family, and
the (one-sided, +inf when reversed) uniform log-ratio for the uniforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np
from scipy.special import expit, gammaln, logit, rel_entr, xlogy

from .core import (
    BinomialSine,
    BoundaryMLEError,
    CeilDyadic,
    DomainError,
    DyadicInt,
    DyadicReal,
    Estimator,
    ExpFamilyDescriptor,
    FactorInputs,
    Family,
    Geometric,
    IntegerLattice,
    Interval,
    MeanThenRound,
    Net,
    Norm2ThenRound,
    REpsilon,
    RoundToNet,
    ScaledLattice,
    Squares,
    Support,
    factor_from_growth,
    factor_from_steps,
)

__all__ = [
    "FAMILY_IDS",
    "FamilyBundle",
    "make_bundle",
    "estimate",
    "binomial_family",
    "discrete_uniform_family",
    "poisson_family",
    "continuous_uniform_family",
    "normal_mean_family",
    "normal_variance_family",
    "cauchy_family",
    "poisson_descriptor",
    "binomial_descriptor",
    "normal_mean_descriptor",
    "normal_variance_descriptor",
]

FAMILY_IDS = (
    "binomial",
    "discrete_uniform",
    "poisson",
    "continuous_uniform",
    "normal_mean",
    "normal_variance",
    "cauchy",
)

#: Safety multiplier applied to numerically estimated factors (binomial).
ESTIMATED_FACTOR_MARGIN = 1.1

_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Distribution families
# ---------------------------------------------------------------------------


def poisson_family() -> Family:
    def log_density(lam, x):
        x = np.asarray(x, dtype=float)
        ok = (x >= 0) & (x == np.floor(x))
        with np.errstate(invalid="ignore"):
            val = -lam + xlogy(x, lam) - gammaln(x + 1.0)
        out = np.where(ok, val, -np.inf)
        return float(out) if out.ndim == 0 else out

    def div(l1, l2):
        l1 = np.asarray(l1, dtype=float)
        l2 = np.asarray(l2, dtype=float)
        out = rel_entr(l1, l2) - l1 + l2
        return float(out) if out.ndim == 0 else out

    return Family(
        name="poisson",
        param_space=Interval(lo=0.0, hi=math.inf, lo_open=True),
        support=Support(kind="integer_range", lo=0.0, hi=math.inf),
        sample_dim=1,
        log_density=log_density,
        divergence_fn=div,
        estimator_g=lambda x: float(x),
    )


def binomial_family(n: int) -> Family:
    n = int(n)
    log_binom = gammaln(n + 1.0)

    def log_density(p, k):
        k = np.asarray(k, dtype=float)
        ok = (k >= 0) & (k <= n) & (k == np.floor(k))
        val = (
            log_binom
            - gammaln(k + 1.0)
            - gammaln(n - k + 1.0)
            + xlogy(k, p)
            + xlogy(n - k, 1.0 - p)
        )
        out = np.where(ok, val, -np.inf)
        return float(out) if out.ndim == 0 else out

    def div(p1, p2):
        p1 = np.asarray(p1, dtype=float)
        p2 = np.asarray(p2, dtype=float)
        out = n * (rel_entr(p1, p2) + rel_entr(1.0 - p1, 1.0 - p2))
        return float(out) if out.ndim == 0 else out

    return Family(
        name="binomial",
        param_space=Interval(lo=0.0, hi=1.0, lo_open=True, hi_open=True),
        support=Support(kind="integer_range", lo=0.0, hi=float(n)),
        sample_dim=1,
        log_density=log_density,
        divergence_fn=div,
        estimator_g=lambda k: float(k) / n,
    )


def discrete_uniform_family() -> Family:
    def log_density(N, x):
        x = np.asarray(x, dtype=float)
        ok = (x >= 0) & (x <= N) & (x == np.floor(x))
        out = np.where(ok, -math.log(N + 1.0), -np.inf)
        return float(out) if out.ndim == 0 else out

    def div(n1, n2):
        n1 = np.asarray(n1, dtype=float)
        n2 = np.asarray(n2, dtype=float)
        out = np.where(n1 <= n2, np.log((n2 + 1.0) / (n1 + 1.0)), np.inf)
        return float(out) if out.ndim == 0 else out

    return Family(
        name="discrete_uniform",
        param_space=Interval(lo=0.0, hi=math.inf, lo_open=False, integer=True),
        support=Support(kind="integer_range", lo=0.0, hi=math.inf),
        sample_dim=1,
        log_density=log_density,
        divergence_fn=div,
        estimator_g=lambda x: float(x),
    )


def continuous_uniform_family() -> Family:
    def log_density(theta, x):
        x = np.asarray(x, dtype=float)
        ok = (x > 0) & (x <= theta)
        out = np.where(ok, -math.log(theta), -np.inf)
        return float(out) if out.ndim == 0 else out

    def div(t1, t2):
        t1 = np.asarray(t1, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(t1 <= t2, np.log(t2) - np.log(t1), np.inf)
        return float(out) if out.ndim == 0 else out

    return Family(
        name="continuous_uniform",
        param_space=Interval(lo=0.0, hi=math.inf, lo_open=True),
        support=Support(kind="half_line", lo=0.0, hi=math.inf, lo_open=True),
        sample_dim=1,
        log_density=log_density,
        divergence_fn=div,
        estimator_g=lambda x: float(x),
    )


def normal_mean_family(n: int) -> Family:
    n = int(n)

    def log_density(mu, x):
        x = np.asarray(x, dtype=float)
        # for n == 1 an array is a batch of scalar samples; for n > 1 the
        # last axis holds the coordinates of one sample
        sq = (x - mu) ** 2 if n == 1 else np.sum((x - mu) ** 2, axis=-1)
        out = -0.5 * n * _LOG_2PI - 0.5 * sq
        return float(out) if np.ndim(out) == 0 else out

    def div(m1, m2):
        m1 = np.asarray(m1, dtype=float)
        m2 = np.asarray(m2, dtype=float)
        out = 0.5 * n * (m1 - m2) ** 2
        return float(out) if out.ndim == 0 else out

    def g(x):
        return float(np.mean(np.asarray(x, dtype=float)))

    return Family(
        name="normal_mean",
        param_space=Interval(),
        support=Support(kind="real_line", sample_dim=n),
        sample_dim=n,
        log_density=log_density,
        divergence_fn=div,
        estimator_g=g,
    )


def normal_variance_family(n: int) -> Family:
    n = int(n)

    def log_density(var, x):
        x = np.asarray(x, dtype=float)
        sq = x * x if n == 1 else np.sum(x * x, axis=-1)
        out = -0.5 * n * (_LOG_2PI + math.log(var)) - 0.5 * sq / var
        return float(out) if np.ndim(out) == 0 else out

    def div(v1, v2):
        v1 = np.asarray(v1, dtype=float)
        v2 = np.asarray(v2, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = v1 / v2
            out = 0.5 * n * (r - np.log(r) - 1.0)
        out = np.where(np.asarray(r) == 0.0, np.inf, out)
        return float(out) if np.ndim(out) == 0 else out

    def g(x):
        flat = np.ravel(np.asarray(x, dtype=float))
        return float(np.dot(flat, flat)) / n

    return Family(
        name="normal_variance",
        param_space=Interval(lo=0.0, hi=math.inf, lo_open=True),
        support=Support(kind="real_line", sample_dim=n),
        sample_dim=n,
        log_density=log_density,
        divergence_fn=div,
        estimator_g=g,
    )


def cauchy_family() -> Family:
    def log_density(theta, x):
        x = np.asarray(x, dtype=float)
        out = -math.log(math.pi) - np.log1p((x - theta) ** 2)
        return float(out) if out.ndim == 0 else out

    def div(t1, t2):
        t1 = np.asarray(t1, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        out = np.log1p((t1 - t2) ** 2)
        return float(out) if out.ndim == 0 else out

    return Family(
        name="cauchy",
        param_space=Interval(),
        support=Support(kind="real_line"),
        sample_dim=1,
        log_density=log_density,
        divergence_fn=div,
        estimator_g=lambda x: float(x),
    )


# ---------------------------------------------------------------------------
# Canonical exponential-family descriptors
# ---------------------------------------------------------------------------


def poisson_descriptor() -> ExpFamilyDescriptor:
    def mean_to_canonical(t: float) -> float:
        if t < 0:
            raise DomainError("a Poisson count cannot be negative")
        if t == 0:
            raise BoundaryMLEError("zero count: rate MLE degenerates to 0", 0.0)
        return math.log(t)

    return ExpFamilyDescriptor(
        name="poisson",
        log_h=lambda x: -gammaln(np.asarray(x, dtype=float) + 1.0),
        T=lambda x: float(x),
        A=math.exp,
        dA=math.exp,
        to_canonical=math.log,
        from_canonical=math.exp,
        canonical_space=Interval(),
        mean_to_canonical=mean_to_canonical,
    )


def binomial_descriptor(n: int) -> ExpFamilyDescriptor:
    n = int(n)
    log_binom = gammaln(n + 1.0)

    def mean_to_canonical(t: float) -> float:
        if not 0 <= t <= n:
            raise DomainError("count outside [0, n]")
        if t == 0:
            raise BoundaryMLEError("all failures: success-probability MLE is 0", 0.0)
        if t == n:
            raise BoundaryMLEError("all successes: success-probability MLE is 1", 1.0)
        return float(logit(t / n))

    def log_h(k):
        k = np.asarray(k, dtype=float)
        return log_binom - gammaln(k + 1.0) - gammaln(n - k + 1.0)

    return ExpFamilyDescriptor(
        name="binomial",
        log_h=log_h,
        T=lambda k: float(k),
        A=lambda eta: n * float(np.logaddexp(0.0, eta)),
        dA=lambda eta: n * float(expit(eta)),
        to_canonical=lambda p: float(logit(p)),
        from_canonical=lambda eta: float(expit(eta)),
        canonical_space=Interval(),
        mean_to_canonical=mean_to_canonical,
    )


def normal_mean_descriptor(n: int) -> ExpFamilyDescriptor:
    n = int(n)

    def log_h(x):
        x = np.asarray(x, dtype=float)
        sq = np.sum(x * x, axis=-1) if x.ndim else x * x
        return -0.5 * n * _LOG_2PI - 0.5 * sq

    return ExpFamilyDescriptor(
        name="normal_mean",
        log_h=log_h,
        T=lambda x: float(np.sum(np.asarray(x, dtype=float))),
        A=lambda eta: 0.5 * n * eta * eta,
        dA=lambda eta: n * eta,
        to_canonical=lambda mu: float(mu),
        from_canonical=lambda eta: float(eta),
        canonical_space=Interval(),
        mean_to_canonical=lambda t: t / n,
    )


def normal_variance_descriptor(n: int) -> ExpFamilyDescriptor:
    n = int(n)

    def mean_to_canonical(t: float) -> float:
        # T(x) = -||x||^2 / 2 is non-positive; t == 0 is the zero vector
        if t > 0:
            raise DomainError("negative squared norm")
        if t == 0:
            raise BoundaryMLEError("zero vector: variance MLE degenerates to 0", 0.0)
        return -0.5 * n / t

    def T(x):
        flat = np.ravel(np.asarray(x, dtype=float))
        return -0.5 * float(np.dot(flat, flat))

    return ExpFamilyDescriptor(
        name="normal_variance",
        log_h=lambda x: -0.5 * n * _LOG_2PI,
        T=T,
        A=lambda eta: -0.5 * n * math.log(eta),
        dA=lambda eta: -0.5 * n / eta,
        to_canonical=lambda var: 1.0 / var,
        from_canonical=lambda eta: 1.0 / eta,
        canonical_space=Interval(lo=0.0, hi=math.inf, lo_open=True),
        mean_to_canonical=mean_to_canonical,
    )


# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FamilyBundle:
    """A family wired to its net, estimator and normalizing factor.

    ``route`` records how ``factor_C`` was certified: "growth" and
    "steps" use the closed-form factor formulas applied to
    ``factor_inputs``; "direct" means an explicit constant.  Bundles are
    immutable and safe for concurrent reads.
    """

    family: Family
    net: Net
    estimator: Estimator
    factor_inputs: FactorInputs | None
    factor_C: float
    route: str  # "growth" | "steps" | "direct"
    descriptor: ExpFamilyDescriptor | None
    params: Mapping[str, float] = field(default_factory=dict)
    bundle_id: str = ""

    def estimate(self, x) -> float:
        """The selected net point for sample ``x``."""
        return self.estimator(x)

    def estimate_index(self, x) -> int:
        return self.estimator.index(x)

    @property
    def name(self) -> str:
        return self.family.name


def estimate(bundle: FamilyBundle, x) -> float:
    """Module-level alias for :meth:`FamilyBundle.estimate`."""
    return bundle.estimate(x)


def _binomial_growth_alpha(net: BinomialSine, div_fn) -> float:
    """Largest admissible growth exponent over the finite sine net.

    For off-net parameter pairs straddling net points s_a .. s_b the
    number of net points strictly between them approaches b - a + 1 and
    the divergence approaches d(s_a || s_b), so the binding constraints
    are d(s_a || s_b) >= (1 + alpha) * log(b - a) over all index pairs
    with b - a >= 2 (smaller gaps are vacuous).
    """
    pts = np.array([net.point(t) for t in net.indices()])
    m = len(pts)
    best = math.inf
    for a in range(m):
        for b in range(a + 2, m):
            d_ab = float(div_fn(pts[a], pts[b]))
            d_ba = float(div_fn(pts[b], pts[a]))
            best = min(best, min(d_ab, d_ba) / math.log(b - a))
    if math.isinf(best):
        # fewer than three net points: every pair is vacuous and any
        # exponent is admissible, so the factor degenerates to 7 e^c'
        return math.inf
    if best <= 1.0:
        raise DomainError("sine net admits no positive growth exponent")
    return best - 1.0


def _make_binomial(n: int | None = None) -> FamilyBundle:
    if n is None:
        raise DomainError("the binomial bundle needs the trial count n")
    n = int(n)
    if n < 4:
        raise DomainError("binomial bundle needs n >= 4")
    fam = binomial_family(n)
    net = BinomialSine(n)
    est = RoundToNet(net, statistic=lambda k: float(k) / n)
    ks = np.arange(n + 1)
    sel = np.array([net.point(est.index(k)) for k in ks])
    c_prime = float(np.max(fam.divergence_fn(ks / n, sel)))
    alpha = _binomial_growth_alpha(net, fam.divergence_fn)
    inputs = FactorInputs(c_prime=c_prime, alpha=alpha)
    C = ESTIMATED_FACTOR_MARGIN * factor_from_growth(c_prime, alpha)
    return FamilyBundle(
        family=fam,
        net=net,
        estimator=est,
        factor_inputs=inputs,
        factor_C=C,
        route="growth",
        descriptor=binomial_descriptor(n),
        params={"n": n},
        bundle_id=f"binomial(n={n})",
    )


def _make_discrete_uniform() -> FamilyBundle:
    net = DyadicInt()
    return FamilyBundle(
        family=discrete_uniform_family(),
        net=net,
        estimator=CeilDyadic(net),
        factor_inputs=None,
        factor_C=3.0,
        route="direct",
        descriptor=None,
        params={},
        bundle_id="discrete_uniform",
    )


def _make_poisson() -> FamilyBundle:
    net = Squares()
    inputs = FactorInputs(c_prime=1.0, c=1.0)
    return FamilyBundle(
        family=poisson_family(),
        net=net,
        estimator=RoundToNet(net),
        factor_inputs=inputs,
        factor_C=factor_from_steps(1.0, 1.0),
        route="steps",
        descriptor=poisson_descriptor(),
        params={},
        bundle_id="poisson",
    )


def _make_continuous_uniform() -> FamilyBundle:
    net = DyadicReal()
    return FamilyBundle(
        family=continuous_uniform_family(),
        net=net,
        estimator=CeilDyadic(net),
        factor_inputs=None,
        factor_C=3.0,
        route="direct",
        descriptor=None,
        params={},
        bundle_id="continuous_uniform",
    )


def _make_normal_mean(alpha: float = 1.0, n: int = 1,
                      epsilon: float | None = None) -> FamilyBundle:
    n = int(n)
    if n < 1:
        raise DomainError("n must be a positive integer")
    fam = normal_mean_family(n)
    if epsilon is not None:
        # unit-lattice variant with rounding freed on half-integer
        # neighbourhoods; only defined for single observations
        if n != 1:
            raise DomainError("the r^epsilon variant uses n = 1")
        eps = float(epsilon)
        est = REpsilon(eps)
        c_prime = 0.5 * (0.5 + eps) ** 2
        inputs = FactorInputs(c_prime=c_prime, alpha=1.0)
        return FamilyBundle(
            family=fam,
            net=est.net,
            estimator=est,
            factor_inputs=inputs,
            factor_C=factor_from_growth(c_prime, 1.0),
            route="growth",
            descriptor=normal_mean_descriptor(1),
            params={"n": 1, "epsilon": eps},
            bundle_id=f"normal_mean(epsilon={eps})",
        )
    alpha = float(alpha)
    if alpha <= 0:
        raise DomainError("alpha must be > 0")
    net = ScaledLattice(alpha=alpha, n=n)
    inputs = FactorInputs(c_prime=alpha ** 2 / 8.0, c=alpha ** 2 / 2.0)
    return FamilyBundle(
        family=fam,
        net=net,
        estimator=MeanThenRound(net),
        factor_inputs=inputs,
        factor_C=factor_from_steps(alpha ** 2 / 8.0, alpha ** 2 / 2.0),
        route="steps",
        descriptor=normal_mean_descriptor(n),
        params={"alpha": alpha, "n": n},
        bundle_id=f"normal_mean(alpha={alpha},n={n})",
    )


def _make_normal_variance(n: int = 4) -> FamilyBundle:
    n = int(n)
    if n < 1:
        raise DomainError("n must be a positive integer")
    root = math.isqrt(n)
    if root * root == n:
        exact = 1 + Fraction(1, root)
        net = Geometric(float(exact), exact_ratio=exact)
    else:
        net = Geometric(1.0 + 1.0 / math.sqrt(n))
    inputs = FactorInputs(c_prime=0.5, c=1.0 / 32.0)
    return FamilyBundle(
        family=normal_variance_family(n),
        net=net,
        estimator=Norm2ThenRound(net, n),
        factor_inputs=inputs,
        factor_C=factor_from_steps(0.5, 1.0 / 32.0),
        route="steps",
        descriptor=normal_variance_descriptor(n),
        params={"n": n},
        bundle_id=f"normal_variance(n={n})",
    )


def _make_cauchy(epsilon: float | None = None) -> FamilyBundle:
    net = IntegerLattice()
    if epsilon is None:
        est: Estimator = RoundToNet(net)
        eps_id = ""
    else:
        est = REpsilon(float(epsilon), net=net)
        eps_id = f"(epsilon={float(epsilon)})"
    inputs = FactorInputs(c_prime=math.log(2.0), alpha=1.0)
    return FamilyBundle(
        family=cauchy_family(),
        net=net,
        estimator=est,
        factor_inputs=inputs,
        factor_C=factor_from_growth(math.log(2.0), 1.0),
        route="growth",
        descriptor=None,
        params={} if epsilon is None else {"epsilon": float(epsilon)},
        bundle_id=f"cauchy{eps_id}",
    )


def make_bundle(name: str, **params) -> FamilyBundle:
    """Build the fully wired bundle for a family id.

    Recognised params: ``n`` (binomial, normal_mean, normal_variance),
    ``alpha`` (normal_mean net scale), ``epsilon`` (cauchy / normal_mean
    rounding slack, must be <= 1/5).  Unknown ids or parameters raise
    :class:`DomainError` naming the valid choices.
    """
    makers = {
        "binomial": (_make_binomial, {"n"}),
        "discrete_uniform": (_make_discrete_uniform, set()),
        "poisson": (_make_poisson, set()),
        "continuous_uniform": (_make_continuous_uniform, set()),
        "normal_mean": (_make_normal_mean, {"alpha", "n", "epsilon"}),
        "normal_variance": (_make_normal_variance, {"n"}),
        "cauchy": (_make_cauchy, {"epsilon"}),
    }
    if name not in makers:
        raise DomainError(
            f"unknown family {name!r}; valid ids: {', '.join(FAMILY_IDS)}"
        )
    maker, allowed = makers[name]
    unknown = set(params) - allowed
    if unknown:
        raise DomainError(
            f"unknown parameter(s) {sorted(unknown)} for family {name!r}; "
            f"allowed: {sorted(allowed) or 'none'}"
        )
    return maker(**params)
