"""Numerical verification of the factor-formula preconditions.

The closed-form normalizing factors rest on a handful of conditions
relating the family's divergence, net, and estimator.  Each condition is
realized here as a deterministic grid/sample check producing a
:class:`ConditionReport` with the worst violation and witnesses:

* ``log_ratio_identity``   log(p_theta(x)/p_s(x)) = d(g(x)||s) - d(g(x)||theta)
* ``cell_bound``           sup over cells of d(g(x) || selected point), the
  constant c' (estimated, and compared against the declared value)
* ``cell_sandwich``        pred(s) <= pred(g(x)) <= succ(g(x)) <= succ(s)
* ``divergence_growth``    d >= (1 + alpha) log(k - 1) across k net points
* ``reverse_triangle``     d(t1||t3) >= d(t1||t2) + d(t2||t3) on monotone
  triples (exact for exponential families: the divergence is a Bregman
  divergence of the convex cumulant)
* ``step_lower_bound``     min divergence between consecutive net points,
  the constant c (estimated, both directions)

Checks are pure functions of their inputs plus an explicit seed, so two
runs with the same arguments produce identical reports.  Grids are
geometric in scale parameters and arithmetic in location parameters.
Identities use tolerance ``IDENTITY_TOL``; inequalities allow slack
``SLACK_TOL`` (double-precision closed forms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DomainError
from .families import FamilyBundle

__all__ = [
    "IDENTITY_TOL",
    "SLACK_TOL",
    "ConditionReport",
    "GridSpec",
    "default_grid_spec",
    "check_log_ratio_identity",
    "estimate_cell_bound",
    "check_cell_sandwich",
    "check_divergence_growth",
    "check_reverse_triangle",
    "estimate_step_lower_bound",
    "step_bounds_directed",
    "default_cell_samples",
    "default_growth_pairs",
    "run_all_checks",
]

IDENTITY_TOL = 1e-9
SLACK_TOL = 1e-7

_WITNESS_CAP = 10


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one condition check.

    ``max_violation`` is 0 for a clean pass; ``witnesses`` holds up to
    ten offending (theta, s, x) triples (fields not applicable to a
    condition are None).  ``estimated_constant`` carries the measured
    c', c, or alpha where the check estimates one.
    """

    condition: str
    max_violation: float
    tolerance: float
    passing: bool
    witnesses: tuple = ()
    estimated_constant: float | None = None
    n_evaluated: int = 0
    n_skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "max_violation": self.max_violation,
            "tolerance": self.tolerance,
            "passing": self.passing,
            "estimated_constant": self.estimated_constant,
            "n_evaluated": self.n_evaluated,
            "n_skipped": self.n_skipped,
            "witnesses": [list(w) for w in self.witnesses],
        }


# ---------------------------------------------------------------------------
# Grids and sample generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Axes for the log-ratio identity check: parameters, net indices and
    pointwise-estimate values (the statistic g(x) axis)."""

    thetas: tuple
    net_indices: tuple
    g_values: tuple


def _lift(bundle: FamilyBundle, v: float):
    """A support sample whose pointwise estimate g equals v (constant
    vector for the mean, scaled constant vector for the squared norm,
    count v * n for the binomial success fraction)."""
    name = bundle.family.name
    n = bundle.family.sample_dim
    if name == "normal_mean" and n > 1:
        return np.full(n, float(v))
    if name == "normal_variance":
        return np.full(n, math.sqrt(float(v)))
    if name == "binomial":
        return float(round(v * int(bundle.params["n"])))
    return float(v)


def default_grid_spec(bundle: FamilyBundle, points: int = 50) -> GridSpec:
    """Per-family default axes (about ``points`` values each)."""
    name = bundle.family.name
    net = bundle.net
    if name == "poisson":
        thetas = np.geomspace(0.1, 100.0, points)
        indices = range(1, points + 1)
        gs = np.unique(np.concatenate([[0.0, 1.0, 2.0],
                                       np.round(np.geomspace(1, 300, points - 3))]))
    elif name == "binomial":
        thetas = np.linspace(0.02, 0.98, points)
        indices = net.indices()
        n = int(bundle.params["n"])
        gs = np.arange(0, n + 1) / n
    elif name == "normal_mean":
        thetas = np.linspace(-5.0, 5.0, points)
        indices = range(-points // 2, points // 2)
        gs = np.linspace(-6.0, 6.0, points)
    elif name == "normal_variance":
        # the geometric net dives towards 0 quickly; indices are kept in
        # a range where the identity's terms stay within float64 reach of
        # an absolute 1e-9 residual
        thetas = np.geomspace(0.01, 100.0, points)
        indices = range(-12, 13)
        gs = np.geomspace(0.005, 200.0, points)
    elif name == "cauchy":
        thetas = np.linspace(-5.0, 5.0, points)
        indices = range(-points // 2, points // 2)
        gs = np.linspace(-30.0, 30.0, points)
    elif name == "discrete_uniform":
        thetas = np.unique(np.round(np.geomspace(1, 4096, points)))
        indices = range(0, 12)
        gs = np.unique(np.round(np.geomspace(1, 4096, points)))
    elif name == "continuous_uniform":
        thetas = np.geomspace(1e-3, 1e3, points)
        indices = range(-10, 11)
        gs = np.geomspace(1e-3, 1e3, points)
    else:  # pragma: no cover
        raise DomainError(f"no default grid for {name!r}")
    return GridSpec(
        thetas=tuple(float(t) for t in thetas),
        net_indices=tuple(int(i) for i in indices),
        g_values=tuple(float(g) for g in gs),
    )


def default_cell_samples(bundle: FamilyBundle, n_cells: int = 120,
                         per_cell: int = 25, seed: int = 0) -> list:
    """Support samples concentrated on cell extremes plus a seeded fill;
    the divergence to the selected point is monotone towards the cell
    edges for every family here, so including exact edges makes the
    estimated cell bound sharp."""
    name = bundle.family.name
    est = bundle.estimator
    rng = np.random.default_rng(seed)
    samples: list = []
    if name == "binomial":
        return [int(k) for k in range(int(bundle.params["n"]) + 1)]
    if name == "poisson":
        samples.append(0.0)
        for t in range(1, n_cells + 1):
            a, b = t * t - t + 1, t * t + t
            samples += [float(a), float(b)]
            if b - a <= per_cell:
                samples += [float(v) for v in range(a + 1, b)]
            else:
                samples += [float(v) for v in rng.integers(a, b + 1, per_cell)]
        return samples
    if name == "discrete_uniform":
        top = 2 ** min(n_cells, 14)
        return [float(v) for v in range(0, top + 1)]
    # continuous families: fill each cell of a centred index window
    half = n_cells // 2
    lo_k = est.net.k_min if est.net.k_min is not None else -half
    ks = range(max(lo_k, -half), max(lo_k, -half) + n_cells)
    for k in ks:
        cell = est.cell(k)
        lo = cell.lo if math.isfinite(cell.lo) else cell.hi - 1.0
        hi = cell.hi if math.isfinite(cell.hi) else cell.lo + 1.0
        lo = max(lo, bundle.family.support.lo)
        inner = rng.uniform(lo, hi, per_cell)
        edge_lo = lo if cell.lo_closed else np.nextafter(lo, hi)
        edge_hi = hi if cell.hi_closed else np.nextafter(hi, lo)
        for v in [edge_lo, edge_hi, *inner]:
            if cell.contains(float(v)):
                samples.append(_lift(bundle, float(v)))
    return samples


def default_growth_pairs(bundle: FamilyBundle, max_gap: int = 1000,
                         n_random: int = 300, seed: int = 0) -> list:
    """Parameter pairs straddling net-point runs (realizing each between-
    count near its binding infimum) plus seeded random pairs."""
    net = bundle.net
    rng = np.random.default_rng(seed)
    lo_k = net.k_min if net.k_min is not None else -max_gap // 2
    hi_k = net.k_max if net.k_max is not None else max_gap // 2
    pairs: list[tuple[float, float]] = []
    gaps = sorted({g for g in [2, 3, 4, 5, 8, 13, 21, 55, 144, 377, max_gap]
                   if g <= hi_k - lo_k})
    anchors = sorted({a for a in (lo_k, (lo_k + hi_k) // 2, hi_k - 2)
                      if a >= lo_k})
    space = bundle.family.param_space
    for gap in gaps:
        for a in anchors:
            b = a + gap
            if b > hi_k:
                continue
            pa, pb = net.point(a), net.point(b)
            if a - 1 >= lo_k:
                prev_gap = pa - net.point(a - 1)
            elif space.lo > -math.inf:
                prev_gap = pa - space.lo
            else:  # pragma: no cover - nets bounded below have finite lo
                prev_gap = 1.0
            if b + 1 <= hi_k:
                next_gap = net.point(b + 1) - pb
            elif space.hi < math.inf:
                next_gap = space.hi - pb
            else:
                next_gap = max(1.0, pb - net.point(b - 1))
            # sit just outside the run of net points so the between-count
            # is b - a + 1 while the divergence stays near its infimum
            t1 = pa - prev_gap / 64.0
            t2 = pb + next_gap / 64.0
            if space.contains(t1) and space.contains(t2):
                pairs.append((float(t1), float(t2)))
    for _ in range(n_random):
        ka = int(rng.integers(lo_k, hi_k))
        kb = int(rng.integers(lo_k, hi_k))
        if ka == kb:
            continue
        ka, kb = min(ka, kb), max(ka, kb)
        t1 = net.point(ka) + (rng.random() - 0.5) * 1e-3
        t2 = net.point(kb) + (rng.random() - 0.5) * 1e-3
        if t1 < t2 and space.contains(t1) and space.contains(t2):
            pairs.append((float(t1), float(t2)))
    return pairs


# ---------------------------------------------------------------------------
# Condition checks
# ---------------------------------------------------------------------------


def check_log_ratio_identity(
    bundle: FamilyBundle,
    grid_spec: GridSpec | None = None,
    tolerance: float = IDENTITY_TOL,
) -> ConditionReport:
    """|log(p_theta(x)/p_s(x)) - (d(g(x)||s) - d(g(x)||theta))| over the
    grid; points where either density vanishes are skipped and counted
    (families with parameter-dependent support satisfy the identity on
    the common support only)."""
    spec = grid_spec or default_grid_spec(bundle)
    fam = bundle.family
    net = bundle.net
    gs = np.asarray(spec.g_values, dtype=float)
    xs = [_lift(bundle, g) for g in gs]
    if fam.sample_dim > 1:
        x_arr = np.stack(xs)
    else:
        x_arr = np.asarray(xs, dtype=float)
    worst = 0.0
    witnesses: list = []
    n_eval = n_skip = 0
    for theta in spec.thetas:
        ld_theta = np.asarray(fam.log_density(theta, x_arr), dtype=float)
        d_g_theta = np.asarray(fam.divergence_fn(gs, theta), dtype=float)
        for k in spec.net_indices:
            s = net.point(k)
            ld_s = np.asarray(fam.log_density(s, x_arr), dtype=float)
            ok = np.isfinite(ld_theta) & np.isfinite(ld_s)
            n_eval += int(np.sum(ok))
            n_skip += int(np.sum(~ok))
            if not np.any(ok):
                continue
            d_g_s = np.asarray(fam.divergence_fn(gs, s), dtype=float)
            with np.errstate(invalid="ignore"):
                resid = np.abs((ld_theta - ld_s) - (d_g_s - d_g_theta))
            resid = np.where(ok, resid, 0.0)
            i = int(np.argmax(resid))
            if resid[i] > worst:
                worst = float(resid[i])
            if resid[i] > tolerance and len(witnesses) < _WITNESS_CAP:
                witnesses.append((float(theta), float(s), float(gs[i]),
                                  float(resid[i])))
    return ConditionReport(
        condition="log_ratio_identity",
        max_violation=worst if worst > tolerance else 0.0,
        tolerance=tolerance,
        passing=worst <= tolerance,
        witnesses=tuple(witnesses),
        estimated_constant=worst,
        n_evaluated=n_eval,
        n_skipped=n_skip,
    )


def estimate_cell_bound(bundle: FamilyBundle, samples: Sequence | None = None) -> float:
    """sup over samples of d(g(x) || selected net point) -- the measured
    cell constant c'.  With a declared c' in the bundle the estimate must
    not exceed it (checked by :func:`run_all_checks`)."""
    xs = default_cell_samples(bundle) if samples is None else samples
    fam = bundle.family
    est = bundle.estimator
    gs = np.array([fam.estimator_g(x) for x in xs], dtype=float)
    sel = np.array([bundle.net.point(est.index(x)) for x in xs], dtype=float)
    ds = np.asarray(fam.divergence_fn(gs, sel), dtype=float)
    return float(np.max(ds))


def check_cell_sandwich(
    bundle: FamilyBundle, samples: Sequence | None = None
) -> ConditionReport:
    """pred(s) <= pred(g(x)) and succ(g(x)) <= succ(s) for s = shat(x);
    absent neighbours (net extremes) make the comparison vacuous."""
    xs = default_cell_samples(bundle) if samples is None else samples
    fam = bundle.family
    net = bundle.net
    worst = 0.0
    witnesses: list = []
    for x in xs:
        s = bundle.estimate(x)
        g = fam.estimator_g(x)
        viol = 0.0
        ps, pg = net.pred(s), net.pred(g)
        if ps is not None and pg is not None and pg < ps:
            viol = max(viol, ps - pg)
        if ps is not None and pg is None:
            viol = max(viol, math.inf)
        ss, sg = net.succ(s), net.succ(g)
        if ss is not None and sg is not None and sg > ss:
            viol = max(viol, sg - ss)
        if ss is None and sg is not None:
            pass  # s has no successor: the right inequality is vacuous
        if sg is None and ss is not None:
            viol = max(viol, math.inf)
        if viol > worst:
            worst = viol
        if viol > 0 and len(witnesses) < _WITNESS_CAP:
            witnesses.append((None, float(s), float(g), float(viol)))
    return ConditionReport(
        condition="cell_sandwich",
        max_violation=worst,
        tolerance=0.0,
        passing=worst <= 0.0,
        witnesses=tuple(witnesses),
        n_evaluated=len(list(xs)),
    )


def check_divergence_growth(
    bundle: FamilyBundle,
    pairs: Sequence[tuple[float, float]] | None = None,
    alpha: float | None = None,
    tolerance: float = SLACK_TOL,
) -> ConditionReport:
    """Both directed divergences must clear (1 + alpha) * log(k - 1) where
    k counts net points strictly between the pair; pairs separating at
    most two net points are vacuous (the logarithm of a non-positive
    number counts as -inf).  With ``alpha=None`` the check estimates the
    largest admissible exponent instead of asserting."""
    if alpha is None and bundle.factor_inputs is not None:
        alpha = bundle.factor_inputs.alpha
    ps = default_growth_pairs(bundle) if pairs is None else pairs
    fam = bundle.family
    net = bundle.net
    worst = 0.0
    best_ratio = math.inf
    witnesses: list = []
    n_eval = 0
    for t1, t2 in ps:
        t1, t2 = (t1, t2) if t1 <= t2 else (t2, t1)
        k = net.count_between(t1, t2)
        if k <= 1:
            continue
        log_k1 = math.log(k - 1) if k >= 2 else -math.inf
        d12 = float(fam.divergence_fn(t1, t2))
        d21 = float(fam.divergence_fn(t2, t1))
        dmin = min(d12, d21)
        n_eval += 1
        if log_k1 > 0:
            best_ratio = min(best_ratio, dmin / log_k1)
        if alpha is not None:
            bound = (1.0 + alpha) * log_k1
            viol = max(0.0, bound - dmin)
            if viol > worst:
                worst = viol
            if viol > tolerance and len(witnesses) < _WITNESS_CAP:
                witnesses.append((float(t1), float(t2), float(k), float(viol)))
    estimated = (best_ratio - 1.0) if math.isfinite(best_ratio) else None
    return ConditionReport(
        condition="divergence_growth",
        max_violation=worst,
        tolerance=tolerance,
        passing=worst <= tolerance,
        witnesses=tuple(witnesses),
        estimated_constant=estimated,
        n_evaluated=n_eval,
    )


def check_reverse_triangle(
    bundle: FamilyBundle,
    triples: Sequence[tuple[float, float, float]] | None = None,
    tolerance: float = IDENTITY_TOL,
    n_triples: int = 1000,
    seed: int = 0,
) -> ConditionReport:
    """d(t1||t3) >= d(t1||t2) + d(t2||t3) on monotone triples."""
    fam = bundle.family
    if triples is None:
        rng = np.random.default_rng(seed)
        space = fam.param_space
        if space.integer:
            draws = rng.integers(0, 4096, (n_triples, 3)).astype(float)
        elif space.lo == 0.0:  # scale parameter: geometric draws
            draws = np.exp(rng.uniform(math.log(1e-3), math.log(1e3),
                                       (n_triples, 3)))
        else:
            draws = rng.uniform(-50.0, 50.0, (n_triples, 3))
        draws.sort(axis=1)
        descending = draws[: n_triples // 2, ::-1]
        triples = [tuple(row) for row in np.vstack([draws, descending])]
    worst = 0.0
    witnesses: list = []
    for t1, t2, t3 in triples:
        d13 = float(fam.divergence_fn(t1, t3))
        d12 = float(fam.divergence_fn(t1, t2))
        d23 = float(fam.divergence_fn(t2, t3))
        if math.isinf(d13):
            continue
        viol = max(0.0, (d12 + d23) - d13)
        if viol > worst:
            worst = viol
        if viol > tolerance and len(witnesses) < _WITNESS_CAP:
            witnesses.append((float(t1), float(t2), float(t3), float(viol)))
    return ConditionReport(
        condition="reverse_triangle",
        max_violation=worst,
        tolerance=tolerance,
        passing=worst <= tolerance,
        witnesses=tuple(witnesses),
        n_evaluated=len(list(triples)),
    )


def step_bounds_directed(
    bundle: FamilyBundle, index_window: Sequence[int]
) -> tuple[float, float]:
    """(min over consecutive pairs of d(lower||upper),
        min of d(upper||lower)) over the index window."""
    ks = sorted(int(k) for k in index_window)
    pts = np.array([bundle.net.point(k) for k in ks], dtype=float)
    fam = bundle.family
    d_up = np.asarray(fam.divergence_fn(pts[1:], pts[:-1]), dtype=float)
    d_dn = np.asarray(fam.divergence_fn(pts[:-1], pts[1:]), dtype=float)
    return float(np.min(d_dn)), float(np.min(d_up))


def estimate_step_lower_bound(
    bundle: FamilyBundle, index_window: Sequence[int]
) -> float:
    """min over consecutive net pairs of min(d(s||s'), d(s'||s)) -- the
    measured step constant c."""
    dn, up = step_bounds_directed(bundle, index_window)
    return min(dn, up)


# ---------------------------------------------------------------------------
# Per-bundle check suites
# ---------------------------------------------------------------------------


def _default_step_window(bundle: FamilyBundle) -> range:
    net = bundle.net
    lo = net.k_min if net.k_min is not None else -1000
    hi = net.k_max if net.k_max is not None else 1000
    return range(lo, hi + 1)


def run_all_checks(bundle: FamilyBundle, seed: int = 0) -> dict[str, ConditionReport]:
    """Every check applicable to the bundle's factor route.

    The identity and sandwich checks run for all bundles (skip counting
    covers parameter-dependent supports).  Growth runs where the bundle
    declares a growth exponent, reverse-triangle and step bounds where it
    declares a step constant.  Estimated constants are compared against
    the declared ones with ``SLACK_TOL`` slack.
    """
    reports: dict[str, ConditionReport] = {}
    reports["log_ratio_identity"] = check_log_ratio_identity(bundle)
    reports["cell_sandwich"] = check_cell_sandwich(
        bundle, default_cell_samples(bundle, seed=seed)
    )
    c_hat = estimate_cell_bound(bundle)
    declared = bundle.factor_inputs.c_prime if bundle.factor_inputs else None
    ok = True if declared is None else c_hat <= declared + SLACK_TOL
    reports["cell_bound"] = ConditionReport(
        condition="cell_bound",
        max_violation=0.0 if ok else c_hat - declared,
        tolerance=SLACK_TOL,
        passing=ok,
        estimated_constant=c_hat,
    )
    inputs = bundle.factor_inputs
    if inputs is not None and inputs.alpha is not None:
        reports["divergence_growth"] = check_divergence_growth(
            bundle, alpha=inputs.alpha
        )
    if inputs is not None and inputs.c is not None:
        reports["reverse_triangle"] = check_reverse_triangle(bundle, seed=seed)
        c_est = estimate_step_lower_bound(bundle, _default_step_window(bundle))
        ok = c_est >= inputs.c - SLACK_TOL
        reports["step_lower_bound"] = ConditionReport(
            condition="step_lower_bound",
            max_violation=0.0 if ok else inputs.c - c_est,
            tolerance=SLACK_TOL,
            passing=ok,
            estimated_constant=c_est,
        )
    return reports
