"""Building composite e-variables and estimating their expectations.

A composite selects one per-net-point component by the estimator and
divides by the bundle's factor.  Components valid for their own simple
hypothesis can be anything non-negative with unit expected value or
less: constants, likelihood ratios, calibrated p-values, or the
adversarial "spike" (the reciprocal cell probability on its own cell).
"""

from evarify import (
    combine_discrete,
    constant_evar,
    expectation,
    likelihood_ratio_evar,
    make_bundle,
    spike_evar,
)

pois = make_bundle("poisson")

# all-ones components: the composite is the constant 1/C, and its
# expectation under any rate equals 1/C
ones = combine_discrete(pois, {})
res = expectation(ones, 7.3)
print(f"all-ones composite:   E_7.3 = {res.estimate:.6f}  (1/C = {1/pois.factor_C:.6f})")

# a likelihood-ratio component at the net point 9 against the
# alternative rate 12, plus a constant elsewhere
components = {
    3: likelihood_ratio_evar(pois.family, 9.0, 12.0),  # valid for rate 9
    2: constant_evar(0.8),
}
comp = combine_discrete(pois, components)
print(f"mixed composite at x=10:   e(10) = {comp(10):.6f}")
print(f"mixed composite at x=4:    e(4)  = {comp(4):.6f}")

# spikes: the tightest component the constraint allows; its expectation
# under its own net point is exactly 1
spike9 = spike_evar(pois, 3)
print(f"\nspike at 9: level {spike9.level:.4f} on the cell 7..12")
own = expectation(spike9, 9.0, pois)
print(f"E_9[spike_9] = {own.estimate:.12f}  (exactly 1 by construction)")

# under a *different* rate the spike can exceed 1 -- that is what the
# factor C absorbs once the estimator selects components
off = expectation(spike9, 10.5, pois)
print(f"E_10.5[spike_9] = {off.estimate:.6f}")

# expectations carry explicit error bounds and the method used
full = combine_discrete(pois, {3: spike9})
res = expectation(full, 10.5)
print(f"\ncomposite with the spike: E_10.5 = {res.estimate:.9f} "
      f"+/- {res.error_bound:.2e} [{res.method}]")
