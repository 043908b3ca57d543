"""Why the estimator must coarsen: the maximum-likelihood failure.

Selecting the component at the maximum-likelihood estimate itself --
shat(x) = x for the Poisson family -- admits components that are each
perfectly valid for their own rate yet blow up in combination.  Take
e_n = 1{x = n} / P_n({n}), the inverse own-probability spike: its value
at the selected index is exp(x) x! / x^x ~ sqrt(2 pi x), so the
expectation under rate lambda grows like sqrt(2 pi lambda) and outruns
every fixed normalizing constant.

The net-based estimators avoid this by quantizing to cells whose own
probability stays bounded away from zero.
"""

import math

from evarify import make_bundle, mle_counterexample_poisson

print(f"{'lambda':>10s} {'E[exp(X) X!/X^X]':>18s} {'sqrt(2 pi lambda)':>18s}")
for lam in (1, 4, 20, 25, 100, 400, 2000, 10_000):
    value = mle_counterexample_poisson(float(lam))
    anchor = math.sqrt(2.0 * math.pi * lam)
    print(f"{lam:10.1f} {value:18.4f} {anchor:18.4f}")

bundle = make_bundle("poisson")
print(f"\nthe shipped factor C = {bundle.factor_C:.4f} is overtaken "
      f"once sqrt(2 pi lambda) > C, i.e. lambda > {bundle.factor_C**2 / (2*math.pi):.1f}")
lam = 2000.0
print(f"at lambda = {lam:g}: E / C = "
      f"{mle_counterexample_poisson(lam) / bundle.factor_C:.3f} > 1")
print("\n(the CLI equivalent exits with status 2:"
      " `evarify counterexample --family poisson --lambda 100`)")
