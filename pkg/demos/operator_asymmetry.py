"""The two compound lower/upper bound pairs on synthetic sequences.

For two uniform states on [0, 2] and [1, 3] the all-state bounds sit at the
outer ends (0 and 3) and the any-state bounds at the inner ends (1 and 2).
For Bernoulli variables with success probability s/(n+s) every fixed state
collapses to 0, yet a state coupled to n keeps the best-state lower bound at
1, above the best-state upper bound.

Run:  python3 demos/operator_asymmetry.py
"""
from compoundlab.props import property_suite
from compoundlab.spectrum import estimate_bounds
from compoundlab.synthetic import coupled_bernoulli, uniform_pair

pair = uniform_pair(trials=50_000, seed=1)
b = estimate_bounds(pair, 0.01, n_boot=0)
print("uniform pair:", {k: round(v, 3) for k, v in b.limit.items()})

bern = coupled_bernoulli(trials=50_000, seed=1)
b = estimate_bounds(bern, 0.02, n_boot=0)
print("coupled Bernoulli:", {k: round(v, 3) for k, v in b.limit.items()})
for lab in bern.fixed_labels:
    d = b.limit_per_state[lab]
    print(f"    {lab:>9}: uln_s = {d['uln_s']:.3f}, oln_s = {d['oln_s']:.3f}")

failed = [c["check"] for c in property_suite(pair) if not c["passed"]]
print("property suite on the uniform pair:", "all passed" if not failed else failed)
