"""Random-coding error rates with and without a strong converse.

With i.i.d. Ber(0.05) noise the error rate falls with n below capacity and
climbs toward 1 above it.  With a mixture that draws Ber(0.2) noise for the
whole block with probability 0.3 (and Ber(0.05) otherwise), a rate between
the two component capacities fails only when the bad component is drawn, so
the error rate settles near 0.3 instead of approaching 0 or 1.

Run:  python3 demos/error_plateau.py
"""
from compoundlab.alphabet import IsiMap
from compoundlab.coding import run_cell
from compoundlab.noise import ErgodicMixture, IidGeneric
from compoundlab.presets import mixture_outage_oracle

g = IsiMap(0)
bsc = IidGeneric.bernoulli(0.05)
mix = ErgodicMixture(IidGeneric.bernoulli(0.2), IidGeneric.bernoulli(0.05), 0.3)

print("rate   n   Ber(0.05)  mixture")
for R in (0.25, 0.5, 0.95):
    for n in (20, 40, 60):
        e1 = run_cell(bsc, "s=1", 1, 0, g, n, R, 2000, 3, method="ensemble").error_rate
        e2 = run_cell(mix, "s=1", 1, 0, g, n, R, 2000, 3, method="ensemble").error_rate
        print(f"{R:4.2f} {n:4d}   {e1:8.4f}  {e2:8.4f}")

for n in (100, 1000, 4000):
    print(f"information-density outage at R=0.5, n={n}: "
          f"{mixture_outage_oracle(0.5, n, 20_000, 0):.4f}")
