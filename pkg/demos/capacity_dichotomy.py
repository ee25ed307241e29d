"""Bounded versus growing interference on a binary block-jamming channel.

A jammer flips the first s symbols of each block with a fair coin.  When s
stays below a fixed bound the jammed fraction vanishes as n grows and one
codebook reaches rate 1 for every state.  When s may grow like n the same
codebook must survive a fully jammed block, so the compound capacity drops
to 0 while the capacity with the state known at the transmitter stays 1.

Run:  python3 demos/capacity_dichotomy.py
"""
from compoundlab.capacity import capacity_report, closed_form
from compoundlab.converse import converse_from_samples
from compoundlab.noise import BlockInterference, StateSchedule
from compoundlab.spectrum import EstimationSettings, estimate_bounds, sample_densities

settings = EstimationSettings(trials=4000, n_boot=50, seed=7)
model = BlockInterference(2)

for name, schedule in [("bounded, s <= 8", StateSchedule.bounded(8)),
                       ("unbounded, s(n) in {n/2, n}", StateSchedule([1, 2, 4, 8], [0.5, 1.0]))]:
    samples = sample_densities(model, schedule, settings.n_grid, settings.trials, settings.seed)
    bounds = estimate_bounds(samples, settings.epsilon, n_boot=settings.n_boot, seed=settings.seed)
    conv = converse_from_samples(samples, bounds, settings)
    est = capacity_report(bounds, model.M, conv.uniformity_verdict)
    ref = closed_form(1, {"M": 2, "bounded": schedule.is_bounded})
    print(f"{name}")
    print(f"    compound capacity  {est.C_compound:.4f}   (closed form {ref.C_compound:.4f})")
    print(f"    worst-case (Tx knows s)  {est.C_worst:.4f}   (closed form {ref.C_worst:.4f})")
    print(f"    gain from Tx state knowledge  {est.delta_C:.4f}")
    print(f"    uniformity: {conv.uniformity_verdict}, strong converse: {conv.verdict}")
