# Relaxation after heating
#
# Each cycle heats the cold slot to temperature 1.0 for the first 100 moves,
# then restores the ladder.  Averaging the slot-1 weighted energy over many
# cycles gives a curve per move index; how quickly it returns to the
# equilibrium value measures how well the sampler moves mass between wells.

import math

import numpy as np

from inswap.harness import parse_config, run_relaxation
from inswap.potentials import Grid1D, double_well, quadrature_mean_energy

model = double_well(4.0, 0.5)
truth = quadrature_mean_energy(model, 0.3, Grid1D(-4.0, 4.0, 20001))


def study(sampler, seed=0, cycles=1000):
    return run_relaxation(parse_config({
        "potential": {"name": "double_well", "params": {"barrier": 4.0, "asymmetry": 0.5}},
        "ladder": [0.3, 1.0],
        "kernel": {"step_size": [0.5, 0.8]},
        "sampler": sampler, "seed": seed, "initial": -1.0,
        "relaxation": {"cycle_moves": 300, "heat_window": [0, 100], "heated_slots": 1, "heated_floor": 1.0,
                       "n_cycles": cycles, "truth": truth, "window": 5,
                       "epsilon": 3 * 0.2880128405243028 / math.sqrt(cycles)},
    }))


curves = {"INS": study({"kind": "ins"}),
          "PT N=10": study({"kind": "pt", "period": 10}),
          "PT N=100": study({"kind": "pt", "period": 100})}

print("move  " + "  ".join(f"{k:>9s}" for k in curves))
for k in range(90, 300, 15):
    print(f"{k:4d}  " + "  ".join(f"{c.mean[k]:9.4f}" for c in curves.values()))
print(f"truth {truth:.4f}")

for label, c in curves.items():
    t = c.time if c.time is not None else "not relaxed"
    print(f"{label:9s} relaxation time: {t}")
