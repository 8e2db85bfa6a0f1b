# Large-deviation rates of a two-temperature swapping chain
#
# For a finite chain the rate I^a(nu) = I^0(nu) + a J(nu) measures how fast
# the empirical measure stops looking like nu.  J vanishes exactly when
# nu / mu is symmetric under exchanging the two coordinates, so faster
# swapping only helps against asymmetric deviations.

import numpy as np

from inswap.ldp import FiniteChainSpec, diffusion_rates_1d, i0_rate, ia_rate, j_rate
from inswap.potentials import Grid1D, double_well


# Three lattice points with energies 0, 0.8, 0.2, nearest-neighbour Metropolis
# kernels at temperatures 0.4 and 1.2.

spec = FiniteChainSpec.from_energies([0.0, 0.8, 0.2], (0.4, 1.2))
mu = spec.mu
print("mu on the 9 joint states:", np.round(mu, 4))

rng = np.random.default_rng(0)
nu = rng.dirichlet(np.ones(9))
theta = nu / mu
sym = 0.5 * (theta + theta[spec.swap_index()]) * mu
sym /= sym.sum()

print(f"{'a':>6s} {'I^a(nu)':>10s} {'I^a(sym)':>10s}")
for a in (0.0, 1.0, 10.0, 100.0, np.inf):
    print(f"{a:6g} {ia_rate(spec, nu, a):10.5f} {ia_rate(spec, sym, a):10.5f}")

print("I^0 and J of nu:", round(i0_rate(spec, nu), 6), round(j_rate(spec, nu), 6))
print("J of the symmetrised measure:", j_rate(spec, sym))


# The same two pieces for the diffusion on the double well, computed on a grid.

model, taus = double_well(4.0, 0.5), (0.5, 1.0)


def tilted(x1, x2):
    theta = 1.0 + 0.5 * np.tanh(2.0 * x1 - x2)
    return theta * np.exp(-model.energy(x1[..., None]) / taus[0] - model.energy(x2[..., None]) / taus[1])


for n in (101, 201, 401):
    J0, J1 = diffusion_rates_1d(model, taus, Grid1D(-2.5, 2.5, n), tilted)
    print(f"grid {n:4d}: J0 = {J0:.6f}  J1 = {J1:.6f}")
