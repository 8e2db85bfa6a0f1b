import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from inswap.errors import InvalidArgumentError, UnsupportedDimensionError
from inswap.ldp import (FiniteChainSpec, diffusion_rates_1d, ell, i0_rate, i_infty_rate, ia_rate, is_symmetric_theta,
                        j_rate)
from inswap.potentials import Grid1D, double_well, harmonic

# hand-built reversible two-state kernels
ALPHA1 = np.array([[0.7, 0.3], [0.6, 0.4]])  # stationary (2/3, 1/3)
ALPHA2 = np.array([[0.5, 0.5], [0.5, 0.5]])  # stationary (1/2, 1/2)
PI1 = np.array([2 / 3, 1 / 3])
PI2 = np.array([0.5, 0.5])


@pytest.fixture
def spec2():
    return FiniteChainSpec(ALPHA1, ALPHA2, PI1, PI2)


def _oracle_i0_j(nu):
    # explicit loops over joint states (x1, x2) -> index 2 * x1 + x2
    mu = {(a, b): PI1[a] * PI2[b] for a in range(2) for b in range(2)}
    th = {k: nu[2 * k[0] + k[1]] / mu[k] for k in mu}
    s = 0.0
    for (a, b) in mu:
        for (c, d) in mu:
            s += math.sqrt(th[a, b] * th[c, d]) * mu[a, b] * ALPHA1[a, c] * ALPHA2[b, d]
    j = 0.0
    for (a, b) in mu:
        g = min(1.0, mu[b, a] / mu[a, b])
        z = math.sqrt(th[b, a] / th[a, b])
        j += g * (z * math.log(z) - z + 1) * nu[2 * a + b]
    return 1.0 - s, j


def test_ell_examples():
    assert ell(1.0) == 0.0
    assert ell(0.0) == 1.0
    assert ell(math.e) == pytest.approx(1.0, abs=1e-15)


def test_rates_vanish_at_mu(spec2):
    mu = spec2.mu
    assert abs(i0_rate(spec2, mu)) < 1e-14
    assert j_rate(spec2, mu) == 0.0
    assert is_symmetric_theta(spec2, mu)


def test_hand_assembled_two_state_oracle(spec2):
    nu = np.array([0.4, 0.1, 0.3, 0.2])
    i0, j = _oracle_i0_j(nu)
    assert i0_rate(spec2, nu) == pytest.approx(i0, abs=1e-14)
    assert j_rate(spec2, nu) == pytest.approx(j, abs=1e-14)
    assert i0 > 0 and j > 0
    for a in (0.0, 1.0, 10.0):
        assert ia_rate(spec2, nu, a) == pytest.approx(i0 + a * j, abs=1e-13)
    assert ia_rate(spec2, nu, math.inf) == math.inf


def test_j_zero_iff_symmetric_theta(spec2, rng_np):
    mu = spec2.mu
    swap = spec2.swap_index()
    for _ in range(50):
        nu = rng_np.dirichlet(np.ones(4))
        theta = nu / mu
        sym = 0.5 * (theta + theta[swap]) * mu
        sym /= sym.sum()
        assert j_rate(spec2, sym) < 1e-14
        assert is_symmetric_theta(spec2, sym)
        assert i_infty_rate(spec2, sym) == pytest.approx(i0_rate(spec2, sym), abs=1e-15)
        assert (j_rate(spec2, nu) > 0) == (not is_symmetric_theta(spec2, nu))


def test_affine_monotone_and_infinite_limit(rng_np):
    spec = FiniteChainSpec.from_energies([0.0, 0.8, 0.2], (0.4, 1.2))
    for _ in range(30):
        nu = rng_np.dirichlet(np.ones(9))
        r = [ia_rate(spec, nu, a) for a in (0.0, 1.0, 2.0, 10.0)]
        assert r[2] - r[1] == pytest.approx(r[1] - r[0], rel=1e-10)
        assert r[3] == pytest.approx(r[0] + 10 * (r[1] - r[0]), rel=1e-10)
        assert all(b >= a - 1e-15 for a, b in zip(r, r[1:]))
        assert i_infty_rate(spec, nu) >= r[-1]


def test_rate_argument_validation(spec2):
    zero_pi = FiniteChainSpec(np.eye(2), np.eye(2), np.array([0.5, 0.5]), np.array([0.5, 0.5]))
    assert i0_rate(zero_pi, [0.25] * 4) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(InvalidArgumentError):
        i0_rate(spec2, [0.5, 0.5, 0.5, -0.5])
    with pytest.raises(InvalidArgumentError):
        ia_rate(spec2, spec2.mu, -1.0)


def test_spec_validation():
    with pytest.raises(InvalidArgumentError, match="stochastic"):
        FiniteChainSpec(np.array([[0.5, 0.4], [0.5, 0.5]]), ALPHA2, PI1, PI2)
    with pytest.raises(InvalidArgumentError, match="detailed balance"):
        FiniteChainSpec(ALPHA1, ALPHA2, np.array([0.5, 0.5]), PI2)


# -- diffusion -------------------------------------------------------------------

def _gauss(s1, s2):
    return lambda x1, x2: np.exp(-0.5 * (x1 / s1) ** 2 - 0.5 * (x2 / s2) ** 2)


def test_diffusion_rates_gaussian_oracle():
    k, taus, s1, s2 = 1.0, (0.5, 1.5), 0.9, 0.8
    grid = Grid1D(-9.0, 9.0, 1201)
    J0, J1 = diffusion_rates_1d(harmonic(k), taus, grid, _gauss(s1, s2))
    exact0 = 0.125 * (taus[0] * (k / taus[0] - 1 / s1 ** 2) ** 2 * s1 ** 2
                      + taus[1] * (k / taus[1] - 1 / s2 ** 2) ** 2 * s2 ** 2)
    assert J0 == pytest.approx(exact0, rel=1e-4)

    def log_theta(a, b):
        return (-0.5 * (a / s1) ** 2 - 0.5 * (b / s2) ** 2) + k * a * a / (2 * taus[0]) + k * b * b / (2 * taus[1])

    def integrand(b, a):
        nu = math.exp(-0.5 * (a / s1) ** 2 - 0.5 * (b / s2) ** 2) / (2 * math.pi * s1 * s2)
        lg = min(0.0, -(k * b * b / 2) / taus[0] - (k * a * a / 2) / taus[1]
                 + (k * a * a / 2) / taus[0] + (k * b * b / 2) / taus[1])
        z = math.exp(0.5 * (log_theta(b, a) - log_theta(a, b)))
        return math.exp(lg) * (z * math.log(z) - z + 1) * nu

    exact1, _ = dblquad(integrand, -8, 8, -8, 8, epsabs=1e-11)
    assert J1 == pytest.approx(exact1, rel=1e-4)


def test_diffusion_rates_vanish_at_mu():
    taus = (0.4, 1.0)
    model = double_well(4.0, 0.5)
    nu = lambda a, b: np.exp(-model.energy(a[..., None]) / taus[0] - model.energy(b[..., None]) / taus[1])
    J0, J1 = diffusion_rates_1d(model, taus, Grid1D(-2.5, 2.5, 801), nu)
    assert J0 < 1e-10 and J1 < 1e-10


def test_diffusion_grid_refinement_within_one_percent():
    model = double_well(4.0, 0.5)
    taus = (0.5, 1.0)

    def nu(a, b):
        # bounded, exchange-asymmetric density ratio against mu
        theta = 1.0 + 0.5 * np.tanh(2.0 * a - b)
        return theta * np.exp(-model.energy(a[..., None]) / taus[0] - model.energy(b[..., None]) / taus[1])

    coarse = diffusion_rates_1d(model, taus, Grid1D(-2.5, 2.5, 201), nu)
    fine = diffusion_rates_1d(model, taus, Grid1D(-2.5, 2.5, 401), nu)
    for c, f in zip(coarse, fine):
        assert c > 0 and abs(c - f) <= 0.01 * f


def test_diffusion_requires_1d():
    with pytest.raises(UnsupportedDimensionError):
        diffusion_rates_1d(harmonic(1.0, 2), (0.5, 1.0), Grid1D(-3, 3, 101), _gauss(1, 1))
