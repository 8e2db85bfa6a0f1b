"""Large-deviation rate functions of the two-temperature swapping models.

Finite state spaces are evaluated by exact summation.  For the
two-temperature diffusion on a 1D potential the rates are computed on a
tensor grid with central differences and Simpson quadrature.

Infinity is returned as ``math.inf`` (never produced by overflow: every
finite branch is a bounded sum), and serialised as the string ``"inf"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.special import xlogy

from .errors import InvalidArgumentError, UnsupportedDimensionError
from .potentials import Grid1D, PotentialModel

INF = math.inf
ROW_TOL = 1e-12
BALANCE_TOL = 1e-12
SYMMETRY_RTOL = 1e-12


def ell(z: np.ndarray) -> np.ndarray:
    """``l(z) = z log z - z + 1`` for ``z >= 0`` (with ``0 log 0 = 0``)."""
    z = np.asarray(z, dtype=float)
    return xlogy(z, z) - z + 1.0


@dataclass(frozen=True)
class FiniteChainSpec:
    """Two reversible kernels on ``n`` common states with their stationary laws.

    The product law ``mu = pi1 x pi2`` lives on ``n * n`` states indexed
    ``x1 * n + x2``.
    """

    alpha1: np.ndarray
    alpha2: np.ndarray
    pi1: np.ndarray
    pi2: np.ndarray

    def __post_init__(self):
        a1 = np.asarray(self.alpha1, dtype=float)
        a2 = np.asarray(self.alpha2, dtype=float)
        p1 = np.asarray(self.pi1, dtype=float)
        p2 = np.asarray(self.pi2, dtype=float)
        n = p1.size
        for name, a, p in (("alpha1", a1, p1), ("alpha2", a2, p2)):
            if a.shape != (n, n) or p.shape != (n,):
                raise InvalidArgumentError(f"{name} must be {n}x{n} with a length-{n} stationary law")
            if np.any(a < 0) or np.max(np.abs(a.sum(axis=1) - 1.0)) > ROW_TOL:
                raise InvalidArgumentError(f"{name} is not a stochastic matrix")
            if np.any(p <= 0) or abs(p.sum() - 1.0) > ROW_TOL:
                raise InvalidArgumentError("stationary laws must be positive and sum to one")
            flux = p[:, None] * a
            if np.max(np.abs(flux - flux.T)) > BALANCE_TOL:
                raise InvalidArgumentError(f"{name} violates detailed balance with respect to its law")
        for k, v in (("alpha1", a1), ("alpha2", a2), ("pi1", p1), ("pi2", p2)):
            object.__setattr__(self, k, v)

    @classmethod
    def from_energies(cls, values: Sequence[float], taus: tuple[float, float]) -> "FiniteChainSpec":
        """Nearest-neighbour Metropolis kernels for a tabulated potential at two temperatures."""
        from .kernels import grid_transition_matrix
        from .potentials import tabulated, tabulated_gibbs
        model = tabulated(values)
        return cls(grid_transition_matrix(model, taus[0]), grid_transition_matrix(model, taus[1]),
                   tabulated_gibbs(values, taus[0]), tabulated_gibbs(values, taus[1]))

    @property
    def n(self) -> int:
        return self.pi1.size

    @property
    def mu(self) -> np.ndarray:
        return np.outer(self.pi1, self.pi2).ravel()

    @property
    def alpha(self) -> np.ndarray:
        """Product kernel on the ``n * n`` joint states."""
        return np.kron(self.alpha1, self.alpha2)

    def swap_index(self) -> np.ndarray:
        """Index of ``(x2, x1)`` for every joint state ``(x1, x2)``."""
        n = self.n
        return np.arange(n * n).reshape(n, n).T.ravel()

    def g(self) -> np.ndarray:
        """Swap acceptance ``min(1, pi(x2, x1) / pi(x1, x2))`` per joint state."""
        mu = self.mu
        return np.minimum(1.0, mu[self.swap_index()] / mu)


def _nu_theta(spec: FiniteChainSpec, nu) -> tuple[np.ndarray, np.ndarray, bool]:
    nu = np.asarray(nu, dtype=float).ravel()
    if nu.size != spec.n ** 2:
        raise InvalidArgumentError(f"nu must have {spec.n ** 2} masses")
    if np.any(nu < 0) or abs(nu.sum() - 1.0) > 1e-12:
        raise InvalidArgumentError("nu must be a probability vector")
    mu = spec.mu
    singular = bool(np.any((mu == 0) & (nu > 0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(mu > 0, nu / mu, 0.0)
    return nu, theta, singular


def i0_rate(spec: FiniteChainSpec, nu) -> float:
    """``1 - sum_{x,y} sqrt(theta(x) theta(y)) mu(x) alpha(x, y)``."""
    nu, theta, singular = _nu_theta(spec, nu)
    if singular:
        return INF
    r = np.sqrt(theta)
    s = float(r @ (spec.mu[:, None] * spec.alpha) @ r)
    return 1.0 - s


def j_rate(spec: FiniteChainSpec, nu) -> float:
    """``sum g(x1, x2) l(sqrt(theta(x2, x1) / theta(x1, x2))) nu(x1, x2)``."""
    nu, theta, singular = _nu_theta(spec, nu)
    if singular:
        return INF
    pos = nu > 0
    z = np.sqrt(theta[spec.swap_index()][pos] / theta[pos])
    return float(np.sum(spec.g()[pos] * ell(z) * nu[pos]))


def ia_rate(spec: FiniteChainSpec, nu, a: float) -> float:
    """``I^a = I^0 + a J``, affine and nondecreasing in ``a >= 0``."""
    if a < 0:
        raise InvalidArgumentError("swap rate must be nonnegative")
    if a == INF:
        return i_infty_rate(spec, nu)
    return i0_rate(spec, nu) + a * j_rate(spec, nu)


def is_symmetric_theta(spec: FiniteChainSpec, nu, rtol: float = SYMMETRY_RTOL) -> bool:
    nu, theta, _ = _nu_theta(spec, nu)
    pos = nu > 0
    swapped = theta[spec.swap_index()]
    return bool(np.all(np.abs(theta[pos] - swapped[pos]) <= rtol * np.maximum(theta[pos], swapped[pos])))


def i_infty_rate(spec: FiniteChainSpec, nu) -> float:
    """``I^0(nu)`` when ``theta`` is symmetric under exchange, otherwise infinity."""
    if not is_symmetric_theta(spec, nu):
        return INF
    return i0_rate(spec, nu)


# ---------------------------------------------------------------------------
# two-temperature diffusion on a 1D potential
# ---------------------------------------------------------------------------

def diffusion_rates_1d(model: PotentialModel, taus: tuple[float, float], grid: Grid1D,
                       nu_density: Callable[[np.ndarray, np.ndarray], np.ndarray] | np.ndarray
                       ) -> tuple[float, float]:
    """``(J0, J1)`` of a smooth density ``nu`` on the square ``grid x grid``.

    ``J0 = (1/8) int [tau1 |d1 log theta|^2 + tau2 |d2 log theta|^2] dnu`` and
    ``J1 = int g l(sqrt(theta(x2, x1) / theta(x1, x2))) dnu``, with
    ``theta = dnu/dmu``.  ``nu_density`` may be unnormalised; it is either a
    callable of the meshgrid arrays ``(x1, x2)`` or an array of grid values.
    """
    if model.dim != 1:
        raise UnsupportedDimensionError(f"diffusion rates need a 1D model, got d={model.dim}")
    t1, t2 = (float(t) for t in taus)
    if not (t1 > 0 and t2 > 0):
        raise InvalidArgumentError("temperatures must be positive")
    x = grid.points
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    nu = np.asarray(nu_density(X1, X2) if callable(nu_density) else nu_density, dtype=float)
    if nu.shape != X1.shape:
        raise InvalidArgumentError(f"density must have shape {X1.shape}")
    if np.any(nu < 0):
        raise InvalidArgumentError("density must be nonnegative")
    v = model.energy(x[:, None])
    log_mu = -v[:, None] / t1 - v[None, :] / t2
    log_mu -= log_mu.max()
    mu = np.exp(log_mu)
    mu /= simpson(simpson(mu, x=x, axis=1), x=x)
    nu = nu / simpson(simpson(nu, x=x, axis=1), x=x)
    interior = nu[1:-1, 1:-1]
    if np.any(interior <= 0):
        return INF, INF
    with np.errstate(divide="ignore"):
        log_theta = np.log(nu) - np.log(mu)
    log_theta = np.where(np.isfinite(log_theta), log_theta, 0.0)
    d1, d2 = np.gradient(log_theta, x, x)
    integrand0 = 0.125 * (t1 * d1 * d1 + t2 * d2 * d2) * nu
    J0 = float(simpson(simpson(integrand0, x=x, axis=1), x=x))
    # g = min(1, pi(x2, x1) / pi(x1, x2)) and the ratio theta(x2, x1) / theta(x1, x2)
    log_g = np.minimum(0.0, log_mu.T - log_mu)
    z = np.exp(0.5 * (log_theta.T - log_theta))
    integrand1 = np.exp(log_g) * ell(z) * nu
    J1 = float(simpson(simpson(integrand1, x=x, axis=1), x=x))
    return max(J0, 0.0), max(J1, 0.0)
