"""Potential-energy models, Gibbs log-densities and 1D quadrature references.

All models are vectorised over leading axes: ``energy(x)`` accepts an array
of shape ``(..., d)`` and returns shape ``(...)``; ``gradient`` returns
``(..., d)``.  Reduced Lennard-Jones units (epsilon = sigma = 1) throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.integrate import simpson
from scipy.special import logsumexp

from .errors import InvalidArgumentError, SingularConfigurationError, UnsupportedDimensionError


class PotentialModel:
    """Base class: subclasses implement ``_energy`` and ``_energy_grad``.

    The underscore variants never raise on singular inputs; they return
    ``inf`` energies so that kernels can reject such proposals.  The public
    methods raise :class:`SingularConfigurationError` instead.
    """

    name: str = "potential"
    dim: int = 1

    @property
    def params(self) -> dict[str, Any]:
        return {}

    @property
    def descriptor(self) -> dict[str, Any]:
        return {"name": self.name, "params": self.params}

    def _energy(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _energy_grad(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _check(self, e, x):
        if not np.all(np.isfinite(e)):
            raise SingularConfigurationError(f"{self.name}: energy is not finite at the given configuration")
        return e

    def energy(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        e = self._energy(x)
        self._check(e, x)
        return float(e) if np.ndim(e) == 0 else e

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        e, g = self._energy_grad(x)
        self._check(e, x)
        return g

    def energy_grad(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        e, g = self._energy_grad(x)
        self._check(e, x)
        return e, g


@dataclass(frozen=True, eq=False)
class DoubleWell(PotentialModel):
    """``V(x) = barrier * (x^2 - 1)^2 + asymmetry * x`` on the real line."""

    barrier: float = 4.0
    asymmetry: float = 0.0
    name: str = field(default="double_well", init=False)
    dim: int = field(default=1, init=False)

    @property
    def params(self):
        return {"barrier": self.barrier, "asymmetry": self.asymmetry}

    def _energy(self, x):
        x = x[..., 0]
        return self.barrier * (x * x - 1.0) ** 2 + self.asymmetry * x

    def _energy_grad(self, x):
        y = x[..., 0]
        u = y * y - 1.0
        e = self.barrier * u * u + self.asymmetry * y
        g = 4.0 * self.barrier * y * u + self.asymmetry
        return e, g[..., None]


@dataclass(frozen=True, eq=False)
class Harmonic(PotentialModel):
    """Isotropic ``V(x) = stiffness * |x|^2 / 2`` in ``dim`` dimensions."""

    stiffness: float = 1.0
    dim: int = 1
    name: str = field(default="harmonic", init=False)

    @property
    def params(self):
        return {"stiffness": self.stiffness, "dim": self.dim}

    def _energy(self, x):
        return 0.5 * self.stiffness * np.sum(x * x, axis=-1)

    def _energy_grad(self, x):
        return self._energy(x), self.stiffness * x


@dataclass(frozen=True, eq=False)
class Tabulated(PotentialModel):
    """Energies on the integer lattice ``0..n-1``; used for enumerable toys.

    Positions are floats holding integer values.  Off-lattice positions have
    infinite energy, so a Metropolis kernel never accepts them.
    """

    values: tuple[float, ...]
    name: str = field(default="tabulated", init=False)
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "_table", np.append(np.asarray(self.values), np.inf))

    @property
    def params(self):
        return {"values": list(self.values)}

    @property
    def n_points(self) -> int:
        return len(self.values)

    def _energy(self, x):
        i = np.rint(x[..., 0]).astype(np.intp)
        i = np.where((i < 0) | (i >= self.n_points), self.n_points, i)
        return self._table[i]

    def _energy_grad(self, x):
        return self._energy(x), np.zeros_like(x)


@dataclass(frozen=True, eq=False)
class LennardJonesCluster(PotentialModel):
    """Pairwise ``4 (r^-12 - r^-6)`` plus a quartic container about the centre of mass.

    Each atom whose distance from the cluster centre of mass exceeds
    ``container_radius`` pays ``container_strength * excess^4``.
    """

    n_atoms: int
    container_radius: float
    container_strength: float = 1.0
    name: str = field(default="lennard_jones", init=False)

    def __post_init__(self):
        if self.n_atoms < 2:
            raise InvalidArgumentError("need at least two atoms")
        if self.container_radius <= 0:
            raise InvalidArgumentError("container radius must be positive")
        object.__setattr__(self, "_iu", np.triu_indices(self.n_atoms, k=1))

    @property
    def dim(self) -> int:
        return 3 * self.n_atoms

    @property
    def params(self):
        return {
            "n_atoms": self.n_atoms,
            "container_radius": self.container_radius,
            "container_strength": self.container_strength,
        }

    def pair_energy(self, x) -> np.ndarray:
        """Lennard-Jones part only, without the container."""
        r = np.asarray(x, dtype=float).reshape(np.shape(x)[:-1] + (self.n_atoms, 3))
        diff = r[..., :, None, :] - r[..., None, :, :]
        r2 = np.sum(diff * diff, axis=-1)[(...,) + self._iu]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv6 = 1.0 / r2**3
            e = np.sum(4.0 * (inv6 * inv6 - inv6), axis=-1)
        e = np.where(np.any(r2 == 0.0, axis=-1), np.inf, e)
        return self._check(e, x)

    def _energy(self, x):
        e, _ = self._energy_grad(x, need_grad=False)
        return e

    def _energy_grad(self, x, need_grad=True):
        n = self.n_atoms
        r = x.reshape(x.shape[:-1] + (n, 3))
        diff = r[..., :, None, :] - r[..., None, :, :]
        r2 = np.sum(diff * diff, axis=-1)
        eye = np.eye(n, dtype=bool)
        singular = np.any((r2 == 0.0) & ~eye, axis=(-1, -2))
        r2 = np.where(eye, 1.0, r2)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            inv2 = 1.0 / r2
            inv6 = inv2 * inv2 * inv2
            pair = np.where(eye, 0.0, 4.0 * (inv6 * inv6 - inv6))
            e = 0.5 * np.sum(pair, axis=(-1, -2))
            com = r.mean(axis=-2, keepdims=True)
            rel = r - com
            dist = np.sqrt(np.sum(rel * rel, axis=-1))
            excess = np.maximum(dist - self.container_radius, 0.0)
            e = e + self.container_strength * np.sum(excess**4, axis=-1)
            e = np.where(singular, np.inf, e)
            if not need_grad:
                return e, None
            # dV/dr_i = sum_j coef_ij (r_i - r_j),  coef = dphi/dr / r
            coef = np.where(eye, 0.0, (-48.0 * inv6 * inv6 + 24.0 * inv6) * inv2)
            g = np.sum(coef[..., None] * diff, axis=-2)
            safe = np.where(dist > 0, dist, 1.0)
            radial = (4.0 * self.container_strength * excess**3 / safe)[..., None] * rel
            # the centre of mass depends on every atom; subtract the mean force
            g = g + radial - radial.mean(axis=-2, keepdims=True)
            g = np.where(singular[..., None, None], np.nan, g)
        return e, g.reshape(x.shape)


def double_well(barrier: float, asymmetry: float = 0.0) -> DoubleWell:
    if barrier <= 0:
        raise InvalidArgumentError("barrier must be positive")
    return DoubleWell(float(barrier), float(asymmetry))


def harmonic(stiffness: float = 1.0, dim: int = 1) -> Harmonic:
    return Harmonic(float(stiffness), int(dim))


def tabulated(values) -> Tabulated:
    return Tabulated(tuple(values))


def default_container_radius(n_atoms: int) -> float:
    return 2.5 * n_atoms ** (1.0 / 3.0)


def lennard_jones_cluster(n_atoms: int, container_radius: float | None = None,
                          container_strength: float = 1.0) -> LennardJonesCluster:
    if container_radius is None:
        container_radius = default_container_radius(n_atoms)
    return LennardJonesCluster(int(n_atoms), float(container_radius), float(container_strength))


_FACTORIES: dict[str, Callable[..., PotentialModel]] = {
    "double_well": double_well,
    "harmonic": harmonic,
    "tabulated": tabulated,
    "lennard_jones": lennard_jones_cluster,
}


def from_descriptor(name: str, params: dict[str, Any] | None = None) -> PotentialModel:
    """Build a potential from its config name and parameter map."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown potential {name!r}; expected one of {sorted(_FACTORIES)}") from None
    return factory(**(params or {}))


def gibbs_log_density(model: PotentialModel, tau: float, x) -> float | np.ndarray:
    """Unnormalised log-density ``-V(x) / tau``."""
    if tau <= 0:
        raise InvalidArgumentError("temperature must be positive")
    return -model.energy(x) / tau


@dataclass(frozen=True)
class Grid1D:
    lo: float
    hi: float
    n: int = 20001

    def __post_init__(self):
        if not self.hi > self.lo:
            raise InvalidArgumentError("grid upper bound must exceed lower bound")
        if self.n < 3:
            raise InvalidArgumentError("grid needs at least three points")
        if self.n % 2 == 0:
            # Simpson's rule wants an even number of intervals
            object.__setattr__(self, "n", self.n + 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


def quadrature_mean_energy(model: PotentialModel, tau: float, grid: Grid1D, tail_tol: float = 1e-12) -> float:
    """``<V>_tau`` by composite Simpson quadrature on a 1D grid.

    The Boltzmann factor is shifted by its maximum log value before
    exponentiation.  Raises if the grid edges carry more than ``tail_tol``
    of the mass (relative to the peak), i.e. the grid does not cover the
    support.
    """
    if model.dim != 1:
        raise UnsupportedDimensionError(f"quadrature needs a 1D model, got d={model.dim}")
    if tau <= 0:
        raise InvalidArgumentError("temperature must be positive")
    x = grid.points
    v = model.energy(x[:, None])
    logp = -v / tau
    shift = np.max(logp)
    p = np.exp(logp - shift)
    if max(p[0], p[-1]) > tail_tol:
        raise InvalidArgumentError(f"grid [{grid.lo}, {grid.hi}] truncates the Boltzmann tail")
    z = simpson(p, x=x)
    return float(simpson(v * p, x=x) / z)


def log_partition_1d(model: PotentialModel, tau: float, grid: Grid1D) -> float:
    """``log int exp(-V/tau) dx`` on the grid (Simpson, shifted)."""
    x = grid.points
    logp = -model.energy(x[:, None]) / tau
    shift = float(np.max(logp))
    return shift + math.log(simpson(np.exp(logp - shift), x=x))


def tabulated_gibbs(values, tau: float) -> np.ndarray:
    """Normalised Gibbs probabilities of a tabulated potential."""
    logp = -np.asarray(values, dtype=float) / tau
    return np.exp(logp - logsumexp(logp))
