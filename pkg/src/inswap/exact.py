"""Exact transition matrices of the samplers on enumerable toy problems.

A toy has a :class:`~inswap.potentials.Tabulated` potential on ``n`` lattice
points and K temperature slots; the joint state space has ``n**K`` states
indexed in C order (slot 1 most significant).  Coordinates move with the
``grid-metropolis`` kernel.  These matrices are the oracles for the
stationarity checks: each is assembled directly from the definitions, with
weights computed by plain enumeration rather than through the factor-wise
code used by the samplers.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .kernels import grid_transition_matrix
from .permgroup import PermutationSet
from .potentials import Tabulated


class Toy:
    """Enumerated joint state space of ``K`` coordinates on ``n`` lattice points."""

    def __init__(self, model: Tabulated, taus: Sequence[float]):
        self.model = model
        self.taus = np.asarray(taus, dtype=float)
        self.K = self.taus.size
        self.n = model.n_points
        self.values = np.asarray(model.values, dtype=float)
        self.states = np.array(np.unravel_index(np.arange(self.n ** self.K), (self.n,) * self.K)).T
        self.energies = self.values[self.states]

    @property
    def size(self) -> int:
        return self.states.shape[0]

    def index(self, y: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(tuple(np.asarray(y).T), (self.n,) * self.K)

    def permuted_index(self, sigma: np.ndarray) -> np.ndarray:
        """Index of ``y_sigma`` (slot i holds ``y[sigma(i)]``) for every state ``y``."""
        return self.index(self.states[:, sigma])

    # -- laws ---------------------------------------------------------------

    def log_pi(self, sigma: np.ndarray | None = None) -> np.ndarray:
        """``log pi(y_sigma)`` (unnormalised) for every state."""
        e = self.energies if sigma is None else self.energies[:, sigma]
        return -(e / self.taus).sum(axis=1)

    def mu(self) -> np.ndarray:
        """Product Gibbs law ``mu(y) = prod_i pi_i(y_i)``."""
        lp = self.log_pi()
        return np.exp(lp - logsumexp(lp))

    def symmetrized(self, pset: PermutationSet) -> np.ndarray:
        """``(1/|A|) sum_{sigma in A} mu(y_sigma)``."""
        mu = self.mu()
        return np.mean([mu[self.permuted_index(s)] for s in pset.table], axis=0)

    def weights(self, pset: PermutationSet) -> np.ndarray:
        """``w[y, s] = pi(y_sigma_s) / sum_theta pi(y_theta)`` by direct enumeration."""
        lp = np.stack([self.log_pi(s) for s in pset.table], axis=1)
        return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))

    # -- kernels --------------------------------------------------------------

    def move_matrix(self, temps: Sequence[float]) -> np.ndarray:
        """Independent grid moves, coordinate c at temperature ``temps[c]``."""
        mats = [grid_transition_matrix(self.model, float(t)) for t in temps]
        return reduce(np.kron, mats)

    def swap_matrix(self, i: int, j: int) -> np.ndarray:
        """Metropolis exchange of slots ``i`` and ``j`` (0-based)."""
        e = self.energies
        t = self.taus
        with np.errstate(over="ignore"):
            acc = np.minimum(1.0, np.exp((1.0 / t[i] - 1.0 / t[j]) * (e[:, i] - e[:, j])))
        sigma = np.arange(self.K)
        sigma[i], sigma[j] = j, i
        target = self.permuted_index(sigma)
        S = np.zeros((self.size, self.size))
        rows = np.arange(self.size)
        np.add.at(S, (rows, target), acc)
        np.add.at(S, (rows, rows), 1.0 - acc)
        return S

    def pt_cycle_matrix(self, period: int) -> np.ndarray:
        """One full adjacent-sweep cycle: ``period`` moves then a swap, for each adjacent pair."""
        P = self.move_matrix(self.taus)
        Pn = np.linalg.matrix_power(P, period)
        M = np.eye(self.size)
        for i in range(self.K - 1):
            M = M @ Pn @ self.swap_matrix(i, i + 1)
        return M

    def swap_kernel_matrix(self, pset: PermutationSet) -> np.ndarray:
        """Infinite-swapping kernel restricted to ``pset``.

        ``sum_sigma w(y_sigma) prod_i alpha_{tau_i}(y_sigma(i), z_sigma(i))``.
        """
        W = self.weights(pset)
        M = np.zeros((self.size, self.size))
        for s, sigma in enumerate(pset.table):
            temps = np.empty(self.K)
            temps[sigma] = self.taus
            M += W[:, s, None] * self.move_matrix(temps)
        return M

    def handoff_matrix(self, pset: PermutationSet) -> np.ndarray:
        """``y -> y_sigma`` with probability ``w(y_sigma)``."""
        W = self.weights(pset)
        H = np.zeros((self.size, self.size))
        rows = np.arange(self.size)
        for s, sigma in enumerate(pset.table):
            np.add.at(H, (rows, self.permuted_index(sigma)), W[:, s])
        return H

    def pins_cycle_matrix(self, subgroups: Sequence[PermutationSet], n_steps: Sequence[int]) -> np.ndarray:
        """``n_1`` steps under subgroup 1, handoff, ``n_2`` steps under subgroup 2, handoff, ..."""
        M = np.eye(self.size)
        for g, n in zip(subgroups, n_steps):
            M = M @ np.linalg.matrix_power(self.swap_kernel_matrix(g), n) @ self.handoff_matrix(g)
        return M

    def jump_embedded_matrix(self, a: float) -> np.ndarray:
        """Embedded chain of the two-temperature jump process with swap rate ``a``."""
        P = self.move_matrix(self.taus)
        S = self.swap_matrix(0, 1)
        return (P + a * S) / (1.0 + a)

    def jump_generator(self, a: float) -> np.ndarray:
        """Generator ``(P - I) + a (S - I)`` of the continuous-time jump process."""
        I = np.eye(self.size)
        return (self.move_matrix(self.taus) - I) + a * (self.swap_matrix(0, 1) - I)

    def slot_marginals(self, law: np.ndarray, pset: PermutationSet) -> np.ndarray:
        """Expected weighted measure per slot: ``E_law[sum_sigma w(y_sigma) 1{y_sigma(j) = x}]``.

        Returns an array ``(K, n)``.
        """
        W = self.weights(pset)
        out = np.zeros((self.K, self.n))
        for s, sigma in enumerate(pset.table):
            for j in range(self.K):
                np.add.at(out[j], self.states[:, sigma[j]], law * W[:, s])
        return out

    def product_marginals(self) -> np.ndarray:
        """Per-slot Gibbs laws ``pi_j`` as an array ``(K, n)``."""
        lp = -self.values[None, :] / self.taus[:, None]
        return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))


def stationary_vector(P: np.ndarray) -> np.ndarray:
    """Left fixed point of a stochastic matrix, normalised to sum one."""
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    v, *_ = np.linalg.lstsq(A, b, rcond=None)
    return v


def fixed_point_residual(law: np.ndarray, P: np.ndarray) -> float:
    """``max |law P - law|``."""
    return float(np.max(np.abs(law @ P - law)))
