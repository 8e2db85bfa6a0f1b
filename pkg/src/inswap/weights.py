"""Log-space permutation weights and the rho matrices derived from them.

For a state ``y`` with per-coordinate energies ``V(y_i)`` and a permutation
set ``A``, the weight of ``sigma`` is

    w(y_sigma) = pi(y_sigma) / sum_{theta in A} pi(y_theta),
    log pi(y_sigma) = -sum_i V(y_sigma(i)) / tau_i,

normalised with log-sum-exp.  Product subgroups are handled factor by factor.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityExceededError
from .permgroup import DEFAULT_CAP, PermutationSet
from .rng import RngStream


def _logsumexp(s: np.ndarray) -> float:
    m = s.max()
    return m + math.log(np.exp(s - m).sum())


@lru_cache(maxsize=None)
def _incidence(table_bytes: bytes, m: int, k: int) -> np.ndarray:
    table = np.frombuffer(table_bytes, dtype=np.intp).reshape(m, k)
    inc = np.zeros((m, k, k))
    for s in range(m):
        inc[s, table[s], np.arange(k)] = 1.0
    return inc


def incidence(pset: PermutationSet) -> np.ndarray:
    """``inc[s, i, j] = 1`` iff ``sigma_s(j) = i`` (0-based)."""
    t = np.ascontiguousarray(pset.table)
    return _incidence(t.tobytes(), t.shape[0], t.shape[1])


def _flat_incidence(pset: PermutationSet) -> np.ndarray:
    flat = pset.__dict__.get("_inc_flat")
    if flat is None:
        flat = incidence(pset).reshape(pset.order, -1)
        pset.__dict__["_inc_flat"] = flat
    return flat


@dataclass(frozen=True)
class WeightPart:
    slots: np.ndarray
    set: PermutationSet
    logw: np.ndarray
    w: np.ndarray  # exp(logw), kept to avoid recomputing it per use


class LogWeightTable:
    """Normalised log-weights over a permutation set.

    ``parts`` holds one entry per independent factor of the set; for an
    ordinary set there is exactly one part covering every slot.
    """

    def __init__(self, pset: PermutationSet, parts: list[WeightPart]):
        self.set = pset
        self.parts = parts
        self.K = pset.K

    @property
    def logw(self) -> np.ndarray:
        """Log-weight of every element of ``set``, in the set's order."""
        if len(self.parts) == 1 and self.parts[0].set is self.set:
            return self.parts[0].logw
        if self.set.order > DEFAULT_CAP:
            raise CapacityExceededError("weight table too large to enumerate", DEFAULT_CAP)
        # product sets: element order is the product of per-part lexicographic orders
        if not self.parts:
            return np.zeros(1)
        combos = itertools.product(*(p.logw for p in self.parts))
        return np.array([sum(c) for c in combos])

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.logw)

    def rho(self) -> np.ndarray:
        """``rho[i, j]``: weight of particle ``i`` holding temperature ``j``."""
        if len(self.parts) == 1 and self.parts[0].slots.size == self.K:
            part = self.parts[0]
            return (part.w @ _flat_incidence(part.set)).reshape(self.K, self.K)
        rho = np.eye(self.K)
        for part in self.parts:
            n = part.slots.size
            local = (part.w @ _flat_incidence(part.set)).reshape(n, n)
            rho[np.ix_(part.slots, part.slots)] = local
        return rho

    def sample(self, rng: RngStream) -> np.ndarray:
        """Draw ``sigma`` (0-based images) with probability ``w(y_sigma)``."""
        sigma = np.arange(self.K)
        for part in self.parts:
            idx = rng.categorical_weights(part.w)
            sigma[part.slots] = part.slots[part.set.table[idx]]
        return sigma


def log_weights(energies: np.ndarray, taus: np.ndarray, pset: PermutationSet) -> LogWeightTable:
    """Weight table for per-coordinate ``energies`` on the ladder ``taus``."""
    parts = []
    for slots, local in pset.factors():
        e = energies[slots]
        t = taus[slots]
        s = -(e[local.table] / t).sum(axis=1)
        s -= s.max()
        w = np.exp(s)
        total = w.sum()
        parts.append(WeightPart(slots, local, s - math.log(total), w / total))
    return LogWeightTable(pset, parts)


def log_pair_rho(e1: float, e2: float, tau1: float, tau2: float) -> float:
    """``log rho(x1, x2)`` for two temperatures, from energies only."""
    # log-sigmoid of the exponent gap keeps rho(x1, x2) + rho(x2, x1) = 1 to rounding
    gap = (-e2 / tau1 - e1 / tau2) - (-e1 / tau1 - e2 / tau2)
    return float(-np.logaddexp(0.0, gap))


def log_swap_acceptance(e1: float, e2: float, tau1: float, tau2: float) -> float:
    """``log g(x1, x2) = min(0, log pi(x2, x1) - log pi(x1, x2))``."""
    return min(0.0, (1.0 / tau1 - 1.0 / tau2) * (e1 - e2))
