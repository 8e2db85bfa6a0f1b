"""Weighted empirical measures and per-temperature estimators.

Single-coordinate observables are aggregated through the rho matrix: the
contribution of one step to temperature slot ``j`` is
``sum_i rho_ij f(y_i)``, which equals ``sum_sigma w(y_sigma) f(y_sigma(j))``
at O(K^2) instead of O(|A|) cost.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InsufficientDataError, InvalidArgumentError
from .state import ReplicaState
from .weights import LogWeightTable

DEFAULT_BATCHES = 64

ObservableFn = Callable[[ReplicaState], np.ndarray]


def _energy(state: ReplicaState) -> np.ndarray:
    return state.energies


def _first_coordinate(state: ReplicaState) -> np.ndarray:
    return state.coords[:, 0]


OBSERVABLES: dict[str, ObservableFn] = {
    "V": _energy,
    "x": _first_coordinate,
}


def rho_matrix(table: LogWeightTable) -> np.ndarray:
    """``rho[i, j] = sum over sigma with sigma(j) = i of w(y_sigma)`` (0-based)."""
    return table.rho()


class WeightedAccumulator:
    """Streaming per-slot sums of weighted observables, with batch means.

    Parameters
    ----------
    K:
        Number of temperature slots.
    observables:
        Names from :data:`OBSERVABLES`, or a mapping name -> function of the
        state returning one value per coordinate.
    bins:
        Optional fixed histogram edges per observable name.
    n_batches:
        Number of batches used by :meth:`estimate`.
    """

    def __init__(self, K: int, observables: Sequence[str] | Mapping[str, ObservableFn] = ("V",),
                 bins: Mapping[str, Sequence[float]] | None = None, n_batches: int = DEFAULT_BATCHES):
        if isinstance(observables, Mapping):
            self.functions = dict(observables)
        else:
            unknown = [n for n in observables if n not in OBSERVABLES]
            if unknown:
                raise InvalidArgumentError(f"unknown observables {unknown}; known: {sorted(OBSERVABLES)}")
            self.functions = {n: OBSERVABLES[n] for n in observables}
        self.names = tuple(self.functions)
        self.K = int(K)
        self.n_batches = int(n_batches)
        if self.n_batches < 2:
            raise InvalidArgumentError("need at least two batches")
        self.bins = {k: np.asarray(v, dtype=float) for k, v in (bins or {}).items()}
        for name, edges in self.bins.items():
            if name not in self.functions:
                raise InvalidArgumentError(f"histogram for unregistered observable {name!r}")
            if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
                raise InvalidArgumentError(f"histogram edges for {name!r} must be increasing")
        n_obs = len(self.names)
        self.count = 0
        self.total_weight = 0.0
        self.slot_weight = np.zeros(self.K)
        self.sums = np.zeros((n_obs, self.K))
        self.sq_sums = np.zeros((n_obs, self.K))
        self.hist = {k: np.zeros((self.K, e.size - 1)) for k, e in self.bins.items()}
        # batch means: complete batches plus one partial batch
        self._batch_steps = 1
        self._b_sum: list[np.ndarray] = []
        self._b_w: list[np.ndarray] = []
        self._b_n: list[int] = []
        self._cur_sum = np.zeros((n_obs, self.K))
        self._cur_w = np.zeros(self.K)
        self._cur_n = 0

    def empty_like(self) -> "WeightedAccumulator":
        return WeightedAccumulator(self.K, self.functions, self.bins, self.n_batches)

    # -- accumulation ------------------------------------------------------

    def add(self, values: np.ndarray, rho: np.ndarray, weight: float = 1.0) -> None:
        """Add one step given per-coordinate ``values`` (n_obs, K) and ``rho``."""
        # every column of rho sums to one, so each slot gains exactly `weight`
        slot_w = np.full(self.K, float(weight))
        inc = weight * (values @ rho)
        self.count += 1
        self.total_weight += weight
        self.slot_weight += slot_w
        self.sums += inc
        self.sq_sums += weight * ((values * values) @ rho)
        for name, edges in self.bins.items():
            v = values[self.names.index(name)]
            idx = np.searchsorted(edges, v, side="right") - 1
            ok = (idx >= 0) & (idx < edges.size - 1)
            if np.any(ok):
                np.add.at(self.hist[name].T, idx[ok], weight * rho[ok])
        self._cur_sum += inc
        self._cur_w += slot_w
        self._cur_n += 1
        if self._cur_n >= self._batch_steps:
            self._push_current()

    def add_many(self, values: np.ndarray, rho: np.ndarray, weights: np.ndarray | None = None) -> None:
        """Add a run of steps at once: ``values`` (n, n_obs, K), ``rho`` (n, K, K).

        Equivalent to calling :meth:`add` per step, up to summation order.
        """
        n = values.shape[0]
        if n == 0:
            return
        wts = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        inc = wts[:, None, None] * np.einsum("nok,nkj->noj", values, rho)
        sq = wts[:, None, None] * np.einsum("nok,nkj->noj", values * values, rho)
        slot_w = np.repeat(wts[:, None], self.K, axis=1)
        self.count += n
        self.total_weight += float(wts.sum())
        self.slot_weight += slot_w.sum(axis=0)
        self.sums += inc.sum(axis=0)
        self.sq_sums += sq.sum(axis=0)
        for name, edges in self.bins.items():
            v = values[:, self.names.index(name), :]
            idx = np.searchsorted(edges, v, side="right") - 1
            ok = (idx >= 0) & (idx < edges.size - 1)
            step, coord = np.nonzero(ok)
            # rho[step, coord, :] is the weight of coordinate `coord` in every slot
            contrib = wts[step, None] * rho[step, coord, :]
            np.add.at(self.hist[name].T, idx[step, coord], contrib)
        start = 0
        while start < n:
            take = min(n - start, self._batch_steps - self._cur_n)
            self._cur_sum += inc[start:start + take].sum(axis=0)
            self._cur_w += slot_w[start:start + take].sum(axis=0)
            self._cur_n += take
            start += take
            if self._cur_n >= self._batch_steps:
                self._push_current()

    def _push_current(self):
        self._b_sum.append(self._cur_sum)
        self._b_w.append(self._cur_w)
        self._b_n.append(self._cur_n)
        self._cur_sum = np.zeros_like(self._cur_sum)
        self._cur_w = np.zeros(self.K)
        self._cur_n = 0
        if len(self._b_n) >= 2 * self.n_batches:
            self._coarsen()

    def _coarsen(self):
        s, w, n = self._b_sum, self._b_w, self._b_n
        m = len(n) // 2 * 2
        self._b_sum = [s[i] + s[i + 1] for i in range(0, m, 2)] + s[m:]
        self._b_w = [w[i] + w[i + 1] for i in range(0, m, 2)] + w[m:]
        self._b_n = [n[i] + n[i + 1] for i in range(0, m, 2)] + n[m:]
        self._batch_steps *= 2

    # -- estimates ---------------------------------------------------------

    def _groups(self):
        sums = list(self._b_sum)
        ws = list(self._b_w)
        if self._cur_n:
            if sums:
                sums[-1] = sums[-1] + self._cur_sum
                ws[-1] = ws[-1] + self._cur_w
            else:
                sums, ws = [self._cur_sum], [self._cur_w]
        n = len(sums)
        G = min(self.n_batches, n)
        edges = np.linspace(0, n, G + 1).round().astype(int)
        S = np.array([sum(sums[a:b]) for a, b in zip(edges[:-1], edges[1:])])
        W = np.array([sum(ws[a:b]) for a, b in zip(edges[:-1], edges[1:])])
        return S, W

    def estimate(self, observable: str, slot: int) -> tuple[float, float]:
        """Weighted mean and batch-means standard error for 1-based ``slot``."""
        if observable not in self.names:
            raise InvalidArgumentError(f"observable {observable!r} not registered")
        if not 1 <= slot <= self.K:
            raise InvalidArgumentError(f"slot must be in 1..{self.K}")
        if self.count < 2:
            raise InsufficientDataError(f"need at least 2 samples, have {self.count}")
        k = self.names.index(observable)
        j = slot - 1
        W_tot = self.slot_weight[j]
        mean = self.sums[k, j] / W_tot
        S, W = self._groups()
        G = S.shape[0]
        resid = S[:, k, j] - mean * W[:, j]
        var = G / (G - 1) * np.sum(resid * resid) / (W_tot * W_tot)
        return float(mean), float(math.sqrt(max(var, 0.0)))

    def variance(self, observable: str, slot: int) -> float:
        """Weighted single-sample variance of an observable in one slot."""
        k = self.names.index(observable)
        j = slot - 1
        m = self.sums[k, j] / self.slot_weight[j]
        return float(max(self.sq_sums[k, j] / self.slot_weight[j] - m * m, 0.0))

    def histogram(self, observable: str, slot: int) -> tuple[np.ndarray, np.ndarray]:
        """Bin edges and normalised weights of one slot's histogram."""
        h = self.hist[observable][slot - 1]
        total = h.sum()
        return self.bins[observable], (h / total if total > 0 else h)

    # -- serialisation ------------------------------------------------------

    def estimates_rows(self) -> list[dict]:
        rows = []
        for j in range(1, self.K + 1):
            for name in self.names:
                mean, err = self.estimate(name, j)
                rows.append({"slot": j, "observable": name, "mean": mean, "stderr": err,
                             "n": self.count, "total_weight": self.total_weight})
        return rows

    def compatible(self, other: "WeightedAccumulator") -> bool:
        return (self.K == other.K and self.names == other.names and self.n_batches == other.n_batches
                and self.bins.keys() == other.bins.keys()
                and all(np.array_equal(self.bins[k], other.bins[k]) for k in self.bins))


def accumulate(acc: WeightedAccumulator, state: ReplicaState, table: LogWeightTable,
               weight: float = 1.0) -> WeightedAccumulator:
    """Add ``sum_sigma w(y_sigma) delta_{y_sigma}`` (per-slot marginals) at ``state``.

    ``table`` must have been computed at ``state``.  ``weight`` scales the
    whole contribution (holding times in continuous time).
    """
    values = np.array([fn(state) for fn in acc.functions.values()])
    acc.add(values, table.rho(), weight)
    return acc


def merge(a: WeightedAccumulator, b: WeightedAccumulator) -> WeightedAccumulator:
    """Combine two accumulators as if their steps had been recorded in sequence."""
    if not a.compatible(b):
        raise InvalidArgumentError("accumulators have different observables, slots, bins or batch counts")
    out = a.empty_like()
    out.count = a.count + b.count
    out.total_weight = a.total_weight + b.total_weight
    out.slot_weight = a.slot_weight + b.slot_weight
    out.sums = a.sums + b.sums
    out.sq_sums = a.sq_sums + b.sq_sums
    out.hist = {k: a.hist[k] + b.hist[k] for k in a.hist}
    out._b_sum = list(a._b_sum) + list(b._b_sum)
    out._b_w = list(a._b_w) + list(b._b_w)
    out._b_n = list(a._b_n) + list(b._b_n)
    out._cur_sum = a._cur_sum + b._cur_sum
    out._cur_w = a._cur_w + b._cur_w
    out._cur_n = a._cur_n + b._cur_n
    out._batch_steps = max(a._batch_steps, b._batch_steps)
    while len(out._b_n) >= 2 * out.n_batches:
        out._coarsen()
    if out._cur_n >= out._batch_steps:
        out._push_current()
    return out


def estimate(acc: WeightedAccumulator, observable: str, slot: int) -> tuple[float, float]:
    return acc.estimate(observable, slot)


def format_inf(v: float) -> str | float:
    return "inf" if v == math.inf else v


def write_csv(rows: list[dict], metadata: dict, fieldnames: Sequence[str]) -> str:
    """CSV text with a leading ``#``-prefixed JSON metadata line."""
    buf = io.StringIO()
    buf.write("# " + json.dumps(metadata, sort_keys=True) + "\n")
    w = csv.DictWriter(buf, fieldnames=list(fieldnames), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) and math.isfinite(v) else format_inf(v))
                    for k, v in row.items()})
    return buf.getvalue()


def estimates_csv(acc: WeightedAccumulator, metadata: dict) -> str:
    return write_csv(acc.estimates_rows(), metadata, ["slot", "observable", "mean", "stderr", "n", "total_weight"])


def histogram_csv(acc: WeightedAccumulator, observable: str, metadata: dict) -> str:
    edges = acc.bins[observable]
    rows = []
    for j in range(1, acc.K + 1):
        h = acc.hist[observable][j - 1]
        for b in range(edges.size - 1):
            rows.append({"slot": j, "bin_left": float(edges[b]), "bin_right": float(edges[b + 1]),
                         "weight": float(h[b])})
    return write_csv(rows, metadata, ["slot", "bin_left", "bin_right", "weight"])
