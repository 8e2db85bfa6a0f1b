"""Parallel tempering, infinite swapping and partial infinite swapping.

All samplers share one convention: a permutation ``sigma`` drawn from a
weight table assigns temperature ``tau_i`` to coordinate ``sigma(i)``, and
the weighted measure places mass ``w(y_sigma)`` on ``y_sigma``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CapacityExceededError, InvalidArgumentError
from .kernels import KernelSpec, metropolis_move
from .measures import WeightedAccumulator, accumulate
from .permgroup import (PermutationSet, generates_full_group, permute_state, symmetric_group,
                        trivial_group)
from .potentials import PotentialModel
from .rng import RngStream
from .state import ReplicaState
from .weights import LogWeightTable, log_swap_acceptance, log_weights

MAX_FULL_INS_K = 6
PAIR_POLICIES = ("adjacent-sweep", "random-adjacent", "random-pair")


@dataclass(frozen=True)
class PtSchedule:
    """When and between which slots parallel tempering attempts a swap.

    ``period`` N: a swap step follows every N ordinary steps.  Alternatively
    ``geometric_mean`` makes each step a swap attempt with probability
    ``1 / (mean + 1)``, i.e. geometric gaps with the given mean.
    """

    period: int | None = 1
    geometric_mean: float | None = None
    pair_policy: str = "adjacent-sweep"

    def __post_init__(self):
        if self.geometric_mean is not None:
            if not self.geometric_mean > 0:
                raise InvalidArgumentError("geometric mean must be positive")
        elif self.period is None or self.period < 1:
            raise InvalidArgumentError("swap period must be at least 1")
        if self.pair_policy not in PAIR_POLICIES:
            raise InvalidArgumentError(f"unknown pair policy {self.pair_policy!r}")


def prepare(state: ReplicaState, model: PotentialModel, spec: KernelSpec | None = None) -> ReplicaState:
    """Fill the cached energies (and gradients for Langevin kernels)."""
    need_grad = spec is not None and spec.needs_gradient
    if state.energies is not None and (not need_grad or state.grads is not None):
        return state
    if need_grad:
        e, g = model.energy_grad(state.coords)
    else:
        e, g = model.energy(state.coords), None
    return state.with_coords(state.coords, energies=np.atleast_1d(e), grads=g)


def compute_weights(state: ReplicaState, pset: PermutationSet, model: PotentialModel) -> LogWeightTable:
    """Log-weights ``log w(y_sigma)`` for every ``sigma`` in ``pset``.

    Energies are evaluated once per coordinate and reused across permutations.
    """
    if pset.K != state.K:
        raise InvalidArgumentError(f"permutation set of arity {pset.K} for {state.K} replicas")
    state = prepare(state, model)
    return log_weights(state.energies, state.taus, pset)


def _assigned_move(state: ReplicaState, sigma: np.ndarray, model, spec: KernelSpec, rng) -> ReplicaState:
    # coordinate sigma(i) moves at temperature tau_i with slot i's step size
    K = state.K
    temps = np.empty(K)
    temps[sigma] = state.taus
    steps = np.empty(K)
    steps[sigma] = spec.steps_for_slots(np.arange(K))
    res = metropolis_move(spec, model, temps, steps, state.coords, state.energies, state.grads, rng)
    return state.with_coords(res.x, res.energies, res.grads, sweep=state.sweep + 1)


def kernel_sweep(state: ReplicaState, model: PotentialModel, spec: KernelSpec, rng: RngStream) -> ReplicaState:
    """Advance every coordinate with its own slot's kernel (no swapping)."""
    state = prepare(state, model, spec)
    return _assigned_move(state, np.arange(state.K), model, spec, rng)


def _pt_pair(state: ReplicaState, schedule: PtSchedule, rng: RngStream) -> tuple[int, int]:
    K = state.K
    if schedule.pair_policy == "adjacent-sweep":
        i = state.swap_attempts % (K - 1)
        return i, i + 1
    if schedule.pair_policy == "random-adjacent":
        i = min(int(rng.uniform() * (K - 1)), K - 2)
        return i, i + 1
    i = min(int(rng.uniform() * K), K - 1)
    j = min(int(rng.uniform() * (K - 1)), K - 2)
    j = j + 1 if j >= i else j
    return min(i, j), max(i, j)


def is_swap_step(state: ReplicaState, schedule: PtSchedule, rng: RngStream) -> bool:
    if schedule.geometric_mean is not None:
        return rng.uniform() < 1.0 / (schedule.geometric_mean + 1.0)
    return (state.sweep + 1) % (schedule.period + 1) == 0


def swap_attempt(state: ReplicaState, i: int, j: int, rng: RngStream) -> ReplicaState:
    """Metropolis exchange of the configurations in slots ``i`` and ``j``.

    Accepted with ``min(1, exp((1/tau_i - 1/tau_j)(V_i - V_j)))``; only
    energy differences enter, never a normalising constant.
    """
    e = state.energies
    taus = state.taus
    log_acc = log_swap_acceptance(e[i], e[j], taus[i], taus[j])
    x, energies, grads = state.coords, e, state.grads
    if log_acc >= 0 or math.log(rng.uniform()) < log_acc:
        idx = np.arange(state.K)
        idx[i], idx[j] = j, i
        x, energies = x[idx], e[idx]
        grads = None if grads is None else grads[idx]
    return state.with_coords(x, energies, grads, sweep=state.sweep + 1,
                      swap_attempts=state.swap_attempts + 1)


def pt_step(state: ReplicaState, schedule: PtSchedule, spec: KernelSpec, model: PotentialModel,
            rng: RngStream) -> ReplicaState:
    """One parallel-tempering step: a kernel sweep or a single pair swap attempt."""
    state = prepare(state, model, spec)
    if state.K > 1 and is_swap_step(state, schedule, rng):
        i, j = _pt_pair(state, schedule, rng)
        return swap_attempt(state, i, j, rng)
    return _assigned_move(state, np.arange(state.K), model, spec, rng)


def _swap_move(state, pset, model, spec, rng) -> tuple[ReplicaState, LogWeightTable]:
    table = log_weights(state.energies, state.taus, pset)
    sigma = table.sample(rng)
    return _assigned_move(state, sigma, model, spec, rng), table


def full_group(K: int) -> PermutationSet:
    if K > MAX_FULL_INS_K:
        raise CapacityExceededError(
            f"full infinite swapping needs {math.factorial(K)} weights for K={K}; "
            f"use partial infinite swapping (K <= {MAX_FULL_INS_K})", MAX_FULL_INS_K)
    if K not in _SYMMETRIC:
        _SYMMETRIC[K] = symmetric_group(K)
    return _SYMMETRIC[K]


_SYMMETRIC: dict[int, PermutationSet] = {}


def ins_step(state: ReplicaState, model: PotentialModel, spec: KernelSpec,
             rng: RngStream) -> tuple[ReplicaState, LogWeightTable]:
    """Full infinite-swapping step.

    Returns the post-move state and the pre-move weight table (used to
    accumulate the weighted measure at the pre-move state).
    """
    pset = full_group(state.K)
    state = prepare(state, model, spec)
    return _swap_move(state, pset, model, spec, rng)


def _require_subgroup(pset: PermutationSet, K: int):
    if pset.K != K:
        raise InvalidArgumentError(f"subgroup of arity {pset.K} for {K} replicas")
    if not pset.is_subgroup:
        raise InvalidArgumentError("partial infinite swapping is defined only when the set is a subgroup")


def pins_step(state: ReplicaState, subgroup: PermutationSet, model: PotentialModel, spec: KernelSpec,
              rng: RngStream) -> tuple[ReplicaState, LogWeightTable]:
    """Partial infinite-swapping step restricted to ``subgroup``."""
    _require_subgroup(subgroup, state.K)
    state = prepare(state, model, spec)
    return _swap_move(state, subgroup, model, spec, rng)


def handoff(state: ReplicaState, subgroup: PermutationSet, model: PotentialModel, rng: RngStream,
            table: LogWeightTable | None = None) -> ReplicaState:
    """Reconstruct particle locations: ``y_sigma`` with probability ``w(y_sigma)``.

    ``table`` may be passed when the weights at ``state`` are already known.
    """
    _require_subgroup(subgroup, state.K)
    state = prepare(state, model)
    if table is None:
        table = log_weights(state.energies, state.taus, subgroup)
    sigma = table.sample(rng)
    grads = state.grads
    return state.with_coords(state.coords[sigma], state.energies[sigma],
                      None if grads is None else grads[sigma])


def pins_interleaved_run(state: ReplicaState, subgroups: Sequence[PermutationSet], n_steps: Sequence[int],
                         total_sweeps: int, model: PotentialModel, spec: KernelSpec,
                         accumulator: WeightedAccumulator | None, rng: RngStream,
                         burn_in: int = 0) -> tuple[ReplicaState, WeightedAccumulator | None]:
    """Alternate partial infinite-swapping dynamics with handoffs.

    For each subgroup in turn: ``n_i`` moves, each followed by accumulation
    of the new state under that subgroup's weights; then a handoff drawn from
    the same weights before switching to the next subgroup.  The first
    ``burn_in`` sweeps are not accumulated.
    """
    if len(subgroups) != len(n_steps) or not subgroups:
        raise InvalidArgumentError("need one step count per subgroup")
    if any(n < 1 for n in n_steps):
        raise InvalidArgumentError("step counts must be positive")
    for g in subgroups:
        _require_subgroup(g, state.K)
    if len(subgroups) > 1 or subgroups[0].order != math.factorial(state.K):
        try:
            full = generates_full_group(list(subgroups))
        except CapacityExceededError:
            full = True  # too large to verify; block schemes are built to generate S_K
        if not full:
            warnings.warn("subgroups do not generate the full symmetric group; the run targets "
                          "its own symmetrised measure, not full infinite swapping", stacklevel=2)
    state = prepare(state, model, spec)
    done = 0
    which = 0
    while done < total_sweeps:
        pset = subgroups[which]
        table = log_weights(state.energies, state.taus, pset)
        for _ in range(n_steps[which]):
            if done >= total_sweeps:
                break
            sigma = table.sample(rng)
            state = _assigned_move(state, sigma, model, spec, rng)
            table = log_weights(state.energies, state.taus, pset)
            done += 1
            if accumulator is not None and done > burn_in:
                accumulate(accumulator, state, table)
        state = handoff(state, pset, model, rng, table=table)
        which = (which + 1) % len(subgroups)
    return state, accumulator


def jump_chain_run(state: ReplicaState, a: float, model: PotentialModel, spec: KernelSpec, horizon: float,
                   accumulator: WeightedAccumulator | None, rng: RngStream,
                   move_times: list | None = None) -> WeightedAccumulator | None:
    """Continuous-time two-temperature finite-swapping jump process.

    Events arrive at rate ``a + 1``; each is a kernel move with probability
    ``1 / (a + 1)`` and otherwise a swap attempt accepted with probability
    ``g``.  The occupation measure weights each visited state by its holding
    time (the last one truncated at ``horizon``).  Kernel-move times are
    appended to ``move_times`` when given.
    """
    if a < 0:
        raise InvalidArgumentError("swap rate must be nonnegative")
    if state.K != 2:
        raise InvalidArgumentError("the jump chain is defined for two temperatures")
    state = prepare(state, model, spec)
    identity = trivial_group(2)
    t = 0.0
    p_move = 1.0 / (a + 1.0)
    while t < horizon:
        hold = min(rng.exponential(a + 1.0), horizon - t)
        if accumulator is not None:
            accumulate(accumulator, state, log_weights(state.energies, state.taus, identity), weight=hold)
        t += hold
        if t >= horizon:
            break
        if rng.uniform() < p_move:
            state = _assigned_move(state, np.arange(2), model, spec, rng)
            if move_times is not None:
                move_times.append(t)
        else:
            state = swap_attempt(state, 0, 1, rng)
    return accumulator


class StepResult(NamedTuple):
    """Outcome of one sampler step.

    ``measured`` is the state the step's weighted measure is attached to
    (the pre-move state, after any handoff) and ``table`` its weights.
    """

    state: ReplicaState
    measured: ReplicaState
    table: LogWeightTable


class Sampler:
    """Uniform stepping interface used by the experiment harness."""

    kind = "base"

    def __init__(self, model: PotentialModel, spec: KernelSpec, rng: RngStream):
        self.model = model
        self.spec = spec
        self.rng = rng

    def step(self, state: ReplicaState) -> StepResult:
        raise NotImplementedError

    def metadata(self) -> dict:
        return {"kind": self.kind}


class PTSampler(Sampler):
    kind = "pt"

    def __init__(self, model, spec, rng, schedule: PtSchedule):
        super().__init__(model, spec, rng)
        self.schedule = schedule
        self._identity: dict[int, PermutationSet] = {}

    def step(self, state):
        state = prepare(state, self.model, self.spec)
        K = state.K
        ident = self._identity.setdefault(K, trivial_group(K))
        table = log_weights(state.energies, state.taus, ident)
        return StepResult(pt_step(state, self.schedule, self.spec, self.model, self.rng), state, table)

    def metadata(self):
        s = self.schedule
        return {"kind": self.kind, "period": s.period, "geometric_mean": s.geometric_mean,
                "pair_policy": s.pair_policy}


class INSSampler(Sampler):
    kind = "ins"

    def step(self, state):
        state = prepare(state, self.model, self.spec)
        new, table = ins_step(state, self.model, self.spec, self.rng)
        return StepResult(new, state, table)


class PINSSampler(Sampler):
    """Interleaved partial infinite swapping as a stepwise sampler.

    After ``n_steps[i]`` steps under subgroup ``i`` a handoff is drawn from
    the weights of the current state and the next subgroup takes over.  The
    table returned with each step belongs to the pre-move state under the
    subgroup in force for that move.
    """

    kind = "pins"

    def __init__(self, model, spec, rng, subgroups: Sequence[PermutationSet], n_steps: Sequence[int]):
        super().__init__(model, spec, rng)
        if len(subgroups) != len(n_steps) or not subgroups:
            raise InvalidArgumentError("need one step count per subgroup")
        self.subgroups = list(subgroups)
        self.n_steps = [int(n) for n in n_steps]
        self._which = 0
        self._count = 0

    def step(self, state):
        pset = self.subgroups[self._which]
        if self._count == self.n_steps[self._which]:
            state = handoff(state, pset, self.model, self.rng)
            self._which = (self._which + 1) % len(self.subgroups)
            self._count = 0
            pset = self.subgroups[self._which]
        self._count += 1
        state = prepare(state, self.model, self.spec)
        new, table = pins_step(state, pset, self.model, self.spec, self.rng)
        return StepResult(new, state, table)

    def metadata(self):
        return {"kind": self.kind, "subgroups": [repr(g) for g in self.subgroups], "n_steps": self.n_steps}
