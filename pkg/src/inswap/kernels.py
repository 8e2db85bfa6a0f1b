"""Per-temperature reversible kernels and Euler-Maruyama integrators.

Kernels act on a stack of coordinates at once: row ``c`` of ``x`` moves at
temperature ``temps[c]`` with step size ``steps[c]``.  Every sampler funnels
its configuration moves through :func:`metropolis_move`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidStepError
from .potentials import PotentialModel, Tabulated
from .rng import RngStream
from .state import ReplicaState, TemperatureLadder
from .weights import log_weights, log_swap_acceptance
from .permgroup import symmetric_group

KINDS = ("rw-metropolis", "langevin-metropolis", "grid-metropolis")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus one step size per temperature slot.

    ``grid-metropolis`` proposes a +-1 move on the integer lattice of a
    :class:`~inswap.potentials.Tabulated` potential; its step sizes are
    ignored but must still be positive.
    """

    kind: str
    step_sizes: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        steps = tuple(float(h) for h in np.atleast_1d(self.step_sizes))
        if not steps or any(not h > 0 for h in steps):
            raise InvalidArgumentError(f"step sizes must be positive: {steps}")
        object.__setattr__(self, "step_sizes", steps)
        object.__setattr__(self, "_steps", np.asarray(steps))

    @classmethod
    def uniform(cls, kind: str, step: float, K: int) -> "KernelSpec":
        return cls(kind, (float(step),) * K)

    @property
    def needs_gradient(self) -> bool:
        return self.kind == "langevin-metropolis"

    def steps_for_slots(self, slots: np.ndarray) -> np.ndarray:
        """Step size of each requested slot; a single size broadcasts to every slot."""
        if self._steps.size == 1:
            return np.full(len(slots), self._steps[0])
        return self._steps[slots]


@dataclass
class MoveResult:
    x: np.ndarray
    energies: np.ndarray
    grads: np.ndarray | None
    accepted: np.ndarray


def metropolis_move(spec: KernelSpec, model: PotentialModel, temps: np.ndarray, steps: np.ndarray,
                    x: np.ndarray, energies: np.ndarray, grads: np.ndarray | None,
                    rng: RngStream) -> MoveResult:
    """One Metropolis-corrected move of every row of ``x``.

    Rows whose proposal has non-finite energy (e.g. overlapping atoms) are
    rejected.
    """
    n, d = x.shape
    h = steps[:, None]
    if spec.kind == "rw-metropolis":
        prop = x + h * rng.normals((n, d))
        e_new = model._energy(prop)
        log_acc = -(e_new - energies) / temps
        g_new = None
    elif spec.kind == "langevin-metropolis":
        if grads is None:
            energies, grads = model._energy_grad(x)
        t = temps[:, None]
        xi = rng.normals((n, d))
        prop = x - 0.5 * h * h * grads / t + h * xi
        with np.errstate(invalid="ignore", over="ignore"):
            e_new, g_new = model._energy_grad(prop)
            back = x - prop + 0.5 * h * h * g_new / t
            log_fwd = -0.5 * np.sum(xi * xi, axis=1)
            log_bwd = -0.5 * np.sum(back * back, axis=1) / (steps * steps)
            log_acc = -(e_new - energies) / temps + log_bwd - log_fwd
    else:
        prop = x + np.where(rng.uniforms(n) < 0.5, -1.0, 1.0)[:, None]
        e_new = model._energy(prop)
        log_acc = -(e_new - energies) / temps
        g_new = None
    with np.errstate(invalid="ignore"):
        accept = np.log(rng.uniforms(n)) < log_acc
    accept &= np.isfinite(e_new)
    x_out = np.where(accept[:, None], prop, x)
    e_out = np.where(accept, e_new, energies)
    g_out = None if g_new is None else np.where(accept[:, None], g_new, grads)
    return MoveResult(x_out, e_out, g_out, accept)


def kernel_step(spec: KernelSpec, model: PotentialModel, tau: float, x, rng: RngStream,
                slot: int = 0) -> np.ndarray:
    """Single-position convenience wrapper around :func:`metropolis_move`."""
    if tau <= 0:
        raise InvalidArgumentError("temperature must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    if spec.needs_gradient:
        e, g = model.energy_grad(x)
    else:
        e, g = np.atleast_1d(model.energy(x)), None
    steps = spec.steps_for_slots(np.array([slot]))
    res = metropolis_move(spec, model, np.array([float(tau)]), steps, x, e, g, rng)
    return res.x[0]


def acceptance_log_ratio(spec: KernelSpec, model: PotentialModel, tau: float, x, prop, step: float) -> float:
    """Log Metropolis-Hastings ratio for moving ``x -> prop``.

    Computed from explicit forward/reverse proposal densities; used to check
    the vectorised path in :func:`metropolis_move`.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    prop = np.atleast_1d(np.asarray(prop, dtype=float))
    log_target = -(model.energy(prop[None])[0] - model.energy(x[None])[0]) / tau
    if spec.kind != "langevin-metropolis":
        return float(log_target)

    def log_q(to, frm):
        mean = frm - 0.5 * step * step * model.gradient(frm[None])[0] / tau
        r = to - mean
        return -0.5 * float(r @ r) / step**2

    return float(log_target + log_q(x, prop) - log_q(prop, x))


def grid_transition_matrix(model: Tabulated, tau: float) -> np.ndarray:
    """Exact transition matrix of the ``grid-metropolis`` kernel."""
    v = np.asarray(model.values)
    n = v.size
    P = np.zeros((n, n))
    for i in range(n):
        for j in (i - 1, i + 1):
            if 0 <= j < n:
                P[i, j] = 0.5 * min(1.0, np.exp(-(v[j] - v[i]) / tau))
        P[i, i] = 1.0 - P[i].sum()
    return P


# ---------------------------------------------------------------------------
# Euler-Maruyama integrators for the continuous-time models
# ---------------------------------------------------------------------------

def _check_dt(dt):
    if not dt > 0:
        raise InvalidArgumentError("time step must be positive")


def _drift_noise(model, state, dt, diffusion, rng):
    _, grad = model.energy_grad(state.coords)
    noise = rng.normals(state.coords.shape)
    coords = state.coords - grad * dt + np.sqrt(diffusion * dt)[:, None] * noise
    return state.with_coords(coords, sweep=state.sweep + 1)


def euler_maruyama_base(model: PotentialModel, ladder: TemperatureLadder | Sequence[float], state: ReplicaState,
                        dt: float, rng: RngStream) -> ReplicaState:
    """``y_i <- y_i - grad V(y_i) dt + sqrt(2 tau_i dt) N(0, I)``, independently per coordinate."""
    _check_dt(dt)
    taus = np.asarray(getattr(ladder, "taus", ladder), dtype=float)
    return _drift_noise(model, state, dt, 2.0 * taus, rng)


def infinite_swap_diffusion(model: PotentialModel, taus: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Per-coordinate diffusion coefficients ``sum_j 2 rho_ij tau_j`` of the limit SDE."""
    taus = np.asarray(taus, dtype=float)
    energies = np.atleast_1d(model.energy(coords))
    rho = log_weights(energies, taus, symmetric_group(len(taus))).rho()
    return 2.0 * rho @ taus


def euler_maruyama_infinite_swap(model: PotentialModel, ladder: TemperatureLadder | Sequence[float],
                                 state: ReplicaState, dt: float, rng: RngStream) -> ReplicaState:
    """Euler-Maruyama step of the infinite-swapping limit diffusion.

    With two temperatures the first coordinate has diffusion coefficient
    ``2 tau_1 rho(y1, y2) + 2 tau_2 rho(y2, y1)``; with K temperatures the
    full symmetric-group weights are used (K <= 6).
    """
    _check_dt(dt)
    taus = np.asarray(getattr(ladder, "taus", ladder), dtype=float)
    return _drift_noise(model, state, dt, infinite_swap_diffusion(model, taus, state.coords), rng)


def euler_maruyama_prelimit_swap(model: PotentialModel, ladder: TemperatureLadder | Sequence[float],
                                 state: ReplicaState, z: int, a: float, dt: float,
                                 rng: RngStream) -> tuple[ReplicaState, int]:
    """Temperature-swapped process with a binary assignment ``z``.

    ``z = 0``: coordinate 1 at ``tau_1``; ``z = 1``: temperatures exchanged.
    ``z`` flips with probability ``a * g * dt``, where ``g`` is evaluated in
    the argument order matching the current assignment.
    """
    _check_dt(dt)
    if a < 0:
        raise InvalidArgumentError("swap rate must be nonnegative")
    if a * dt > 1:
        raise InvalidStepError(f"a*dt = {a * dt} > 1; reduce the time step")
    taus = np.asarray(getattr(ladder, "taus", ladder), dtype=float)
    if taus.size != 2 or state.K != 2:
        raise InvalidArgumentError("the prelimit swap model has exactly two temperatures")
    e = np.atleast_1d(model.energy(state.coords))
    if z == 0:
        log_g = log_swap_acceptance(e[0], e[1], taus[0], taus[1])
        diffusion = 2.0 * taus
    else:
        log_g = log_swap_acceptance(e[1], e[0], taus[0], taus[1])
        diffusion = 2.0 * taus[::-1]
    flip = a > 0 and rng.uniform() < a * dt * np.exp(log_g)
    new = _drift_noise(model, state, dt, diffusion, rng)
    return new, (1 - z) if flip else z
