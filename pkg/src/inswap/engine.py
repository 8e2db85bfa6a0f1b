"""Compiled run loops for long sampler runs.

The step-by-step samplers in :mod:`inswap.samplers` are the reference
implementation.  This module runs the same algorithms inside numba-compiled
loops, reading the same buffered random variates in the same order, so a
compiled run and a reference run from the same stream visit the same states
(up to last-bit differences in ``exp``/``log`` and in the order of the
Lennard-Jones pair sums).

Each step records the measured state's energies, first coordinates and rho
matrix; :func:`run_steps` hands these to the accumulator in bulk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InvalidArgumentError
from .kernels import KINDS, KernelSpec
from .permgroup import PermutationSet
from .potentials import DoubleWell, Harmonic, LennardJonesCluster, PotentialModel, Tabulated
from .rng import RngStream
from .samplers import PAIR_POLICIES, INSSampler, PINSSampler, PTSampler, Sampler, full_group, prepare
from .state import ReplicaState

POT_DOUBLE_WELL, POT_HARMONIC, POT_TABULATED, POT_LJ = 0, 1, 2, 3
MODE_PT, MODE_SET = 0, 1
CHUNK = 4096


def potential_code(model: PotentialModel) -> tuple[int, np.ndarray]:
    """Integer code and parameter vector of a model the engine can evaluate."""
    if isinstance(model, DoubleWell):
        return POT_DOUBLE_WELL, np.array([model.barrier, model.asymmetry])
    if isinstance(model, Harmonic):
        return POT_HARMONIC, np.array([model.stiffness])
    if isinstance(model, Tabulated):
        return POT_TABULATED, np.asarray(model.values, dtype=float)
    if isinstance(model, LennardJonesCluster):
        return POT_LJ, np.array([model.n_atoms, model.container_radius, model.container_strength], dtype=float)
    raise InvalidArgumentError(f"no compiled evaluator for potential {model.name!r}")


def supports(model: PotentialModel, sampler: Sampler) -> bool:
    try:
        potential_code(model)
    except InvalidArgumentError:
        return False
    return isinstance(sampler, (PTSampler, INSSampler, PINSSampler))


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

@njit(cache=True)
def _lj(x, params, g, need_grad):
    n = int(params[0])
    radius = params[1]
    strength = params[2]
    e = 0.0
    singular = False
    if need_grad:
        for k in range(3 * n):
            g[k] = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[3 * i] - x[3 * j]
            dy = x[3 * i + 1] - x[3 * j + 1]
            dz = x[3 * i + 2] - x[3 * j + 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 == 0.0:
                singular = True
                continue
            inv2 = 1.0 / r2
            inv6 = inv2 * inv2 * inv2
            e += 4.0 * (inv6 * inv6 - inv6)
            if need_grad:
                coef = (-48.0 * inv6 * inv6 + 24.0 * inv6) * inv2
                g[3 * i] += coef * dx
                g[3 * i + 1] += coef * dy
                g[3 * i + 2] += coef * dz
                g[3 * j] -= coef * dx
                g[3 * j + 1] -= coef * dy
                g[3 * j + 2] -= coef * dz
    cx = 0.0
    cy = 0.0
    cz = 0.0
    for i in range(n):
        cx += x[3 * i]
        cy += x[3 * i + 1]
        cz += x[3 * i + 2]
    cx /= n
    cy /= n
    cz /= n
    mx = 0.0
    my = 0.0
    mz = 0.0
    radial = np.zeros(3 * n)
    for i in range(n):
        rx = x[3 * i] - cx
        ry = x[3 * i + 1] - cy
        rz = x[3 * i + 2] - cz
        dist = math.sqrt(rx * rx + ry * ry + rz * rz)
        excess = dist - radius
        if excess > 0.0:
            e += strength * excess ** 4
            if need_grad:
                f = 4.0 * strength * excess ** 3 / dist
                radial[3 * i] = f * rx
                radial[3 * i + 1] = f * ry
                radial[3 * i + 2] = f * rz
                mx += f * rx
                my += f * ry
                mz += f * rz
    if need_grad:
        for i in range(n):
            g[3 * i] += radial[3 * i] - mx / n
            g[3 * i + 1] += radial[3 * i + 1] - my / n
            g[3 * i + 2] += radial[3 * i + 2] - mz / n
    if singular:
        if need_grad:
            for k in range(3 * n):
                g[k] = np.nan
        return np.inf
    return e


@njit(cache=True)
def _energy_grad(code, params, x, g, need_grad):
    """Energy of one position ``x``; writes the gradient into ``g`` when asked."""
    if code == 0:
        y = x[0]
        u = y * y - 1.0
        if need_grad:
            g[0] = 4.0 * params[0] * y * u + params[1]
        return params[0] * u * u + params[1] * y
    if code == 1:
        s = 0.0
        for k in range(x.size):
            s += x[k] * x[k]
            if need_grad:
                g[k] = params[0] * x[k]
        return 0.5 * params[0] * s
    if code == 2:
        if need_grad:
            g[0] = 0.0
        i = int(np.rint(x[0]))
        if i < 0 or i >= params.size:
            return np.inf
        return params[i]
    return _lj(x, params, g, need_grad)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

@njit(cache=True)
def _np_sum(a, n):
    """Sum of ``a[:n]`` in the same order as numpy's pairwise reduction."""
    return _pairwise(a, 0, n)


@njit(cache=True)
def _pairwise_leaf(a, start, n):
    if n < 8:
        res = 0.0
        for i in range(n):
            res += a[start + i]
        return res
    r = np.empty(8)
    for j in range(8):
        r[j] = a[start + j]
    i = 8
    while i < n - (n % 8):
        for j in range(8):
            r[j] += a[start + i + j]
        i += 8
    res = ((r[0] + r[1]) + (r[2] + r[3])) + ((r[4] + r[5]) + (r[6] + r[7]))
    while i < n:
        res += a[start + i]
        i += 1
    return res


@njit(cache=True)
def _pairwise(a, start, n):
    # numpy splits blocks longer than 128 in halves (rounded to multiples of 8)
    # and adds the two halves; done here with an explicit stack, since numba's
    # on-disk cache does not handle recursive functions
    if n <= 128:
        return _pairwise_leaf(a, start, n)
    st_start = np.empty(64, dtype=np.int64)
    st_n = np.empty(64, dtype=np.int64)
    st_state = np.zeros(64, dtype=np.int64)
    vals = np.empty(64)
    top = 0
    st_start[0] = start
    st_n[0] = n
    st_state[0] = 0
    result = 0.0
    while top >= 0:
        s0 = st_start[top]
        n0 = st_n[top]
        n2 = n0 // 2
        n2 -= n2 % 8
        if st_state[top] == 0:
            if n0 <= 128:
                result = _pairwise_leaf(a, s0, n0)
                top -= 1
                continue
            st_state[top] = 1
            top += 1
            st_start[top] = s0
            st_n[top] = n2
            st_state[top] = 0
        elif st_state[top] == 1:
            vals[top] = result
            st_state[top] = 2
            top += 1
            st_start[top] = s0 + n2
            st_n[top] = n0 - n2
            st_state[top] = 0
        else:
            result = vals[top] + result
            top -= 1
    return result


@njit(cache=True)
def _part_weights(e, taus, slots, tab, m, b, w):
    """Normalised weights of one factor, written into ``w[:m]``."""
    s = np.empty(m)
    for k in range(m):
        acc = 0.0
        for j in range(b):
            acc += e[slots[tab[k * b + j]]] / taus[slots[j]]
        s[k] = -acc
    smax = s[0]
    for k in range(1, m):
        if s[k] > smax:
            smax = s[k]
    for k in range(m):
        w[k] = math.exp(s[k] - smax)
    total = _np_sum(w, m)
    for k in range(m):
        w[k] = w[k] / total


@njit(cache=True)
def _categorical(w, m, u):
    cdf = np.empty(m)
    acc = 0.0
    for k in range(m):
        acc += w[k]
        cdf[k] = acc
    target = u * cdf[m - 1]
    i = np.searchsorted(cdf, target, side="right")
    return min(i, m - 1)


@njit(cache=True)
def _table_step(e, taus, g_idx, part_lo, part_hi, slot_off, slot_len, slots_flat, tab_off, tab_m,
                tab_flat, ubuf, ui, sigma, rho, want_rho):
    """Weights of subgroup ``g_idx`` at energies ``e``: draw sigma, optionally fill rho."""
    K = e.size
    for i in range(K):
        sigma[i] = i
    if want_rho:
        for i in range(K):
            for j in range(K):
                rho[i, j] = 1.0 if i == j else 0.0
    w = np.empty(1)
    for p in range(part_lo[g_idx], part_hi[g_idx]):
        b = slot_len[p]
        m = tab_m[p]
        slots = slots_flat[slot_off[p]:slot_off[p] + b]
        tab = tab_flat[tab_off[p]:tab_off[p] + m * b]
        if w.size < m:
            w = np.empty(m)
        _part_weights(e, taus, slots, tab, m, b, w)
        idx = _categorical(w, m, ubuf[ui])
        ui += 1
        for j in range(b):
            sigma[slots[j]] = slots[tab[idx * b + j]]
        if want_rho:
            for a in range(b):
                for c in range(b):
                    rho[slots[a], slots[c]] = 0.0
            for k in range(m):
                for j in range(b):
                    rho[slots[tab[k * b + j]], slots[j]] += w[k]
    return ui


# ---------------------------------------------------------------------------
# moves
# ---------------------------------------------------------------------------

@njit(cache=True)
def _move(kernel, code, params, x, e, g, temps, steps, ubuf, ui, nbuf, ni, accepted):
    """Metropolis move of every row of ``x`` in place; mirrors ``metropolis_move``."""
    K, d = x.shape
    prop = np.empty(d)
    gp = np.empty(d)
    if kernel == 0:
        e_new = np.empty(K)
        props = np.empty((K, d))
        for c in range(K):
            for k in range(d):
                props[c, k] = x[c, k] + steps[c] * nbuf[ni + c * d + k]
            e_new[c] = _energy_grad(code, params, props[c], gp, False)
        ni += K * d
        for c in range(K):
            log_acc = -(e_new[c] - e[c]) / temps[c]
            if math.log(ubuf[ui + c]) < log_acc and math.isfinite(e_new[c]):
                for k in range(d):
                    x[c, k] = props[c, k]
                e[c] = e_new[c]
                accepted[c] += 1
        ui += K
    elif kernel == 1:
        gnew = np.empty((K, d))
        e_new = np.empty(K)
        props = np.empty((K, d))
        lacc = np.empty(K)
        sq = np.empty(d)
        for c in range(K):
            h = steps[c]
            t = temps[c]
            for k in range(d):
                xi = nbuf[ni + c * d + k]
                props[c, k] = x[c, k] - 0.5 * h * h * g[c, k] / t + h * xi
                sq[k] = xi * xi
            log_fwd = -0.5 * _np_sum(sq, d)
            e_new[c] = _energy_grad(code, params, props[c], gnew[c], True)
            for k in range(d):
                bk = x[c, k] - props[c, k] + 0.5 * h * h * gnew[c, k] / t
                sq[k] = bk * bk
            log_bwd = -0.5 * _np_sum(sq, d) / (h * h)
            lacc[c] = -(e_new[c] - e[c]) / t + log_bwd - log_fwd
        ni += K * d
        for c in range(K):
            if math.log(ubuf[ui + c]) < lacc[c] and math.isfinite(e_new[c]):
                for k in range(d):
                    x[c, k] = props[c, k]
                    g[c, k] = gnew[c, k]
                e[c] = e_new[c]
                accepted[c] += 1
        ui += K
    else:
        e_new = np.empty(K)
        props = np.empty((K, d))
        for c in range(K):
            for k in range(d):
                props[c, k] = x[c, k]
            props[c, 0] += -1.0 if ubuf[ui + c] < 0.5 else 1.0
            e_new[c] = _energy_grad(code, params, props[c], gp, False)
        ui += K
        for c in range(K):
            log_acc = -(e_new[c] - e[c]) / temps[c]
            if math.log(ubuf[ui + c]) < log_acc and math.isfinite(e_new[c]):
                for k in range(d):
                    x[c, k] = props[c, k]
                e[c] = e_new[c]
                accepted[c] += 1
        ui += K
    return ui, ni


@njit(cache=True)
def _permute_rows(x, e, g, sigma, has_g):
    x[:] = x[sigma].copy()
    e[:] = e[sigma].copy()
    if has_g:
        g[:] = g[sigma].copy()


@njit(cache=True, nogil=True)
def _run(n_max, mode, kernel, code, params, x, e, g, has_g, taus, slot_steps,
         period, geo_mean, policy, counters,
         part_lo, part_hi, slot_off, slot_len, slots_flat, tab_off, tab_m, tab_flat,
         n_steps, do_handoff, ubuf, ui, nbuf, ni, u_need, n_need,
         rec_e, rec_x, rec_rho, accepted, swaps):
    """Run up to ``n_max`` steps; stop early when the random buffers run low.

    ``counters`` holds (sweep, swap_attempts, subgroup index, steps in
    subgroup) and is updated in place.  Returns (steps done, ui, ni).
    """
    K = x.shape[0]
    temps = np.empty(K)
    steps = np.empty(K)
    sigma = np.empty(K, dtype=np.int64)
    rho = np.empty((K, K))
    dummy = np.empty((K, K))
    done = 0
    while done < n_max and ui + u_need <= ubuf.size and ni + n_need <= nbuf.size:
        rec_e[done] = e
        rec_x[done] = x[:, 0]
        if mode == 0:
            for i in range(K):
                for j in range(K):
                    rec_rho[done, i, j] = 1.0 if i == j else 0.0
            swap_now = False
            if K > 1:
                if geo_mean > 0.0:
                    swap_now = ubuf[ui] < 1.0 / (geo_mean + 1.0)
                    ui += 1
                else:
                    swap_now = (counters[0] + 1) % (period + 1) == 0
            if swap_now:
                if policy == 0:
                    i = counters[1] % (K - 1)
                    j = i + 1
                elif policy == 1:
                    i = min(int(ubuf[ui] * (K - 1)), K - 2)
                    ui += 1
                    j = i + 1
                else:
                    a = min(int(ubuf[ui] * K), K - 1)
                    b = min(int(ubuf[ui + 1] * (K - 1)), K - 2)
                    ui += 2
                    if b >= a:
                        b += 1
                    i = min(a, b)
                    j = max(a, b)
                log_acc = min(0.0, (1.0 / taus[i] - 1.0 / taus[j]) * (e[i] - e[j]))
                ok = log_acc >= 0.0
                if not ok:
                    ok = math.log(ubuf[ui]) < log_acc
                    ui += 1
                if ok:
                    for k in range(K):
                        sigma[k] = k
                    sigma[i] = j
                    sigma[j] = i
                    _permute_rows(x, e, g, sigma, has_g)
                    swaps[i] += 1
                counters[1] += 1
            else:
                for c in range(K):
                    temps[c] = taus[c]
                    steps[c] = slot_steps[c]
                ui, ni = _move(kernel, code, params, x, e, g, temps, steps, ubuf, ui, nbuf, ni, accepted)
        else:
            if do_handoff and counters[3] == n_steps[counters[2]]:
                ui = _table_step(e, taus, counters[2], part_lo, part_hi, slot_off, slot_len, slots_flat,
                                 tab_off, tab_m, tab_flat, ubuf, ui, sigma, dummy, False)
                _permute_rows(x, e, g, sigma, has_g)
                counters[2] = (counters[2] + 1) % n_steps.size
                counters[3] = 0
                rec_e[done] = e
                rec_x[done] = x[:, 0]
            counters[3] += 1
            ui = _table_step(e, taus, counters[2], part_lo, part_hi, slot_off, slot_len, slots_flat,
                             tab_off, tab_m, tab_flat, ubuf, ui, sigma, rho, True)
            rec_rho[done] = rho
            for c in range(K):
                temps[sigma[c]] = taus[c]
                steps[sigma[c]] = slot_steps[c]
            ui, ni = _move(kernel, code, params, x, e, g, temps, steps, ubuf, ui, nbuf, ni, accepted)
        counters[0] += 1
        done += 1
    return done, ui, ni


# ---------------------------------------------------------------------------
# Python driver
# ---------------------------------------------------------------------------

@dataclass
class GroupArrays:
    part_lo: np.ndarray
    part_hi: np.ndarray
    slot_off: np.ndarray
    slot_len: np.ndarray
    slots_flat: np.ndarray
    tab_off: np.ndarray
    tab_m: np.ndarray
    tab_flat: np.ndarray
    max_parts: int


def flatten_groups(subgroups: list[PermutationSet]) -> GroupArrays:
    part_lo, part_hi, slot_off, slot_len, slots, tab_off, tab_m, tabs = [], [], [], [], [], [], [], []
    n_slots = n_tab = n_parts = max_parts = 0
    for g in subgroups:
        factors = g.factors()
        part_lo.append(n_parts)
        for sl, local in factors:
            slot_off.append(n_slots)
            slot_len.append(len(sl))
            slots.append(np.asarray(sl, dtype=np.int64))
            n_slots += len(sl)
            t = np.asarray(local.table, dtype=np.int64).ravel()
            tab_off.append(n_tab)
            tab_m.append(local.order)
            tabs.append(t)
            n_tab += t.size
            n_parts += 1
        part_hi.append(n_parts)
        max_parts = max(max_parts, len(factors))
    cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0, dtype=np.int64)
    arr = lambda xs: np.asarray(xs, dtype=np.int64)
    return GroupArrays(arr(part_lo), arr(part_hi), arr(slot_off), arr(slot_len), cat(slots),
                       arr(tab_off), arr(tab_m), cat(tabs), max_parts)


@dataclass
class Records:
    """Per-step records of a compiled run: measured energies, first coordinates, rho."""

    energies: np.ndarray
    x0: np.ndarray
    rho: np.ndarray

    def values(self, names) -> np.ndarray:
        """Observable values shaped (steps, observables, K)."""
        cols = {"V": self.energies, "x": self.x0}
        return np.stack([cols[n] for n in names], axis=1)

    def slot_mean(self, slot: int = 1) -> np.ndarray:
        """Per-step weighted energy of one temperature slot."""
        return np.einsum("nk,nk->n", self.energies, self.rho[:, :, slot - 1])


class CompiledRunner:
    """Advance a :class:`~inswap.samplers.Sampler` with the compiled loop.

    The sampler's own counters (PINS subgroup position) and random stream are
    updated so that reference steps and compiled steps may be mixed.
    """

    def __init__(self, sampler: Sampler):
        self.sampler = sampler
        self.model = sampler.model
        self.spec: KernelSpec = sampler.spec
        self.code, self.params = potential_code(self.model)
        self.kernel = KINDS.index(self.spec.kind)
        if isinstance(sampler, PTSampler):
            self.mode = MODE_PT
            self.groups = None
        else:
            self.mode = MODE_SET
            self.groups = None  # built on first use, once K is known
        self.accepted = None
        self.swaps = None

    def _groups_for(self, K: int) -> tuple[GroupArrays, np.ndarray, bool]:
        s = self.sampler
        if isinstance(s, PINSSampler):
            return flatten_groups(s.subgroups), np.asarray(s.n_steps, dtype=np.int64), True
        return flatten_groups([full_group(K)]), np.array([1], dtype=np.int64), False

    def run(self, state: ReplicaState, n_steps: int, chunk: int = CHUNK):
        """Advance ``n_steps`` steps; yields ``(state, Records)`` per chunk."""
        s = self.sampler
        state = prepare(state, self.model, self.spec)
        K, d = state.K, state.d
        x = np.array(state.coords, dtype=float)
        e = np.array(state.energies, dtype=float)
        has_g = state.grads is not None
        g = np.array(state.grads, dtype=float) if has_g else np.zeros((K, d))
        taus = np.asarray(state.taus, dtype=float)
        slot_steps = self.spec.steps_for_slots(np.arange(K)).astype(float)
        if self.accepted is None or self.accepted.size != K:
            self.accepted = np.zeros(K, dtype=np.int64)
            self.swaps = np.zeros(K, dtype=np.int64)
        if self.mode == MODE_PT:
            sch = s.schedule
            period = int(sch.period or 1)
            geo = float(sch.geometric_mean) if sch.geometric_mean is not None else -1.0
            policy = PAIR_POLICIES.index(sch.pair_policy)
            ga = flatten_groups([full_group(1)])
            nst = np.array([1], dtype=np.int64)
            handoff = False
            counters = np.array([state.sweep, state.swap_attempts, 0, 0], dtype=np.int64)
            u_need, n_need = 4 + K, K * d
        else:
            period, geo, policy = 1, -1.0, 0
            if self.groups is None:
                self.groups = self._groups_for(K)
            ga, nst, handoff = self.groups
            which = getattr(s, "_which", 0)
            count = getattr(s, "_count", 0)
            counters = np.array([state.sweep, state.swap_attempts, which, count], dtype=np.int64)
            u_need, n_need = 2 * ga.max_parts + 2 * K, K * d
        rng: RngStream = s.rng
        remaining = int(n_steps)
        while remaining > 0:
            m = min(chunk, remaining)
            rec_e = np.empty((m, K))
            rec_x = np.empty((m, K))
            rec_rho = np.empty((m, K, K))
            filled = 0
            while filled < m:
                rng.ensure_uniforms(u_need * min(m - filled, 256) + u_need)
                rng.ensure_normals(n_need * min(m - filled, 256) + n_need)
                done, ui, ni = _run(m - filled, self.mode, self.kernel, self.code, self.params, x, e, g, has_g,
                                    taus, slot_steps, period, geo, policy, counters,
                                    ga.part_lo, ga.part_hi, ga.slot_off, ga.slot_len, ga.slots_flat,
                                    ga.tab_off, ga.tab_m, ga.tab_flat, nst, handoff,
                                    rng._u, rng._ui, rng._n, rng._ni, u_need, n_need,
                                    rec_e[filled:], rec_x[filled:], rec_rho[filled:],
                                    self.accepted, self.swaps)
                rng._ui, rng._ni = int(ui), int(ni)
                filled += int(done)
            remaining -= m
            if self.mode == MODE_SET and isinstance(s, PINSSampler):
                s._which, s._count = int(counters[2]), int(counters[3])
            state = state.with_coords(x.copy(), e.copy(), g.copy() if has_g else None,
                                      sweep=int(counters[0]), swap_attempts=int(counters[1]))
            yield state, Records(rec_e, rec_x, rec_rho)


def run_steps(sampler: Sampler, state: ReplicaState, n_steps: int, chunk: int = CHUNK):
    """Convenience wrapper: run and return the final state with concatenated records."""
    parts = []
    for state, rec in CompiledRunner(sampler).run(state, n_steps, chunk):
        parts.append(rec)
    if not parts:
        K = state.K
        return state, Records(np.empty((0, K)), np.empty((0, K)), np.empty((0, K, K)))
    return state, Records(np.concatenate([p.energies for p in parts]), np.concatenate([p.x0 for p in parts]),
                          np.concatenate([p.rho for p in parts]))
