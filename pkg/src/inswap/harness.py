"""Experiment orchestration: equilibrium runs, relaxation studies, rate tables.

A run is described by one JSON document validated with pydantic (unknown
keys are rejected and errors carry dotted field paths).  Runs are
deterministic given the seed: replicate ``r`` draws from the stream keyed by
``(seed, r)``, replicates may execute on several threads, and their
accumulators are merged in replicate order, so the thread count never changes
the output bytes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Literal, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.optimize import minimize

from . import __version__
from .engine import CompiledRunner, supports
from .errors import ConfigError, InswapError, InvalidArgumentError
from .kernels import KINDS, KernelSpec
from .ldp import INF, FiniteChainSpec, i_infty_rate, ia_rate
from .measures import WeightedAccumulator, accumulate, estimates_csv, histogram_csv, merge, write_csv
from .permgroup import (DEFAULT_MAX_BLOCK, Permutation, PermutationSet, block_partition_subgroup,
                        generate_subgroup, generates_full_group, staggered_blocks)
from .potentials import LennardJonesCluster, PotentialModel, Tabulated, from_descriptor
from .rng import RngStream
from .samplers import PAIR_POLICIES, INSSampler, PINSSampler, PTSampler, PtSchedule, Sampler
from .state import ReplicaState, TemperatureLadder

NOT_RELAXED = None
"""Sentinel returned by :func:`relaxation_time` when the curve never settles."""


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PotentialConfig(_Strict):
    name: Literal["double_well", "harmonic", "tabulated", "lennard_jones"]
    params: dict[str, Any] = Field(default_factory=dict)


class KernelConfig(_Strict):
    kind: Literal[KINDS] = "rw-metropolis"
    step_size: Union[float, list[float]] = 0.5

    @field_validator("step_size")
    @classmethod
    def _positive(cls, v):
        if any(not h > 0 for h in np.atleast_1d(v)):
            raise ValueError("step sizes must be positive")
        return v


class SubgroupConfig(_Strict):
    blocks: list[int] | None = None
    generators: list[str] | None = None
    n_steps: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.blocks is None) == (self.generators is None):
            raise ValueError("give exactly one of 'blocks' or 'generators'")
        return self


class SamplerConfig(_Strict):
    kind: Literal["pt", "ins", "pins"]
    period: int | None = Field(None, ge=1)
    geometric_mean: float | None = Field(None, gt=0)
    pair_policy: Literal[PAIR_POLICIES] = "adjacent-sweep"
    subgroups: list[SubgroupConfig] | None = None
    scheme: Literal["staggered"] | None = None
    max_block: int = Field(DEFAULT_MAX_BLOCK, ge=1)
    n_steps: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _consistent(self):
        if self.kind != "pt" and (self.period is not None or self.geometric_mean is not None):
            raise ValueError("swap period only applies to kind 'pt'")
        if self.period is not None and self.geometric_mean is not None:
            raise ValueError("give either 'period' or 'geometric_mean', not both")
        if self.kind == "pins":
            if (self.subgroups is None) == (self.scheme is None):
                raise ValueError("pins needs exactly one of 'subgroups' or 'scheme'")
        elif self.subgroups is not None or self.scheme is not None:
            raise ValueError("subgroups only apply to kind 'pins'")
        return self


class HistogramConfig(_Strict):
    lo: float
    hi: float
    bins: int = Field(50, ge=1)

    @model_validator(mode="after")
    def _range(self):
        if not self.hi > self.lo:
            raise ValueError("'hi' must exceed 'lo'")
        return self

    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.bins + 1)


class RelaxationConfig(_Strict):
    cycle_moves: int = Field(ge=2)
    heat_window: tuple[int, int]
    heated_slots: int = Field(ge=0)
    heated_floor: float = Field(gt=0)
    n_cycles: int = Field(ge=1)
    equilibration: int | None = Field(None, ge=0)
    truth: float | None = None
    epsilon: float | None = Field(None, gt=0)
    window: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _window_in_cycle(self):
        s, e = self.heat_window
        if not (0 <= s <= self.cycle_moves and 0 <= e <= self.cycle_moves):
            raise ValueError("heat window must lie within the cycle")
        return self


class RunConfig(_Strict):
    potential: PotentialConfig
    ladder: list[float] = Field(min_length=1)
    kernel: KernelConfig = KernelConfig()
    sampler: SamplerConfig
    sweeps: int | None = Field(None, ge=1)
    burn_in: int | None = Field(None, ge=0)
    seed: int = Field(0, ge=0)
    replicates: int = Field(1, ge=1)
    threads: int = Field(1, ge=1)
    initial: Union[Literal["minimum", "local"], float, list[float], list[list[float]]] = "minimum"
    n_starts: int = Field(20, ge=1)
    observables: list[Literal["V", "x"]] = ["V"]
    histograms: dict[str, HistogramConfig] = Field(default_factory=dict)
    n_batches: int = Field(64, ge=2)
    engine: Literal["auto", "compiled", "reference"] = "auto"
    output: str | None = None
    relaxation: RelaxationConfig | None = None

    @field_validator("ladder")
    @classmethod
    def _increasing(cls, v):
        if any(not t > 0 for t in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("temperatures must be positive and strictly increasing")
        return v

    @model_validator(mode="after")
    def _histograms_registered(self):
        for name in self.histograms:
            if name not in self.observables:
                raise ValueError(f"histogram for unregistered observable {name!r}")
        if self.relaxation is not None and self.relaxation.heated_floor < self.ladder[0]:
            raise ValueError("relaxation.heated_floor must be at least the lowest temperature")
        if self.relaxation is not None and self.relaxation.heated_slots > len(self.ladder):
            raise ValueError("relaxation.heated_slots exceeds the number of temperatures")
        return self


class ChainConfig(_Strict):
    energies: list[float] | None = None
    taus: tuple[float, float] | None = None
    alpha1: list[list[float]] | None = None
    alpha2: list[list[float]] | None = None
    pi1: list[float] | None = None
    pi2: list[float] | None = None

    @model_validator(mode="after")
    def _one_form(self):
        tab = self.energies is not None and self.taus is not None
        mats = all(v is not None for v in (self.alpha1, self.alpha2, self.pi1, self.pi2))
        if tab == mats:
            raise ValueError("give either 'energies' and 'taus', or all of 'alpha1', 'alpha2', 'pi1', 'pi2'")
        return self

    def build(self) -> FiniteChainSpec:
        if self.energies is not None:
            return FiniteChainSpec.from_energies(self.energies, self.taus)
        return FiniteChainSpec(np.array(self.alpha1), np.array(self.alpha2), np.array(self.pi1), np.array(self.pi2))


class NuConfig(_Strict):
    id: str
    kind: Literal["mu", "masses"] = "masses"
    masses: list[float] | list[list[float]] | None = None
    symmetrize: bool = False

    @model_validator(mode="after")
    def _masses(self):
        if (self.kind == "masses") != (self.masses is not None):
            raise ValueError("'masses' is required exactly when kind is 'masses'")
        return self


class RateConfig(_Strict):
    chain: ChainConfig
    nus: list[NuConfig] = Field(min_length=1)
    rates: list[Union[float, Literal["inf"]]] = [0.0, 1.0, 10.0, "inf"]
    seed: int = 0
    output: str | None = None

    @field_validator("rates")
    @classmethod
    def _nonnegative(cls, v):
        if any(a != "inf" and not a >= 0 for a in v):
            raise ValueError("swap rates must be nonnegative")
        return v


def _format_error(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "; ".join(lines)


def parse_config(data: dict, schema: type[BaseModel] = RunConfig, **overrides) -> BaseModel:
    """Validate a config document, applying non-``None`` overrides first."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return schema.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_error(err)) from None


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def build_model(cfg: PotentialConfig) -> PotentialModel:
    try:
        return from_descriptor(cfg.name, cfg.params)
    except TypeError as err:
        raise ConfigError(f"potential.params: {err}") from None
    except InvalidArgumentError as err:
        raise ConfigError(f"potential.params: {err}") from None


def build_subgroups(cfg: SamplerConfig, K: int) -> tuple[list[PermutationSet], list[int]]:
    if cfg.scheme == "staggered":
        a, b = staggered_blocks(K, cfg.max_block)
        return [block_partition_subgroup(K, a, cfg.max_block), block_partition_subgroup(K, b, cfg.max_block)], \
            [cfg.n_steps, cfg.n_steps]
    groups, steps = [], []
    for i, sg in enumerate(cfg.subgroups):
        try:
            if sg.blocks is not None:
                groups.append(block_partition_subgroup(K, sg.blocks, max(cfg.max_block, max(sg.blocks))))
            else:
                gens = [Permutation.parse(s) for s in sg.generators]
                if any(p.K != K for p in gens):
                    raise InvalidArgumentError(f"generators must act on {K} slots")
                groups.append(generate_subgroup(gens))
        except InswapError as err:
            raise ConfigError(f"sampler.subgroups.{i}: {err}") from None
        steps.append(sg.n_steps)
    return groups, steps


def build_sampler(cfg: RunConfig, model: PotentialModel, rng: RngStream) -> Sampler:
    K = len(cfg.ladder)
    steps = np.atleast_1d(cfg.kernel.step_size)
    if steps.size not in (1, K):
        raise ConfigError(f"kernel.step_size: need 1 or {K} step sizes, got {steps.size}")
    spec = KernelSpec(cfg.kernel.kind, tuple(steps))
    s = cfg.sampler
    if s.kind == "pt":
        period = s.period if s.period is not None or s.geometric_mean is not None else 1
        return PTSampler(model, spec, rng, PtSchedule(period, s.geometric_mean, s.pair_policy))
    if s.kind == "ins":
        if K > 6:
            raise ConfigError(f"sampler.kind: full infinite swapping is capped at 6 temperatures (got {K}); use pins")
        return INSSampler(model, spec, rng)
    groups, n_steps = build_subgroups(s, K)
    return PINSSampler(model, spec, rng, groups, n_steps)


def low_energy_configuration(model: PotentialModel, rng: RngStream, n_starts: int = 20) -> np.ndarray:
    """Lowest local minimum found by L-BFGS-B from ``n_starts`` random starts."""
    if isinstance(model, Tabulated):
        return np.array([float(np.argmin(model.values))])
    d = model.dim
    half = 0.5 * model.n_atoms ** (1.0 / 3.0) if isinstance(model, LennardJonesCluster) else 2.0
    best_x, best_e = None, math.inf

    def fun(x):
        e, g = model.energy_grad(x)
        return float(e), np.asarray(g, dtype=float).ravel()

    for _ in range(n_starts):
        x0 = half * (2.0 * rng.uniforms(d) - 1.0)
        try:
            res = minimize(fun, x0, jac=True, method="L-BFGS-B")
        except InswapError:
            continue
        if np.isfinite(res.fun) and res.fun < best_e:
            best_x, best_e = res.x, float(res.fun)
    if best_x is None:
        raise ArithmeticError("no finite local minimum found from the random starts")
    return best_x


def initial_state(cfg: RunConfig, model: PotentialModel, replica: int) -> ReplicaState:
    K, d = len(cfg.ladder), model.dim
    ladder = TemperatureLadder(tuple(cfg.ladder))
    init = cfg.initial
    if init in ("minimum", "local"):
        n_starts = cfg.n_starts if init == "minimum" else 1
        x = low_energy_configuration(model, RngStream.for_purpose(cfg.seed, replica, "initial"), n_starts)
        coords = np.tile(x, (K, 1))
    else:
        arr = np.asarray(init, dtype=float)
        if arr.ndim == 0:
            arr = np.full(d, float(arr))
        if arr.ndim == 1 and arr.size == d:
            coords = np.tile(arr, (K, 1))
        elif arr.shape == (K, d):
            coords = arr
        elif d == 1 and arr.shape == (K,):
            coords = arr[:, None]
        else:
            raise ConfigError(f"initial: expected {d} coordinates or a {K}x{d} array")
    return ReplicaState(coords, ladder)


def _use_compiled(cfg: RunConfig, model: PotentialModel, sampler: Sampler) -> bool:
    if cfg.engine == "reference":
        return False
    ok = supports(model, sampler)
    if cfg.engine == "compiled" and not ok:
        raise ConfigError("engine: the compiled engine does not support this potential/sampler")
    return ok


def _check_finite(acc: WeightedAccumulator) -> None:
    if not (np.all(np.isfinite(acc.sums)) and np.all(np.isfinite(acc.sq_sums))):
        raise ArithmeticError("non-finite observable sums")


def _base_metadata(cfg: RunConfig, model: PotentialModel, sampler: Sampler, command: str, compiled: bool) -> dict:
    return {
        "command": command,
        "version": __version__,
        "potential": model.descriptor,
        "ladder": list(cfg.ladder),
        "kernel": {"kind": cfg.kernel.kind, "step_sizes": list(np.atleast_1d(cfg.kernel.step_size).tolist())},
        "sampler": sampler.metadata(),
        "seed": cfg.seed,
        "replicates": cfg.replicates,
        "engine": "compiled" if compiled else "reference",
    }


def _map_replicates(fn, n: int, threads: int) -> list:
    if threads <= 1 or n <= 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=min(threads, n)) as pool:
        return list(pool.map(fn, range(n)))


# ---------------------------------------------------------------------------
# equilibrium runs
# ---------------------------------------------------------------------------

@dataclass
class EquilibriumReport:
    accumulator: WeightedAccumulator
    metadata: dict
    csv: str
    histograms: dict[str, str]
    states: list[ReplicaState]
    min_energy: float


def _burn_in(cfg: RunConfig) -> int:
    return cfg.burn_in if cfg.burn_in is not None else cfg.sweeps // 10


def _equilibrium_replicate(cfg: RunConfig, model: PotentialModel, replica: int):
    rng = RngStream.for_purpose(cfg.seed, replica, "sample")
    sampler = build_sampler(cfg, model, rng)
    state = initial_state(cfg, model, replica)
    bins = {k: h.edges() for k, h in cfg.histograms.items()}
    acc = WeightedAccumulator(len(cfg.ladder), tuple(cfg.observables), bins, cfg.n_batches)
    burn = _burn_in(cfg)
    n_measure = cfg.sweeps - burn
    if n_measure < 2:
        raise ConfigError("sweeps: need at least two sweeps after burn-in")
    lowest = math.inf
    if _use_compiled(cfg, model, sampler):
        runner = CompiledRunner(sampler)
        for state, rec in runner.run(state, burn):
            lowest = min(lowest, float(rec.energies.min()))
        for state, rec in runner.run(state, n_measure):
            acc.add_many(rec.values(cfg.observables), rec.rho)
            lowest = min(lowest, float(rec.energies.min()))
        compiled = True
    else:
        for _ in range(burn):
            state = sampler.step(state).state
        for _ in range(n_measure):
            res = sampler.step(state)
            accumulate(acc, res.measured, res.table)
            lowest = min(lowest, float(np.min(res.measured.energies)))
            state = res.state
        compiled = False
    return acc, state, lowest, sampler, compiled


def run_equilibrium(cfg: RunConfig) -> EquilibriumReport:
    """Burn in, accumulate per-slot weighted estimates, and emit CSV text."""
    if cfg.sweeps is None:
        raise ConfigError("sweeps: field required for an equilibrium run")
    model = build_model(cfg.potential)
    results = _map_replicates(lambda r: _equilibrium_replicate(cfg, model, r), cfg.replicates, cfg.threads)
    acc = results[0][0]
    for other in results[1:]:
        acc = merge(acc, other[0])
    _check_finite(acc)
    sampler, compiled = results[0][3], results[0][4]
    meta = _base_metadata(cfg, model, sampler, "sample", compiled)
    meta.update({"sweeps": cfg.sweeps, "burn_in": _burn_in(cfg), "n_batches": cfg.n_batches})
    if isinstance(sampler, PINSSampler):
        meta["generates_full_group"] = generates_full_group(sampler.subgroups)
    text = estimates_csv(acc, meta)
    hists = {name: histogram_csv(acc, name, meta) for name in cfg.histograms}
    lowest = min(r[2] for r in results)
    report = EquilibriumReport(acc, meta, text, hists, [r[1] for r in results], lowest)
    if cfg.output:
        write_report(cfg.output, text, hists)
    return report


def write_report(path: str, text: str, histograms: dict[str, str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)
    root, ext = os.path.splitext(path)
    for name, body in (histograms or {}).items():
        with open(f"{root}_hist_{name}{ext or '.csv'}", "w", newline="") as fh:
            fh.write(body)


# ---------------------------------------------------------------------------
# relaxation studies
# ---------------------------------------------------------------------------

def heated_mask(protocol: RelaxationConfig) -> np.ndarray:
    """Boolean per move index: ``True`` inside the heat window.

    A window ``(start, end)`` with ``start > end`` wraps around the cycle end.
    """
    k = np.arange(protocol.cycle_moves)
    s, e = protocol.heat_window
    return (k >= s) & (k < e) if s <= e else (k >= s) | (k < e)


def cooling_segment(protocol: RelaxationConfig) -> tuple[int, int]:
    """``(onset, end)`` of the cooled stretch that follows the heat window."""
    s, e = protocol.heat_window
    if s == e:
        return 0, protocol.cycle_moves
    onset = e % protocol.cycle_moves
    end = s if s > onset else protocol.cycle_moves
    return onset, end


def _segments(mask: np.ndarray) -> list[tuple[int, int, bool]]:
    edges = np.flatnonzero(np.diff(mask.astype(np.int8))) + 1
    bounds = np.concatenate([[0], edges, [mask.size]])
    return [(int(a), int(b), bool(mask[a])) for a, b in zip(bounds[:-1], bounds[1:])]


def relaxation_time(curve: Sequence[float], truth: float, epsilon: float, onset: int = 0,
                    end: int | None = None, window: int = 1):
    """First index ``k >= onset`` after which the curve stays within ``epsilon`` of ``truth``.

    Only ``curve[onset:end]`` is examined; with ``window > 1`` a centred moving
    average (shrinking at the segment ends) is applied first.  Returns
    :data:`NOT_RELAXED` when even the last point is outside the band.
    """
    c = np.asarray(curve, dtype=float)
    if c.size == 0:
        raise InvalidArgumentError("curve is empty")
    end = c.size if end is None else end
    seg = c[onset:end]
    if seg.size == 0:
        raise InvalidArgumentError("empty cooling segment")
    if window > 1:
        half = window // 2
        csum = np.concatenate([[0.0], np.cumsum(seg)])
        lo = np.clip(np.arange(seg.size) - half, 0, seg.size)
        hi = np.clip(np.arange(seg.size) + half + 1, 0, seg.size)
        seg = (csum[hi] - csum[lo]) / (hi - lo)
    outside = np.flatnonzero(np.abs(seg - truth) > epsilon)
    if outside.size == 0:
        return onset
    last = int(outside[-1])
    if last == seg.size - 1:
        return NOT_RELAXED
    return onset + last + 1


@dataclass
class RelaxationReport:
    mean: np.ndarray
    stderr: np.ndarray
    heated: np.ndarray
    time: int | None
    truth: float | None
    epsilon: float | None
    metadata: dict
    csv: str


def _relaxation_replicate(cfg: RunConfig, model: PotentialModel, replica: int):
    p = cfg.relaxation
    rng = RngStream.for_purpose(cfg.seed, replica, "relax")
    sampler = build_sampler(cfg, model, rng)
    state = initial_state(cfg, model, replica)
    base = state.ladder
    hot = base.heated(p.heated_slots, p.heated_floor)
    mask = heated_mask(p)
    segs = _segments(mask)
    compiled = _use_compiled(cfg, model, sampler)
    runner = CompiledRunner(sampler) if compiled else None

    def advance(state, n):
        out = np.empty(n)
        if compiled:
            pos = 0
            for state, rec in runner.run(state, n):
                m = rec.energies.shape[0]
                out[pos:pos + m] = rec.slot_mean(1)
                pos += m
            return state, out
        for k in range(n):
            res = sampler.step(state)
            rho = res.table.rho()
            out[k] = float(res.measured.energies @ rho[:, 0])
            state = res.state
        return state, out

    equil = p.equilibration if p.equilibration is not None else 10 * p.cycle_moves
    if equil:
        state, _ = advance(state, equil)
    total = np.zeros(p.cycle_moves)
    total_sq = np.zeros(p.cycle_moves)
    for _ in range(p.n_cycles):
        for a, b, is_hot in segs:
            state = state.with_ladder(hot if is_hot else base)
            state, vals = advance(state, b - a)
            total[a:b] += vals
            total_sq[a:b] += vals * vals
    return total, total_sq, sampler, compiled


def run_relaxation(cfg: RunConfig) -> RelaxationReport:
    """Heating/cooling cycles; the slot-1 weighted energy averaged per move index."""
    p = cfg.relaxation
    if p is None:
        raise ConfigError("relaxation: field required for a relaxation run")
    model = build_model(cfg.potential)
    results = _map_replicates(lambda r: _relaxation_replicate(cfg, model, r), cfg.replicates, cfg.threads)
    total = sum(r[0] for r in results)
    total_sq = sum(r[1] for r in results)
    n = p.n_cycles * cfg.replicates
    mean = total / n
    if n > 1:
        var = np.maximum(total_sq / n - mean * mean, 0.0) * n / (n - 1)
        stderr = np.sqrt(var / n)
    else:
        stderr = np.full_like(mean, math.nan)
    if not np.all(np.isfinite(mean)):
        raise ArithmeticError("non-finite relaxation curve")
    mask = heated_mask(p)
    onset, end = cooling_segment(p)
    eps = p.epsilon
    if eps is None and n > 1:
        tail = stderr[onset + 3 * (end - onset) // 4:end]
        eps = 3.0 * float(np.median(tail)) if tail.size else None
    time = None
    if p.truth is not None and eps is not None:
        time = relaxation_time(mean, p.truth, eps, onset, end, p.window)
    sampler, compiled = results[0][2], results[0][3]
    meta = _base_metadata(cfg, model, sampler, "relax", compiled)
    meta.update({"protocol": p.model_dump(mode="json"), "cooling_segment": [onset, end],
                 "epsilon": eps, "relaxation_time": "not-relaxed" if time is NOT_RELAXED else time})
    rows = [{"move": k, "heated": int(mask[k]), "mean": float(mean[k]), "stderr": float(stderr[k])}
            for k in range(p.cycle_moves)]
    text = write_csv(rows, meta, ["move", "heated", "mean", "stderr"])
    if cfg.output:
        write_report(cfg.output, text)
    return RelaxationReport(mean, stderr, mask, time, p.truth, eps, meta, text)


def lj38_ladder() -> list[float]:
    """45 temperatures: 0.050 to 0.210 in steps of 0.005, then to 0.330 in steps of 0.010."""
    low = [round(0.050 + 0.005 * i, 3) for i in range(33)]
    high = [round(0.220 + 0.010 * i, 3) for i in range(12)]
    return low + high


LJ38_PROTOCOL = RelaxationConfig(cycle_moves=1200, heat_window=(800, 200), heated_slots=15,
                                 heated_floor=0.150, n_cycles=600)
LJ13_LADDER = [0.05, 0.12, 0.25, 0.40]
LJ13_PROTOCOL = RelaxationConfig(cycle_moves=400, heat_window=(0, 50), heated_slots=2,
                                 heated_floor=0.25, n_cycles=2000)


# ---------------------------------------------------------------------------
# rate tables
# ---------------------------------------------------------------------------

@dataclass
class RateReport:
    rows: list[dict]
    metadata: dict
    csv: str


def _nu_masses(spec: FiniteChainSpec, nu: NuConfig) -> np.ndarray:
    if nu.kind == "mu":
        m = spec.mu
    else:
        m = np.asarray(nu.masses, dtype=float).ravel()
        if m.size != spec.n ** 2:
            raise ConfigError(f"nus.{nu.id}.masses: need {spec.n ** 2} masses, got {m.size}")
        if np.any(m < 0) or not m.sum() > 0:
            raise ConfigError(f"nus.{nu.id}.masses: masses must be nonnegative with positive total")
        m = m / m.sum()
    if nu.symmetrize:
        # theta symmetric: nu(x1, x2) / mu(x1, x2) averaged with its exchange
        mu = spec.mu
        theta = m / mu
        m = 0.5 * (theta + theta[spec.swap_index()]) * mu
        m = m / m.sum()
    return m


def run_rates(cfg: RateConfig) -> RateReport:
    """``I^a(nu)`` for every configured measure and swap rate."""
    try:
        spec = cfg.chain.build()
    except InvalidArgumentError as err:
        raise ConfigError(f"chain: {err}") from None
    rows = []
    for nu in cfg.nus:
        m = _nu_masses(spec, nu)
        for a in cfg.rates:
            val = i_infty_rate(spec, m) if a == "inf" else ia_rate(spec, m, float(a))
            if math.isnan(val):
                raise ArithmeticError(f"rate for {nu.id} at a={a} is not a number")
            rows.append({"nu_id": nu.id, "a": INF if a == "inf" else float(a), "I_a": val})
    meta = {"command": "rate", "version": __version__, "n_states": spec.n, "rates": list(cfg.rates)}
    text = write_csv(rows, meta, ["nu_id", "a", "I_a"])
    if cfg.output:
        write_report(cfg.output, text)
    return RateReport(rows, meta, text)
