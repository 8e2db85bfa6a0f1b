import json
import math

import numpy as np
import pytest

from conftest import DW_FIXTURE_TAU03_MEAN_V, DW_FIXTURE_TAU03_SD_V
from inswap.errors import ConfigError
from inswap.harness import (LJ13_LADDER, LJ13_PROTOCOL, LJ38_PROTOCOL, NOT_RELAXED, RateConfig, RelaxationConfig,
                            build_model, build_sampler, cooling_segment, heated_mask, initial_state, lj38_ladder, parse_config,
                            relaxation_time, run_equilibrium, run_rates, run_relaxation)
from inswap.rng import RngStream
from inswap.samplers import PINSSampler, PTSampler


def dw_config(**extra):
    base = {
        "potential": {"name": "double_well", "params": {"barrier": 4.0, "asymmetry": 0.5}},
        "ladder": [0.3, 1.0],
        "kernel": {"kind": "rw-metropolis", "step_size": [0.5, 0.8]},
        "sampler": {"kind": "ins"},
        "sweeps": 20000,
        "seed": 3,
        "initial": -1.0,
        "observables": ["V", "x"],
    }
    base.update(extra)
    return base


# -- configuration -------------------------------------------------------------

def test_config_errors_carry_field_paths():
    with pytest.raises(ConfigError, match=r"sampler\.bogus: Extra inputs"):
        parse_config(dw_config(sampler={"kind": "ins", "bogus": 1}))
    with pytest.raises(ConfigError, match=r"^ladder: "):
        parse_config(dw_config(ladder=[1.0, 0.3]))
    with pytest.raises(ConfigError, match=r"kernel\.step_size"):
        parse_config(dw_config(kernel={"step_size": -1.0}))
    with pytest.raises(ConfigError, match=r"^potential\.params"):
        run_equilibrium(parse_config(dw_config(potential={"name": "double_well", "params": {"depth": 2}})))
    with pytest.raises(ConfigError, match="unregistered"):
        parse_config(dw_config(observables=["V"], histograms={"x": {"lo": -2, "hi": 2}}))
    with pytest.raises(ConfigError, match="sampler"):
        parse_config(dw_config(sampler={"kind": "ins", "period": 3}))
    with pytest.raises(ConfigError, match="heated_floor"):
        parse_config(dw_config(relaxation={"cycle_moves": 10, "heat_window": [0, 2], "heated_slots": 1,
                                           "heated_floor": 0.1, "n_cycles": 1}))


def test_overrides_apply_only_when_given():
    cfg = parse_config(dw_config(), seed=None, output=None, threads=4)
    assert cfg.seed == 3 and cfg.threads == 4
    assert parse_config(dw_config(), seed=11).seed == 11


def test_build_sampler_defaults_and_capacity():
    cfg = parse_config(dw_config(sampler={"kind": "pt"}))
    s = build_sampler(cfg, None, RngStream(0))
    assert isinstance(s, PTSampler) and s.schedule.period == 1
    seven = {"ladder": [0.1 * k for k in range(1, 8)], "kernel": {"step_size": 0.5}}
    big = parse_config(dw_config(sampler={"kind": "ins"}, **seven))
    with pytest.raises(ConfigError, match=r"sampler\.kind: .*capped at 6"):
        run_equilibrium(big)
    pins = parse_config(dw_config(sampler={"kind": "pins", "scheme": "staggered", "max_block": 4}, **seven))
    s = build_sampler(pins, None, RngStream(0))
    assert isinstance(s, PINSSampler) and len(s.subgroups) == 2


def test_initial_states():
    cfg = parse_config(dw_config(initial=[-1.0, 1.0]))
    s = initial_state(cfg, build_model(cfg.potential), 0)
    assert s.coords[:, 0].tolist() == [-1.0, 1.0]
    cfg = parse_config(dw_config(initial="minimum"))
    s = initial_state(cfg, build_model(cfg.potential), 0)
    assert np.allclose(s.coords[0], s.coords[1])
    assert s.coords[0, 0] < 0  # the asymmetry favours the left well


# -- equilibrium runs ------------------------------------------------------------

def test_equilibrium_is_deterministic_and_reports_metadata():
    a = run_equilibrium(parse_config(dw_config()))
    b = run_equilibrium(parse_config(dw_config()))
    assert a.csv == b.csv
    meta = json.loads(a.csv.splitlines()[0][2:])
    assert meta["seed"] == 3 and meta["sweeps"] == 20000 and meta["burn_in"] == 2000
    assert meta["command"] == "sample"
    c = run_equilibrium(parse_config(dw_config(seed=4)))
    assert c.csv != a.csv


def test_thread_count_does_not_change_output():
    one = run_equilibrium(parse_config(dw_config(replicates=3, threads=1)))
    three = run_equilibrium(parse_config(dw_config(replicates=3, threads=3)))
    assert one.csv.splitlines()[1:] == three.csv.splitlines()[1:]


def test_compiled_and_reference_engines_agree():
    comp = run_equilibrium(parse_config(dw_config(sweeps=3000, engine="compiled")))
    ref = run_equilibrium(parse_config(dw_config(sweeps=3000, engine="reference")))
    for slot in (1, 2):
        assert comp.accumulator.estimate("V", slot)[0] == pytest.approx(ref.accumulator.estimate("V", slot)[0],
                                                                         rel=1e-9)


def test_equilibrium_estimate_and_stderr():
    rep = run_equilibrium(parse_config(dw_config(sweeps=200000)))
    mean, err = rep.accumulator.estimate("V", 1)
    assert math.isfinite(err) and err > 0
    assert abs(mean - DW_FIXTURE_TAU03_MEAN_V) < 3 * err
    for row in rep.accumulator.estimates_rows():
        assert math.isfinite(row["stderr"]) and row["stderr"] > 0


def test_histogram_files_written(tmp_path):
    out = tmp_path / "run.csv"
    cfg = parse_config(dw_config(sweeps=4000, histograms={"x": {"lo": -2, "hi": 2, "bins": 40}}), output=str(out))
    run_equilibrium(cfg)
    assert out.exists()
    hist = (tmp_path / "run_hist_x.csv").read_text().splitlines()
    assert hist[0].startswith("# ") and len(hist) == 2 + 2 * 40


# -- relaxation ------------------------------------------------------------------

def test_relaxation_time_examples():
    assert relaxation_time([1.0] * 10, 1.0, 0.1) == 0
    assert relaxation_time([1.0] * 10, 1.0, 0.1, onset=4) == 4
    assert relaxation_time([5.0] * 10, 1.0, 0.1) is NOT_RELAXED
    curve = [3.0, 2.0, 1.5, 1.05, 0.98, 1.2, 1.02, 1.0]
    assert relaxation_time(curve, 1.0, 0.1) == 6
    assert relaxation_time(curve, 1.0, 0.1, onset=0, end=5) == 3


def test_relaxation_time_smoothing_window():
    curve = [1.0, 1.0, 1.3, 1.0, 1.0, 1.0, 1.0]
    assert relaxation_time(curve, 1.0, 0.2) == 3
    assert relaxation_time(curve, 1.0, 0.2, window=3) == 0


def test_heat_windows_and_cooling_segment():
    simple = RelaxationConfig(cycle_moves=10, heat_window=(0, 3), heated_slots=1, heated_floor=1.0, n_cycles=1)
    assert heated_mask(simple).tolist() == [True] * 3 + [False] * 7
    assert cooling_segment(simple) == (3, 10)
    wrap = LJ38_PROTOCOL
    mask = heated_mask(wrap)
    assert mask[:200].all() and mask[800:].all() and not mask[200:800].any()
    assert cooling_segment(wrap) == (200, 800)


def test_presets():
    ladder = lj38_ladder()
    assert len(ladder) == 45
    assert ladder[0] == 0.05 and ladder[32] == 0.21 and ladder[33] == 0.22 and ladder[-1] == 0.33
    assert np.allclose(np.diff(ladder[:33]), 0.005) and np.allclose(np.diff(ladder[32:]), 0.01)
    assert LJ38_PROTOCOL.cycle_moves == 1200 and LJ38_PROTOCOL.n_cycles == 600
    assert LJ38_PROTOCOL.heated_floor == 0.150
    assert LJ38_PROTOCOL.heated_slots == 15
    from inswap.state import TemperatureLadder
    hot = TemperatureLadder(tuple(ladder), strict=False).heated(LJ38_PROTOCOL.heated_slots, 0.150).taus
    assert hot[:15] == (0.150,) * 15 and hot[15:] == tuple(ladder[15:])
    assert LJ13_LADDER == [0.05, 0.12, 0.25, 0.40]
    assert LJ13_PROTOCOL.n_cycles == 2000 and cooling_segment(LJ13_PROTOCOL)[0] == 50


def relax_config(floor, n_cycles=300, **extra):
    return dw_config(sweeps=None, relaxation={"cycle_moves": 200, "heat_window": [0, 60], "heated_slots": 1,
                                              "heated_floor": floor, "n_cycles": n_cycles}, **extra)


def test_zero_heating_curve_is_flat():
    rep = run_relaxation(parse_config(relax_config(0.3)))
    assert np.all(np.isfinite(rep.stderr)) and np.all(rep.stderr > 0)
    z = (rep.mean - DW_FIXTURE_TAU03_MEAN_V) / rep.stderr
    # per-move deviations are z-scores; allow the usual 3 sigma on their average
    assert abs(z.mean()) < 3.0
    assert np.mean(np.abs(z) > 3.0) < 0.05


def test_heating_perturbs_the_curve():
    rep = run_relaxation(parse_config(relax_config(1.0)))
    hot = rep.heated
    # last heated move: the slot-1 average must sit far above equilibrium
    k = int(np.flatnonzero(hot)[-1])
    assert (rep.mean[k] - DW_FIXTURE_TAU03_MEAN_V) / rep.stderr[k] > 5.0
    assert rep.csv.splitlines()[1] == "move,heated,mean,stderr"
    assert len(rep.csv.splitlines()) == 2 + 200


def test_relaxation_reports_time_against_truth():
    cfg = relax_config(1.0, n_cycles=300)
    cfg["relaxation"].update({"truth": DW_FIXTURE_TAU03_MEAN_V, "window": 5,
                              "epsilon": 3 * DW_FIXTURE_TAU03_SD_V / math.sqrt(300)})
    rep = run_relaxation(parse_config(cfg))
    assert rep.time is NOT_RELAXED or 60 <= rep.time < 200
    meta = json.loads(rep.csv.splitlines()[0][2:])
    assert meta["cooling_segment"] == [60, 200]


# -- rates ------------------------------------------------------------------------

def test_run_rates_rows():
    cfg = parse_config({"chain": {"energies": [0.0, 1.0], "taus": [0.5, 1.0]},
                        "nus": [{"id": "mu", "kind": "mu"},
                                {"id": "skew", "masses": [0.4, 0.1, 0.3, 0.2]},
                                {"id": "sym", "masses": [0.4, 0.1, 0.3, 0.2], "symmetrize": True}]},
                       schema=RateConfig)
    rep = run_rates(cfg)
    rows = {(r["nu_id"], r["a"]): r["I_a"] for r in rep.rows}
    assert abs(rows["mu", 0.0]) < 1e-14 and abs(rows["mu", math.inf]) < 1e-14
    assert rows["skew", 0.0] < rows["skew", 1.0] < rows["skew", 10.0] and rows["skew", math.inf] == math.inf
    assert rows["sym", 0.0] == pytest.approx(rows["sym", 10.0], abs=1e-14) == rows["sym", math.inf]
    assert "skew,inf,inf" in rep.csv
    with pytest.raises(ConfigError, match="masses"):
        run_rates(parse_config({"chain": {"energies": [0.0, 1.0], "taus": [0.5, 1.0]},
                                "nus": [{"id": "bad", "masses": [1.0, 0.0]}]}, schema=RateConfig))
