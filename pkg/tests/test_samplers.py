import math
import warnings

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import RHO_EXAMPLE
from inswap.errors import CapacityExceededError, InvalidArgumentError
from inswap.exact import Toy, fixed_point_residual, stationary_vector
from inswap.kernels import KernelSpec
from inswap.measures import WeightedAccumulator
from inswap.permgroup import (Permutation, PermutationSet, block_partition_subgroup, generate_subgroup,
                              symmetric_group, transposition, trivial_group)
from inswap.potentials import double_well, tabulated
from inswap.rng import RngStream
from inswap.samplers import (INSSampler, PINSSampler, PTSampler, PtSchedule, compute_weights, handoff, ins_step,
                             jump_chain_run, pins_interleaved_run, pins_step, prepare, pt_step, swap_attempt)
from inswap.state import replica_state

GRID = KernelSpec.uniform("grid-metropolis", 1.0, 1)
TOL = 1e-12


def pair(K, i, j):
    return generate_subgroup([transposition(K, i, j)])


# -- weights -------------------------------------------------------------------

def test_compute_weights_examples():
    model = tabulated([0.0, 1.0])
    s = replica_state([[0.0], [0.0], [0.0]], [0.2, 0.5, 1.0])
    w = np.exp(compute_weights(s, symmetric_group(3), model).logw)
    assert np.allclose(w, 1 / 6, atol=1e-15)
    s2 = replica_state([[0.0], [1.0]], [1.0, 2.0])
    w2 = np.exp(compute_weights(s2, symmetric_group(2), model).logw)
    assert w2 == pytest.approx([RHO_EXAMPLE, 1 - RHO_EXAMPLE], abs=1e-15)
    assert w2.sum() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(InvalidArgumentError):
        compute_weights(s2, symmetric_group(3), model)


def test_weights_exchange_symmetry():
    model = double_well(4.0, 0.5)
    a = replica_state([[0.4], [-0.9]], [0.3, 1.0])
    b = replica_state([[-0.9], [0.4]], [0.3, 1.0])
    wa = compute_weights(a, symmetric_group(2), model).logw
    wb = compute_weights(b, symmetric_group(2), model).logw
    assert np.allclose(wa, wb[::-1], atol=1e-14)


def test_example_pair_subgroup_two_term_weights():
    model = double_well(4.0, 0.5)
    taus = np.array([0.1, 0.3, 0.6, 1.0])
    y = np.array([[0.2], [-1.1], [0.9], [0.0]])
    s = replica_state(y, taus)
    A = pair(4, 1, 2)
    w = np.exp(compute_weights(s, A, model).logw)
    V = model.energy(y)
    pi = lambda order: math.exp(-sum(V[order[i]] / taus[i] for i in range(4)))
    direct = pi([0, 1, 2, 3]) / (pi([0, 1, 2, 3]) + pi([1, 0, 2, 3]))
    assert w[0] == pytest.approx(direct, rel=1e-12)


def test_rotation_subgroup_three_term_weights():
    model = double_well(4.0, 0.0)
    taus = np.array([0.2, 0.5, 1.0])
    y = np.array([[0.3], [1.1], [-0.4]])
    R = generate_subgroup([Permutation.parse("2,3,1")])
    assert R.order == 3
    w = np.exp(compute_weights(replica_state(y, taus), R, model).logw)
    V = model.energy(y)
    terms = [math.exp(-sum(V[s[i]] / taus[i] for i in range(3))) for s in R.table]
    assert w == pytest.approx(np.array(terms) / sum(terms), rel=1e-12)


# -- parallel tempering ----------------------------------------------------------

def test_swap_acceptance_equal_energies_and_downhill():
    model = tabulated([0.0, 1.0])
    s = prepare(replica_state([[1.0], [1.0]], [0.5, 1.0]), model)
    for seed in range(20):
        out = swap_attempt(s, 0, 1, RngStream(seed))
        assert out.swap_attempts == 1
    # lower energy moves to lower temperature: always accepted
    s = prepare(replica_state([[1.0], [0.0]], [0.5, 1.0]), model)
    for seed in range(20):
        out = swap_attempt(s, 0, 1, RngStream(seed))
        assert out.coords[:, 0].tolist() == [0.0, 1.0]


def test_pt_schedule_validation():
    with pytest.raises(InvalidArgumentError):
        PtSchedule(period=0)
    with pytest.raises(InvalidArgumentError):
        PtSchedule(pair_policy="nearest")


def test_pt_period_schedule_counts():
    model = double_well(4.0, 0.5)
    spec = KernelSpec.uniform("rw-metropolis", 0.5, 3)
    s = replica_state([[0.0], [0.0], [0.0]], [0.3, 0.6, 1.0])
    rng = RngStream(1)
    for _ in range(60):
        s = pt_step(s, PtSchedule(period=5), spec, model, rng)
    assert s.sweep == 60 and s.swap_attempts == 10


# -- exact stationarity on enumerable toys -----------------------------------------

def test_pt_cycle_preserves_mu(two_point, three_point):
    for model, taus in ((two_point, [0.5, 1.0]), (three_point, [0.3, 0.7, 1.5])):
        toy = Toy(model, taus)
        for period in (1, 3):
            assert fixed_point_residual(toy.mu(), toy.pt_cycle_matrix(period)) < TOL


def test_two_point_pt_stationary_vector_oracle(two_point):
    toy = Toy(two_point, [0.5, 1.0])
    v = stationary_vector(toy.pt_cycle_matrix(1))
    assert np.allclose(v, toy.mu(), atol=TOL)


def test_ins_kernel_preserves_symmetrized_law(two_point, three_point):
    toy = Toy(two_point, [0.5, 1.0])
    S2 = symmetric_group(2)
    mu = toy.mu()
    target = 0.5 * (mu + mu[toy.permuted_index(np.array([1, 0]))])
    M = toy.swap_kernel_matrix(S2)
    assert fixed_point_residual(target, M) < TOL
    assert np.allclose(stationary_vector(M), target, atol=TOL)
    toy3 = Toy(three_point, [0.3, 0.7, 1.5])
    S3 = symmetric_group(3)
    assert fixed_point_residual(toy3.symmetrized(S3), toy3.swap_kernel_matrix(S3)) < TOL


def test_ins_two_temperature_reduction(two_point):
    toy = Toy(two_point, [0.5, 1.0])
    W = toy.weights(symmetric_group(2))
    rho = W[:, 0]
    direct = rho[:, None] * toy.move_matrix([0.5, 1.0]) + (1 - rho)[:, None] * toy.move_matrix([1.0, 0.5])
    assert np.allclose(toy.swap_kernel_matrix(symmetric_group(2)), direct, atol=1e-15)


def test_pins_subgroup_kernels_preserve_their_symmetrizations(three_point):
    toy = Toy(three_point, [0.3, 0.7, 1.5])
    for A in (pair(3, 1, 2), pair(3, 2, 3), generate_subgroup([Permutation.parse("2,3,1")])):
        assert fixed_point_residual(toy.symmetrized(A), toy.swap_kernel_matrix(A)) < TOL


def test_pins_composite_with_handoff_preserves_mu(two_point, three_point):
    # handoff maps each subgroup's symmetrized law back to mu, so the full
    # interleaved cycle has mu as its fixed point
    for model in (two_point, three_point):
        toy = Toy(model, [0.3, 0.7, 1.5])
        A, B = pair(3, 1, 2), pair(3, 2, 3)
        for n in ((1, 1), (2, 3)):
            C = toy.pins_cycle_matrix([A, B], n)
            assert fixed_point_residual(toy.mu(), C) < TOL
            assert np.allclose(stationary_vector(C), toy.mu(), atol=1e-10)


def test_handoff_maps_symmetrized_law_to_mu(three_point):
    toy = Toy(three_point, [0.3, 0.7, 1.5])
    A = pair(3, 1, 2)
    out = toy.symmetrized(A) @ toy.handoff_matrix(A)
    assert np.allclose(out, toy.mu(), atol=TOL)


def test_extra_handoff_leaves_weighted_measure_expectation(three_point):
    toy = Toy(three_point, [0.3, 0.7, 1.5])
    for A in (pair(3, 1, 2), symmetric_group(3)):
        law = toy.symmetrized(A)
        before = toy.slot_marginals(law, A)
        after = toy.slot_marginals(law @ toy.handoff_matrix(A), A)
        assert np.allclose(before, after, atol=TOL)


@pytest.mark.parametrize("a", [0.0, 1.0, 10.0])
def test_jump_chain_preserves_mu(two_point, three_point, a):
    for model in (two_point, three_point):
        toy = Toy(model, [0.4, 1.1])
        mu = toy.mu()
        assert fixed_point_residual(mu, toy.jump_embedded_matrix(a)) < TOL
        assert np.max(np.abs(mu @ toy.jump_generator(a))) < TOL


# -- sampling behaviour --------------------------------------------------------------

def test_ins_symmetric_state_samples_uniformly():
    model = double_well(4.0)
    s = replica_state([[0.3], [0.3], [0.3]], [0.2, 0.5, 1.0])
    table = compute_weights(s, symmetric_group(3), model)
    rng = RngStream(3)
    counts = np.zeros(6)
    for _ in range(6000):
        sigma = table.sample(rng)
        idx = [tuple(r) for r in symmetric_group(3).table.tolist()].index(tuple(sigma.tolist()))
        counts[idx] += 1
    assert chisquare(counts).pvalue > 0.001


def test_ins_capacity():
    s = replica_state(np.zeros((7, 1)), np.arange(1, 8) * 0.1)
    with pytest.raises(CapacityExceededError):
        ins_step(s, double_well(4.0), KernelSpec.uniform("rw-metropolis", 0.3, 1), RngStream(0))


def test_pins_requires_subgroup():
    s = replica_state(np.zeros((3, 1)), [0.2, 0.5, 1.0])
    not_group = PermutationSet([Permutation.parse("1,2,3"), Permutation.parse("2,3,1")])
    with pytest.raises(InvalidArgumentError, match="subgroup"):
        pins_step(s, not_group, double_well(4.0), KernelSpec.uniform("rw-metropolis", 0.3, 1), RngStream(0))


def test_pins_trivial_group_is_plain_parallel_chains():
    model = double_well(4.0, 0.5)
    spec = KernelSpec.uniform("rw-metropolis", 0.4, 1)
    s = replica_state([[0.1], [0.5], [-0.7]], [0.2, 0.5, 1.0])
    triv = trivial_group(3)
    r1, r2 = RngStream(6), RngStream(6)
    from inswap.samplers import kernel_sweep
    a, b = s, s
    for _ in range(30):
        a, _ = pins_step(a, triv, model, spec, r1)
        r2.uniforms(1)  # the one categorical draw over the single-element table
        b = kernel_sweep(b, model, spec, r2)
    assert np.array_equal(a.coords, b.coords)


def test_handoff_identity_is_noop():
    s = replica_state([[0.1], [0.5], [-0.7]], [0.2, 0.5, 1.0])
    out = handoff(s, trivial_group(3), double_well(4.0), RngStream(1))
    assert np.array_equal(out.coords, s.coords)


def test_handoff_concentrated_weights():
    model = double_well(4.0, 0.0)
    # slot 1 (tau = 0.05) holds a barrier-top point: swapping it down is overwhelmingly favoured
    s = replica_state([[0.0], [1.0]], [0.05, 1.0])
    rng = RngStream(2)
    hits = sum(handoff(s, symmetric_group(2), model, rng).coords[0, 0] == 1.0 for _ in range(10 ** 4))
    assert hits / 10 ** 4 >= 0.999


def test_handoff_frequencies_chi_square():
    model = double_well(4.0, 0.5)
    s = replica_state([[0.2], [-0.9], [1.1]], [0.4, 0.8, 1.5])
    A = symmetric_group(3)
    table = compute_weights(s, A, model)
    rng = RngStream(10)
    lookup = {tuple(s.coords[r, 0] for r in row): k for k, row in enumerate(A.table)}
    counts = np.zeros(A.order)
    n = 10 ** 5
    for _ in range(n):
        out = handoff(s, A, model, rng, table=table)
        counts[lookup[tuple(out.coords[:, 0])]] += 1
    assert chisquare(counts, n * table.weights).pvalue > 0.001


def test_pins_interleaved_warns_when_not_generating():
    model = double_well(4.0)
    spec = KernelSpec.uniform("rw-metropolis", 0.3, 1)
    s = replica_state(np.zeros((4, 1)), [0.1, 0.2, 0.4, 0.8])
    with pytest.warns(UserWarning, match="do not generate"):
        pins_interleaved_run(s, [pair(4, 1, 2)], [2], 4, model, spec, None, RngStream(0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        pins_interleaved_run(s, [block_partition_subgroup(4, [3, 1]), block_partition_subgroup(4, [1, 3])],
                             [2, 2], 8, model, spec, None, RngStream(0))


def test_pins_single_full_group_matches_ins_statistically():
    model = double_well(4.0, 0.5)
    spec = KernelSpec.uniform("rw-metropolis", 0.6, 1)
    s = replica_state([[-1.0], [-1.0]], [0.3, 1.0])
    acc_p = WeightedAccumulator(2)
    pins_interleaved_run(s, [symmetric_group(2)], [5], 40000, model, spec, acc_p, RngStream(1), burn_in=2000)
    acc_i = WeightedAccumulator(2)
    ins = INSSampler(model, spec, RngStream(2))
    from inswap.measures import accumulate
    st = s
    for k in range(40000):
        res = ins.step(st)
        if k >= 2000:
            accumulate(acc_i, res.measured, res.table)
        st = res.state
    (m1, e1), (m2, e2) = acc_p.estimate("V", 1), acc_i.estimate("V", 1)
    assert abs(m1 - m2) < 3 * math.hypot(e1, e2)


def test_jump_chain_a_zero_never_swaps():
    model = double_well(4.0, 0.5)
    spec = KernelSpec.uniform("rw-metropolis", 0.5, 1)
    s = replica_state([[-1.0], [1.0]], [0.3, 1.0])
    times = []
    acc = jump_chain_run(s, 0.0, model, spec, 200.0, WeightedAccumulator(2), RngStream(0), move_times=times)
    assert acc.total_weight == pytest.approx(200.0)
    # every event is a move when a = 0
    assert len(times) == acc.count - 1


def test_jump_chain_move_gaps_are_rate_one():
    model = double_well(4.0, 0.5)
    spec = KernelSpec.uniform("rw-metropolis", 0.5, 1)
    s = replica_state([[-1.0], [1.0]], [0.3, 1.0])
    times = []
    jump_chain_run(s, 3.0, model, spec, 1.0e5, None, RngStream(4), move_times=times)
    gaps = np.diff(times)
    assert gaps.size > 9 * 10 ** 4
    assert abs(gaps.mean() - 1.0) < 3 * gaps.std(ddof=1) / math.sqrt(gaps.size)


@pytest.mark.parametrize("a", [0.0, 1.0, 10.0])
def test_jump_chain_occupation_converges_to_mu(two_point, a):
    toy = Toy(two_point, [0.5, 1.0])
    spec = KernelSpec.uniform("grid-metropolis", 1.0, 1)
    s = replica_state([[0.0], [0.0]], [0.5, 1.0])
    acc = WeightedAccumulator(2, ("x",))
    jump_chain_run(s, a, two_point, spec, 2.0e4, acc, RngStream(7))
    marg = toy.product_marginals()
    for slot in (1, 2):
        mean, err = acc.estimate("x", slot)
        assert abs(mean - marg[slot - 1, 1]) < 3 * err


def test_sampler_objects_report_metadata():
    model = double_well(4.0)
    spec = KernelSpec.uniform("rw-metropolis", 0.3, 1)
    pt = PTSampler(model, spec, RngStream(0), PtSchedule(period=5))
    assert pt.metadata() == {"kind": "pt", "period": 5, "geometric_mean": None, "pair_policy": "adjacent-sweep"}
    pins = PINSSampler(model, spec, RngStream(0), [block_partition_subgroup(4, [3, 1])], [3])
    assert pins.metadata()["n_steps"] == [3]
