import math

import numpy as np
import pytest

from relayflow import (
    AdditiveOracle,
    DeterministicLayerModel,
    DiscreteLayerModel,
    GaussianLayerModel,
    NodeId,
    UnsupportedModel,
    build_network,
    check_joint_feasible,
    check_layered_feasible,
    check_multi_source,
    decoding_complexity,
    gaussian_gap,
    min_cut,
    network_from_models,
    penalty_recursion,
    plan_rates,
    unit_leak_penalties,
)
from relayflow.oracle import InstanceSpec, SplitMix64, random_instance


def gaussian_line(gains=(10.0, 10.0)):
    models = [GaussianLayerModel(np.array([[g + 0j]])) for g in gains]
    return network_from_models(models), models


def deterministic_discrete_line():
    ident = np.zeros((2, 2))
    ident[0, 0] = ident[1, 1] = 1.0
    pmf = np.array([0.5, 0.5])
    models = [
        DiscreteLayerModel([pmf], [ident.copy()], [np.eye(2)]),
        DiscreteLayerModel([pmf], [ident.copy()], [np.eye(2)]),
    ]
    return network_from_models(models), models


# --- penalty recursion ----------------------------------------------------------


def test_gaussian_single_relay_penalties():
    net, models = gaussian_line()
    assert penalty_recursion(net, models) == [1.0, 0.0]


def test_gaussian_penalties_match_unit_leak_recursion():
    rng = SplitMix64(99)
    for _ in range(20):
        L = 2 + rng.next_u64() % 3
        sizes = tuple([1] + [1 + rng.next_u64() % 3 for _ in range(L - 2)] + [1])
        net = build_network(
            sizes,
            [
                AdditiveOracle(np.ones((sizes[i], sizes[i + 1])))
                for i in range(L - 1)
            ],
        )
        assert penalty_recursion(net, leaks=[1.0] * (L - 1)) == unit_leak_penalties(sizes)


def test_deterministic_penalties_all_zero():
    net, models = deterministic_discrete_line()
    det = [DeterministicLayerModel(o) for o in net.oracles]
    assert penalty_recursion(net, det) == [0.0, 0.0]
    assert penalty_recursion(net, models) == pytest.approx([0.0, 0.0], abs=1e-12)


def test_two_layer_penalty_is_zero():
    net = build_network([1, 1], [AdditiveOracle([[2.0]])])
    assert penalty_recursion(net, leaks=[1.0]) == [0.0]


def test_penalty_needs_models_or_leaks():
    net = build_network([1, 1], [AdditiveOracle([[2.0]])])
    with pytest.raises(UnsupportedModel):
        penalty_recursion(net)


def test_penalties_grow_toward_the_source():
    # nonnegative leaks and nonempty layers make the penalty sequence
    # non-increasing in the layer index
    rng = SplitMix64(17)
    for seed in range(1, 21):
        L = 2 + rng.next_u64() % 3
        sizes = tuple([1] + [1 + rng.next_u64() % 3 for _ in range(L - 2)] + [1])
        inst = random_instance(
            InstanceSpec(seed, sizes, {"gaussian": 1.0, "discrete": 1.0})
        )
        penalties = penalty_recursion(inst.network, inst.models)
        for left, right in zip(penalties, penalties[1:]):
            assert left >= right - 1e-12


# --- rate planning ----------------------------------------------------------------


def test_deterministic_plan_hits_the_cut():
    net, models = deterministic_discrete_line()
    plan = plan_rates(net, models)
    value, _ = min_cut(net)
    assert plan.rate == value
    assert plan.penalties == (0.0, 0.0)
    assert not plan.flags


def test_gaussian_strong_channel_plan_loses_one_bit():
    net, models = gaussian_line((50.0, 50.0))
    plan = plan_rates(net, models)
    value, _ = min_cut(net)
    assert plan.rate == pytest.approx(value - 1.0, abs=1e-12)
    assert plan.compression[NodeId(2, 1)] == pytest.approx(value, abs=1e-12)


def test_zero_capacity_plan_is_clamped_and_flagged():
    net, models = gaussian_line((0.0, 0.0))
    plan = plan_rates(net, models)
    assert plan.rate == 0.0
    assert "negative_rate:R" in plan.flags


# --- layered feasibility -----------------------------------------------------------


def test_deterministic_plan_is_layered_feasible():
    net, models = deterministic_discrete_line()
    plan = plan_rates(net, models)
    report = check_layered_feasible(net, models, plan)
    assert report.passed
    assert report.margin >= -1e-12


def test_inflated_compression_rate_fails():
    net, models = deterministic_discrete_line()
    plan = plan_rates(net, models)
    bumped = dict(plan.compression)
    bumped[NodeId(2, 1)] += 10.0
    from relayflow import RatePlan

    bad = RatePlan(plan.rate, bumped, plan.penalties, (), plan.flow)
    report = check_layered_feasible(net, models, bad)
    assert not report.passed
    assert any(2 in (v.get("U") or ()) or v["family"] == "last_layer" for v in report.violations)


def test_all_zero_plan_passes():
    net, models = deterministic_discrete_line()
    from relayflow import Flow, RatePlan

    zero = RatePlan(
        0.0,
        {NodeId(2, 1): 0.0},
        (0.0, 0.0),
        (),
        Flow({n: 0.0 for n in net.nodes()}),
    )
    assert check_layered_feasible(net, models, zero).passed


def test_two_layer_region_is_the_channel_information():
    h = np.array([[3.0 + 0j]])
    model = GaussianLayerModel(h)
    net = network_from_models([model])
    from relayflow import Flow, RatePlan

    direct = model.mi_received([1], [1])
    ok = RatePlan(direct - 0.01, {}, (0.0,), (), Flow({n: 0.0 for n in net.nodes()}))
    bad = RatePlan(direct + 0.01, {}, (0.0,), (), Flow({n: 0.0 for n in net.nodes()}))
    assert check_layered_feasible(net, [model], ok).passed
    assert not check_layered_feasible(net, [model], bad).passed


def test_strong_channels_can_starve_a_relay_past_its_leak():
    # a constructed four-layer instance where the flow assigns one relay
    # less than its quantization leak: the plan is flagged feasible by the
    # penalty filter, yet the empty-transmit-set rows catch the shortfall
    rng = SplitMix64(33)
    sizes = (1, 2, 2, 1)
    models = []
    for l in range(3):
        m_in, m_out = sizes[l], sizes[l + 1]
        h = np.array(
            [[20.0 * rng.complex_normal() for _ in range(m_in)] for _ in range(m_out)]
        )
        models.append(GaussianLayerModel(h))
    net = network_from_models(models)
    plan = plan_rates(net, models)
    assert not plan.flags
    starved = min(plan.compression[n] for n in net.layer_nodes(3))
    report = check_layered_feasible(net, models, plan)
    if starved < 1.0:
        assert not report.passed
        assert report.binding["family"] == "relay"
    else:
        assert report.passed


# --- joint feasibility ---------------------------------------------------------------


def test_joint_two_layer_reduces_to_channel_information():
    h = np.array([[3.0 + 0j]])
    model = GaussianLayerModel(h)
    net = network_from_models([model])
    direct = model.mi_received([1], [1])
    assert check_joint_feasible(net, [model], direct - 1e-6, {}).passed
    assert not check_joint_feasible(net, [model], direct + 1e-6, {}).passed


def test_joint_deterministic_three_layer():
    net, models = deterministic_discrete_line()
    value, _ = min_cut(net)
    # compression at the received-symbol entropy, rate just under the cut
    r = {NodeId(2, 1): 1.0}
    assert check_joint_feasible(net, models, value - 1e-6, r).passed
    report = check_joint_feasible(net, models, value + 1.0, r)
    assert not report.passed


def test_joint_rejects_mixed_model_families():
    net, models = deterministic_discrete_line()
    mixed = [models[0], GaussianLayerModel(np.array([[1.0 + 0j]]))]
    with pytest.raises(UnsupportedModel):
        check_joint_feasible(network_from_models(mixed), mixed, 0.1, {NodeId(2, 1): 0.0})


def test_joint_gaussian_binding_cut_is_the_bottleneck():
    net, models = gaussian_line((50.0, 2.0))
    plan = plan_rates(net, models)
    report = check_joint_feasible(net, models, plan.rate, plan.compression)
    assert report.passed
    # rate above the weak second hop must fail
    weak = models[1].mi_received([1], [1])
    report = check_joint_feasible(net, models, weak + 0.5, plan.compression)
    assert not report.passed


# --- multi-source region ---------------------------------------------------------------


def two_source_net():
    models = [
        DeterministicLayerModel(AdditiveOracle([[1.0, 0.5], [0.25, 2.0]])),
        DeterministicLayerModel(AdditiveOracle([[1.5], [0.75]])),
    ]
    return network_from_models(models), models


def test_multi_source_zero_rates_pass():
    net, models = two_source_net()
    report = check_multi_source(net, models, [0.0, 0.0])
    assert report.passed


def test_multi_source_sum_cut_violation_fails():
    net, models = two_source_net()
    report = check_multi_source(net, models, [40.0, 40.0])
    assert not report.passed
    # rates this large force the binding cut to contain every source
    assert {NodeId(1, 1), NodeId(1, 2)} <= report.binding.members
    assert report.margin == pytest.approx(report.binding.value - 80.0)


def test_multi_source_agrees_with_supernode_reduction():
    rng = SplitMix64(5)
    for seed in range(1, 21):
        inst = random_instance(
            InstanceSpec(seed, (2, 2, 1), {"additive": 1.0, "rank_gf2": 1.0})
        )
        rates = [2.0 * rng.random(), 2.0 * rng.random()]
        report = check_multi_source(inst.network, inst.models, rates)
        assert abs(report.margin - report.supernode_margin) <= 1e-9 * max(
            1.0, abs(report.margin)
        )


def test_multi_source_symmetric_deterministic_boundary():
    # symmetric two-source diamond: the region boundary sits at the sum cut
    models = [
        DeterministicLayerModel(AdditiveOracle([[1.0], [1.0]])),
        DeterministicLayerModel(AdditiveOracle([[2.0]])),
    ]
    net = network_from_models(models)
    assert check_multi_source(net, models, [1.0, 1.0]).margin == pytest.approx(0.0)
    assert not check_multi_source(net, models, [1.1, 1.0]).passed


# --- complexity and gap constants ---------------------------------------------------


def test_complexity_single_relay_example():
    net, models = gaussian_line()
    plan = plan_rates(net, models)
    from relayflow import Flow, RatePlan

    unit = RatePlan(1.0, {NodeId(2, 1): 1.0}, plan.penalties, (), plan.flow)
    log2_joint, log2_layered = decoding_complexity(net, unit, 10, {NodeId(2, 1): 2**10})
    assert log2_joint == pytest.approx(20.0, abs=1e-12)
    assert log2_layered == pytest.approx(math.log2(2**20 + 2**10), abs=1e-12)


def test_complexity_no_relays_collapses():
    net = build_network([1, 1], [AdditiveOracle([[2.0]])])
    from relayflow import Flow, RatePlan

    plan = RatePlan(1.5, {}, (0.0,), (), Flow({n: 1.5 for n in net.nodes()}))
    log2_joint, log2_layered = decoding_complexity(net, plan, 4)
    assert log2_joint == pytest.approx(6.0)
    assert log2_layered == pytest.approx(6.0)


def test_complexity_unit_block():
    net, models = gaussian_line()
    plan = plan_rates(net, models)
    log2_joint, _ = decoding_complexity(net, plan, 1, {NodeId(2, 1): 4})
    assert log2_joint == pytest.approx(plan.rate + 2.0)


def test_gaussian_gap_examples():
    three = build_network(
        [1, 1, 1], [AdditiveOracle([[1.0]]), AdditiveOracle([[1.0]])]
    )
    assert gaussian_gap(three) == (9.0, 7.0)
    two = build_network([1, 1], [AdditiveOracle([[1.0]])])
    assert gaussian_gap(two) == (6.0, 4.0)
    five = build_network(
        [1, 2, 1, 1],
        [
            AdditiveOracle([[1.0, 1.0]]),
            AdditiveOracle([[1.0], [1.0]]),
            AdditiveOracle([[1.0]]),
        ],
    )
    assert gaussian_gap(five) == (15.0, 13.0)
