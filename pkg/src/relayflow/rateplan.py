"""Compression-rate planning for compress-and-forward relaying with
layer-by-layer backward decoding.

Backward decoding recovers each relay layer's compression indices before
moving one layer closer to the source, paying a per-layer rate penalty
relative to joint decoding.  The penalty recursion runs backward from the
last relay layer:

    penalty[last] = 0
    penalty[l]    = leak(layer pair l) + penalty[l+1] * (size of layer l+1)

where the leak is the rate spent describing quantization noise.  Given a
max node-flow ``f``, the planned compression rate of a relay in layer ``l``
is ``f(v) - penalty[l]`` and the end-to-end rate is
``f(source) - penalty[1]``.

The three checkers evaluate feasibility regions directly: the layered
(backward) decoding region, the joint decoding region, and the multi-source
single-destination region with its per-source penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

from .capacity import (
    DiscreteLayerModel,
    GaussianLayerModel,
    LayerModel,
    _entropy,
    _leq,
    _mask_indices,
    quantizer_leak,
)
from .cutflow import _lex_masks, max_flow, min_cut
from .errors import (
    DimensionMismatch,
    InputError,
    NumericalFailure,
    TooLarge,
    UnsupportedModel,
)
from .netgraph import Cut, Flow, LayeredNetwork, NodeId, attach_supernode, build_network


@dataclass(frozen=True)
class RatePlan:
    """An end-to-end rate, per-relay compression rates, and the per-layer
    penalties they were derived from.

    ``flags`` lists entries clamped to zero because the flow at a node fell
    below its layer penalty; such plans are outside the planner's
    feasibility guarantees.
    """

    rate: float
    compression: dict[NodeId, float]
    penalties: tuple[float, ...]
    flags: tuple[str, ...]
    flow: Flow


@dataclass
class FeasibilityReport:
    """Outcome of a region check: the smallest margin (rhs minus lhs over
    all constraints) and the constraint attaining it."""

    passed: bool
    margin: float
    binding: dict
    n_constraints: int
    violations: list[dict] = field(default_factory=list)


@dataclass
class MultiSourceReport:
    passed: bool
    margin: float
    binding: Cut
    supernode_margin: float
    n_constraints: int


def network_from_models(models: Sequence[LayerModel]) -> LayeredNetwork:
    """Assemble the network whose capacities are derived from the models."""
    if not models:
        raise DimensionMismatch("need at least one layer model")
    sizes = [models[0].dims[0]]
    for model in models:
        if model.dims[0] != sizes[-1]:
            raise DimensionMismatch("adjacent layer models disagree on layer size")
        sizes.append(model.dims[1])
    return build_network(sizes, [m.oracle() for m in models])


def _check_models(net: LayeredNetwork, models: Sequence[LayerModel]) -> None:
    if len(models) != net.num_layers - 1:
        raise DimensionMismatch(
            f"{net.num_layers} layers need {net.num_layers - 1} models"
        )
    for l, model in enumerate(models, start=1):
        expected = (net.layer_sizes[l - 1], net.layer_sizes[l])
        if model.dims != expected:
            raise DimensionMismatch(f"model {l} has dims {model.dims}, expected {expected}")


def penalty_recursion(
    net: LayeredNetwork,
    models: Sequence[LayerModel] | None = None,
    *,
    leaks: Sequence[float] | None = None,
) -> list[float]:
    """Backward penalty recursion; entry ``l-1`` is the penalty of layer ``l``.

    Leaks come from the layer models, or may be supplied directly as one
    value per layer pair (the last pair's leak never enters: the final
    penalty is pinned at zero).
    """
    L = net.num_layers
    if leaks is None:
        if models is None:
            raise UnsupportedModel("penalty recursion needs layer models or explicit leaks")
        _check_models(net, models)
        leaks = [quantizer_leak(m) for m in models]
    elif len(leaks) != L - 1:
        raise DimensionMismatch(f"need {L - 1} leak values")
    penalties = [0.0] * (L - 1)
    for l in range(L - 2, 0, -1):
        penalties[l - 1] = float(leaks[l - 1]) + penalties[l] * net.layer_sizes[l]
    return penalties


def plan_rates(net: LayeredNetwork, models: Sequence[LayerModel]) -> RatePlan:
    """Plan compression rates from a max node-flow.

    Computes the flow, subtracts each layer's penalty, and clamps (and
    flags) any entry that would go negative.
    """
    _check_models(net, models)
    penalties = penalty_recursion(net, models)
    flow = max_flow(net)
    flags: list[str] = []

    rate = flow.at(net.source) - penalties[0]
    if rate < 0:
        flags.append("negative_rate:R")
        rate = 0.0
    compression: dict[NodeId, float] = {}
    for l in range(2, net.num_layers):
        for node in net.layer_nodes(l):
            r = flow.at(node) - penalties[l - 1]
            if r < 0:
                flags.append(f"negative_rate:{node.key()}")
                r = 0.0
            compression[node] = r
    return RatePlan(rate, compression, tuple(penalties), tuple(flags), flow)


def _sum_compression(plan: RatePlan, nodes: Iterable[NodeId]) -> float:
    return sum(plan.compression[n] for n in nodes)


def check_layered_feasible(
    net: LayeredNetwork,
    models: Sequence[LayerModel],
    plan: RatePlan,
    tol: float = 1e-9,
) -> FeasibilityReport:
    """Check a plan against the layered (backward) decoding region.

    Three constraint families, all enumerated exhaustively:

    1. every subset of the last relay layer must fit the information its
       transmitters convey to the destination's raw received signal;
    2. for each interior layer pair, compression totals in must fit the
       pair capacity less the leak of the compression left undecoded;
    3. the source family: the end-to-end rate against the first layer pair.

    Identically-zero rows (both sides empty) are skipped.
    """
    if not net.is_unicast:
        raise InputError("layered feasibility is defined for unicast networks")
    _check_models(net, models)
    L = net.num_layers
    worst = math.inf
    binding: dict = {}
    n_constraints = 0
    violations: list[dict] = []

    def consider(lhs: float, rhs: float, desc: dict) -> None:
        nonlocal worst, binding, n_constraints
        n_constraints += 1
        margin = rhs - lhs
        if margin < worst:
            worst = margin
            binding = dict(desc, lhs=lhs, rhs=rhs)
        if not _leq(lhs, rhs, tol):
            violations.append(dict(desc, lhs=lhs, rhs=rhs, margin=margin))

    # family 1: last layer pair, against the raw received signal
    last_model = models[L - 2]
    m_last_relay = net.layer_sizes[L - 2]
    dest_set = tuple(range(1, net.layer_sizes[L - 1] + 1))
    for umask in range(1, 1 << m_last_relay):
        u_nodes = [NodeId(L - 1, i) for i in _mask_indices(umask)]
        lhs = plan.rate if L == 2 else _sum_compression(plan, u_nodes)
        rhs = last_model.mi_received(_mask_indices(umask), dest_set)
        consider(lhs, rhs, {"family": "last_layer", "layer": L - 1, "U": _mask_indices(umask)})

    # family 2: interior layer pairs
    for l in range(2, L - 1):
        model = models[l - 1]
        oracle = net.oracles[l - 1]
        m_in, m_out = net.layer_sizes[l - 1], net.layer_sizes[l]
        full_out = (1 << m_out) - 1
        for umask in range(1 << m_in):
            for vmask in range(full_out + 1):
                undecoded = full_out & ~vmask
                if umask == 0 and undecoded == 0:
                    continue
                lhs = _sum_compression(
                    plan, (NodeId(l, i) for i in _mask_indices(umask))
                ) - _sum_compression(
                    plan, (NodeId(l + 1, i) for i in _mask_indices(undecoded))
                )
                rhs = oracle.value_masks(umask, vmask) - model.leak(
                    _mask_indices(undecoded)
                )
                consider(
                    lhs,
                    rhs,
                    {
                        "family": "relay",
                        "layer": l,
                        "U": _mask_indices(umask),
                        "V": _mask_indices(vmask),
                    },
                )

    # family 3: the source against the first layer pair
    if L >= 3:
        model = models[0]
        oracle = net.oracles[0]
        m_out = net.layer_sizes[1]
        full_out = (1 << m_out) - 1
        for vmask in range(full_out + 1):
            undecoded = full_out & ~vmask
            lhs = plan.rate - _sum_compression(
                plan, (NodeId(2, i) for i in _mask_indices(undecoded))
            )
            rhs = oracle.value_masks(1, vmask) - model.leak(_mask_indices(undecoded))
            consider(lhs, rhs, {"family": "source", "layer": 1, "V": _mask_indices(vmask)})

    return FeasibilityReport(
        passed=not violations,
        margin=worst,
        binding=binding,
        n_constraints=n_constraints,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# Joint-decoding region.
# ---------------------------------------------------------------------------


def check_joint_feasible(
    net: LayeredNetwork,
    models: Sequence[LayerModel],
    rate: float,
    compression: Mapping[NodeId, float],
    tol: float = 1e-9,
) -> FeasibilityReport:
    """Check (rate, compression rates) against the joint-decoding region.

    Enumerates every pair of node sets (source side, decoded side) and
    requires the rate to fit the undecoded compression total plus the
    information the decoded set carries about the source side, less the
    quantization leak of everything undecoded.  The destination's quantized
    output is taken to be its raw received signal, which is never worse.

    Supported model families: all-Gaussian (closed forms) and all-discrete
    (exact summation over a global joint table).  Deterministic channels
    should be expressed as discrete models with 0/1 conditionals.
    """
    if not net.is_unicast:
        raise InputError("joint feasibility is defined for unicast networks")
    _check_models(net, models)
    L = net.num_layers
    relays = [n for l in range(2, L) for n in net.layer_nodes(l)]
    if len(relays) > 12:
        raise TooLarge("joint region enumeration limited to 12 relays")

    if all(isinstance(m, GaussianLayerModel) for m in models):
        mi_fn = _gaussian_joint_mi(net, models)
        leak_of = {v: 1.0 for v in relays}
    elif all(isinstance(m, DiscreteLayerModel) for m in models):
        mi_fn = _discrete_joint_mi(net, models)
        leak_of = {
            v: models[v.layer - 2].leak([v.index]) for v in relays
        }
    else:
        raise UnsupportedModel(
            "joint region checker supports all-Gaussian or all-discrete models"
        )

    worst = math.inf
    binding: dict = {}
    n_constraints = 0
    violations: list[dict] = []
    for source_extra in _subsets(relays):
        in_source = set(source_extra)
        rest = [v for v in relays if v not in in_source]
        for decoded_extra in _subsets(rest):
            decoded = set(decoded_extra)
            omega = {net.source, *in_source}
            phi = {net.destination, *decoded}
            undecoded_relays = [v for v in relays if v not in phi]
            lhs = float(rate)
            rhs = (
                sum(compression[v] for v in rest if v not in decoded)
                + mi_fn(omega, phi)
                - sum(leak_of[v] for v in undecoded_relays)
            )
            n_constraints += 1
            margin = rhs - lhs
            desc = {
                "omega": sorted(n.key() for n in omega),
                "phi": sorted(n.key() for n in phi),
                "lhs": lhs,
                "rhs": rhs,
            }
            if margin < worst:
                worst = margin
                binding = desc
            if not _leq(lhs, rhs, tol):
                violations.append(dict(desc, margin=margin))
    return FeasibilityReport(
        passed=not violations,
        margin=worst,
        binding=binding,
        n_constraints=n_constraints,
        violations=violations,
    )


def _subsets(items: list[NodeId]):
    for mask in range(1 << len(items)):
        yield [items[i] for i in range(len(items)) if mask & (1 << i)]


def _gaussian_joint_mi(net: LayeredNetwork, models: Sequence[GaussianLayerModel]):
    """Closed-form conditional mutual information for the all-Gaussian case.

    Receivers see independent unit noise plus unit quantization noise
    (noise power 2); the destination is unquantized (noise power 1).
    """

    def mi(omega: set[NodeId], phi: set[NodeId]) -> float:
        cols = sorted(omega)
        rows = sorted(phi)
        mat = np.zeros((len(rows), len(cols)), dtype=complex)
        for r, w in enumerate(rows):
            h = models[w.layer - 2].h
            noise = 1.0 if w == net.destination else 2.0
            for c, u in enumerate(cols):
                if u.layer == w.layer - 1:
                    mat[r, c] = h[w.index - 1, u.index - 1] / math.sqrt(noise)
        gram = np.eye(len(rows), dtype=complex) + mat @ mat.conj().T
        gram = (gram + gram.conj().T) / 2.0
        chol = np.linalg.cholesky(gram)
        return float(2.0 * np.log2(np.real(np.diag(chol))).sum())

    return mi


def _discrete_joint_mi(net: LayeredNetwork, models: Sequence[DiscreteLayerModel]):
    """Exact conditional mutual information over the global joint pmf.

    Transmit symbols are independent across nodes; given all of them, the
    receivers' quantized outputs are independent with per-receiver
    conditionals taken from the layer models (the destination's conditional
    is its raw channel).
    """
    L = net.num_layers
    senders = [n for l in range(1, L) for n in net.layer_nodes(l)]
    pmf_of = {
        n: models[n.layer - 1].input_pmfs[n.index - 1] for n in senders
    }
    x_sizes = [pmf_of[n].size for n in senders]
    pos_of = {n: i for i, n in enumerate(senders)}

    def cond_output(w: NodeId, assignment: tuple[int, ...]) -> np.ndarray:
        model = models[w.layer - 2]
        prev = net.layer_nodes(w.layer - 1)
        x_prev = tuple(assignment[pos_of[u]] for u in prev)
        if w == net.destination:
            return model.channels[w.index - 1][x_prev]
        return model.quantized_conditional(w.index)[x_prev]

    def mi(omega: set[NodeId], phi: set[NodeId]) -> float:
        receivers = sorted(phi)
        out_cells = math.prod(
            cond_output(w, tuple(0 for _ in senders)).size for w in receivers
        )
        if math.prod(x_sizes) * out_cells > 10_000_000:
            raise TooLarge("global joint table exceeds the cell cap")
        cond_positions = [pos_of[n] for n in senders if n not in omega]
        groups: dict[tuple[int, ...], np.ndarray] = {}
        h_out_given_all = 0.0
        for assignment in product(*(range(s) for s in x_sizes)):
            p = 1.0
            for n, v in zip(senders, assignment):
                p *= pmf_of[n][v]
            if p == 0.0:
                continue
            block = np.ones(1)
            for w in receivers:
                row = cond_output(w, assignment)
                h_out_given_all += p * _entropy(row)
                block = np.multiply.outer(block, row)
            key = tuple(assignment[i] for i in cond_positions)
            if key in groups:
                groups[key] = groups[key] + p * block.ravel()
            else:
                groups[key] = p * block.ravel()
        h_joint = sum(_entropy(arr) for arr in groups.values())
        h_cond = _entropy(np.array([arr.sum() for arr in groups.values()]))
        return max(0.0, (h_joint - h_cond) - h_out_given_all)

    return mi


# ---------------------------------------------------------------------------
# Multi-source region and the supernode reduction.
# ---------------------------------------------------------------------------


def check_multi_source(
    net: LayeredNetwork,
    models: Sequence[LayerModel],
    source_rates: Sequence[float],
    tol: float = 1e-9,
) -> MultiSourceReport:
    """Check a multi-source rate vector under layered decoding.

    Direct enumeration: for every node set excluding the destination, the
    rates of its sources (each penalized by the first-layer penalty) must
    fit the cut value.  The same region is evaluated a second way, by
    attaching a source-side supernode with the penalized rates and taking
    the unicast min-cut of the extended network; the two margins must
    agree.
    """
    if net.layer_sizes[-1] != 1:
        raise InputError("multi-source region is defined for a single destination")
    _check_models(net, models)
    rates = [float(r) for r in source_rates]
    if len(rates) != net.layer_sizes[0]:
        raise DimensionMismatch(
            f"{net.layer_sizes[0]} sources need {net.layer_sizes[0]} rates"
        )
    penalty = penalty_recursion(net, models)[0]

    L = net.num_layers
    mask_orders = [_lex_masks(m) for m in net.layer_sizes[:-1]] + [[0]]
    worst = math.inf
    binding_masks: tuple[int, ...] = ()
    binding_value = math.inf
    n_constraints = 0
    for combo in product(*mask_orders):
        value = 0.0
        for l in range(L - 1, 0, -1):
            full_next = (1 << net.layer_sizes[l]) - 1
            value = (
                net.oracles[l - 1].value_masks(combo[l - 1], full_next & ~combo[l])
                + value
            )
        first = _mask_indices(combo[0])
        margin = value - sum(rates[i - 1] for i in first) - len(first) * penalty
        n_constraints += 1
        if margin < worst:
            worst = margin
            binding_masks = combo
            binding_value = value
    members = frozenset(
        NodeId(l + 1, i)
        for l, mask in enumerate(binding_masks)
        for i in _mask_indices(mask)
    )
    binding_cut = Cut(members, binding_value)

    extended = attach_supernode(net, "before_sources", [r + penalty for r in rates])
    super_value, _ = min_cut(extended)
    super_margin = super_value - (sum(rates) + len(rates) * penalty)
    if abs(super_margin - worst) > 1e-9 * max(1.0, abs(worst), abs(super_margin)):
        raise NumericalFailure(
            f"direct and supernode margins disagree: {worst} vs {super_margin}"
        )
    passed = worst >= -tol * max(1.0, abs(worst))
    return MultiSourceReport(passed, worst, binding_cut, super_margin, n_constraints)


# ---------------------------------------------------------------------------
# Complexity and gap constants.
# ---------------------------------------------------------------------------


def decoding_complexity(
    net: LayeredNetwork,
    plan: RatePlan,
    block_length: int,
    quantizer_sizes: Mapping[NodeId, int] | None = None,
) -> tuple[float, float]:
    """Search-space sizes of joint and layered decoding, in log2.

    Joint decoding scans the product of the source codebook and every
    relay quantization codebook; layered decoding scans one layer at a
    time.  ``quantizer_sizes`` gives the number of quantization points per
    relay (default 1); boundary layers carry no quantization codebook.
    """
    if block_length < 1:
        raise InputError("block length must be at least 1")
    sizes = dict(quantizer_sizes or {})
    for node, n in sizes.items():
        if n < 1:
            raise InputError(f"quantizer size at {node.key()} must be at least 1")

    def log_points(node: NodeId) -> float:
        if node.layer in (1, net.num_layers):
            return 0.0
        return math.log2(sizes.get(node, 1))

    relays = [n for l in range(2, net.num_layers) for n in net.layer_nodes(l)]
    log2_joint = plan.rate * block_length + sum(log_points(v) for v in relays)

    terms = []
    for l in range(1, net.num_layers):
        r_total = plan.rate if l == 1 else _sum_compression(plan, net.layer_nodes(l))
        terms.append(
            r_total * block_length
            + sum(log_points(v) for v in net.layer_nodes(l + 1))
        )
    peak = max(terms)
    log2_layered = peak + math.log2(sum(2.0 ** (t - peak) for t in terms))
    return log2_joint, log2_layered


def unit_leak_penalties(layer_sizes: Sequence[int]) -> list[float]:
    """Penalty recursion specialized to a leak of one bit per layer pair."""
    L = len(layer_sizes)
    penalties = [0.0] * (L - 1)
    for l in range(L - 2, 0, -1):
        penalties[l - 1] = 1.0 + penalties[l] * layer_sizes[l]
    return penalties


def gaussian_gap(net: LayeredNetwork) -> tuple[float, float]:
    """Worst-case gaps (bits/symbol) to the cut bound for Gaussian networks:
    ``3n`` under joint decoding and ``2n`` plus the unit-leak first-layer
    penalty under layered decoding, where ``n`` is the node count."""
    n = net.node_count
    layered_penalty = unit_leak_penalties(net.layer_sizes)[0] if net.num_layers >= 2 else 0.0
    return 3.0 * n, 2.0 * n + layered_penalty
