"""Cuts and node-flows on layered networks with bisubmodular capacities.

A cut is a node subset containing the sources and excluding the
destinations; its value sums, per layer pair, the capacity from the cut's
transmitters to the receivers outside the cut.  A node-flow assigns each
node a nonnegative throughput ``f`` constrained, for every layer pair and
every subset pair (U, V), by

    f(V) - f(layer_l minus U) <= capacity_l(U, V)

``min_cut`` minimizes the cut value by dynamic programming over per-layer
subsets; ``max_flow`` constructs a flow attaining it by recursive
bisection: the split layer's flow is a point in the intersection of two
polymatroids whose rank functions are computed by the same subset DP.

Determinism rules used throughout: cut values accumulate from the sink
side (right fold), and ties between equal-value cuts resolve to the
lexicographically smallest membership-indicator vector ordered by
(layer, index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Mapping, Sequence

import numpy as np

from .capacity import _leq, _mask_indices
from .errors import (
    DimensionMismatch,
    Infeasible,
    InfeasibleBoundary,
    BadRange,
    NumericalFailure,
    RateCountMismatch,
    NegativeRate,
    TooLarge,
)
from .netgraph import Cut, Flow, LayeredNetwork, NodeId, subnetwork

INF = float("inf")

#: per-layer subset enumeration guard
LAYER_GUARD = 16


def _guard_layers(net: LayeredNetwork) -> None:
    if max(net.layer_sizes) > LAYER_GUARD:
        raise TooLarge(f"subset enumeration limited to {LAYER_GUARD} nodes per layer")


def _lex_masks(m: int) -> list[int]:
    """Subset masks ordered by their membership-indicator vector, index 1 first.

    The empty set comes first and, among ties elsewhere, sets avoiding
    low-index nodes precede sets containing them.
    """
    return sorted(range(1 << m), key=lambda s: tuple((s >> i) & 1 for i in range(m)))


def _layer_masks(net: LayeredNetwork, members: Iterable[NodeId]) -> list[int]:
    """Per-layer membership masks (list index 0 is layer 1)."""
    masks = [0] * net.num_layers
    for node in members:
        if not (
            1 <= node.layer <= net.num_layers
            and 1 <= node.index <= net.layer_sizes[node.layer - 1]
        ):
            raise BadRange(f"node {node.key()} outside the network")
        masks[node.layer - 1] |= 1 << (node.index - 1)
    return masks


def cut_value(net: LayeredNetwork, members: Iterable[NodeId]) -> float:
    """Value of the cut given by ``members``: per layer pair, the capacity
    from the members of that layer to the non-members of the next."""
    masks = _layer_masks(net, members)
    total = 0.0
    # accumulate from the sink side so the DP reproduces identical floats
    for l in range(net.num_layers - 1, 0, -1):
        full_next = (1 << net.layer_sizes[l]) - 1
        total = net.oracles[l - 1].value_masks(masks[l - 1], full_next & ~masks[l]) + total
    return total


def _boundary_lists(
    net: LayeredNetwork, boundary: Mapping[NodeId, float]
) -> tuple[list[float], list[float]]:
    """Split a boundary-flow mapping into first-layer and last-layer lists."""
    first, last = [], []
    for node in net.layer_nodes(1):
        if node not in boundary:
            raise RateCountMismatch(f"boundary flow missing for {node.key()}")
        first.append(float(boundary[node]))
    for node in net.layer_nodes(net.num_layers):
        if node not in boundary:
            raise RateCountMismatch(f"boundary flow missing for {node.key()}")
        last.append(float(boundary[node]))
    if any(v < 0 for v in first + last):
        raise NegativeRate("boundary flows must be nonnegative")
    return first, last


def _backward_tables(
    net: LayeredNetwork, final_costs: Sequence[float]
) -> list[list[float]]:
    """``tables[l][mask]``: cheapest completion cost from state ``mask`` at
    layer ``l`` to the last layer (final-layer states priced by
    ``final_costs``)."""
    L = net.num_layers
    tables: list[list[float]] = [[] for _ in range(L + 1)]
    tables[L] = list(final_costs)
    for l in range(L - 1, 0, -1):
        m_next = net.layer_sizes[l]
        full_next = (1 << m_next) - 1
        oracle = net.oracles[l - 1]
        nxt = tables[l + 1]
        cur = []
        for mask in range(1 << net.layer_sizes[l - 1]):
            best = INF
            for nmask in range(full_next + 1):
                tail = nxt[nmask]
                if tail == INF:
                    continue
                cand = oracle.value_masks(mask, full_next & ~nmask) + tail
                if cand < best:
                    best = cand
            cur.append(best)
        tables[l] = cur
    return tables


def min_cut(
    net: LayeredNetwork, boundary: Mapping[NodeId, float] | None = None
) -> tuple[float, Cut]:
    """Minimize the cut value by subset DP; returns the value and one argmin.

    Without boundary flows the first layer is pinned inside the cut and the
    last layer outside (the total-message cut).  With boundary flows every
    subset is admissible and excluded sources / included destinations are
    charged their flow, so the minimum bounds the supportable boundary
    total.

    Ties resolve to the lexicographically smallest indicator vector.
    """
    _guard_layers(net)
    L = net.num_layers
    m_first, m_last = net.layer_sizes[0], net.layer_sizes[-1]
    full_first = (1 << m_first) - 1

    if boundary is None:
        first_flows = last_flows = None
        final_costs = [INF] * (1 << m_last)
        final_costs[0] = 0.0
    else:
        first_flows, last_flows = _boundary_lists(net, boundary)
        final_costs = [
            sum(last_flows[i - 1] for i in _mask_indices(mask))
            for mask in range(1 << m_last)
        ]
    tables = _backward_tables(net, final_costs)

    def init_cost(mask: int) -> float:
        if first_flows is None:
            return 0.0 if mask == full_first else INF
        return sum(first_flows[i - 1] for i in _mask_indices(full_first & ~mask))

    value = INF
    for mask in range(full_first + 1):
        cand = init_cost(mask)
        if cand == INF:
            continue
        cand = cand + tables[1][mask]
        if cand < value:
            value = cand

    # forward reconstruction: scan masks in tie-break order, match exactly
    members: set[NodeId] = set()
    chosen = None
    for mask in _lex_masks(m_first):
        cand = init_cost(mask)
        if cand != INF and cand + tables[1][mask] == value:
            chosen = mask
            break
    assert chosen is not None
    members.update(NodeId(1, i) for i in _mask_indices(chosen))
    for l in range(1, L):
        m_next = net.layer_sizes[l]
        full_next = (1 << m_next) - 1
        oracle = net.oracles[l - 1]
        target = tables[l][chosen]
        nxt = None
        for nmask in _lex_masks(m_next):
            tail = tables[l + 1][nmask]
            if tail == INF:
                continue
            if oracle.value_masks(chosen, full_next & ~nmask) + tail == target:
                nxt = nmask
                break
        assert nxt is not None
        members.update(NodeId(l + 1, i) for i in _mask_indices(nxt))
        chosen = nxt

    return value, Cut(frozenset(members), value)


# ---------------------------------------------------------------------------
# Boundary rank functions of the two half-networks around a split layer.
# ---------------------------------------------------------------------------

BoundarySide = Literal["source", "sink"]


@dataclass(frozen=True)
class BoundaryFunction:
    """Set function on a split layer bounding the flow its subsets may carry,
    given the capacities of one half-network and the flows fixed on its far
    boundary.

    These functions are normalized (zero at the empty set), non-decreasing,
    and submodular, so each defines a polymatroid.
    """

    side: BoundarySide
    ground_size: int
    values: tuple[float, ...]

    def value(self, subset: Iterable[int]) -> float:
        mask = 0
        for i in subset:
            if not 1 <= i <= self.ground_size:
                raise BadRange(f"index {i} outside ground set of {self.ground_size}")
            mask |= 1 << (i - 1)
        return self.values[mask]

    def value_mask(self, mask: int) -> float:
        return self.values[mask]

    def check_polymatroid(self, tol: float = 1e-9) -> tuple[bool, str | None]:
        """Exhaustively verify zero-at-empty, monotonicity, and submodularity."""
        vals = self.values
        if vals[0] != 0.0:
            return False, f"value at empty set is {vals[0]}"
        n = 1 << self.ground_size
        for a in range(n):
            for i in range(self.ground_size):
                if a & (1 << i):
                    continue
                if not _leq(vals[a], vals[a | (1 << i)], tol):
                    return False, f"not monotone at {a:b} adding {i + 1}"
        for a in range(n):
            for b in range(a, n):
                if not _leq(vals[a | b] + vals[a & b], vals[a] + vals[b], tol):
                    return False, f"not submodular at {a:b}, {b:b}"
        return True, None


def boundary_function(
    half: LayeredNetwork, side: BoundarySide, far_flows: Sequence[float]
) -> BoundaryFunction:
    """Rank function of one half-network on its split layer.

    ``side="source"``: the half runs from the sources to the split layer
    (its last layer is the ground set) and ``far_flows`` fixes its first
    layer.  ``side="sink"``: the half runs from the split layer to the
    destinations (its first layer is the ground set) and ``far_flows``
    fixes its last layer.

    For each ground subset T the value is the cheapest way to route around
    T: the minimum over cuts of the half of the cut value plus the far
    boundary flow the cut leaves exposed.
    """
    _guard_layers(half)
    if side == "source":
        m_far = half.layer_sizes[0]
        if len(far_flows) != m_far:
            raise RateCountMismatch(f"need {m_far} far-boundary flows")
        m_ground = half.layer_sizes[-1]
        full_ground = (1 << m_ground) - 1
        # forward sweep: cheapest way to reach each final-layer state
        cur = [
            sum(far_flows[i - 1] for i in _mask_indices(((1 << m_far) - 1) & ~mask))
            for mask in range(1 << m_far)
        ]
        for l in range(1, half.num_layers):
            m_next = half.layer_sizes[l]
            full_next = (1 << m_next) - 1
            oracle = half.oracles[l - 1]
            nxt = []
            for nmask in range(full_next + 1):
                best = INF
                for mask in range(len(cur)):
                    cand = cur[mask] + oracle.value_masks(mask, full_next & ~nmask)
                    if cand < best:
                        best = cand
                nxt.append(best)
            cur = nxt
        values = tuple(cur[full_ground & ~t] for t in range(full_ground + 1))
        return BoundaryFunction("source", m_ground, values)

    if side == "sink":
        m_far = half.layer_sizes[-1]
        if len(far_flows) != m_far:
            raise RateCountMismatch(f"need {m_far} far-boundary flows")
        m_ground = half.layer_sizes[0]
        final_costs = [
            sum(far_flows[i - 1] for i in _mask_indices(mask))
            for mask in range(1 << m_far)
        ]
        tables = _backward_tables(half, final_costs)
        return BoundaryFunction("sink", m_ground, tuple(tables[1]))

    raise BadRange(f"unknown side {side!r}")


# ---------------------------------------------------------------------------
# Polymatroid intersection at a prescribed total, via a small dense simplex.
# ---------------------------------------------------------------------------


def _simplex_max(
    a_rows: Sequence[Sequence[float]], b: Sequence[float], c: Sequence[float]
) -> tuple[float, list[float]]:
    """Maximize ``c @ x`` subject to ``A x <= b`` and ``x >= 0``.

    Requires ``b >= 0`` so the slack basis starts feasible.  Pivoting uses
    Bland's rule (smallest eligible index for both the entering column and
    ratio ties), which cannot cycle.
    """
    a = np.asarray(a_rows, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = a.shape
    if (b < 0).any():
        raise NumericalFailure("simplex requires nonnegative right-hand sides")
    eps = 1e-12
    # tableau: columns = structural vars, slacks, rhs; last row = -objective
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :n] = -c
    basis = list(range(n, n + m))

    for _ in range(10_000):
        enter = -1
        for j in range(n + m):
            if tab[m, j] < -eps:
                enter = j
                break
        if enter < 0:
            break
        leave = -1
        best_ratio = INF
        for i in range(m):
            coef = tab[i, enter]
            if coef > eps:
                ratio = tab[i, -1] / coef
                if ratio < best_ratio - eps or (
                    abs(ratio - best_ratio) <= eps
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            raise NumericalFailure("linear program is unbounded")
        pivot = tab[leave, enter]
        tab[leave] /= pivot
        for i in range(m + 1):
            if i != leave and tab[i, enter] != 0.0:
                tab[i] -= tab[i, enter] * tab[leave]
        basis[leave] = enter
    else:
        raise NumericalFailure("simplex did not converge")

    x = [0.0] * n
    for i, var in enumerate(basis):
        if var < n:
            x[var] = float(tab[i, -1])
    return float(tab[m, -1]), x


def polymatroid_intersect(
    r_source: BoundaryFunction,
    r_sink: BoundaryFunction,
    target_total: float,
    tol: float = 1e-9,
) -> list[float]:
    """A nonnegative vector in both polymatroids whose coordinates sum to
    ``target_total``.

    The largest achievable total is ``min over T of
    r_source(complement T) + r_sink(T)``; a target above it (plus
    tolerance) is rejected.  The simplex optimum attains that bound; if it
    exceeds the target, coordinates are reduced greedily in ascending index
    order, which stays feasible because both polymatroids are down-closed.

    Raises:
        Infeasible: target exceeds the intersection bound.
        NumericalFailure: the solver fell measurably short of the target.
    """
    m = r_source.ground_size
    if r_sink.ground_size != m:
        raise DimensionMismatch("boundary functions have different ground sets")
    full = (1 << m) - 1
    bound = min(
        r_source.value_mask(full & ~t) + r_sink.value_mask(t) for t in range(full + 1)
    )
    if target_total > bound + tol * max(1.0, abs(bound)):
        raise Infeasible(
            f"target total {target_total} exceeds intersection bound {bound}"
        )

    rows, rhs = [], []
    for mask in range(1, full + 1):
        row = [1.0 if mask & (1 << i) else 0.0 for i in range(m)]
        rows.append(row)
        rhs.append(r_source.value_mask(mask))
        rows.append(row)
        rhs.append(r_sink.value_mask(mask))
    value, x = _simplex_max(rows, rhs, [1.0] * m)
    if value < target_total - max(tol, 1e-9) * max(1.0, abs(target_total)):
        raise NumericalFailure(
            f"simplex reached {value}, short of target {target_total}"
        )
    excess = max(0.0, value - target_total)
    for i in range(m):
        cut = min(x[i], excess)
        x[i] -= cut
        excess -= cut
    return [max(0.0, v) for v in x]


# ---------------------------------------------------------------------------
# Max-flow construction and flow verification.
# ---------------------------------------------------------------------------


def max_flow(
    net: LayeredNetwork,
    boundary: Mapping[NodeId, float] | None = None,
    split_layer: int | None = None,
    boundary_fn_hook: Callable[[BoundaryFunction], None] | None = None,
) -> Flow:
    """Construct a full node-flow meeting the min-cut (unicast) or the given
    boundary totals.

    Recursive bisection: split at the middle layer, build the two boundary
    rank functions, place the split layer's flow in their polymatroid
    intersection at the running total, and recurse into both halves.

    Args:
        boundary: per-node flows for the first and last layers; omit it for
            a unicast network, where both ends carry the min-cut value.
        split_layer: override the top-level split (debugging aid).
        boundary_fn_hook: called with every boundary function the recursion
            builds, in construction order.

    Raises:
        InfeasibleBoundary: boundary totals unequal, infeasible against the
            cut bound, or missing on a multi-node boundary.
    """
    _guard_layers(net)
    if boundary is None:
        if not net.is_unicast:
            raise InfeasibleBoundary(
                "multi-node boundary layers need explicit boundary flows"
            )
        value, _ = min_cut(net)
        first, last = [value], [value]
    else:
        first, last = _boundary_lists(net, boundary)
        total_in, total_out = sum(first), sum(last)
        if not math.isclose(total_in, total_out, rel_tol=1e-9, abs_tol=1e-9):
            raise InfeasibleBoundary(
                f"boundary totals differ: {total_in} vs {total_out}"
            )
        bound, _ = min_cut(net, boundary)
        if total_in > bound + 1e-9 * max(1.0, abs(bound)):
            raise InfeasibleBoundary(
                f"boundary total {total_in} exceeds the cut bound {bound}"
            )
    if split_layer is not None and not 2 <= split_layer <= net.num_layers - 1:
        raise BadRange(f"split layer must lie strictly inside [1, {net.num_layers}]")

    per_layer = _construct(net, first, last, split_layer, boundary_fn_hook)
    values = {
        NodeId(l + 1, i + 1): per_layer[l][i]
        for l in range(net.num_layers)
        for i in range(net.layer_sizes[l])
    }
    return Flow(values)


def _construct(
    net: LayeredNetwork,
    first: list[float],
    last: list[float],
    split_layer: int | None,
    hook: Callable[[BoundaryFunction], None] | None,
) -> list[list[float]]:
    if net.num_layers == 2:
        return [first, last]
    split = split_layer if split_layer is not None else math.ceil(net.num_layers / 2)
    upper, _ = subnetwork(net, 1, split)
    lower, _ = subnetwork(net, split, net.num_layers)
    r_source = boundary_function(upper, "source", first)
    r_sink = boundary_function(lower, "sink", last)
    if hook is not None:
        hook(r_source)
        hook(r_sink)
    middle = polymatroid_intersect(r_source, r_sink, sum(first))
    upper_flows = _construct(upper, first, middle, None, hook)
    lower_flows = _construct(lower, middle, last, None, hook)
    return upper_flows + lower_flows[1:]


@dataclass
class FlowCheck:
    """Result of exhaustively checking a flow against every capacity
    constraint and conservation across the boundary layers."""

    passed: bool
    worst_excess: float
    conservation_gap: float
    n_constraints: int
    violations: list[dict] = field(default_factory=list)


def verify_flow(net: LayeredNetwork, flow: Flow, tol: float = 1e-9) -> FlowCheck:
    """Check ``f(V) - f(layer_l minus U) <= capacity_l(U, V)`` for every
    layer pair and subset pair, plus conservation of the boundary totals."""
    _guard_layers(net)
    for node in net.nodes():
        if node not in flow.values:
            raise RateCountMismatch(f"flow value missing for {node.key()}")
    layer_vals = [
        [flow.values[n] for n in net.layer_nodes(l)]
        for l in range(1, net.num_layers + 1)
    ]
    worst = -INF
    n_constraints = 0
    violations: list[dict] = []
    for l in range(1, net.num_layers):
        vals_u = layer_vals[l - 1]
        vals_v = layer_vals[l]
        m_in, m_out = net.layer_sizes[l - 1], net.layer_sizes[l]
        full_in = (1 << m_in) - 1
        oracle = net.oracles[l - 1]
        for umask in range(full_in + 1):
            f_excluded = sum(
                vals_u[i - 1] for i in _mask_indices(full_in & ~umask)
            )
            for vmask in range(1 << m_out):
                lhs = sum(vals_v[i - 1] for i in _mask_indices(vmask)) - f_excluded
                rhs = oracle.value_masks(umask, vmask)
                n_constraints += 1
                excess = lhs - rhs
                if excess > worst:
                    worst = excess
                if not _leq(lhs, rhs, tol):
                    violations.append(
                        {
                            "layer": l,
                            "U": _mask_indices(umask),
                            "V": _mask_indices(vmask),
                            "lhs": lhs,
                            "rhs": rhs,
                            "excess": excess,
                        }
                    )
    total_in = sum(layer_vals[0])
    total_out = sum(layer_vals[-1])
    gap = abs(total_in - total_out)
    conserved = gap <= tol * max(1.0, total_in, total_out)
    return FlowCheck(
        passed=conserved and not violations,
        worst_excess=worst,
        conservation_gap=gap,
        n_constraints=n_constraints,
        violations=violations,
    )
