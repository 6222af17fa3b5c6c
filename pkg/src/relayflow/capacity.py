"""Capacity oracles over adjacent-layer subset pairs, and the layer models
they derive from.

An oracle maps a pair ``(U, V)`` -- ``U`` a subset of the transmit layer,
``V`` a subset of the receive layer -- to a nonnegative value in bits per
symbol.  Five families are provided: additive entries, GF(2) matrix rank,
Gaussian log-det, explicit tables, and exact mutual information of a
discrete layer model.  Every family satisfies three axioms, which
``check_capacity_axioms`` verifies exhaustively:

1. bisubmodularity:
   ``value(U1|U2, V1&V2) + value(U1&U2, V1|V2) <= value(U1,V1) + value(U2,V2)``
2. non-decreasing under set inclusion,
3. zero whenever either argument is empty.

All logarithms are base 2.  Subsets are given as iterables of 1-based
node indices within the layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    InputError,
    NonNormalizedPMF,
    OutOfRange,
    TooLarge,
    UnsupportedModel,
)

PMF_TOL = 1e-12

#: largest joint probability table a discrete layer model may require
MAX_JOINT_CELLS = 10_000_000

#: largest layer-pair width (m_in + m_out) for exhaustive axiom checking
AXIOM_GUARD_BITS = 16


def _to_mask(subset: Iterable[int], size: int) -> int:
    """Pack 1-based indices into a bitmask; bit ``i-1`` stands for index ``i``."""
    mask = 0
    for i in subset:
        if not 1 <= i <= size:
            raise OutOfRange(f"index {i} outside layer of size {size}")
        mask |= 1 << (i - 1)
    return mask


def _mask_indices(mask: int) -> tuple[int, ...]:
    return tuple(i + 1 for i in range(mask.bit_length()) if (mask >> i) & 1)


def _entropy(p: np.ndarray) -> float:
    """Shannon entropy in bits; zero cells contribute zero."""
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > 0.0]
    return float(-(nz * np.log2(nz)).sum())


class CapacityOracle:
    """Base class; concrete families implement ``_value(umask, vmask)``."""

    kind: str = "abstract"

    def __init__(self, dims: tuple[int, int]):
        m_in, m_out = dims
        if m_in < 1 or m_out < 1:
            raise InputError("oracle dimensions must be positive")
        self.dims = (int(m_in), int(m_out))

    def value(self, transmitters: Iterable[int], receivers: Iterable[int]) -> float:
        """Capacity value of (U, V) in bits/symbol; exactly 0.0 if either is empty."""
        umask = _to_mask(transmitters, self.dims[0])
        vmask = _to_mask(receivers, self.dims[1])
        return self.value_masks(umask, vmask)

    def value_masks(self, umask: int, vmask: int) -> float:
        if umask == 0 or vmask == 0:
            return 0.0
        if umask >> self.dims[0] or vmask >> self.dims[1]:
            raise OutOfRange("subset mask outside oracle dimensions")
        return self._value(umask, vmask)

    def _value(self, umask: int, vmask: int) -> float:
        raise NotImplementedError


def eval_capacity(
    oracle: CapacityOracle, transmitters: Iterable[int], receivers: Iterable[int]
) -> float:
    """Functional form of :meth:`CapacityOracle.value`."""
    return oracle.value(transmitters, receivers)


class AdditiveOracle(CapacityOracle):
    """Sum of per-link capacities ``c[u][v]`` over the chosen pair."""

    kind = "additive"

    def __init__(self, matrix: Sequence[Sequence[float]]):
        c = np.asarray(matrix, dtype=float)
        if c.ndim != 2:
            raise InputError("additive capacity matrix must be 2-D")
        if (c < 0).any():
            raise InputError("additive capacity entries must be nonnegative")
        super().__init__((c.shape[0], c.shape[1]))
        self.matrix = c

    def _value(self, umask: int, vmask: int) -> float:
        rows = [i - 1 for i in _mask_indices(umask)]
        cols = [j - 1 for j in _mask_indices(vmask)]
        return float(self.matrix[np.ix_(rows, cols)].sum())


class RankGF2Oracle(CapacityOracle):
    """Rank over GF(2) of the transfer submatrix ``g[V, U]``.

    ``g`` has one row per receiver and one column per transmitter, so a
    receive vector is the GF(2)-linear image of the transmit vector.
    """

    kind = "rank_gf2"

    def __init__(self, matrix: Sequence[Sequence[int]]):
        g = np.asarray(matrix, dtype=int)
        if g.ndim != 2:
            raise InputError("GF(2) transfer matrix must be 2-D")
        if not np.isin(g, (0, 1)).all():
            raise InputError("GF(2) transfer matrix entries must be 0 or 1")
        super().__init__((g.shape[1], g.shape[0]))
        self.matrix = g
        # each row packed as an int over transmitter columns
        self._packed_rows = [
            sum(int(g[w, u]) << u for u in range(g.shape[1])) for w in range(g.shape[0])
        ]

    def _value(self, umask: int, vmask: int) -> float:
        rows = [
            self._packed_rows[w - 1] & umask for w in _mask_indices(vmask)
        ]
        return float(_gf2_rank(rows))


def _gf2_rank(rows: list[int]) -> int:
    """Rank of bit-packed rows via Gaussian elimination on the low set bit."""
    rank = 0
    basis: list[int] = []
    for row in rows:
        for b in basis:
            low = b & -b
            if row & low:
                row ^= b
        if row:
            basis.append(row)
            rank += 1
    return rank


class GaussianLogDetOracle(CapacityOracle):
    """``log2 det(I + H[V,U] H[V,U]^* / 2)`` for a complex channel matrix.

    Receiver noise variance and quantization noise variance are both fixed
    at 1, which puts the factor 1/2 in the log-det; signal strength is
    carried entirely in ``h``.
    """

    kind = "gaussian"

    def __init__(self, h: Sequence[Sequence[complex]]):
        hm = np.asarray(h, dtype=complex)
        if hm.ndim != 2:
            raise InputError("channel matrix must be 2-D")
        super().__init__((hm.shape[1], hm.shape[0]))
        self.h = hm

    def _value(self, umask: int, vmask: int) -> float:
        return _logdet_mi(self.h, umask, vmask, noise=2.0)


def _logdet_mi(h: np.ndarray, umask: int, vmask: int, noise: float) -> float:
    """``log2 det(I + H_sub H_sub^* / noise)`` via Cholesky in the log domain."""
    rows = [w - 1 for w in _mask_indices(vmask)]
    cols = [u - 1 for u in _mask_indices(umask)]
    sub = h[np.ix_(rows, cols)]
    gram = np.eye(len(rows), dtype=complex) + sub @ sub.conj().T / noise
    gram = (gram + gram.conj().T) / 2.0
    chol = np.linalg.cholesky(gram)
    return float(2.0 * np.log2(np.real(np.diag(chol))).sum())


class ExplicitTableOracle(CapacityOracle):
    """Capacity values stored per subset pair; unlisted pairs default to 0."""

    kind = "table"

    def __init__(
        self,
        dims: tuple[int, int],
        values: dict[tuple[tuple[int, ...], tuple[int, ...]], float],
    ):
        super().__init__(dims)
        self._table: dict[tuple[int, int], float] = {}
        for (u, v), val in values.items():
            umask = _to_mask(u, self.dims[0])
            vmask = _to_mask(v, self.dims[1])
            if (umask == 0 or vmask == 0) and val != 0.0:
                raise InputError("table entries with an empty side must be 0")
            self._table[(umask, vmask)] = float(val)

    def _value(self, umask: int, vmask: int) -> float:
        return self._table.get((umask, vmask), 0.0)


class DiscreteMIOracle(CapacityOracle):
    """Exact mutual information between ``X_U`` and quantized outputs of ``V``,
    conditioned on the remaining transmitters of the layer."""

    kind = "discrete"

    def __init__(self, model: "DiscreteLayerModel"):
        super().__init__(model.dims)
        m_in, m_out = model.dims
        if m_in + m_out > 12:
            raise TooLarge("discrete capacity oracle limited to 12 nodes per layer pair")
        self.model = model
        # full value table built up front so evaluation stays read-only
        self._table = {
            (umask, vmask): model.mutual_information_masks(umask, vmask)
            for umask in range(1 << m_in)
            for vmask in range(1 << m_out)
        }

    def _value(self, umask: int, vmask: int) -> float:
        return self._table[(umask, vmask)]


@dataclass
class AxiomReport:
    """Outcome of the exhaustive capacity-axiom check."""

    passed: bool
    bisubmodular: bool
    monotone: bool
    zero_on_empty: bool
    counterexample: dict | None
    n_checks: int


def _leq(lhs: float, rhs: float, tol: float) -> bool:
    """lhs <= rhs with absolute tolerance scaled by max(1, magnitude)."""
    return lhs <= rhs + tol * max(1.0, abs(lhs), abs(rhs))


def check_capacity_axioms(oracle: CapacityOracle, tol: float = 1e-9) -> AxiomReport:
    """Exhaustively verify bisubmodularity, monotonicity, and zero-on-empty.

    Raises:
        TooLarge: if the layer pair exceeds the enumeration guard
            (``m_in + m_out`` above 16).
    """
    m_in, m_out = oracle.dims
    if m_in + m_out > AXIOM_GUARD_BITS:
        raise TooLarge(
            f"axiom check limited to {AXIOM_GUARD_BITS} nodes per layer pair"
        )
    nu, nv = 1 << m_in, 1 << m_out
    tab = [[oracle.value_masks(u, v) for v in range(nv)] for u in range(nu)]
    n_checks = 0
    counterexample = None

    zero_ok = True
    for u in range(nu):
        n_checks += 1
        if tab[u][0] != 0.0:
            zero_ok = False
            counterexample = {"axiom": "zero_on_empty", "U": _mask_indices(u), "V": ()}
            break
    for v in range(nv):
        n_checks += 1
        if tab[0][v] != 0.0:
            zero_ok = False
            counterexample = counterexample or {
                "axiom": "zero_on_empty",
                "U": (),
                "V": _mask_indices(v),
            }
            break

    mono_ok = True
    # single-element steps imply monotonicity along every inclusion chain
    for u in range(nu):
        for v in range(nv):
            base = tab[u][v]
            for i in range(m_in):
                if u & (1 << i):
                    continue
                n_checks += 1
                if not _leq(base, tab[u | (1 << i)][v], tol):
                    mono_ok = False
                    counterexample = counterexample or {
                        "axiom": "monotone",
                        "U": _mask_indices(u),
                        "V": _mask_indices(v),
                        "added_transmitter": i + 1,
                        "value": base,
                        "larger_set_value": tab[u | (1 << i)][v],
                    }
            for j in range(m_out):
                if v & (1 << j):
                    continue
                n_checks += 1
                if not _leq(base, tab[u][v | (1 << j)], tol):
                    mono_ok = False
                    counterexample = counterexample or {
                        "axiom": "monotone",
                        "U": _mask_indices(u),
                        "V": _mask_indices(v),
                        "added_receiver": j + 1,
                        "value": base,
                        "larger_set_value": tab[u][v | (1 << j)],
                    }

    bisub_ok = True
    for u1 in range(nu):
        for v1 in range(nv):
            for u2 in range(u1, nu):
                for v2 in range(nv):
                    if u2 == u1 and v2 < v1:
                        continue
                    n_checks += 1
                    lhs = tab[u1 | u2][v1 & v2] + tab[u1 & u2][v1 | v2]
                    rhs = tab[u1][v1] + tab[u2][v2]
                    if not _leq(lhs, rhs, tol):
                        bisub_ok = False
                        counterexample = counterexample or {
                            "axiom": "bisubmodular",
                            "U1": _mask_indices(u1),
                            "V1": _mask_indices(v1),
                            "U2": _mask_indices(u2),
                            "V2": _mask_indices(v2),
                            "lhs": lhs,
                            "rhs": rhs,
                        }

    return AxiomReport(
        passed=zero_ok and mono_ok and bisub_ok,
        bisubmodular=bisub_ok,
        monotone=mono_ok,
        zero_on_empty=zero_ok,
        counterexample=counterexample,
        n_checks=n_checks,
    )


# ---------------------------------------------------------------------------
# Layer models: the channel/quantizer descriptions oracles derive from.
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianLayerModel:
    """Complex linear channel with unit receiver noise and unit quantization
    noise (the quantized output adds an independent unit-variance circular
    Gaussian to the received signal).

    ``h`` has one row per receiver and one column per transmitter; inputs
    are independent unit circular Gaussians.
    """

    h: np.ndarray

    def __post_init__(self):
        hm = np.asarray(self.h, dtype=complex)
        if hm.ndim != 2:
            raise InputError("channel matrix must be 2-D")
        object.__setattr__(self, "h", hm)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.h.shape[1], self.h.shape[0])

    def oracle(self) -> GaussianLogDetOracle:
        return GaussianLogDetOracle(self.h)

    def leak(self, receivers: Iterable[int] | None = None) -> float:
        """Rate spent describing quantization noise: exactly 1 bit per receiver."""
        if receivers is None:
            return float(self.dims[1])
        return float(len(set(_mask_indices(_to_mask(receivers, self.dims[1])))))

    def mi_received(self, transmitters: Iterable[int], receivers: Iterable[int]) -> float:
        """Mutual information against the raw (unquantized) received signals."""
        umask = _to_mask(transmitters, self.dims[0])
        vmask = _to_mask(receivers, self.dims[1])
        if umask == 0 or vmask == 0:
            return 0.0
        return _logdet_mi(self.h, umask, vmask, noise=1.0)


class DiscreteLayerModel:
    """Finite-alphabet layer: independent per-transmitter input pmfs, one
    channel conditional per receiver, one quantizer conditional per receiver.

    Shapes:
        ``input_pmfs[u]``: 1-D over the alphabet of transmitter ``u``.
        ``channels[w]``: input axes in transmitter order, then the receive
            axis, i.e. ``p(y_w | x_1..x_m)``.
        ``quantizers[w]``: rows over the receive alphabet, columns over the
            quantized alphabet, i.e. ``p(yq_w | y_w)``.
    """

    def __init__(
        self,
        input_pmfs: Sequence[np.ndarray],
        channels: Sequence[np.ndarray],
        quantizers: Sequence[np.ndarray],
    ):
        self.input_pmfs = [np.asarray(p, dtype=float) for p in input_pmfs]
        self.channels = [np.asarray(c, dtype=float) for c in channels]
        self.quantizers = [np.asarray(q, dtype=float) for q in quantizers]
        if len(self.channels) != len(self.quantizers):
            raise InputError("need one quantizer per receiver")
        m_in, m_out = len(self.input_pmfs), len(self.channels)
        if m_in < 1 or m_out < 1:
            raise InputError("layer model needs at least one node per side")
        self._m_in, self._m_out = m_in, m_out

        x_shape = tuple(p.size for p in self.input_pmfs)
        for u, p in enumerate(self.input_pmfs):
            _check_pmf(p, f"input pmf {u + 1}")
        for w, c in enumerate(self.channels):
            if c.shape[:-1] != x_shape:
                raise InputError(f"channel {w + 1} input axes do not match the layer")
            _check_pmf(c, f"channel {w + 1}", axis=-1)
        for w, q in enumerate(self.quantizers):
            if q.ndim != 2 or q.shape[0] != self.channels[w].shape[-1]:
                raise InputError(f"quantizer {w + 1} does not match its channel output")
            _check_pmf(q, f"quantizer {w + 1}", axis=-1)

        cells = math.prod(x_shape) * math.prod(q.shape[1] for q in self.quantizers)
        if cells > MAX_JOINT_CELLS:
            raise TooLarge("discrete layer model joint table exceeds the cell cap")

        self._x_shape = x_shape
        # joint input pmf as an array with one axis per transmitter
        p_x = np.ones(())
        for p in self.input_pmfs:
            p_x = np.multiply.outer(p_x, p)
        self._p_x = p_x
        # quantized per-receiver conditionals p(yq_w | x), x axes first
        self._quantized = [
            np.tensordot(self.channels[w], self.quantizers[w], axes=([-1], [0]))
            for w in range(m_out)
        ]

    @property
    def dims(self) -> tuple[int, int]:
        return (self._m_in, self._m_out)

    def oracle(self) -> DiscreteMIOracle:
        return DiscreteMIOracle(self)

    def quantized_conditional(self, receiver: int) -> np.ndarray:
        """``p(yq_w | x)`` for receiver ``w`` (1-based), input axes first."""
        return self._quantized[receiver - 1]

    def mutual_information(
        self, transmitters: Iterable[int], receivers: Iterable[int]
    ) -> float:
        """``I(X_U ; Yq_V | X_rest)`` by exact summation over the joint pmf."""
        return self.mutual_information_masks(
            _to_mask(transmitters, self._m_in), _to_mask(receivers, self._m_out)
        )

    def mutual_information_masks(
        self, umask: int, vmask: int, quantized: bool = True
    ) -> float:
        if umask == 0 or vmask == 0:
            return 0.0
        cond = self._quantized if quantized else [
            c.reshape(self._x_shape + (c.shape[-1],)) for c in self.channels
        ]
        joint = self._p_x
        for w in _mask_indices(vmask):
            arr = cond[w - 1]
            # append one output axis; existing axes broadcast
            joint = joint[..., None] * arr.reshape(
                self._x_shape + (1,) * (joint.ndim - len(self._x_shape)) + (arr.shape[-1],)
            )
        u_axes = tuple(i - 1 for i in _mask_indices(umask))
        h_x_all = _entropy(self._p_x)
        h_x_rest = _entropy(self._p_x.sum(axis=u_axes))
        h_out_x_rest = _entropy(joint.sum(axis=u_axes))
        h_joint = _entropy(joint)
        # I(X_U; out | X_rest) = H(X_all) + H(out, X_rest) - H(all joint) - H(X_rest)
        return max(0.0, h_x_all + h_out_x_rest - h_joint - h_x_rest)

    def mi_received(self, transmitters: Iterable[int], receivers: Iterable[int]) -> float:
        """Mutual information against raw received symbols (quantizer bypassed)."""
        return self.mutual_information_masks(
            _to_mask(transmitters, self._m_in),
            _to_mask(receivers, self._m_out),
            quantized=False,
        )

    def leak(self, receivers: Iterable[int] | None = None) -> float:
        """``I(Yq_W ; Y_W | X_all)`` for the given receivers (all by default).

        Given all inputs, receiver chains are independent, so the leak is the
        sum over receivers of ``H(Yq_w | X) - H(Yq_w | Y_w)``.
        """
        if receivers is None:
            wset = range(1, self._m_out + 1)
        else:
            wset = _mask_indices(_to_mask(receivers, self._m_out))
        total = 0.0
        p_x_flat = self._p_x.ravel()
        for w in wset:
            q_given_x = self._quantized[w - 1].reshape(p_x_flat.size, -1)
            h_q_given_x = float(
                sum(p * _entropy(row) for p, row in zip(p_x_flat, q_given_x))
            )
            chan = self.channels[w - 1].reshape(p_x_flat.size, -1)
            p_y = p_x_flat @ chan
            quant = self.quantizers[w - 1]
            h_q_given_y = float(
                sum(p * _entropy(quant[y]) for y, p in enumerate(p_y))
            )
            total += h_q_given_x - h_q_given_y
        return max(0.0, total)


def _check_pmf(arr: np.ndarray, what: str, axis: int | None = None) -> None:
    if (arr < 0).any():
        raise NonNormalizedPMF(f"{what} has negative entries")
    sums = arr.sum() if axis is None else arr.sum(axis=axis)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=PMF_TOL):
        raise NonNormalizedPMF(f"{what} does not sum to 1 within {PMF_TOL}")


@dataclass(frozen=True)
class DeterministicLayerModel:
    """Wrapper declaring a layer noiseless: quantized output equals the
    received symbol, so the quantizer leak is exactly zero."""

    wrapped: CapacityOracle

    @property
    def dims(self) -> tuple[int, int]:
        return self.wrapped.dims

    def oracle(self) -> CapacityOracle:
        return self.wrapped

    def leak(self, receivers: Iterable[int] | None = None) -> float:
        return 0.0

    def mi_received(self, transmitters: Iterable[int], receivers: Iterable[int]) -> float:
        return self.wrapped.value(transmitters, receivers)


LayerModel = GaussianLayerModel | DiscreteLayerModel | DeterministicLayerModel


def quantizer_leak(model: LayerModel, receivers: Iterable[int] | None = None) -> float:
    """Rate spent describing quantization noise at the given receivers.

    Raises:
        UnsupportedModel: for inputs that are not layer models (pure
            capacity oracles carry no quantizer information).
    """
    if isinstance(model, (GaussianLayerModel, DiscreteLayerModel, DeterministicLayerModel)):
        return model.leak(receivers)
    raise UnsupportedModel(
        "quantizer leak needs a layer model; wrap plain oracles in "
        "DeterministicLayerModel to declare a zero leak"
    )


# ---------------------------------------------------------------------------
# JSON oracle specs (the wire format used in network files).
# ---------------------------------------------------------------------------


def oracle_from_spec(
    spec: dict, dims: tuple[int, int] | None = None
) -> tuple[CapacityOracle, LayerModel | None]:
    """Build an oracle (and its layer model, when the family defines one)
    from a JSON spec fragment.

    ``dims`` supplies the layer-pair sizes for table specs that omit their
    own ``dims`` field (network files infer them from the layer list).
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InputError("oracle spec must be an object with a 'kind' field")
    kind = spec["kind"]
    try:
        if kind == "additive":
            return AdditiveOracle(spec["matrix"]), None
        if kind == "rank_gf2":
            return RankGF2Oracle(spec["matrix"]), None
        if kind == "gaussian":
            h = np.asarray(spec["h_re"], dtype=float) + 1j * np.asarray(
                spec["h_im"], dtype=float
            )
            model = GaussianLayerModel(h)
            return model.oracle(), model
        if kind == "table":
            if "dims" in spec:
                dims = (int(spec["dims"][0]), int(spec["dims"][1]))
            if dims is None:
                raise InputError("table spec needs 'dims' outside a network file")
            values = {}
            for key, val in spec["values"].items():
                u_part, _, v_part = key.partition(";")
                u = tuple(int(t) for t in u_part.split(",") if t)
                v = tuple(int(t) for t in v_part.split(",") if t)
                values[(u, v)] = float(val)
            return ExplicitTableOracle(dims, values), None
        if kind == "discrete":
            model = DiscreteLayerModel(
                [np.asarray(p, dtype=float) for p in spec["pmfs"]],
                [np.asarray(c, dtype=float) for c in spec["channel"]],
                [np.asarray(q, dtype=float) for q in spec["quantizer"]],
            )
            return model.oracle(), model
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed {kind!r} oracle spec: {exc}") from exc
    raise InputError(f"unknown oracle kind {kind!r}")


def oracle_to_spec(oracle: CapacityOracle) -> dict:
    """Serialize an oracle back to its JSON spec fragment."""
    if isinstance(oracle, AdditiveOracle):
        return {"kind": "additive", "matrix": oracle.matrix.tolist()}
    if isinstance(oracle, RankGF2Oracle):
        return {"kind": "rank_gf2", "matrix": oracle.matrix.tolist()}
    if isinstance(oracle, GaussianLogDetOracle):
        return {
            "kind": "gaussian",
            "h_re": np.real(oracle.h).tolist(),
            "h_im": np.imag(oracle.h).tolist(),
        }
    if isinstance(oracle, ExplicitTableOracle):
        values = {
            ",".join(map(str, _mask_indices(u)))
            + ";"
            + ",".join(map(str, _mask_indices(v))): val
            for (u, v), val in sorted(oracle._table.items())
        }
        return {"kind": "table", "dims": list(oracle.dims), "values": values}
    if isinstance(oracle, DiscreteMIOracle):
        m = oracle.model
        return {
            "kind": "discrete",
            "pmfs": [p.tolist() for p in m.input_pmfs],
            "channel": [c.tolist() for c in m.channels],
            "quantizer": [q.tolist() for q in m.quantizers],
        }
    raise InputError(f"cannot serialize oracle kind {oracle.kind!r}")
