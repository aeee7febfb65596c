"""Lowering a ReLU network and a box property to ``A x = 0, l <= x <= u``.

Variable layout: the inputs, then the pre-activation variable ``b`` of every
hidden neuron (layer by layer), then every post-activation ``f`` in the
same order, then the outputs. For the two-layer example network this is
``x1 x2 b1 b2 b3 f1 f2 f3 y``.

Rows are written as ``(affine expression) - b`` for hidden neurons and
``y - (affine expression)`` for outputs. Biases have no column of their
own, so a neuron with a nonzero bias gets an extra ``bias`` variable
pinned to ``[1, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .exact_arith import ONE, ZERO, to_rational
from .linalg import Backend, DimensionError, Tableau, vector
from .proof_model import Query, ReluConstraint


class EncodeError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    weights: tuple[tuple[Fraction, ...], ...]  # weights[j][k]: from node k to node j
    biases: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(tuple(to_rational(w) for w in row) for row in self.weights))
        object.__setattr__(self, "biases", tuple(to_rational(b) for b in self.biases))

    @property
    def size(self) -> int:
        return len(self.biases)


@dataclass(frozen=True)
class Network:
    input_size: int
    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        prev = self.input_size
        for i, layer in enumerate(self.layers):
            if len(layer.weights) != layer.size:
                raise DimensionError(f"layer {i}: {len(layer.weights)} weight rows for {layer.size} biases")
            for row in layer.weights:
                if len(row) != prev:
                    raise DimensionError(f"layer {i}: weight row of length {len(row)}, expected {prev}")
            prev = layer.size
        if not self.layers:
            raise DimensionError("a network needs at least an output layer")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_size, *(layer.size for layer in self.layers))

    @property
    def output_size(self) -> int:
        return self.layers[-1].size

    @property
    def hidden_layers(self) -> tuple[Layer, ...]:
        return self.layers[:-1]

    @property
    def num_relus(self) -> int:
        return sum(layer.size for layer in self.hidden_layers)


Interval = tuple[Fraction, Fraction]


@dataclass(frozen=True)
class BoxProperty:
    inputs: tuple[Interval, ...]
    outputs: tuple[Interval, ...]
    # variable name -> (lower, upper) used to widen internal bounds
    overrides: Mapping[str, Interval] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple((to_rational(a), to_rational(b)) for a, b in self.inputs))
        object.__setattr__(self, "outputs", tuple((to_rational(a), to_rational(b)) for a, b in self.outputs))
        for lo, hi in self.inputs + self.outputs:
            if lo > hi:
                raise EncodeError(f"empty interval [{lo}, {hi}]")


def _affine(layer: Layer, values: Sequence[Fraction]) -> list[Fraction]:
    return [sum((w * v for w, v in zip(row, values)), ZERO) + bias
            for row, bias in zip(layer.weights, layer.biases)]


def evaluate(net: Network, x: Sequence) -> list[Fraction]:
    values = [to_rational(v) for v in x]
    if len(values) != net.input_size:
        raise DimensionError(f"input of length {len(values)}, network expects {net.input_size}")
    for layer in net.hidden_layers:
        values = [max(v, ZERO) for v in _affine(layer, values)]
    return _affine(net.layers[-1], values)


def _interval_affine(layer: Layer, box: Sequence[Interval]) -> list[Interval]:
    out = []
    for row, bias in zip(layer.weights, layer.biases):
        lo = hi = bias
        for w, (a, b) in zip(row, box):
            if w > 0:
                lo += w * a
                hi += w * b
            elif w < 0:
                lo += w * b
                hi += w * a
        out.append((lo, hi))
    return out


def interval_bounds(net: Network, inputs: Sequence[Interval]) -> tuple[list[list[Interval]], list[Interval]]:
    """Pre-activation intervals per hidden layer, and output intervals."""
    box = list(inputs)
    pre = []
    for layer in net.hidden_layers:
        z = _interval_affine(layer, box)
        pre.append(z)
        box = [(max(a, ZERO), max(b, ZERO)) for a, b in z]
    return pre, _interval_affine(net.layers[-1], box)


def variable_names(net: Network) -> list[str]:
    k = net.num_relus
    outs = ["y"] if net.output_size == 1 else [f"y{i + 1}" for i in range(net.output_size)]
    return ([f"x{i + 1}" for i in range(net.input_size)]
            + [f"b{j + 1}" for j in range(k)]
            + [f"f{j + 1}" for j in range(k)]
            + outs)


def encode(net: Network, prop: BoxProperty, backend: Backend = Backend.DENSE) -> Query:
    if len(prop.inputs) != net.input_size:
        raise DimensionError(f"property has {len(prop.inputs)} input bounds, network has {net.input_size} inputs")
    if len(prop.outputs) != net.output_size:
        raise DimensionError(f"property has {len(prop.outputs)} output bounds, network has {net.output_size} outputs")

    names = variable_names(net)
    k = net.num_relus
    n_in = net.input_size
    b_col = lambda j: n_in + j
    f_col = lambda j: n_in + k + j
    y_col = lambda i: n_in + 2 * k + i
    needs_bias = any(any(layer.biases) for layer in net.layers)
    n = n_in + 2 * k + net.output_size + (1 if needs_bias else 0)
    bias_col = n - 1
    if needs_bias:
        names.append("bias")

    pre, out_iv = interval_bounds(net, prop.inputs)
    lower: list[Fraction] = [ZERO] * n
    upper: list[Fraction] = [ZERO] * n
    for i, (lo, hi) in enumerate(prop.inputs):
        lower[i], upper[i] = lo, hi
    j = 0
    for layer_iv in pre:
        for lo, hi in layer_iv:
            lower[b_col(j)], upper[b_col(j)] = lo, hi
            lower[f_col(j)], upper[f_col(j)] = ZERO, max(hi, ZERO)
            j += 1
    for i, (lo, hi) in enumerate(prop.outputs):
        lower[y_col(i)], upper[y_col(i)] = lo, hi
    if needs_bias:
        lower[bias_col] = upper[bias_col] = ONE

    index = {name: i for i, name in enumerate(names)}
    for name, (lo, hi) in prop.overrides.items():
        if name not in index:
            raise EncodeError(f"override for unknown variable {name!r}")
        i = index[name]
        if i < n_in or i >= y_col(0):
            raise EncodeError(f"override on {name!r}: only internal b/f variables can be overridden")
        lo, hi = to_rational(lo), to_rational(hi)
        if lo > lower[i] or hi < upper[i]:
            raise EncodeError(f"override on {name!r} would tighten [{lower[i]}, {upper[i]}] to [{lo}, {hi}]")
        lower[i], upper[i] = lo, hi

    rows = []
    constraints = []
    prev_cols = list(range(n_in))
    j = 0
    for layer in net.hidden_layers:
        cols = []
        for wrow, bias in zip(layer.weights, layer.biases):
            row = [ZERO] * n
            for w, c in zip(wrow, prev_cols):
                row[c] += w
            if bias:
                row[bias_col] += bias
            row[b_col(j)] -= ONE
            rows.append(row)
            constraints.append(ReluConstraint(j, b_col(j), f_col(j)))
            cols.append(f_col(j))
            j += 1
        prev_cols = cols
    out = net.layers[-1]
    for i, (wrow, bias) in enumerate(zip(out.weights, out.biases)):
        row = [ZERO] * n
        for w, c in zip(wrow, prev_cols):
            row[c] -= w
        if bias:
            row[bias_col] -= bias
        row[y_col(i)] += ONE
        rows.append(row)

    return Query(
        Tableau(n, tuple(vector(r, backend) for r in rows)),
        vector(upper, backend),
        vector(lower, backend),
        tuple(constraints),
        tuple(names),
    )


def assignment(net: Network, x: Sequence) -> list[Fraction]:
    """Full variable assignment (in encode's layout) induced by input ``x``."""
    x = [to_rational(v) for v in x]
    if len(x) != net.input_size:
        raise DimensionError(f"input of length {len(x)}, network expects {net.input_size}")
    bs, fs = [], []
    values = x
    for layer in net.hidden_layers:
        z = _affine(layer, values)
        values = [max(v, ZERO) for v in z]
        bs.extend(z)
        fs.extend(values)
    y = _affine(net.layers[-1], values)
    full = x + bs + fs + y
    if any(any(layer.biases) for layer in net.layers):
        full.append(ONE)
    return full


def check_sat_witness(net: Network, prop: BoxProperty, x: Sequence) -> bool:
    x = [to_rational(v) for v in x]
    if len(x) != net.input_size:
        raise DimensionError(f"witness of length {len(x)}, network expects {net.input_size}")
    if not all(lo <= v <= hi for v, (lo, hi) in zip(x, prop.inputs)):
        return False
    y = evaluate(net, x)
    return all(lo <= v <= hi for v, (lo, hi) in zip(y, prop.outputs))
