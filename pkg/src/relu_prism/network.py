"""Fully-connected feedforward ReLU network with a sigmoid output head.

A network is an ordered stack of affine layers. Every layer except the last
is followed by a ReLU; the last layer is plain affine and a sigmoid is
applied only when a probability or class prediction is requested. A forward
pass records which hidden units fired (preactivation strictly greater than
zero), and that firing record is the activation pattern the rest of the
package is built on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, SchemaError, ShapeError

__all__ = [
    "Layer",
    "Network",
    "ActivationPattern",
    "ForwardTrace",
    "sigmoid",
    "forward_trace",
    "forward_batch",
    "predict",
    "predict_batch",
    "network_to_json",
    "network_from_json",
    "save_network",
    "load_network",
]


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def sigmoid(z: np.ndarray | float) -> np.ndarray:
    """Numerically stable logistic function, safe for large |z|."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class Layer:
    """One affine layer: weight of shape (d_out, d_in) and bias of shape (d_out,)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.array(self.weight, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.ndim != 2:
            raise ShapeError(f"layer weight must be 2-D, got ndim={w.ndim}")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise ShapeError(
                f"layer bias shape {b.shape} does not match weight rows {w.shape[0]}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise InputError("layer parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def d_out(self) -> int:
        return self.weight.shape[0]

    @property
    def d_in(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True, eq=False)
class Network:
    """An immutable stack of affine layers, ReLU between all but the last.

    ``depth`` counts affine layers; the first ``depth - 1`` are the hidden
    ReLU layers and the last produces the logit. The type admits any output
    width, although prediction and clustering require a scalar output.
    """

    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(
            layer if isinstance(layer, Layer) else Layer(*layer) for layer in self.layers
        )
        if not layers:
            raise ShapeError("a network needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].d_in != layers[i - 1].d_out:
                raise ShapeError(
                    f"layer {i + 1} expects {layers[i].d_in} inputs but layer {i} "
                    f"produces {layers[i - 1].d_out}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].d_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].d_out

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(layer.d_out for layer in self.layers[:-1])


@dataclass(frozen=True)
class ActivationPattern:
    """Per-hidden-layer firing bits; equality of patterns is the clustering relation.

    A unit counts as active only when its preactivation is strictly positive,
    so an input sitting exactly on a ReLU boundary is classified as inactive.
    """

    bits: tuple[tuple[bool, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "bits", tuple(tuple(bool(b) for b in row) for row in self.bits)
        )

    @classmethod
    def from_flat(cls, flat: Iterable[bool], widths: Sequence[int]) -> "ActivationPattern":
        flat = [bool(b) for b in flat]
        if len(flat) != sum(widths):
            raise ShapeError(
                f"{len(flat)} bits cannot fill hidden widths {tuple(widths)}"
            )
        rows, at = [], 0
        for w in widths:
            rows.append(tuple(flat[at : at + w]))
            at += w
        return cls(tuple(rows))

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(len(row) for row in self.bits)

    @property
    def total_bits(self) -> int:
        return sum(len(row) for row in self.bits)

    @property
    def bitstring(self) -> str:
        return "".join("1" if b else "0" for row in self.bits for b in row)

    def matches(self, net: Network) -> bool:
        return self.widths == net.hidden_widths


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """Everything recorded by one forward pass.

    ``preactivations`` holds one vector per layer (before the nonlinearity);
    ``logit`` is the raw output of the final affine layer and ``probability``
    its sigmoid. ``pattern`` collects the strict-positivity bits of the
    hidden preactivations.
    """

    preactivations: tuple[np.ndarray, ...]
    logit: np.ndarray
    probability: np.ndarray
    pattern: ActivationPattern


def _check_input_vector(net: Network, u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (net.input_dim,):
        raise ShapeError(f"input shape {u.shape} does not match input_dim={net.input_dim}")
    if not np.all(np.isfinite(u)):
        raise InputError("input vector must be finite")
    return u


def forward_trace(net: Network, u) -> ForwardTrace:
    """Run one input through the network, recording preactivations and pattern."""
    x = _check_input_vector(net, u)
    pres: list[np.ndarray] = []
    for layer in net.layers[:-1]:
        z = layer.weight @ x + layer.bias
        pres.append(_frozen_array(z))
        x = np.maximum(z, 0.0)
    last = net.layers[-1]
    logit = _frozen_array(last.weight @ x + last.bias)
    pres.append(logit)
    pattern = ActivationPattern(tuple(tuple(z > 0.0) for z in pres[:-1]))
    return ForwardTrace(
        preactivations=tuple(pres),
        logit=logit,
        probability=_frozen_array(sigmoid(logit)),
        pattern=pattern,
    )


def forward_batch(net: Network, inputs) -> tuple[np.ndarray, list[np.ndarray]]:
    """Vectorized forward pass over a matrix of inputs.

    Returns the logits with shape (n, output_dim) and, per hidden layer, the
    boolean activity matrix of shape (n, width) under the strict-positivity
    rule. Row i reproduces ``forward_trace`` on row i exactly: the per-row
    and batched paths use the same dot products in the same order.
    """
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ShapeError(
            f"input matrix shape {X.shape} does not match input_dim={net.input_dim}"
        )
    if not np.all(np.isfinite(X)):
        raise InputError("input matrix must be finite")
    bits: list[np.ndarray] = []
    a = X
    for layer in net.layers[:-1]:
        z = a @ layer.weight.T + layer.bias
        bits.append(z > 0.0)
        a = np.maximum(z, 0.0)
    last = net.layers[-1]
    logits = a @ last.weight.T + last.bias
    return logits, bits


def predict(net: Network, u) -> int:
    """Class label for a scalar-output network: 1 iff the logit is strictly positive.

    A logit of exactly 0 (probability 0.5) maps to class 0.
    """
    if net.output_dim != 1:
        raise ShapeError(f"predict requires output_dim=1, got {net.output_dim}")
    return int(forward_trace(net, u).logit[0] > 0.0)


def predict_batch(net: Network, inputs) -> np.ndarray:
    """Vectorized ``predict`` over rows of an input matrix."""
    if net.output_dim != 1:
        raise ShapeError(f"predict requires output_dim=1, got {net.output_dim}")
    logits, _ = forward_batch(net, inputs)
    return (logits[:, 0] > 0.0).astype(np.int64)


def network_to_json(net: Network) -> dict:
    """Serializable document: {"layers": [{"w": [[...]], "b": [...]}, ...]}."""
    return {
        "layers": [
            {"w": layer.weight.tolist(), "b": layer.bias.tolist()} for layer in net.layers
        ]
    }


def network_from_json(doc: dict) -> Network:
    """Rebuild a network from its JSON document, revalidating every invariant."""
    if not isinstance(doc, dict) or "layers" not in doc:
        raise SchemaError('network document must be an object with a "layers" list')
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list) or not raw_layers:
        raise SchemaError('"layers" must be a non-empty list')
    layers = []
    for i, entry in enumerate(raw_layers):
        if not isinstance(entry, dict) or "w" not in entry or "b" not in entry:
            raise SchemaError(f'layer {i + 1} must be an object with "w" and "b"')
        try:
            w = np.array(entry["w"], dtype=np.float64)
            b = np.array(entry["b"], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"layer {i + 1} is not numeric: {exc}") from exc
        try:
            layers.append(Layer(w, b))
        except InputError as exc:
            raise SchemaError(f"layer {i + 1}: {exc}") from exc
    try:
        return Network(tuple(layers))
    except InputError as exc:
        raise SchemaError(str(exc)) from exc


def save_network(net: Network, path) -> None:
    Path(path).write_text(json.dumps(network_to_json(net), indent=2) + "\n")


def load_network(path) -> Network:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid network JSON in {path}: {exc}") from exc
    return network_from_json(doc)
