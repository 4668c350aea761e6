"""Exact affine form of the network on one activation pattern.

Holding the firing pattern fixed, every ReLU acts as multiplication by a 0/1
diagonal, so the whole network collapses to a single affine map. Zeroing the
rows of inactive units is equivalent to deleting those units and their arcs
from the computation graph. The map is built by a forward sweep over the
masked layers, which is an O(depth) evaluation of the layer-product formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ShapeError
from .network import ActivationPattern, Layer, Network, forward_batch, forward_trace

__all__ = [
    "AffineMap",
    "masked_layers",
    "effective_affine",
    "AffineCache",
    "VerifyReport",
    "verify_affine",
    "JacobianReport",
    "jacobian_check",
    "affine_map_to_json",
]


@dataclass(frozen=True, eq=False)
class AffineMap:
    """The pair (omega, bias): logit(u) = omega @ u + bias on one pattern's region.

    For a scalar-output network, ``omega[0]`` is the effective weight vector
    whose entries are read as per-cluster feature importances.
    """

    omega: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        omega = np.array(self.omega, dtype=np.float64)
        bias = np.array(self.bias, dtype=np.float64)
        if omega.ndim != 2 or bias.ndim != 1 or bias.shape[0] != omega.shape[0]:
            raise ShapeError(
                f"affine map shapes omega={omega.shape}, bias={bias.shape} are inconsistent"
            )
        omega.setflags(write=False)
        bias.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "bias", bias)

    def apply(self, u) -> np.ndarray:
        """Evaluate the map on one vector or on rows of a matrix."""
        u = np.asarray(u, dtype=np.float64)
        if u.ndim == 1:
            return self.omega @ u + self.bias
        return u @ self.omega.T + self.bias


def _check_pattern(net: Network, pattern: ActivationPattern) -> None:
    if pattern.widths != net.hidden_widths:
        raise ShapeError(
            f"pattern widths {pattern.widths} do not match hidden widths {net.hidden_widths}"
        )


def masked_layers(net: Network, pattern: ActivationPattern) -> list[Layer]:
    """Layers with inactive-unit rows zeroed; the final layer passes unchanged."""
    _check_pattern(net, pattern)
    out: list[Layer] = []
    for layer, row in zip(net.layers[:-1], pattern.bits):
        mask = np.array(row, dtype=np.float64)
        out.append(Layer(layer.weight * mask[:, None], layer.bias * mask))
    out.append(net.layers[-1])
    return out


def effective_affine(net: Network, pattern: ActivationPattern) -> AffineMap:
    """Collapse the masked layers into a single affine map.

    Sweeps the layers input-to-output, composing one affine function at a
    time. On a depth-1 network this returns the layer itself for any (empty)
    pattern.
    """
    layers = masked_layers(net, pattern)
    omega = layers[0].weight
    bias = layers[0].bias
    for layer in layers[1:]:
        omega = layer.weight @ omega
        bias = layer.weight @ bias + layer.bias
    return AffineMap(omega, bias)


class AffineCache:
    """Memo of effective affine maps for one network, keyed by pattern bitstring.

    Lookups may race: a key can be computed twice, but each stored value is
    complete, so concurrent readers never observe a torn map.
    """

    def __init__(self, net: Network):
        self._net = net
        self._maps: dict[str, AffineMap] = {}

    def get(self, pattern: ActivationPattern) -> AffineMap:
        key = pattern.bitstring
        found = self._maps.get(key)
        if found is None:
            found = effective_affine(self._net, pattern)
            self._maps[key] = found
        return found

    def __len__(self) -> int:
        return len(self._maps)


def _split_rows(bits: list[np.ndarray], n: int) -> np.ndarray:
    """Stack per-layer activity matrices into one (n, total_bits) bool matrix."""
    if not bits:
        return np.zeros((n, 0), dtype=bool)
    return np.hstack(bits)


@dataclass(frozen=True)
class VerifyReport:
    """Worst-case gap between the per-pattern affine maps and the real forward pass."""

    max_abs_err: float
    worst_index: int
    passed: bool
    tol: float
    n_inputs: int
    n_patterns: int

    def to_dict(self) -> dict:
        return {
            "max_abs_err": self.max_abs_err,
            "worst_index": self.worst_index,
            "pass": self.passed,
            "tol": self.tol,
            "n_inputs": self.n_inputs,
            "n_patterns": self.n_patterns,
        }


def verify_affine(net: Network, inputs, tol: float = 1e-6) -> VerifyReport:
    """Check |affine(u) - logit(u)| over a batch of inputs.

    Inputs are grouped by activation pattern so each affine map is built once
    per distinct pattern; the result does not depend on input order.
    """
    if tol <= 0:
        raise InputError(f"tol must be positive, got {tol}")
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise InputError("verify_affine needs at least one input")
    logits, bits = forward_batch(net, X)
    bitmat = _split_rows(bits, X.shape[0])
    codes = np.packbits(bitmat, axis=1)
    _, inverse = np.unique(codes, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)

    widths = net.hidden_widths
    max_err = 0.0
    worst = 0
    n_patterns = 0
    for group in range(inverse.max() + 1):
        idx = np.flatnonzero(inverse == group)
        pattern = ActivationPattern.from_flat(bitmat[idx[0]], widths)
        amap = effective_affine(net, pattern)
        err = np.abs(amap.apply(X[idx]) - logits[idx]).max(axis=1)
        k = int(np.argmax(err))
        if err[k] > max_err or n_patterns == 0:
            max_err = float(err[k])
            worst = int(idx[k])
        n_patterns += 1
    return VerifyReport(
        max_abs_err=max_err,
        worst_index=worst,
        passed=max_err <= tol,
        tol=tol,
        n_inputs=X.shape[0],
        n_patterns=n_patterns,
    )


@dataclass(frozen=True)
class JacobianReport:
    """Finite-difference probe of the effective weights at one input."""

    max_row_err: float | None
    skipped: bool
    reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "max_row_err": self.max_row_err,
            "skipped": self.skipped,
            "reason": self.reason,
        }


def jacobian_check(net: Network, u, h: float = 1e-4) -> JacobianReport:
    """Compare central finite differences of the logit against the affine weights.

    The check only makes sense strictly inside a linear region: if any hidden
    preactivation is within 10*h of zero the input is treated as boundary and
    the check is skipped rather than failed.
    """
    if h <= 0:
        raise InputError(f"step h must be positive, got {h}")
    trace = forward_trace(net, u)
    for z in trace.preactivations[:-1]:
        if np.any(np.abs(z) < 10.0 * h):
            return JacobianReport(max_row_err=None, skipped=True, reason="boundary")
    amap = effective_affine(net, trace.pattern)
    u = np.asarray(u, dtype=np.float64)
    d = net.input_dim
    steps = np.vstack([np.eye(d) * h, -np.eye(d) * h])
    logits, _ = forward_batch(net, u[None, :] + steps)
    fd = (logits[:d] - logits[d:]) / (2.0 * h)  # (d, q)
    err = float(np.abs(fd.T - amap.omega).max())
    return JacobianReport(max_row_err=err, skipped=False)


def affine_map_to_json(pattern: ActivationPattern, amap: AffineMap) -> dict:
    """Export one map as {"pattern": "0110...", "omega": [[...]], "bias": [...]}."""
    return {
        "pattern": pattern.bitstring,
        "omega": amap.omega.tolist(),
        "bias": amap.bias.tolist(),
    }
