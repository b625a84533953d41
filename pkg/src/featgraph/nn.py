"""Minimal neural substrate: dense value networks, a relational graph
convolution encoder, and plain SGD.

Everything is float64 numpy with hand-written backward passes.  Forward
passes return a cache object that the matching backward consumes; the
backward returns gradients shaped exactly like the parameters, which is
what the finite-difference tests lean on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArchitectureMismatch, DimMismatch, ShapeMismatch, UnknownRelation


def _uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class DenseNet:
    """Fully connected net: ReLU on hidden layers, linear output.

    layer_dims lists the widths including input and output, so [8, 100, 1]
    is one hidden layer.  Weights and biases start uniform in
    [-1/sqrt(fan_in), +1/sqrt(fan_in)] from the given seed.
    """

    def __init__(self, layer_dims: list[int], seed: int = 0):
        if len(layer_dims) < 2:
            raise ArchitectureMismatch("need at least input and output dims")
        rng = np.random.default_rng(seed)
        self.layer_dims = list(layer_dims)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for din, dout in zip(layer_dims[:-1], layer_dims[1:]):
            self.weights.append(_uniform_init(rng, din, (din, dout)))
            self.biases.append(_uniform_init(rng, din, (dout,)))

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def named_parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"w{i}"] = w
            out[f"b{i}"] = b
        return out


def dense_forward(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Single-vector forward pass.  Returns (output, cache)."""
    h = np.asarray(x, dtype=np.float64)
    if h.shape != (net.input_dim,):
        raise DimMismatch(net.input_dim, h.shape[0] if h.ndim == 1 else -1)
    cache = []
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        cache.append((h, z))
        h = z if i == last else np.maximum(z, 0.0)
    return h, cache


def dense_backward(
    net: DenseNet, cache: list, upstream: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Gradients for one forward pass.

    upstream is dLoss/dOutput.  Returns (parameter gradients in
    parameters() order, dLoss/dInput).
    """
    grads: list[np.ndarray] = [None] * (2 * len(net.weights))
    delta = np.asarray(upstream, dtype=np.float64)
    last = len(net.weights) - 1
    for i in range(last, -1, -1):
        h, z = cache[i]
        if i != last:
            delta = delta * (z > 0.0)
        grads[2 * i] = np.outer(h, delta)
        grads[2 * i + 1] = delta.copy()
        delta = net.weights[i] @ delta
    return grads, delta


class RGCNEncoder:
    """Two-layer relational graph convolution over typed neighbors.

    Each layer keeps one weight matrix per relation plus one for the
    node's own state.  A node's update averages each relation's incoming
    messages (divide by that relation's neighbor count), adds the
    self-transform, and applies ReLU.
    """

    def __init__(self, relations: int, dims: tuple[int, int, int] = (7, 32, 64), seed: int = 0):
        # relations counts the edge types only; the self-loop weight is
        # stored as the extra last slice of each layer's tensor.
        self.relations = relations
        self.dims = tuple(dims)
        rng = np.random.default_rng(seed)
        self.layers: list[np.ndarray] = []
        for din, dout in zip(dims[:-1], dims[1:]):
            self.layers.append(_uniform_init(rng, din, (relations + 1, din, dout)))

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    def parameters(self) -> list[np.ndarray]:
        return list(self.layers)

    def named_parameters(self) -> dict[str, np.ndarray]:
        return {f"layer{i}": w for i, w in enumerate(self.layers)}


def _relation_index(neighbors, relations: int, n: int):
    """Group neighbor entries by relation into flat (dst, src) arrays."""
    per_rel: dict[int, tuple[list[int], list[int]]] = {}
    counts = np.zeros((n, relations), dtype=np.float64)
    for i, entries in enumerate(neighbors):
        for rel, j in entries:
            if not 0 <= rel < relations:
                raise UnknownRelation(rel, relations)
            if not 0 <= j < n:
                raise ShapeMismatch(f"neighbor index {j} out of range for {n} nodes")
            dst, src = per_rel.setdefault(rel, ([], []))
            dst.append(i)
            src.append(j)
            counts[i, rel] += 1.0
    packed = {
        rel: (np.asarray(d, dtype=np.int64), np.asarray(s, dtype=np.int64))
        for rel, (d, s) in per_rel.items()
    }
    return packed, counts


def rgcn_forward(
    enc: RGCNEncoder, features: np.ndarray, neighbors: list[list[tuple[int, int]]]
) -> tuple[np.ndarray, dict]:
    """Encode all nodes at once.  Returns ((n, out_dim) matrix, cache)."""
    h = np.asarray(features, dtype=np.float64)
    n = h.shape[0]
    if h.ndim != 2 or h.shape[1] != enc.dims[0]:
        raise DimMismatch(enc.dims[0], h.shape[1] if h.ndim == 2 else -1)
    if len(neighbors) != n:
        raise ShapeMismatch(f"{len(neighbors)} neighbor lists for {n} nodes")
    packed, counts = _relation_index(neighbors, enc.relations, n)
    cache = {"inputs": [], "preacts": [], "packed": packed, "counts": counts}
    for w in enc.layers:
        z = h @ w[-1]  # self transform
        for rel, (dst, src) in packed.items():
            msg = h[src] @ w[rel]
            z_rel = np.zeros_like(z)
            np.add.at(z_rel, dst, msg)
            z += z_rel / np.maximum(counts[:, rel], 1.0)[:, None]
        cache["inputs"].append(h)
        cache["preacts"].append(z)
        h = np.maximum(z, 0.0)
    return h, cache


def rgcn_backward(enc: RGCNEncoder, cache: dict, upstream: np.ndarray) -> list[np.ndarray]:
    """Weight gradients for one encode.  upstream is dLoss/dOutput (n, out)."""
    packed = cache["packed"]
    counts = cache["counts"]
    grads = [np.zeros_like(w) for w in enc.layers]
    d_h = np.asarray(upstream, dtype=np.float64)
    for li in range(len(enc.layers) - 1, -1, -1):
        w = enc.layers[li]
        h_in = cache["inputs"][li]
        z = cache["preacts"][li]
        d_z = d_h * (z > 0.0)
        grads[li][-1] = h_in.T @ d_z
        d_h = d_z @ w[-1].T
        for rel, (dst, src) in packed.items():
            scale = 1.0 / np.maximum(counts[dst, rel], 1.0)
            d_msg = d_z[dst] * scale[:, None]
            grads[li][rel] = h_in[src].T @ d_msg
            back = d_msg @ w[rel].T
            np.add.at(d_h, src, back)
    return grads


@dataclass
class SGD:
    """Plain stochastic gradient descent, no momentum."""

    lr: float = 0.01

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise ShapeMismatch(f"{len(params)} params vs {len(grads)} grads")
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ShapeMismatch(f"param {p.shape} vs grad {g.shape}")
            p -= self.lr * g


def copy_parameters(src, dst) -> None:
    """Copy src's parameters into dst in place (target-network sync)."""
    sp, dp = src.parameters(), dst.parameters()
    if len(sp) != len(dp):
        raise ArchitectureMismatch("parameter lists differ in length")
    for s, d in zip(sp, dp):
        if s.shape != d.shape:
            raise ArchitectureMismatch(f"parameter shapes differ: {s.shape} vs {d.shape}")
        d[...] = s


def parameter_count(net) -> int:
    return sum(p.size for p in net.parameters())
