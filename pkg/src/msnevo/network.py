"""Fixed-topology neural networks driven by a flat parameter vector.

No autograd, no training-time state: a network here is just a shape plan.
All weights and biases live in one 1-D float64 vector laid out layer-major
(layer 0 weights, then layer 0 biases, then layer 1 ...), which is the
representation the optimizers evolve. ``forward`` slices that vector and
runs inference.

Supported layers: ``dense``, ``conv2d`` (square kernels, optional zero
padding), ``maxpool2d`` and ``prelu``. A dense layer following a
(channels, height, width) activation flattens it implicitly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import backend
from .vecmath import DimensionError, as_generator, xavier_normal_init

__all__ = [
    "LayerSpec", "NetworkSpec", "Network", "BuildError",
    "dense", "conv2d", "maxpool2d", "prelu",
    "build", "forward", "prelu_apply", "cross_entropy", "accuracy",
    "spec_to_json", "spec_from_json", "task1_net_spec", "mlp_spec",
    "mnist_cnn_spec",
]

PRELU_INIT_SLOPE = 0.25


class BuildError(ValueError):
    """A layer stack that cannot be assembled into a runnable network."""


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a network plan. Use the factory functions (``dense``,
    ``conv2d``, ``maxpool2d``, ``prelu``) rather than filling fields by
    hand."""

    kind: str
    in_features: Optional[int] = None
    out_features: Optional[int] = None
    in_channels: Optional[int] = None
    out_channels: Optional[int] = None
    kernel_size: Optional[int] = None
    stride: Optional[int] = None
    padding: Optional[int] = None
    window: Optional[int] = None
    num_slopes: Optional[int] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown layer fields: {sorted(unknown)}")
        return cls(**d)


def dense(in_features: int, out_features: int) -> LayerSpec:
    return LayerSpec("dense", in_features=in_features, out_features=out_features)


def conv2d(in_channels: int, out_channels: int, kernel_size: int,
           stride: int = 1, padding: int = 0) -> LayerSpec:
    return LayerSpec("conv2d", in_channels=in_channels, out_channels=out_channels,
                     kernel_size=kernel_size, stride=stride, padding=padding)


def maxpool2d(window: int, stride: int) -> LayerSpec:
    return LayerSpec("maxpool2d", window=window, stride=stride)


def prelu(num_slopes: int = 1) -> LayerSpec:
    return LayerSpec("prelu", num_slopes=num_slopes)


@dataclass(frozen=True)
class NetworkSpec:
    """Input shape plus an ordered layer list.

    ``input_shape`` is an int for flat inputs or a (channels, height,
    width) tuple for images.
    """

    input_shape: Union[int, tuple]
    layers: tuple

    def __init__(self, input_shape, layers):
        if isinstance(input_shape, list):
            input_shape = tuple(input_shape)
        object.__setattr__(self, "input_shape", input_shape)
        object.__setattr__(self, "layers", tuple(layers))

    def to_dict(self) -> dict:
        shape = self.input_shape
        return {
            "input_shape": list(shape) if isinstance(shape, tuple) else shape,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(d["input_shape"], [LayerSpec.from_dict(x) for x in d["layers"]])


def spec_to_json(spec: NetworkSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2)


def spec_from_json(text: str) -> NetworkSpec:
    return NetworkSpec.from_dict(json.loads(text))


@dataclass(frozen=True)
class _BuiltLayer:
    spec: LayerSpec
    in_shape: tuple
    out_shape: tuple
    offset: int        # start of this layer's slice in the flat vector
    weight_count: int
    bias_count: int
    fan_in: int = 0
    fan_out: int = 0

    @property
    def size(self) -> int:
        return self.weight_count + self.bias_count


class Network:
    """An inference-ready network: the validated shape plan plus the flat
    vector layout. Immutable once built."""

    def __init__(self, spec: NetworkSpec, layers: list, parameter_count: int,
                 output_shape: tuple):
        self.spec = spec
        self._layers = layers
        self.parameter_count = parameter_count
        self.output_shape = output_shape

    @property
    def input_shape(self):
        return self.spec.input_shape

    def init_params(self, rng, gain: float = 1.0) -> np.ndarray:
        """Fresh parameter vector: Xavier-normal weights, zero biases,
        prelu slopes at 0.25.

        ``gain`` rescales the weight draws (biases and slopes are not
        touched). Values above 1 widen the network's initial output
        spread, which population methods can exploit to seed distant
        regions of the output space."""
        gen = as_generator(rng)
        params = np.zeros(self.parameter_count, dtype=np.float64)
        for layer in self._layers:
            if layer.spec.kind in ("dense", "conv2d"):
                w = xavier_normal_init(layer.fan_in, layer.fan_out,
                                       layer.weight_count, gen)
                params[layer.offset:layer.offset + layer.weight_count] = gain * w
                # biases stay zero
            elif layer.spec.kind == "prelu":
                params[layer.offset:layer.offset + layer.weight_count] = PRELU_INIT_SLOPE
        return params

    def forward(self, params, x):
        return forward(self, params, x)


def _flat_size(shape: tuple) -> int:
    return int(np.prod(shape))


def build(spec: NetworkSpec) -> Network:
    """Validate a NetworkSpec and lay out its flat parameter vector.

    Raises BuildError naming the offending layer index on any shape
    mismatch (wrong feature count, channel mismatch, window larger than the
    activation, non-positive output size...).
    """
    if isinstance(spec.input_shape, int):
        if spec.input_shape < 1:
            raise BuildError("input size must be positive")
        shape: tuple = (spec.input_shape,)
    else:
        if len(spec.input_shape) != 3 or any(d < 1 for d in spec.input_shape):
            raise BuildError(
                f"image input shape must be (channels, height, width), got {spec.input_shape}")
        shape = tuple(spec.input_shape)

    built: list = []
    offset = 0
    for i, layer in enumerate(spec.layers):
        kind = layer.kind
        in_shape = shape
        if kind == "dense":
            flat = _flat_size(shape)
            if layer.in_features is None or layer.out_features is None:
                raise BuildError(f"layer {i}: dense requires in_features and out_features")
            if layer.in_features != flat:
                raise BuildError(
                    f"layer {i}: dense expects {layer.in_features} inputs but "
                    f"receives {flat} (activation shape {shape})")
            if layer.out_features < 1:
                raise BuildError(f"layer {i}: out_features must be positive")
            wc = layer.in_features * layer.out_features
            bc = layer.out_features
            fan_in, fan_out = layer.in_features, layer.out_features
            shape = (layer.out_features,)
        elif kind == "conv2d":
            if len(shape) != 3:
                raise BuildError(f"layer {i}: conv2d needs a (C, H, W) input, got {shape}")
            c, h, w = shape
            if layer.in_channels != c:
                raise BuildError(
                    f"layer {i}: conv2d expects {layer.in_channels} channels but receives {c}")
            k, s, p = layer.kernel_size, layer.stride, layer.padding or 0
            if k < 1 or s < 1 or p < 0:
                raise BuildError(f"layer {i}: invalid conv2d geometry (k={k}, s={s}, p={p})")
            ho = (h + 2 * p - k) // s + 1
            wo = (w + 2 * p - k) // s + 1
            if h + 2 * p < k or w + 2 * p < k or ho < 1 or wo < 1:
                raise BuildError(
                    f"layer {i}: conv2d kernel {k} does not fit activation "
                    f"{h}x{w} with padding {p}")
            wc = layer.out_channels * c * k * k
            bc = layer.out_channels
            fan_in, fan_out = c * k * k, layer.out_channels * k * k
            shape = (layer.out_channels, ho, wo)
        elif kind == "maxpool2d":
            if len(shape) != 3:
                raise BuildError(f"layer {i}: maxpool2d needs a (C, H, W) input, got {shape}")
            c, h, w = shape
            win, s = layer.window, layer.stride
            if win < 1 or s < 1:
                raise BuildError(f"layer {i}: invalid pooling geometry")
            if h < win or w < win:
                raise BuildError(
                    f"layer {i}: pooling window {win} larger than activation {h}x{w}")
            shape = (c, (h - win) // s + 1, (w - win) // s + 1)
            wc = bc = fan_in = fan_out = 0
        elif kind == "prelu":
            ns = layer.num_slopes or 1
            channels = shape[0]
            if ns not in (1, channels):
                raise BuildError(
                    f"layer {i}: prelu needs 1 or {channels} slopes "
                    f"(activation shape {shape}), got {ns}")
            wc, bc = ns, 0
            fan_in = fan_out = 0
            # shape unchanged
        else:
            raise BuildError(f"layer {i}: unknown layer kind {kind!r}")
        built.append(_BuiltLayer(layer, in_shape, shape, offset, wc, bc,
                                 fan_in, fan_out))
        offset += wc + bc

    return Network(spec, built, offset, shape)


def forward(net: Network, params, x) -> np.ndarray:
    """Run inference. Accepts a single input (shape == net.input_shape) or
    a batch with one leading axis; the output keeps the same convention."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (net.parameter_count,):
        raise DimensionError(
            f"expected {net.parameter_count} parameters, got shape {params.shape}")
    x = np.asarray(x, dtype=np.float64)

    in_shape = ((net.input_shape,) if isinstance(net.input_shape, int)
                else tuple(net.input_shape))
    if x.shape == in_shape:
        batched = False
        h = x[None, ...]
    elif x.ndim == len(in_shape) + 1 and x.shape[1:] == in_shape:
        batched = True
        h = x
    else:
        raise DimensionError(
            f"input shape {x.shape} does not match network input {in_shape} "
            "(optionally with one leading batch axis)")

    for layer in net._layers:
        seg = params[layer.offset:layer.offset + layer.size]
        kind = layer.spec.kind
        if kind == "dense":
            if h.ndim > 2:
                h = h.reshape(h.shape[0], -1)
            inf, outf = layer.spec.in_features, layer.spec.out_features
            w = seg[:layer.weight_count].reshape(inf, outf)
            b = seg[layer.weight_count:]
            h = h @ w + b
        elif kind == "conv2d":
            sp = layer.spec
            c = layer.in_shape[0]
            w = seg[:layer.weight_count].reshape(sp.out_channels, c,
                                                 sp.kernel_size, sp.kernel_size)
            b = seg[layer.weight_count:]
            h = backend.conv2d_forward(np.ascontiguousarray(h), w, b,
                                       sp.stride, sp.padding or 0)
        elif kind == "maxpool2d":
            h = backend.maxpool2d_forward(np.ascontiguousarray(h),
                                          layer.spec.window, layer.spec.stride)
        elif kind == "prelu":
            slopes = seg
            if slopes.shape[0] == 1:
                s = slopes[0]
            elif h.ndim == 4:
                s = slopes[None, :, None, None]
            else:
                s = slopes[None, :]
            h = np.where(h >= 0.0, h, s * h)
    return h if batched else h[0]


def prelu_apply(x: float, slope: float) -> float:
    """Scalar parametric ReLU: x for x >= 0, slope*x otherwise."""
    return x if x >= 0.0 else slope * x


def cross_entropy(logits, labels) -> float:
    """Mean cross-entropy of raw logits against integer class labels.

    Computed via the log-sum-exp shift (max subtraction) so extreme logits
    give exact limits instead of overflow: a saturated correct logit tends
    to 0 loss, a saturated wrong logit to the logit gap.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim == 1:
        logits = logits[None, :]
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise DimensionError(f"logits must be (batch, classes), got {logits.shape}")
    n, c = logits.shape
    if n == 0:
        raise ValueError("cross_entropy needs a non-empty batch")
    if labels.shape != (n,):
        raise DimensionError(f"labels shape {labels.shape} does not match batch {n}")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must lie in [0, {c})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(n), labels]
    return float(np.mean(log_norm - picked))


def accuracy(logits, labels) -> float:
    """Fraction of rows whose argmax (ties to the lowest class index)
    matches the label."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim == 1:
        logits = logits[None, :]
    labels = np.asarray(labels)
    if labels.shape != (logits.shape[0],):
        raise DimensionError(
            f"labels shape {labels.shape} does not match batch {logits.shape[0]}")
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def task1_net_spec(hidden: int = 128) -> NetworkSpec:
    """2-in 2-out coordinate-regression network with one hidden layer."""
    return NetworkSpec(2, [dense(2, hidden), prelu(1), dense(hidden, 2)])


def mlp_spec(input_size: int, hidden: int, num_classes: int) -> NetworkSpec:
    """Two-layer dense classifier for flattened images."""
    return NetworkSpec(input_size,
                       [dense(input_size, hidden), prelu(1), dense(hidden, num_classes)])


def mnist_cnn_spec() -> NetworkSpec:
    """The large 28x28 CNN: four 7x7 conv stages (32/64/128/128 channels)
    with stride-2 max-pooling after the first two, then dense 512 and a
    10-way head, PReLU activations throughout. 4,523,407 parameters."""
    return NetworkSpec((1, 28, 28), [
        conv2d(1, 32, 7, stride=1, padding=3), prelu(1),
        maxpool2d(2, 2),
        conv2d(32, 64, 7, stride=1, padding=3), prelu(1),
        maxpool2d(2, 2),
        conv2d(64, 128, 7, stride=1, padding=3), prelu(1),
        conv2d(128, 128, 7, stride=1, padding=3), prelu(1),
        dense(128 * 7 * 7, 512), prelu(1),
        dense(512, 10),
    ])
