"""Residual U-Net inference and reverse-mode gradients.

The network maps a normalized (freq, time, 2) spectrogram grid — microphone
magnitude in channel 0, far-end reference in channel 1 — to a single-channel
estimate of the near-end magnitude.  Encoders stack residual blocks separated
by frequency-only 2x1 max pooling; decoders mirror them with 2x1 stride-2
transposed convolutions and skip concatenations; a linear 1x1 projection
clamped at zero produces the output.

Weights live in a flat name→tensor mapping whose iteration order is the
serialization order.  Forward dispatches on the weight dtype: float32/float64
run the selected kernel backend directly, float16 runs the half-precision
engine (half storage, fp32 accumulation, saturating stores, and a prepared
fast path for the 3x3 convolutions).  Gradients are plain numpy and are
checked against central finite differences in the tests.
"""

from dataclasses import dataclass
from typing import Dict, NamedTuple

import numpy as np

from . import kernels
from .errors import InvalidArgumentError

CONF1 = "conf1"
CONF2 = "conf2"


@dataclass(frozen=True)
class NetTopology:
    """Structural hyperparameters; every derived shape follows from these."""
    num_encoders: int = 4
    num_decoders: int = 3
    base_filters: int = 16
    residual_config: str = CONF1
    residual_depth: int = 2
    in_channels: int = 2
    freq_bins: int = 160
    time_frames: int = 32

    def __post_init__(self):
        if self.num_encoders < 2:
            raise InvalidArgumentError("need at least 2 encoder levels")
        if self.num_decoders != self.num_encoders - 1:
            raise InvalidArgumentError(
                f"num_decoders must be num_encoders - 1, got "
                f"{self.num_decoders} vs {self.num_encoders}")
        if self.residual_config not in (CONF1, CONF2):
            raise InvalidArgumentError(
                f"residual_config must be {CONF1!r} or {CONF2!r}, got {self.residual_config!r}")
        for field in ("base_filters", "residual_depth", "in_channels", "time_frames"):
            if getattr(self, field) < 1:
                raise InvalidArgumentError(f"{field} must be positive")
        down = 1 << (self.num_encoders - 1)
        if self.freq_bins < down or self.freq_bins % down:
            raise InvalidArgumentError(
                f"freq_bins {self.freq_bins} not divisible by the {self.num_encoders - 1} "
                f"pooling stages (factor {down})")

    def level_filters(self):
        return [self.base_filters << i for i in range(self.num_encoders)]


def _layer_specs(topo):
    """(name, shape) pairs for every trainable tensor, in serialization order."""
    specs = []

    def res_block(prefix, cin, f):
        specs.append((f"{prefix}.conv0.w", (3, 3, cin, f)))
        specs.append((f"{prefix}.conv0.b", (f,)))
        for n in range(1, topo.residual_depth + 1):
            specs.append((f"{prefix}.stack{n}.w", (3, 3, f, f)))
            specs.append((f"{prefix}.stack{n}.b", (f,)))
        if topo.residual_config == CONF2:
            specs.append((f"{prefix}.shortcut.w", (3, 3, f, f)))
            specs.append((f"{prefix}.shortcut.b", (f,)))

    filters = topo.level_filters()
    cin = topo.in_channels
    for i, f in enumerate(filters):
        res_block(f"enc{i}", cin, f)
        cin = f
    for j in range(topo.num_decoders):
        cout = cin // 2
        specs.append((f"dec{j}.up.w", (2, 1, cin, cout)))
        specs.append((f"dec{j}.up.b", (cout,)))
        skip = filters[topo.num_encoders - 2 - j]
        res_block(f"dec{j}.res", cout + skip, cout)
        cin = cout
    specs.append(("final.w", (1, 1, cin, 1)))
    specs.append(("final.b", (1,)))
    return specs


def param_count(topo):
    """Exact number of scalar weights and biases for a topology."""
    return sum(int(np.prod(shape)) for _, shape in _layer_specs(topo))


class NetWeights:
    """Immutable-by-convention weight set: topology + ordered name→tensor map."""

    def __init__(self, topology, tensors):
        specs = _layer_specs(topology)
        expected = dict(specs)
        if set(tensors) != set(expected):
            missing = sorted(set(expected) - set(tensors))
            extra = sorted(set(tensors) - set(expected))
            raise InvalidArgumentError(
                f"tensor names do not match topology (missing {missing}, extra {extra})")
        dtypes = {np.asarray(t).dtype for t in tensors.values()}
        if len(dtypes) != 1 or not np.issubdtype(next(iter(dtypes)), np.floating):
            raise InvalidArgumentError(f"tensors must share one floating dtype, got {dtypes}")
        ordered = {}
        for name, shape in specs:
            arr = np.ascontiguousarray(tensors[name])
            if arr.shape != shape:
                raise InvalidArgumentError(
                    f"tensor {name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr.astype(np.float64))):
                raise InvalidArgumentError(f"tensor {name} contains non-finite values")
            ordered[name] = arr
        self.topology = topology
        self.tensors = ordered
        self._plans = {}

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype

    @property
    def precision(self):
        return "fp16" if self.dtype == np.float16 else "fp32"

    def replace(self, tensors):
        """New weight set with the same topology and different tensors."""
        return NetWeights(self.topology, tensors)

    def astype(self, dtype):
        return NetWeights(self.topology,
                          {k: v.astype(dtype) for k, v in self.tensors.items()})

    def _conv3x3_plans(self):
        """Per-backend prepared plans for the 3x3 convolutions (fp16 nets only)."""
        backend = kernels.backend_name()
        if backend not in self._plans:
            plans = {}
            for name, w in self.tensors.items():
                if name.endswith(".w") and w.shape[:2] == (3, 3):
                    plans[name] = kernels.prepare_conv3x3_f16(w, self.tensors[name[:-2] + ".b"])
            self._plans[backend] = plans
        return self._plans[backend]


def init_weights(topology, seed, dtype=np.float32, scale=1.0):
    """He-style initialization: w ~ N(0, scale²·2/fan_in), biases zero."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in _layer_specs(topology):
        if name.endswith(".b"):
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[:-1]))
            std = scale * np.sqrt(2.0 / fan_in)
            tensors[name] = (rng.standard_normal(shape) * std).astype(dtype)
    return NetWeights(topology, tensors)


class QuantizeResult(NamedTuple):
    weights: NetWeights
    overflow_count: int


def quantize_fp16(weights):
    """Round every tensor to half precision, saturating at ±65504 with a count."""
    if weights.dtype == np.float16:
        raise InvalidArgumentError("weights are already fp16")
    overflow = 0
    out = {}
    for name, arr in weights.tensors.items():
        a64 = arr.astype(np.float64)
        overflow += int(np.count_nonzero(np.abs(a64) > 65504.0))
        out[name] = np.clip(a64, -65504.0, 65504.0).astype(np.float16)
    return QuantizeResult(NetWeights(weights.topology, out), overflow)


def dequantize(weights):
    """fp32 view of an fp16-stored net (the values inference actually uses)."""
    if weights.dtype != np.float16:
        raise InvalidArgumentError("dequantize expects fp16-stored weights")
    return weights.astype(np.float32)


def _check_input(weights, x):
    topo = weights.topology
    expected = (topo.freq_bins, topo.time_frames, topo.in_channels)
    x = np.asarray(x)
    if x.shape != expected:
        raise InvalidArgumentError(f"input shape {x.shape}, expected {expected}")
    return np.ascontiguousarray(x, dtype=weights.dtype)


def forward(weights, x):
    """Run the network; returns a (freq, time, 1) estimate, non-negative."""
    x = _check_input(weights, x)
    if weights.dtype == np.float16:
        return _forward_f16(weights, x)
    return _forward_full(weights, x, cache=None)


def forward_with_cache(weights, x):
    """Forward pass that also returns the activation cache backward() consumes."""
    if weights.dtype == np.float16:
        raise InvalidArgumentError("gradients are not defined for fp16-stored weights")
    x = _check_input(weights, x)
    cache = {}
    y = _forward_full(weights, x, cache)
    return y, cache


# ---------------------------------------------------------------------------
# fp32 / fp64 path


def _res_block_forward(params, topo, prefix, x, cache):
    a = kernels.conv2d(x, params[f"{prefix}.conv0.w"], params[f"{prefix}.conv0.b"], relu=True)
    h = a
    stack_io = []
    for n in range(1, topo.residual_depth + 1):
        out = kernels.conv2d(h, params[f"{prefix}.stack{n}.w"],
                             params[f"{prefix}.stack{n}.b"], relu=True)
        stack_io.append((h, out))
        h = out
    if topo.residual_config == CONF2:
        sc = kernels.conv2d(a, params[f"{prefix}.shortcut.w"],
                            params[f"{prefix}.shortcut.b"], relu=True)
    else:
        sc = a
    out = sc + h
    if cache is not None:
        cache[prefix] = {"x": x, "a": a, "stack": stack_io, "sc": sc}
    return out


def _forward_full(weights, x, cache):
    topo = weights.topology
    params = weights.tensors
    skips = []
    h = x
    for i in range(topo.num_encoders):
        h = _res_block_forward(params, topo, f"enc{i}", h, cache)
        if i < topo.num_encoders - 1:
            skips.append(h)
            if cache is not None:
                cache[f"pool{i}.x"] = h
            h = kernels.maxpool_freq(h)
    for j in range(topo.num_decoders):
        if cache is not None:
            cache[f"dec{j}.up.x"] = h
        up = kernels.upsample_freq(h, params[f"dec{j}.up.w"], params[f"dec{j}.up.b"])
        skip = skips[topo.num_encoders - 2 - j]
        h = np.concatenate([up, skip], axis=2)
        h = _res_block_forward(params, topo, f"dec{j}.res", h, cache)
    if cache is not None:
        cache["final.x"] = h
    out = kernels.conv2d(h, params["final.w"], params["final.b"], relu=True)
    if cache is not None:
        cache["final.y"] = out
    return out


# ---------------------------------------------------------------------------
# fp16 engine


def _forward_f16(weights, x):
    topo = weights.topology
    params = weights.tensors
    plans = weights._conv3x3_plans()

    def res_block(prefix, h):
        a = kernels.conv3x3_f16(h, plans[f"{prefix}.conv0.w"], relu=True)
        h = a
        for n in range(1, topo.residual_depth + 1):
            h = kernels.conv3x3_f16(h, plans[f"{prefix}.stack{n}.w"], relu=True)
        if topo.residual_config == CONF2:
            sc = kernels.conv3x3_f16(a, plans[f"{prefix}.shortcut.w"], relu=True)
        else:
            sc = a
        return kernels.add_f16(sc, h)

    skips = []
    h = x
    for i in range(topo.num_encoders):
        h = res_block(f"enc{i}", h)
        if i < topo.num_encoders - 1:
            skips.append(h)
            h = kernels.maxpool_freq(h)
    for j in range(topo.num_decoders):
        up = kernels.upsample_freq(h, params[f"dec{j}.up.w"], params[f"dec{j}.up.b"])
        skip = skips[topo.num_encoders - 2 - j]
        h = np.concatenate([up, skip], axis=2)
        h = res_block(f"dec{j}.res", h)
    return kernels.conv2d(h, params["final.w"], params["final.b"], relu=True)


# ---------------------------------------------------------------------------
# backward (numpy formulas, backend independent)


def _win(x, kh, kw):
    pf, pt = (kh - 1) // 2, (kw - 1) // 2
    xp = np.pad(x, ((pf, pf), (pt, pt), (0, 0)))
    return np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(0, 1))


def _conv_same(x, w):
    # plain forward cross-correlation, used for input gradients
    return np.tensordot(_win(x, w.shape[0], w.shape[1]), w, axes=[(3, 4, 2), (0, 1, 2)])


def _conv_backward(x, y, w, dy, relu):
    """Gradients of conv2d(x, w, b, relu) given upstream dy; returns (dx, dw, db)."""
    if relu:
        dy = dy * (y > 0)
    dw = np.tensordot(_win(x, w.shape[0], w.shape[1]), dy, axes=[(0, 1), (0, 1)])
    dw = np.transpose(dw, (1, 2, 0, 3))
    db = dy.sum(axis=(0, 1))
    flipped = w[::-1, ::-1].transpose(0, 1, 3, 2)
    dx = _conv_same(dy, flipped)
    return dx, dw, db


def _res_block_backward(params, topo, prefix, block_cache, dout, grads):
    d_stack = dout
    for n in range(topo.residual_depth, 0, -1):
        hin, hout = block_cache["stack"][n - 1]
        d_stack, dw, db = _conv_backward(hin, hout, params[f"{prefix}.stack{n}.w"],
                                         d_stack, relu=True)
        grads[f"{prefix}.stack{n}.w"] = grads.get(f"{prefix}.stack{n}.w", 0) + dw
        grads[f"{prefix}.stack{n}.b"] = grads.get(f"{prefix}.stack{n}.b", 0) + db
    if topo.residual_config == CONF2:
        d_sc, dw, db = _conv_backward(block_cache["a"], block_cache["sc"],
                                      params[f"{prefix}.shortcut.w"], dout, relu=True)
        grads[f"{prefix}.shortcut.w"] = grads.get(f"{prefix}.shortcut.w", 0) + dw
        grads[f"{prefix}.shortcut.b"] = grads.get(f"{prefix}.shortcut.b", 0) + db
    else:
        d_sc = dout
    da = d_stack + d_sc
    dx, dw, db = _conv_backward(block_cache["x"], block_cache["a"],
                                params[f"{prefix}.conv0.w"], da, relu=True)
    grads[f"{prefix}.conv0.w"] = grads.get(f"{prefix}.conv0.w", 0) + dw
    grads[f"{prefix}.conv0.b"] = grads.get(f"{prefix}.conv0.b", 0) + db
    return dx


def backward(weights, cache, d_out):
    """Propagate d(loss)/d(output) back to every weight tensor.

    Returns a name→gradient dict covering all tensors (same shapes).  The
    input gradient is discarded — nothing upstream of the net is trained.
    """
    topo = weights.topology
    params = weights.tensors
    grads = {}

    dh, dw, db = _conv_backward(cache["final.x"], cache["final.y"],
                                params["final.w"], np.asarray(d_out), relu=True)
    grads["final.w"] = dw
    grads["final.b"] = db

    d_skips = [None] * (topo.num_encoders - 1)
    for j in range(topo.num_decoders - 1, -1, -1):
        dh = _res_block_backward(params, topo, f"dec{j}.res", cache[f"dec{j}.res"], dh, grads)
        skip_level = topo.num_encoders - 2 - j
        skip_ch = topo.level_filters()[skip_level]
        d_up, d_skip = dh[:, :, :-skip_ch], dh[:, :, -skip_ch:]
        d_skips[skip_level] = d_skip
        x_up = cache[f"dec{j}.up.x"]
        w_up = params[f"dec{j}.up.w"]
        dx = (np.tensordot(d_up[0::2], w_up[0, 0], axes=[(2,), (1,)])
              + np.tensordot(d_up[1::2], w_up[1, 0], axes=[(2,), (1,)]))
        dw_up = np.stack([
            np.tensordot(x_up, d_up[0::2], axes=[(0, 1), (0, 1)]),
            np.tensordot(x_up, d_up[1::2], axes=[(0, 1), (0, 1)]),
        ])[:, None]
        grads[f"dec{j}.up.w"] = dw_up
        grads[f"dec{j}.up.b"] = d_up.sum(axis=(0, 1))
        dh = dx
    for i in range(topo.num_encoders - 1, -1, -1):
        if i < topo.num_encoders - 1:
            x_pool = cache[f"pool{i}.x"]
            first = x_pool[0::2] >= x_pool[1::2]
            dx = np.zeros_like(x_pool)
            dx[0::2] = dh * first
            dx[1::2] = dh * ~first
            dh = dx + d_skips[i]
        dh = _res_block_backward(params, topo, f"enc{i}", cache[f"enc{i}"], dh, grads)
    return grads
