"""Weight-file serialization.

Little-endian binary layout:

    8 bytes   magic "UNETAEC1"
    8 int32   num_encoders, num_decoders, base_filters,
              residual_config (1 or 2), residual_depth,
              in_channels, freq_bins, time_frames
    per tensor, in the fixed topology walk order of unet._layer_specs():
        uint8   precision tag (0 = fp32, 1 = fp16)
        uint8   rank
        int32 × rank   dims
        raw little-endian scalars

Stored precisions are fp32 and fp16 only; float64 training weights are
downcast to fp32 on save.  load(save(w)) is bit-identical for fp32/fp16
weight sets.  Anything structurally wrong — bad magic, truncation, trailing
bytes, dims disagreeing with the topology — raises FormatError.
"""

import struct

import numpy as np

from . import unet
from .errors import FormatError, InvalidArgumentError

MAGIC = b"UNETAEC1"
_CONFIG_CODE = {unet.CONF1: 1, unet.CONF2: 2}
_CONFIG_NAME = {v: k for k, v in _CONFIG_CODE.items()}
_TAG_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("<f2")}


def save_weights(path, weights):
    """Write a NetWeights set to path in the format above."""
    topo = weights.topology
    if weights.dtype == np.float16:
        tag, dtype = 1, np.dtype("<f2")
    else:
        tag, dtype = 0, np.dtype("<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(
            "<8i", topo.num_encoders, topo.num_decoders, topo.base_filters,
            _CONFIG_CODE[topo.residual_config], topo.residual_depth,
            topo.in_channels, topo.freq_bins, topo.time_frames))
        for name, _ in unet._layer_specs(topo):
            arr = np.ascontiguousarray(weights.tensors[name], dtype=dtype)
            fh.write(struct.pack("<BB", tag, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}i", *arr.shape))
            fh.write(arr.tobytes())


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated weight file while reading {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk


def load_weights(path):
    """Read a weight file back into a NetWeights set."""
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data)
    if r.take(8, "magic") != MAGIC:
        raise FormatError("bad magic: not a weight file of this format")
    fields = struct.unpack("<8i", r.take(32, "topology header"))
    if fields[3] not in _CONFIG_NAME:
        raise FormatError(f"unknown residual config code {fields[3]}")
    try:
        topo = unet.NetTopology(
            num_encoders=fields[0], num_decoders=fields[1], base_filters=fields[2],
            residual_config=_CONFIG_NAME[fields[3]], residual_depth=fields[4],
            in_channels=fields[5], freq_bins=fields[6], time_frames=fields[7])
    except InvalidArgumentError as exc:
        raise FormatError(f"invalid topology header: {exc}") from exc
    tensors = {}
    tags = set()
    for name, shape in unet._layer_specs(topo):
        tag, rank = struct.unpack("<BB", r.take(2, f"{name} header"))
        if tag not in _TAG_DTYPE:
            raise FormatError(f"unknown precision tag {tag} on {name}")
        if rank != len(shape):
            raise FormatError(f"{name}: rank {rank}, topology implies {len(shape)}")
        dims = struct.unpack(f"<{rank}i", r.take(4 * rank, f"{name} dims"))
        if tuple(dims) != shape:
            raise FormatError(f"{name}: stored dims {dims} != topology shape {shape}")
        dtype = _TAG_DTYPE[tag]
        raw = r.take(int(np.prod(shape)) * dtype.itemsize, f"{name} data")
        tensors[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        tags.add(tag)
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after final tensor")
    if len(tags) > 1:
        raise FormatError("mixed precision tags in one file")
    try:
        return unet.NetWeights(topo, tensors)
    except InvalidArgumentError as exc:
        raise FormatError(f"stored tensors are invalid: {exc}") from exc
