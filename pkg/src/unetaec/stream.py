"""Streaming echo cancellation over WAV files.

The neural pipeline advances in 640-sample strides (40 ms): assemble the
sliding 2560-sample frames, transform and normalize, run the network on the
mic/far spectrogram pair, and resynthesize the newest 640 samples from the
estimated magnitude plus the microphone phase.  Output stride t depends
only on input strides up to t.

The classical adaptive filter runs at its native 1024-sample block size;
its error signal is still causal sample-by-sample (each output sample
depends only on inputs at or before it), the block merely batches emission.
Whatever tail the block grid leaves uncovered passes through unprocessed.

Every stride is wall-clock timed in four stages so the report can be laid
directly against the 40 ms budget.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import dsp, features, netio, unet
from .errors import InvalidArgumentError
from .pfblms import PfbLms
from .wavio import read_wav, write_wav

log = logging.getLogger(__name__)

ENGINES = ("passthrough", "unet", "pfblms")
PRECISIONS = ("fp32", "fp16")
STAGES = ("get_buffer", "data_preparation", "model_inference", "data_extraction")
STRIDE_BUDGET_MS = 40.0


@dataclass
class EngineConfig:
    engine: str = "passthrough"
    weights_path: Optional[str] = None
    precision: str = "fp32"
    stride: int = dsp.STRIDE
    frame: int = dsp.FRAME_SIZE
    mu: float = 1e-4

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise InvalidArgumentError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.precision not in PRECISIONS:
            raise InvalidArgumentError(
                f"precision must be one of {PRECISIONS}, got {self.precision!r}")
        if self.stride <= 0 or self.frame % self.stride != 0:
            raise InvalidArgumentError(
                f"stride must divide frame: {self.stride} vs {self.frame}")
        if self.stride != dsp.STRIDE or self.frame != dsp.FRAME_SIZE:
            raise InvalidArgumentError(
                f"pipeline is fixed at frame {dsp.FRAME_SIZE} / stride {dsp.STRIDE}")
        if self.mu < 0:
            raise InvalidArgumentError(f"mu must be non-negative, got {self.mu}")


@dataclass
class LatencyBreakdown:
    """Per-stride stage timings (milliseconds) accumulated over a run."""

    stage_ms: Dict[str, List[float]] = field(
        default_factory=lambda: {stage: [] for stage in STAGES})
    total_ms: List[float] = field(default_factory=list)

    def add(self, stages: Dict[str, float], total: float):
        for stage in STAGES:
            self.stage_ms[stage].append(stages[stage])
        self.total_ms.append(total)

    def stats(self) -> Dict[str, Dict[str, float]]:
        out = {}
        for stage in STAGES + ("total",):
            values = np.asarray(self.total_ms if stage == "total" else self.stage_ms[stage])
            if values.size == 0:
                out[stage] = {"mean": 0.0, "median": 0.0, "p95": 0.0}
            else:
                out[stage] = {"mean": float(np.mean(values)),
                              "median": float(np.median(values)),
                              "p95": float(np.percentile(values, 95))}
        return out

    def within_budget(self, budget_ms: float = STRIDE_BUDGET_MS) -> bool:
        return bool(self.total_ms) and self.stats()["total"]["p95"] < budget_ms


def format_breakdown(breakdown: LatencyBreakdown,
                     budget_ms: float = STRIDE_BUDGET_MS) -> str:
    stats = breakdown.stats()
    lines = ["stage\tmean_ms\tmedian_ms\tp95_ms"]
    for stage in STAGES + ("total",):
        s = stats[stage]
        lines.append(f"{stage}\t{s['mean']:.3f}\t{s['median']:.3f}\t{s['p95']:.3f}")
    verdict = "PASS" if breakdown.within_budget(budget_ms) else "FAIL"
    lines.append(f"budget\t{budget_ms:.1f} ms per stride: {verdict} "
                 f"(p95 total {stats['total']['p95']:.3f} ms)")
    return "\n".join(lines)


def load_engine_weights(config: EngineConfig) -> unet.NetWeights:
    if config.weights_path is None:
        raise InvalidArgumentError("unet engine requires a weights file")
    weights = netio.load_weights(config.weights_path)
    if config.precision == "fp16" and weights.precision == "fp32":
        weights = unet.quantize_fp16(weights).weights
    elif config.precision == "fp32" and weights.precision == "fp16":
        weights = unet.dequantize(weights)
    return weights


class _NeuralStream:
    """Stride loop shared by the passthrough and network engines."""

    def __init__(self, weights: Optional[unet.NetWeights]):
        self.assembler = features.FrameAssembler()
        self.weights = weights

    def stride(self, far_block, mic_block, timings):
        t0 = time.perf_counter()
        far_frame, mic_frame = self.assembler.push_stride(far_block, mic_block)
        t1 = time.perf_counter()
        mag_y, phase_y = dsp.magnitude_phase(dsp.stft(mic_frame))
        norm_y = features.normalize(mag_y)
        if self.weights is not None:
            mag_x, _ = dsp.magnitude_phase(dsp.stft(far_frame))
            norm_x = features.normalize(mag_x)
            net_in = np.stack([norm_y.grid, norm_x.grid], axis=-1)
            t2 = time.perf_counter()
            estimate = unet.forward(self.weights, net_in)[:, :, 0]
        else:
            t2 = time.perf_counter()
            estimate = norm_y.grid
        t3 = time.perf_counter()
        out = features.reconstruct(estimate, phase_y, norm_y.scale)
        t4 = time.perf_counter()
        timings["get_buffer"] = (t1 - t0) * 1e3
        timings["data_preparation"] = (t2 - t1) * 1e3
        timings["model_inference"] = (t3 - t2) * 1e3
        timings["data_extraction"] = (t4 - t3) * 1e3
        return out, (t4 - t0) * 1e3


def _run_neural(far, mic, weights, breakdown):
    stream = _NeuralStream(weights)
    num_strides = far.size // dsp.STRIDE
    out = np.zeros(num_strides * dsp.STRIDE)
    for t in range(num_strides):
        sl = slice(t * dsp.STRIDE, (t + 1) * dsp.STRIDE)
        timings = {}
        out[sl], total = stream.stride(far[sl], mic[sl], timings)
        if breakdown is not None:
            breakdown.add(timings, total)
    return out


def _run_pfblms(far, mic, config, breakdown):
    filt = PfbLms(mu=config.mu)
    block = filt.block
    out_len = (far.size // dsp.STRIDE) * dsp.STRIDE
    out = np.zeros(out_len)
    num_blocks = far.size // block
    for b in range(num_blocks):
        sl = slice(b * block, (b + 1) * block)
        t0 = time.perf_counter()
        err = filt.process_block(far[sl], mic[sl])
        filt.check_divergence(err, mic[sl])
        t1 = time.perf_counter()
        stop = min(sl.stop, out_len)
        if sl.start < stop:
            out[sl.start:stop] = err[:stop - sl.start]
        if breakdown is not None:
            stage = {s: 0.0 for s in STAGES}
            stage["model_inference"] = (t1 - t0) * 1e3
            breakdown.add(stage, (t1 - t0) * 1e3)
    covered = num_blocks * block
    if covered < out_len:
        out[covered:] = mic[covered:out_len]  # tail the block grid cannot reach
    return out


def run_arrays(far, mic, config: EngineConfig, collect_timing: bool = False,
               weights: Optional[unet.NetWeights] = None):
    """Process in-memory signals; returns (output, LatencyBreakdown or None).

    Inputs of unequal length are trimmed to the shorter with a warning; the
    output covers the whole strides of that common length.  ``weights``
    bypasses the config's weights file for an already-loaded network.
    """
    far = np.asarray(far, dtype=np.float64).ravel()
    mic = np.asarray(mic, dtype=np.float64).ravel()
    if far.size != mic.size:
        log.warning("length mismatch: far %d vs mic %d samples; trimming to shorter",
                    far.size, mic.size)
        n = min(far.size, mic.size)
        far, mic = far[:n], mic[:n]
    breakdown = LatencyBreakdown() if collect_timing else None
    if config.engine == "unet" and weights is None:
        weights = load_engine_weights(config)
    elif config.engine != "unet":
        weights = None
    if config.engine == "pfblms":
        out = _run_pfblms(far, mic, config, breakdown)
    else:
        out = _run_neural(far, mic, weights, breakdown)
    return out, breakdown


def stream_process(far_path, mic_path, out_path, config: EngineConfig,
                   collect_timing: bool = False):
    """File-to-file echo cancellation; writes ``out_path`` and returns
    (output samples, LatencyBreakdown or None)."""
    far = read_wav(far_path)
    mic = read_wav(mic_path)
    out, breakdown = run_arrays(far, mic, config, collect_timing)
    write_wav(out_path, out)
    return out, breakdown
