"""Wall-clock benchmarking against the 40 ms stride budget.

Drives the streaming engines over synthetic audio and aggregates per-stage
timings.  Also compares half-precision against single-precision inference
on the full network, and the compiled kernel backend against the pure
NumPy fallback.
"""

from __future__ import annotations

import time

import numpy as np

from . import datagen, unet
from .kernels import available_backends, backend_name, set_backend
from .stream import (EngineConfig, LatencyBreakdown, STRIDE_BUDGET_MS,
                     format_breakdown, run_arrays)

# Inference-time figures reported for the reference implementation of this
# architecture (measured on an i5-8250U laptop, not reproduced here).
REFERENCE_FP32_MS = 45.63
REFERENCE_FP16_MS = 21.68


def _merge(into: LatencyBreakdown, other: LatencyBreakdown) -> LatencyBreakdown:
    for stage, values in other.stage_ms.items():
        into.stage_ms[stage].extend(values)
    into.total_ms.extend(other.total_ms)
    return into


def _test_signals(duration_s: float, seed: int):
    num = int(duration_s * datagen.SAMPLE_RATE)
    far = datagen.speech_shaped_noise(num, seed=seed)
    rir = datagen.gen_rir(32.0, 6.0, seed=seed + 1)
    mic = np.convolve(far, rir)[:num] + datagen.speech_shaped_noise(num, seed=seed + 2)
    return far, mic


def bench_engine(config: EngineConfig, duration_s: float = 4.0,
                 repetitions: int = 3, seed: int = 0,
                 weights: unet.NetWeights = None) -> LatencyBreakdown:
    """Run the engine ``repetitions`` times over synthetic audio; merge timings."""
    far, mic = _test_signals(duration_s, seed)
    merged = LatencyBreakdown()
    for _ in range(repetitions):
        _, breakdown = run_arrays(far, mic, config, collect_timing=True,
                                  weights=weights)
        _merge(merged, breakdown)
    return merged


def _full_weights(seed: int = 0) -> unet.NetWeights:
    return unet.init_weights(unet.NetTopology(), seed=seed)


def compare_precisions(duration_s: float = 2.0, seed: int = 0) -> str:
    """fp32-vs-fp16 stride timings for the full topology, with the external
    reference figures quoted (not verified on this machine)."""
    weights32 = _full_weights(seed)
    weights16 = unet.quantize_fp16(weights32).weights
    rows = {}
    for label, w in (("fp32", weights32), ("fp16", weights16)):
        config = EngineConfig(engine="unet", precision=label)
        breakdown = bench_engine(config, duration_s, repetitions=1,
                                 seed=seed, weights=w)
        rows[label] = breakdown.stats()
    lines = ["precision\tmean_infer_ms\tp95_total_ms\tbudget"]
    for label, stats in rows.items():
        verdict = "PASS" if stats["total"]["p95"] < STRIDE_BUDGET_MS else "FAIL"
        lines.append(f"{label}\t{stats['model_inference']['mean']:.2f}"
                     f"\t{stats['total']['p95']:.2f}\t{verdict}")
    ratio = rows["fp16"]["model_inference"]["mean"] / rows["fp32"]["model_inference"]["mean"]
    lines.append(f"measured fp16/fp32 inference ratio: {ratio:.3f} "
                 f"({(1 - ratio) * 100:.1f}% reduction)")
    lines.append(f"reference figures: {REFERENCE_FP16_MS} ms fp16 vs "
                 f"{REFERENCE_FP32_MS} ms fp32 "
                 f"({(1 - REFERENCE_FP16_MS / REFERENCE_FP32_MS) * 100:.1f}% reduction, "
                 "i5-8250U) — quoted for context, not verified here")
    return "\n".join(lines)


def compare_backends(repetitions: int = 5, seed: int = 0) -> str:
    """Time the full-topology fp16 forward pass on every kernel backend."""
    weights16 = unet.quantize_fp16(_full_weights(seed)).weights
    x = np.random.default_rng(seed).random(
        (unet.NetTopology().freq_bins, unet.NetTopology().time_frames, 2))
    saved = backend_name()
    results = {}
    try:
        for name in available_backends():
            set_backend(name)
            unet.forward(weights16, x)  # warm: build plans, touch caches
            t0 = time.perf_counter()
            for _ in range(repetitions):
                unet.forward(weights16, x)
            results[name] = (time.perf_counter() - t0) * 1e3 / repetitions
    finally:
        set_backend(saved)
    lines = ["backend\tforward_ms"]
    for name, ms in results.items():
        lines.append(f"{name}\t{ms:.2f}")
    if len(results) == 2 and "compiled" in results and "fallback" in results:
        lines.append(f"compiled speedup over fallback: "
                     f"{results['fallback'] / results['compiled']:.2f}x")
    return "\n".join(lines)


def format_bench_report(breakdown: LatencyBreakdown, config: EngineConfig) -> str:
    header = (f"engine={config.engine} precision={config.precision} "
              f"strides={len(breakdown.total_ms)}")
    return header + "\n" + format_breakdown(breakdown)
