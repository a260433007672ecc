"""Latency benchmark: stride counts, report wording, backend hygiene.

Wall-clock latency itself is hardware-dependent, so these tests pin the
measurement bookkeeping (every stride timed, stages accounted) and the
report contract, not absolute times.
"""

import numpy as np

from unetaec import bench, stream
from unetaec.kernels import backend_name


def test_bench_engine_times_every_stride():
    config = stream.EngineConfig()  # passthrough
    breakdown = bench.bench_engine(config, duration_s=1.0, repetitions=2, seed=0)
    strides_per_rep = 16000 // 640
    assert len(breakdown.total_ms) == 2 * strides_per_rep
    stats = breakdown.stats()
    for stage in stream.STAGES + ("total",):
        assert np.isfinite(list(stats[stage].values())).all()
    assert stats["total"]["p95"] > 0.0


def test_bench_engine_deterministic_signal():
    # Same seed, same synthetic test signals: the processed output is not
    # returned, but the stride count and stage structure must agree.
    config = stream.EngineConfig()
    a = bench.bench_engine(config, duration_s=0.5, repetitions=1, seed=7)
    b = bench.bench_engine(config, duration_s=0.5, repetitions=1, seed=7)
    assert len(a.total_ms) == len(b.total_ms)


def test_format_bench_report_names_engine_and_budget():
    config = stream.EngineConfig(engine="pfblms", mu=1e-4)
    breakdown = bench.bench_engine(config, duration_s=1.0, repetitions=1, seed=0)
    text = bench.format_bench_report(breakdown, config)
    assert "pfblms" in text
    assert "budget" in text
    assert "PASS" in text or "FAIL" in text


def test_compare_precisions_quotes_reference_context():
    text = bench.compare_precisions(duration_s=1.0, seed=0)
    assert "fp32" in text and "fp16" in text
    # External reference figures must be labeled as context, not as a
    # measurement of this machine.
    assert "21.68" in text and "45.63" in text
    assert "not verified here" in text


def test_compare_backends_lists_and_restores():
    before = backend_name()
    text = bench.compare_backends(repetitions=2, seed=0)
    assert backend_name() == before
    assert "speedup" in text
