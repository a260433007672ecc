"""Activity masks, ERLE, spectral distortion, and corpus-level aggregation."""

import numpy as np
import pytest

from unetaec import datagen, metrics, wavio
from unetaec.errors import InvalidArgumentError
from unetaec.pfblms import PfbLms

FS = 16000
FRAME = 640


# -------------------------------------------------------- activity_mask

def test_silence_is_fully_inactive():
    mask = metrics.activity_mask(np.zeros(10 * FRAME))
    assert mask.frames.shape == (10,)
    assert not mask.frames.any()
    assert mask.inactive().all()


def test_full_scale_sine_is_fully_active():
    t = np.arange(8 * FRAME)
    mask = metrics.activity_mask(np.sin(2 * np.pi * 440 * t / FS))
    assert mask.frames.all()


def test_burst_activates_exactly_its_frames():
    s = np.zeros(8 * FRAME)
    burst = datagen.speech_shaped_noise(3 * FRAME, seed=4, rms=0.1)
    s[3 * FRAME:6 * FRAME] = burst
    mask = metrics.activity_mask(s)
    assert np.array_equal(np.flatnonzero(mask.frames), [3, 4, 5])


def test_threshold_boundary():
    # -40 dBFS mean square is 1e-4; only levels above it activate.
    quiet = np.full(FRAME, 10 ** (-41 / 20.0))
    loud = np.full(FRAME, 10 ** (-39 / 20.0))
    sig = np.concatenate([quiet, loud])
    assert list(metrics.activity_mask(sig).frames) == [False, True]


def test_partial_trailing_frame_is_dropped():
    mask = metrics.activity_mask(np.ones(FRAME + 100))
    assert mask.frames.shape == (1,)


def test_mask_validation():
    with pytest.raises(InvalidArgumentError):
        metrics.activity_mask(np.zeros((4, 4)))


# ------------------------------------------------------------------ erle

def _random_signal(seed, frames=20):
    return np.random.default_rng(seed).standard_normal(frames * FRAME) * 0.1


def test_passthrough_is_exactly_zero_db():
    y = _random_signal(1)
    assert metrics.erle(y, y, np.ones(20, dtype=bool)) == 0.0


def test_tenth_amplitude_is_twenty_db():
    y = _random_signal(2)
    assert abs(metrics.erle(y, y / 10.0, np.ones(20, dtype=bool)) - 20.0) < 1e-9


def test_masked_only_attenuation():
    rng = np.random.default_rng(3)
    y = rng.standard_normal(20 * FRAME) * 0.1
    mask = rng.random(20) < 0.5
    s_hat = y.copy()
    gain = 10 ** (-6.02 / 20.0)
    sel = np.repeat(mask, FRAME)
    s_hat[sel] *= gain
    assert abs(metrics.erle(y, s_hat, mask) - 6.02) < 0.01


def test_joint_scaling_invariance():
    y = _random_signal(4)
    s_hat = _random_signal(5)
    mask = np.ones(20, dtype=bool)
    assert np.isclose(metrics.erle(y, s_hat, mask),
                      metrics.erle(3.7 * y, 3.7 * s_hat, mask), atol=1e-12)


def test_zero_residual_gives_positive_infinity():
    y = _random_signal(6)
    assert metrics.erle(y, np.zeros_like(y), np.ones(20, dtype=bool)) == float("inf")


def test_activity_mask_object_selects_inactive_frames():
    near = np.zeros(10 * FRAME)
    near[:5 * FRAME] = 0.5  # frames 0-4 active
    y = _random_signal(7, frames=10)
    mask = metrics.activity_mask(near)
    direct = metrics.erle(y, y / 2, ~mask.frames)
    via_object = metrics.erle(y, y / 2, mask)
    assert direct == via_object


def test_erle_validation():
    y = _random_signal(8)
    with pytest.raises(InvalidArgumentError):
        metrics.erle(y, y, np.zeros(20, dtype=bool))  # empty mask
    with pytest.raises(InvalidArgumentError):
        metrics.erle(y, y[:-1], np.ones(20, dtype=bool))
    with pytest.raises(InvalidArgumentError):
        metrics.erle(y, y, np.ones(7, dtype=bool))  # wrong frame count


# ---------------------------------------------------- spectral_distortion

def test_identical_signals_have_zero_distortion():
    s = datagen.speech_shaped_noise(4 * 2560, seed=9)
    assert metrics.spectral_distortion(s, s) == 0.0


def test_doubling_shifts_log_spectrum_by_six_db():
    s = np.random.default_rng(10).standard_normal(3 * 2560) * 0.3
    value = metrics.spectral_distortion(2.0 * s, s)
    assert abs(value - 20.0 * np.log10(2.0)) < 1e-6


def test_silence_hits_the_floor_driven_maximum():
    s = np.random.default_rng(11).standard_normal(2 * 2560) * 0.3
    # Independent evaluation of the definition, one segment at a time.
    expected = []
    for seg in (s[:2560], s[2560:]):
        log_s = 20 * np.log10(np.maximum(np.abs(np.fft.rfft(seg)), 1e-4))
        expected.append(np.sqrt(np.mean((log_s - (-80.0)) ** 2)))
    value = metrics.spectral_distortion(np.zeros_like(s), s)
    assert abs(value - np.mean(expected)) < 1e-9


def test_distortion_is_nonnegative_and_symmetric_under_floor():
    a = np.random.default_rng(12).standard_normal(2560) * 0.2
    b = np.random.default_rng(13).standard_normal(2560) * 0.2
    assert metrics.spectral_distortion(a, b) > 0.0
    assert np.isclose(metrics.spectral_distortion(a, b),
                      metrics.spectral_distortion(b, a), atol=1e-12)


def test_short_signals_use_a_single_segment():
    s = np.random.default_rng(14).standard_normal(1000) * 0.2
    assert metrics.spectral_distortion(s, s) == 0.0
    with pytest.raises(InvalidArgumentError):
        metrics.spectral_distortion(s, s[:-1])
    with pytest.raises(InvalidArgumentError):
        metrics.spectral_distortion(np.empty(0), np.empty(0))


# -------------------------------------------------------- evaluate_corpus

def _passthrough(far, mic):
    return mic


def test_passthrough_corpus_aggregates_to_zero_db(tmp_path):
    manifest = datagen.gen_corpus(4, tmp_path / "c", seed=21, duration_s=1.0)
    report = metrics.evaluate_corpus(_passthrough, manifest, method="passthrough")
    for scenario, agg in report.aggregates.items():
        if not np.isnan(agg["erle_db"]):
            assert agg["erle_db"] == 0.0
    assert report.failures == 0
    text = metrics.format_report(report)
    assert "passthrough" in text and "ERLE" in text


def test_zeros_engine_is_a_perfect_oracle_on_far_only_corpus(tmp_path):
    manifest = datagen.gen_corpus(3, tmp_path / "far", seed=22, duration_s=1.0,
                                  scenarios=("single_talk_far",))
    report = metrics.evaluate_corpus(lambda far, mic: np.zeros_like(mic), manifest)
    agg = report.aggregates["single_talk_far"]
    assert agg["count"] == 3
    assert agg["erle_db"] == float("inf")
    assert agg["distortion_db"] == 0.0  # silent estimate vs silent near-end


def test_missing_files_are_counted_not_fatal(tmp_path):
    manifest = datagen.gen_corpus(3, tmp_path / "m", seed=23, duration_s=0.5)
    rows = datagen.read_manifest(manifest)
    (manifest.parent / rows[1]["mic_path"]).unlink()
    report = metrics.evaluate_corpus(_passthrough, manifest)
    assert report.failures == 1
    assert len(report.rows) == 3


def _pfblms_engine(mu):
    def run(far, mic):
        filt = PfbLms(4000, 1024, mu)
        blocks = far.size // 1024
        out = np.zeros(blocks * 1024)
        for b in range(blocks):
            sl = slice(b * 1024, (b + 1) * 1024)
            out[sl] = filt.process_block(far[sl], mic[sl])
        return out
    return run


def test_adaptive_filter_clears_twenty_db_on_clean_linear_corpus(tmp_path):
    # Cold-start transient included: whole-sample ERLE needs long samples.
    manifest = datagen.gen_corpus(2, tmp_path / "lin", seed=24, duration_s=30.0,
                                  scenarios=("single_talk_far",), clean=True)
    report = metrics.evaluate_corpus(_pfblms_engine(1e-3), manifest, method="pfblms")
    agg = report.aggregates["single_talk_far"]
    assert agg["count"] == 2
    assert agg["erle_db"] >= 20.0, metrics.format_report(report)
