"""Synthetic mixture generator checks: RIRs, SER calibration, corpus files."""

import numpy as np
import pytest
from scipy.signal import fftconvolve

from unetaec import datagen, wavio
from unetaec.datagen import MixtureSpec
from unetaec.errors import InvalidArgumentError


def _rir(seed=3):
    return datagen.gen_rir(32.0, 6.0, seed)


# ---------------------------------------------------------------- gen_rir

def test_rir_has_unit_energy_and_expected_length():
    h = _rir()
    assert h.shape == (512,)
    assert abs(np.sum(h * h) - 1.0) < 1e-9


def test_rir_first_tap_dominates():
    for seed in range(5):
        h = datagen.gen_rir(64.0, 10.0, seed)
        assert np.argmax(np.abs(h)) == 0


def test_rir_zero_decay_concentrates_energy_up_front():
    h = datagen.gen_rir(32.0, 0.0, seed=1)
    assert np.sum(h[:8] ** 2) > 0.99


def test_rir_deterministic():
    assert np.array_equal(_rir(9), _rir(9))


def test_rir_validation():
    with pytest.raises(InvalidArgumentError):
        datagen.gen_rir(0.0, 5.0, 0)
    with pytest.raises(InvalidArgumentError):
        datagen.gen_rir(-3.0, 5.0, 0)
    with pytest.raises(InvalidArgumentError):
        datagen.gen_rir(32.0, -1.0, 0)


# ---------------------------------------------------- apply_nonlinearity

def test_nonlinearity_none_is_identity():
    x = np.random.default_rng(0).standard_normal(64)
    assert np.array_equal(datagen.apply_nonlinearity(x, "none"), x)


def test_hard_clip_limits_samples():
    out = datagen.apply_nonlinearity(np.array([0.8, -0.9, 0.2]), "hard_clip", 0.5)
    assert np.array_equal(out, [0.5, -0.5, 0.2])


def test_clip_above_peak_is_identity():
    x = np.random.default_rng(1).uniform(-0.4, 0.4, 128)
    out = datagen.apply_nonlinearity(x, "hard_clip", np.max(np.abs(x)))
    assert np.array_equal(out, x)


def test_nonlinearity_validation():
    with pytest.raises(InvalidArgumentError):
        datagen.apply_nonlinearity(np.zeros(4), "hard_clip", 0.0)
    with pytest.raises(InvalidArgumentError):
        datagen.apply_nonlinearity(np.array([np.inf]), "none")
    with pytest.raises(InvalidArgumentError):
        datagen.apply_nonlinearity(np.zeros(4), "soft_knee")


# ------------------------------------------------- speech_shaped_noise

def test_speech_noise_rms_and_determinism():
    a = datagen.speech_shaped_noise(32000, seed=5, rms=0.07)
    b = datagen.speech_shaped_noise(32000, seed=5, rms=0.07)
    assert np.array_equal(a, b)
    assert abs(np.sqrt(np.mean(a * a)) - 0.07) < 1e-12


def test_speech_noise_has_active_and_inactive_frames():
    x = datagen.speech_shaped_noise(4 * 16000, seed=2)
    mask = datagen.active_frame_mask(x)
    assert mask.any() and (~mask).any()


def test_speech_noise_validation():
    with pytest.raises(InvalidArgumentError):
        datagen.speech_shaped_noise(0, seed=0)
    with pytest.raises(InvalidArgumentError):
        datagen.speech_shaped_noise(100, seed=0, rms=0.0)


# ------------------------------------------------------------------ mix

def test_double_talk_hits_requested_ser_exactly():
    rng = np.random.default_rng(21)
    s = datagen.speech_shaped_noise(32000, seed=31)
    x = datagen.speech_shaped_noise(32000, seed=32)
    for ser in (-10.0, -3.0, 0.0, 4.0, 10.0):
        spec = MixtureSpec(scenario="double_talk", ser_db=ser, rir=_rir())
        sample = datagen.mix(s, x, spec, seed=int(rng.integers(2 ** 31)))
        assert abs(datagen.measure_ser(sample.near_end, sample.echo) - ser) < 1e-9


def test_mixture_identity_holds_sample_wise():
    s = datagen.speech_shaped_noise(24000, seed=41)
    x = datagen.speech_shaped_noise(24000, seed=42)
    spec = MixtureSpec(scenario="double_talk", ser_db=2.0, near_noise_snr_db=15.0,
                       far_noise_snr_db=20.0, nonlinearity="hard_clip",
                       clip_threshold=0.5, rir=_rir())
    sample = datagen.mix(s, x, spec, seed=7)
    assert np.array_equal(sample.mic, sample.near_end + sample.echo + sample.noise)
    assert np.max(np.abs(sample.mic - sample.near_end - sample.noise - sample.echo)) < 1e-9


def test_single_talk_near_zeroes_the_echo_path():
    s = datagen.speech_shaped_noise(16000, seed=51)
    x = datagen.speech_shaped_noise(16000, seed=52)
    sample = datagen.mix(s, x, MixtureSpec(scenario="single_talk_near"), seed=1)
    assert not sample.far_end.any()
    assert not sample.echo.any()
    assert np.array_equal(sample.mic, sample.near_end + sample.noise)


def test_single_talk_far_keeps_unit_echo_scale():
    s = datagen.speech_shaped_noise(16000, seed=61)
    x = datagen.speech_shaped_noise(16000, seed=62)
    h = _rir()
    sample = datagen.mix(s, x, MixtureSpec(scenario="single_talk_far", rir=h), seed=1)
    assert not sample.near_end.any()
    assert np.allclose(sample.echo, fftconvolve(x, h)[:16000], atol=1e-12)
    assert np.array_equal(sample.far_end, x)


def test_noise_levels_match_requested_snr():
    s = datagen.speech_shaped_noise(32000, seed=71)
    x = datagen.speech_shaped_noise(32000, seed=72)
    spec = MixtureSpec(scenario="double_talk", ser_db=0.0, near_noise_snr_db=18.0,
                       far_noise_snr_db=12.0, rir=_rir())
    sample = datagen.mix(s, x, spec, seed=9)
    far_noise = sample.far_end - x
    far_snr = 10 * np.log10(np.sum(x ** 2) / np.sum(far_noise ** 2))
    near_snr = 10 * np.log10(np.sum(sample.near_end ** 2) / np.sum(sample.noise ** 2))
    assert abs(far_snr - 12.0) < 1e-9
    assert abs(near_snr - 18.0) < 1e-9


def test_clipped_noisy_double_talk_measures_back_within_tolerance():
    # Replicates the distorted-far-end, far-noise, SER 1 dB condition.
    s = datagen.speech_shaped_noise(48000, seed=81)
    x = datagen.speech_shaped_noise(48000, seed=82)
    spec = MixtureSpec(scenario="double_talk", ser_db=1.0, far_noise_snr_db=10.0,
                       nonlinearity="hard_clip", clip_threshold=0.4, rir=_rir())
    sample = datagen.mix(s, x, spec, seed=3)
    assert abs(datagen.measure_ser(sample.near_end, sample.echo) - 1.0) < 0.1


def test_mix_rejects_degenerate_requests():
    x = datagen.speech_shaped_noise(16000, seed=91)
    spec = MixtureSpec(scenario="double_talk", ser_db=0.0, rir=_rir())
    with pytest.raises(InvalidArgumentError):
        datagen.mix(np.zeros(16000), x, spec, seed=0)  # silent near-end
    with pytest.raises(InvalidArgumentError):
        datagen.mix(x, np.zeros(16000), spec, seed=0)  # silent echo path
    with pytest.raises(InvalidArgumentError):
        datagen.mix(x, x, MixtureSpec(scenario="double_talk"), seed=0)  # no RIR
    with pytest.raises(InvalidArgumentError):
        datagen.mix(np.empty(0), x, spec, seed=0)


def test_mix_trims_to_shorter_input():
    s = datagen.speech_shaped_noise(20000, seed=93)
    x = datagen.speech_shaped_noise(17000, seed=94)
    sample = datagen.mix(s, x, MixtureSpec(scenario="double_talk", rir=_rir()), seed=0)
    assert sample.mic.shape == (17000,)


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        MixtureSpec(scenario="triple_talk")
    with pytest.raises(InvalidArgumentError):
        MixtureSpec(scenario="double_talk", ser_db=11.0)
    with pytest.raises(InvalidArgumentError):
        MixtureSpec(scenario="double_talk", nonlinearity="hard_clip")
    with pytest.raises(InvalidArgumentError):
        MixtureSpec(scenario="double_talk", rir=np.empty(0))


# ----------------------------------------------------------- gen_corpus

def test_empty_corpus_writes_header_only(tmp_path):
    manifest = datagen.gen_corpus(0, tmp_path / "c0", seed=1)
    rows = datagen.read_manifest(manifest)
    assert rows == []
    assert sorted(p.name for p in manifest.parent.iterdir()) == ["manifest.csv"]


def test_corpus_is_bit_identical_across_runs(tmp_path):
    m1 = datagen.gen_corpus(6, tmp_path / "a", seed=77, duration_s=0.5)
    m2 = datagen.gen_corpus(6, tmp_path / "b", seed=77, duration_s=0.5)
    assert m1.read_bytes() == m2.read_bytes()
    for row in datagen.read_manifest(m1):
        for key in ("far_path", "echo_path", "mic_path", "near_path"):
            assert (m1.parent / row[key]).read_bytes() == (m2.parent / row[key]).read_bytes()


def test_corpus_files_satisfy_the_mixture_identity(tmp_path):
    manifest = datagen.gen_corpus(8, tmp_path / "c", seed=5, duration_s=0.5)
    rows = datagen.read_manifest(manifest)
    assert len(rows) == 8
    step = 1.0 / 32768.0
    for row in rows:
        far = wavio.read_wav(manifest.parent / row["far_path"])
        echo = wavio.read_wav(manifest.parent / row["echo_path"])
        mic = wavio.read_wav(manifest.parent / row["mic_path"])
        near = wavio.read_wav(manifest.parent / row["near_path"])
        assert far.shape == echo.shape == mic.shape == near.shape == (8000,)
        residual = mic - near - echo  # the (unstored) noise term, plus quantization
        if row["near_noise_snr_db"] == "":
            assert np.max(np.abs(residual)) <= 2.0 * step
        if row["scenario"] == "single_talk_far":
            assert not np.any(near)
        if row["scenario"] == "single_talk_near":
            assert not np.any(echo) and not np.any(far)


def test_corpus_scenario_filter_and_ser_recovery(tmp_path):
    manifest = datagen.gen_corpus(24, tmp_path / "dt", seed=13, duration_s=1.0,
                                  scenarios=("double_talk",))
    rows = datagen.read_manifest(manifest)
    assert all(row["scenario"] == "double_talk" for row in rows)
    worst = 0.0
    for row in rows:
        echo = wavio.read_wav(manifest.parent / row["echo_path"])
        near = wavio.read_wav(manifest.parent / row["near_path"])
        measured = datagen.measure_ser(near, echo)
        worst = max(worst, abs(measured - float(row["ser_db"])))
    assert worst < 0.1


def test_corpus_accepts_user_speech_directory(tmp_path):
    voices = tmp_path / "voices"
    voices.mkdir()
    for i in range(2):
        wavio.write_wav(voices / f"v{i}.wav",
                        datagen.speech_shaped_noise(12000, seed=100 + i))
    manifest = datagen.gen_corpus(4, tmp_path / "u", seed=3, duration_s=0.5,
                                  source_speech_dir=voices)
    assert len(datagen.read_manifest(manifest)) == 4
    with pytest.raises(InvalidArgumentError):
        datagen.gen_corpus(1, tmp_path / "u2", source_speech_dir=tmp_path / "empty")


def test_corpus_validation(tmp_path):
    with pytest.raises(InvalidArgumentError):
        datagen.gen_corpus(-1, tmp_path / "x")
    with pytest.raises(InvalidArgumentError):
        datagen.gen_corpus(1, tmp_path / "x", duration_s=0.0)
    with pytest.raises(InvalidArgumentError):
        datagen.gen_corpus(1, tmp_path / "x", scenarios=("chatter",))
    with pytest.raises(InvalidArgumentError):
        datagen.read_manifest(tmp_path / "nope.csv")
