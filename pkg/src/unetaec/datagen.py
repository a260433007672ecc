"""Synthetic echo-scenario generation.

Builds single-talk and double-talk mixtures

    mic = near_end + echo + noise

with a controlled near-to-echo power ratio (SER), optional white noise on
either end, optional hard clipping of the loudspeaker path, and random
exponentially-decaying room impulse responses.  A speech-shaped noise
source (filtered white noise with a syllabic-rate amplitude envelope)
stands in for real recordings so the whole pipeline runs self-contained;
a directory of user WAV files can be substituted.

SER is measured over 640-sample frames where the near-end signal has
energy above -40 dBFS, so silent gaps do not dilute the ratio.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import InvalidArgumentError, ProcessingError
from .wavio import SAMPLE_RATE, read_wav, write_wav

SCENARIOS = ("double_talk", "single_talk_far", "single_talk_near")
NONLINEARITIES = ("none", "hard_clip")
SER_GRID_DB = tuple(range(-10, 11))

# Frame geometry and threshold for the "speech active" convention used when
# measuring SER.
ACTIVITY_FRAME = 640
ACTIVITY_THRESHOLD_DBFS = -40.0

_WAV_PEAK = 0.999


@dataclass
class MixtureSpec:
    """Recipe for one synthetic sample."""

    scenario: str
    ser_db: float = 0.0
    near_noise_snr_db: Optional[float] = None
    far_noise_snr_db: Optional[float] = None
    nonlinearity: str = "none"
    clip_threshold: Optional[float] = None
    rir: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidArgumentError(
                f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.nonlinearity not in NONLINEARITIES:
            raise InvalidArgumentError(
                f"nonlinearity must be one of {NONLINEARITIES}, got {self.nonlinearity!r}")
        if not -10.0 <= float(self.ser_db) <= 10.0:
            raise InvalidArgumentError(f"ser_db must lie in [-10, 10], got {self.ser_db}")
        if self.nonlinearity == "hard_clip":
            if self.clip_threshold is None or not self.clip_threshold > 0:
                raise InvalidArgumentError("hard_clip requires a positive clip_threshold")
        for name in ("near_noise_snr_db", "far_noise_snr_db"):
            value = getattr(self, name)
            if value is not None and not np.isfinite(value):
                raise InvalidArgumentError(f"{name} must be finite when set")
        if self.rir is not None:
            self.rir = np.asarray(self.rir, dtype=np.float64)
            if self.rir.ndim != 1 or self.rir.size == 0:
                raise InvalidArgumentError("rir must be a non-empty 1-D sequence")
            if not np.all(np.isfinite(self.rir)):
                raise InvalidArgumentError("rir must be finite")


@dataclass
class SyntheticSample:
    """One generated quadruple plus the noise term and its recipe.

    mic == near_end + echo + noise holds sample-wise by construction.
    """

    far_end: np.ndarray
    echo: np.ndarray
    mic: np.ndarray
    near_end: np.ndarray
    noise: np.ndarray
    spec: MixtureSpec = field(repr=False)


def active_frame_mask(s: np.ndarray,
                      threshold_dbfs: float = ACTIVITY_THRESHOLD_DBFS) -> np.ndarray:
    """Boolean mask of 640-sample frames whose mean square exceeds the threshold."""
    s = np.asarray(s, dtype=np.float64)
    num_frames = s.size // ACTIVITY_FRAME
    frames = s[:num_frames * ACTIVITY_FRAME].reshape(num_frames, ACTIVITY_FRAME)
    power = np.mean(frames * frames, axis=1)
    floor = 10.0 ** (threshold_dbfs / 10.0)
    return power > floor


def measure_ser(near: np.ndarray, echo: np.ndarray) -> float:
    """SER in dB over frames where the near-end signal is active."""
    near = np.asarray(near, dtype=np.float64)
    echo = np.asarray(echo, dtype=np.float64)
    if near.shape != echo.shape:
        raise InvalidArgumentError(
            f"near/echo length mismatch: {near.shape} vs {echo.shape}")
    mask = active_frame_mask(near)
    if not np.any(mask):
        raise InvalidArgumentError("SER undefined: no active near-end frames")
    num = mask.size * ACTIVITY_FRAME
    sel = np.repeat(mask, ACTIVITY_FRAME)
    e_near = float(np.sum(near[:num][sel] ** 2))
    e_echo = float(np.sum(echo[:num][sel] ** 2))
    if e_echo == 0.0:
        raise InvalidArgumentError("SER undefined: echo is silent on active frames")
    return 10.0 * np.log10(e_near / e_echo)


def gen_rir(length_ms: float, decay_time_ms: float, seed: int) -> np.ndarray:
    """Random room impulse response: white noise under an exponential envelope.

    The envelope time constant is ``decay_time_ms`` (clamped to one sample so
    a zero decay collapses onto the direct path).  The first tap is forced to
    dominate, modelling the direct loudspeaker-to-mic path, and the result is
    normalized to unit energy.
    """
    if not length_ms > 0:
        raise InvalidArgumentError(f"length_ms must be positive, got {length_ms}")
    if decay_time_ms < 0:
        raise InvalidArgumentError(f"decay_time_ms must be non-negative, got {decay_time_ms}")
    num_taps = int(round(length_ms * SAMPLE_RATE / 1000.0))
    if num_taps < 1:
        raise InvalidArgumentError(f"length_ms {length_ms} is shorter than one sample")
    tau = decay_time_ms * SAMPLE_RATE / 1000.0
    if tau < 1.0:
        tau = 1.0
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(num_taps) * np.exp(-np.arange(num_taps) / tau)
    tail_peak = float(np.max(np.abs(h[1:]))) if num_taps > 1 else 0.0
    h[0] = 1.05 * tail_peak if tail_peak > 0 else 1.0
    return h / np.sqrt(np.sum(h * h))


def apply_nonlinearity(x: np.ndarray, kind: str,
                       threshold: Optional[float] = None) -> np.ndarray:
    """Distort the loudspeaker signal: identity or symmetric hard clipping."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("input must be finite")
    if kind == "none":
        return x.copy()
    if kind == "hard_clip":
        if threshold is None or not threshold > 0:
            raise InvalidArgumentError(f"clip threshold must be positive, got {threshold}")
        return np.clip(x, -threshold, threshold)
    raise InvalidArgumentError(f"unknown nonlinearity {kind!r}")


def speech_shaped_noise(num_samples: int, seed: int, rms: float = 0.05) -> np.ndarray:
    """Self-contained stand-in for speech: shaped noise with syllabic gaps.

    White noise is spectrally weighted toward the few-hundred-Hz region and
    modulated by a raised-cosine envelope at a syllabic rate (2.5-5 Hz) whose
    floor sits 20 dB down, so the output alternates between active frames and
    frames below the -40 dBFS activity threshold.
    """
    if num_samples <= 0:
        raise InvalidArgumentError(f"num_samples must be positive, got {num_samples}")
    if not rms > 0:
        raise InvalidArgumentError(f"rms must be positive, got {rms}")
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(num_samples)
    freqs = np.fft.rfftfreq(num_samples, 1.0 / SAMPLE_RATE)
    shape = (freqs / (freqs + 120.0)) / (1.0 + (freqs / 600.0) ** 2)
    shaped = np.fft.irfft(np.fft.rfft(white) * shape, num_samples)

    rate_hz = rng.uniform(2.5, 5.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(num_samples) / SAMPLE_RATE
    env = 0.1 + 0.9 * (0.5 * (1.0 - np.cos(2.0 * np.pi * rate_hz * t + phase))) ** 1.5
    out = shaped * env
    scale = np.sqrt(np.mean(out * out))
    if scale == 0.0:
        raise ProcessingError("degenerate noise draw")
    return out * (rms / scale)


def _scaled_white_noise(rng: np.random.Generator, num_samples: int,
                        ref_energy: float, snr_db: float) -> np.ndarray:
    noise = rng.standard_normal(num_samples)
    e_noise = float(np.sum(noise * noise))
    target = ref_energy / (10.0 ** (snr_db / 10.0))
    return noise * np.sqrt(target / e_noise)


def mix(s: np.ndarray, x: np.ndarray, spec: MixtureSpec, seed: int) -> SyntheticSample:
    """Combine near-end speech ``s`` and far-end speech ``x`` per ``spec``.

    The echo is the far-end signal — plus far-end noise, if requested —
    passed through the nonlinearity and convolved with the RIR, then scaled
    so the SER measured over near-end-active frames equals ``spec.ser_db``
    (double-talk only; single_talk_far keeps the unit-energy echo scale).
    Near-end noise is scaled against the near-end energy, or against the
    echo when there is no near-end.  Deterministic for a fixed seed.
    """
    s = np.asarray(s, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    length = min(s.size, x.size)
    if length == 0:
        raise InvalidArgumentError("inputs must contain at least one sample")
    s = s[:length].copy()
    x = x[:length].copy()
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(x))):
        raise InvalidArgumentError("inputs must be finite")
    rng = np.random.default_rng(seed)

    if spec.scenario == "single_talk_near":
        far = np.zeros(length)
        echo = np.zeros(length)
        near = s
    else:
        if spec.rir is None:
            raise InvalidArgumentError(f"{spec.scenario} requires an RIR")
        far = x
        if spec.far_noise_snr_db is not None:
            e_far = float(np.sum(far * far))
            if e_far == 0.0:
                raise InvalidArgumentError("far noise SNR undefined: far-end is silent")
            far = far + _scaled_white_noise(rng, length, e_far, spec.far_noise_snr_db)
        driven = apply_nonlinearity(far, spec.nonlinearity, spec.clip_threshold)
        echo = fftconvolve(driven, spec.rir)[:length]
        if spec.scenario == "single_talk_far":
            near = np.zeros(length)
        else:
            near = s
            mask = active_frame_mask(near)
            if not np.any(mask):
                raise InvalidArgumentError(
                    "SER undefined: near-end has no active frames")
            sel = np.repeat(mask, ACTIVITY_FRAME)
            num = mask.size * ACTIVITY_FRAME
            e_near = float(np.sum(near[:num][sel] ** 2))
            e_echo = float(np.sum(echo[:num][sel] ** 2))
            if e_echo == 0.0:
                raise InvalidArgumentError("cannot set SER: echo path is silent")
            echo = echo * np.sqrt(e_near / (e_echo * 10.0 ** (spec.ser_db / 10.0)))

    if spec.near_noise_snr_db is not None:
        ref = float(np.sum(near * near))
        if ref == 0.0:
            ref = float(np.sum(echo * echo))
        if ref == 0.0:
            raise InvalidArgumentError("near noise SNR undefined: sample is silent")
        noise = _scaled_white_noise(rng, length, ref, spec.near_noise_snr_db)
    else:
        noise = np.zeros(length)

    mic = near + echo + noise
    return SyntheticSample(far_end=far, echo=echo, mic=mic, near_end=near,
                           noise=noise, spec=spec)


MANIFEST_FIELDS = (
    "index", "scenario", "ser_db", "near_noise_snr_db", "far_noise_snr_db",
    "nonlinearity", "clip_threshold", "rir_length_ms", "rir_decay_ms",
    "far_path", "echo_path", "mic_path", "near_path",
)


def _fmt(value) -> str:
    return "" if value is None else f"{value:g}" if isinstance(value, float) else str(value)


def _pick_speech(rng: np.random.Generator, num_samples: int,
                 source_files: Optional[list]) -> np.ndarray:
    if source_files is None:
        return speech_shaped_noise(num_samples, int(rng.integers(2 ** 31)))
    data = read_wav(source_files[int(rng.integers(len(source_files)))])
    if data.size >= num_samples:
        start = int(rng.integers(data.size - num_samples + 1))
        return data[start:start + num_samples]
    return np.pad(data, (0, num_samples - data.size))


def gen_corpus(num_samples: int, out_dir, seed: int = 0,
               source_speech_dir=None, duration_s: float = 4.0,
               scenarios: Sequence[str] = SCENARIOS,
               clean: bool = False) -> Path:
    """Generate a corpus of WAV quadruples plus a CSV manifest.

    Each sample derives its own seed from (corpus seed, index), so the corpus
    is bit-identical regardless of generation order.  Returns the manifest
    path.  When a quadruple would clip the 16-bit range, all four signals are
    rescaled by a common factor so their relationships survive.  ``clean``
    disables noise and clipping, leaving purely linear echo paths — the
    regime classical adaptive filters are expected to solve.
    """
    if num_samples < 0:
        raise InvalidArgumentError(f"num_samples must be non-negative, got {num_samples}")
    if not duration_s > 0:
        raise InvalidArgumentError(f"duration_s must be positive, got {duration_s}")
    scenarios = tuple(scenarios)
    if not scenarios or any(sc not in SCENARIOS for sc in scenarios):
        raise InvalidArgumentError(f"scenarios must be drawn from {SCENARIOS}")
    source_files = None
    if source_speech_dir is not None:
        source_files = sorted(Path(source_speech_dir).glob("*.wav"))
        if not source_files:
            raise InvalidArgumentError(f"no WAV files in {source_speech_dir}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    length = int(round(duration_s * SAMPLE_RATE))
    rows = []
    for index in range(num_samples):
        rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
        scenario = scenarios[int(rng.integers(len(scenarios)))]
        ser_db = float(rng.integers(-10, 11))
        rir_length_ms = float(rng.choice((16.0, 32.0, 64.0)))
        rir_decay_ms = float(rng.uniform(1.0, 12.0))
        rir = gen_rir(rir_length_ms, rir_decay_ms, int(rng.integers(2 ** 31)))
        near_snr = float(rng.uniform(10.0, 30.0)) if rng.random() < 0.5 else None
        far_snr = float(rng.uniform(10.0, 30.0)) if rng.random() < 0.5 else None
        if rng.random() < 0.5:
            nonlinearity, clip_threshold = "hard_clip", float(rng.uniform(0.3, 0.9))
        else:
            nonlinearity, clip_threshold = "none", None
        if clean:
            near_snr = far_snr = clip_threshold = None
            nonlinearity = "none"
        spec = MixtureSpec(scenario=scenario,
                           ser_db=ser_db if scenario == "double_talk" else 0.0,
                           near_noise_snr_db=near_snr, far_noise_snr_db=far_snr,
                           nonlinearity=nonlinearity, clip_threshold=clip_threshold,
                           rir=rir)
        near = _pick_speech(rng, length, source_files)
        far = _pick_speech(rng, length, source_files)
        try:
            sample = mix(near, far, spec, int(rng.integers(2 ** 31)))
        except InvalidArgumentError as exc:
            raise ProcessingError(f"sample {index}: {exc}") from exc

        quad = [sample.far_end, sample.echo, sample.mic, sample.near_end]
        peak = max(float(np.max(np.abs(sig))) for sig in quad)
        if peak > _WAV_PEAK:
            # Shrinking for WAV headroom can drop borderline frames below the
            # absolute activity threshold; the SER was calibrated over the
            # old mask, so re-balance the echo whenever scaling changed it.
            g = _WAV_PEAK / peak
            far_s, echo_s, near_s, noise_s = (
                sig * g for sig in (sample.far_end, sample.echo,
                                    sample.near_end, sample.noise))
            if scenario == "double_talk":
                for _ in range(8):
                    try:
                        measured = measure_ser(near_s, echo_s)
                    except InvalidArgumentError as exc:
                        raise ProcessingError(
                            f"sample {index}: lost near-end activity while "
                            f"rescaling for the WAV range ({exc})") from exc
                    echo_s = echo_s * 10 ** ((measured - ser_db) / 20.0)
                    mic_s = near_s + echo_s + noise_s
                    peak = max(float(np.max(np.abs(sig)))
                               for sig in (far_s, echo_s, mic_s, near_s))
                    if peak <= _WAV_PEAK:
                        break
                    g = _WAV_PEAK / peak
                    far_s, echo_s, near_s, noise_s = (
                        sig * g for sig in (far_s, echo_s, near_s, noise_s))
                else:
                    raise ProcessingError(
                        f"sample {index}: calibrated mix does not settle "
                        f"into the WAV range")
            mic_s = near_s + echo_s + noise_s
            quad = [far_s, echo_s, mic_s, near_s]
        paths = [f"{index:05d}_{tag}.wav" for tag in ("far", "echo", "mic", "near")]
        for rel, sig in zip(paths, quad):
            write_wav(out_dir / rel, sig)
        rows.append({
            "index": index,
            "scenario": scenario,
            "ser_db": _fmt(ser_db if scenario == "double_talk" else None),
            "near_noise_snr_db": _fmt(near_snr),
            "far_noise_snr_db": _fmt(far_snr),
            "nonlinearity": nonlinearity,
            "clip_threshold": _fmt(clip_threshold),
            "rir_length_ms": _fmt(rir_length_ms),
            "rir_decay_ms": _fmt(rir_decay_ms),
            "far_path": paths[0], "echo_path": paths[1],
            "mic_path": paths[2], "near_path": paths[3],
        })

    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    return manifest


def read_manifest(path) -> list:
    """Read a corpus manifest back as a list of string-valued row dicts."""
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"manifest not found: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_FIELDS:
            raise InvalidArgumentError(f"{path}: not a corpus manifest")
        return list(reader)
