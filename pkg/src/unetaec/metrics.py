"""Echo-cancellation evaluation: activity masks, ERLE, spectral distortion.

ERLE is computed over frames where the ground-truth near-end signal is
*inactive* (echo-only periods), mirroring the usual single-talk convention.
Perceptual quality is proxied by a log-spectral distance — mean RMS
difference of floored log-magnitude spectra — because a standardized
perceptual score is out of scope here; the report labels it as such.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np

from .datagen import ACTIVITY_FRAME, ACTIVITY_THRESHOLD_DBFS, read_manifest
from .errors import InvalidArgumentError
from .wavio import read_wav

SPECTRUM_FRAME = 2560
LOG_FLOOR_DB = -80.0


@dataclass
class ActivityMask:
    """Per-640-sample-frame speech activity, with the threshold that made it."""

    frames: np.ndarray
    threshold_dbfs: float

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=bool)

    def inactive(self) -> np.ndarray:
        return ~self.frames


def activity_mask(s, threshold_dbfs: float = ACTIVITY_THRESHOLD_DBFS) -> ActivityMask:
    """Mark 640-sample frames whose mean square exceeds the dBFS threshold."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1:
        raise InvalidArgumentError(f"signal must be 1-D, got shape {s.shape}")
    num_frames = s.size // ACTIVITY_FRAME
    frames = s[:num_frames * ACTIVITY_FRAME].reshape(num_frames, ACTIVITY_FRAME)
    power = np.mean(frames * frames, axis=1)
    active = power > 10.0 ** (threshold_dbfs / 10.0)
    return ActivityMask(frames=active, threshold_dbfs=float(threshold_dbfs))


def _frame_select(signal: np.ndarray, mask: np.ndarray) -> np.ndarray:
    usable = mask.size * ACTIVITY_FRAME
    return signal[:usable].reshape(mask.size, ACTIVITY_FRAME)[mask].ravel()


def erle(y, s_hat, mask) -> float:
    """Echo return loss enhancement in dB over the masked frames.

    ``mask`` selects the frames to score (boolean per 640-sample frame,
    or an ActivityMask whose *inactive* frames are used).  A zero residual
    yields the +inf sentinel; an empty mask is an error.
    """
    y = np.asarray(y, dtype=np.float64)
    s_hat = np.asarray(s_hat, dtype=np.float64)
    if y.shape != s_hat.shape or y.ndim != 1:
        raise InvalidArgumentError(
            f"y and s_hat must be equal-length 1-D, got {y.shape} vs {s_hat.shape}")
    if isinstance(mask, ActivityMask):
        mask = mask.inactive()
    mask = np.asarray(mask, dtype=bool)
    if mask.size != y.size // ACTIVITY_FRAME:
        raise InvalidArgumentError(
            f"mask has {mask.size} frames for a {y.size}-sample signal")
    if not np.any(mask):
        raise InvalidArgumentError("ERLE undefined: mask selects no frames")
    num = float(np.sum(_frame_select(y, mask) ** 2))
    den = float(np.sum(_frame_select(s_hat, mask) ** 2))
    if den == 0.0:
        return float("inf")
    if num == 0.0:
        return float("-inf")
    return 10.0 * np.log10(num / den)


def spectral_distortion(s_hat, s) -> float:
    """Mean RMS log-magnitude spectral difference in dB (floored at -80 dB).

    Computed over non-overlapping 2560-sample segments (the whole signal as
    one segment when shorter).  Zero iff the floored log-spectra agree.
    """
    s_hat = np.asarray(s_hat, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if s_hat.shape != s.shape or s.ndim != 1 or s.size == 0:
        raise InvalidArgumentError(
            f"signals must be equal-length non-empty 1-D, got {s_hat.shape} vs {s.shape}")
    size = s.size
    frame = SPECTRUM_FRAME if size >= SPECTRUM_FRAME else size
    num_frames = size // frame
    floor = 10.0 ** (LOG_FLOOR_DB / 20.0)

    def logmag(sig):
        segs = sig[:num_frames * frame].reshape(num_frames, frame)
        mag = np.abs(np.fft.rfft(segs, axis=1))
        return 20.0 * np.log10(np.maximum(mag, floor))

    diff = logmag(s_hat) - logmag(s)
    return float(np.mean(np.sqrt(np.mean(diff * diff, axis=1))))


@dataclass
class MetricsReport:
    """Per-sample metric rows plus per-scenario aggregates."""

    method: str
    rows: List[Dict] = field(default_factory=list)
    aggregates: Dict[str, Dict] = field(default_factory=dict)
    failures: int = 0


def evaluate_corpus(engine: Callable[[np.ndarray, np.ndarray], np.ndarray],
                    manifest_path, method: str = "engine") -> MetricsReport:
    """Run ``engine(far, mic) -> s_hat`` over a corpus and aggregate metrics.

    ERLE is scored on near-end-inactive frames; distortion compares the
    estimate against the true near-end.  Samples whose files are missing or
    unreadable are skipped and counted in ``failures``.
    """
    manifest_path = Path(manifest_path)
    report = MetricsReport(method=method)
    for row in read_manifest(manifest_path):
        base = manifest_path.parent
        try:
            far = read_wav(base / row["far_path"])
            mic = read_wav(base / row["mic_path"])
            near = read_wav(base / row["near_path"])
        except Exception as exc:
            report.rows.append({"index": row["index"], "scenario": row["scenario"],
                                "error": str(exc)})
            report.failures += 1
            continue
        s_hat = np.asarray(engine(far, mic), dtype=np.float64)
        n = min(s_hat.size, mic.size)
        s_hat, mic_t, near_t = s_hat[:n], mic[:n], near[:n]
        inactive = activity_mask(near_t).inactive()
        sample = {"index": row["index"], "scenario": row["scenario"]}
        if np.any(inactive):
            sample["erle_db"] = erle(mic_t, s_hat, inactive)
        sample["distortion_db"] = spectral_distortion(s_hat, near_t)
        report.rows.append(sample)

    for scenario in sorted({r["scenario"] for r in report.rows}):
        ok = [r for r in report.rows if r["scenario"] == scenario and "error" not in r]
        erles = [r["erle_db"] for r in ok if "erle_db" in r]
        dists = [r["distortion_db"] for r in ok]
        report.aggregates[scenario] = {
            "count": len(ok),
            "erle_db": float(np.mean(erles)) if erles else float("nan"),
            "distortion_db": float(np.mean(dists)) if dists else float("nan"),
        }
    return report


def format_report(report: MetricsReport) -> str:
    """Delimited aggregate table plus a short human-readable block."""
    lines = ["method\tscenario\tcount\terle_db\tdistortion_db"]
    for scenario, agg in report.aggregates.items():
        lines.append(f"{report.method}\t{scenario}\t{agg['count']}"
                     f"\t{agg['erle_db']:.2f}\t{agg['distortion_db']:.2f}")
    lines.append("")
    lines.append(f"{report.method}: {len(report.rows)} samples, "
                 f"{report.failures} failed")
    for scenario, agg in report.aggregates.items():
        lines.append(f"  {scenario}: ERLE {agg['erle_db']:.2f} dB, "
                     f"log-spectral distortion {agg['distortion_db']:.2f} dB "
                     f"(perceptual-score proxy) over {agg['count']} samples")
    return "\n".join(lines)
