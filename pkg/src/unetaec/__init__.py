"""Streaming acoustic echo cancellation.

A residual U-Net magnitude-spectrogram canceler with a from-scratch training
engine, a partitioned-block frequency-domain LMS baseline, synthetic
double-talk data generation, ERLE/distortion evaluation, and a real-time
latency harness.  See the ``unetaec`` CLI for the end-user entry points.
"""

__version__ = "0.1.0"

from unetaec.errors import (
    FormatError,
    InvalidArgumentError,
    ProcessingError,
    UnetAecError,
)

__all__ = [
    "FormatError",
    "InvalidArgumentError",
    "ProcessingError",
    "UnetAecError",
    "__version__",
]
