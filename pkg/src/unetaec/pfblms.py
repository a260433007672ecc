"""Partitioned frequency-block NLMS echo canceler (classical baseline).

A num_taps-long FIR estimate of the echo path is split into P = ceil(taps/B)
partitions of one block each and adapted in the frequency domain with
overlap-save filtering (FFT size 2B over [previous block ‖ current block]).
Updates are the constrained (gradient-projected) form: after each step the
upper half of every partition's time-domain image is forced back to zero so
circular convolution cannot leak into the estimate.  Step sizes are per-bin
power normalized (NLMS) with regularizer delta; the published per-sample step
mu is scaled by the block size to get the per-block step.

Divergence handling: a run of 8 consecutive blocks whose error energy
exceeds the microphone energy halves mu and restarts the count, so mu is
non-increasing over any run.
"""

import numpy as np

from .errors import InvalidArgumentError

DELTA = 1e-6
DIVERGENCE_WINDOW = 8


class PfbLms:
    """Sequential canceler state for one far-end/microphone stream."""

    def __init__(self, num_taps=4000, block=1024, mu=1e-4):
        if num_taps < 1:
            raise InvalidArgumentError("num_taps must be at least 1")
        if block < 1 or block & (block - 1):
            raise InvalidArgumentError(f"block size must be a power of two, got {block}")
        if mu < 0:
            raise InvalidArgumentError("mu must be non-negative (0 freezes adaptation)")
        self.num_taps = int(num_taps)
        self.block = int(block)
        self.partitions = -(-self.num_taps // self.block)   # ceil
        self.mu = float(mu)
        self._fft = 2 * self.block
        self._bins = self.block + 1
        self._h = np.zeros((self.partitions, self._bins), dtype=np.complex128)
        self._x_hist = np.zeros((self.partitions, self._bins), dtype=np.complex128)
        self._prev_far = np.zeros(self.block)
        self._bad_streak = 0

    # -- helpers ------------------------------------------------------------

    def _check_block(self, x, name):
        x = np.asarray(x)
        if x.ndim != 1 or x.shape[0] != self.block:
            raise InvalidArgumentError(
                f"{name} must be {self.block} samples, got shape {x.shape}")
        return np.ascontiguousarray(x, dtype=np.float64)

    def preload(self, fir):
        """Install a time-domain FIR as the current coefficient estimate."""
        fir = np.asarray(fir, dtype=np.float64)
        if fir.ndim != 1 or fir.shape[0] > self.partitions * self.block:
            raise InvalidArgumentError(
                f"fir must be 1-d with at most {self.partitions * self.block} taps")
        padded = np.zeros(self.partitions * self.block)
        padded[:fir.shape[0]] = fir
        for p in range(self.partitions):
            seg = np.zeros(self._fft)
            seg[:self.block] = padded[p * self.block:(p + 1) * self.block]
            self._h[p] = np.fft.rfft(seg)

    def taps(self):
        """Time-domain image of the current filter (length partitions·block)."""
        out = np.zeros(self.partitions * self.block)
        for p in range(self.partitions):
            seg = np.fft.irfft(self._h[p], n=self._fft)
            out[p * self.block:(p + 1) * self.block] = seg[:self.block]
        return out

    # -- main path ----------------------------------------------------------

    def process_block(self, far_block, mic_block):
        """Filter one block and adapt; returns the error (echo-canceled) block."""
        far = self._check_block(far_block, "far_block")
        mic = self._check_block(mic_block, "mic_block")

        x_spec = np.fft.rfft(np.concatenate([self._prev_far, far]))
        self._prev_far = far
        self._x_hist = np.roll(self._x_hist, 1, axis=0)
        self._x_hist[0] = x_spec

        est_spec = np.einsum("pf,pf->f", self._h, self._x_hist)
        d_hat = np.fft.irfft(est_spec, n=self._fft)[self.block:]
        err = mic - d_hat

        if self.mu > 0:
            # constrained NLMS update, per-bin power normalized
            err_spec = np.fft.rfft(np.concatenate([np.zeros(self.block), err]))
            power = np.sum(np.abs(self._x_hist) ** 2, axis=0) + DELTA
            step = (self.mu * self.block) / power
            for p in range(self.partitions):
                grad = np.fft.irfft(step * np.conj(self._x_hist[p]) * err_spec,
                                    n=self._fft)
                grad[self.block:] = 0.0
                self._h[p] += np.fft.rfft(grad)
        return err

    def check_divergence(self, err_block, mic_block):
        """Track consecutive bad blocks; halve mu after 8 in a row."""
        err = self._check_block(err_block, "err_block")
        mic = self._check_block(mic_block, "mic_block")
        if np.mean(err * err) > np.mean(mic * mic):
            self._bad_streak += 1
        else:
            self._bad_streak = 0
        if self._bad_streak >= DIVERGENCE_WINDOW:
            self.mu *= 0.5
            self._bad_streak = 0
            return True
        return False
