"""Spectral loss, optimizers, toy training loop, and hyperparameter search.

The loss is the RMS difference between estimated and reference magnitude
grids restricted to the newest tf_frames time frames — 8 frames × 80-sample
hop = the 40 ms the canceler actually emits per stride, so training pressure
lands only on the part of the frame that reaches the output.

Optimizers implement the standard published update rules (SGD, Adam with
bias correction, Nadam with the Nesterov lookahead in the update term).
Training here is deliberately toy-scale: single frames, small nets, enough
to demonstrate that the gradients drive the loss down and to rank
hyperparameter configurations on a small budget.
"""

import itertools
from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from . import unet
from .errors import InvalidArgumentError, ProcessingError


@dataclass(frozen=True)
class LossConfig:
    tf_frames: int = 8
    freq_bins: int = 160

    def __post_init__(self):
        if self.tf_frames < 1:
            raise InvalidArgumentError("tf_frames must be positive")
        if self.freq_bins < 1:
            raise InvalidArgumentError("freq_bins must be positive")


def _check_pair(s_hat, s, cfg):
    a = np.asarray(s_hat, dtype=np.float64)
    b = np.asarray(s, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"estimate shape {a.shape} != reference shape {b.shape}")
    if a.ndim != 2 or a.shape[0] != cfg.freq_bins:
        raise InvalidArgumentError(
            f"expected ({cfg.freq_bins}, T) grids, got {a.shape}")
    if cfg.tf_frames > a.shape[1]:
        raise InvalidArgumentError(
            f"tf_frames {cfg.tf_frames} exceeds grid's {a.shape[1]} time frames")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidArgumentError("loss inputs must be finite")
    return a, b


def loss(s_hat, s, cfg=LossConfig()):
    """RMS error over the newest tf_frames frames: sqrt(SSE / (M·K))."""
    a, b = _check_pair(s_hat, s, cfg)
    diff = a[:, -cfg.tf_frames:] - b[:, -cfg.tf_frames:]
    return float(np.sqrt(np.sum(diff * diff) / (cfg.tf_frames * cfg.freq_bins)))


def loss_gradient(s_hat, s, cfg=LossConfig()):
    """d loss / d s_hat; zero outside the scored region, zero at exact match."""
    a, b = _check_pair(s_hat, s, cfg)
    grad = np.zeros_like(a)
    region = a[:, -cfg.tf_frames:] - b[:, -cfg.tf_frames:]
    n = cfg.tf_frames * cfg.freq_bins
    value = np.sqrt(np.sum(region * region) / n)
    if value > 0.0:
        grad[:, -cfg.tf_frames:] = region / (n * value)
    return grad


# ---------------------------------------------------------------------------
# optimizers


OPTIMIZERS = ("sgd", "adam", "nadam")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "nadam"
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise InvalidArgumentError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate < 0:
            raise InvalidArgumentError("learning rate must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidArgumentError("betas must lie in [0, 1)")


class Optimizer:
    """Stateful update rule; step() returns a new weight set."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.t = 0
        self._m = None
        self._v = None

    def step(self, weights, grads):
        cfg = self.cfg
        for name in weights.tensors:
            g = np.asarray(grads[name])
            if g.shape != weights.tensors[name].shape:
                raise InvalidArgumentError(f"gradient shape mismatch on {name}")
            if not np.all(np.isfinite(g)):
                raise ProcessingError(f"non-finite gradient on {name}; step rejected")
        self.t += 1
        if cfg.kind == "sgd":
            return self._sgd(weights, grads)
        return self._adam_family(weights, grads, nesterov=(cfg.kind == "nadam"))

    def _sgd(self, weights, grads):
        cfg = self.cfg
        out = {}
        if cfg.momentum and self._m is None:
            self._m = {k: np.zeros_like(v) for k, v in weights.tensors.items()}
        for name, w in weights.tensors.items():
            g = np.asarray(grads[name], dtype=w.dtype)
            if cfg.momentum:
                self._m[name] = cfg.momentum * self._m[name] + g
                g = self._m[name]
            out[name] = w - w.dtype.type(cfg.learning_rate) * g
        return weights.replace(out)

    def _adam_family(self, weights, grads, nesterov):
        cfg = self.cfg
        if self._m is None:
            self._m = {k: np.zeros_like(v) for k, v in weights.tensors.items()}
            self._v = {k: np.zeros_like(v) for k, v in weights.tensors.items()}
        t = self.t
        out = {}
        for name, w in weights.tensors.items():
            g = np.asarray(grads[name], dtype=w.dtype)
            self._m[name] = cfg.beta1 * self._m[name] + (1 - cfg.beta1) * g
            self._v[name] = cfg.beta2 * self._v[name] + (1 - cfg.beta2) * g * g
            v_hat = self._v[name] / (1 - cfg.beta2 ** t)
            if nesterov:
                m_hat = self._m[name] / (1 - cfg.beta1 ** (t + 1))
                update = cfg.beta1 * m_hat + (1 - cfg.beta1) * g / (1 - cfg.beta1 ** t)
            else:
                update = self._m[name] / (1 - cfg.beta1 ** t)
            out[name] = w - (cfg.learning_rate * update
                             / (np.sqrt(v_hat) + cfg.eps)).astype(w.dtype)
        return weights.replace(out)


# ---------------------------------------------------------------------------
# training loop


class TrainSample(NamedTuple):
    """Normalized far/mic grids plus the near-end target in the mic's scale."""
    x_grid: np.ndarray
    y_grid: np.ndarray
    target: np.ndarray


class TrainResult(NamedTuple):
    weights: unet.NetWeights
    curve: List[float]      # curve[0] = loss before training, then one per epoch


def _net_input(sample, dtype):
    return np.stack([sample.y_grid, sample.x_grid], axis=-1).astype(dtype)


def sample_loss(weights, sample, cfg):
    est = unet.forward(weights, _net_input(sample, weights.dtype))[:, :, 0]
    return loss(est, sample.target, cfg)


def dataset_loss(weights, dataset, cfg):
    """Mean loss over a dataset without updating anything."""
    return float(np.mean([sample_loss(weights, s, cfg) for s in dataset]))


def train(dataset, topology, optimizer_cfg, epochs, batch, seed,
          dtype=np.float32, loss_cfg=None, init_scale=1.0):
    """Train from a fresh initialization; deterministic for a given seed."""
    if len(dataset) == 0:
        raise InvalidArgumentError("dataset is empty")
    if epochs < 1 or batch < 1:
        raise InvalidArgumentError("epochs and batch must be positive")
    cfg = loss_cfg or LossConfig(freq_bins=topology.freq_bins)
    weights = unet.init_weights(topology, seed=seed, dtype=dtype, scale=init_scale)
    opt = Optimizer(optimizer_cfg)
    rng = np.random.default_rng(seed)
    curve = [dataset_loss(weights, dataset, cfg)]
    for _ in range(epochs):
        order = rng.permutation(len(dataset))
        epoch_losses = []
        for start in range(0, len(order), batch):
            chunk = [dataset[i] for i in order[start:start + batch]]
            grads_sum = None
            batch_loss = 0.0
            for sample in chunk:
                x = _net_input(sample, dtype)
                est, cache = unet.forward_with_cache(weights, x)
                batch_loss += loss(est[:, :, 0], sample.target, cfg)
                d_est = loss_gradient(est[:, :, 0], sample.target, cfg)
                g = unet.backward(weights, cache, d_est[:, :, None].astype(dtype))
                if grads_sum is None:
                    grads_sum = g
                else:
                    for k in grads_sum:
                        grads_sum[k] = grads_sum[k] + g[k]
            scale = 1.0 / len(chunk)
            grads = {k: v * scale for k, v in grads_sum.items()}
            weights = opt.step(weights, grads)
            epoch_losses.append(batch_loss * scale)
        curve.append(float(np.mean(epoch_losses)))
    return TrainResult(weights, curve)


# ---------------------------------------------------------------------------
# hyperparameter search


@dataclass(frozen=True)
class SearchSpace:
    optimizers: Tuple[str, ...] = ("nadam", "sgd", "adam")
    learning_rates: Tuple[float, ...] = (1e-3, 1e-4, 1e-5)
    layouts: Tuple[Tuple[int, int], ...] = ((4, 3), (3, 2))
    residual_configs: Tuple[str, ...] = (unet.CONF1, unet.CONF2)
    base_filters: Tuple[int, ...] = (8, 16)
    residual_depth: int = 2

    def grid(self):
        return list(itertools.product(self.optimizers, self.learning_rates,
                                      self.layouts, self.residual_configs,
                                      self.base_filters))


class TrialResult(NamedTuple):
    optimizer: str
    learning_rate: float
    layout: Tuple[int, int]
    residual_config: str
    base_filters: int
    final_loss: float


def random_search(space, budget, toy_dataset, seed, epochs=2, batch=1,
                  dtype=np.float32):
    """Sample grid points without replacement, train each, rank by loss."""
    grid = space.grid()
    if budget <= 0:
        raise InvalidArgumentError("search budget must be positive")
    if budget > len(grid):
        raise InvalidArgumentError(f"budget {budget} exceeds grid size {len(grid)}")
    if len(toy_dataset) == 0:
        raise InvalidArgumentError("toy dataset is empty")
    freq, frames = toy_dataset[0].target.shape
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(grid), size=budget, replace=False)
    results = []
    for trial, gi in enumerate(picks):
        opt_kind, lr, (enc, dec), conf, f0 = grid[gi]
        topo = unet.NetTopology(num_encoders=enc, num_decoders=dec,
                                base_filters=f0, residual_config=conf,
                                residual_depth=space.residual_depth,
                                in_channels=2, freq_bins=freq, time_frames=frames)
        cfg = LossConfig(freq_bins=freq, tf_frames=min(8, frames))
        res = train(toy_dataset, topo, OptimizerConfig(kind=opt_kind, learning_rate=lr),
                    epochs=epochs, batch=batch, seed=seed + trial,
                    dtype=dtype, loss_cfg=cfg)
        final = dataset_loss(res.weights, toy_dataset, cfg)
        results.append(TrialResult(opt_kind, lr, (enc, dec), conf, f0, final))
    results.sort(key=lambda r: r.final_loss)
    return results


def format_search_report(results):
    """Delimited text table of ranked trials."""
    lines = ["rank\toptimizer\tlr\tlayout\tresidual\tF0\tloss"]
    for i, r in enumerate(results, 1):
        lines.append(f"{i}\t{r.optimizer}\t{r.learning_rate:g}\t"
                     f"{r.layout[0]}-{r.layout[1]}\t{r.residual_config}\t"
                     f"{r.base_filters}\t{r.final_loss:.6f}")
    return "\n".join(lines)
