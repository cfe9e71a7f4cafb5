"""Desk-scale mask estimator: an MLP on normalized log-magnitude context
windows, trained by hand-written backpropagation through any frame-wise loss."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import StftConfig, TrainConfig
from .losses import FRAMEWISE_LOSSES, LossInputs, compute_loss
from .perceptual import loudness_map
from .stft import analyze, extend_magnitudes

CHECKPOINT_VERSION = 1
LOG_FLOOR = 1e-8
STD_FLOOR = 1e-8
LEAK = 0.01


class TrainingError(RuntimeError):
    pass


@dataclass
class Normalization:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


def fit_normalization(frames) -> Normalization:
    """Per-bin mean and population standard deviation (floored)."""
    x = np.asarray(frames, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a non-empty frames x bins array")
    if x.shape[0] < 2:
        raise ValueError("need at least two frames to fit normalization")
    return Normalization(x.mean(axis=0), np.maximum(x.std(axis=0), STD_FLOOR))


def log_features(mag_ext: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(mag_ext, LOG_FLOOR))


def context_windows(frames: np.ndarray, context: int) -> np.ndarray:
    """Stack ``context`` consecutive frames centered on each frame,
    replicating the first/last frame at the edges."""
    half = context // 2
    L = frames.shape[0]
    idx = np.clip(np.arange(L)[:, None] + np.arange(-half, half + 1)[None, :], 0, L - 1)
    return frames[idx].reshape(L, -1)


def leaky_relu(x):
    return np.where(x > 0, x, LEAK * x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class MlpMaskModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    normalization: Normalization | None = None
    k_in: int = 132
    context: int = 5

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    def parameters(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "MlpMaskModel":
        norm = None
        if self.normalization is not None:
            norm = Normalization(self.normalization.mean.copy(), self.normalization.std.copy())
        return MlpMaskModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                            norm, self.k_in, self.context)


def init_model(k_in: int = 132, context: int = 5, hidden=(256, 256), seed: int = 0) -> MlpMaskModel:
    """Weights uniform in +-1/sqrt(fan_in), biases zero."""
    rng = np.random.default_rng(seed)
    sizes = [k_in * context, *hidden, k_in]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpMaskModel(weights, biases, None, k_in, context)


def forward(model: MlpMaskModel, x: np.ndarray, keep: bool = False):
    """Mask rows in (0, 1) for a batch of normalized context windows."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.n_inputs:
        raise ValueError(f"expected {model.n_inputs} inputs, got {x.shape[1]}")
    acts, pre = [x], []
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = h @ w + b
        pre.append(a)
        h = sigmoid(a) if i == last else leaky_relu(a)
        acts.append(h)
    if keep:
        return h, (acts, pre)
    return h


def mlp_forward(model: MlpMaskModel, window: np.ndarray) -> np.ndarray:
    out = forward(model, window)
    return out[0] if np.ndim(window) == 1 else out


def backward(model: MlpMaskModel, cache, d_out: np.ndarray):
    """Gradients of a scalar loss w.r.t. (weights..., biases...) given
    d loss / d mask for every output unit."""
    acts, pre = cache
    n_layers = len(model.weights)
    gw, gb = [None] * n_layers, [None] * n_layers
    out = acts[-1]
    delta = d_out * out * (1.0 - out)
    for i in range(n_layers - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ model.weights[i].T) * np.where(pre[i - 1] > 0, 1.0, LEAK)
    return [*gw, *gb]


@dataclass
class FrameDataset:
    """Frames of one or more utterances: network inputs (unnormalized log
    magnitudes in context windows) and the loss targets."""

    features: np.ndarray
    targets: LossInputs
    utterance: np.ndarray

    def __len__(self):
        return self.features.shape[0]

    def subset(self, index) -> "FrameDataset":
        return FrameDataset(self.features[index], self.targets.rows(index), self.utterance[index])


def build_dataset(triples, loss: str = "2cl", weights=None, config: StftConfig | None = None,
                  context: int = 5) -> FrameDataset:
    """``triples`` is a sequence of (y, s, d) time signals."""
    config = config or StftConfig()
    feats, ys, ss, ds, ws, utt = [], [], [], [], [], []
    for u, (y, s, d) in enumerate(triples):
        Y, S, D = analyze(y, config), analyze(s, config), analyze(d, config)
        inputs = LossInputs.from_frames(Y, S, D, weights, with_weighting=(loss == "pw-filt"))
        mag_ext = extend_magnitudes(inputs.y, config.k_in)
        feats.append(context_windows(log_features(mag_ext), context))
        ys.append(inputs.y)
        ss.append(inputs.s)
        ds.append(inputs.d)
        if inputs.weighting is not None:
            ws.append(inputs.weighting)
        utt.append(np.full(inputs.y.shape[0], u))
    targets = LossInputs(np.vstack(ys), np.vstack(ss), np.vstack(ds), np.vstack(ws) if ws else None)
    return FrameDataset(np.vstack(feats), targets, np.concatenate(utt))


def split_by_utterance(dataset: FrameDataset, validation_fraction: float, seed: int = 0):
    utts = np.unique(dataset.utterance)
    order = np.random.default_rng(seed).permutation(utts)
    n_val = max(1, int(round(validation_fraction * utts.size))) if utts.size > 1 else 0
    val_utts = order[:n_val]
    is_val = np.isin(dataset.utterance, val_utts)
    return dataset.subset(np.flatnonzero(~is_val)), dataset.subset(np.flatnonzero(is_val))


def normalized_inputs(model: MlpMaskModel, features: np.ndarray) -> np.ndarray:
    """Normalize each of the context frames with the per-bin statistics."""
    norm = model.normalization
    if norm is None:
        return features
    x = features.reshape(features.shape[0], model.context, model.k_in)
    return norm.apply(x).reshape(features.shape[0], -1)


def predict_mask(model: MlpMaskModel, features: np.ndarray, n_bins: int) -> np.ndarray:
    return forward(model, normalized_inputs(model, features))[:, :n_bins]


def batch_loss_and_grads(model: MlpMaskModel, batch: FrameDataset, loss: str, weights, lmap=None):
    """Mean per-frame loss over the batch and its gradient for every parameter."""
    x = normalized_inputs(model, batch.features)
    out, cache = forward(model, x, keep=True)
    if not np.all(np.isfinite(out)):
        raise TrainingError("network produced a non-finite mask")
    n_bins = batch.targets.y.shape[1]
    result = compute_loss(loss, out[:, :n_bins], batch.targets, weights, lmap=lmap)
    d_out = np.zeros_like(out)
    d_out[:, :n_bins] = result.grad / len(batch)
    return result.total, backward(model, cache, d_out)


def dataset_loss(model: MlpMaskModel, data: FrameDataset, loss: str, weights, lmap=None) -> float:
    mask = predict_mask(model, data.features, data.targets.y.shape[1])
    return compute_loss(loss, mask, data.targets, weights, lmap=lmap).total


class HalvingSchedule:
    """Halve the learning rate once the validation loss has not decreased
    (below the best value so far) for ``patience`` consecutive epochs."""

    def __init__(self, learning_rate: float, patience: int = 2):
        self.lr = learning_rate
        self.patience = patience
        self.best = np.inf
        self.stale = 0

    def step(self, val_loss: float) -> bool:
        """Record one epoch; returns True when the rate was halved."""
        if val_loss < self.best:
            self.best = val_loss
            self.stale = 0
            return False
        self.stale += 1
        if self.stale >= self.patience:
            self.lr *= 0.5
            self.stale = 0
            return True
        return False


class _Adam:
    def __init__(self, params, b1=0.9, b2=0.999, eps=1e-8):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.b1, self.b2, self.eps, self.t = b1, b2, eps, 0

    def updates(self, grads, lr):
        self.t += 1
        out = []
        for i, g in enumerate(grads):
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            m_hat = self.m[i] / (1 - self.b1 ** self.t)
            v_hat = self.v[i] / (1 - self.b2 ** self.t)
            out.append(lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


@dataclass
class History:
    epoch: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)

    def rows(self):
        return list(zip(self.epoch, self.train_loss, self.val_loss, self.lr))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss", "lr"])
            for row in self.rows():
                writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


def mlp_train(model: MlpMaskModel, train: FrameDataset, val: FrameDataset, config: TrainConfig,
              dft_size: int = 256, progress=None):
    """Minibatch training; returns the trained model and its history.

    Normalization statistics are fitted on the training frames (center frame
    of each window) before the first epoch and frozen afterwards. ``lr`` in
    the history is the rate used during that epoch.
    """
    if config.loss not in FRAMEWISE_LOSSES:
        raise ValueError(f"loss {config.loss!r} is not frame-wise and cannot drive training")
    model = model.copy()
    k_in, ctx = model.k_in, model.context
    centre = train.features.reshape(len(train), ctx, k_in)[:, ctx // 2]
    model.normalization = fit_normalization(centre)
    lmap = loudness_map(dft_size) if config.loss == "pw-pesq" else None

    rng = np.random.default_rng(config.seed)
    schedule = HalvingSchedule(config.learning_rate, config.patience)
    adam = _Adam(model.parameters()) if config.optimizer == "adam" else None
    history = History()
    for epoch in range(1, config.epochs + 1):
        lr = schedule.lr
        order = rng.permutation(len(train))
        batch_losses, batch_sizes = [], []
        for start in range(0, len(train), config.batch_size):
            batch = train.subset(order[start:start + config.batch_size])
            value, grads = batch_loss_and_grads(model, batch, config.loss, config.weights, lmap)
            if not np.isfinite(value):
                raise TrainingError(f"non-finite training loss at epoch {epoch}, batch starting {start}")
            steps = adam.updates(grads, lr) if adam else [lr * g for g in grads]
            for p, step in zip(model.parameters(), steps):
                p -= step
            batch_losses.append(value)
            batch_sizes.append(len(batch))
        train_loss = float(np.average(batch_losses, weights=batch_sizes))
        val_loss = dataset_loss(model, val, config.loss, config.weights, lmap) if len(val) else train_loss
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        history.epoch.append(epoch)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.lr.append(lr)
        schedule.step(val_loss)
        if progress is not None:
            progress(epoch, train_loss, val_loss, lr)
    return model, history


def save_checkpoint(model: MlpMaskModel, path, meta: dict | None = None):
    norm = model.normalization
    payload = {
        "version": CHECKPOINT_VERSION,
        "k_in": model.k_in,
        "context": model.context,
        "layers": [w.shape[1] for w in model.weights],
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "normalization": None if norm is None else {"mean": norm.mean.tolist(), "std": norm.std.tolist()},
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path) -> MlpMaskModel:
    payload = json.loads(Path(path).read_text())
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    norm = payload["normalization"]
    return MlpMaskModel(
        [np.array(w) for w in payload["weights"]],
        [np.array(b) for b in payload["biases"]],
        None if norm is None else Normalization(np.array(norm["mean"]), np.array(norm["std"])),
        payload["k_in"],
        payload["context"],
    )


def estimate_mask(model: MlpMaskModel, y, config: StftConfig | None = None) -> np.ndarray:
    """Mask (L x K/2+1) predicted for a noisy time signal."""
    config = config or StftConfig()
    Y = analyze(y, config)
    feats = context_windows(log_features(extend_magnitudes(Y.magnitude(), config.k_in)), model.context)
    return predict_mask(model, feats, config.n_bins)
