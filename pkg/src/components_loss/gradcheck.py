"""Central finite-difference checks of the analytic mask gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import LOSS_NAMES, STOI_N, LossWeights, StftConfig, default_weights
from .losses import FRAMEWISE_LOSSES, LossInputs, compute_loss, pesq_regime
from .perceptual import loudness_map, octave_band_map
from .stft import analyze

STEP = 1e-6


def random_problem(rng: np.random.Generator, dft_size: int = 16, n_frames: int = 40,
                   weights: LossWeights | None = None):
    """Random speech/noise spectra with exactly ``n_frames`` frames and a
    random mask in [0.05, 1.5]."""
    config = StftConfig.for_size(dft_size)
    n = config.hop * (n_frames - 1)
    # log-uniform levels so speech- and noise-dominated frames both occur
    s = rng.standard_normal(n) * 10 ** rng.uniform(-1.0, 0.5)
    d = rng.standard_normal(n) * 10 ** rng.uniform(-1.0, 0.5)
    S, D, Y = analyze(s, config), analyze(d, config), analyze(s + d, config)
    inputs = LossInputs.from_frames(Y, S, D, weights, with_weighting=True)
    mask = rng.uniform(0.05, 1.5, inputs.shape)
    return inputs, mask


def numeric_gradient(loss: str, mask: np.ndarray, inputs: LossInputs, weights: LossWeights,
                     step: float = STEP, **maps) -> np.ndarray:
    """Central differences of the summed per-frame loss.

    For frame-wise losses one column is perturbed in all frames at once,
    since frame l's loss only depends on row l of the mask.
    """
    def frame_values(m):
        return compute_loss(loss, m, inputs, weights, **maps).per_frame

    grad = np.zeros_like(mask)
    if loss in FRAMEWISE_LOSSES:
        for k in range(mask.shape[1]):
            up, down = mask.copy(), mask.copy()
            up[:, k] += step
            down[:, k] -= step
            grad[:, k] = (frame_values(up) - frame_values(down)) / (2 * step)
        return grad
    for idx in np.ndindex(mask.shape):
        up, down = mask.copy(), mask.copy()
        up[idx] += step
        down[idx] -= step
        grad[idx] = (np.sum(frame_values(up)) - np.sum(frame_values(down))) / (2 * step)
    return grad


def kink_entries(mask, inputs: LossInputs, lmap, step: float = STEP) -> np.ndarray:
    """Entries whose +-step perturbation moves a PW-PESQ band across a kink."""
    base = pesq_regime(mask, inputs.y, inputs.s, lmap)
    out = np.zeros(mask.shape, dtype=bool)
    for k in range(mask.shape[1]):
        for delta in (step, -step):
            m = mask.copy()
            m[:, k] += delta
            changed = np.any(pesq_regime(m, inputs.y, inputs.s, lmap) != base, axis=1)
            out[:, k] |= changed
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-300)
    return float(np.linalg.norm(analytic - numeric) / scale)


@dataclass
class CheckResult:
    loss: str
    max_rel_error: float
    trials: int
    excluded: int

    def passed(self, tol: float) -> bool:
        return self.max_rel_error < tol


def check_loss(loss: str, trials: int = 100, seed: int = 0, dft_size: int = 16, n_frames: int = 40,
               weights: LossWeights | None = None) -> CheckResult:
    if loss not in LOSS_NAMES:
        raise ValueError(f"unknown loss {loss!r}")
    if loss == "pw-stoi" and n_frames < STOI_N:
        raise ValueError(f"pw-stoi needs at least {STOI_N} frames, got {n_frames}")
    weights = weights or default_weights(loss)
    rng = np.random.default_rng(seed)
    maps = {}
    if loss == "pw-pesq":
        maps["lmap"] = loudness_map(dft_size)
    if loss == "pw-stoi":
        maps["band_map"] = octave_band_map(dft_size)
    worst, excluded = 0.0, 0
    for _ in range(trials):
        inputs, mask = random_problem(rng, dft_size, n_frames, weights)
        analytic = compute_loss(loss, mask, inputs, weights, **maps).grad
        numeric = numeric_gradient(loss, mask, inputs, weights, **maps)
        keep = np.ones(mask.shape, dtype=bool)
        if loss == "pw-pesq":
            keep = ~kink_entries(mask, inputs, maps["lmap"])
            excluded += int(np.count_nonzero(~keep))
        worst = max(worst, relative_error(analytic[keep], numeric[keep]))
    return CheckResult(loss, worst, trials, excluded)


def check_all(trials: int = 100, seed: int = 0, dft_size: int = 16, n_frames: int = 40,
              losses=LOSS_NAMES, weights: LossWeights | None = None) -> list[CheckResult]:
    return [check_loss(name, trials, seed, dft_size, n_frames, weights) for name in losses]
