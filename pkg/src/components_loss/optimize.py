"""Direct per-utterance mask optimization under any of the losses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import OptimizeConfig
from .losses import NORM_EPS, LossInputs, compute_loss, wiener_gain
from .perceptual import LoudnessMap, OctaveBandMap, octave_band_map

MAX_STEP = 1e6
MIN_STEP = 1e-14


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, value):
        super().__init__(f"loss became non-finite ({value}) at iteration {iteration}")
        self.iteration = iteration


@dataclass
class OptimizeResult:
    mask: np.ndarray
    trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _curvature(inputs: LossInputs, config: OptimizeConfig, mask: np.ndarray,
               band_map: OctaveBandMap | None) -> np.ndarray:
    """Diagonal curvature of the loss in each mask entry, exact for the
    quadratic losses and a Gauss-Newton style estimate for the others."""
    w = config.weights
    y2, s2, d2 = inputs.y ** 2, inputs.s ** 2, inputs.d ** 2
    loss = config.loss
    if loss == "mse":
        h = 2.0 * y2
    elif loss == "2cl":
        h = 2.0 * ((1.0 - w.alpha) * s2 + w.alpha * d2)
    elif loss == "3cl":
        filtered = np.sum((mask * inputs.d) ** 2, axis=1, keepdims=True)
        h = 2.0 * ((1.0 - w.alpha - w.beta) * s2 + w.alpha * d2)
        h = h + 2.0 * w.beta * d2 / np.maximum(filtered, NORM_EPS)
    elif loss == "pw-filt":
        h = 2.0 * y2 * inputs.weighting
    elif loss == "pw-pesq":
        h = 2.0 * y2
    else:
        # envelope correlation is scale free: normalize by band energy
        band_map = band_map or octave_band_map(2 * (inputs.shape[1] - 1))
        A = band_map.matrix
        band_energy = ((mask * inputs.y) ** 2 @ A.T) @ A
        h = np.where(band_energy > 0, y2 / np.maximum(band_energy, 1e-300), 0.0)
        h = h * inputs.shape[0]
    floor = 1e-12 * float(h.max(initial=0.0)) + 1e-300
    return np.maximum(h, floor)


def optimize_mask(inputs: LossInputs, config: OptimizeConfig | None = None,
                  init: np.ndarray | None = None, lmap: LoudnessMap | None = None,
                  band_map: OctaveBandMap | None = None) -> OptimizeResult:
    """Projected gradient descent on the mask, clipped to [0, mask_max].

    Steps are scaled per bin by the inverse curvature of the magnitude terms;
    a step that raises the loss is halved until it does not, so the trace is
    nonincreasing. Stops when the relative decrease drops below ``tol``.
    """
    config = config or OptimizeConfig()

    def evaluate(m):
        return compute_loss(config.loss, m, inputs, config.weights, lmap, band_map)

    if init is not None:
        mask = np.clip(np.asarray(init, dtype=float), 0.0, config.mask_max)
    elif config.init == "ones":
        mask = np.ones(inputs.shape)
    elif config.init == "wiener":
        mask = wiener_gain(inputs.s, inputs.d)
    else:
        raise ValueError(f"unknown init policy {config.init!r}")

    result = evaluate(mask)
    value = result.total
    if not np.isfinite(value):
        raise DivergenceError(0, value)
    trace = [value]
    step = config.step_size
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        direction = -result.grad / _curvature(inputs, config, mask, band_map)
        while True:
            candidate = np.clip(mask + step * direction, 0.0, config.mask_max)
            trial = evaluate(candidate)
            if not np.isfinite(trial.total):
                raise DivergenceError(it, trial.total)
            if trial.total <= value:
                break
            step *= 0.5
            if step < MIN_STEP:
                converged = True
                break
        if converged:
            break
        decrease = value - trial.total
        mask, result, value = candidate, trial, trial.total
        trace.append(value)
        if decrease <= config.tol * max(abs(value), 1e-300):
            converged = True
            break
        step = min(2.0 * step, MAX_STEP)
    return OptimizeResult(mask, trace, it, converged)
