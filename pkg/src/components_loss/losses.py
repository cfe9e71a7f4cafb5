"""Mask-domain losses with analytic gradients.

Every loss takes the real mask M (L x bins) and the magnitude spectra it
acts on. Because |S_hat| = M |Y|, |S_tilde| = M |S| and |D_tilde| = M |D| for
nonnegative masks, gradients with respect to M are available in closed
form. ``grad`` is the gradient of the sum of the per-frame losses; ``total``
is their mean, so d(total)/dM = grad / len(per_frame).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .components import check_mask
from .config import STOI_N, LossWeights
from .perceptual import (
    LoudnessMap,
    OctaveBandMap,
    frame_weighting,
    loudness_from_power,
    loudness_map,
    octave_band_map,
)
from .stft import SpectralFrames

NORM_EPS = 1e-12


@dataclass
class LossResult:
    per_frame: np.ndarray
    total: float
    grad: np.ndarray

    def report(self, loss_name: str, weights: LossWeights | None = None) -> dict:
        return {
            "loss_name": loss_name,
            "weights": weights.to_dict() if weights is not None else None,
            "per_frame": self.per_frame.tolist(),
            "total": self.total,
        }


def _result(per_frame: np.ndarray, grad: np.ndarray) -> LossResult:
    return LossResult(per_frame, float(np.mean(per_frame)), grad)


@dataclass
class LossInputs:
    """Magnitudes |Y|, |S|, |D| over the nonredundant bins, plus the optional
    per-frame perceptual weighting |W_l(k)|^2 for PW-FILT."""

    y: np.ndarray
    s: np.ndarray
    d: np.ndarray
    weighting: np.ndarray | None = None

    @property
    def shape(self):
        return self.y.shape

    @classmethod
    def from_frames(cls, Y: SpectralFrames, S: SpectralFrames, D: SpectralFrames,
                    weights: LossWeights | None = None, with_weighting: bool = False):
        weighting = None
        if with_weighting:
            w = weights or LossWeights()
            weighting = frame_weighting(S.half(), S.config.dft_size, w.lpc_order, w.gamma1, w.gamma2)
        return cls(Y.magnitude(), S.magnitude(), D.magnitude(), weighting)

    def rows(self, index) -> "LossInputs":
        weighting = None if self.weighting is None else self.weighting[index]
        return LossInputs(self.y[index], self.s[index], self.d[index], weighting)


def mse_loss(mask, y, s) -> LossResult:
    mask = check_mask(mask, np.shape(y))
    err = mask * y - s
    return _result(np.sum(err ** 2, axis=1), 2.0 * err * y)


def _speech_and_noise_terms(mask, s, d):
    speech_err = mask * s - s
    speech = np.sum(speech_err ** 2, axis=1)
    noise = np.sum((mask * d) ** 2, axis=1)
    return speech, noise, 2.0 * speech_err * s, 2.0 * mask * d ** 2


def cl2_loss(mask, s, d, alpha: float = 0.5) -> LossResult:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    mask = check_mask(mask, np.shape(s))
    speech, noise, g_speech, g_noise = _speech_and_noise_terms(mask, s, d)
    per_frame = (1.0 - alpha) * speech + alpha * noise
    grad = (1.0 - alpha) * g_speech + alpha * g_noise
    return _result(per_frame, grad)


def noise_shape_term(mask, d):
    """Third 3CL term: squared distance between the frame-normalized filtered
    and unfiltered noise magnitudes, with its gradient.

    Frames where either norm is exactly zero contribute nothing.
    """
    filtered = mask * d
    f_energy = np.sum(filtered ** 2, axis=1, keepdims=True)
    d_energy = np.sum(d ** 2, axis=1, keepdims=True)
    valid = (f_energy > 0) & (d_energy > 0)
    f_norm = np.sqrt(f_energy + NORM_EPS)
    u = filtered / f_norm
    v = d / np.sqrt(d_energy + NORM_EPS)
    diff = u - v
    term = np.where(valid[:, 0], np.sum(diff ** 2, axis=1), 0.0)
    coupling = np.sum(diff * u, axis=1, keepdims=True)
    grad = 2.0 * d / f_norm * (diff - u * coupling)
    return term, np.where(valid, grad, 0.0)


def cl3_loss(mask, s, d, alpha: float = 0.1, beta: float = 0.8) -> LossResult:
    if alpha < 0 or beta < 0 or alpha + beta > 1.0:
        raise ValueError(f"need alpha, beta >= 0 and alpha + beta <= 1, got {alpha}, {beta}")
    mask = check_mask(mask, np.shape(s))
    speech, noise, g_speech, g_noise = _speech_and_noise_terms(mask, s, d)
    shape, g_shape = noise_shape_term(mask, d)
    per_frame = (1.0 - alpha - beta) * speech + alpha * noise + beta * shape
    grad = (1.0 - alpha - beta) * g_speech + alpha * g_noise + beta * g_shape
    return _result(per_frame, grad)


def pw_filt_loss(mask, y, s, weighting) -> LossResult:
    if weighting is None:
        raise ValueError("PW-FILT needs the per-frame weighting |W(k)|^2")
    mask = check_mask(mask, np.shape(y))
    err = mask * y - s
    return _result(np.sum(weighting * err ** 2, axis=1), 2.0 * weighting * err * y)


def _pesq_distortions(mask, y, s, lmap: LoudnessMap):
    """Symmetric and asymmetric loudness distortions per frame, their gradients
    with respect to the mask, and an integer code of the piecewise regime each
    band is in (used to keep finite-difference checks away from kinks)."""
    cfg = lmap.config
    A = lmap.assignment
    enh = mask * y
    p_enh = (enh ** 2) @ A.T
    p_ref = (s ** 2) @ A.T
    lx, dlx = loudness_from_power(p_enh, lmap, with_derivative=True)
    ls = loudness_from_power(p_ref, lmap)

    diff = lx - ls
    louder = diff > 0
    masked = cfg.masking_fraction * np.minimum(lx, ls)
    raw = np.abs(diff) - masked
    active = raw > 0
    dist = np.where(active, raw, 0.0)
    # d(dist)/d(lx) inside the active region
    ddist = np.where(active, np.sign(diff) - cfg.masking_fraction * (lx < ls), 0.0)

    ratio = ((lx + cfg.asym_offset) / (ls + cfg.asym_offset)) ** cfg.asym_exponent
    in_ramp = louder & (ratio >= cfg.asym_floor) & (ratio < cfg.asym_cap)
    capped = louder & (ratio >= cfg.asym_cap)
    factor = np.where(in_ramp, ratio, 0.0) + np.where(capped, cfg.asym_cap, 0.0)
    dfactor = np.where(in_ramp, cfg.asym_exponent * ratio / (lx + cfg.asym_offset), 0.0)

    sym = np.sum(dist ** 2, axis=1)
    asym = np.sum(factor * dist ** 2, axis=1)
    d_sym_dlx = 2.0 * dist * ddist
    d_asym_dlx = factor * d_sym_dlx + dfactor * dist ** 2

    # chain: lx <- band power <- |S_hat|^2 = (M |Y|)^2
    dpower_dmask = 2.0 * mask * y ** 2
    g_sym = ((d_sym_dlx * dlx) @ A) * dpower_dmask
    g_asym = ((d_asym_dlx * dlx) @ A) * dpower_dmask

    regime = (
        (p_enh > lmap.thresholds).astype(int)
        + 2 * active
        + 4 * louder
        + 8 * in_ramp
        + 16 * capped
    )
    return sym, asym, g_sym, g_asym, regime


def pw_pesq_loss(mask, y, s, weights: LossWeights | None = None,
                 lmap: LoudnessMap | None = None) -> LossResult:
    w = weights or LossWeights()
    mask = check_mask(mask, np.shape(y))
    lmap = lmap or loudness_map(2 * (np.shape(y)[1] - 1))
    mse = mse_loss(mask, y, s)
    sym, asym, g_sym, g_asym, _ = _pesq_distortions(mask, y, s, lmap)
    per_frame = w.lambda1 * mse.per_frame + w.lambda2 * (w.theta1 * sym + w.theta2 * asym)
    grad = w.lambda1 * mse.grad + w.lambda2 * (w.theta1 * g_sym + w.theta2 * g_asym)
    return _result(per_frame, grad)


def pesq_regime(mask, y, s, lmap: LoudnessMap | None = None) -> np.ndarray:
    lmap = lmap or loudness_map(2 * (np.shape(y)[1] - 1))
    return _pesq_distortions(np.asarray(mask, dtype=float), y, s, lmap)[4]


def envelope_correlation(ref_oct: np.ndarray, est_oct: np.ndarray, n: int = STOI_N,
                         with_grad: bool = False):
    """Correlation of mean-removed N-frame band envelopes for every frame
    l >= N-1. Returns an array (L-N+1) x B and, optionally, the gradient of
    the sum of all correlations with respect to est_oct (L x B).

    Envelopes with zero variance give correlation 0 and no gradient.
    """
    L, B = ref_oct.shape
    if L < n:
        raise ValueError(f"need at least {n} frames, got {L}")
    x = sliding_window_view(ref_oct, n, axis=0)
    yv = sliding_window_view(est_oct, n, axis=0)
    xc = x - x.mean(axis=2, keepdims=True)
    yc = yv - yv.mean(axis=2, keepdims=True)
    xn = np.sqrt(np.sum(xc ** 2, axis=2))
    yn = np.sqrt(np.sum(yc ** 2, axis=2))
    x_scale = np.sqrt(np.sum(x ** 2, axis=2))
    y_scale = np.sqrt(np.sum(yv ** 2, axis=2))
    valid = (xn > 1e-10 * x_scale) & (yn > 1e-10 * y_scale) & (xn > 0) & (yn > 0)
    xn_safe = np.where(valid, xn, 1.0)
    yn_safe = np.where(valid, yn, 1.0)
    corr = np.where(valid, np.sum(xc * yc, axis=2) / (xn_safe * yn_safe), 0.0)
    if not with_grad:
        return corr
    g_win = (xc / (xn_safe * yn_safe)[..., None]
             - (corr / yn_safe ** 2)[..., None] * yc)
    g_win = np.where(valid[..., None], g_win, 0.0)
    grad = np.zeros((L, B))
    n_win = L - n + 1
    for j in range(n):
        grad[j:j + n_win] += g_win[:, :, j]
    return corr, grad


def pw_stoi_loss(mask, y, s, band_map: OctaveBandMap | None = None, n: int = STOI_N) -> LossResult:
    """Negative mean band correlation of one-third octave envelopes.

    ``per_frame`` has one entry per frame l >= N-1.
    """
    mask = check_mask(mask, np.shape(y))
    L = mask.shape[0]
    if L < n:
        raise ValueError(f"PW-STOI needs at least N={n} frames, got {L}")
    band_map = band_map or octave_band_map(2 * (mask.shape[1] - 1))
    A = band_map.matrix
    enh = mask * y
    ref_oct = np.sqrt((s ** 2) @ A.T)
    est_oct = np.sqrt((enh ** 2) @ A.T)
    corr, g_oct = envelope_correlation(ref_oct, est_oct, n, with_grad=True)
    B = A.shape[0]
    per_frame = -np.mean(corr, axis=1)
    g_oct = -g_oct / B
    safe = np.where(est_oct > 0, est_oct, 1.0)
    g_oct = np.where(est_oct > 0, g_oct / safe, 0.0)
    grad = (g_oct @ A) * mask * y ** 2
    return _result(per_frame, grad)


def closed_form_2cl_mask(s, d, alpha: float = 0.5) -> np.ndarray:
    """Bin-wise minimizer of 2CL: (1-a)|S|^2 / ((1-a)|S|^2 + a|D|^2).

    Bins where the denominator vanishes get 0, except at alpha = 0 where any
    bin with speech gets 1.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    s2 = np.asarray(s, dtype=float) ** 2
    d2 = np.asarray(d, dtype=float) ** 2
    num = (1.0 - alpha) * s2
    den = num + alpha * d2
    out = np.zeros(np.broadcast(s2, d2).shape)
    np.divide(num, den, out=out, where=den > 0)
    if alpha == 0.0:
        out = np.where(s2 > 0, 1.0, 0.0)
    return out


def wiener_gain(s, d) -> np.ndarray:
    s2 = np.asarray(s, dtype=float) ** 2
    d2 = np.asarray(d, dtype=float) ** 2
    den = s2 + d2
    out = np.zeros(np.broadcast(s2, d2).shape)
    np.divide(s2, den, out=out, where=den > 0)
    return out


FRAMEWISE_LOSSES = ("mse", "2cl", "3cl", "pw-filt", "pw-pesq")


def compute_loss(name: str, mask, inputs: LossInputs, weights: LossWeights | None = None,
                 lmap: LoudnessMap | None = None, band_map: OctaveBandMap | None = None) -> LossResult:
    w = weights or LossWeights()
    if name == "mse":
        return mse_loss(mask, inputs.y, inputs.s)
    if name == "2cl":
        return cl2_loss(mask, inputs.s, inputs.d, w.alpha)
    if name == "3cl":
        return cl3_loss(mask, inputs.s, inputs.d, w.alpha, w.beta)
    if name == "pw-filt":
        return pw_filt_loss(mask, inputs.y, inputs.s, inputs.weighting)
    if name == "pw-pesq":
        return pw_pesq_loss(mask, inputs.y, inputs.s, w, lmap)
    if name == "pw-stoi":
        return pw_stoi_loss(mask, inputs.y, inputs.s, band_map)
    raise ValueError(f"unknown loss {name!r}")
