"""White-box decomposition: one real mask applied to mixture, speech and noise."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import StftConfig
from .stft import SpectralFrames, mirror_mask, synthesize


@dataclass
class WhiteBoxBundle:
    mask: np.ndarray
    s_hat: SpectralFrames
    s_tilde: SpectralFrames
    d_tilde: SpectralFrames

    @property
    def config(self) -> StftConfig:
        return self.s_hat.config


def check_mask(mask: np.ndarray, shape=None) -> np.ndarray:
    mask = np.asarray(mask, dtype=float)
    if shape is not None and mask.shape != tuple(shape):
        raise ValueError(f"mask shape {mask.shape} does not match spectra {tuple(shape)}")
    if not np.all(np.isfinite(mask)):
        raise ValueError("mask contains non-finite values")
    if np.any(mask < 0):
        raise ValueError("mask entries must be nonnegative")
    return mask


def apply_mask(Y: SpectralFrames, S: SpectralFrames, D: SpectralFrames, mask,
               check_additive: bool = True) -> WhiteBoxBundle:
    if not (Y.data.shape == S.data.shape == D.data.shape):
        raise ValueError("Y, S and D must share framing")
    if Y.config != S.config or Y.config != D.config:
        raise ValueError("Y, S and D must share the STFT configuration")
    if check_additive:
        scale = max(1.0, float(np.max(np.abs(Y.data), initial=0.0)))
        if np.max(np.abs(Y.data - S.data - D.data), initial=0.0) > 1e-10 * scale:
            raise ValueError("Y != S + D: spectra do not follow the additive model")
    mask = check_mask(mask, (Y.n_frames, Y.config.n_bins))
    full = mirror_mask(mask, Y.config.dft_size)
    return WhiteBoxBundle(
        mask=mask,
        s_hat=Y.with_data(Y.data * full),
        s_tilde=S.with_data(S.data * full),
        d_tilde=D.with_data(D.data * full),
    )


def components_to_time(bundle: WhiteBoxBundle):
    """Time-domain (s_hat, s_tilde, d_tilde)."""
    return synthesize(bundle.s_hat), synthesize(bundle.s_tilde), synthesize(bundle.d_tilde)


def write_mask_csv(mask: np.ndarray, path):
    """Header line ``frames,bins``, then the dimensions, then one row per frame."""
    mask = np.asarray(mask, dtype=float)
    with open(path, "w") as fh:
        fh.write("frames,bins\n")
        fh.write(f"{mask.shape[0]},{mask.shape[1]}\n")
        np.savetxt(fh, mask, delimiter=",", fmt="%.17g")


def read_mask_csv(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "frames,bins":
        raise ValueError(f"{path}: missing 'frames,bins' header")
    n_frames, n_bins = (int(v) for v in lines[1].split(","))
    rows = [line for line in lines[2:] if line.strip()]
    mask = np.loadtxt(rows, delimiter=",", ndmin=2) if rows else np.zeros((0, n_bins))
    if mask.shape != (n_frames, n_bins):
        raise ValueError(f"{path}: declared {n_frames}x{n_bins}, found {mask.shape}")
    return mask
