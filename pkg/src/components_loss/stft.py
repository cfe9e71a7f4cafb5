"""Periodic-Hann STFT analysis, overlap-add synthesis and bin extension."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import StftConfig


def periodic_hann(n: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


@dataclass
class SpectralFrames:
    """Complex STFT, L frames by K bins, plus what is needed to invert it."""

    data: np.ndarray
    config: StftConfig
    origin_length: int

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    def half(self) -> np.ndarray:
        """Nonredundant bins 0..K/2."""
        return self.data[:, : self.config.n_bins]

    def magnitude(self) -> np.ndarray:
        return np.abs(self.half())

    def with_data(self, data: np.ndarray) -> "SpectralFrames":
        return SpectralFrames(data, self.config, self.origin_length)


def padded_length(n: int, config: StftConfig) -> int:
    """Signal is padded by one hop at the head and zero-filled at the tail so
    every original sample is covered by two overlapping frames."""
    hop = config.hop
    body = n + 2 * hop
    n_hops = max(int(np.ceil((body - config.dft_size) / hop)), 0)
    return config.dft_size + n_hops * hop


def frame_count(n: int, config: StftConfig) -> int:
    return (padded_length(n, config) - config.dft_size) // config.hop + 1


def analyze(signal, config: StftConfig | None = None) -> SpectralFrames:
    config = config or StftConfig()
    x = np.asarray(signal, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("cannot analyze an empty signal")
    K, hop = config.dft_size, config.hop
    total = padded_length(x.size, config)
    padded = np.zeros(total)
    padded[hop:hop + x.size] = x
    n_frames = (total - K) // hop + 1
    idx = np.arange(n_frames)[:, None] * hop + np.arange(K)[None, :]
    frames = padded[idx] * periodic_hann(K)
    return SpectralFrames(np.fft.fft(frames, axis=1), config, x.size)


def synthesize(frames: SpectralFrames) -> np.ndarray:
    """Inverse DFT per frame and plain overlap-add.

    The periodic Hann at 50% overlap sums to one, so overlap-add of the
    analysis-windowed frames reconstructs the signal without a synthesis
    window.
    """
    config = frames.config
    K, hop = config.dft_size, config.hop
    data = np.asarray(frames.data)
    if data.ndim != 2 or data.shape[1] not in (K, config.n_bins):
        raise ValueError(f"frames must have {K} or {config.n_bins} bins, got shape {data.shape}")
    expected = frame_count(frames.origin_length, config)
    if data.shape[0] != expected:
        raise ValueError(f"expected {expected} frames for {frames.origin_length} samples, got {data.shape[0]}")
    time_frames = np.fft.irfft(data[:, : config.n_bins], n=K, axis=1)
    out = np.zeros(padded_length(frames.origin_length, config))
    for ell in range(data.shape[0]):
        out[ell * hop: ell * hop + K] += time_frames[ell]
    return out[hop: hop + frames.origin_length]


def ola_window_sum(config: StftConfig, n_frames: int) -> np.ndarray:
    """Overlap-added analysis/synthesis window product (synthesis window is 1)."""
    K, hop = config.dft_size, config.hop
    w = periodic_hann(K)
    out = np.zeros((n_frames - 1) * hop + K)
    for ell in range(n_frames):
        out[ell * hop: ell * hop + K] += w
    return out


def mirror_mask(mask: np.ndarray, dft_size: int) -> np.ndarray:
    """Extend a real L x (K/2+1) mask to all K bins by symmetry."""
    mask = np.asarray(mask, dtype=float)
    return np.concatenate([mask, mask[:, -2:0:-1]], axis=1)


def extend_bins(frames: SpectralFrames) -> np.ndarray:
    """Magnitudes of bins 0..k_in-1, the extra bins taken from the redundant half."""
    config = frames.config
    K, k_in = config.dft_size, config.k_in
    if k_in > K or k_in < config.n_bins:
        raise ValueError(f"k_in={k_in} incompatible with K={K}")
    return np.abs(frames.data[:, :k_in])


def extend_magnitudes(mag: np.ndarray, k_in: int) -> np.ndarray:
    """Same as extend_bins for an L x (K/2+1) magnitude array."""
    mag = np.asarray(mag)
    extra = k_in - mag.shape[1]
    if extra < 0 or extra > mag.shape[1] - 2:
        raise ValueError(f"cannot extend {mag.shape[1]} bins to {k_in}")
    return np.concatenate([mag, mag[:, -2:-2 - extra:-1]], axis=1)


def truncate_bins(mask: np.ndarray, n_bins: int = 129) -> np.ndarray:
    return np.asarray(mask)[:, :n_bins]


def write_spectrogram_csv(frames: SpectralFrames, path):
    L, K = frames.data.shape
    ell, k = np.meshgrid(np.arange(L), np.arange(K), indexing="ij")
    table = np.column_stack([ell.ravel(), k.ravel(), frames.data.real.ravel(), frames.data.imag.ravel()])
    np.savetxt(path, table, delimiter=",", header="frame,bin,re,im", comments="",
               fmt=["%d", "%d", "%.17g", "%.17g"])
