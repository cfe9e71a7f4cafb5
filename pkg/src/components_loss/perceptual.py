"""LPC analysis, CELP weighting filter, one-third octave bands and a
simplified PESQ-style loudness model."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .config import SAMPLE_RATE, STOI_BANDS, LoudnessConfig
from .stft import periodic_hann

WHITE_NOISE_CORRECTION = 1.0 + 1e-9


def levinson_durbin(r: np.ndarray, order: int):
    """Predictor coefficients a(1..order) and reflection coefficients.

    Sign convention: x(n) is predicted by sum_i a(i) x(n - i).
    """
    r = np.asarray(r, dtype=float)
    a = np.zeros(order)
    k = np.zeros(order)
    err = r[0]
    if err <= 0:
        return a, k
    for i in range(order):
        acc = r[i + 1] - np.dot(a[:i], r[i:0:-1])
        k[i] = acc / err
        a[:i] = a[:i] - k[i] * a[:i][::-1]
        a[i] = k[i]
        err *= 1.0 - k[i] ** 2
        if err <= 0:
            break
    return a, k


def autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    n = x.size
    full = np.correlate(x, x, mode="full")[n - 1:]
    r = np.zeros(max_lag + 1)
    m = min(max_lag + 1, n)
    r[:m] = full[:m]
    return r


def lpc_from_frame(frame, order: int = 16, window: bool = True, return_reflection: bool = False):
    x = np.asarray(frame, dtype=float)
    if window:
        x = x * periodic_hann(x.size)
    r = autocorrelation(x, order)
    r[0] *= WHITE_NOISE_CORRECTION
    a, k = levinson_durbin(r, order)
    if return_reflection:
        return a, k
    return a


def _predictor_response(a: np.ndarray, gamma: float, dft_size: int) -> np.ndarray:
    """1 - sum_i a(i) gamma^i e^{-j 2 pi k i / K} for k = 0..K/2."""
    i = np.arange(1, a.size + 1)
    k = np.arange(dft_size // 2 + 1)
    basis = np.exp(-2j * np.pi * np.outer(k, i) / dft_size)
    return 1.0 - basis @ (a * gamma ** i)


def weighting_response(a, gamma1: float, gamma2: float, dft_size: int = 256) -> np.ndarray:
    """Squared magnitude of (1 - A(z/gamma1)) / (1 - A(z/gamma2)) on the DFT grid."""
    a = np.asarray(a, dtype=float)
    num = _predictor_response(a, gamma1, dft_size)
    den = _predictor_response(a, gamma2, dft_size)
    den_mag2 = den.real ** 2 + den.imag ** 2
    if np.min(den_mag2) < 1e-24:
        raise FloatingPointError("weighting filter denominator vanishes")
    return (num.real ** 2 + num.imag ** 2) / den_mag2


def frame_weighting(S_half: np.ndarray, dft_size: int, order: int = 16,
                    gamma1: float = 0.92, gamma2: float = 0.6) -> np.ndarray:
    """Per-frame |W_l(k)|^2 from complex clean-speech STFT frames.

    The frames are already Hann-windowed by the analysis, so the LPC is run
    on the inverse DFT of each frame without a second window.
    """
    time_frames = np.fft.irfft(np.asarray(S_half)[:, : dft_size // 2 + 1], n=dft_size, axis=1)
    out = np.empty((time_frames.shape[0], dft_size // 2 + 1))
    for ell, frame in enumerate(time_frames):
        a = lpc_from_frame(frame, order, window=False)
        out[ell] = weighting_response(a, gamma1, gamma2, dft_size)
    return out


@dataclass
class OctaveBandMap:
    centers: np.ndarray
    bands: list[tuple[int, int]]
    n_bins: int

    @property
    def n_bands(self) -> int:
        return len(self.bands)

    @cached_property
    def matrix(self) -> np.ndarray:
        m = np.zeros((self.n_bands, self.n_bins))
        for b, (lo, hi) in enumerate(self.bands):
            m[b, lo:hi] = 1.0
        return m

    def to_dict(self) -> dict:
        return {"centers_hz": self.centers.tolist(), "bands": [list(b) for b in self.bands],
                "n_bins": self.n_bins}


def octave_band_map(dft_size: int = 256, fs: int = SAMPLE_RATE, n_bands: int = STOI_BANDS,
                    lowest_center: float = 150.0) -> OctaveBandMap:
    """One-third octave bands as contiguous DFT bin ranges [lo, hi).

    Edges sit 1/6 octave either side of each center and are rounded to the
    nearest bin; a band that would round empty is widened by one bin. Bands
    that no longer fit below Nyquist (small K) are dropped.
    """
    df = fs / dft_size
    nyquist_bin = dft_size // 2
    centers = lowest_center * 2.0 ** (np.arange(n_bands) / 3.0)
    bands = []
    prev_hi = 1
    for c in centers:
        lo = max(int(np.round(c * 2 ** (-1 / 6) / df)), prev_hi)
        hi = max(int(np.round(c * 2 ** (1 / 6) / df)), lo + 1)
        if hi > nyquist_bin + 1:
            break
        bands.append((lo, hi))
        prev_hi = hi
    return OctaveBandMap(centers[: len(bands)], bands, dft_size // 2 + 1)


def octave_compress(mag: np.ndarray, band_map: OctaveBandMap) -> np.ndarray:
    """sqrt of the band energy; works on a single frame or an L x bins array."""
    power = np.asarray(mag, dtype=float) ** 2
    return np.sqrt(power @ band_map.matrix.T)


def hz_to_bark(f):
    f = np.asarray(f, dtype=float)
    return 13.0 * np.arctan(0.00076 * f) + 3.5 * np.arctan((f / 7500.0) ** 2)


def hearing_threshold_db(f):
    """Absolute threshold of hearing in dB SPL (Terhardt approximation)."""
    khz = np.maximum(np.asarray(f, dtype=float), 20.0) / 1000.0
    return 3.64 * khz ** -0.8 - 6.5 * np.exp(-0.6 * (khz - 3.3) ** 2) + 1e-3 * khz ** 4


@dataclass
class LoudnessMap:
    assignment: np.ndarray
    thresholds: np.ndarray
    centers_hz: np.ndarray
    config: LoudnessConfig = field(default_factory=LoudnessConfig)

    @property
    def n_bands(self) -> int:
        return self.assignment.shape[0]


def loudness_map(dft_size: int = 256, fs: int = SAMPLE_RATE,
                 config: LoudnessConfig | None = None) -> LoudnessMap:
    """Equal-Bark bands over [0, fs/2]; empty bands are dropped."""
    config = config or LoudnessConfig()
    n_bins = dft_size // 2 + 1
    freqs = np.arange(n_bins) * fs / dft_size
    barks = hz_to_bark(freqs)
    edges = np.linspace(0.0, hz_to_bark(fs / 2.0), config.n_bands + 1)
    index = np.clip(np.searchsorted(edges, barks, side="right") - 1, 0, config.n_bands - 1)
    used = np.unique(index)
    assignment = (index[None, :] == used[:, None]).astype(float)
    centers = assignment @ freqs / assignment.sum(axis=1)
    # Full-scale sinusoid through a periodic Hann: peak bin K/4, neighbours K/8.
    full_scale_power = 1.5 * (dft_size / 4.0) ** 2
    thresholds = full_scale_power * 10.0 ** ((hearing_threshold_db(centers) - config.full_scale_spl_db) / 10.0)
    return LoudnessMap(assignment, thresholds, centers, config)


def loudness_from_power(power: np.ndarray, lmap: LoudnessMap, with_derivative: bool = False):
    cfg = lmap.config
    t = lmap.thresholds
    g = cfg.zwicker_power
    above = power > t
    ratio = np.where(above, 0.5 + 0.5 * power / t, 1.0)
    prefactor = cfg.loudness_scale * (t / 0.5) ** g
    loud = np.where(above, prefactor * (ratio ** g - 1.0), 0.0)
    if not with_derivative:
        return loud
    dloud = np.where(above, prefactor * g * ratio ** (g - 1.0) * 0.5 / t, 0.0)
    return loud, dloud


def loudness_transform(mag: np.ndarray, lmap: LoudnessMap) -> np.ndarray:
    """Band loudness of one frame (or L frames) of DFT magnitudes."""
    power = (np.asarray(mag, dtype=float) ** 2) @ lmap.assignment.T
    return loudness_from_power(power, lmap)
