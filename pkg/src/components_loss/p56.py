"""Active speech level after ITU-T P.56, method B."""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

TIME_CONSTANT = 0.03
HANGOVER = 0.2
MARGIN_DB = 15.9
# Thresholds are powers of two so that a 6.02 dB gain shifts the activity
# pattern by exactly one threshold step.
THRESHOLD_EXPONENTS = np.arange(-30, 1)


class SilentSignalError(ValueError):
    """Raised when the active level of an all-zero signal is requested."""


def _envelope(x: np.ndarray, fs: int) -> np.ndarray:
    g = np.exp(-1.0 / (fs * TIME_CONSTANT))
    p = lfilter([1.0 - g], [1.0, -g], np.abs(x))
    return lfilter([1.0 - g], [1.0, -g], p)


def _active_counts(q: np.ndarray, thresholds: np.ndarray, hangover: int) -> np.ndarray:
    n = np.arange(q.size)
    counts = np.empty(thresholds.size, dtype=np.int64)
    for j, c in enumerate(thresholds):
        above = q >= c
        last = np.where(above, n, -hangover - 1)
        last = np.maximum.accumulate(last)
        counts[j] = np.count_nonzero(n - last <= hangover)
    return counts


def active_speech_level(signal, fs: int = 16000, return_activity: bool = False):
    """Active speech level in dB relative to unit amplitude (mean-square).

    The two-stage exponential envelope is compared against a ladder of
    thresholds with hangover; the level is taken where the gap between the
    active mean-square level and the threshold equals the 15.9 dB margin,
    interpolated linearly between ladder rungs.
    """
    x = np.asarray(signal, dtype=float)
    energy = float(np.dot(x, x))
    if x.size == 0 or energy == 0.0:
        raise SilentSignalError("active speech level undefined for a silent signal")

    q = _envelope(x, fs)
    thresholds = 2.0 ** THRESHOLD_EXPONENTS.astype(float)
    counts = _active_counts(q, thresholds, int(round(HANGOVER * fs)))
    thresh_db = 20.0 * np.log10(thresholds)

    level_db = np.full(thresholds.size, np.inf)
    ok = counts > 0
    level_db[ok] = 10.0 * np.log10(energy / counts[ok])
    gap = level_db - thresh_db - MARGIN_DB

    below = np.flatnonzero(gap <= 0)
    if below.size == 0:
        raise SilentSignalError("signal never falls within the activity margin")
    j = below[0]
    if j == 0:
        level = level_db[0]
    else:
        frac = gap[j - 1] / (gap[j - 1] - gap[j])
        level = level_db[j - 1] + frac * (level_db[j] - level_db[j - 1])
    activity = counts[min(j, counts.size - 1)] / x.size
    if return_activity:
        return float(level), float(activity)
    return float(level)
