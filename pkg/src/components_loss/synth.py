"""Deterministic speech-like and noise signals for tests and desk-scale runs.

The "speech" is a sequence of voiced syllables (harmonic source with a
gliding pitch, shaped by formant resonators) and short fricative bursts,
separated by pauses. It has the on/off structure that the activity-based
level measurement and the segmental metrics rely on.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import butter, lfilter

from .config import SAMPLE_RATE

VOWEL_FORMANTS = (
    (730.0, 1090.0, 2440.0),
    (270.0, 2290.0, 3010.0),
    (530.0, 1840.0, 2480.0),
    (570.0, 840.0, 2410.0),
    (300.0, 870.0, 2240.0),
    (660.0, 1720.0, 2410.0),
)


def _resonator(x: np.ndarray, freq: float, bandwidth: float, fs: int) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth / fs)
    theta = 2.0 * np.pi * freq / fs
    a = [1.0, -2.0 * r * np.cos(theta), r * r]
    return lfilter([1.0 - r], a, x)


def _syllable(rng: np.random.Generator, n: int, fs: int) -> np.ndarray:
    f0_start = rng.uniform(90.0, 220.0)
    f0 = f0_start * np.linspace(1.0, rng.uniform(0.8, 1.2), n)
    phase = 2.0 * np.pi * np.cumsum(f0) / fs
    n_harm = int(4000.0 // f0_start)
    source = sum(np.sin(h * phase) / h for h in range(1, n_harm + 1))
    formants = VOWEL_FORMANTS[rng.integers(len(VOWEL_FORMANTS))]
    voiced = sum(_resonator(source, f, 60.0 + 0.05 * f, fs) for f in formants)
    env = np.sin(np.pi * np.arange(n) / n) ** 0.6
    return voiced * env


def _fricative(rng: np.random.Generator, n: int, fs: int) -> np.ndarray:
    b, a = butter(4, rng.uniform(2500.0, 4500.0) / (fs / 2), btype="high")
    return lfilter(b, a, rng.standard_normal(n)) * np.hanning(n) * 0.3


def speech_like(duration: float, seed: int = 0, fs: int = SAMPLE_RATE, level: float = 0.1,
                floor_db: float = -60.0) -> np.ndarray:
    """Speech-like signal of the given duration with RMS of active parts near
    ``level`` and a white recording floor ``floor_db`` below that level."""
    rng = np.random.default_rng(seed)
    total = int(round(duration * fs))
    out = np.zeros(total)
    pos = int(rng.uniform(0.05, 0.15) * fs)
    while pos < total:
        n = int(rng.uniform(0.12, 0.3) * fs)
        seg = _fricative(rng, n // 2, fs) if rng.random() < 0.2 else _syllable(rng, n, fs)
        seg = seg / (np.sqrt(np.mean(seg ** 2)) + 1e-12) * level * rng.uniform(0.5, 1.5)
        end = min(pos + seg.size, total)
        out[pos:end] += seg[: end - pos]
        pos = end + int(rng.uniform(0.05, 0.6) * fs)
    if floor_db is not None:
        out += level * 10 ** (floor_db / 20) * rng.standard_normal(total)
    return out


def noise(kind: str, n: int, seed: int = 0, fs: int = SAMPLE_RATE) -> np.ndarray:
    """Unit-power noise: 'white', 'pink', 'lowpass' (car-like) or 'babble'
    (amplitude-modulated speech-shaped)."""
    rng = np.random.default_rng(seed)
    if kind == "white":
        x = rng.standard_normal(n)
    elif kind == "pink":
        spec = np.fft.rfft(rng.standard_normal(n))
        f = np.arange(spec.size, dtype=float)
        f[0] = 1.0
        x = np.fft.irfft(spec / np.sqrt(f), n=n)
    elif kind == "lowpass":
        b, a = butter(2, 400.0 / (fs / 2))
        x = lfilter(b, a, rng.standard_normal(n))
    elif kind == "babble":
        x = sum(speech_like(n / fs, seed=int(rng.integers(1 << 30)), fs=fs) for _ in range(6))
        x = x + 0.05 * rng.standard_normal(n) * np.std(x)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return x / np.sqrt(np.mean(x ** 2))


NOISE_KINDS = ("white", "pink", "lowpass", "babble")


def corpus(count: int, duration: float = 2.0, seed: int = 0, snrs=(-5, 0, 5, 10, 15, 20),
           kinds=("white", "pink", "lowpass")):
    """``count`` (y, s, d) mixtures; SNR and noise kind cycle with the index."""
    from .signal_io import mix_at_snr

    triples = []
    for u in range(count):
        s = speech_like(duration, seed=seed + u)
        n = noise(kinds[u % len(kinds)], s.size + 4000, seed=seed + 10_000 + u)
        m = mix_at_snr(s, n, snrs[u % len(snrs)], seed=seed + u)
        triples.append((m.y.samples, m.s.samples, m.d.samples))
    return triples
