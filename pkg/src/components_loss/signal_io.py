"""WAV reading/writing, SNR-calibrated mixing and mixture manifests."""

from __future__ import annotations

import json
import wave
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .config import SAMPLE_RATE
from .p56 import SilentSignalError, active_speech_level


class WavFormatError(ValueError):
    """File is not 16-bit PCM."""


class SampleRateError(ValueError):
    """File is not sampled at 16 kHz."""


class ChannelCountError(ValueError):
    """File is not mono."""


class ManifestError(ValueError):
    pass


@dataclass
class SignalBuffer:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1)
        if self.sample_rate != SAMPLE_RATE:
            raise SampleRateError(f"sample rate must be {SAMPLE_RATE}, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("signal contains non-finite samples")

    def __len__(self):
        return self.samples.size

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)


@dataclass
class MixSpec:
    clean_path: str
    noise_path: str
    snr_db: float
    seed: int = 0

    def __post_init__(self):
        try:
            self.snr_db = float(self.snr_db)
        except (TypeError, ValueError):
            raise ManifestError(f"snr_db must be a number, got {self.snr_db!r}") from None
        if not np.isfinite(self.snr_db):
            raise ManifestError("snr_db must be finite")
        self.seed = int(self.seed)


def read_wav(path) -> SignalBuffer:
    with wave.open(str(path), "rb") as wf:
        if wf.getcomptype() != "NONE" or wf.getsampwidth() != 2:
            raise WavFormatError(f"{path}: expected 16-bit PCM")
        if wf.getnchannels() != 1:
            raise ChannelCountError(f"{path}: expected mono, got {wf.getnchannels()} channels")
        if wf.getframerate() != SAMPLE_RATE:
            raise SampleRateError(f"{path}: expected {SAMPLE_RATE} Hz, got {wf.getframerate()}")
        raw = wf.readframes(wf.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return SignalBuffer(pcm.astype(float) / 32768.0)


def write_wav(buffer, path) -> dict:
    """Write 16-bit PCM; out-of-range samples are clipped and counted."""
    x = np.asarray(buffer, dtype=float)
    scaled = np.round(x * 32768.0)
    clipped = int(np.count_nonzero((scaled > 32767) | (scaled < -32768)))
    pcm = np.clip(scaled, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(SAMPLE_RATE)
        wf.writeframes(pcm.tobytes())
    return {"path": str(path), "samples": int(pcm.size), "clipped": clipped}


class Mixture(NamedTuple):
    y: SignalBuffer
    s: SignalBuffer
    d: SignalBuffer
    gain: float


def noise_segment(noise, length: int, seed: int) -> np.ndarray:
    d = np.asarray(noise, dtype=float)
    if d.size < length:
        raise ValueError(f"noise ({d.size} samples) shorter than speech ({length})")
    offset = int(np.random.default_rng(seed).integers(0, d.size - length + 1))
    return d[offset:offset + length]


def mix_at_snr(speech, noise, snr_db: float, seed: int = 0):
    """Scale a noise segment so the mixture has the requested SNR.

    Speech level is the P.56 active level, noise level the plain mean power.
    Returns a Mixture (y, s, d, gain) where d is the scaled noise and y = s + d.
    """
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    s = np.asarray(speech, dtype=float)
    d = noise_segment(noise, s.size, seed)
    try:
        speech_db = active_speech_level(s)
    except SilentSignalError:
        raise SilentSignalError("speech is silent; SNR undefined") from None
    noise_power = float(np.mean(d ** 2))
    if noise_power == 0.0:
        raise SilentSignalError("noise segment is silent")
    gain = np.sqrt(10.0 ** ((speech_db - snr_db) / 10.0) / noise_power)
    d = gain * d
    y = s + d
    return Mixture(SignalBuffer(y), SignalBuffer(s), SignalBuffer(d), float(gain))


def measured_snr(s, d) -> float:
    return active_speech_level(s) - 10.0 * np.log10(np.mean(np.asarray(d, dtype=float) ** 2))


def load_manifest(path) -> list[MixSpec]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ManifestError("manifest must be a JSON array")
    specs = []
    for i, row in enumerate(data):
        try:
            specs.append(MixSpec(**row))
        except (TypeError, ManifestError) as exc:
            raise ManifestError(f"manifest row {i}: {exc}") from None
    return specs


def save_manifest(specs, path):
    Path(path).write_text(json.dumps([asdict(s) for s in specs], indent=2))
