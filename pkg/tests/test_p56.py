import numpy as np
import pytest

from components_loss import synth
from components_loss.p56 import SilentSignalError, active_speech_level


def reference_level(x, fs=16000):
    """Sample-by-sample transcription of the P.56 method B loop."""
    g = np.exp(-1 / (fs * 0.03))
    hangover = round(0.2 * fs)
    thresholds = [2.0 ** j for j in range(-30, 1)]
    counts = [0] * len(thresholds)
    holds = [hangover + 1] * len(thresholds)
    p = q = 0.0
    energy = 0.0
    for v in x:
        energy += v * v
        p = g * p + (1 - g) * abs(v)
        q = g * q + (1 - g) * p
        for j, c in enumerate(thresholds):
            if q >= c:
                counts[j] += 1
                holds[j] = 0
            elif holds[j] < hangover:
                counts[j] += 1
                holds[j] += 1
    prev = None
    for j, c in enumerate(thresholds):
        if counts[j] == 0:
            gap = -np.inf
        else:
            level = 10 * np.log10(energy / counts[j])
            gap = level - 20 * np.log10(c) - 15.9
        if gap <= 0:
            if prev is None:
                return level
            pl, pg = prev
            return pl + pg / (pg - gap) * (level - pl)
        prev = (level, gap)
    raise AssertionError("no crossing")


def test_tone_level_is_its_rms():
    t = np.arange(16000)
    x = 0.1 * np.sin(2 * np.pi * 1000 * t / 16000)
    assert active_speech_level(x) == pytest.approx(20 * np.log10(0.1 / np.sqrt(2)), abs=0.2)


def test_gain_of_two_adds_6_02_db():
    x = synth.speech_like(2.0, seed=3)
    assert active_speech_level(2 * x) - active_speech_level(x) == pytest.approx(20 * np.log10(2), abs=0.01)


def test_inserted_silence_barely_changes_level():
    x = synth.speech_like(2.0, seed=4, floor_db=None)
    gappy = np.concatenate([x[:16000], np.zeros(16000), x[16000:], np.zeros(16000)])
    assert abs(active_speech_level(gappy) - active_speech_level(x)) < 0.3


def test_matches_sample_loop_reference():
    x = synth.speech_like(0.5, seed=8)
    assert active_speech_level(x) == pytest.approx(reference_level(x), abs=1e-9)


def test_silence_raises():
    with pytest.raises(SilentSignalError):
        active_speech_level(np.zeros(1000))
