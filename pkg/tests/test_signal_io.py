import json
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from components_loss import synth
from components_loss.p56 import SilentSignalError, active_speech_level
from components_loss.signal_io import (
    ChannelCountError,
    ManifestError,
    SampleRateError,
    SignalBuffer,
    WavFormatError,
    load_manifest,
    measured_snr,
    mix_at_snr,
    read_wav,
    write_wav,
)


def _raw_wav(path, pcm, rate=16000, channels=1, width=2):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(width)
        wf.setframerate(rate)
        wf.writeframes(np.asarray(pcm).tobytes())


def test_zero_file_reads_as_zeros(tmp_path):
    _raw_wav(tmp_path / "z.wav", np.zeros(100, dtype="<i2"))
    buf = read_wav(tmp_path / "z.wav")
    assert buf.sample_rate == 16000
    assert np.array_equal(buf.samples, np.zeros(100))


def test_single_sample_scaling(tmp_path):
    _raw_wav(tmp_path / "h.wav", np.array([16384], dtype="<i2"))
    assert read_wav(tmp_path / "h.wav").samples.tolist() == [0.5]


@pytest.mark.parametrize(
    "kwargs, error",
    [
        ({"rate": 8000}, SampleRateError),
        ({"channels": 2}, ChannelCountError),
        ({"width": 1}, WavFormatError),
    ],
)
def test_format_errors_are_distinct(tmp_path, kwargs, error):
    pcm = np.zeros(32, dtype="<i2" if kwargs.get("width", 2) == 2 else "u1")
    _raw_wav(tmp_path / "bad.wav", pcm, **kwargs)
    with pytest.raises(error):
        read_wav(tmp_path / "bad.wav")


def test_write_zeros_and_clip_count(tmp_path):
    info = write_wav(np.zeros(10), tmp_path / "z.wav")
    assert info["clipped"] == 0
    assert not read_wav(tmp_path / "z.wav").samples.any()
    info = write_wav(np.array([1.5]), tmp_path / "c.wav")
    assert info["clipped"] == 1
    with wave.open(str(tmp_path / "c.wav")) as wf:
        assert np.frombuffer(wf.readframes(1), "<i2")[0] == 32767


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_within_quantization(tmp_path_factory, seed):
    x = np.random.default_rng(seed).uniform(-0.999, 0.999, 500)
    path = tmp_path_factory.mktemp("rt") / "x.wav"
    write_wav(x, path)
    assert np.max(np.abs(read_wav(path).samples - x)) <= 2.0 ** -15


def test_buffer_rejects_wrong_rate_and_nan():
    with pytest.raises(SampleRateError):
        SignalBuffer(np.zeros(4), 8000)
    with pytest.raises(ValueError):
        SignalBuffer(np.array([0.0, np.nan]))


@pytest.fixture(scope="module")
def speech():
    return synth.speech_like(2.0, seed=5)


@pytest.mark.parametrize("snr", [-5, 0, 5, 10, 15, 20])
def test_mix_hits_requested_snr(speech, snr):
    noise = synth.noise("white", speech.size + 1000, seed=1)
    mix = mix_at_snr(speech, noise, snr, seed=2)
    assert abs(measured_snr(mix.s, mix.d) - snr) < 0.01
    assert np.array_equal(mix.y.samples, mix.s.samples + mix.d.samples)
    assert np.array_equal(mix.s.samples, speech)


def test_mix_gain_symmetric_case():
    # speech active level 0 dB and unit-power noise: gain 1 at 0 dB
    t = np.arange(32000)
    tone = np.sqrt(2) * np.sin(2 * np.pi * 440 * t / 16000)
    level = active_speech_level(tone)
    noise = np.ones(32000) * 10 ** (level / 20)
    assert mix_at_snr(tone, noise, 0.0).gain == pytest.approx(1.0, rel=1e-12)


def test_mix_gain_scales_by_ten_per_20_db(speech):
    noise = synth.noise("pink", speech.size, seed=4)
    g0 = mix_at_snr(speech, noise, 0.0).gain
    g20 = mix_at_snr(speech, noise, 20.0).gain
    assert g0 / g20 == pytest.approx(10.0, rel=1e-12)


def test_mix_errors(speech):
    with pytest.raises(SilentSignalError):
        mix_at_snr(np.zeros(1000), np.ones(2000), 0.0)
    with pytest.raises(SilentSignalError):
        mix_at_snr(speech, np.zeros(speech.size), 0.0)
    with pytest.raises(ValueError):
        mix_at_snr(speech, np.ones(speech.size), np.inf)
    with pytest.raises(ValueError):
        mix_at_snr(speech, np.ones(10), 0.0)


def test_noise_segment_depends_on_seed(speech):
    noise = synth.noise("white", speech.size * 2, seed=9)
    a = mix_at_snr(speech, noise, 5.0, seed=1).d.samples
    b = mix_at_snr(speech, noise, 5.0, seed=1).d.samples
    c = mix_at_snr(speech, noise, 5.0, seed=2).d.samples
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_manifest_round_trip_and_errors(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps([{"clean_path": "a.wav", "noise_path": "b.wav", "snr_db": 5, "seed": 1}]))
    (spec,) = load_manifest(path)
    assert spec.snr_db == 5.0 and spec.seed == 1
    path.write_text(json.dumps([{"clean_path": "a", "noise_path": "b", "snr_db": "loud"}]))
    with pytest.raises(ManifestError, match="row 0"):
        load_manifest(path)
