import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from components_loss import synth
from components_loss.metrics import (
    alignment,
    delta_snr,
    evaluate,
    kurtosis,
    na_frames,
    na_seg,
    shift,
    ssdr,
    stoi_proxy,
    wlakr,
)


@pytest.fixture(scope="module")
def sd():
    s = synth.speech_like(2.0, seed=21)
    d = 0.05 * synth.noise("pink", s.size, seed=22)
    return s, d


def test_shift():
    x = np.arange(1.0, 6.0)
    assert shift(x, 2).tolist() == [3, 4, 5, 0, 0]
    assert shift(x, -2).tolist() == [0, 0, 1, 2, 3]


@settings(max_examples=15, deadline=None)
@given(st.integers(-64, 64))
def test_alignment_recovers_delay(lag):
    x = np.random.default_rng(5).standard_normal(3000)
    assert alignment(x, shift(x, -lag)) == lag


def test_delta_snr_gain_and_scaling(sd):
    s, d = sd
    assert delta_snr(s, d, s, d) == 0.0
    assert delta_snr(s, d, s, 0.5 * d) == pytest.approx(20 * np.log10(2), abs=1e-9)
    assert delta_snr(s, d, 3 * s, 3 * d) == pytest.approx(0.0, abs=0.01)


def test_ssdr_identity_and_clamps(sd):
    s, _ = sd
    assert ssdr(s, s) == 30.0
    assert ssdr(s, -10 * s, lag=0) == -10.0
    assert ssdr(s, -s, lag=0) == pytest.approx(-20 * np.log10(2), abs=1e-9)
    assert ssdr(s, 1.1 * s) == pytest.approx(20.0, abs=1e-9)


def test_ssdr_uses_alignment(sd):
    s, _ = sd
    assert ssdr(s, shift(s, -10)) == 30.0


def test_na_seg_oracle():
    d = np.ones(512)
    dt = np.concatenate([np.ones(256), 0.5 * np.ones(256)])
    # frames of 256 with hop 128: ratios 1, 1/(0.5*1+0.5*0.25)=1.6, 4
    ratios = na_frames(d, dt)
    assert ratios == pytest.approx([1.0, 1.6, 4.0])
    assert na_seg(d, dt) == pytest.approx(10 * np.log10(6.6 / 3))


def test_na_seg_zero_cases():
    d = np.concatenate([np.zeros(256), np.ones(256)])
    dt = np.concatenate([np.zeros(256), np.zeros(256)])
    r = na_frames(d, dt)
    assert r[0] == 1.0
    assert r[-1] == 1e12
    assert np.isfinite(na_seg(d, dt))


def test_na_seg_identity(sd):
    _, d = sd
    assert na_seg(d, d) == 0.0


def test_kurtosis_oracles():
    assert kurtosis(np.array([[1.0, -1.0, 1.0, -1.0]]))[0] == pytest.approx(1.0)
    g = np.random.default_rng(0).standard_normal((1, 200000))
    assert kurtosis(g)[0] == pytest.approx(3.0, abs=0.05)
    assert np.isnan(kurtosis(np.ones((1, 8))))[0]


def test_wlakr_identity_and_scale(sd):
    _, d = sd
    assert wlakr(d, d) == 0.0
    assert abs(wlakr(d, 0.3 * d)) < 1e-12


def test_wlakr_detects_peakier_noise():
    d = np.random.default_rng(1).standard_normal(8000)
    assert wlakr(d, d ** 3) > 0.5
    with pytest.raises(ValueError):
        wlakr(np.zeros(1000), np.zeros(1000))


def test_stoi_proxy(sd):
    s, d = sd
    assert stoi_proxy(s, s) == pytest.approx(1.0)
    assert stoi_proxy(s, s + 3 * d) < stoi_proxy(s, s + 0.3 * d)


def test_evaluate_identity(sd):
    s, d = sd
    rep = evaluate(s, d, s + d, s, d)
    assert rep.delta_snr_db == 0.0
    assert rep.ssdr_db == 30.0
    assert rep.na_seg_db == 0.0
    assert rep.wlakr == 0.0
    assert rep.stoi_proxy_component == pytest.approx(1.0)
    assert set(rep.table_row()) == {"delta_snr", "wlakr_abs", "ssdr", "na_seg", "stoi_proxy"}
    assert rep.to_dict()["pesq_s_hat"] is None


def _brute_frames(x, frame_len=256, hop=128):
    return [x[i:i + frame_len] for i in range(0, x.size - frame_len + 1, hop)]


def test_wiener_delta_snr_matches_definition(sd):
    from components_loss.components import apply_mask, components_to_time
    from components_loss.losses import wiener_gain
    from components_loss.p56 import active_speech_level
    from components_loss.stft import analyze

    s, d = sd
    d = d * 10 ** ((active_speech_level(s) - 10 * np.log10(np.mean(d ** 2))) / 20)  # 0 dB
    Y, S, D = analyze(s + d), analyze(s), analyze(d)
    mask = wiener_gain(S.magnitude(), D.magnitude())
    _, st_, dt = components_to_time(apply_mask(Y, S, D, mask))
    value = delta_snr(s, d, st_, dt)
    expected = (active_speech_level(st_) - 10 * np.log10(np.mean(dt ** 2))
                - active_speech_level(s) + 10 * np.log10(np.mean(d ** 2)))
    assert value > 0
    assert value == pytest.approx(expected, abs=1e-12)


def test_ssdr_constructed_20db(sd):
    s, _ = sd
    signs = np.random.default_rng(3).choice([-1.0, 1.0], s.size)
    assert ssdr(s, s + 0.1 * s * signs) == pytest.approx(20.0, abs=0.5)


def test_na_seg_brute_force(sd):
    _, d = sd
    dt = d * np.random.default_rng(4).uniform(0, 1, d.size)
    ratios = [np.sum(a ** 2) / np.sum(b ** 2) for a, b in zip(_brute_frames(d), _brute_frames(dt))]
    assert na_seg(d, dt) == pytest.approx(10 * np.log10(np.mean(ratios)), abs=1e-10)


def test_wlakr_scalar_reference(sd):
    from scipy.stats import kurtosis as sp_kurtosis

    _, d = sd
    dt = d * np.random.default_rng(5).uniform(0, 1, d.size)
    fd, ft = _brute_frames(d), _brute_frames(dt)
    energy = np.array([np.sum(f ** 2) for f in fd])
    keep = 10 * np.log10(energy) >= 10 * np.log10(energy.max()) - 40
    scores = [np.log10(sp_kurtosis(b, fisher=False) / sp_kurtosis(a, fisher=False))
              for a, b, k in zip(fd, ft, keep) if k]
    expected = np.sum(energy[keep] * scores) / np.sum(energy[keep])
    assert wlakr(d, dt) == pytest.approx(expected, abs=1e-12)


def test_stoi_proxy_independent_noise(sd):
    s, _ = sd
    other = np.random.default_rng(6).standard_normal(s.size) * 0.1
    assert stoi_proxy(s, other) < 0.2
