import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from components_loss.config import StftConfig
from components_loss.stft import (
    analyze,
    extend_bins,
    extend_magnitudes,
    frame_count,
    mirror_mask,
    ola_window_sum,
    periodic_hann,
    synthesize,
    truncate_bins,
)


def test_periodic_hann_values():
    w = periodic_hann(4)
    assert np.allclose(w, [0.0, 0.5, 1.0, 0.5])
    n = np.arange(256)
    assert np.allclose(periodic_hann(256), 0.5 - 0.5 * np.cos(2 * np.pi * n / 256))


def test_config_validation():
    assert StftConfig().n_bins == 129
    with pytest.raises(ValueError):
        StftConfig(dft_size=256, hop=64)
    with pytest.raises(ValueError):
        StftConfig(dft_size=256, hop=128, k_in=128)


def test_dc_frame_oracle():
    x = np.ones(1024)
    X = analyze(x)
    # a fully interior frame sees the whole window, whose sum is K/2
    assert X.data[3, 0].real == pytest.approx(128.0, abs=1e-12)
    assert np.max(np.abs(X.data[3, 1:2])) == pytest.approx(64.0, abs=1e-12)
    assert abs(X.data[3, 255]) == pytest.approx(64.0, abs=1e-12)
    assert np.max(np.abs(X.data[3, 2:255])) < 1e-12


def test_frames_cover_signal():
    cfg = StftConfig()
    for n in (1, 127, 128, 129, 1000, 16000):
        L = frame_count(n, cfg)
        assert (L - 1) * cfg.hop + cfg.dft_size >= n + 2 * cfg.hop


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5000), st.integers(0, 2**31))
def test_round_trip(n, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    assert np.max(np.abs(synthesize(analyze(x)) - x)) < 1e-10


@pytest.mark.parametrize("K", [16, 64, 512])
def test_round_trip_other_sizes(K):
    cfg = StftConfig.for_size(K)
    x = np.random.default_rng(K).standard_normal(3000)
    assert np.max(np.abs(synthesize(analyze(x, cfg)) - x)) < 1e-10


def test_ola_interior_is_constant():
    cfg = StftConfig()
    total = ola_window_sum(cfg, 20)
    interior = total[cfg.dft_size: -cfg.dft_size]
    assert np.var(interior) < 1e-12
    assert np.allclose(interior, 1.0)


def test_half_spectrum_symmetry():
    X = analyze(np.random.default_rng(0).standard_normal(2000))
    assert np.allclose(X.data[:, 129:], np.conj(X.data[:, 127:0:-1]))


def test_mirror_mask():
    m = np.arange(1, 10, dtype=float).reshape(1, 9)
    full = mirror_mask(m, 16)
    assert full.shape == (1, 16)
    assert full[0, 9:].tolist() == [8, 7, 6, 5, 4, 3, 2]


def test_extended_bins_mirror():
    X = analyze(np.random.default_rng(1).standard_normal(2000))
    mag = extend_bins(X)
    assert mag.shape[1] == 132
    assert np.allclose(mag[:, 129:132], mag[:, [127, 126, 125]])
    assert np.allclose(extend_magnitudes(X.magnitude(), 132), mag, rtol=1e-13, atol=0)


def test_synthesize_rejects_bad_shape():
    X = analyze(np.zeros(1000))
    with pytest.raises(ValueError):
        synthesize(X.with_data(X.data[:-1]))


def test_cosine_bin_oracle():
    K, k0 = 256, 16
    x = np.cos(2 * np.pi * k0 * np.arange(4 * K) / K)
    X = analyze(x)
    # frame 2 lies fully inside the signal
    assert abs(X.data[2, k0]) == pytest.approx(K / 4, abs=1e-9)
    assert abs(X.data[2, K - k0]) == pytest.approx(K / 4, abs=1e-9)


def test_extended_bins_match_direct_dft():
    x = np.random.default_rng(2).standard_normal(1000)
    X = analyze(x)
    # one hop of head padding: frame 3 covers x[256:512]
    seg = x[256:512]
    n = np.arange(256)
    w = periodic_hann(256)
    direct = np.abs([np.sum(w * seg * np.exp(-2j * np.pi * k * n / 256)) for k in range(132)])
    assert np.allclose(extend_bins(X)[3], direct, atol=1e-9)


def test_truncate_bins():
    m = np.random.default_rng(3).uniform(size=(4, 132))
    out = truncate_bins(m)
    assert out.shape == (4, 129)
    assert np.array_equal(out, m[:, :129])
