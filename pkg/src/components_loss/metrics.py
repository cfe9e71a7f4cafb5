"""White-box quality measures on time-domain components."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .config import STOI_N, StftConfig
from .p56 import SilentSignalError, active_speech_level
from .perceptual import octave_band_map
from .losses import envelope_correlation
from .stft import analyze

SSDR_MIN_DB = -10.0
SSDR_MAX_DB = 30.0
SPEECH_ACTIVE_OFFSET_DB = 35.0
NOISE_ELIGIBLE_OFFSET_DB = 40.0
MAX_LAG = 64
NA_RATIO_CAP = 1e12


def _frames(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    n_frames = 1 + (x.size - frame_len) // hop
    if n_frames < 1:
        raise ValueError(f"signal shorter than one frame ({x.size} < {frame_len})")
    idx = np.arange(n_frames)[:, None] * hop + np.arange(frame_len)[None, :]
    return x[idx]


def shift(x: np.ndarray, lag: int) -> np.ndarray:
    """x(n + lag), zero outside the signal."""
    out = np.zeros_like(x)
    if lag >= 0:
        out[: x.size - lag] = x[lag:]
    else:
        out[-lag:] = x[: x.size + lag]
    return out


def alignment(s, s_tilde, max_lag: int = MAX_LAG) -> int:
    """Lag maximizing sum_n s(n) s_tilde(n + lag) over |lag| <= max_lag."""
    s = np.asarray(s, dtype=float)
    st = np.asarray(s_tilde, dtype=float)
    lags = np.arange(-max_lag, max_lag + 1)
    xc = np.array([np.dot(s, shift(st, lag)) for lag in lags])
    # ties resolved towards zero lag
    best = np.flatnonzero(xc == xc.max())
    return int(lags[best[np.argmin(np.abs(lags[best]))]])


def snr_db(speech, noise) -> float:
    noise = np.asarray(noise, dtype=float)
    power = float(np.mean(noise ** 2))
    if power == 0.0:
        raise SilentSignalError("noise component is silent; SNR undefined")
    return active_speech_level(speech) - 10.0 * np.log10(power)


def delta_snr(s, d, s_tilde, d_tilde) -> float:
    for name, sig in (("s", s), ("d", d), ("s_tilde", s_tilde), ("d_tilde", d_tilde)):
        if np.size(sig) != np.size(s):
            raise ValueError(f"{name} length differs from s")
    return snr_db(s_tilde, d_tilde) - snr_db(s, d)


def speech_active_frames(s, frame_len: int = 256, hop: int = 128,
                         offset_db: float = SPEECH_ACTIVE_OFFSET_DB) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    level = active_speech_level(s)
    power = np.mean(_frames(s, frame_len, hop) ** 2, axis=1)
    with np.errstate(divide="ignore"):
        power_db = 10.0 * np.log10(power)
    return np.flatnonzero(power_db >= level - offset_db)


def ssdr(s, s_tilde, frame_len: int = 256, hop: int = 128, lag: int | None = None,
         return_frames: bool = False):
    s = np.asarray(s, dtype=float)
    st = np.asarray(s_tilde, dtype=float)
    if s.size != st.size:
        raise ValueError("s and s_tilde must have equal length")
    if lag is None:
        lag = alignment(s, st)
    active = speech_active_frames(s, frame_len, hop)
    if active.size == 0:
        raise ValueError("no speech-active frames")
    ref = _frames(s, frame_len, hop)[active]
    err = _frames(shift(st, lag), frame_len, hop)[active] - ref
    num = np.sum(ref ** 2, axis=1)
    den = np.sum(err ** 2, axis=1)
    with np.errstate(divide="ignore"):
        per_frame = 10.0 * np.log10(num / den)
    per_frame = np.clip(per_frame, SSDR_MIN_DB, SSDR_MAX_DB)
    value = float(np.mean(per_frame))
    if return_frames:
        return value, per_frame, active
    return value


def na_frames(d, d_tilde, frame_len: int = 256, hop: int = 128, lag: int = 0) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    dt = shift(np.asarray(d_tilde, dtype=float), lag)
    num = np.sum(_frames(d, frame_len, hop) ** 2, axis=1)
    den = np.sum(_frames(dt, frame_len, hop) ** 2, axis=1)
    ratio = np.ones_like(num)
    ok = den > 0
    ratio[ok] = num[ok] / den[ok]
    ratio[~ok & (num > 0)] = NA_RATIO_CAP
    return np.minimum(ratio, NA_RATIO_CAP)


def na_seg(d, d_tilde, frame_len: int = 256, hop: int = 128, lag: int = 0) -> float:
    """10 log10 of the mean per-frame noise power ratio (mean first, then log)."""
    if np.size(d) != np.size(d_tilde):
        raise ValueError("d and d_tilde must have equal length")
    return float(10.0 * np.log10(np.mean(na_frames(d, d_tilde, frame_len, hop, lag))))


def kurtosis(frames: np.ndarray) -> np.ndarray:
    """m4 / m2^2 of each row (central moments); NaN where m2 == 0."""
    c = frames - frames.mean(axis=-1, keepdims=True)
    m2 = np.mean(c ** 2, axis=-1)
    m4 = np.mean(c ** 4, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(m2 > 0, m4 / np.where(m2 > 0, m2, 1.0) ** 2, np.nan)


def wlakr(d, d_tilde, frame_len: int = 256, hop: int = 128,
          offset_db: float = NOISE_ELIGIBLE_OFFSET_DB, weighting: str = "energy") -> float:
    """Weighted log10 average of per-frame kurtosis ratios kappa(d_tilde)/kappa(d).

    Only frames within ``offset_db`` of the loudest noise frame count. Frames
    whose filtered noise is identically zero have no kurtosis and are left
    out. ``weighting`` is "energy" (noise frame energy) or "uniform".
    """
    d = np.asarray(d, dtype=float)
    dt = np.asarray(d_tilde, dtype=float)
    if d.size != dt.size:
        raise ValueError("d and d_tilde must have equal length")
    fd = _frames(d, frame_len, hop)
    ft = _frames(dt, frame_len, hop)
    energy = np.sum(fd ** 2, axis=1)
    if energy.max() <= 0:
        raise ValueError("noise is silent")
    with np.errstate(divide="ignore"):
        energy_db = 10.0 * np.log10(energy)
    eligible = energy_db >= energy_db.max() - offset_db
    k_ref = kurtosis(fd)
    k_test = kurtosis(ft)
    eligible &= np.isfinite(k_test) & np.isfinite(k_ref)
    if np.any(eligible & (k_ref < 1e-6)):
        raise ValueError("reference noise kurtosis below 1e-6")
    if not np.any(eligible):
        raise ValueError("no eligible noise frames")
    scores = np.log10(k_test[eligible] / k_ref[eligible])
    if weighting == "energy":
        w = energy[eligible]
    elif weighting == "uniform":
        w = np.ones(scores.size)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    return float(np.sum(w * scores) / np.sum(w))


def stoi_proxy(s, s_hat, config: StftConfig | None = None, n: int = STOI_N) -> float:
    """Mean one-third octave envelope correlation between s and s_hat,
    negative correlations clipped to zero."""
    config = config or StftConfig()
    S = analyze(s, config).magnitude()
    X = analyze(s_hat, config).magnitude()
    if S.shape[0] < n:
        raise ValueError(f"need at least {n} frames for the intelligibility proxy")
    A = octave_band_map(config.dft_size).matrix
    corr = envelope_correlation(np.sqrt((S ** 2) @ A.T), np.sqrt((X ** 2) @ A.T), n)
    return float(np.mean(np.clip(corr, 0.0, 1.0)))


@dataclass
class MetricReport:
    delta_snr_db: float
    ssdr_db: float
    na_seg_db: float
    wlakr: float
    wlakr_abs: float
    stoi_proxy: float
    stoi_proxy_component: float
    snr_in_db: float
    alignment: int
    active_frames: list[int] = field(default_factory=list)
    # filled from external tools when available
    pesq_s_hat: float | None = None
    pesq_s_tilde: float | None = None
    polqa_s_hat: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def table_row(self) -> dict:
        """Noise-component, speech-component and total groupings."""
        return {
            "delta_snr": self.delta_snr_db,
            "wlakr_abs": self.wlakr_abs,
            "ssdr": self.ssdr_db,
            "na_seg": self.na_seg_db,
            "stoi_proxy": self.stoi_proxy,
        }


def evaluate(s, d, s_hat, s_tilde, d_tilde, config: StftConfig | None = None) -> MetricReport:
    s = np.asarray(s, dtype=float)
    lag = alignment(s, s_tilde)
    ssdr_value, _, active = ssdr(s, s_tilde, lag=lag, return_frames=True)
    w = wlakr(d, d_tilde)
    return MetricReport(
        delta_snr_db=delta_snr(s, d, s_tilde, d_tilde),
        ssdr_db=ssdr_value,
        na_seg_db=na_seg(d, d_tilde, lag=lag),
        wlakr=w,
        wlakr_abs=abs(w),
        stoi_proxy=stoi_proxy(s, s_hat, config),
        stoi_proxy_component=stoi_proxy(s, s_tilde, config),
        snr_in_db=snr_db(s, d),
        alignment=lag,
        active_frames=active.tolist(),
    )
