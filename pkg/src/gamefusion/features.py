"""Single-modal feature computation.

MFCC from 16 kHz mono audio, a fixed set of time-series statistics for the
physiological channels, time averaging of feature sequences and z-score
standardization.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

AUDIO_SAMPLES = 160000  # 10 s at 16 kHz
LOG_FLOOR = 1e-10

TS_FEATURE_NAMES = (
    "abs_energy",
    "max_abs",
    "mean",
    "variance",
    "std",
    "min",
    "max",
    "median",
    "first",
    "last",
    "mean_abs_change",
    "count_above_mean",
)


@dataclass(frozen=True)
class MfccConfig:
    sample_rate: int = 16000
    frame_len: int = 400
    frame_step: int = 160
    n_fft: int = 512
    n_mel_filters: int = 26
    n_kept_coeffs: int = 13
    low_hz: float = 0.0
    high_hz: float | None = None

    def __post_init__(self):
        if self.frame_len > self.n_fft:
            raise ValueError("frame_len must not exceed n_fft")
        if self.n_kept_coeffs > self.n_mel_filters:
            raise ValueError("cannot keep more coefficients than mel filters")
        if self.frame_step < 1 or self.frame_len < 1:
            raise ValueError("frame_len and frame_step must be positive")


def standardize_duration(samples, target: int = AUDIO_SAMPLES) -> np.ndarray:
    """Truncate or zero-pad at the end to exactly ``target`` samples."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("empty audio")
    if x.size >= target:
        return x[:target].copy()
    out = np.zeros(target)
    out[: x.size] = x
    return out


def frame_spectrum(frame, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Full two-sided DFT of one Hamming-windowed, zero-padded frame (``n_fft`` bins)."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (cfg.frame_len,):
        raise ValueError(f"frame must have {cfg.frame_len} samples, got {frame.shape}")
    return np.fft.fft(frame * np.hamming(cfg.frame_len), n=cfg.n_fft)


def power_spectrum(frame, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Periodogram ``|S(k)|^2 / n_fft`` for ``k = 0 .. n_fft/2``."""
    spec = frame_spectrum(frame, cfg)[: cfg.n_fft // 2 + 1]
    return (spec.real**2 + spec.imag**2) / cfg.n_fft


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_filterbank(cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Triangular filters evenly spaced on the mel scale, shape (n_mel_filters, n_fft//2 + 1)."""
    high = cfg.high_hz if cfg.high_hz is not None else cfg.sample_rate / 2
    mels = np.linspace(hz_to_mel(cfg.low_hz), hz_to_mel(high), cfg.n_mel_filters + 2)
    bins = np.floor((cfg.n_fft + 1) * mel_to_hz(mels) / cfg.sample_rate).astype(int)
    fbank = np.zeros((cfg.n_mel_filters, cfg.n_fft // 2 + 1))
    for j in range(cfg.n_mel_filters):
        lo, mid, hi = bins[j], bins[j + 1], bins[j + 2]
        for k in range(lo, mid):
            fbank[j, k] = (k - lo) / (mid - lo)
        for k in range(mid, hi):
            fbank[j, k] = (hi - k) / (hi - mid)
    return fbank


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II as an ``n x n`` matrix (row = output coefficient)."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(math.pi * k * (2 * i + 1) / (2 * n)) * math.sqrt(2.0 / n)
    m[0] /= math.sqrt(2.0)
    return m


def frame_signal(samples: np.ndarray, cfg: MfccConfig) -> np.ndarray:
    n = samples.size
    if n < cfg.frame_len:
        raise ValueError("audio shorter than one frame")
    n_frames = (n - cfg.frame_len) // cfg.frame_step + 1
    return np.lib.stride_tricks.sliding_window_view(samples, cfg.frame_len)[:: cfg.frame_step][:n_frames]


def mfcc(samples, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """MFCC matrix of shape ``(frames, n_kept_coeffs)``.

    Per frame: Hamming window, ``n_fft``-point periodogram, mel filterbank
    energies, natural log floored at 1e-10, orthonormal DCT-II, keep the
    lowest ``n_kept_coeffs`` coefficients. No pre-emphasis or liftering.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    frames = frame_signal(x, cfg) * np.hamming(cfg.frame_len)
    spec = np.fft.rfft(frames, n=cfg.n_fft, axis=1)
    power = (spec.real**2 + spec.imag**2) / cfg.n_fft
    energies = power @ mel_filterbank(cfg).T
    logs = np.log(np.maximum(energies, LOG_FLOOR))
    return logs @ dct_matrix(cfg.n_mel_filters)[: cfg.n_kept_coeffs].T


def read_wav(path) -> np.ndarray:
    """Read 16-bit mono 16 kHz PCM WAV as floats in [-1, 1)."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as w:
            ch, width, rate, n = w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()
            raw = w.readframes(n)
    except (wave.Error, EOFError) as e:
        raise ValueError(f"{path}: not a PCM WAV file ({e})") from None
    if ch != 1:
        raise ValueError(f"{path}: expected mono audio, got {ch} channels")
    if width != 2:
        raise ValueError(f"{path}: expected 16-bit samples, got {8 * width}-bit")
    if rate != 16000:
        raise ValueError(f"{path}: expected 16000 Hz, got {rate} Hz")
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0


def write_wav(path, samples, sample_rate: int = 16000) -> None:
    x = np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(x.tobytes())


def ts_features(series) -> np.ndarray:
    """Twelve summary statistics of a 1-D series, in ``TS_FEATURE_NAMES`` order."""
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("ts_features needs at least 2 points")
    if np.ptp(x) == 0:
        mean, var = x[0], 0.0  # exact, so no point sits above its own mean
    else:
        mean, var = x.mean(), x.var()
    return np.array([
        np.dot(x, x),
        np.abs(x).max(),
        mean,
        var,
        math.sqrt(var),
        x.min(),
        x.max(),
        np.median(x),
        x[0],
        x[-1],
        np.abs(np.diff(x)).mean(),
        float(np.count_nonzero(x > mean)),
    ])


def task_fuse(values) -> np.ndarray:
    """Average a ``T x D`` feature sequence over time."""
    v = np.asarray(getattr(values, "values", values), dtype=np.float64)
    if v.ndim != 2 or v.shape[0] < 1:
        raise ValueError("expected a non-empty T x D matrix")
    return v.mean(axis=0)


def modality_vector(seq, modality: str) -> np.ndarray:
    """Fixed-length vector for one modality of one record.

    Physiological channels are summarized column by column with
    :func:`ts_features`; every other modality is time-averaged.
    """
    v = np.asarray(getattr(seq, "values", seq), dtype=np.float64)
    if modality == "physio":
        if v.shape[0] < 2:
            raise ValueError("physio sequence needs at least 2 time steps")
        return np.concatenate([ts_features(v[:, j]) for j in range(v.shape[1])])
    return task_fuse(v)


@dataclass(frozen=True)
class ZScoreStats:
    mean: np.ndarray
    std: np.ndarray


def zscore_fit(features) -> ZScoreStats:
    """Population mean and standard deviation per dimension."""
    F = np.asarray([np.asarray(f, dtype=np.float64) for f in features])
    if F.ndim != 2 or F.shape[0] == 0:
        raise ValueError("zscore_fit needs a non-empty list of equal-length vectors")
    std = F.std(axis=0)
    # constant columns can pick up rounding noise in the mean; pin them to 0
    std[np.ptp(F, axis=0) == 0] = 0.0
    return ZScoreStats(F.mean(axis=0), std)


def zscore_apply(v, stats: ZScoreStats) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != stats.mean.shape[0]:
        raise ValueError(f"dimension {v.shape[-1]} does not match stats dimension {stats.mean.shape[0]}")
    safe = np.where(stats.std > 0, stats.std, 1.0)
    return np.where(stats.std > 0, (v - stats.mean) / safe, 0.0)
