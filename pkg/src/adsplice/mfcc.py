"""Mel-frequency cepstral coefficients.

Pipeline: pre-emphasis, 25 ms frames on a 10 ms hop (tail samples that do
not fill a frame are dropped), Hamming window, 512-point power spectrum,
26 triangular mel filters spanning 0 to Nyquist on the HTK mel scale,
natural log with an absolute floor, DCT-II (orthonormal), keep the first
13 coefficients.

The mel triangles are evaluated at the FFT bin frequencies as continuous
weights (no area normalization), so neighboring filters overlap smoothly
instead of snapping to integer bin edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .media import AudioBlock


class AudioTooShort(ValueError):
    def __init__(self, n_samples: int, frame_len: int):
        super().__init__(
            f"signal of {n_samples} samples is shorter than one {frame_len}-sample frame"
        )


@dataclass(frozen=True)
class MfccConfig:
    sample_rate: int = 16000
    win_ms: float = 25.0
    hop_ms: float = 10.0
    nfft: int = 512
    n_mels: int = 26
    n_coeffs: int = 13
    preemphasis: float = 0.97
    log_floor: float = 1e-10

    @property
    def frame_len(self) -> int:
        return round(self.win_ms * self.sample_rate / 1000)

    @property
    def hop(self) -> int:
        return round(self.hop_ms * self.sample_rate / 1000)

    def __post_init__(self):
        if self.frame_len > self.nfft:
            raise ValueError(
                f"frame of {self.frame_len} samples exceeds FFT size {self.nfft}"
            )
        if self.n_coeffs > self.n_mels:
            raise ValueError("cannot keep more coefficients than mel bands")


def preemphasize(x: np.ndarray, coef: float = 0.97) -> np.ndarray:
    """y[0] = x[0]; y[n] = x[n] - coef * x[n-1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - coef * x[:-1]
    return y


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Stack overlapping frames as rows; the unfilled tail is dropped."""
    x = np.asarray(x)
    if len(x) < frame_len:
        raise AudioTooShort(len(x), frame_len)
    n_frames = 1 + (len(x) - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def power_spectrum(frames: np.ndarray, nfft: int) -> np.ndarray:
    """|rfft|^2 of each row, zero-padded to nfft."""
    return np.abs(np.fft.rfft(frames, n=nfft, axis=-1)) ** 2


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, nfft: int, n_mels: int) -> np.ndarray:
    """(n_mels, nfft//2 + 1) triangle weights over the rfft bin frequencies."""
    edges_hz = mel_to_hz(np.linspace(0.0, float(hz_to_mel(sample_rate / 2)), n_mels + 2))
    freqs = np.arange(nfft // 2 + 1) * (sample_rate / nfft)
    lower = edges_hz[:-2, None]
    center = edges_hz[1:-1, None]
    upper = edges_hz[2:, None]
    rising = (freqs[None, :] - lower) / (center - lower)
    falling = (upper - freqs[None, :]) / (upper - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def mfcc(samples, config: MfccConfig = MfccConfig()) -> np.ndarray:
    """(n_frames, n_coeffs) coefficient matrix for a mono signal."""
    if isinstance(samples, AudioBlock):
        if samples.sample_rate != config.sample_rate:
            raise ValueError(
                f"audio at {samples.sample_rate} Hz does not match config "
                f"rate {config.sample_rate} Hz"
            )
        samples = samples.samples
    x = preemphasize(samples, config.preemphasis)
    frames = frame_signal(x, config.frame_len, config.hop)
    frames = frames * np.hamming(config.frame_len)
    spec = power_spectrum(frames, config.nfft)
    fb = mel_filterbank(config.sample_rate, config.nfft, config.n_mels)
    energies = spec @ fb.T
    logmel = np.log(np.maximum(energies, config.log_floor))
    return dct(logmel, type=2, norm="ortho", axis=-1)[:, : config.n_coeffs]
