"""Windowing, DFT/STFT, mel filterbank, DCT and spectral centroid.

Every operation is generic over the dual scalar: value and derivative
channels flow through the same linear transforms, so distances computed
downstream are differentiable with respect to whichever signal parameter
was seeded at synthesis time.

The fast transform is an iterative radix-2 FFT vectorized across frames;
`naive_dft` is the O(n^2) reference path used by the test oracles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .duals import ComplexDual, Dual, dsum, has_zero_der, log10, magnitude

__all__ = [
    "StftConfig",
    "MelConfig",
    "Spectrogram",
    "ZeroEnergyFrameError",
    "hann_window",
    "fft_complex",
    "naive_dft_complex",
    "dft",
    "naive_dft",
    "stft_magnitude",
    "hz_to_mel",
    "mel_to_hz",
    "mel_filterbank",
    "mel_spectrogram",
    "mel_power_db",
    "log_mel_db",
    "mfcc",
    "spectral_centroid",
    "MFCC_AMIN",
    "MFCC_TOP_DB",
]

# Cepstral dB stage: power floor and dynamic-range clamp below the peak.
MFCC_AMIN = 1e-10
MFCC_TOP_DB = 80.0


class ZeroEnergyFrameError(ValueError):
    """A frame with zero magnitude sum cannot be centroid-normalized."""


@dataclass(frozen=True)
class StftConfig:
    """Analysis window size, overlap and frame placement; Hann throughout.

    By default frames are left-aligned at 0, hop, 2*hop, ... and an
    incomplete tail frame is dropped, which avoids boundary artifacts.
    `centered=True` selects the mainstream alternative instead: frames
    centered at 0, hop, ... over a reflection-padded signal.
    """

    nfft: int
    overlap: float
    window: str = "hann"
    centered: bool = False

    def __post_init__(self):
        if self.nfft < 2 or self.nfft & (self.nfft - 1):
            raise ValueError(f"nfft must be a power of two >= 2, got {self.nfft}")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError(f"overlap must be in [0, 1), got {self.overlap}")
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")
        if self.hop < 1:
            raise ValueError("hop must be >= 1")

    @property
    def hop(self) -> int:
        return int(round(self.nfft * (1.0 - self.overlap)))

    @property
    def n_bins(self) -> int:
        return self.nfft // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.nfft:
            raise ValueError(f"waveform of {n_samples} samples is shorter than nfft={self.nfft}")
        if self.centered:
            return n_samples // self.hop + 1
        return (n_samples - self.nfft) // self.hop + 1


@dataclass(frozen=True)
class MelConfig:
    """Mel filterbank shape; no area normalization."""

    n_mels: int
    fmin_hz: float
    fmax_hz: float

    def __post_init__(self):
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")
        if not 0.0 <= self.fmin_hz < self.fmax_hz:
            raise ValueError(f"need 0 <= fmin < fmax, got {self.fmin_hz}, {self.fmax_hz}")


@dataclass(frozen=True)
class Spectrogram:
    """One-sided magnitude spectrogram: frames x bins of dual magnitudes."""

    mag: Dual
    bin_hz: float

    @property
    def n_frames(self) -> int:
        return self.mag.val.shape[0]

    @property
    def n_bins(self) -> int:
        return self.mag.val.shape[1]


# windows and transforms -------------------------------------------------


@lru_cache(maxsize=None)
def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window: w[k] = 0.5*(1 - cos(2*pi*k/n))."""
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    k = np.arange(n, dtype=np.float64)
    w = 0.5 * (1.0 - np.cos(2.0 * math.pi * k / n))
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=None)
def _twiddles(m: int) -> np.ndarray:
    w = np.exp(-2j * math.pi * np.arange(m // 2) / m)
    w.setflags(write=False)
    return w


def fft_complex(a: np.ndarray) -> np.ndarray:
    """Radix-2 DIT FFT over the last axis; batched over leading axes."""
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[-1]
    if n & (n - 1) or n < 1:
        raise ValueError(f"fft length must be a power of two, got {n}")
    if n == 1:
        return a.copy()
    out = a[..., _bit_reverse(n)]
    m = 2
    while m <= n:
        half = m // 2
        w = _twiddles(m)
        v = out.reshape(out.shape[:-1] + (n // m, m))
        even = v[..., :half]
        odd = v[..., half:] * w
        v[..., :half], v[..., half:] = even + odd, even - odd
        m <<= 1
    return out


@lru_cache(maxsize=8)
def _dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    w = np.exp(-2j * math.pi * np.outer(k, k) / n)
    w.setflags(write=False)
    return w


def naive_dft_complex(a: np.ndarray) -> np.ndarray:
    """Direct-summation DFT over the last axis (oracle path, any length)."""
    a = np.asarray(a, dtype=np.complex128)
    return a @ _dft_matrix(a.shape[-1]).T


def _dual_transform(x: Dual, core) -> ComplexDual:
    xv = core(np.asarray(x.val, dtype=np.complex128))
    if has_zero_der(x):
        return ComplexDual(Dual(xv.real, 0.0), Dual(xv.imag, 0.0))
    xd = core(np.asarray(x.der, dtype=np.complex128))
    return ComplexDual(Dual(xv.real, xd.real), Dual(xv.imag, xd.imag))


def dft(x: Dual) -> ComplexDual:
    """DFT of a dual vector: X[k] = sum_t x[t] * exp(-2j*pi*k*t/n).

    Uses the radix-2 path; the length must be a power of two.
    """
    return _dual_transform(x, fft_complex)


def naive_dft(x: Dual) -> ComplexDual:
    """O(n^2) DFT of a dual vector; accepts any length."""
    return _dual_transform(x, naive_dft_complex)


# STFT -------------------------------------------------------------------


def _frame(arr: np.ndarray, nfft: int, hop: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(arr, nfft)[::hop]


def stft_magnitude(x: Dual, cfg: StftConfig, sample_rate_hz: float) -> Spectrogram:
    """One-sided magnitude STFT of a dual waveform.

    Each frame is Hann-windowed, transformed, and reduced to bins
    0..nfft/2.  Frame placement follows cfg.centered; reflection padding
    (like the value channel, the derivative channel is mirrored) keeps
    the derivative exact under the centered convention.
    """
    n = int(np.shape(x.val)[0])
    n_frames = cfg.n_frames(n)  # validates length
    w = hann_window(cfg.nfft)
    n_bins = cfg.n_bins

    def one_sided(arr):
        arr = np.asarray(arr, dtype=np.float64)
        if cfg.centered:
            arr = np.pad(arr, cfg.nfft // 2, mode="reflect")
        frames = _frame(arr, cfg.nfft, cfg.hop)[:n_frames] * w
        return fft_complex(frames)[:, :n_bins]

    sv = one_sided(x.val)
    if has_zero_der(x):
        z = ComplexDual(Dual(sv.real, 0.0), Dual(sv.imag, 0.0))
    else:
        sd = one_sided(np.broadcast_to(x.der, np.shape(x.val)))
        z = ComplexDual(Dual(sv.real, sd.real), Dual(sv.imag, sd.imag))
    return Spectrogram(mag=magnitude(z), bin_hz=sample_rate_hz / cfg.nfft)


# mel filterbank and MFCC -------------------------------------------------


def hz_to_mel(f_hz):
    """HTK mel scale: m = 2595*log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f_hz, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=None)
def mel_filterbank(cfg: MelConfig, nfft: int, sample_rate_hz: float) -> np.ndarray:
    """Triangular mel filters evaluated on the one-sided FFT bin grid.

    Centers are equally spaced on the mel scale between fmin and fmax and
    no area normalization is applied.  When n_mels outgrows the bin
    resolution some triangles fall between bins and are empty; that is
    reported as a warning and kept as-is.
    """
    if cfg.fmax_hz > sample_rate_hz / 2.0:
        raise ValueError("fmax exceeds the Nyquist frequency")
    n_bins = nfft // 2 + 1
    f_bins = np.arange(n_bins, dtype=np.float64) * (sample_rate_hz / nfft)
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.fmax_hz),
                                  cfg.n_mels + 2))
    lo = edges[:-2, None]
    center = edges[1:-1, None]
    hi = edges[2:, None]
    up = (f_bins - lo) / (center - lo)
    down = (hi - f_bins) / (hi - center)
    fb = np.maximum(0.0, np.minimum(up, down))
    n_empty = int(np.sum(~fb.any(axis=1)))
    if n_empty:
        warnings.warn(
            f"{n_empty} of {cfg.n_mels} mel filters are empty for nfft={nfft} "
            f"(triangles narrower than one bin); proceeding",
            RuntimeWarning,
            stacklevel=2,
        )
    fb.setflags(write=False)
    return fb


def _dual_matmul(x: Dual, mat_t: np.ndarray) -> Dual:
    """x @ mat_t for a constant matrix; derivative flows linearly."""
    if has_zero_der(x):
        return Dual(x.val @ mat_t, 0.0)
    return Dual(x.val @ mat_t, x.der @ mat_t)


def mel_spectrogram(x: Dual, stft_cfg: StftConfig, mel_cfg: MelConfig,
                    sample_rate_hz: float) -> Dual:
    """Mel-band magnitudes, frames x n_mels."""
    spec = stft_magnitude(x, stft_cfg, sample_rate_hz)
    fb = mel_filterbank(mel_cfg, stft_cfg.nfft, sample_rate_hz)
    return _dual_matmul(spec.mag, fb.T)


@lru_cache(maxsize=None)
def _dct2_matrix(n_out: int, n_in: int) -> np.ndarray:
    # Unnormalized DCT-II: y[k] = 2 * sum_m x[m] * cos(pi*k*(2m+1)/(2M))
    k = np.arange(n_out, dtype=np.float64)[:, None]
    m = np.arange(n_in, dtype=np.float64)[None, :]
    mat = 2.0 * np.cos(math.pi * k * (2.0 * m + 1.0) / (2.0 * n_in))
    mat.setflags(write=False)
    return mat


def _floor_at(x: Dual, floor) -> Dual:
    """Elementwise max(x, floor); derivative 0 on the floored entries."""
    val = np.maximum(x.val, floor)
    if has_zero_der(x):
        return Dual(val, 0.0)
    return Dual(val, np.where(x.val > floor, x.der, 0.0))


def mel_power_db(mag: Dual, fb: np.ndarray) -> Dual:
    """Mel-band power in dB with the standard dynamic-range handling.

    Power mel energies are floored at MFCC_AMIN, converted to dB, then
    clamped to MFCC_TOP_DB below the matrix peak.  Entries riding the
    clamp inherit the peak's derivative.
    """
    power = _dual_matmul(mag * mag, fb.T)
    db = log10(_floor_at(power, MFCC_AMIN)) * 10.0
    peak_idx = int(np.argmax(db.val))
    peak_der = 0.0 if has_zero_der(db) else db.der.flat[peak_idx]
    clamp = db.val.flat[peak_idx] - MFCC_TOP_DB
    val = np.maximum(db.val, clamp)
    if has_zero_der(db):
        return Dual(val, 0.0)
    return Dual(val, np.where(db.val > clamp, db.der, peak_der))


def log_mel_db(x: Dual, stft_cfg: StftConfig, mel_cfg: MelConfig,
               sample_rate_hz: float) -> Dual:
    """dB mel spectrum of a waveform (see mel_power_db)."""
    mag = stft_magnitude(x, stft_cfg, sample_rate_hz).mag
    fb = mel_filterbank(mel_cfg, stft_cfg.nfft, sample_rate_hz)
    return mel_power_db(mag, fb)


def mfcc(x: Dual, stft_cfg: StftConfig, mel_cfg: MelConfig, n_mfcc: int,
         sample_rate_hz: float) -> Dual:
    """Cepstral coefficients: unnormalized DCT-II of the dB mel spectrum."""
    if n_mfcc > mel_cfg.n_mels:
        raise ValueError("n_mfcc cannot exceed n_mels")
    db = log_mel_db(x, stft_cfg, mel_cfg, sample_rate_hz)
    return _dual_matmul(db, _dct2_matrix(n_mfcc, mel_cfg.n_mels).T)


def spectral_centroid(x: Dual, cfg: StftConfig, sample_rate_hz: float) -> Dual:
    """Magnitude-weighted mean frequency per frame, in Hz.

    Raises ZeroEnergyFrameError when a frame has no magnitude to
    normalize by.
    """
    spec = stft_magnitude(x, cfg, sample_rate_hz)
    f_bins = np.arange(cfg.n_bins, dtype=np.float64) * spec.bin_hz
    num = dsum(spec.mag * f_bins, axis=1)
    den = dsum(spec.mag, axis=1)
    if not np.all(den.val > 0.0):
        raise ZeroEnergyFrameError("zero-energy frame; centroid undefined")
    return num / den
