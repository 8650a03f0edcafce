"""Sinusoid model, parameter spaces, unit conversions and trial sampling.

The benchmark's search space is a pure stationary sinusoid
``x[n] = A * cos(2*pi*f*n/fs + phi)`` parameterized by a normalized level
in dB (``L = 25*log10(A)``, so amplitude 1 is 0 dB), a pitch in Hz sampled
log-uniformly, and a phase treated as a nuisance variable.

Randomness is drawn from Philox counter-based substreams keyed by
``(seed, stream kind, index)`` so any trial or grid cell can be generated
on any worker with bit-identical results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .duals import Dual, cos

__all__ = [
    "Axis",
    "SeedParam",
    "SineParams",
    "BenchConfig",
    "StreamKind",
    "substream",
    "level_to_amplitude",
    "amplitude_to_level",
    "cents_between",
    "shift_cents",
    "synthesize",
    "sample_trial",
    "perturb",
]

_LN2 = math.log(2.0)
_LN10 = math.log(10.0)
_TWO_PI = 2.0 * math.pi


class Axis(Enum):
    PITCH = "pitch"
    LEVEL = "level"


class SeedParam(Enum):
    NONE = "none"
    PITCH = "pitch"
    LEVEL = "level"


@dataclass(frozen=True)
class SineParams:
    """One point of the search space: level in dB, pitch in Hz, phase in rad."""

    level_db: float
    pitch_hz: float
    phase_rad: float

    def __post_init__(self):
        if not self.pitch_hz > 0.0:
            raise ValueError(f"pitch must be positive, got {self.pitch_hz}")
        if not math.isfinite(self.level_db):
            raise ValueError("level must be finite")
        if not math.isfinite(self.phase_rad):
            raise ValueError("phase must be finite")

    @property
    def amplitude(self) -> float:
        return level_to_amplitude(self.level_db)


@dataclass(frozen=True)
class BenchConfig:
    """Sampling ranges, signal length and run seed for a benchmark run."""

    sample_rate_hz: float = 44100.0
    n_samples: int = 16384
    pitch_range_hz: tuple[float, float] = (30.0, 4000.0)
    level_range_db: tuple[float, float] = (-25.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 2048:
            raise ValueError("n_samples must cover the largest analysis window (2048)")
        lo, hi = self.pitch_range_hz
        if not 0.0 < lo < hi:
            raise ValueError(f"bad pitch range {self.pitch_range_hz}")
        lo, hi = self.level_range_db
        if not lo < hi:
            raise ValueError(f"bad level range {self.level_range_db}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @staticmethod
    def from_dict(d: dict) -> "BenchConfig":
        known = {k: d[k] for k in ("sample_rate_hz", "n_samples", "pitch_range_hz",
                                   "level_range_db", "seed") if k in d}
        if "pitch_range_hz" in known:
            known["pitch_range_hz"] = tuple(known["pitch_range_hz"])
        if "level_range_db" in known:
            known["level_range_db"] = tuple(known["level_range_db"])
        return BenchConfig(**known)

    @staticmethod
    def from_file(path) -> "BenchConfig":
        with open(path, "r", encoding="utf-8") as f:
            return BenchConfig.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "n_samples": self.n_samples,
            "pitch_range_hz": list(self.pitch_range_hz),
            "level_range_db": list(self.level_range_db),
            "seed": self.seed,
        }


class StreamKind(IntEnum):
    """Substream namespaces; one per independently sampled artifact."""

    TRIAL = 1
    CURVE_POINT = 2
    HEATMAP_CELL = 3
    FIELD_CELL = 4
    TARGET_PHASE = 5


def substream(seed: int, kind: StreamKind, index: int) -> np.random.Generator:
    """Counter-based generator for item `index` of the given stream kind.

    Philox is keyed by (seed, kind<<48 | index), so streams never overlap
    and any item can be drawn on any worker independently of the others.
    """
    if not 0 <= index < 2**48:
        raise ValueError("stream index out of range")
    key = np.array([np.uint64(seed), np.uint64((int(kind) << 48) | index)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# unit conversions ------------------------------------------------------


def level_to_amplitude(level_db: float) -> float:
    """Amplitude for a normalized level: A = 10**(L/25)."""
    return 10.0 ** (float(level_db) / 25.0)


def amplitude_to_level(a: float) -> float:
    """Normalized level for an amplitude: L = 25*log10(A). Requires a > 0."""
    a = float(a)
    if a <= 0.0:
        raise ValueError(f"amplitude must be positive, got {a}")
    return 25.0 * math.log10(a)


def cents_between(f1_hz: float, f2_hz: float) -> float:
    """Signed pitch interval from f1 to f2 in cents (1200 per octave)."""
    if f1_hz <= 0.0 or f2_hz <= 0.0:
        raise ValueError("frequencies must be positive")
    return 1200.0 * math.log2(f2_hz / f1_hz)


def shift_cents(f_hz: float, cents: float) -> float:
    """Frequency shifted by the given interval: f * 2**(cents/1200)."""
    if f_hz <= 0.0:
        raise ValueError("frequency must be positive")
    return f_hz * 2.0 ** (cents / 1200.0)


# synthesis -------------------------------------------------------------


def synthesize(p: SineParams, cfg: BenchConfig,
               seed_param: SeedParam = SeedParam.NONE) -> Dual:
    """Render the sinusoid as a dual waveform of cfg.n_samples samples.

    The derivative channel is seeded so that d/d(log2 pitch) flows for
    PITCH (d pitch = pitch*ln2 per unit log2-pitch) and d/d(level_db) for
    LEVEL (dA = A*ln10/25 per dB).  With NONE every derivative is 0.
    The value channel is bit-identical across seed choices.
    """
    amp = level_to_amplitude(p.level_db)
    if seed_param is SeedParam.LEVEL:
        a = Dual(amp, amp * _LN10 / 25.0)
    else:
        a = Dual(amp)
    if seed_param is SeedParam.PITCH:
        f = Dual(p.pitch_hz, p.pitch_hz * _LN2)
    else:
        f = Dual(p.pitch_hz)
    t = np.arange(cfg.n_samples, dtype=np.float64) * (_TWO_PI / cfg.sample_rate_hz)
    theta = Dual(t) * f + p.phase_rad
    return a * cos(theta)


# sampling and perturbation --------------------------------------------


def _draw_params(rng: np.random.Generator, cfg: BenchConfig) -> SineParams:
    lo, hi = cfg.pitch_range_hz
    pitch = 2.0 ** rng.uniform(math.log2(lo), math.log2(hi))
    level = rng.uniform(*cfg.level_range_db)
    phase = rng.uniform(0.0, _TWO_PI)
    return SineParams(level_db=level, pitch_hz=pitch, phase_rad=phase)


def sample_trial(rng: np.random.Generator,
                 cfg: BenchConfig) -> tuple[SineParams, SineParams]:
    """Draw an independent (target, prediction) pair for one trial.

    Pitches are log-uniform, levels uniform, phases uniform, all
    independent.  The prediction is redrawn on the (measure-zero) event
    that its pitch or level exactly equals the target's.
    """
    target = _draw_params(rng, cfg)
    while True:
        prediction = _draw_params(rng, cfg)
        if (prediction.pitch_hz != target.pitch_hz
                and prediction.level_db != target.level_db):
            return target, prediction


def perturb(prediction: SineParams, target: SineParams,
            axis: Axis, eps: float) -> SineParams:
    """Move the prediction `eps` further from the target along one axis.

    eps is in cents for PITCH and in dB for LEVEL; the other axis and the
    phase are copied from the prediction unchanged.  The result may leave
    the sampling ranges; that is allowed by construction.
    """
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if axis is Axis.PITCH:
        delta = cents_between(target.pitch_hz, prediction.pitch_hz)
        if delta == 0.0:
            raise ValueError("prediction pitch equals target pitch; sign undefined")
        return SineParams(
            level_db=prediction.level_db,
            pitch_hz=shift_cents(prediction.pitch_hz, math.copysign(eps, delta)),
            phase_rad=prediction.phase_rad,
        )
    delta = prediction.level_db - target.level_db
    if delta == 0.0:
        raise ValueError("prediction level equals target level; sign undefined")
    return SineParams(
        level_db=prediction.level_db + math.copysign(eps, delta),
        pitch_hz=prediction.pitch_hz,
        phase_rad=prediction.phase_rad,
    )
