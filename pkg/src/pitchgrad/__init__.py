"""Benchmark harness for the pitch-direction sanity of audio distances.

Forward-mode dual numbers carry one directional derivative through a
from-scratch DSP chain (STFT, mel, MFCC, spectral centroid), so every
configured distance between two sinusoids is differentiable with respect
to the prediction's pitch or level.  On top of that sit the gradient-sign
ranking benchmark, landscape exporters, and a subprocess protocol for
external (e.g. neural) distance evaluators.
"""

from .duals import ComplexDual, Dual, magnitude
from .signal import (
    Axis,
    BenchConfig,
    SeedParam,
    SineParams,
    amplitude_to_level,
    cents_between,
    level_to_amplitude,
    perturb,
    sample_trial,
    shift_cents,
    synthesize,
)
from .dsp import (
    MelConfig,
    Spectrogram,
    StftConfig,
    dft,
    hann_window,
    mel_filterbank,
    mel_spectrogram,
    mfcc,
    naive_dft,
    spectral_centroid,
    stft_magnitude,
)
from .distances import (
    Analyzer,
    DistanceSpec,
    DistanceValue,
    Norm,
    WaveformAnalysis,
    builtin_registry,
    evaluate,
    external_spec,
    ideal_distance,
    spec_by_name,
)
from .bench import (
    AccuracyReport,
    Condition,
    Mode,
    TrialRecord,
    run_suite,
    run_trial,
    standard_conditions,
)
from .landscape import (
    FieldMode,
    GridSpec,
    PhasePolicy,
    distance_curve,
    gradient_field,
    heatmap,
)
from .extern import ExternSession

__version__ = "0.1.0"
