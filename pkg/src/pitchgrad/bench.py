"""Gradient-sign (dissimilarity) ranking accuracy across trial conditions.

One trial samples a (target, prediction) pair.  Under a numeric condition
a third signal is constructed a fixed step further from the target along
one axis, and the trial counts as correct when the prediction is strictly
closer to the target than this perturbation.  Under the analytic
condition the sign of the forward-mode derivative plays the same role
with the step taken to zero.

The same sampled trials are reused across all specs and conditions
(paired design) and each trial draws from its own counter-based
substream, so reports are bit-identical for a fixed seed regardless of
worker count or evaluation order.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
import multiprocessing as mp

import numpy as np

from .distances import (
    Analyzer,
    DistanceSpec,
    WaveformAnalysis,
    evaluate,
    ideal_distance_dual,
)
from .dsp import ZeroEnergyFrameError
from .signal import (
    Axis,
    BenchConfig,
    SeedParam,
    SineParams,
    StreamKind,
    perturb,
    sample_trial,
    substream,
    synthesize,
)

__all__ = [
    "Mode",
    "Condition",
    "TrialRecord",
    "AccuracyReport",
    "SuiteResult",
    "fine_condition",
    "coarse_condition",
    "analytic_condition",
    "standard_conditions",
    "run_trial",
    "run_suite",
    "reports_to_csv",
    "reports_to_json",
    "NumericFailure",
]

FINE_EPS = {Axis.PITCH: 30.0, Axis.LEVEL: 2.0}      # cents / dB
COARSE_EPS = {Axis.PITCH: 600.0, Axis.LEVEL: 10.0}  # cents / dB


class NumericFailure(RuntimeError):
    """A distance evaluated to NaN or infinity."""


class Mode(Enum):
    ANALYTIC = "analytic"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class Condition:
    axis: Axis
    mode: Mode
    eps: float | None = None

    def __post_init__(self):
        if self.mode is Mode.NUMERIC:
            if self.eps is None or not self.eps > 0.0:
                raise ValueError("numeric conditions need eps > 0")
        elif self.eps is not None:
            raise ValueError("analytic conditions take no eps")

    def label(self) -> str:
        if self.mode is Mode.ANALYTIC:
            return f"{self.axis.value}/analytic"
        unit = "c" if self.axis is Axis.PITCH else "dB"
        return f"{self.axis.value}/{self.eps:g}{unit}"


def analytic_condition(axis: Axis) -> Condition:
    return Condition(axis=axis, mode=Mode.ANALYTIC)


def fine_condition(axis: Axis) -> Condition:
    return Condition(axis=axis, mode=Mode.NUMERIC, eps=FINE_EPS[axis])


def coarse_condition(axis: Axis) -> Condition:
    return Condition(axis=axis, mode=Mode.NUMERIC, eps=COARSE_EPS[axis])


def standard_conditions() -> list[Condition]:
    """The six benchmark columns: analytic, fine, coarse for both axes."""
    out = []
    for axis in (Axis.PITCH, Axis.LEVEL):
        out += [analytic_condition(axis), fine_condition(axis), coarse_condition(axis)]
    return out


@dataclass(frozen=True)
class TrialRecord:
    target: SineParams
    prediction: SineParams
    correct: bool
    d_pred: float
    d_pert_or_derivative: float
    error: str | None = None


@dataclass(frozen=True)
class AccuracyReport:
    spec_name: str
    condition: Condition
    n_trials: int
    accuracy: float
    ci95_halfwidth: float


@dataclass
class SuiteResult:
    reports: list[AccuracyReport]
    out_of_range_fraction: dict[str, float]
    error_counts: dict[tuple[str, str], int]

    def report_for(self, spec_name: str, condition: Condition) -> AccuracyReport:
        for r in self.reports:
            if r.spec_name == spec_name and r.condition == condition:
                return r
        raise KeyError(f"no report for {spec_name} / {condition.label()}")


def _ci95(accuracy: float, n: int) -> float:
    return 1.96 * math.sqrt(accuracy * (1.0 - accuracy) / n)


def _axis_sign(target: SineParams, prediction: SineParams, axis: Axis) -> float:
    if axis is Axis.PITCH:
        return math.copysign(1.0, math.log2(prediction.pitch_hz / target.pitch_hz))
    return math.copysign(1.0, prediction.level_db - target.level_db)


class _TrialWaveforms:
    """Per-trial synthesis and representation cache shared across specs."""

    def __init__(self, target: SineParams, prediction: SineParams, cfg: BenchConfig):
        self.target_params = target
        self.prediction_params = prediction
        self.cfg = cfg
        self._target = None
        self._pred: dict[SeedParam, WaveformAnalysis] = {}
        self._pert: dict[SineParams, WaveformAnalysis] = {}
        self._d_pred: dict[str, float] = {}

    def target(self) -> WaveformAnalysis:
        if self._target is None:
            wave = synthesize(self.target_params, self.cfg)
            self._target = WaveformAnalysis(wave, self.cfg.sample_rate_hz)
        return self._target

    def prediction(self, seed: SeedParam) -> WaveformAnalysis:
        hit = self._pred.get(seed)
        if hit is None:
            wave = synthesize(self.prediction_params, self.cfg, seed)
            hit = self._pred[seed] = WaveformAnalysis(wave, self.cfg.sample_rate_hz)
        return hit

    def perturbed(self, params: SineParams) -> WaveformAnalysis:
        hit = self._pert.get(params)
        if hit is None:
            wave = synthesize(params, self.cfg)
            hit = self._pert[params] = WaveformAnalysis(wave, self.cfg.sample_rate_hz)
        return hit

    def prediction_distance(self, spec: DistanceSpec) -> float:
        """d(target, prediction), reusing any already-computed dual pass."""
        hit = self._d_pred.get(spec.name)
        if hit is None:
            for seed in (SeedParam.PITCH, SeedParam.LEVEL, SeedParam.NONE):
                if seed in self._pred or seed is SeedParam.NONE:
                    d = evaluate(spec, self.target(), self.prediction(seed),
                                 self.cfg.sample_rate_hz)
                    hit = self._d_pred[spec.name] = float(d.value.val)
                    break
        return hit

    def note_prediction_distance(self, spec: DistanceSpec, value: float):
        self._d_pred.setdefault(spec.name, value)


def _check_finite(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise NumericFailure(f"{what} evaluated to {x!r}")
    return x


def _outcome(spec: DistanceSpec, condition: Condition, waves: _TrialWaveforms,
             extern=None) -> TrialRecord:
    t, p = waves.target_params, waves.prediction_params
    sign = _axis_sign(t, p, condition.axis)

    if spec.analyzer is Analyzer.EXTERNAL:
        if condition.mode is Mode.ANALYTIC:
            raise ValueError("analytic mode is unsupported for external specs")
        if extern is None:
            raise ValueError("external spec requires an extern session")

    if condition.mode is Mode.ANALYTIC:
        if spec.analyzer is Analyzer.IDEAL:
            axis_seed = condition.axis
            d = ideal_distance_dual(t, p, seed_axis=axis_seed)
        else:
            seed = (SeedParam.PITCH if condition.axis is Axis.PITCH
                    else SeedParam.LEVEL)
            try:
                d = evaluate(spec, waves.target(), waves.prediction(seed),
                             waves.cfg.sample_rate_hz).value
            except ZeroEnergyFrameError as exc:
                return TrialRecord(t, p, False, math.nan, math.nan, error=str(exc))
            waves.note_prediction_distance(spec, float(d.val))
        value = _check_finite(float(d.val), f"{spec.name} distance")
        der = _check_finite(float(d.der), f"{spec.name} derivative")
        # a zero derivative cannot drive descent; counts as incorrect
        correct = der * sign > 0.0
        return TrialRecord(t, p, correct, value, der)

    pert_params = perturb(p, t, condition.axis, condition.eps)
    try:
        if spec.analyzer is Analyzer.IDEAL:
            from .distances import ideal_distance
            d_pred = ideal_distance(t, p)
            d_pert = ideal_distance(t, pert_params)
        elif spec.analyzer is Analyzer.EXTERNAL:
            d_pred = extern.distance(waves.target().wave.val,
                                     waves.prediction(SeedParam.NONE).wave.val)
            d_pert = extern.distance(waves.target().wave.val,
                                     waves.perturbed(pert_params).wave.val)
        else:
            d_pred = waves.prediction_distance(spec)
            d_pert = float(evaluate(spec, waves.target(),
                                    waves.perturbed(pert_params),
                                    waves.cfg.sample_rate_hz).value.val)
    except ZeroEnergyFrameError as exc:
        return TrialRecord(t, p, False, math.nan, math.nan, error=str(exc))
    d_pred = _check_finite(d_pred, f"{spec.name} distance")
    d_pert = _check_finite(d_pert, f"{spec.name} distance")
    # exact ties count as incorrect (no usable gradient)
    return TrialRecord(t, p, d_pred < d_pert, d_pred, d_pert)


def run_trial(spec: DistanceSpec, condition: Condition, target: SineParams,
              prediction: SineParams, cfg: BenchConfig,
              extern=None) -> TrialRecord:
    """Evaluate one ranked comparison for one spec under one condition."""
    waves = _TrialWaveforms(target, prediction, cfg)
    return _outcome(spec, condition, waves, extern=extern)


def _perturbation_in_range(params: SineParams, cfg: BenchConfig) -> bool:
    lo, hi = cfg.pitch_range_hz
    if not lo <= params.pitch_hz <= hi:
        return False
    lo, hi = cfg.level_range_db
    return lo <= params.level_db <= hi


def _trial_outcomes(index: int, specs, conditions, cfg):
    """All (spec, condition) outcomes for trial `index`, plus range flags."""
    rng = substream(cfg.seed, StreamKind.TRIAL, index)
    target, prediction = sample_trial(rng, cfg)
    waves = _TrialWaveforms(target, prediction, cfg)
    results = []
    for spec in specs:
        for condition in conditions:
            rec = _outcome(spec, condition, waves)
            results.append((rec.correct, rec.error is not None))
    in_range = []
    for condition in conditions:
        if condition.mode is Mode.NUMERIC:
            pert = perturb(prediction, target, condition.axis, condition.eps)
            in_range.append(_perturbation_in_range(pert, cfg))
        else:
            in_range.append(True)
    return results, in_range


def _chunk_outcomes(args):
    lo, hi, specs, conditions, cfg = args
    return [_trial_outcomes(i, specs, conditions, cfg) for i in range(lo, hi)]


def run_suite(specs, conditions=None, n_trials: int = 1000,
              cfg: BenchConfig | None = None, workers: int = 1,
              extern=None) -> SuiteResult:
    """Run the paired benchmark and aggregate per-(spec, condition) accuracy.

    Every spec and condition sees the same `n_trials` sampled pairs.  The
    result is independent of `workers`; external specs are always
    evaluated on the calling process because a session serializes its
    requests.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    cfg = cfg or BenchConfig()
    conditions = list(conditions) if conditions is not None else standard_conditions()
    specs = list(specs)

    extern_specs = [s for s in specs if s.analyzer is Analyzer.EXTERNAL]
    local_specs = [s for s in specs if s.analyzer is not Analyzer.EXTERNAL]
    if extern_specs and extern is None:
        raise ValueError("external specs require an extern session")
    extern_conditions = [c for c in conditions if c.mode is Mode.NUMERIC]

    n_cells = len(local_specs) * len(conditions)
    correct = np.zeros(n_cells, dtype=np.int64)
    errors = np.zeros(n_cells, dtype=np.int64)
    in_range = np.zeros(len(conditions), dtype=np.int64)

    if workers > 1 and local_specs:
        bounds = np.linspace(0, n_trials, min(workers * 4, n_trials) + 1,
                             dtype=int)
        chunks = [(int(lo), int(hi), local_specs, conditions, cfg)
                  for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            for chunk in pool.map(_chunk_outcomes, chunks):
                for results, flags in chunk:
                    for cell, (ok, err) in enumerate(results):
                        correct[cell] += ok
                        errors[cell] += err
                    in_range += flags
    elif local_specs:
        for i in range(n_trials):
            results, flags = _trial_outcomes(i, local_specs, conditions, cfg)
            for cell, (ok, err) in enumerate(results):
                correct[cell] += ok
                errors[cell] += err
            in_range += flags
    else:
        for i in range(n_trials):
            rng = substream(cfg.seed, StreamKind.TRIAL, i)
            target, prediction = sample_trial(rng, cfg)
            for ci, condition in enumerate(conditions):
                if condition.mode is Mode.NUMERIC:
                    pert = perturb(prediction, target, condition.axis, condition.eps)
                    in_range[ci] += _perturbation_in_range(pert, cfg)
                else:
                    in_range[ci] += 1

    reports: list[AccuracyReport] = []
    error_counts: dict[tuple[str, str], int] = {}
    cell = 0
    for spec in local_specs:
        for condition in conditions:
            acc = correct[cell] / n_trials
            reports.append(AccuracyReport(spec.name, condition, n_trials,
                                          acc, _ci95(acc, n_trials)))
            if errors[cell]:
                error_counts[(spec.name, condition.label())] = int(errors[cell])
            cell += 1

    for spec in extern_specs:
        counts = {c: 0 for c in extern_conditions}
        for i in range(n_trials):
            rng = substream(cfg.seed, StreamKind.TRIAL, i)
            target, prediction = sample_trial(rng, cfg)
            waves = _TrialWaveforms(target, prediction, cfg)
            for condition in extern_conditions:
                rec = _outcome(spec, condition, waves, extern=extern)
                counts[condition] += rec.correct
        for condition in extern_conditions:
            acc = counts[condition] / n_trials
            reports.append(AccuracyReport(spec.name, condition, n_trials,
                                          acc, _ci95(acc, n_trials)))

    oor = {}
    for ci, condition in enumerate(conditions):
        if condition.mode is Mode.NUMERIC:
            oor[condition.label()] = 1.0 - in_range[ci] / n_trials

    order = {s.name: i for i, s in enumerate(specs)}
    reports.sort(key=lambda r: order[r.spec_name])
    return SuiteResult(reports=reports, out_of_range_fraction=oor,
                       error_counts=error_counts)


# serialization ------------------------------------------------------------


def _condition_row(c: Condition) -> tuple[str, str, str]:
    eps = "" if c.eps is None else f"{c.eps:g}"
    return c.axis.value, c.mode.value, eps


def reports_to_csv(reports) -> str:
    """Fixed-schema CSV: spec, axis, mode, eps, n, accuracy, ci95."""
    lines = ["spec,axis,mode,eps,n,accuracy,ci95"]
    for r in reports:
        axis, mode, eps = _condition_row(r.condition)
        lines.append(f"{r.spec_name},{axis},{mode},{eps},{r.n_trials},"
                     f"{r.accuracy:.6f},{r.ci95_halfwidth:.6f}")
    return "\n".join(lines) + "\n"


def reports_to_json(result: SuiteResult) -> str:
    rows = []
    for r in result.reports:
        axis, mode, eps = _condition_row(r.condition)
        rows.append({
            "spec": r.spec_name,
            "axis": axis,
            "mode": mode,
            "eps": None if eps == "" else float(eps),
            "n": r.n_trials,
            "accuracy": round(r.accuracy, 6),
            "ci95": round(r.ci95_halfwidth, 6),
        })
    doc = {
        "reports": rows,
        "out_of_range_fraction": result.out_of_range_fraction,
        "error_counts": {f"{k[0]}:{k[1]}": v for k, v in result.error_counts.items()},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
