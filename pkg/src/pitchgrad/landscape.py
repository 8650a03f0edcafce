"""Distance curves, heatmaps and gradient fields as structured CSV tables.

These generators sweep a prediction sinusoid against a fixed target and
emit the measured distance (or its two directional derivatives) per sweep
point or grid cell.  Phases are drawn per cell from counter-based
substreams (or forced to zero), so re-emission is byte-identical for a
fixed seed regardless of worker count.
"""

from __future__ import annotations

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
    ideal_distance,
    ideal_distance_dual,
)
from .signal import (
    Axis,
    BenchConfig,
    SeedParam,
    SineParams,
    StreamKind,
    shift_cents,
    substream,
    synthesize,
)

__all__ = [
    "GridSpec",
    "PhasePolicy",
    "FieldMode",
    "CurveResult",
    "HeatmapResult",
    "FieldResult",
    "default_heatmap_grid",
    "fig_heatmap_grid",
    "zoom_field_grid",
    "distance_curve",
    "heatmap",
    "gradient_field",
    "curve_to_csv",
    "heatmap_to_csv",
    "field_to_csv",
    "nearest_cells_to_target",
]

# The exact center of the search space; prose rounds it to "346 Hz".
CENTER_PITCH_HZ = math.sqrt(30.0 * 4000.0)
DEFAULT_TARGET = SineParams(level_db=-12.5, pitch_hz=CENTER_PITCH_HZ,
                            phase_rad=0.0)
HEATMAP_PRESETS = {
    "fig3": DEFAULT_TARGET,
    "fig3-supp1": SineParams(level_db=-7.5, pitch_hz=130.0, phase_rad=0.0),
    "fig3-supp2": SineParams(level_db=-17.5, pitch_hz=922.0, phase_rad=0.0),
}
CURVE_TARGETS_HZ = (130.0, 346.0, 922.0)
CURVE_LEVEL_DB = -12.5
FIELD_ZOOM = 2.5


class PhasePolicy(Enum):
    RANDOM = "random"
    ZERO = "zero"


class FieldMode(Enum):
    ANALYTIC = "analytic"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class GridSpec:
    """Cell grid over (pitch, level) with a fixed comparison target.

    Cell centers form a lattice of `cells` points per axis starting on the
    lower range edge, log-spaced in pitch and linear in dB, with one cell
    of resolution (range / cells) between neighbors.  A grid spanning the
    whole search space therefore passes through its exact center, where
    the default target sits.
    """

    pitch_cells: int
    level_cells: int
    pitch_range_hz: tuple[float, float]
    level_range_db: tuple[float, float]
    target: SineParams

    def __post_init__(self):
        if self.pitch_cells < 2 or self.level_cells < 2:
            raise ValueError("grids need at least 2 cells per axis")
        lo, hi = self.pitch_range_hz
        if not 0.0 < lo < hi:
            raise ValueError(f"bad pitch range {self.pitch_range_hz}")
        lo, hi = self.level_range_db
        if not lo < hi:
            raise ValueError(f"bad level range {self.level_range_db}")

    def pitch_centers(self) -> np.ndarray:
        lo, hi = self.pitch_range_hz
        frac = np.arange(self.pitch_cells) / self.pitch_cells
        return lo * (hi / lo) ** frac

    def level_centers(self) -> np.ndarray:
        lo, hi = self.level_range_db
        return lo + np.arange(self.level_cells) * (hi - lo) / self.level_cells

    @property
    def cell_cents(self) -> float:
        lo, hi = self.pitch_range_hz
        return 1200.0 * math.log2(hi / lo) / self.pitch_cells

    @property
    def cell_db(self) -> float:
        lo, hi = self.level_range_db
        return (hi - lo) / self.level_cells


def default_heatmap_grid(target: SineParams = DEFAULT_TARGET,
                         cells: int = 80) -> GridSpec:
    """The full-search-space heatmap grid (about 106 cents, 0.31 dB/cell)."""
    return GridSpec(pitch_cells=cells, level_cells=cells,
                    pitch_range_hz=(30.0, 4000.0), level_range_db=(-25.0, 0.0),
                    target=target)


def fig_heatmap_grid(preset: str) -> GridSpec:
    if preset == "fig4":
        return zoom_field_grid()
    if preset not in HEATMAP_PRESETS:
        raise KeyError(f"unknown heatmap preset {preset!r}")
    return default_heatmap_grid(HEATMAP_PRESETS[preset])


def zoom_field_grid(target: SineParams = DEFAULT_TARGET,
                    zoom: float = FIELD_ZOOM) -> GridSpec:
    """A zoomed grid around the target at ~340 cents / 1 dB per cell."""
    full_cents = 1200.0 * math.log2(4000.0 / 30.0)
    half_cents = full_cents / zoom / 2.0
    half_db = 25.0 / zoom / 2.0
    return GridSpec(
        pitch_cells=10, level_cells=10,
        pitch_range_hz=(shift_cents(target.pitch_hz, -half_cents),
                        shift_cents(target.pitch_hz, half_cents)),
        level_range_db=(target.level_db - half_db, target.level_db + half_db),
        target=target,
    )


def nearest_cells_to_target(grid: GridSpec) -> list[tuple[int, int]]:
    """Grid cells whose center is nearest the target, with boundary ties.

    When the target sits on a cell edge (as the default 346 Hz / -12.5 dB
    target does on the level axis of the 80x80 grid) all adjacent cells
    are returned.
    """
    pc = grid.pitch_centers()
    lc = grid.level_centers()
    dc = np.abs(np.log2(pc / grid.target.pitch_hz))
    dl = np.abs(lc - grid.target.level_db)
    tol_c = 1e-9 + (math.log2(grid.pitch_range_hz[1] / grid.pitch_range_hz[0])
                    / grid.pitch_cells) * 1e-6
    tol_l = 1e-9 + grid.cell_db * 1e-6
    cols = np.nonzero(dc <= dc.min() + tol_c)[0]
    rows = np.nonzero(dl <= dl.min() + tol_l)[0]
    return [(int(r), int(c)) for r in rows for c in cols]


# results ------------------------------------------------------------------


@dataclass
class CurveResult:
    target_hz: np.ndarray
    pred_hz: np.ndarray
    distance: np.ndarray


@dataclass
class HeatmapResult:
    grid: GridSpec
    pred_hz: np.ndarray
    pred_db: np.ndarray
    distance: np.ndarray  # (level_cells, pitch_cells), row-major export


@dataclass
class FieldResult:
    grid: GridSpec
    mode: FieldMode
    pred_hz: np.ndarray
    pred_db: np.ndarray
    d_dpitch_per_cent: np.ndarray
    d_dlevel_per_db: np.ndarray


# helpers ------------------------------------------------------------------


def _phase(policy: PhasePolicy, rng_args) -> float:
    if policy is PhasePolicy.ZERO:
        return 0.0
    return float(substream(*rng_args).uniform(0.0, 2.0 * math.pi))


def _target_analysis(spec: DistanceSpec, target: SineParams, cfg: BenchConfig,
                     policy: PhasePolicy, phase_index: int):
    if spec.analyzer is Analyzer.IDEAL:
        return target
    phase = _phase(policy, (cfg.seed, StreamKind.TARGET_PHASE, phase_index))
    params = SineParams(target.level_db, target.pitch_hz, phase)
    return WaveformAnalysis(synthesize(params, cfg), cfg.sample_rate_hz)


def _cell_distance(spec: DistanceSpec, target_ref, params: SineParams,
                   cfg: BenchConfig) -> float:
    if spec.analyzer is Analyzer.IDEAL:
        return ideal_distance(target_ref, params)
    wave = synthesize(params, cfg)
    return float(evaluate(spec, target_ref, wave, cfg.sample_rate_hz).value.val)


# curves -------------------------------------------------------------------


def distance_curve(spec: DistanceSpec, target_pitches_hz=CURVE_TARGETS_HZ,
                   level_db: float = CURVE_LEVEL_DB, n_points: int = 1000,
                   cfg: BenchConfig | None = None,
                   phase_policy: PhasePolicy = PhasePolicy.RANDOM) -> CurveResult:
    """Sweep the prediction pitch across the space for each fixed target.

    Target and prediction levels are fixed (default -12.5 dB); prediction
    phases are fresh per sweep point.
    """
    cfg = cfg or BenchConfig()
    lo, hi = cfg.pitch_range_hz
    sweep = np.geomspace(lo, hi, n_points)
    t_col, p_col, d_col = [], [], []
    for ti, pitch in enumerate(target_pitches_hz):
        target = SineParams(level_db=level_db, pitch_hz=float(pitch),
                            phase_rad=0.0)
        ref = _target_analysis(spec, target, cfg, phase_policy, ti)
        for pi, pred in enumerate(sweep):
            phase = _phase(phase_policy,
                           (cfg.seed, StreamKind.CURVE_POINT, ti * n_points + pi))
            params = SineParams(level_db=level_db, pitch_hz=float(pred),
                                phase_rad=phase)
            t_col.append(pitch)
            p_col.append(pred)
            d_col.append(_cell_distance(spec, ref, params, cfg))
    return CurveResult(np.asarray(t_col), np.asarray(p_col), np.asarray(d_col))


# heatmaps -------------------------------------------------------------------


def _heatmap_rows(args):
    spec, grid, cfg, policy, rows = args
    ref = _target_analysis(spec, grid.target, cfg, policy, 0)
    pitch = grid.pitch_centers()
    level = grid.level_centers()
    out = np.empty((len(rows), grid.pitch_cells))
    for k, r in enumerate(rows):
        for c in range(grid.pitch_cells):
            phase = _phase(policy, (cfg.seed, StreamKind.HEATMAP_CELL,
                                    r * grid.pitch_cells + c))
            params = SineParams(level_db=float(level[r]),
                                pitch_hz=float(pitch[c]), phase_rad=phase)
            out[k, c] = _cell_distance(spec, ref, params, cfg)
    return out


def heatmap(spec: DistanceSpec, grid: GridSpec, cfg: BenchConfig | None = None,
            phase_policy: PhasePolicy = PhasePolicy.RANDOM,
            workers: int = 1) -> HeatmapResult:
    """Distance from the grid's target to every cell-center prediction."""
    cfg = cfg or BenchConfig()
    rows = list(range(grid.level_cells))
    if workers > 1:
        bounds = np.linspace(0, len(rows), min(workers * 2, len(rows)) + 1,
                             dtype=int)
        jobs = [(spec, grid, cfg, phase_policy, rows[lo:hi])
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            parts = list(pool.map(_heatmap_rows, jobs))
        dist = np.vstack(parts)
    else:
        dist = _heatmap_rows((spec, grid, cfg, phase_policy, rows))
    return HeatmapResult(grid=grid, pred_hz=grid.pitch_centers(),
                         pred_db=grid.level_centers(), distance=dist)


# gradient fields -------------------------------------------------------------


def _field_rows(args):
    spec, grid, cfg, policy, mode, eps_cents, eps_db, rows = args
    ref = _target_analysis(spec, grid.target, cfg, policy, 0)
    pitch = grid.pitch_centers()
    level = grid.level_centers()
    d_pitch = np.empty((len(rows), grid.pitch_cells))
    d_level = np.empty_like(d_pitch)
    for k, r in enumerate(rows):
        for c in range(grid.pitch_cells):
            phase = _phase(policy, (cfg.seed, StreamKind.FIELD_CELL,
                                    r * grid.pitch_cells + c))
            params = SineParams(level_db=float(level[r]),
                                pitch_hz=float(pitch[c]), phase_rad=phase)
            if mode is FieldMode.ANALYTIC:
                dp, dl = _analytic_cell(spec, ref, params, cfg, grid)
            else:
                dp, dl = _numeric_cell(spec, ref, params, cfg, eps_cents, eps_db)
            d_pitch[k, c] = dp
            d_level[k, c] = dl
    return d_pitch, d_level


def _analytic_cell(spec, ref, params, cfg, grid):
    if spec.analyzer is Analyzer.IDEAL:
        dp = ideal_distance_dual(grid.target, params, seed_axis=Axis.PITCH).der
        dl = ideal_distance_dual(grid.target, params, seed_axis=Axis.LEVEL).der
        return dp / 1200.0, dl
    fs = cfg.sample_rate_hz
    dp = evaluate(spec, ref, synthesize(params, cfg, SeedParam.PITCH), fs).value.der
    dl = evaluate(spec, ref, synthesize(params, cfg, SeedParam.LEVEL), fs).value.der
    return float(dp) / 1200.0, float(dl)


def _numeric_cell(spec, ref, params, cfg, eps_cents, eps_db):
    up = SineParams(params.level_db, shift_cents(params.pitch_hz, eps_cents),
                    params.phase_rad)
    down = SineParams(params.level_db, shift_cents(params.pitch_hz, -eps_cents),
                      params.phase_rad)
    dp = (_cell_distance(spec, ref, up, cfg)
          - _cell_distance(spec, ref, down, cfg)) / (2.0 * eps_cents)
    louder = SineParams(params.level_db + eps_db, params.pitch_hz, params.phase_rad)
    softer = SineParams(params.level_db - eps_db, params.pitch_hz, params.phase_rad)
    dl = (_cell_distance(spec, ref, louder, cfg)
          - _cell_distance(spec, ref, softer, cfg)) / (2.0 * eps_db)
    return dp, dl


def gradient_field(spec: DistanceSpec, grid: GridSpec, mode: FieldMode,
                   cfg: BenchConfig | None = None,
                   phase_policy: PhasePolicy = PhasePolicy.RANDOM,
                   eps_cents: float | None = None, eps_db: float | None = None,
                   workers: int = 1) -> FieldResult:
    """Directional derivatives of distance-to-target per grid cell.

    Numeric mode uses symmetric differences; the default step is the grid
    resolution (one cell) in each axis.
    """
    cfg = cfg or BenchConfig()
    if mode is FieldMode.NUMERIC:
        eps_cents = grid.cell_cents if eps_cents is None else eps_cents
        eps_db = grid.cell_db if eps_db is None else eps_db
        if not (eps_cents > 0.0 and eps_db > 0.0):
            raise ValueError("numeric field steps must be positive")
    rows = list(range(grid.level_cells))
    if workers > 1:
        bounds = np.linspace(0, len(rows), min(workers * 2, len(rows)) + 1,
                             dtype=int)
        jobs = [(spec, grid, cfg, phase_policy, mode, eps_cents, eps_db,
                 rows[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            parts = list(pool.map(_field_rows, jobs))
        d_pitch = np.vstack([p for p, _ in parts])
        d_level = np.vstack([l for _, l in parts])
    else:
        d_pitch, d_level = _field_rows((spec, grid, cfg, phase_policy, mode,
                                        eps_cents, eps_db, rows))
    return FieldResult(grid=grid, mode=mode, pred_hz=grid.pitch_centers(),
                       pred_db=grid.level_centers(),
                       d_dpitch_per_cent=d_pitch, d_dlevel_per_db=d_level)


# CSV writers ---------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def curve_to_csv(result: CurveResult) -> str:
    lines = ["target_hz,pred_hz,distance"]
    for t, p, d in zip(result.target_hz, result.pred_hz, result.distance):
        lines.append(f"{_fmt(t)},{_fmt(p)},{_fmt(d)}")
    return "\n".join(lines) + "\n"


def heatmap_to_csv(result: HeatmapResult) -> str:
    lines = ["row,col,pred_hz,pred_db,distance"]
    for r in range(result.grid.level_cells):
        for c in range(result.grid.pitch_cells):
            lines.append(f"{r},{c},{_fmt(result.pred_hz[c])},"
                         f"{_fmt(result.pred_db[r])},{_fmt(result.distance[r, c])}")
    return "\n".join(lines) + "\n"


def field_to_csv(result: FieldResult) -> str:
    lines = ["row,col,pred_hz,pred_db,d_dpitch_per_cent,d_dlevel_per_db"]
    for r in range(result.grid.level_cells):
        for c in range(result.grid.pitch_cells):
            lines.append(
                f"{r},{c},{_fmt(result.pred_hz[c])},{_fmt(result.pred_db[r])},"
                f"{_fmt(result.d_dpitch_per_cent[r, c])},"
                f"{_fmt(result.d_dlevel_per_db[r, c])}")
    return "\n".join(lines) + "\n"
