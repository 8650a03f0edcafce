import math

import numpy as np
import pytest

from pitchgrad.distances import spec_by_name
from pitchgrad.landscape import (
    CURVE_TARGETS_HZ,
    FieldMode,
    GridSpec,
    HEATMAP_PRESETS,
    PhasePolicy,
    curve_to_csv,
    default_heatmap_grid,
    distance_curve,
    field_to_csv,
    fig_heatmap_grid,
    gradient_field,
    heatmap,
    heatmap_to_csv,
    nearest_cells_to_target,
    zoom_field_grid,
)
from pitchgrad.signal import Axis, BenchConfig, SineParams

CFG = BenchConfig(n_samples=4096, seed=5)


class TestGridSpec:
    def test_default_grid_resolution(self):
        grid = default_heatmap_grid()
        assert grid.pitch_cells == grid.level_cells == 80
        assert grid.cell_cents == pytest.approx(
            1200.0 * math.log2(4000.0 / 30.0) / 80.0, rel=1e-12)
        assert grid.cell_cents == pytest.approx(105.9, abs=0.05)
        assert grid.cell_db == pytest.approx(0.3125, rel=1e-12)

    def test_default_target_is_search_space_center(self):
        grid = default_heatmap_grid()
        assert grid.target.pitch_hz == math.sqrt(30.0 * 4000.0)
        assert grid.target.pitch_hz == pytest.approx(346.0, abs=0.5)
        assert grid.target.level_db == -12.5
        # the center sits on the default grid lattice exactly
        assert grid.pitch_centers()[40] == pytest.approx(grid.target.pitch_hz,
                                                         rel=1e-12)
        assert grid.level_centers()[40] == -12.5

    def test_supplementary_presets(self):
        g1 = fig_heatmap_grid("fig3-supp1")
        assert (g1.target.pitch_hz, g1.target.level_db) == (130.0, -7.5)
        g2 = fig_heatmap_grid("fig3-supp2")
        assert (g2.target.pitch_hz, g2.target.level_db) == (922.0, -17.5)

    def test_zoom_grid_matches_published_resolution(self):
        grid = zoom_field_grid()
        assert grid.pitch_cells == grid.level_cells == 10
        assert grid.cell_cents == pytest.approx(338.8, abs=0.5)
        assert grid.cell_db == pytest.approx(1.0, rel=1e-12)
        # the zoomed span lands on the supplementary targets' pitches
        lo, hi = grid.pitch_range_hz
        assert lo == pytest.approx(130.0, abs=1.0)
        assert hi == pytest.approx(922.0, abs=1.0)

    def test_centers_are_log_spaced(self):
        grid = default_heatmap_grid()
        pc = grid.pitch_centers()
        ratios = pc[1:] / pc[:-1]
        assert np.allclose(ratios, ratios[0], rtol=1e-12)
        lc = grid.level_centers()
        assert np.allclose(np.diff(lc), grid.cell_db, rtol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec(1, 8, (30.0, 4000.0), (-25.0, 0.0),
                     SineParams(-12.5, 346.0, 0.0))


class TestCurve:
    def test_defaults_reproduce_published_setup(self):
        assert CURVE_TARGETS_HZ == (130.0, 346.0, 922.0)
        spec = spec_by_name("ideal")
        res = distance_curve(spec, n_points=50, cfg=CFG)
        assert len(res.pred_hz) == 150
        assert set(np.unique(res.target_hz)) == {130.0, 346.0, 922.0}
        assert res.pred_hz.min() == pytest.approx(30.0)
        assert res.pred_hz.max() == pytest.approx(4000.0)

    def test_minimum_at_sweep_point_nearest_target(self):
        spec = spec_by_name("spectrogram")
        res = distance_curve(spec, target_pitches_hz=(346.0,), n_points=200,
                             cfg=CFG)
        k = int(np.argmin(res.distance))
        nearest = int(np.argmin(np.abs(np.log(res.pred_hz / 346.0))))
        assert k == nearest

    def test_ideal_curve_is_v_shaped_in_cents(self):
        spec = spec_by_name("ideal")
        res = distance_curve(spec, target_pitches_hz=(346.0,), n_points=101,
                             cfg=CFG)
        cents = 1200.0 * np.log2(res.pred_hz / 346.0)
        range_cents = 1200.0 * math.log2(4000.0 / 30.0)
        assert np.allclose(res.distance, np.abs(cents) / range_cents,
                           atol=1e-12)

    def test_csv_layout(self):
        res = distance_curve(spec_by_name("ideal"), n_points=3, cfg=CFG)
        lines = curve_to_csv(res).splitlines()
        assert lines[0] == "target_hz,pred_hz,distance"
        assert len(lines) == 10

    def test_deterministic(self):
        spec = spec_by_name("mel")
        a = distance_curve(spec, target_pitches_hz=(346.0,), n_points=8, cfg=CFG)
        b = distance_curve(spec, target_pitches_hz=(346.0,), n_points=8, cfg=CFG)
        assert curve_to_csv(a) == curve_to_csv(b)


class TestHeatmap:
    def test_ideal_minimum_at_target_cell(self):
        grid = default_heatmap_grid(cells=16)
        res = heatmap(spec_by_name("ideal"), grid, CFG)
        r, c = np.unravel_index(np.argmin(res.distance), res.distance.shape)
        assert (int(r), int(c)) in nearest_cells_to_target(grid)

    def test_ideal_symmetric_in_cents_about_target(self):
        grid = default_heatmap_grid(cells=16)
        res = heatmap(spec_by_name("ideal"), grid, CFG)
        cents = np.log2(res.pred_hz / grid.target.pitch_hz)
        row = res.distance[3]
        for i in range(16):
            for j in range(i + 1, 16):
                if abs(abs(cents[i]) - abs(cents[j])) < 1e-9:
                    assert row[i] == pytest.approx(row[j], rel=1e-9)

    def test_spectrogram_minimum_at_target_cell(self):
        # zoomed grid at the published ~106 cents/cell resolution; coarser
        # cells would put every center on the vanishing-gradient plateau
        grid = GridSpec(24, 24, (173.0, 692.0), (-25.0, 0.0),
                        SineParams(-12.5, 346.0, 0.0))
        assert grid.cell_cents == pytest.approx(100.0, abs=1.0)
        res = heatmap(spec_by_name("spectrogram"), grid, CFG)
        r, c = np.unravel_index(np.argmin(res.distance), res.distance.shape)
        assert (int(r), int(c)) in nearest_cells_to_target(grid)
        assert np.all(res.distance >= 0.0)

    def test_byte_identical_reemission(self):
        grid = default_heatmap_grid(cells=8)
        spec = spec_by_name("log_spectrogram")
        a = heatmap_to_csv(heatmap(spec, grid, CFG))
        b = heatmap_to_csv(heatmap(spec, grid, CFG))
        assert a == b

    def test_workers_do_not_change_output(self):
        grid = default_heatmap_grid(cells=8)
        spec = spec_by_name("spectrogram")
        a = heatmap_to_csv(heatmap(spec, grid, CFG, workers=1))
        b = heatmap_to_csv(heatmap(spec, grid, CFG, workers=3))
        assert a == b

    def test_zero_phase_policy(self):
        grid = default_heatmap_grid(cells=8)
        spec = spec_by_name("spectrogram")
        a = heatmap(spec, grid, CFG, PhasePolicy.ZERO)
        b = heatmap(spec, grid, CFG, PhasePolicy.ZERO)
        assert np.array_equal(a.distance, b.distance)
        c = heatmap(spec, grid, CFG, PhasePolicy.RANDOM)
        assert not np.array_equal(a.distance, c.distance)

    def test_csv_row_major_schema(self):
        grid = default_heatmap_grid(cells=8)
        res = heatmap(spec_by_name("ideal"), grid, CFG)
        lines = heatmap_to_csv(res).splitlines()
        assert lines[0] == "row,col,pred_hz,pred_db,distance"
        assert len(lines) == 65
        assert lines[1].startswith("0,0,")
        assert lines[9].startswith("1,0,")


class TestGradientField:
    def test_ideal_pitch_signs_point_away_from_target(self):
        grid = zoom_field_grid()
        res = gradient_field(spec_by_name("ideal"), grid, FieldMode.ANALYTIC,
                             CFG)
        cents = np.log2(res.pred_hz / grid.target.pitch_hz)
        for c, col in enumerate(res.d_dpitch_per_cent.T):
            if abs(cents[c]) < 1e-12:
                continue  # on-axis column: the sign is undefined at the kink
            assert np.all(np.sign(col) == np.sign(cents[c]))

    def test_centroid_level_component_vanishes(self):
        grid = zoom_field_grid()
        res = gradient_field(spec_by_name("log_spectral_centroid"), grid,
                             FieldMode.ANALYTIC, CFG)
        assert np.max(np.abs(res.d_dlevel_per_db)) <= 1e-9

    def test_numeric_converges_to_analytic(self):
        # target deliberately off the cell lattice: no degenerate zero cell
        grid = GridSpec(4, 4, (200.0, 800.0), (-16.0, -9.0),
                        SineParams(-12.3, 410.0, 0.0))
        spec = spec_by_name("spectrogram")
        ana = gradient_field(spec, grid, FieldMode.ANALYTIC, CFG)
        num = gradient_field(spec, grid, FieldMode.NUMERIC, CFG,
                             eps_cents=0.012, eps_db=0.001)
        for a, n in ((ana.d_dpitch_per_cent, num.d_dpitch_per_cent),
                     (ana.d_dlevel_per_db, num.d_dlevel_per_db)):
            mask = np.abs(a) > 1e-6
            rel = np.abs(a[mask] - n[mask]) / np.abs(a[mask])
            assert np.max(rel) <= 1e-3

    def test_numeric_default_step_is_cell_size(self):
        grid = zoom_field_grid()
        spec = spec_by_name("ideal")
        res = gradient_field(spec, grid, FieldMode.NUMERIC, CFG)
        # ideal is exactly linear in cents: numeric equals analytic
        ana = gradient_field(spec, grid, FieldMode.ANALYTIC, CFG)
        assert np.allclose(res.d_dpitch_per_cent, ana.d_dpitch_per_cent,
                           rtol=1e-9, atol=1e-15)

    def test_csv_schema(self):
        grid = zoom_field_grid()
        res = gradient_field(spec_by_name("ideal"), grid, FieldMode.NUMERIC,
                             CFG)
        lines = field_to_csv(res).splitlines()
        assert lines[0] == ("row,col,pred_hz,pred_db,"
                            "d_dpitch_per_cent,d_dlevel_per_db")
        assert len(lines) == 101

    def test_mss_numeric_field_points_toward_target(self):
        # coarse-resolution pitch gradients mostly orient correctly;
        # "toward the target" is undefined on the exact on-axis column
        grid = zoom_field_grid()
        res = gradient_field(spec_by_name("mss"), grid, FieldMode.NUMERIC,
                             BenchConfig(seed=5))
        cents = 1200.0 * np.log2(res.pred_hz / grid.target.pitch_hz)
        off_axis = [c for c in range(grid.pitch_cells) if abs(cents[c]) > 1.0]
        toward = sum(np.sum(np.sign(res.d_dpitch_per_cent[:, c])
                            == np.sign(cents[c])) for c in off_axis)
        assert toward / (grid.level_cells * len(off_axis)) >= 0.9
