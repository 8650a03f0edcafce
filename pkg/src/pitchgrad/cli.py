"""Command-line front end: benchmark runs, landscape exports, spec catalog.

Exit codes: 0 success, 2 usage error, 3 external-worker failure,
4 numeric failure (NaN distance).
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

from . import __version__
from .bench import (
    Axis,
    Condition,
    Mode,
    NumericFailure,
    analytic_condition,
    coarse_condition,
    fine_condition,
    reports_to_csv,
    reports_to_json,
    run_suite,
)
from .distances import Analyzer, builtin_registry, external_spec, spec_by_name
from .extern import ExternError, ExternSession, HandshakeError
from .landscape import (
    CURVE_TARGETS_HZ,
    DEFAULT_TARGET,
    FieldMode,
    GridSpec,
    PhasePolicy,
    curve_to_csv,
    default_heatmap_grid,
    distance_curve,
    field_to_csv,
    fig_heatmap_grid,
    gradient_field,
    heatmap,
    heatmap_to_csv,
    zoom_field_grid,
)
from .signal import BenchConfig, SineParams

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_EXTERN = 3
EXIT_NUMERIC = 4


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="run seed (64-bit)")
    p.add_argument("--n-samples", type=int, default=16384,
                   help="waveform length in samples")
    p.add_argument("--sample-rate", type=float, default=44100.0,
                   help="sample rate in Hz")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel workers; output is independent of this")
    p.add_argument("--out", type=str, default=None,
                   help="output directory (default ./out/<timestamp>)")
    p.add_argument("--config", type=str, default=None,
                   help="JSON config file mirroring flags; flags win")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pitchgrad",
        description="Pitch-direction benchmark for audio-to-audio distances.")
    parser.add_argument("--version", action="version",
                        version=f"pitchgrad {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("trials", help="gradient-sign ranking accuracy table")
    _add_common(t)
    t.add_argument("--spec", action="append", default=None,
                   help="distance spec name, repeatable, or 'all'")
    t.add_argument("--n-trials", type=int, default=1000)
    t.add_argument("--condition", choices=["analytic", "fine", "coarse", "all"],
                   default="all")
    t.add_argument("--axis", choices=["pitch", "level", "both"], default="both")
    t.add_argument("--format", choices=["csv", "json"], default="csv")
    t.add_argument("--extern-cmd", type=str, default=None,
                   help="worker command line for the 'external' spec")

    c = sub.add_parser("curve", help="distance curves over a pitch sweep")
    _add_common(c)
    c.add_argument("--spec", required=True)
    c.add_argument("--preset", choices=["fig2"], default=None)
    c.add_argument("--targets-hz", type=float, nargs="+", default=None)
    c.add_argument("--level-db", type=float, default=-12.5)
    c.add_argument("--n-points", type=int, default=1000)
    c.add_argument("--phase", choices=["random", "zero"], default="random")

    h = sub.add_parser("heatmap", help="distance heatmap over a (pitch, level) grid")
    _add_common(h)
    h.add_argument("--spec", required=True)
    h.add_argument("--preset",
                   choices=["fig3", "fig3-supp1", "fig3-supp2", "fig4"],
                   default=None)
    h.add_argument("--target-hz", type=float, default=None)
    h.add_argument("--target-db", type=float, default=None)
    h.add_argument("--pitch-cells", type=int, default=80)
    h.add_argument("--level-cells", type=int, default=80)
    h.add_argument("--phase", choices=["random", "zero"], default="random")

    f = sub.add_parser("field", help="gradient field over a (pitch, level) grid")
    _add_common(f)
    f.add_argument("--spec", required=True)
    f.add_argument("--preset", choices=["fig4"], default=None)
    f.add_argument("--target-hz", type=float, default=None)
    f.add_argument("--target-db", type=float, default=None)
    f.add_argument("--pitch-cells", type=int, default=10)
    f.add_argument("--level-cells", type=int, default=10)
    f.add_argument("--mode", choices=["analytic", "numeric"], default="numeric")
    f.add_argument("--eps-cents", type=float, default=None)
    f.add_argument("--eps-db", type=float, default=None)
    f.add_argument("--phase", choices=["random", "zero"], default="random")

    ls = sub.add_parser("list", help="print the builtin spec catalog")
    ls.add_argument("--format", choices=["text", "json"], default="text")
    return parser


def _apply_config_file(parser, argv):
    # Flags win over the config file: load the file, install its values as
    # parser defaults, then parse the command line on top.
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", type=str, default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config:
        with open(known.config, "r", encoding="utf-8") as fh:
            values = json.load(fh)
        if not isinstance(values, dict):
            parser.error(f"config file {known.config} must hold a JSON object")
        parser.set_defaults(**{k.replace("-", "_"): v for k, v in values.items()})
    return parser.parse_args(argv)


def _bench_config(args) -> BenchConfig:
    return BenchConfig(sample_rate_hz=args.sample_rate, n_samples=args.n_samples,
                       seed=args.seed)


def _out_dir(args) -> Path:
    if args.out:
        path = Path(args.out)
    else:
        stamp = datetime.datetime.now(datetime.timezone.utc).strftime(
            "%Y%m%dT%H%M%SZ")
        path = Path("out") / stamp
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out_dir: Path, args, cfg: BenchConfig, specs, conditions,
                    outputs):
    manifest = {
        "tool_version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "command": sys.argv[1:],
        "config": cfg.to_dict(),
        "specs": [s.name for s in specs],
        "conditions": [c.label() for c in conditions],
        "outputs": [str(p.name) for p in outputs],
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def _resolve_specs(parser, names, extern_cmd):
    if not names or "all" in names:
        specs = builtin_registry()
        if names and len(names) > 1:
            parser.error("'all' cannot be combined with other --spec values")
    else:
        specs = []
        for name in names:
            if name == "external":
                specs.append(external_spec())
                continue
            try:
                specs.append(spec_by_name(name))
            except KeyError as exc:
                parser.error(str(exc))
        seen = set()
        for s in specs:
            if s.name in seen:
                parser.error(f"duplicate spec {s.name!r}")
            seen.add(s.name)
    if any(s.analyzer is Analyzer.EXTERNAL for s in specs) and not extern_cmd:
        parser.error("--spec external requires --extern-cmd")
    return specs


def _resolve_conditions(args) -> list[Condition]:
    axes = {"pitch": [Axis.PITCH], "level": [Axis.LEVEL],
            "both": [Axis.PITCH, Axis.LEVEL]}[args.axis]
    maker = {"analytic": [analytic_condition], "fine": [fine_condition],
             "coarse": [coarse_condition],
             "all": [analytic_condition, fine_condition, coarse_condition]}
    return [make(axis) for axis in axes for make in maker[args.condition]]


def _print_table(result, specs, conditions):
    labels = [c.label() for c in conditions]
    width = max(len(s.name) for s in specs) + 2
    print("".ljust(width) + "  ".join(f"{l:>16}" for l in labels))
    for spec in specs:
        cells = []
        for cond in conditions:
            try:
                r = result.report_for(spec.name, cond)
                cells.append(f"{r.accuracy:>16.3f}")
            except KeyError:
                cells.append(f"{'-':>16}")
        print(spec.name.ljust(width) + "  ".join(cells))
    if result.out_of_range_fraction:
        oor = ", ".join(f"{k}: {v:.3f}"
                        for k, v in sorted(result.out_of_range_fraction.items()))
        print(f"out-of-range perturbation fraction: {oor}")
    for (spec, cond), n in sorted(result.error_counts.items()):
        print(f"trial errors (counted incorrect): {spec} {cond}: {n}")


def _cmd_trials(parser, args) -> int:
    cfg = _bench_config(args)
    specs = _resolve_specs(parser, args.spec, args.extern_cmd)
    conditions = _resolve_conditions(args)
    session = None
    try:
        if args.extern_cmd and any(s.analyzer is Analyzer.EXTERNAL for s in specs):
            try:
                session = ExternSession(args.extern_cmd)
            except HandshakeError as exc:
                print(f"extern handshake failed: {exc}", file=sys.stderr)
                return EXIT_EXTERN
            skipped = [c.label() for c in conditions if c.mode is Mode.ANALYTIC]
            if skipped:
                print("external spec: analytic conditions are not supported; "
                      f"skipping {', '.join(skipped)} for it")
        result = run_suite(specs, conditions, n_trials=args.n_trials, cfg=cfg,
                           workers=args.workers, extern=session)
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ExternError as exc:
        print(f"extern failure: {exc}", file=sys.stderr)
        return EXIT_EXTERN
    finally:
        if session is not None:
            session.close()

    out = _out_dir(args)
    if args.format == "csv":
        report_path = out / "trials.csv"
        report_path.write_text(reports_to_csv(result.reports), encoding="utf-8")
    else:
        report_path = out / "trials.json"
        report_path.write_text(reports_to_json(result), encoding="utf-8")
    manifest = _write_manifest(out, args, cfg, specs, conditions, [report_path])
    _print_table(result, specs, conditions)
    print(f"wrote {report_path} and {manifest}")
    return EXIT_OK


def _landscape_spec(parser, args):
    try:
        return spec_by_name(args.spec)
    except KeyError as exc:
        parser.error(str(exc))


def _check_target(parser, cfg: BenchConfig, hz: float, db: float):
    lo, hi = cfg.pitch_range_hz
    if not lo <= hz <= hi:
        parser.error(f"target pitch {hz} Hz outside [{lo}, {hi}]")
    lo, hi = cfg.level_range_db
    if not lo <= db <= hi:
        parser.error(f"target level {db} dB outside [{lo}, {hi}]")


def _cmd_curve(parser, args) -> int:
    cfg = _bench_config(args)
    spec = _landscape_spec(parser, args)
    targets = args.targets_hz
    if args.preset == "fig2" or targets is None:
        targets = list(CURVE_TARGETS_HZ)
    for hz in targets:
        _check_target(parser, cfg, hz, args.level_db)
    result = distance_curve(spec, targets, args.level_db, args.n_points, cfg,
                            PhasePolicy(args.phase))
    out = _out_dir(args)
    path = out / f"curve_{spec.name}.csv"
    path.write_text(curve_to_csv(result), encoding="utf-8")
    _write_manifest(out, args, cfg, [spec], [], [path])
    print(f"wrote {path}")
    return EXIT_OK


def _grid_from_args(parser, args, cfg, default_maker):
    import dataclasses

    if args.preset:
        return fig_heatmap_grid(args.preset)
    hz = args.target_hz if args.target_hz is not None else DEFAULT_TARGET.pitch_hz
    db = args.target_db if args.target_db is not None else DEFAULT_TARGET.level_db
    _check_target(parser, cfg, hz, db)
    target = SineParams(level_db=db, pitch_hz=hz, phase_rad=0.0)
    if default_maker is zoom_field_grid:
        grid = zoom_field_grid(target)
        return dataclasses.replace(grid, pitch_cells=args.pitch_cells,
                                   level_cells=args.level_cells)
    return GridSpec(pitch_cells=args.pitch_cells, level_cells=args.level_cells,
                    pitch_range_hz=cfg.pitch_range_hz,
                    level_range_db=cfg.level_range_db, target=target)


def _cmd_heatmap(parser, args) -> int:
    cfg = _bench_config(args)
    spec = _landscape_spec(parser, args)
    grid = _grid_from_args(parser, args, cfg, default_heatmap_grid)
    try:
        result = heatmap(spec, grid, cfg, PhasePolicy(args.phase),
                         workers=args.workers)
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = _out_dir(args)
    path = out / f"heatmap_{spec.name}.csv"
    path.write_text(heatmap_to_csv(result), encoding="utf-8")
    _write_manifest(out, args, cfg, [spec], [], [path])
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_field(parser, args) -> int:
    cfg = _bench_config(args)
    spec = _landscape_spec(parser, args)
    grid = _grid_from_args(parser, args, cfg, zoom_field_grid)
    mode = FieldMode(args.mode)
    result = gradient_field(spec, grid, mode, cfg, PhasePolicy(args.phase),
                            eps_cents=args.eps_cents, eps_db=args.eps_db,
                            workers=args.workers)
    out = _out_dir(args)
    path = out / f"field_{spec.name}_{mode.value}.csv"
    path.write_text(field_to_csv(result), encoding="utf-8")
    _write_manifest(out, args, cfg, [spec], [], [path])
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_list(args) -> int:
    specs = builtin_registry()
    if args.format == "json":
        doc = [{
            "name": s.name,
            "analyzer": s.analyzer.value,
            "norm": s.norm.value if s.norm else None,
            "params": s.describe(),
        } for s in specs]
        print(json.dumps(doc, indent=2))
    else:
        width = max(len(s.name) for s in specs) + 2
        for s in specs:
            print(f"{s.name.ljust(width)}{s.describe()}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = _apply_config_file(parser, sys.argv[1:] if argv is None else argv)
    if args.command == "trials":
        return _cmd_trials(parser, args)
    if args.command == "curve":
        return _cmd_curve(parser, args)
    if args.command == "heatmap":
        return _cmd_heatmap(parser, args)
    if args.command == "field":
        return _cmd_field(parser, args)
    if args.command == "list":
        return _cmd_list(args)
    parser.error(f"unknown command {args.command!r}")  # pragma: no cover


if __name__ == "__main__":
    raise SystemExit(main())
