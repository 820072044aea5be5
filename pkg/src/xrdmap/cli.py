"""Command-line driver for the pipeline.

Subcommands: synth, binarize, map, merge, baseline, plot, serve.  Exit
codes: 0 success, 1 validation failure, 2 I/O failure.  `--errors-json`
switches diagnostics to a machine-readable JSON object on stderr.  When
`--out` is omitted, outputs land in $XRDMAP_OUT_DIR (or the working
directory).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import io as xio
from .baselines import SweepSetting, geometric_cutoffs, sweep
from .core import ParameterError, PhaseId, XrdMapError
from .merge import apply_hierarchical_merge, manual_merge
from .phasemap import PhaseMapParams, run_incremental_phase_mapping
from .signal import BinarizationParams, detect_peaks, estimate_intensity_threshold, preprocess
from .synth import SynthConfig, generate

__all__ = ["main", "build_parser"]


def _out_base() -> Path:
    return Path(os.environ.get("XRDMAP_OUT_DIR", "."))


def _out_path(arg: str | None, default_name: str) -> Path:
    if arg:
        return Path(arg)
    return _out_base() / default_name


def cmd_synth(args: argparse.Namespace) -> int:
    with open(args.config) as fh:
        config = SynthConfig.from_dict(json.load(fh))
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    samples, truth = generate(config)
    out_dir = _out_path(args.out, "synth_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    xio.save_dataset(out_dir / "dataset.csv", config.q_grid(), samples)
    xio.save_truth(out_dir / "truth.json", truth)
    (out_dir / "config.json").write_text(json.dumps(config.to_dict(), indent=1) + "\n")
    n_mixed = len(truth.mixed_ids())
    print(f"wrote {len(samples)} samples ({n_mixed} mixed) to {out_dir}")
    return 0


def _resolve_threshold(text: str) -> float | None:
    if text == "auto":
        return None
    try:
        return float(text)
    except ValueError:
        raise ParameterError(f"--threshold must be a number or 'auto', got {text!r}") from None


def cmd_binarize(args: argparse.Namespace) -> int:
    grid, samples = xio.load_dataset(args.infile)
    del grid
    threshold = _resolve_threshold(args.threshold)
    probe = BinarizationParams(
        window_count=args.windows,
        intensity_threshold=threshold if threshold is not None else 0.0,
        smooth_degree=args.smooth_degree,
        smooth_window=args.smooth_window,
        baseline_degree=args.baseline_degree,
    )
    processed = [preprocess(s.intensities, probe) for s in samples]
    if threshold is None:
        threshold = estimate_intensity_threshold(processed)
        params = dataclasses.replace(probe, intensity_threshold=threshold)
    else:
        params = probe
    patterns = [(s.id, detect_peaks(proc, params)) for s, proc in zip(samples, processed)]
    meta = {
        "window_count": params.window_count,
        "intensity_threshold": params.intensity_threshold,
        "threshold_mode": "auto" if args.threshold == "auto" else "fixed",
        "smooth_degree": params.smooth_degree,
        "smooth_window": params.smooth_window,
        "baseline_degree": params.baseline_degree,
        "source": str(args.infile),
    }
    out = _out_path(args.out, "patterns.json")
    xio.write_patterns(out, patterns, meta)
    n_empty = sum(1 for _, p in patterns if p.peak_count == 0)
    print(f"binarized {len(patterns)} samples (threshold {params.intensity_threshold:g}, {n_empty} empty) to {out}")
    return 0


def cmd_map(args: argparse.Namespace) -> int:
    patterns, meta = xio.read_patterns(args.infile)
    params = PhaseMapParams(th=args.th, ot=args.ot)
    result = run_incremental_phase_mapping(patterns, params, extra_params={"binarization": meta})
    out = _out_path(args.out, "result.json")
    xio.export_result(result, out)
    n_out = len(result.memberships.outlier_ids())
    n_mixed = len(result.memberships.mixed_ids())
    print(
        f"{len(result.catalog)} pure phases, {n_mixed} mixed samples, "
        f"{n_out} outliers -> {out}"
    )
    return 0


def cmd_merge(args: argparse.Namespace) -> int:
    result = xio.import_result(args.infile)
    timestamp = args.timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
    if args.ids:
        ids = [PhaseId.parse(t.strip()) for t in args.ids.split(",") if t.strip()]
        merged = manual_merge(result, ids, actor="cli", timestamp=timestamp)
    elif args.cutoff is not None:
        merged = apply_hierarchical_merge(result, args.metric, args.cutoff, timestamp=timestamp)
    else:
        raise ParameterError("merge needs either --ids or --cutoff")
    out = _out_path(args.out, "merged.json")
    xio.export_result(merged, out)
    print(f"{len(result.catalog)} -> {len(merged.catalog)} phases -> {out}")
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    grid, samples = xio.load_dataset(args.infile)
    del grid
    vectors = [s.intensities for s in samples]
    sample_ids = [s.id for s in samples]
    if args.param:
        params = [float(v) for v in args.param.split(",")]
    elif args.method == "hier":
        params = geometric_cutoffs()
    else:
        raise ParameterError("kmeans needs --param <k>")
    settings = [SweepSetting(args.method, args.metric, p) for p in params]
    if args.truth:
        truth = xio.load_truth(args.truth)
        report = sweep(vectors, sample_ids, truth, settings, seed=args.seed)
    else:
        from .baselines import agglomerative_cluster, distance_matrix, kmeans

        rows = []
        for s in settings:
            if s.method == "hier":
                labels = agglomerative_cluster(distance_matrix(vectors, s.metric), "average", s.param)
            else:
                labels = kmeans(vectors, int(s.param), args.seed)
            rows.append(
                {
                    "method": s.method,
                    "metric": s.metric,
                    "param": s.param,
                    "n_clusters": int(len(set(labels.tolist()))),
                }
            )
        report = {"rows": rows}
    out = _out_path(args.out, "baseline_report.json")
    xio.save_report(report, out)
    print(f"{len(report['rows'])} settings -> {out}")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    result = xio.import_result(args.result)
    grid, samples = xio.load_dataset(args.dataset)
    del grid
    out_dir = _out_path(args.out, "plots")
    written = xio.render_plots(result, samples, out_dir, show_outliers=args.show_outliers)
    print("wrote " + ", ".join(str(p) for p in written))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import SessionState, create_app

    result = xio.import_result(args.result)
    grid, samples = xio.load_dataset(args.dataset)
    state = SessionState(result, grid=grid, samples=samples)
    app = create_app(state, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xrdmap", description=__doc__)
    parser.add_argument("--errors-json", action="store_true", help="emit errors as JSON on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic wafer dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("binarize", help="smooth, de-baseline, and detect peaks")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--threshold", default="auto", help="intensity threshold or 'auto'")
    p.add_argument("--windows", type=int, required=True, help="number of binarization windows")
    p.add_argument("--smooth-degree", type=int, default=5)
    p.add_argument("--smooth-window", type=int, default=21)
    p.add_argument("--baseline-degree", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_binarize)

    p = sub.add_parser("map", help="incremental phase mapping over binarized patterns")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--th", type=int, required=True, help="peak adjacency threshold (windows)")
    p.add_argument("--ot", type=int, required=True, help="minimum members for a phase to survive")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("merge", help="merge phases, automatically or by id")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--metric", default="avg_peak_diff",
                   choices=["avg_peak_diff", "max_peak_diff", "sum_peak_diff"])
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--ids", default=None, help="comma-separated phase ids, e.g. P1,P3")
    p.add_argument("--timestamp", default=None, help="lineage timestamp override")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("baseline", help="standard clustering on raw intensity vectors")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--method", required=True, choices=["hier", "kmeans"])
    p.add_argument("--metric", default="euclidean",
                   choices=["euclidean", "cosine", "seuclidean", "correlation", "emd"])
    p.add_argument("--param", default=None, help="cutoff(s) or k; comma-separated sweep")
    p.add_argument("--truth", default=None, help="truth file enabling quality scores")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("plot", help="render wafer/ternary/peak-stack SVGs")
    p.add_argument("--result", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--show-outliers", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("serve", help="start the interactive merge service")
    p.add_argument("--result", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", default=None, help="static directory for the web client")
    p.set_defaults(func=cmd_serve)
    return parser


def _emit_error(as_json: bool, exc: Exception) -> None:
    if as_json:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except XrdMapError as exc:
        _emit_error(args.errors_json, exc)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        _emit_error(args.errors_json, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
