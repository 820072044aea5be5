#!/usr/bin/env python3
"""End-to-end run on a synthetic wafer: generate, binarize, map, merge, plot.

Writes dataset, patterns, result, truth, and SVG plots into --out, then
prints the recovered catalog and the score against the planted truth.
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path
from time import perf_counter

from wafer import default_config, score_against_truth

from xrdmap import io as xio
from xrdmap.merge import apply_hierarchical_merge
from xrdmap.phasemap import PhaseMapParams, run_incremental_phase_mapping
from xrdmap.signal import BinarizationParams, binarize_dataset, estimate_intensity_threshold, preprocess
from xrdmap.synth import generate


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--samples", type=int, default=500)
    parser.add_argument("--noise", type=float, default=5.0, help="intensity noise sigma")
    parser.add_argument("--spike-rate", type=float, default=0.02)
    parser.add_argument("--th", type=int, default=2, help="peak adjacency threshold (windows)")
    parser.add_argument("--ot", type=int, default=5, help="minimum members per surviving phase")
    parser.add_argument("--merge-cutoff", type=float, default=None,
                        help="also run a hierarchical merge at this avg_peak_diff cutoff")
    parser.add_argument("--out", type=Path, default=Path("out/pipeline"))
    return parser.parse_args()


def main() -> int:
    args = parse_args()
    config = default_config(args.seed, args.samples, args.noise, args.spike_rate)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)

    t0 = perf_counter()
    samples, truth = generate(config)
    xio.save_dataset(out / "dataset.csv", config.q_grid(), samples)
    xio.save_truth(out / "truth.json", truth)

    probe = BinarizationParams(window_count=config.window_count, intensity_threshold=0.0)
    processed = [preprocess(s.intensities, probe) for s in samples]
    threshold = estimate_intensity_threshold(processed)
    bin_params = BinarizationParams(
        window_count=config.window_count, intensity_threshold=threshold
    )
    patterns = list(zip((s.id for s in samples), binarize_dataset(samples, bin_params)))
    xio.write_patterns(out / "patterns.json", patterns,
                       {"window_count": bin_params.window_count,
                        "intensity_threshold": threshold, "threshold_mode": "auto"})

    result = run_incremental_phase_mapping(patterns, PhaseMapParams(th=args.th, ot=args.ot))
    xio.export_result(result, out / "result.json")
    xio.render_plots(result, samples, out / "plots")
    elapsed = perf_counter() - t0

    print(f"{len(samples)} samples, threshold {threshold:.3g}, {elapsed:.2f}s")
    for phase in result.catalog.phases:
        peaks = ", ".join(str(p) for p in phase.representative.peaks)
        print(f"  {phase.id}: {len(phase.member_ids):4d} members  windows [{peaks}]")
    n_mixed = len(result.memberships.mixed_ids())
    n_out = len(result.memberships.outlier_ids())
    print(f"  mixed {n_mixed}, outliers {n_out}")

    scores = score_against_truth(result, truth, config, args.th)
    print("vs planted truth: " + json.dumps(scores))

    if args.merge_cutoff is not None:
        merged = apply_hierarchical_merge(result, "avg_peak_diff", args.merge_cutoff)
        xio.export_result(merged, out / "merged.json")
        xio.render_plots(merged, samples, out / "plots_merged")
        print(f"merge at cutoff {args.merge_cutoff}: "
              f"{len(result.catalog)} -> {len(merged.catalog)} phases")
    print(f"artifacts in {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
