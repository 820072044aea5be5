"""File formats and plot emission.

Dataset files are CSV (one row per sample, Q values in the header) or an
equivalent JSON layout.  Results and binarized patterns round-trip through
JSON; results also flatten to CSV with metadata in comment lines.  Plots
are written as self-contained SVG plus a JSON plot-data file the UI reads.
All writers are byte-stable for identical inputs.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (
    BinaryPeakPattern,
    DatasetError,
    MembershipTable,
    ParameterError,
    PhaseCatalog,
    PhaseId,
    PhaseMapResult,
    PurePhase,
    QGrid,
    XrdSample,
)

__all__ = [
    "load_dataset",
    "save_dataset",
    "write_patterns",
    "read_patterns",
    "export_result",
    "import_result",
    "save_truth",
    "load_truth",
    "save_report",
    "ternary_coords",
    "plot_data",
    "render_plots",
    "PALETTE",
]

COMPOSITION_CSV_TOL = 1e-3

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
    "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
)


def color_for(phase_id: PhaseId) -> str:
    # keyed to the id, not the catalog position, so surviving phases keep
    # their color when a merge removes an earlier entry
    return PALETTE[phase_id.index % len(PALETTE)]


def _fix_composition(raw: Sequence[float], where: str) -> tuple[float, float, float]:
    total = sum(raw)
    if abs(total - 1.0) > COMPOSITION_CSV_TOL:
        raise DatasetError(f"{where}: composition sums to {total:.6f}, outside 1 +/- {COMPOSITION_CSV_TOL}")
    # rounding-level drift passes through untouched so round-trips stay exact
    if abs(total - 1.0) > 1e-9:
        warnings.warn(f"{where}: composition renormalized from sum {total:.6f}")
        raw = [c / total for c in raw]
    return (float(raw[0]), float(raw[1]), float(raw[2]))


def load_dataset(path: str | Path) -> tuple[QGrid, list[XrdSample]]:
    """Read a dataset file (CSV or JSON by extension) into a grid and samples.

    CSV header: id,x_mm,y_mm,frac_a,frac_b,frac_c,<q1>,...,<qM> with the
    numeric Q value in each intensity column's header cell.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        return _load_dataset_json(path)
    return _load_dataset_csv(path)


def _load_dataset_csv(path: Path) -> tuple[QGrid, list[XrdSample]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if len(header) < 7 or header[:6] != ["id", "x_mm", "y_mm", "frac_a", "frac_b", "frac_c"]:
            raise DatasetError(f"{path}: unexpected header {header[:6]}")
        try:
            q = [float(v) for v in header[6:]]
        except ValueError as exc:
            raise DatasetError(f"{path}: non-numeric Q in header: {exc}") from None
        try:
            grid = QGrid.from_array(q)
        except ParameterError as exc:
            raise DatasetError(f"{path}: bad Q grid: {exc}") from None
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                comp = _fix_composition([float(v) for v in row[3:6]], f"{path}:{lineno}")
                samples.append(
                    XrdSample(
                        id=row[0],
                        intensities=np.array([float(v) for v in row[6:]]),
                        composition=comp,
                        wafer_pos=(float(row[1]), float(row[2])),
                    )
                )
            except (ValueError, ParameterError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
    return grid, samples


def _load_dataset_json(path: Path) -> tuple[QGrid, list[XrdSample]]:
    with open(path) as fh:
        data = json.load(fh)
    try:
        grid = QGrid.from_array(data["q"])
    except (KeyError, ParameterError) as exc:
        raise DatasetError(f"{path}: bad Q grid: {exc}") from None
    samples = []
    for i, rec in enumerate(data.get("samples", [])):
        where = f"{path}: sample {i}"
        try:
            comp = _fix_composition([float(c) for c in rec["composition"]], where)
            samples.append(
                XrdSample(
                    id=rec["id"],
                    intensities=np.asarray(rec["intensities"], dtype=float),
                    composition=comp,
                    wafer_pos=(float(rec["x_mm"]), float(rec["y_mm"])),
                )
            )
        except (KeyError, ValueError, ParameterError) as exc:
            raise DatasetError(f"{where}: {exc}") from None
    return grid, samples


def save_dataset(path: str | Path, grid: QGrid, samples: Sequence[XrdSample]) -> None:
    """Write a dataset; format chosen by extension.  Values round-trip exactly."""
    path = Path(path)
    for s in samples:
        if len(s.intensities) != len(grid):
            raise DatasetError(f"sample {s.id!r}: {len(s.intensities)} intensities vs grid {len(grid)}")
    if path.suffix.lower() == ".json":
        payload = {
            "q": [float(v) for v in grid.values],
            "samples": [
                {
                    "id": s.id,
                    "x_mm": s.wafer_pos[0],
                    "y_mm": s.wafer_pos[1],
                    "composition": list(s.composition),
                    "intensities": [float(v) for v in s.intensities],
                }
                for s in samples
            ],
        }
        path.write_text(json.dumps(payload, indent=1) + "\n")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["id", "x_mm", "y_mm", "frac_a", "frac_b", "frac_c"] + [repr(v) for v in grid.values]
        )
        for s in samples:
            writer.writerow(
                [s.id, repr(s.wafer_pos[0]), repr(s.wafer_pos[1])]
                + [repr(c) for c in s.composition]
                + [repr(float(v)) for v in s.intensities]
            )


def write_patterns(
    path: str | Path,
    patterns: Sequence[tuple[str, BinaryPeakPattern]],
    params: dict | None = None,
) -> None:
    """Persist binarized patterns with the parameters that produced them."""
    widths = {p.width for _, p in patterns}
    if len(widths) > 1:
        raise DatasetError(f"patterns disagree on width: {sorted(widths)}")
    payload = {
        "width": next(iter(widths)) if widths else None,
        "params": params or {},
        "patterns": [{"id": sid, "peaks": list(p.peaks)} for sid, p in patterns],
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def read_patterns(path: str | Path) -> tuple[list[tuple[str, BinaryPeakPattern]], dict]:
    with open(path) as fh:
        data = json.load(fh)
    width = data.get("width")
    if width is None and data.get("patterns"):
        raise DatasetError(f"{path}: missing width")
    out = []
    for rec in data.get("patterns", []):
        out.append((rec["id"], BinaryPeakPattern(width, tuple(rec["peaks"]))))
    return out, data.get("params", {})


def result_to_jsonable(result: PhaseMapResult) -> dict:
    return {
        "width": result.catalog.width,
        "params": result.params,
        "next_phase_index": result.catalog._next_index,
        "phases": [
            {
                "id": str(p.id),
                "peaks": list(p.representative.peaks),
                "bitstring": p.representative.bitstring(),
                "member_ids": list(p.member_ids),
            }
            for p in result.catalog.phases
        ],
        "memberships": {
            sid: sorted(str(pid) for pid in ms) for sid, ms in result.memberships.items()
        },
        "lineage": result.lineage,
    }


def result_from_jsonable(data: dict) -> PhaseMapResult:
    width = data.get("width")
    phases = []
    for rec in data["phases"]:
        if width is None:
            raise DatasetError("result has phases but no width")
        phases.append(
            PurePhase(
                id=PhaseId.parse(rec["id"]),
                representative=BinaryPeakPattern(width, tuple(rec["peaks"])),
                member_ids=list(rec["member_ids"]),
            )
        )
    params = data.get("params", {})
    catalog = PhaseCatalog(phases, th=params.get("th"))
    if "next_phase_index" in data:
        catalog._next_index = data["next_phase_index"]
    mm = MembershipTable(
        (sid, frozenset(PhaseId.parse(t) for t in tags))
        for sid, tags in data.get("memberships", {}).items()
    )
    return PhaseMapResult(
        catalog=catalog,
        memberships=mm,
        params=params,
        lineage=list(data.get("lineage", [])),
    )


def export_result(result: PhaseMapResult, path: str | Path, format: str | None = None) -> None:
    """Write a result as JSON or CSV; both import back losslessly."""
    path = Path(path)
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "json")
    if fmt == "json":
        path.write_text(json.dumps(result_to_jsonable(result), indent=1) + "\n")
        return
    if fmt != "csv":
        raise ParameterError(f"unknown format {fmt!r}")
    data = result_to_jsonable(result)
    lines = []
    for key in ("width", "params", "next_phase_index", "lineage"):
        lines.append(f"# {key} {json.dumps(data[key])}")
    for rec in data["phases"]:
        lines.append(f"# phase {json.dumps(rec)}")
    lines.append("id,phases")
    for sid, tags in data["memberships"].items():
        if "," in sid or ";" in sid:
            raise ParameterError(f"sample id {sid!r} cannot be flattened to CSV")
        lines.append(f"{sid},{';'.join(tags)}")
    path.write_text("\n".join(lines) + "\n")


def import_result(path: str | Path) -> PhaseMapResult:
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        return result_from_jsonable(json.loads(text))
    data: dict = {"phases": [], "memberships": {}}
    body = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("# "):
            try:
                key, payload = line[2:].split(" ", 1)
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: malformed metadata line") from None
            if key == "phase":
                data["phases"].append(json.loads(payload))
            else:
                data[key] = json.loads(payload)
        else:
            body.append((lineno, line))
    if not body or body[0][1] != "id,phases":
        raise DatasetError(f"{path}: missing id,phases header")
    for lineno, line in body[1:]:
        sid, _, tags = line.partition(",")
        data["memberships"][sid] = [t for t in tags.split(";") if t]
    return result_from_jsonable(data)


def save_truth(path: str | Path, truth: MembershipTable) -> None:
    payload = {sid: sorted(str(pid) for pid in ms) for sid, ms in truth.items()}
    Path(path).write_text(json.dumps({"memberships": payload}, indent=1) + "\n")


def load_truth(path: str | Path) -> MembershipTable:
    with open(path) as fh:
        data = json.load(fh)
    return MembershipTable(
        (sid, frozenset(PhaseId.parse(t) for t in tags))
        for sid, tags in data["memberships"].items()
    )


def save_report(report: dict, path: str | Path) -> None:
    """Baseline sweep report as JSON, or CSV when the extension says so."""
    path = Path(path)
    if path.suffix.lower() != ".csv":
        path.write_text(json.dumps(report, indent=1) + "\n")
        return
    rows = report.get("rows", [])
    cols = list(rows[0].keys()) if rows else ["method", "metric", "param", "n_clusters"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([row[c] for c in cols])


SQRT3_2 = math.sqrt(3.0) / 2.0


def ternary_coords(composition: Sequence[float]) -> tuple[float, float]:
    """Barycentric triple -> 2D point; vertices A=(0,0), B=(1,0), C=(0.5, sqrt(3)/2)."""
    a, b, c = composition
    return (b + 0.5 * c, SQRT3_2 * c)


def plot_data(result: PhaseMapResult, samples: Sequence[XrdSample]) -> dict:
    """The JSON payload behind plot_data.json and the service's plot-data route."""
    by_id = {s.id: s for s in samples}
    return {
        "width": result.catalog.width,
        "params": result.params,
        "lineage_length": len(result.lineage),
        "phases": [
            {
                "id": str(p.id),
                "index": i,
                "color": color_for(p.id),
                "peaks": list(p.representative.peaks),
                "peak_count": p.representative.peak_count,
                "member_count": len(p.member_ids),
            }
            for i, p in enumerate(result.catalog.phases)
        ],
        "samples": [
            {
                "id": sid,
                "x_mm": by_id[sid].wafer_pos[0],
                "y_mm": by_id[sid].wafer_pos[1],
                "ternary": list(ternary_coords(by_id[sid].composition)),
                "composition": list(by_id[sid].composition),
                "phases": sorted(str(pid) for pid in result.memberships[sid]),
                "outlier": not result.memberships[sid],
            }
            for sid in result.memberships
            if sid in by_id
        ],
    }


def _svg_header(width: float, height: float) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:.1f} {height:.1f}" '
        f'width="{width:.1f}" height="{height:.1f}">\n'
        f'<rect width="{width:.1f}" height="{height:.1f}" fill="white"/>\n'
    )


def _sample_markers(result: PhaseMapResult, show_outliers: bool) -> dict[str, list[str]]:
    """Fill colors per sample, largest marker first; [] means skip."""
    known = {p.id for p in result.catalog.phases}
    out: dict[str, list[str]] = {}
    for sid, ms in result.memberships.items():
        if not ms:
            out[sid] = ["#bbbbbb"] if show_outliers else []
        else:
            out[sid] = [color_for(pid) for pid in sorted(ms) if pid in known]
    return out


def _scatter_svg(
    points: dict[str, tuple[float, float]],
    markers: dict[str, list[str]],
    size: float,
    decorations: str,
    r0: float,
) -> str:
    parts = [_svg_header(size, size), decorations]
    for sid, (x, y) in points.items():
        colors = markers.get(sid, [])
        for rank, color in enumerate(colors):
            r = r0 * (1.0 - 0.3 * rank)
            parts.append(
                f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}" fill="{color}">'
                f"<title>{sid}</title></circle>\n"
            )
    parts.append("</svg>\n")
    return "".join(parts)


def render_plots(
    result: PhaseMapResult,
    samples: Sequence[XrdSample],
    out_dir: str | Path,
    show_outliers: bool = False,
) -> list[Path]:
    """Emit wafer.svg, ternary.svg, peaks.svg, and plot_data.json into `out_dir`.

    Mixed samples draw as concentric circles, one per constituent in id
    order, outermost largest.  Outliers are skipped unless requested, then
    drawn grey.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    size = 600.0
    pad = 40.0
    markers = _sample_markers(result, show_outliers)
    by_id = {s.id: s for s in samples}

    xs = [s.wafer_pos[0] for s in samples] or [0.0]
    ys = [s.wafer_pos[1] for s in samples] or [0.0]
    extent = max(max(map(abs, xs)), max(map(abs, ys)), 1.0) * 1.05
    scale = (size / 2 - pad) / extent

    def wafer_xy(s: XrdSample) -> tuple[float, float]:
        return (size / 2 + s.wafer_pos[0] * scale, size / 2 - s.wafer_pos[1] * scale)

    rim = (
        f'<circle cx="{size / 2:.1f}" cy="{size / 2:.1f}" r="{extent * scale:.2f}" '
        'fill="none" stroke="#888888" stroke-width="1"/>\n'
    )
    wafer_svg = _scatter_svg(
        {sid: wafer_xy(by_id[sid]) for sid in markers if sid in by_id},
        markers, size, rim, r0=4.5,
    )

    span = size - 2 * pad

    def tern_xy(s: XrdSample) -> tuple[float, float]:
        tx, ty = ternary_coords(s.composition)
        return (pad + tx * span, size - pad - ty * span)

    corners = [(pad, size - pad), (pad + span, size - pad), (pad + 0.5 * span, size - pad - SQRT3_2 * span)]
    triangle = (
        '<path d="M '
        + " L ".join(f"{x:.2f} {y:.2f}" for x, y in corners)
        + ' Z" fill="none" stroke="#888888" stroke-width="1"/>\n'
    )
    ternary_svg = _scatter_svg(
        {sid: tern_xy(by_id[sid]) for sid in markers if sid in by_id},
        markers, size, triangle, r0=4.0,
    )

    phases = result.catalog.phases
    row_h = 26.0
    peaks_h = pad * 2 + row_h * max(1, len(phases))
    parts = [_svg_header(size, peaks_h)]
    track_w = size - 2 * pad - 70
    width = result.catalog.width or 1
    for i, phase in enumerate(phases):
        y = pad + row_h * i + row_h / 2
        parts.append(
            f'<text x="{pad:.1f}" y="{y + 4:.1f}" font-size="12" font-family="sans-serif">'
            f"{phase.id} (n={len(phase.member_ids)})</text>\n"
        )
        x0 = pad + 70
        parts.append(
            f'<line x1="{x0:.1f}" y1="{y:.1f}" x2="{x0 + track_w:.1f}" y2="{y:.1f}" '
            'stroke="#dddddd" stroke-width="1"/>\n'
        )
        for peak in phase.representative.peaks:
            px = x0 + track_w * (peak + 0.5) / width
            parts.append(
                f'<line x1="{px:.2f}" y1="{y - 8:.1f}" x2="{px:.2f}" y2="{y + 8:.1f}" '
                f'stroke="{color_for(phase.id)}" stroke-width="2"/>\n'
            )
    parts.append("</svg>\n")
    peaks_svg = "".join(parts)

    data = plot_data(result, samples)

    written = []
    for name, content in (
        ("wafer.svg", wafer_svg),
        ("ternary.svg", ternary_svg),
        ("peaks.svg", peaks_svg),
        ("plot_data.json", json.dumps(data, indent=1) + "\n"),
    ):
        target = out_dir / name
        target.write_text(content)
        written.append(target)
    return written
