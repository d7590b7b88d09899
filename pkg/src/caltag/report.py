"""Result persistence: JSON-lines records, CSV curves and static SVG plots."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import ExperimentResult  # noqa: E402

SUMMARY_COLUMNS = [
    "experiment",
    "method",
    "clutter_preset",
    "sweep",
    "rotation_deg",
    "window_deg",
    "window_m",
    "angle_error_deg",
    "range_grid_m",
    "angle_grid_deg",
    "status",
    "n_valid",
    "n_failed",
    "train_mean",
    "train_std",
    "test_mean",
    "test_std",
    "config_hash",
    "seed",
]

PRESET_ORDER = {"low": 0, "medium": 1, "high": 2}


class ReportIOError(OSError):
    """Writing or reading a report file failed; the message names the path."""


def sort_key(r: ExperimentResult):
    return (
        r.experiment,
        r.method,
        PRESET_ORDER.get(r.clutter_preset, 99),
        r.clutter_preset,
        json.dumps(r.params, sort_keys=True),
    )


def summary_row(r: ExperimentResult) -> dict:
    row = {k: "" for k in SUMMARY_COLUMNS}
    row.update({k: v for k, v in r.params.items() if k in row})
    row.update(
        experiment=r.experiment,
        method=r.method,
        clutter_preset=r.clutter_preset,
        status=r.status,
        n_valid=r.n_valid,
        n_failed=r.n_failed,
        train_mean=_fmt(r.train_mean),
        train_std=_fmt(r.train_std),
        test_mean=_fmt(r.test_mean),
        test_std=_fmt(r.test_std),
        config_hash=r.config_hash,
        seed=r.seed,
    )
    return row


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _csv_text(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_records(path: str | Path, results: Sequence[ExperimentResult]) -> None:
    text = "".join(r.to_record() + "\n" for r in sorted(results, key=sort_key))
    _write_text(Path(path), text)


def read_records(path: str | Path) -> list[ExperimentResult]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return [ExperimentResult.from_record(line) for line in lines if line.strip()]


def emit_report(results: Sequence[ExperimentResult], out_dir: str | Path) -> list[Path]:
    """Write ``results.jsonl``, ``summary.csv`` and one CSV + SVG per experiment present.

    Output depends only on the result set, not on its order. An empty set
    gives an empty record file and a header-only summary.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(f"cannot create {out}: {exc.strerror or exc}") from exc
    results = sorted(results, key=sort_key)
    written = [out / "results.jsonl", out / "summary.csv"]
    write_records(written[0], results)
    _write_text(written[1], _csv_text(SUMMARY_COLUMNS, (summary_row(r) for r in results)))

    for name in sorted({r.experiment for r in results}):
        group = [r for r in results if r.experiment == name]
        csv_path, svg_path = out / f"{name}.csv", out / f"{name}.svg"
        _write_text(csv_path, _csv_text(SUMMARY_COLUMNS, (summary_row(r) for r in group)))
        fig = PLOTTERS.get(name, _plot_generic)(group)
        _save_svg(fig, svg_path)
        written += [csv_path, svg_path]
    return written


def _save_svg(fig, path: Path) -> None:
    buf = io.StringIO()
    with plt.rc_context({"svg.hashsalt": "caltag", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    _write_text(path, buf.getvalue())


def _nan(v):
    return float("nan") if v is None else v


def _plot_clutter(group: list[ExperimentResult]):
    """Grouped bars: one group per clutter level, train and test bars per method."""
    presets = sorted({r.clutter_preset for r in group}, key=lambda p: (PRESET_ORDER.get(p, 99), p))
    methods = sorted({r.method for r in group})
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.8 / max(2 * len(methods), 1)
    for j, method in enumerate(methods):
        for k, split in enumerate(("train", "test")):
            xs, ys, es = [], [], []
            for i, p in enumerate(presets):
                r = next((r for r in group if r.method == method and r.clutter_preset == p), None)
                xs.append(i + (2 * j + k - len(methods) + 0.5) * width)
                ys.append(_nan(getattr(r, f"{split}_mean", None)) if r else float("nan"))
                es.append(_nan(getattr(r, f"{split}_std", None)) if r else float("nan"))
            ax.bar(xs, ys, width, yerr=es, capsize=2, label=f"{method} {split}")
    ax.set_xticks(range(len(presets)))
    ax.set_xticklabels(presets)
    ax.set_ylabel("RMSE (m)")
    ax.set_xlabel("clutter level")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _plot_window(group: list[ExperimentResult]):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    windows = sorted({(r.params["window_deg"], r.params["window_m"]) for r in group})
    for w in windows:
        pts = sorted(
            (r.params["angle_error_deg"], _nan(r.test_mean))
            for r in group
            if (r.params["window_deg"], r.params["window_m"]) == w
        )
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{w[0]:g} deg x {w[1]:g} m")
    ax.set_xlabel("coarse calibration angle error (deg)")
    ax.set_ylabel("test RMSE (m)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _plot_resolution(group: list[ExperimentResult]):
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.5))
    for ax, sweep, key, label in (
        (axes[0], "range", "range_grid_m", "range grid (m)"),
        (axes[1], "angle", "angle_grid_deg", "angle grid (deg)"),
    ):
        for preset in sorted({r.clutter_preset for r in group}, key=lambda p: (PRESET_ORDER.get(p, 99), p)):
            pts = sorted(
                (r.params[key], _nan(r.test_mean))
                for r in group
                if r.params.get("sweep") == sweep and r.clutter_preset == preset
            )
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=preset)
        ax.set_xscale("log")
        ax.set_xlabel(label)
        ax.set_ylabel("test RMSE (m)")
        ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _plot_rotation(group: list[ExperimentResult]):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    group = sorted(group, key=lambda r: r.params["rotation_deg"])
    xs = list(range(len(group)))
    for k, split in enumerate(("train", "test")):
        ax.bar(
            [x + (k - 0.5) * 0.4 for x in xs],
            [_nan(getattr(r, f"{split}_mean")) for r in group],
            0.4,
            yerr=[_nan(getattr(r, f"{split}_std")) for r in group],
            capsize=2,
            label=split,
        )
    ax.set_xticks(xs)
    ax.set_xticklabels([f"{r.params['rotation_deg']:g}" for r in group])
    ax.set_xlabel("radar rotation (deg)")
    ax.set_ylabel("RMSE (m)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _plot_generic(group: list[ExperimentResult]):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(range(len(group)), [_nan(r.test_mean) for r in group])
    ax.set_ylabel("test RMSE (m)")
    fig.tight_layout()
    return fig


PLOTTERS = {
    "clutter": _plot_clutter,
    "window": _plot_window,
    "resolution": _plot_resolution,
    "rotation": _plot_rotation,
}
