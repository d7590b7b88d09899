"""Command-line entry point: ``caltag simulate | detect | calibrate | experiment | report``.

Exit codes: 0 success, 1 usage or config error, 2 detection/estimation
failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .calibrate import Correspondences, calibration_rmse, calibration_sse, kabsch_2d, polar_to_cartesian
from .config import deep_merge, load_config, radar_config_from_dict
from .detect import (
    CoarseWindow,
    InvalidWindowError,
    NotFoundError,
    detect_caltag,
    detect_corner_reflector,
    detection_record,
)
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    caltag_params,
    radar_clutter,
    reflector_params,
    run_experiment,
    true_extrinsic,
)
from .lidar import FiducialNotFoundError, WallSegment, extract_fiducial, read_points_csv, simulate_lidar_scan, write_points_csv
from .radar_sim import Scatterer, Scene, TagModel, read_cube, synthesize_frame, write_cube
from .report import ReportIOError, emit_report, read_records
from .superres import EstimationError

log = logging.getLogger("caltag")

EXIT_OK, EXIT_USAGE, EXIT_DETECTION, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="base random seed (default: from config)")
    p.add_argument("--config", type=Path, default=None, help="TOML file merged over the shipped defaults")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="caltag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="synthesise one radar frame and LiDAR scan")
    _common(p)
    p.add_argument("--method", choices=["caltag", "corner_reflector"], default="caltag")
    p.add_argument("--range-m", type=float, default=3.0)
    p.add_argument("--azimuth-deg", type=float, default=10.0)
    p.add_argument("--preset", default="low", help="clutter preset")
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--rotation-deg", type=float, default=0.0)

    p = sub.add_parser("detect", help="detect the fiducial in a cube file")
    _common(p)
    p.add_argument("--cube", type=Path, required=True)
    p.add_argument("--method", choices=["caltag", "corner_reflector"], default="caltag")
    p.add_argument("--position-id", type=int, default=0)
    p.add_argument("--window", type=float, nargs=2, metavar=("RANGE_M", "AZIMUTH_DEG"), help="corner-reflector window centre")
    p.add_argument("--window-deg", type=float, default=None)
    p.add_argument("--window-m", type=float, default=None)
    p.add_argument("--lidar", type=Path, default=None, help="point cloud CSV; appends its fiducial to lidar_points.csv")

    p = sub.add_parser("calibrate", help="fit the extrinsic from detection and LiDAR records")
    _common(p)
    p.add_argument("--detections", type=Path, required=True, help="detections.jsonl")
    p.add_argument("--lidar-points", type=Path, required=True, help="CSV with position_id,x,y")

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment and write its report")
    _common(p)
    p.add_argument("name", choices=sorted(EXPERIMENTS) + ["all"])
    p.add_argument("--n-positions", type=int)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-repeats", type=int)
    p.add_argument("--n-layouts", type=int)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--window-deg", type=float)
    p.add_argument("--window-m", type=float)
    p.add_argument("--range-grid-m", type=float)
    p.add_argument("--angle-grid-deg", type=float)

    p = sub.add_parser("report", help="regenerate CSV and SVG output from a results file")
    _common(p)
    p.add_argument("--results", type=Path, required=True)
    return parser


def _settings(args) -> dict:
    s = load_config(args.config)
    if args.seed is not None:
        s = deep_merge(s, {"experiment": {"seed": args.seed}})
    return s


def _mkdir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(f"cannot create {path}: {exc.strerror or exc}") from exc


def cmd_simulate(args) -> int:
    s = _settings(args)
    cfg = radar_config_from_dict(s["radar"])
    ecfg = ExperimentConfig.from_settings(
        s, method=args.method, clutter_preset=args.preset, rotation_deg=args.rotation_deg
    )
    snr = ecfg.snr_db if args.snr_db is None else args.snr_db
    T = true_extrinsic(ecfg)
    clutter = radar_clutter(ecfg, T)
    ct, li = s.get("caltag", {}), s.get("lidar", {})
    if args.method == "caltag":
        tag = TagModel(
            args.range_m,
            args.azimuth_deg,
            modulation_freq_hz=float(ct.get("modulation_freq_hz", 500e3)),
            duty_cycle=float(ct.get("duty_cycle", 0.5)),
        )
        scene = Scene(clutter, tag=tag, seed=ecfg.seed)
    else:
        scene = Scene(clutter, corner_reflector=Scatterer(args.range_m, args.azimuth_deg), seed=ecfg.seed)
    cube = synthesize_frame(cfg, scene, snr)

    p_radar = polar_to_cartesian(args.range_m, args.azimuth_deg)
    walls = [WallSegment(tuple(w["start"]), tuple(w["end"])) for w in s["clutter"][args.preset].get("walls", [])]
    cloud = simulate_lidar_scan(
        T.apply(p_radar),
        np.random.default_rng(ecfg.seed),
        noise_std_m=float(li.get("noise_std_m", 0.01)),
        n_fiducial_points=int(li.get("n_fiducial_points", 40)),
        walls=walls,
        n_background_points=int(li.get("n_background_points", 0)),
    )
    _mkdir(args.out)
    try:
        write_cube(args.out / "cube.bin", cube)
        write_points_csv(args.out / "lidar.csv", cloud)
        truth = {
            "method": args.method,
            "range_m": args.range_m,
            "azimuth_deg": args.azimuth_deg,
            "preset": args.preset,
            "snr_db": snr,
            "seed": ecfg.seed,
            "extrinsic": json.loads(T.to_record()),
        }
        (args.out / "scene.json").write_text(json.dumps(truth, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise ReportIOError(f"cannot write simulation output in {args.out}: {exc}") from exc
    print(f"wrote {args.out / 'cube.bin'}, {args.out / 'lidar.csv'}, {args.out / 'scene.json'}")
    return EXIT_OK


def cmd_detect(args) -> int:
    s = _settings(args)
    try:
        cube = read_cube(args.cube, radar_config_from_dict(s["radar"]))
    except OSError as exc:
        raise ReportIOError(f"cannot read {args.cube}: {exc.strerror or exc}") from exc
    status = EXIT_OK
    try:
        if args.method == "caltag":
            det = detect_caltag(cube, caltag_params(s))
        else:
            if args.window is None:
                raise UsageError("corner_reflector detection needs --window RANGE_M AZIMUTH_DEG")
            ex = s.get("experiment", {})
            w_deg = args.window_deg if args.window_deg is not None else float(ex.get("window_deg", 5.0))
            w_m = args.window_m if args.window_m is not None else float(ex.get("window_m", 0.1))
            win = CoarseWindow(args.window[0], args.window[1], w_m / 2, w_deg / 2)
            det = detect_corner_reflector(cube, win, reflector_params(s))
        line = detection_record(args.position_id, args.method, det)
    except (NotFoundError, InvalidWindowError, EstimationError) as exc:
        line = detection_record(args.position_id, args.method, None, str(exc))
        status = EXIT_DETECTION

    _mkdir(args.out)
    path = args.out / "detections.jsonl"
    try:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    print(line)

    if args.lidar is not None:
        li = s.get("lidar", {})
        try:
            cloud = read_points_csv(args.lidar)
        except OSError as exc:
            raise ReportIOError(f"cannot read {args.lidar}: {exc.strerror or exc}") from exc
        try:
            xy = extract_fiducial(
                cloud,
                z_band=tuple(li.get("z_band_m", (-0.3, 0.3))),
                eps_m=float(li.get("eps_m", 0.1)),
                min_points=int(li.get("min_points", 5)),
                score=str(li.get("score", "sum")),
            )
        except FiducialNotFoundError as exc:
            log.error("lidar: %s", exc)
            return EXIT_DETECTION
        lp = args.out / "lidar_points.csv"
        try:
            new = not lp.exists()
            with open(lp, "a", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                if new:
                    w.writerow(["position_id", "x", "y"])
                w.writerow([args.position_id, repr(float(xy[0])), repr(float(xy[1]))])
        except OSError as exc:
            raise ReportIOError(f"cannot write {lp}: {exc.strerror or exc}") from exc
    return status


def cmd_calibrate(args) -> int:
    try:
        lines = args.detections.read_text(encoding="utf-8").splitlines()
        with open(args.lidar_points, newline="", encoding="utf-8") as fh:
            lidar = {int(row["position_id"]): (float(row["x"]), float(row["y"])) for row in csv.DictReader(fh)}
    except OSError as exc:
        raise ReportIOError(f"cannot read calibration inputs: {exc}") from exc

    radar, pts, ids = [], [], []
    for line in lines:
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("status") != "ok" or rec["position_id"] not in lidar:
            continue
        radar.append(polar_to_cartesian(rec["range_m"], rec["azimuth_deg"]))
        pts.append(lidar[rec["position_id"]])
        ids.append(rec["position_id"])
    if len(radar) < 2:
        log.error("need at least two paired detections, found %d", len(radar))
        return EXIT_DETECTION
    c = Correspondences(np.array(radar), np.array(pts))
    T = kabsch_2d(c)
    line = T.to_record(rmse_m=calibration_rmse(T, c), sse_m2=calibration_sse(T, c), n=len(c), position_ids=ids)
    _mkdir(args.out)
    path = args.out / "transform.json"
    try:
        path.write_text(line + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    print(line)
    return EXIT_OK


_EXPERIMENT_FLAGS = {
    "n_positions": ("experiment", "n_positions"),
    "n_train": ("experiment", "n_train"),
    "n_repeats": ("experiment", "n_repeats"),
    "n_layouts": ("experiment", "n_layouts"),
    "snr_db": ("experiment", "snr_db"),
    "window_deg": ("experiment", "window_deg"),
    "window_m": ("experiment", "window_m"),
    "range_grid_m": ("caltag", "range_grid_m"),
    "angle_grid_deg": ("caltag", "angle_grid_deg"),
}


def cmd_experiment(args) -> int:
    s = _settings(args)
    over: dict = {}
    for flag, (table, key) in _EXPERIMENT_FLAGS.items():
        v = getattr(args, flag)
        if v is not None:
            over.setdefault(table, {})[key] = v
    s = deep_merge(s, over)
    # scene tables of individual experiments must not silently undo explicit flags
    for table in s.get("experiments", {}).values():
        if isinstance(table, dict) and "scene" in table:
            for k in over.get("experiment", {}):
                table["scene"].pop(k, None)

    results = run_experiment(args.name, s)
    files = emit_report(results, args.out)
    for r in sorted(results, key=lambda r: (r.experiment, r.method, r.clutter_preset, json.dumps(r.params, sort_keys=True))):
        mean = "failed" if r.test_mean is None else f"train {r.train_mean:.4f} m, test {r.test_mean:.4f} m"
        print(f"{r.experiment:10s} {r.method:16s} {r.clutter_preset:6s} {json.dumps(r.params, sort_keys=True)}: {mean}")
    print(f"wrote {len(files)} files to {args.out}")
    return EXIT_OK if all(r.status == "ok" for r in results) else EXIT_DETECTION


def cmd_report(args) -> int:
    results = read_records(args.results)
    files = emit_report(results, args.out)
    print(f"wrote {len(files)} files to {args.out}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "calibrate": cmd_calibrate,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (ReportIOError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        # bad config values, unknown presets, malformed records
        log.error("invalid input: %s", exc)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
