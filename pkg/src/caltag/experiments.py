"""Monte Carlo calibration experiments: clutter levels, coarse-window tradeoff, MUSIC grids, radar rotation.

Frames: the LiDAR frame is the world frame. The true extrinsic maps radar
coordinates into it. Fiducial positions are drawn in the radar frame inside
a fan-shaped region of interest so they always stay in the radar's view.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from .calibrate import Correspondences, Transform2D, calibration_rmse, cartesian_to_polar, kabsch_2d, polar_to_cartesian
from .config import deep_merge, default_config_dict, radar_config_from_dict
from .detect import (
    CalTagParams,
    CornerReflectorParams,
    InvalidWindowError,
    NotFoundError,
    caltag_coarse,
    caltag_refine,
    coarse_window,
    detect_corner_reflector,
)
from .lidar import FiducialNotFoundError, WallSegment, extract_fiducial, simulate_lidar_scan
from .radar_sim import DataCube, Scatterer, Scene, TagModel, synthesize_frame
from .superres import EstimationError

METHODS = ("caltag", "corner_reflector")

# independent random streams, combined with the base seed
STREAM_POSITIONS = 1
STREAM_RADAR = 2
STREAM_LIDAR = 3
STREAM_SPLIT = 4
STREAM_CLUTTER = 5


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def derive_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


@dataclass(frozen=True)
class ExperimentConfig:
    """One scenario cell. ``settings`` is the merged TOML configuration it draws presets from."""

    name: str = "clutter"
    clutter_preset: str = "medium"
    method: str = "caltag"
    n_positions: int = 9
    n_train: int = 6
    n_repeats: int = 50
    rotation_deg: float = 0.0
    window_deg: float = 5.0
    window_m: float = 0.1
    injected_angle_error_deg: float = 0.0
    range_grid_m: float = 0.02
    angle_grid_deg: float = 0.25
    snr_db: float = -20.0
    seed: int = 0
    n_layouts: int = 1  # independent position draws pooled into one result
    settings: Mapping[str, Any] = field(default_factory=default_config_dict, compare=False, repr=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not 1 <= self.n_train < self.n_positions:
            raise ValueError("need 1 <= n_train < n_positions")
        if self.n_repeats < 1 or self.n_layouts < 1:
            raise ValueError("n_repeats and n_layouts must be >= 1")
        if self.clutter_preset not in self.settings.get("clutter", {}):
            raise ValueError(f"unknown clutter preset {self.clutter_preset!r}")
        if not (self.window_deg > 0 and self.window_m > 0 and self.range_grid_m > 0 and self.angle_grid_deg > 0):
            raise ValueError("window sizes and grid steps must be positive")

    @classmethod
    def from_settings(cls, settings: Mapping[str, Any], **overrides) -> "ExperimentConfig":
        ex = settings.get("experiment", {})
        ct = settings.get("caltag", {})
        kw = dict(
            n_positions=int(ex.get("n_positions", 9)),
            n_train=int(ex.get("n_train", 6)),
            n_repeats=int(ex.get("n_repeats", 50)),
            window_deg=float(ex.get("window_deg", 5.0)),
            window_m=float(ex.get("window_m", 0.1)),
            range_grid_m=float(ct.get("range_grid_m", 0.02)),
            angle_grid_deg=float(ct.get("angle_grid_deg", 0.25)),
            snr_db=float(ex.get("snr_db", -20.0)),
            seed=int(ex.get("seed", 0)),
            n_layouts=int(ex.get("n_layouts", 1)),
            settings=settings,
        )
        kw.update(overrides)
        return cls(**kw)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def fields_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "settings"}

    def config_hash(self) -> str:
        """SHA-256 over the scenario fields and the full settings tree."""
        blob = json.dumps({"fields": self.fields_dict(), "settings": self.settings}, sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass
class ExperimentResult:
    experiment: str
    method: str
    clutter_preset: str
    params: dict[str, Any]
    train_rmse: list[float]
    test_rmse: list[float]
    n_valid: int
    failures: list[dict[str, Any]]
    status: str
    config_hash: str
    seed: int

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    def _stat(self, values: list[float], fn: Callable) -> Optional[float]:
        return float(fn(values)) if values else None

    @property
    def train_mean(self) -> Optional[float]:
        return self._stat(self.train_rmse, np.mean)

    @property
    def train_std(self) -> Optional[float]:
        return self._stat(self.train_rmse, np.std)

    @property
    def test_mean(self) -> Optional[float]:
        return self._stat(self.test_rmse, np.mean)

    @property
    def test_std(self) -> Optional[float]:
        return self._stat(self.test_rmse, np.std)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d.update(
            n_failed=self.n_failed,
            train_mean=self.train_mean,
            train_std=self.train_std,
            test_mean=self.test_mean,
            test_std=self.test_std,
        )
        return d

    def to_record(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_record(cls, line: str) -> "ExperimentResult":
        d = json.loads(line)
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


# ---------------------------------------------------------------- scene building


@dataclass(frozen=True)
class Wall:
    """Wall or metal structure in the world frame, seen by both sensors."""

    start: tuple[float, float]
    end: tuple[float, float]
    amplitude: float = 0.5
    spacing_m: float = 0.1

    def radar_points(self) -> np.ndarray:
        a, b = np.asarray(self.start, float), np.asarray(self.end, float)
        n = max(int(round(np.linalg.norm(b - a) / self.spacing_m)) + 1, 2)
        s = np.linspace(0.0, 1.0, n)
        return a[None, :] + s[:, None] * (b - a)[None, :]

    def distance(self, p: np.ndarray) -> np.ndarray:
        a, b = np.asarray(self.start, float), np.asarray(self.end, float)
        ab = b - a
        s = np.clip(((p - a) @ ab) / max(ab @ ab, 1e-300), 0.0, 1.0)
        return np.linalg.norm(p - (a + s[..., None] * ab), axis=-1)


def preset_walls(settings: Mapping[str, Any], preset: str) -> tuple[Wall, ...]:
    return tuple(
        Wall(tuple(w["start"]), tuple(w["end"]), float(w.get("amplitude", 0.5)), float(w.get("spacing_m", 0.1)))
        for w in settings["clutter"][preset].get("walls", [])
    )


def true_extrinsic(ecfg: ExperimentConfig) -> Transform2D:
    t = ecfg.settings.get("experiment", {}).get("radar_translation_m", [0.0, 0.0])
    return Transform2D.from_angle(ecfg.rotation_deg, t)


def coarse_extrinsic(ecfg: ExperimentConfig) -> Transform2D:
    """The manual estimate a corner-reflector user would start from."""
    ex = ecfg.settings.get("experiment", {})
    t = np.asarray(ex.get("radar_translation_m", [0.0, 0.0]), float)
    dt = np.asarray(ex.get("coarse_translation_error_m", [0.0, 0.0]), float)
    return Transform2D.from_angle(ecfg.rotation_deg + float(ex.get("coarse_angle_error_deg", 0.0)), t + dt)


def radar_clutter(ecfg: ExperimentConfig, extrinsic: Transform2D) -> tuple[Scatterer, ...]:
    """Random radar-only scatterers of the preset plus the walls as seen from the radar."""
    cfg = radar_config_from_dict(ecfg.settings["radar"])
    pre = ecfg.settings["clutter"][ecfg.clutter_preset]
    rng = derive_rng(ecfg.seed, STREAM_CLUTTER, _name_key(ecfg.clutter_preset))
    n = int(pre.get("random_count", 0))
    r = rng.uniform(*pre.get("random_range_m", [0.5, 20.0]), n)
    az = rng.uniform(*pre.get("random_azimuth_deg", [-80.0, 80.0]), n)
    amp = rng.uniform(*pre.get("random_amplitude", [0.0, 0.1]), n)
    out = [Scatterer(float(a), float(b), float(c)) for a, b, c in zip(r, az, amp)]

    inv = extrinsic.inverse()
    for wall in preset_walls(ecfg.settings, ecfg.clutter_preset):
        wr, waz = cartesian_to_polar(inv.apply(wall.radar_points()))
        for a, b in zip(wr, waz):
            if -89.0 < b < 89.0 and 0.0 < a < cfg.max_range_m:
                out.append(Scatterer(float(a), float(b), wall.amplitude))
    return tuple(out)


def sample_positions(ecfg: ExperimentConfig, extrinsic: Transform2D, layout: int = 0) -> np.ndarray:
    """Fiducial positions [n x 2] in the radar frame, uniform over the fan's area.

    Candidates too close to each other or to any preset's walls are redrawn,
    so every clutter level shares the same positions.
    """
    ex = ecfg.settings.get("experiment", {})
    r_lo, r_hi = ex.get("roi_range_m", [2.0, 10.0])
    a_lo, a_hi = ex.get("roi_azimuth_deg", [-45.0, 45.0])
    sep = float(ex.get("min_separation_m", 0.4))
    clearance = float(ex.get("wall_clearance_m", 0.3))
    walls = [w for p in ecfg.settings["clutter"] for w in preset_walls(ecfg.settings, p)]
    rng = derive_rng(ecfg.seed, STREAM_POSITIONS, layout)

    pts: list[np.ndarray] = []
    for _ in range(100000):
        if len(pts) == ecfg.n_positions:
            break
        r = math.sqrt(rng.uniform(r_lo**2, r_hi**2))
        az = rng.uniform(a_lo, a_hi)
        p = polar_to_cartesian(r, az)
        if any(np.linalg.norm(p - q) < sep for q in pts):
            continue
        world = extrinsic.apply(p)
        if any(w.distance(world) < clearance for w in walls):
            continue
        pts.append(p)
    else:
        raise ValueError("could not place fiducial positions inside the region of interest")
    if len(pts) < ecfg.n_positions:
        raise ValueError("could not place fiducial positions inside the region of interest")
    return np.array(pts)


@dataclass
class PositionData:
    index: int
    radar_point: np.ndarray  # ground truth, radar frame
    cube: DataCube
    lidar_point: Optional[np.ndarray]  # extracted, LiDAR frame
    lidar_error: str = ""
    layout: int = 0


@dataclass
class ScenarioData:
    ecfg: ExperimentConfig
    extrinsic: Transform2D
    positions: list[PositionData]
    layout: int = 0


def simulate_scenario(ecfg: ExperimentConfig, layout: int = 0) -> ScenarioData:
    """Radar frames and LiDAR extractions for every fiducial position of one layout."""
    s = ecfg.settings
    cfg = radar_config_from_dict(s["radar"])
    T = true_extrinsic(ecfg)
    clutter = radar_clutter(ecfg, T)
    pts = sample_positions(ecfg, T, layout)
    ex, ct, li = s.get("experiment", {}), s.get("caltag", {}), s.get("lidar", {})
    lidar_walls = [WallSegment(w.start, w.end) for w in preset_walls(s, ecfg.clutter_preset)]

    out = []
    for i, p in enumerate(pts):
        r, az = (float(v) for v in cartesian_to_polar(p))
        if ecfg.method == "caltag":
            tag = TagModel(
                r,
                az,
                amplitude=float(ex.get("tag_amplitude", 1.0)),
                modulation_freq_hz=float(ct.get("modulation_freq_hz", 500e3)),
                duty_cycle=float(ct.get("duty_cycle", 0.5)),
                doppler_offset_hz=ct.get("doppler_offset_hz"),
            )
            scene = Scene(clutter, tag=tag, seed=derive_seed(ecfg.seed, STREAM_RADAR, layout, i))
        else:
            cr = Scatterer(r, az, float(ex.get("reflector_amplitude", 1.0)))
            scene = Scene(clutter, corner_reflector=cr, seed=derive_seed(ecfg.seed, STREAM_RADAR, layout, i))
        cube = synthesize_frame(cfg, scene, ecfg.snr_db)

        cloud = simulate_lidar_scan(
            T.apply(p),
            derive_rng(ecfg.seed, STREAM_LIDAR, layout, i),
            noise_std_m=float(li.get("noise_std_m", 0.01)),
            n_fiducial_points=int(li.get("n_fiducial_points", 40)),
            fiducial_size_m=float(li.get("fiducial_size_m", 0.1)),
            walls=lidar_walls,
            wall_point_spacing_m=float(li.get("wall_point_spacing_m", 0.05)),
            n_background_points=int(li.get("n_background_points", 0)),
        )
        try:
            lp = extract_fiducial(
                cloud,
                z_band=tuple(li.get("z_band_m", (-0.3, 0.3))),
                eps_m=float(li.get("eps_m", 0.1)),
                min_points=int(li.get("min_points", 5)),
                score=str(li.get("score", "sum")),
            )
            out.append(PositionData(i, p, cube, lp, layout=layout))
        except FiducialNotFoundError as exc:
            out.append(PositionData(i, p, cube, None, str(exc), layout))
    return ScenarioData(ecfg, T, out, layout)


def simulate_layouts(ecfg: ExperimentConfig) -> list[ScenarioData]:
    return [simulate_scenario(ecfg, k) for k in range(ecfg.n_layouts)]


# ---------------------------------------------------------------- detection and fitting


def caltag_params(settings: Mapping[str, Any]) -> CalTagParams:
    ct = settings.get("caltag", {})
    names = {f.name for f in dataclasses.fields(CalTagParams)}
    return CalTagParams(**{k: v for k, v in ct.items() if k in names})


def reflector_params(settings: Mapping[str, Any]) -> CornerReflectorParams:
    cr = settings.get("corner_reflector", {})
    names = {f.name for f in dataclasses.fields(CornerReflectorParams)}
    return CornerReflectorParams(**{k: v for k, v in cr.items() if k in names})


DetectFn = Callable[[PositionData], np.ndarray]


def caltag_detector(ecfg: ExperimentConfig, cache: Optional[dict] = None) -> DetectFn:
    """Detector closure; ``cache`` keeps 2-D FFT peaks so grid sweeps skip recomputing them."""
    params = caltag_params(ecfg.settings)

    def run(pd: PositionData) -> np.ndarray:
        key = (pd.layout, pd.index)
        coarse = cache.get(key) if cache is not None else None
        if coarse is None:
            coarse = caltag_coarse(pd.cube, params)
            if cache is not None:
                cache[key] = coarse
        det = caltag_refine(pd.cube, coarse, params, ecfg.range_grid_m, ecfg.angle_grid_deg)
        return polar_to_cartesian(det.range_m, det.azimuth_deg)

    return run


def reflector_detector(ecfg: ExperimentConfig) -> DetectFn:
    params = dataclasses.replace(
        reflector_params(ecfg.settings), range_grid_m=ecfg.range_grid_m, angle_grid_deg=ecfg.angle_grid_deg
    )
    T0 = coarse_extrinsic(ecfg)

    def run(pd: PositionData) -> np.ndarray:
        win = coarse_window(T0, pd.lidar_point, (ecfg.window_deg, ecfg.window_m), ecfg.injected_angle_error_deg)
        det = detect_corner_reflector(pd.cube, win, params)
        return polar_to_cartesian(det.range_m, det.azimuth_deg)

    return run


def detector_for(ecfg: ExperimentConfig, cache: Optional[dict] = None) -> DetectFn:
    return caltag_detector(ecfg, cache) if ecfg.method == "caltag" else reflector_detector(ecfg)


def collect_correspondences(data: ScenarioData, detect: DetectFn) -> tuple[Optional[Correspondences], list[dict]]:
    radar, lidar, failures = [], [], []
    for pd in data.positions:
        where = {"layout": data.layout, "position_id": pd.index}
        if pd.lidar_point is None:
            failures.append({**where, "sensor": "lidar", "error": pd.lidar_error})
            continue
        try:
            q = detect(pd)
        except (NotFoundError, InvalidWindowError, EstimationError) as exc:
            failures.append({**where, "sensor": "radar", "error": str(exc)})
            continue
        radar.append(q)
        lidar.append(pd.lidar_point)
    if not radar:
        return None, failures
    return Correspondences(np.array(radar), np.array(lidar)), failures


def split_rmse(
    c: Correspondences, n_train: int, n_test: int, n_repeats: int, rng: np.random.Generator
) -> tuple[list[float], list[float]]:
    """Repeated random train/test splits: fit Kabsch on the train part, RMSE on both parts."""
    if len(c) < n_train + 1:
        raise ValueError("not enough correspondences for a train/test split")
    n_test = min(n_test, len(c) - n_train)
    train, test = [], []
    for _ in range(n_repeats):
        perm = rng.permutation(len(c))
        tr, te = c.subset(perm[:n_train]), c.subset(perm[n_train : n_train + n_test])
        T = kabsch_2d(tr)
        train.append(calibration_rmse(T, tr))
        test.append(calibration_rmse(T, te))
    return train, test


def evaluate(
    data: ScenarioData | Sequence[ScenarioData], detect: DetectFn, ecfg: Optional[ExperimentConfig] = None, **params
) -> ExperimentResult:
    """Detect at every position, then run the repeated split on the valid ones.

    Several layouts are pooled by concatenating their per-repeat RMSEs. A
    layout with fewer than n_train + 1 valid correspondences is skipped; the
    result is marked failed when no layout is usable.
    """
    layouts = [data] if isinstance(data, ScenarioData) else list(data)
    ecfg = ecfg or layouts[0].ecfg
    train: list[float] = []
    test: list[float] = []
    failures: list[dict] = []
    n_valid = 0
    for d in layouts:
        c, fails = collect_correspondences(d, detect)
        failures.extend(fails)
        n = 0 if c is None else len(c)
        n_valid += n
        if n < ecfg.n_train + 1:
            failures.append({"layout": d.layout, "position_id": None, "sensor": "split", "error": f"only {n} valid positions"})
            continue
        rng = derive_rng(ecfg.seed, STREAM_SPLIT, d.layout)
        tr, te = split_rmse(c, ecfg.n_train, ecfg.n_positions - ecfg.n_train, ecfg.n_repeats, rng)
        train.extend(tr)
        test.extend(te)
    return ExperimentResult(
        experiment=ecfg.name,
        method=ecfg.method,
        clutter_preset=ecfg.clutter_preset,
        params=params,
        train_rmse=train,
        test_rmse=test,
        n_valid=n_valid,
        failures=failures,
        status="ok" if train else "failed",
        config_hash=ecfg.config_hash(),
        seed=ecfg.seed,
    )


def run_scenario(ecfg: ExperimentConfig, **params) -> ExperimentResult:
    return evaluate(simulate_layouts(ecfg), detector_for(ecfg), ecfg, **params)


# ---------------------------------------------------------------- experiments


def scoped_settings(settings: Mapping[str, Any], name: str) -> dict[str, Any]:
    """Settings with ``[experiments.<name>.scene]`` merged over ``[experiment]``."""
    scene = settings.get("experiments", {}).get(name, {}).get("scene", {})
    return deep_merge(settings, {"experiment": scene}) if scene else dict(settings)


def _base(settings: Mapping[str, Any], name: str, **overrides) -> ExperimentConfig:
    return ExperimentConfig.from_settings(scoped_settings(settings, name), name=name, **overrides)


def run_clutter_experiment(
    settings: Mapping[str, Any], presets: Optional[Sequence[str]] = None, methods: Optional[Sequence[str]] = None, **overrides
) -> list[ExperimentResult]:
    """Train/test RMSE for every (clutter preset, method) cell."""
    table = settings.get("experiments", {}).get("clutter", {})
    presets = list(presets or table.get("presets", ["low", "medium", "high"]))
    methods = list(methods or table.get("methods", list(METHODS)))
    results = []
    for preset in presets:
        for method in methods:
            ecfg = _base(settings, "clutter", clutter_preset=preset, method=method, **overrides)
            if method == "caltag":
                params = {"range_grid_m": ecfg.range_grid_m, "angle_grid_deg": ecfg.angle_grid_deg}
            else:
                params = {"window_deg": ecfg.window_deg, "window_m": ecfg.window_m}
            results.append(run_scenario(ecfg, **params))
    return results


def run_window_tradeoff(
    settings: Mapping[str, Any],
    angle_errors_deg: Optional[Sequence[float]] = None,
    windows: Optional[Sequence[Sequence[float]]] = None,
    **overrides,
) -> list[ExperimentResult]:
    """Corner-reflector RMSE against injected coarse angle error, one curve per window size."""
    table = settings.get("experiments", {}).get("window", {})
    errors = list(angle_errors_deg if angle_errors_deg is not None else table.get("angle_errors_deg", [0, 10, 20, 30]))
    windows = list(windows or [table.get("small_window", [10.0, 0.2]), table.get("large_window", [60.0, 2.0])])
    overrides.setdefault("clutter_preset", table.get("preset", "medium"))
    base = _base(settings, "window", method="corner_reflector", **overrides)
    data = simulate_layouts(base)
    results = []
    for w_deg, w_m in windows:
        for err in errors:
            ecfg = base.replace(window_deg=float(w_deg), window_m=float(w_m), injected_angle_error_deg=float(err))
            params = {"window_deg": float(w_deg), "window_m": float(w_m), "angle_error_deg": float(err)}
            results.append(evaluate(data, reflector_detector(ecfg), ecfg, **params))
    return results


def run_resolution_sweep(
    settings: Mapping[str, Any],
    range_grids_m: Optional[Sequence[float]] = None,
    angle_grids_deg: Optional[Sequence[float]] = None,
    presets: Optional[Sequence[str]] = None,
    **overrides,
) -> list[ExperimentResult]:
    """CalTag RMSE while sweeping one MUSIC grid and holding the other fine."""
    table = settings.get("experiments", {}).get("resolution", {})
    rgrids = list(range_grids_m or table.get("range_grids_m", [0.005, 0.02, 0.04]))
    agrids = list(angle_grids_deg or table.get("angle_grids_deg", [0.001, 0.25, 2.0]))
    presets = list(presets or table.get("presets", ["medium"]))
    fixed_angle = float(table.get("fixed_angle_grid_deg", 0.001))
    fixed_range = float(table.get("fixed_range_grid_m", 0.005))
    results = []
    for preset in presets:
        base = _base(settings, "resolution", clutter_preset=preset, method="caltag", **overrides)
        data = simulate_layouts(base)
        cache: dict = {}
        for g in rgrids:
            ecfg = base.replace(range_grid_m=float(g), angle_grid_deg=fixed_angle)
            params = {"sweep": "range", "range_grid_m": float(g), "angle_grid_deg": fixed_angle}
            results.append(evaluate(data, caltag_detector(ecfg, cache), ecfg, **params))
        for g in agrids:
            ecfg = base.replace(range_grid_m=fixed_range, angle_grid_deg=float(g))
            params = {"sweep": "angle", "range_grid_m": fixed_range, "angle_grid_deg": float(g)}
            results.append(evaluate(data, caltag_detector(ecfg, cache), ecfg, **params))
    return results


def run_rotation_sweep(
    settings: Mapping[str, Any], angles_deg: Optional[Sequence[float]] = None, **overrides
) -> list[ExperimentResult]:
    """Full CalTag pipeline with the radar yawed against the LiDAR."""
    table = settings.get("experiments", {}).get("rotation", {})
    angles = list(angles_deg if angles_deg is not None else table.get("angles_deg", [0, 10, 20, 30]))
    overrides.setdefault("clutter_preset", table.get("preset", "medium"))
    results = []
    for a in angles:
        ecfg = _base(settings, "rotation", method="caltag", rotation_deg=float(a), **overrides)
        results.append(run_scenario(ecfg, rotation_deg=float(a)))
    return results


EXPERIMENTS: dict[str, Callable[..., list[ExperimentResult]]] = {
    "clutter": run_clutter_experiment,
    "window": run_window_tradeoff,
    "resolution": run_resolution_sweep,
    "rotation": run_rotation_sweep,
}


def run_experiment(name: str, settings: Mapping[str, Any], **overrides) -> list[ExperimentResult]:
    """Run one named experiment, or all of them with ``name="all"``."""
    if name == "all":
        out: list[ExperimentResult] = []
        for fn in EXPERIMENTS.values():
            out.extend(fn(settings, **overrides))
        return out
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS) + ['all']}")
    return EXPERIMENTS[name](settings, **overrides)
