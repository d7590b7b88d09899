"""CalTag detection and the corner-reflector coarse-window baseline."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import scipy.fft

from .calibrate import Transform2D, cartesian_to_polar
from .config import SPEED_OF_LIGHT, db_to_power
from .dsp import (
    InvalidRegionError,
    PeakResult,
    RangeDopplerMap,
    SearchRegion,
    caltag_region,
    count_local_peaks,
    find_peak_in_region,
    range_doppler_map,
    region_indices,
    region_median_power,
    window,
)
from .radar_sim import DataCube, range_for_beat
from .superres import angle_pseudospectrum, range_pseudospectrum


class NotFoundError(RuntimeError):
    """No fiducial response cleared the presence threshold."""


class InvalidWindowError(ValueError):
    """A coarse window lies outside the radar field of view."""


@dataclass
class Detection:
    range_m: float
    azimuth_deg: float
    method: str  # "caltag" | "corner_reflector"
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.range_m < 0:
            raise ValueError("range must be non-negative")
        if not -90.0 <= self.azimuth_deg <= 90.0:
            raise ValueError("azimuth outside [-90, 90]")


def detection_record(position_id, method: str, detection: Optional[Detection], error: str = "") -> str:
    """One JSON line: position_id, method, range_m, azimuth_deg, status and diagnostics."""
    rec = {
        "position_id": position_id,
        "method": method,
        "range_m": None if detection is None else float(detection.range_m),
        "azimuth_deg": None if detection is None else float(detection.azimuth_deg),
        "status": "ok" if detection is not None else "not_found",
    }
    if detection is not None:
        rec.update({f"diag_{k}": v for k, v in sorted(detection.diagnostics.items())})
    if error:
        rec["error"] = error
    return json.dumps(rec, sort_keys=True)


@dataclass(frozen=True)
class CalTagParams:
    modulation_freq_hz: float = 500e3
    max_tag_range_m: float = 12.0  # sets df_max
    alpha_hz: Optional[float] = None  # None: 5 native range bins
    beta_hz: Optional[float] = None  # None: 3 native Doppler bins
    threshold_db: float = 12.0
    range_fft_size: int = 1024
    doppler_fft_size: int = 1024
    range_grid_m: float = 0.02
    angle_grid_deg: float = 0.25
    range_subarray_len: Optional[int] = None


@dataclass
class CoarsePeak:
    """Output of the 2-D FFT stage, reusable across MUSIC grid settings."""

    rd: RangeDopplerMap
    region: SearchRegion
    peak: PeakResult
    threshold: float


def caltag_coarse(cube: DataCube, params: CalTagParams = CalTagParams()) -> CoarsePeak:
    """Range-Doppler FFT and peak search inside the clutter-free region."""
    cfg = cube.config
    rd = range_doppler_map(cube, params.range_fft_size, params.doppler_fft_size)
    region = caltag_region(cfg, params.modulation_freq_hz, params.max_tag_range_m, params.alpha_hz, params.beta_hz)
    peak = find_peak_in_region(rd, region)
    threshold = max(region_median_power(rd, region) * db_to_power(params.threshold_db), db_to_power(cfg.noise_floor_db))
    if not peak.magnitude > threshold:
        raise NotFoundError(
            f"strongest region bin {10 * math.log10(max(peak.magnitude, 1e-300)):.1f} dB below threshold "
            f"{10 * math.log10(threshold):.1f} dB"
        )
    return CoarsePeak(rd, region, peak, threshold)


def caltag_refine(
    cube: DataCube,
    coarse: CoarsePeak,
    params: CalTagParams = CalTagParams(),
    range_grid_m: Optional[float] = None,
    angle_grid_deg: Optional[float] = None,
) -> Detection:
    cfg = cube.config
    fs = cfg.sample_rate_hz
    f_m = params.modulation_freq_hz
    region, peak = coarse.region, coarse.peak
    range_grid_m = params.range_grid_m if range_grid_m is None else range_grid_m
    angle_grid_deg = params.angle_grid_deg if angle_grid_deg is None else angle_grid_deg

    spec = range_pseudospectrum(
        cube,
        peak.doppler_freq_hz,
        (region.range_freq_lo_hz, region.range_freq_hi_hz),
        range_grid_m,
        subarray_len=params.range_subarray_len,
    )
    shifted_hz = spec.peak_freq * fs
    range_m = max(range_for_beat(cfg, shifted_hz - f_m), 0.0)
    mirror = 2.0 * f_m - shifted_hz if cfg.real_sampling else None
    aspec = angle_pseudospectrum(
        cube, shifted_hz, angle_grid_deg, doppler_freq_hz=peak.doppler_freq_hz, mirror_freq_hz=mirror
    )
    n_candidates = count_local_peaks(
        coarse.rd.power[np.ix_(*region_indices(coarse.rd, region))], coarse.threshold
    )
    diag = {
        "peak_power_db": round(10 * math.log10(peak.magnitude), 6),
        "shifted_freq_hz": shifted_hz,
        "doppler_freq_hz": peak.doppler_freq_hz,
        "region": [region.range_freq_lo_hz, region.range_freq_hi_hz, region.doppler_freq_lo_hz, region.doppler_freq_hi_hz],
        "n_candidate_peaks": n_candidates,
    }
    return Detection(float(range_m), float(aspec.peak_freq), "caltag", diag)


def detect_caltag(cube: DataCube, params: CalTagParams = CalTagParams()) -> Detection:
    """Full CalTag pipeline: 2-D FFT peak in the shifted region, range MUSIC, f_m removal, angle MUSIC.

    Raises :class:`NotFoundError` when nothing in the region clears the
    presence threshold (12 dB over the region median by default).
    """
    return caltag_refine(cube, caltag_coarse(cube, params), params)


def two_peak_range(
    rd: RangeDopplerMap,
    f_m: float,
    *,
    max_shift_hz: Optional[float] = None,
    beta_hz: Optional[float] = None,
    threshold_db: float = 12.0,
) -> float:
    """Range from half the spacing of the harmonics at f_m + df and f_m - df."""
    cfg = rd.config
    nyq = cfg.sample_rate_hz / 2
    span = f_m if max_shift_hz is None else max_shift_hz
    beta = 3 * cfg.doppler_resolution_hz if beta_hz is None else beta_hz
    dmax = 1.0 / (2 * cfg.chirp_duration_s)
    floor = db_to_power(cfg.noise_floor_db)

    def strongest(lo, hi):
        if not lo < hi:
            raise NotFoundError("harmonic search band is empty")
        region = SearchRegion(lo, hi, beta, dmax)
        try:
            pk = find_peak_in_region(rd, region)
        except InvalidRegionError as exc:
            raise NotFoundError(str(exc)) from exc
        thr = max(region_median_power(rd, region) * db_to_power(threshold_db), floor)
        if not pk.magnitude > thr:
            raise NotFoundError(f"no harmonic above threshold in [{lo:.0f}, {hi:.0f}) Hz")
        return pk

    upper = strongest(f_m, min(f_m + span, nyq))
    lower = strongest(max(f_m - span, 0.0), f_m)
    df = 0.5 * (upper.interpolated_freqs_hz[0] - lower.interpolated_freqs_hz[0])
    return range_for_beat(cfg, df)


@dataclass(frozen=True)
class CoarseWindow:
    center_range_m: float
    center_azimuth_deg: float
    range_halfwidth_m: float
    angle_halfwidth_deg: float

    def __post_init__(self):
        if not (self.range_halfwidth_m > 0 and self.angle_halfwidth_deg > 0):
            raise ValueError("window half-widths must be positive")

    def contains(self, range_m: float, azimuth_deg: float) -> bool:
        return (
            abs(range_m - self.center_range_m) <= self.range_halfwidth_m
            and abs(azimuth_deg - self.center_azimuth_deg) <= self.angle_halfwidth_deg
        )


def coarse_window(
    estimated_extrinsic: Transform2D,
    lidar_detection,
    size: tuple[float, float] = (5.0, 0.1),
    injected_angle_error_deg: float = 0.0,
) -> CoarseWindow:
    """Window around the LiDAR fiducial mapped into radar polar coordinates.

    ``estimated_extrinsic`` maps radar to LiDAR coordinates; ``size`` is the
    full (angle deg, range m) extent. The injected error rotates the
    estimate, as a wrong manual angle measurement would.
    """
    T = estimated_extrinsic @ Transform2D.from_angle(injected_angle_error_deg)
    p_radar = T.inverse().apply(np.asarray(lidar_detection, dtype=np.float64))
    r, az = cartesian_to_polar(p_radar)
    r, az = float(r), float(az)
    if not -90.0 < az < 90.0:
        raise InvalidWindowError(f"window centre at {az:.1f} deg is outside the radar field of view")
    return CoarseWindow(r, az, size[1] / 2.0, size[0] / 2.0)


@dataclass(frozen=True)
class CornerReflectorParams:
    range_grid_m: float = 0.02
    angle_grid_deg: float = 0.25
    threshold_db: float = 12.0
    reject_multi_peak: bool = False
    window_name: str = "rect"
    range_fft_size: int = 1024
    angle_fft_size: int = 64


def range_angle_power(
    y: np.ndarray, cube_config, ranges_m: np.ndarray, azimuths_deg: np.ndarray, window_name: str = "rect"
) -> np.ndarray:
    """Range-angle power of zero-Doppler samples ``y`` [N, K] on an arbitrary grid.

    Equivalent to sampling an infinitely zero-padded 2-D FFT; a unit complex
    tone reads 1.0 at its own cell.
    """
    cfg = cube_config
    N, K = y.shape
    w = window(window_name, N)
    n = np.arange(N)
    fr = 2.0 * ranges_m * cfg.bandwidth_hz / (SPEED_OF_LIGHT * cfg.chirp_duration_s) / cfg.sample_rate_hz
    Er = np.exp(-2j * np.pi * np.mod(np.outer(fr, n), 1.0)) * w[None, :]
    ks = cfg.antenna_spacing_wavelengths * np.sin(np.deg2rad(azimuths_deg))
    Ea = np.exp(-2j * np.pi * np.outer(np.arange(K), ks))
    S = (Er @ y) @ Ea / (w.sum() * K)
    return S.real**2 + S.imag**2


def detect_corner_reflector(
    cube: DataCube, win: CoarseWindow, params: CornerReflectorParams = CornerReflectorParams()
) -> Detection:
    """Strongest zero-Doppler range-angle response inside ``win``.

    Chirps are summed coherently first since the reflector has no Doppler
    signature. Diagnostics count window peaks within 6 dB of the strongest.
    """
    cfg = cube.config
    M = cfg.chirps_per_frame
    y = cube.samples.sum(axis=1) / M  # [N, K]

    r_lo = max(win.center_range_m - win.range_halfwidth_m, 0.0)
    r_hi = min(win.center_range_m + win.range_halfwidth_m, cfg.max_range_m)
    a_lo = max(win.center_azimuth_deg - win.angle_halfwidth_deg, -90.0)
    a_hi = min(win.center_azimuth_deg + win.angle_halfwidth_deg, 90.0)
    ranges = _grid(r_lo, r_hi, params.range_grid_m)
    angles = _grid(a_lo, a_hi, params.angle_grid_deg)
    if ranges.size == 0 or angles.size == 0:
        raise NotFoundError("coarse window does not overlap the radar field of view")

    P = range_angle_power(y, cfg, ranges, angles, params.window_name)
    flat = int(np.argmax(P))
    i, j = divmod(flat, P.shape[1])
    peak = float(P[i, j])

    noise_ref = _range_angle_median(y, cfg, params)
    threshold = max(noise_ref * db_to_power(params.threshold_db), db_to_power(cfg.noise_floor_db))
    if not peak > threshold:
        raise NotFoundError("no reflector response above threshold in the coarse window")

    n_peaks = count_local_peaks(P, peak / db_to_power(6.0))
    if params.reject_multi_peak and n_peaks > 1:
        raise NotFoundError(f"{n_peaks} peaks inside the coarse window")
    diag = {
        "peak_power_db": round(10 * math.log10(peak), 6),
        "n_candidate_peaks": n_peaks,
        "window": [win.center_range_m, win.center_azimuth_deg, win.range_halfwidth_m, win.angle_halfwidth_deg],
        "on_window_edge": bool(i in (0, P.shape[0] - 1) or j in (0, P.shape[1] - 1)),
    }
    return Detection(float(ranges[i]), float(angles[j]), "corner_reflector", diag)


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    if hi < lo:
        return np.empty(0)
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


def _range_angle_median(y: np.ndarray, cfg, params: CornerReflectorParams) -> float:
    """Median power of the positive-range half of the FFT range-angle map."""
    N, K = y.shape
    w = window(params.window_name, N)
    spec = scipy.fft.fft(y * w[:, None], n=params.range_fft_size, axis=0)
    spec = scipy.fft.fft(spec, n=max(params.angle_fft_size, K), axis=1) / (w.sum() * K)
    half = spec[: (params.range_fft_size + 1) // 2]
    return float(np.median(half.real**2 + half.imag**2))
