"""Range/Doppler FFT processing and bin <-> physical-unit conversions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.fft

from .config import SPEED_OF_LIGHT, DomainError, RadarConfig
from .radar_sim import DataCube, cube_to_bytes


class InvalidRegionError(ValueError):
    """A search region selects no bins of the map."""


def window(name: str, n: int) -> np.ndarray:
    if name in ("rect", "rectangular", None):
        return np.ones(n)
    if name == "hann":
        # periodic Hann; matches the zero-padded FFT's bin grid
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    raise ValueError(f"unknown window {name!r}")


def range_fft(cube: DataCube | np.ndarray, n_fft: int = 1024, window_name: str = "rect") -> np.ndarray:
    """Zero-padded FFT along the sample axis; returns [n_fft, M, K]."""
    x = cube.samples if isinstance(cube, DataCube) else np.asarray(cube)
    N = x.shape[0]
    if n_fft < N:
        raise ValueError(f"n_fft={n_fft} shorter than {N} samples")
    w = window(window_name, N)
    return scipy.fft.fft(x * w[:, None, None], n=n_fft, axis=0)


@dataclass
class RangeDopplerMap:
    """Antenna-averaged power on a [range_bins x doppler_bins] grid.

    Power is normalised so that a unit-amplitude complex tone sitting on a
    bin centre reads 1.0 (rectangular windows). The Doppler axis is
    centred: column ``doppler_fft_size // 2`` is the static line.
    """

    power: np.ndarray
    range_fft_size: int
    doppler_fft_size: int
    config: RadarConfig
    spectrum: Optional[np.ndarray] = None  # complex [R, D, K] when kept

    def __post_init__(self):
        if self.power.shape != (self.range_fft_size, self.doppler_fft_size):
            raise ValueError("power grid does not match FFT sizes")

    @property
    def range_freqs_hz(self) -> np.ndarray:
        return np.arange(self.range_fft_size) * self.config.sample_rate_hz / self.range_fft_size

    @property
    def doppler_bins(self) -> np.ndarray:
        D = self.doppler_fft_size
        return np.arange(D) - D // 2

    @property
    def doppler_freqs_hz(self) -> np.ndarray:
        return self.doppler_bins / (self.doppler_fft_size * self.config.chirp_duration_s)

    @property
    def positive_range_bins(self) -> int:
        """Bins strictly below f_s/2; only these take part in detection."""
        return (self.range_fft_size + 1) // 2

    def doppler_column(self, doppler_bin: int) -> int:
        return int(doppler_bin) + self.doppler_fft_size // 2

    def to_csv(self, path: str | Path) -> None:
        """Long-format magnitude export: range_hz, doppler_hz, power_db."""
        rf, df = self.range_freqs_hz, self.doppler_freqs_hz
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["range_freq_hz", "doppler_freq_hz", "power_db"])
            db = 10 * np.log10(np.maximum(self.power, 1e-300))
            for i in range(self.range_fft_size):
                for j in range(self.doppler_fft_size):
                    w.writerow([repr(float(rf[i])), repr(float(df[j])), f"{db[i, j]:.6f}"])

    def to_bytes(self) -> bytes:
        """Binary export in the cube container: N=range bins, M=Doppler bins, K=1."""
        return cube_to_bytes(self.power[:, :, None].astype(np.complex128))


def doppler_fft(
    range_spectrum: np.ndarray,
    n_fft: int = 1024,
    *,
    config: RadarConfig,
    window_name: str = "rect",
    range_window_sum: Optional[float] = None,
    keep_complex: bool = False,
) -> RangeDopplerMap:
    """FFT along chirps of a range spectrum [R, M, K], fftshifted to centre zero Doppler."""
    R, M, K = range_spectrum.shape
    if n_fft < M:
        raise ValueError(f"n_fft={n_fft} shorter than {M} chirps")
    w = window(window_name, M)
    n_win = config.samples_per_chirp if range_window_sum is None else range_window_sum
    scale = 1.0 / (n_win * w.sum())
    power = np.zeros((R, n_fft))
    kept = np.empty((R, n_fft, K), dtype=np.complex128) if keep_complex else None
    # one antenna at a time bounds peak memory at [R, n_fft]
    for k in range(K):
        spec = scipy.fft.fft(range_spectrum[:, :, k] * w[None, :], n=n_fft, axis=1)
        spec = scipy.fft.fftshift(spec, axes=1) * scale
        power += spec.real**2 + spec.imag**2
        if kept is not None:
            kept[:, :, k] = spec
    return RangeDopplerMap(power / K, R, n_fft, config, kept)


def range_doppler_map(
    cube: DataCube, range_fft_size: int = 1024, doppler_fft_size: int = 1024, window_name: str = "rect"
) -> RangeDopplerMap:
    rs = range_fft(cube, range_fft_size, window_name)
    wsum = window(window_name, cube.config.samples_per_chirp).sum()
    return doppler_fft(rs, doppler_fft_size, config=cube.config, window_name=window_name, range_window_sum=wsum)


def bin_to_range(config: RadarConfig, k: float) -> float:
    """Normalised beat frequency k (cycles/sample) to metres: d = c*k*N / (2*BW)."""
    if not 0.0 <= k <= 1.0:
        raise DomainError(f"normalised frequency {k} outside [0, 1]")
    return SPEED_OF_LIGHT * k * config.samples_per_chirp / (2.0 * config.bandwidth_hz)


def range_to_bin(config: RadarConfig, range_m: float) -> float:
    return range_m * 2.0 * config.bandwidth_hz / (SPEED_OF_LIGHT * config.samples_per_chirp)


def bin_to_angle(k: float, spacing_wavelengths: float = 0.5) -> float:
    """Normalised spatial frequency to azimuth in degrees (theta = asin(2k) at lambda/2)."""
    s = k / spacing_wavelengths
    if abs(s) > 1.0:
        raise DomainError(f"spatial frequency {k} beyond the visible region")
    return math.degrees(math.asin(s))


def angle_to_bin(azimuth_deg: float, spacing_wavelengths: float = 0.5) -> float:
    return spacing_wavelengths * math.sin(math.radians(azimuth_deg))


@dataclass(frozen=True)
class SearchRegion:
    range_freq_lo_hz: float
    range_freq_hi_hz: float
    doppler_freq_lo_hz: float
    doppler_freq_hi_hz: float

    def __post_init__(self):
        if not self.range_freq_lo_hz < self.range_freq_hi_hz:
            raise ValueError("range_freq_lo_hz must be below range_freq_hi_hz")
        if not self.doppler_freq_lo_hz < self.doppler_freq_hi_hz:
            raise ValueError("doppler_freq_lo_hz must be below doppler_freq_hi_hz")
        if not self.doppler_freq_lo_hz > 0:
            raise ValueError("doppler gate must exclude the zero-Doppler line")

    def contains(self, range_freq_hz: float, doppler_freq_hz: float) -> bool:
        return (
            self.range_freq_lo_hz <= range_freq_hz < self.range_freq_hi_hz
            and self.doppler_freq_lo_hz <= doppler_freq_hz <= self.doppler_freq_hi_hz
        )


def caltag_region(
    config: RadarConfig,
    modulation_freq_hz: float,
    max_tag_range_m: float,
    alpha_hz: Optional[float] = None,
    beta_hz: Optional[float] = None,
) -> SearchRegion:
    """Region [f_m, f_m + df_max + alpha) x [beta, max Doppler] holding the upper tag harmonic.

    alpha defaults to five native range bins (f_s/N each) and beta to three
    native Doppler bins (1/(M*T) each).
    """
    alpha = 5 * config.range_bin_hz if alpha_hz is None else alpha_hz
    beta = 3 * config.doppler_resolution_hz if beta_hz is None else beta_hz
    df_max = 2.0 * max_tag_range_m * config.bandwidth_hz / (SPEED_OF_LIGHT * config.chirp_duration_s)
    hi = min(modulation_freq_hz + df_max + alpha, config.sample_rate_hz / 2)
    return SearchRegion(modulation_freq_hz, hi, beta, 1.0 / (2.0 * config.chirp_duration_s))


@dataclass(frozen=True)
class PeakResult:
    range_bin: int
    doppler_bin: int  # signed, 0 = static line
    magnitude: float  # power at the peak bin
    range_freq_hz: float
    doppler_freq_hz: float
    interpolated_freqs_hz: tuple[float, float]


def _parabolic_offset(left: float, mid: float, right: float) -> float:
    denom = left - 2.0 * mid + right
    if denom >= 0 or not math.isfinite(denom):
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def region_indices(rd: RangeDopplerMap, region: SearchRegion) -> tuple[np.ndarray, np.ndarray]:
    rf = rd.range_freqs_hz[: rd.positive_range_bins]
    ri = np.nonzero((rf >= region.range_freq_lo_hz) & (rf < region.range_freq_hi_hz))[0]
    df = rd.doppler_freqs_hz
    di = np.nonzero((df >= region.doppler_freq_lo_hz) & (df <= region.doppler_freq_hi_hz))[0]
    if ri.size == 0 or di.size == 0:
        raise InvalidRegionError("search region does not intersect the positive-range half of the map")
    return ri, di


def find_peak_in_region(rd: RangeDopplerMap, region: SearchRegion) -> PeakResult:
    """Strongest bin inside ``region``; ties go to the lower range bin, then lower Doppler bin."""
    ri, di = region_indices(rd, region)
    sub = rd.power[np.ix_(ri, di)]
    flat = int(np.argmax(sub))  # first maximum in C order == tie rule
    i, j = ri[flat // sub.shape[1]], di[flat % sub.shape[1]]

    p = rd.power
    dr = _parabolic_offset(p[i - 1, j], p[i, j], p[i + 1, j]) if 0 < i < rd.range_fft_size - 1 else 0.0
    dd = _parabolic_offset(p[i, j - 1], p[i, j], p[i, j + 1]) if 0 < j < rd.doppler_fft_size - 1 else 0.0
    rbin_hz = rd.config.sample_rate_hz / rd.range_fft_size
    dbin_hz = 1.0 / (rd.doppler_fft_size * rd.config.chirp_duration_s)
    rf, df = rd.range_freqs_hz[i], rd.doppler_freqs_hz[j]
    return PeakResult(
        range_bin=int(i),
        doppler_bin=int(rd.doppler_bins[j]),
        magnitude=float(p[i, j]),
        range_freq_hz=float(rf),
        doppler_freq_hz=float(df),
        interpolated_freqs_hz=(float(rf + dr * rbin_hz), float(df + dd * dbin_hz)),
    )


def region_median_power(rd: RangeDopplerMap, region: SearchRegion) -> float:
    ri, di = region_indices(rd, region)
    return float(np.median(rd.power[np.ix_(ri, di)]))


def count_local_peaks(power: np.ndarray, threshold: float) -> int:
    """Number of 8-neighbour local maxima at or above ``threshold`` in a 2-D grid."""
    if power.size == 0:
        return 0
    padded = np.pad(power, 1, mode="constant", constant_values=-np.inf)
    core = padded[1:-1, 1:-1]
    is_max = core >= threshold
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di : padded.shape[0] - 1 + di, 1 + dj : padded.shape[1] - 1 + dj]
            # strict on one side so plateaus count once
            is_max &= core > nb if (di, dj) < (0, 0) else core >= nb
    return int(is_max.sum())
