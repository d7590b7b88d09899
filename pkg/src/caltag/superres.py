"""Banded 1-D MUSIC for refining the tag's range and azimuth.

The coarse 2-D FFT peak picks the Doppler bin; MUSIC then searches only the
band where the shifted harmonic can sit, on a fine grid (2 cm in range,
0.25 deg in angle by default).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.signal

from .dsp import PeakResult
from .radar_sim import DataCube, range_for_beat
from .config import SPEED_OF_LIGHT


class EstimationError(RuntimeError):
    """The covariance cannot support the requested number of sources."""


@dataclass(frozen=True)
class MusicConfig:
    search_lo: float
    search_hi: float
    grid_step: float
    n_sources: int = 1
    smoothing_subarray_len: Optional[int] = None  # None = full snapshot length
    forward_backward: bool = True

    def __post_init__(self):
        if not self.search_lo < self.search_hi:
            raise ValueError("search_lo must be below search_hi")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if self.n_sources < 1:
            raise ValueError("n_sources must be >= 1")
        if self.smoothing_subarray_len is not None and self.smoothing_subarray_len <= self.n_sources:
            raise ValueError("smoothing_subarray_len must exceed n_sources")

    def grid(self) -> np.ndarray:
        count = int(math.floor((self.search_hi - self.search_lo) / self.grid_step + 1e-9)) + 1
        return self.search_lo + self.grid_step * np.arange(count)


@dataclass
class PseudoSpectrum:
    freqs: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        if self.freqs.shape != self.power.shape or self.freqs.ndim != 1:
            raise ValueError("freqs and power must be matching 1-D arrays")
        if self.freqs.size > 1 and not np.all(np.diff(self.freqs) > 0):
            raise ValueError("frequency grid must be strictly increasing")

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.power))

    @property
    def peak_freq(self) -> float:
        return float(self.freqs[self.argmax])

    def local_maxima(self) -> np.ndarray:
        p = self.power
        if p.size < 3:
            return np.array([self.argmax])
        inner = np.nonzero((p[1:-1] > p[:-2]) & (p[1:-1] >= p[2:]))[0] + 1
        return inner

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frequency", "pseudo_power"])
            for f, p in zip(self.freqs, self.power):
                w.writerow([repr(float(f)), repr(float(p))])


def smoothed_covariance(snapshots: np.ndarray, subarray_len: int, forward_backward: bool = True) -> np.ndarray:
    """Spatially smoothed covariance of [L x S] snapshots with subarray length ``subarray_len``.

    Entry (a, b) sums x[i+a] * conj(x[i+b]) over every subarray start i and
    snapshot. Each lag is a sliding-window sum, done with prefix sums, so
    the cost is O(subarray_len * L * S) rather than a product per subarray.
    """
    x = np.asarray(snapshots, dtype=np.complex128)
    if x.ndim == 1:
        x = x[:, None]
    L, S = x.shape
    Ls = subarray_len
    if not 1 <= Ls <= L:
        raise ValueError(f"subarray length {Ls} outside [1, {L}]")
    P = L - Ls + 1

    R = np.zeros((Ls, Ls), dtype=np.complex128)
    rows = np.arange(Ls)
    for lag in range(Ls):
        # z[j] = sum_s x[j+lag, s] * conj(x[j, s]) for j < L - lag
        z = np.einsum("js,js->j", x[lag:], x[: L - lag].conj())
        c = np.concatenate(([0.0], np.cumsum(z)))
        b = rows[: Ls - lag]
        R[b + lag, b] = c[b + P] - c[b]
    upper = np.tril(R, -1).conj().T
    R = R + upper
    R /= P * S
    if forward_backward:
        R = 0.5 * (R + np.flip(R.conj(), axis=(0, 1)))
    return R


def signal_subspace(R: np.ndarray, n_sources: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of the ``n_sources`` largest eigenvalues, largest first."""
    Ls = R.shape[0]
    if n_sources >= Ls:
        raise EstimationError("n_sources must be smaller than the subarray length")
    vals, vecs = scipy.linalg.eigh(R, subset_by_index=[Ls - n_sources, Ls - 1])
    order = np.lexsort((np.arange(n_sources), -vals))  # descending value, then ascending index
    vals, vecs = vals[order], vecs[:, order]
    top = vals[0]
    if not top > 0 or vals[-1] <= 1e-12 * top:
        raise EstimationError(f"covariance rank below {n_sources} sources")
    return vals, vecs


def pseudo_power(Es: np.ndarray, grid: np.ndarray, spacing: float = 1.0) -> np.ndarray:
    """1 / (a^H En En^H a) for unit-norm steering a(f) = exp(j*2*pi*f*spacing*i)/sqrt(Ls).

    Uses En En^H = I - Es Es^H, so only the few signal vectors are touched.
    """
    Ls = Es.shape[0]
    i = np.arange(Ls)
    out = np.empty(grid.shape, dtype=np.float64)
    # chunked to keep the steering matrix small on very fine grids
    step = max(1, 2_000_000 // Ls)
    for s in range(0, grid.size, step):
        g = grid[s : s + step]
        A = np.exp(2j * np.pi * np.mod(np.outer(g * spacing, i), 1.0)) / math.sqrt(Ls)
        proj = A @ Es.conj()
        den = 1.0 - np.sum(proj.real**2 + proj.imag**2, axis=1)
        out[s : s + step] = 1.0 / np.maximum(den, 1e-30)
    return out


def pseudo_power_uniform(Es: np.ndarray, f0: float, df: float, count: int) -> np.ndarray:
    """:func:`pseudo_power` on the grid f0 + df*k, k < count, via the chirp-z transform.

    a(f)^H e = sum_i conj(e_i) exp(j*2*pi*f*i) / sqrt(Ls), which is a CZT of
    conj(e) along the spiral z_k = exp(-j*2*pi*(f0 + k*df)).
    """
    Ls = Es.shape[0]
    a = np.exp(-2j * np.pi * f0)
    w = np.exp(2j * np.pi * df)
    proj = scipy.signal.czt(Es.conj(), m=count, w=w, a=a, axis=0) / math.sqrt(Ls)
    den = 1.0 - np.sum(proj.real**2 + proj.imag**2, axis=1)
    return 1.0 / np.maximum(den, 1e-30)


def music_1d(snapshots: np.ndarray, cfg: MusicConfig, grid: Optional[np.ndarray] = None) -> PseudoSpectrum:
    """MUSIC pseudo-spectrum of [L x S] snapshots over the band in ``cfg``.

    Frequencies are in cycles per sample (normalised). ``grid`` overrides the
    uniform grid when a non-uniform one is needed (e.g. uniform in degrees).
    """
    x = np.asarray(snapshots)
    if x.ndim == 1:
        x = x[:, None]
    L = x.shape[0]
    Ls = cfg.smoothing_subarray_len or L
    if Ls > L:
        raise ValueError(f"subarray length {Ls} exceeds snapshot length {L}")
    R = smoothed_covariance(x, Ls, cfg.forward_backward)
    _, Es = signal_subspace(R, cfg.n_sources)
    if grid is None:
        freqs = cfg.grid()
        return PseudoSpectrum(freqs, pseudo_power_uniform(Es, cfg.search_lo, cfg.grid_step, freqs.size))
    freqs = np.asarray(grid, dtype=np.float64)
    return PseudoSpectrum(freqs, pseudo_power(Es, freqs))


# -- FMCW-specific snapshot construction -------------------------------------------


def doppler_filter(cube: DataCube, doppler_freq_hz: float) -> np.ndarray:
    """Coherently sum chirps at one Doppler frequency; returns [N, K].

    Static returns cancel exactly when the frequency is a multiple of the
    native Doppler bin 1/(M*T).
    """
    cfg = cube.config
    m = np.arange(cfg.chirps_per_frame)
    w = np.exp(-2j * np.pi * np.mod(doppler_freq_hz * cfg.chirp_duration_s * m, 1.0))
    return np.einsum("nmk,m->nk", cube.samples, w)


def tone_amplitudes(y: np.ndarray, freqs_norm: list[float]) -> np.ndarray:
    """Least-squares complex amplitudes of known tones in each column of ``y`` [N, K].

    Returns [len(freqs_norm), K]. Fitting the mirror harmonic jointly keeps
    its leakage out of the amplitude of the tone of interest.
    """
    n = np.arange(y.shape[0])
    basis = np.exp(2j * np.pi * np.mod(np.outer(n, freqs_norm), 1.0))
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return coef


def range_pseudospectrum(
    cube: DataCube,
    doppler_freq_hz: float,
    band_hz: tuple[float, float],
    grid_step_m: float = 0.02,
    *,
    n_sources: Optional[int] = None,
    subarray_len: Optional[int] = None,
) -> PseudoSpectrum:
    """Range MUSIC on the Doppler-selected samples; grid in normalised frequency.

    The grid starts at ``band_hz[0]`` and advances by the beat frequency of
    ``grid_step_m``, stopping strictly below ``band_hz[1]``.
    """
    cfg = cube.config
    fs = cfg.sample_rate_hz
    y = doppler_filter(cube, doppler_freq_hz)
    if n_sources is None:
        # real sampling leaves the lower harmonic f_m - df in the same Doppler bin
        n_sources = 2 if cfg.real_sampling else 1
    Ls = subarray_len or cfg.samples_per_chirp // 2
    step_hz = 2.0 * grid_step_m * cfg.bandwidth_hz / (SPEED_OF_LIGHT * cfg.chirp_duration_s)
    lo, hi = band_hz
    count = max(int(math.ceil((hi - lo) / step_hz - 1e-9)), 1)
    # search_hi sits half a step past the last point so grid() yields exactly `count` points
    mcfg = MusicConfig(lo / fs, (lo + (count - 0.5) * step_hz) / fs, step_hz / fs, n_sources, Ls)
    return music_1d(y, mcfg)


def refine_range(
    cube: DataCube,
    peak: PeakResult,
    grid_step_m: float = 0.02,
    *,
    band_hz: Optional[tuple[float, float]] = None,
    n_sources: Optional[int] = None,
    subarray_len: Optional[int] = None,
) -> float:
    """Shifted range (metres) of the tag harmonic selected by ``peak``.

    ``band_hz`` defaults to +/-3 FFT bins around the peak; the detector passes
    the full search region instead.
    """
    cfg = cube.config
    if band_hz is None:
        half = 3 * cfg.range_bin_hz
        band_hz = (max(peak.range_freq_hz - half, 0.0), min(peak.range_freq_hz + half, cfg.sample_rate_hz / 2))
    spec = range_pseudospectrum(
        cube, peak.doppler_freq_hz, band_hz, grid_step_m, n_sources=n_sources, subarray_len=subarray_len
    )
    return range_for_beat(cfg, spec.peak_freq * cfg.sample_rate_hz)


def angle_grid(grid_step_deg: float, limit_deg: float = 90.0) -> np.ndarray:
    """Angles i*step for every integer i with |i*step| <= limit (anchored at boresight)."""
    n = int(math.floor(limit_deg / grid_step_deg + 1e-9))
    return grid_step_deg * np.arange(-n, n + 1)


def angle_pseudospectrum(
    cube: DataCube,
    range_freq_hz: float,
    grid_step_deg: float = 0.25,
    *,
    doppler_freq_hz: float = 0.0,
    mirror_freq_hz: Optional[float] = None,
    subarray_len: Optional[int] = None,
) -> PseudoSpectrum:
    """Angle MUSIC at one range frequency; returned grid is in degrees."""
    cfg = cube.config
    K = cfg.num_antennas
    if K < 2:
        raise ValueError("angle estimation needs at least two antennas")
    Ls = subarray_len or K - 1
    if Ls > K or Ls < 2:
        raise ValueError(f"smoothing length {Ls} incompatible with {K} antennas")
    fs = cfg.sample_rate_hz
    y = doppler_filter(cube, doppler_freq_hz)
    tones = [range_freq_hz / fs]
    if mirror_freq_hz is not None and abs(mirror_freq_hz - range_freq_hz) > 1e-9 * fs:
        tones.append(mirror_freq_hz / fs)
    snapshot = tone_amplitudes(y, tones)[0]  # [K]
    R = smoothed_covariance(snapshot[:, None], Ls, True)
    _, Es = signal_subspace(R, 1)
    deg = angle_grid(grid_step_deg)
    k = cfg.antenna_spacing_wavelengths * np.sin(np.deg2rad(deg))
    return PseudoSpectrum(deg, pseudo_power(Es, k))


def refine_angle(
    cube: DataCube,
    range_freq_hz: float,
    grid_step_deg: float = 0.25,
    *,
    doppler_freq_hz: float = 0.0,
    mirror_freq_hz: Optional[float] = None,
    subarray_len: Optional[int] = None,
) -> float:
    """Azimuth (degrees) of the return at ``range_freq_hz``."""
    spec = angle_pseudospectrum(
        cube,
        range_freq_hz,
        grid_step_deg,
        doppler_freq_hz=doppler_freq_hz,
        mirror_freq_hz=mirror_freq_hz,
        subarray_len=subarray_len,
    )
    return spec.peak_freq
