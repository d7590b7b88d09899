"""FMCW baseband synthesis for scenes with clutter, a corner reflector and a backscatter tag.

Beat-signal model for a point scatterer at range d, azimuth theta::

    x[n, m, k] = A * exp(j*(2*pi*f_c*tau + 2*pi*df*n/f_s + 2*pi*f_d*m*T + 2*pi*s*k*sin(theta)))

with ``tau = 2d/c``, ``df = 2*d*BW/(c*T)`` and ``s`` the antenna spacing in
wavelengths. With real IF sampling (the default) only the real part is kept,
which places a mirror image at -df. The tag term is the same tone multiplied
by a 0/1 square wave at the modulation frequency.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import SPEED_OF_LIGHT, DomainError, RadarConfig

CUBE_MAGIC = b"CTAGCUBE"
CUBE_VERSION = 1
_HEADER = struct.Struct("<8sIIII")


@dataclass(frozen=True)
class Scatterer:
    range_m: float
    azimuth_deg: float
    amplitude: float = 1.0
    radial_velocity_mps: float = 0.0  # positive = approaching

    def __post_init__(self):
        if not -90.0 < self.azimuth_deg < 90.0:
            raise ValueError(f"azimuth {self.azimuth_deg} deg outside (-90, 90)")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.range_m < 0:
            raise ValueError("range must be non-negative")


@dataclass(frozen=True)
class TagModel:
    """ON-OFF modulated backscatter tag.

    ``doppler_offset_hz=None`` selects a quarter of the chirp rate, 1/(4T),
    which shifts the square wave by exactly one sample per chirp when
    f_m = f_s/4.
    """

    range_m: float
    azimuth_deg: float
    amplitude: float = 1.0
    modulation_freq_hz: float = 500e3
    duty_cycle: float = 0.5
    doppler_offset_hz: Optional[float] = None

    def __post_init__(self):
        if not -90.0 < self.azimuth_deg < 90.0:
            raise ValueError(f"azimuth {self.azimuth_deg} deg outside (-90, 90)")
        if not 0.0 < self.duty_cycle < 1.0:
            raise ValueError("duty_cycle must lie in (0, 1)")
        if self.amplitude < 0 or self.range_m < 0:
            raise ValueError("range and amplitude must be non-negative")

    def offset_hz(self, config: RadarConfig) -> float:
        if self.doppler_offset_hz is None:
            return default_doppler_offset(config)
        return self.doppler_offset_hz

    def validate(self, config: RadarConfig) -> None:
        if not 0.0 < self.modulation_freq_hz < config.sample_rate_hz / 2:
            raise ValueError("modulation frequency must lie in (0, f_s/2)")
        limit = 1.0 / (2.0 * config.chirp_duration_s)
        if abs(self.offset_hz(config)) > limit * (1 + 1e-12):
            raise ValueError(f"doppler offset outside +/-{limit:.3f} Hz")


def default_doppler_offset(config: RadarConfig) -> float:
    return 1.0 / (4.0 * config.chirp_duration_s)


@dataclass(frozen=True)
class Scene:
    clutter: tuple[Scatterer, ...] = ()
    corner_reflector: Optional[Scatterer] = None
    tag: Optional[TagModel] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "clutter", tuple(self.clutter))

    def validate(self, config: RadarConfig) -> None:
        rmax = config.max_range_m
        objs: list = list(self.clutter)
        if self.corner_reflector is not None:
            objs.append(self.corner_reflector)
        if self.tag is not None:
            objs.append(self.tag)
            self.tag.validate(config)
        for obj in objs:
            if not 0.0 <= obj.range_m < rmax:
                raise DomainError(f"object range {obj.range_m} m outside [0, {rmax})")


@dataclass
class DataCube:
    """Complex baseband samples indexed ``[sample, chirp, antenna]``."""

    samples: np.ndarray
    config: RadarConfig

    def __post_init__(self):
        expected = (self.config.samples_per_chirp, self.config.chirps_per_frame, self.config.num_antennas)
        if self.samples.shape != expected:
            raise ValueError(f"cube shape {self.samples.shape} does not match config {expected}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("cube contains non-finite samples")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.samples.shape

    def __add__(self, other: "DataCube") -> "DataCube":
        if other.config != self.config:
            raise ValueError("cannot add cubes generated under different configs")
        return DataCube(self.samples + other.samples, self.config)


def beat_frequency(config: RadarConfig, range_m: float) -> float:
    """Beat tone for a reflector at ``range_m``: 2*d*BW / (c*T)."""
    if not 0.0 <= range_m < config.max_range_m:
        raise DomainError(f"range {range_m} m outside [0, {config.max_range_m})")
    return 2.0 * range_m * config.bandwidth_hz / (SPEED_OF_LIGHT * config.chirp_duration_s)


def range_for_beat(config: RadarConfig, freq_hz: float) -> float:
    """Inverse of :func:`beat_frequency` (no bounds check)."""
    return freq_hz * SPEED_OF_LIGHT * config.chirp_duration_s / (2.0 * config.bandwidth_hz)


def doppler_frequency(config: RadarConfig, radial_velocity_mps: float) -> float:
    fd = radial_velocity_mps / SPEED_OF_LIGHT * config.carrier_freq_hz
    return 2.0 * fd if config.doppler_round_trip else fd


def tag_modulation_waveform(tag: TagModel, config: RadarConfig, chirp_index: int) -> np.ndarray:
    """0/1 square wave applied by the tag during one chirp.

    The starting phase advances by 2*pi*offset*T per chirp; that slow phase
    walk is what moves the tag harmonics off the zero-Doppler line.
    """
    if not 0 <= chirp_index < config.chirps_per_frame:
        raise IndexError(f"chirp index {chirp_index} outside [0, {config.chirps_per_frame})")
    return _tag_gate(tag, config, np.array([chirp_index]))[:, 0]


def _tag_gate(tag: TagModel, config: RadarConfig, chirps: np.ndarray) -> np.ndarray:
    n = np.arange(config.samples_per_chirp)
    cycles = (
        tag.modulation_freq_hz / config.sample_rate_hz * n[:, None]
        + tag.offset_hz(config) * config.chirp_duration_s * chirps[None, :]
    )
    # Rounding keeps samples that sit exactly on a switching edge stable
    # against last-bit errors in the phase product.
    frac = np.mod(np.round(cycles, 9), 1.0)
    return (frac < tag.duty_cycle).astype(np.float64)


def _tone_factors(config: RadarConfig, range_m, azimuth_deg, velocity_mps):
    """Per-axis complex exponentials, each shaped [axis_len, n_objects]."""
    r = np.atleast_1d(np.asarray(range_m, dtype=np.float64))
    theta = np.deg2rad(np.atleast_1d(np.asarray(azimuth_deg, dtype=np.float64)))
    v = np.atleast_1d(np.asarray(velocity_mps, dtype=np.float64))

    n = np.arange(config.samples_per_chirp)[:, None]
    m = np.arange(config.chirps_per_frame)[:, None]
    k = np.arange(config.num_antennas)[:, None]

    fb = 2.0 * r * config.bandwidth_hz / (SPEED_OF_LIGHT * config.chirp_duration_s)
    fd = v / SPEED_OF_LIGHT * config.carrier_freq_hz
    if config.doppler_round_trip:
        fd = 2.0 * fd
    # carrier phase of the round-trip delay, reduced mod 1 cycle before scaling
    carrier_cycles = np.mod(config.carrier_freq_hz * 2.0 * r / SPEED_OF_LIGHT, 1.0)

    e_n = np.exp(2j * np.pi * np.mod(fb / config.sample_rate_hz * n, 1.0))
    e_m = np.exp(2j * np.pi * np.mod(fd * config.chirp_duration_s * m, 1.0))
    e_k = np.exp(2j * np.pi * config.antenna_spacing_wavelengths * k * np.sin(theta))
    phase0 = np.exp(2j * np.pi * carrier_cycles)
    return e_n, e_m, e_k, phase0


def _static_sum(config: RadarConfig, scatterers: Sequence[Scatterer]) -> np.ndarray:
    N, M, K = config.samples_per_chirp, config.chirps_per_frame, config.num_antennas
    if not scatterers:
        return np.zeros((N, M, K), dtype=np.complex128)
    e_n, e_m, e_k, phase0 = _tone_factors(
        config,
        [s.range_m for s in scatterers],
        [s.azimuth_deg for s in scatterers],
        [s.radial_velocity_mps for s in scatterers],
    )
    amp = np.array([s.amplitude for s in scatterers]) * phase0
    # [S, M, K] slow-time x antenna weights, then one matmul over scatterers.
    weights = amp[:, None, None] * e_m.T[:, :, None] * e_k.T[:, None, :]
    return (e_n @ weights.reshape(len(scatterers), M * K)).reshape(N, M, K)


def _tag_term(config: RadarConfig, tag: TagModel) -> np.ndarray:
    e_n, e_m, e_k, phase0 = _tone_factors(config, tag.range_m, tag.azimuth_deg, 0.0)
    tone = (tag.amplitude * phase0[0]) * e_n[:, 0][:, None, None] * e_m[:, 0][None, :, None] * e_k[:, 0][None, None, :]
    if config.real_sampling:
        tone = tone.real
    gate = _tag_gate(tag, config, np.arange(config.chirps_per_frame))
    return tone * gate[:, :, None]


def _scatterer_key(s: Scatterer):
    return (s.range_m, s.azimuth_deg, s.amplitude, s.radial_velocity_mps)


def synthesize_frame(config: RadarConfig, scene: Scene, snr_db: Optional[float] = None) -> DataCube:
    """Simulate one frame of beat samples for ``scene``.

    ``snr_db`` is the per-sample SNR of a unit-amplitude target. ``None`` or
    any non-finite value disables noise. The noise stream depends only on
    ``scene.seed``, so adding or removing objects leaves it unchanged.
    """
    scene.validate(config)
    static = list(scene.clutter)
    if scene.corner_reflector is not None:
        static.append(scene.corner_reflector)
    # Canonical order makes the sum independent of list order, bit for bit.
    static.sort(key=_scatterer_key)

    x = _static_sum(config, static)
    if config.real_sampling:
        x = x.real.astype(np.complex128)
    if scene.tag is not None:
        x = x + _tag_term(config, scene.tag)

    if snr_db is not None and math.isfinite(snr_db):
        x = x + noise(config, snr_db, scene.seed)
    return DataCube(x, config)


def noise(config: RadarConfig, snr_db: float, seed: int) -> np.ndarray:
    """Additive white Gaussian noise at ``snr_db`` below a unit-amplitude target.

    Real-sampled configs get real noise with variance matched to the 1/2 power
    of a unit cosine; complex configs get circular noise of power 10^(-snr/10).
    """
    rng = np.random.default_rng(seed)
    shape = (config.samples_per_chirp, config.chirps_per_frame, config.num_antennas)
    p = 10.0 ** (-snr_db / 10.0)
    if config.real_sampling:
        return (rng.standard_normal(shape) * math.sqrt(0.5 * p)).astype(np.complex128)
    sigma = math.sqrt(0.5 * p)
    return rng.standard_normal(shape) * sigma + 1j * rng.standard_normal(shape) * sigma


# -- serialization --------------------------------------------------------------


def cube_to_bytes(samples: np.ndarray) -> bytes:
    """Pack a [N, M, K] complex array as CTAGCUBE little-endian binary."""
    if samples.ndim != 3:
        raise ValueError("cube payload must be three-dimensional")
    N, M, K = samples.shape
    payload = np.empty((N, M, K, 2), dtype="<f4")
    payload[..., 0] = samples.real
    payload[..., 1] = samples.imag
    return _HEADER.pack(CUBE_MAGIC, CUBE_VERSION, N, M, K) + payload.tobytes(order="C")


def cube_from_bytes(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise ValueError("truncated cube header")
    magic, version, N, M, K = _HEADER.unpack_from(blob)
    if magic != CUBE_MAGIC:
        raise ValueError("not a CTAGCUBE file")
    if version != CUBE_VERSION:
        raise ValueError(f"unsupported cube format version {version}")
    expected = N * M * K * 8
    body = blob[_HEADER.size :]
    if len(body) != expected:
        raise ValueError(f"payload has {len(body)} bytes, expected {expected}")
    pairs = np.frombuffer(body, dtype="<f4").reshape(N, M, K, 2)
    return pairs[..., 0].astype(np.complex64) + 1j * pairs[..., 1].astype(np.complex64)


def write_cube(path: str | Path, cube: DataCube | np.ndarray) -> None:
    samples = cube.samples if isinstance(cube, DataCube) else cube
    Path(path).write_bytes(cube_to_bytes(samples))


def read_cube(path: str | Path, config: Optional[RadarConfig] = None) -> DataCube:
    """Read a cube file; the config's N, M, K are taken from the header."""
    samples = cube_from_bytes(Path(path).read_bytes())
    N, M, K = samples.shape
    config = (config or RadarConfig()).replace(samples_per_chirp=N, chirps_per_frame=M, num_antennas=K)
    return DataCube(samples.astype(np.complex128), config)


def scene_from_dict(section: dict, seed: int = 0) -> Scene:
    """Build a Scene from a ``[scene]`` table with ``clutter``/``tag``/``corner_reflector`` entries."""
    clutter = tuple(Scatterer(**c) for c in section.get("clutter", []))
    cr = section.get("corner_reflector")
    tag = section.get("tag")
    return Scene(
        clutter=clutter,
        corner_reflector=Scatterer(**cr) if cr else None,
        tag=TagModel(**tag) if tag else None,
        seed=int(section.get("seed", seed)),
    )


def scatterers_from_arrays(ranges: Iterable[float], azimuths: Iterable[float], amplitudes: Iterable[float]) -> tuple[Scatterer, ...]:
    return tuple(Scatterer(float(r), float(a), float(g)) for r, a, g in zip(ranges, azimuths, amplitudes))
