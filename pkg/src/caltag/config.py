"""Radar configuration and TOML config-file loading.

All physical quantities carry their unit in the key name (``bandwidth_hz``,
``chirp_duration_s``...). Derived quantities such as the sample rate are
computed properties and are never stored.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

# Exact value keeps 250 MHz -> 0.6 m range resolution without rounding noise.
SPEED_OF_LIGHT = 3.0e8


class DomainError(ValueError):
    """An argument falls outside the domain of a physical conversion."""


@dataclass(frozen=True)
class RadarConfig:
    """FMCW chirp, sampling and array parameters.

    Defaults reproduce the desk-scale setup: 24 GHz carrier, 250 MHz sweep,
    992 samples per 496 us chirp (2 MHz sampling), eight receive antennas at
    half-wavelength spacing.
    """

    carrier_freq_hz: float = 24e9
    bandwidth_hz: float = 250e6
    chirp_duration_s: float = 496e-6
    samples_per_chirp: int = 992
    chirps_per_frame: int = 64
    num_antennas: int = 8
    antenna_spacing_wavelengths: float = 0.5
    # Detection floor in dB relative to the power of a unit-amplitude tone.
    noise_floor_db: float = -60.0
    # Off: one-way Doppler (v/c)*f_c. On: conventional round-trip 2(v/c)*f_c.
    doppler_round_trip: bool = False
    # Real-valued IF sampling gives the mirrored spectrum the tag harmonics rely on.
    real_sampling: bool = True

    def __post_init__(self):
        if self.samples_per_chirp < 1 or self.chirps_per_frame < 1 or self.num_antennas < 1:
            raise ValueError("samples_per_chirp, chirps_per_frame and num_antennas must be >= 1")
        if not (self.bandwidth_hz > 0 and self.chirp_duration_s > 0):
            raise ValueError("bandwidth_hz and chirp_duration_s must be positive")
        if not self.carrier_freq_hz > 0:
            raise ValueError("carrier_freq_hz must be positive")
        if not self.antenna_spacing_wavelengths > 0:
            raise ValueError("antenna_spacing_wavelengths must be positive")

    @property
    def sample_rate_hz(self) -> float:
        return self.samples_per_chirp / self.chirp_duration_s

    @property
    def slope_hz_per_s(self) -> float:
        return self.bandwidth_hz / self.chirp_duration_s

    @property
    def range_resolution_m(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)

    @property
    def max_range_m(self) -> float:
        return SPEED_OF_LIGHT * self.samples_per_chirp / (4.0 * self.bandwidth_hz)

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def doppler_resolution_hz(self) -> float:
        """Native Doppler bin width, 1/(M*T)."""
        return 1.0 / (self.chirps_per_frame * self.chirp_duration_s)

    @property
    def range_bin_hz(self) -> float:
        """Native range-frequency bin width, f_s/N."""
        return self.sample_rate_hz / self.samples_per_chirp

    def replace(self, **changes) -> "RadarConfig":
        return dataclasses.replace(self, **changes)


def read_toml(path: str | Path) -> dict[str, Any]:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def default_config_dict() -> dict[str, Any]:
    """The shipped default configuration (radar, detection, presets, experiments)."""
    text = resources.files("caltag").joinpath("data/default.toml").read_text(encoding="utf-8")
    return tomllib.loads(text)


def load_config(path: str | Path | None = None) -> dict[str, Any]:
    """Load a config file layered over the shipped defaults.

    Tables are merged recursively, so a user file only needs the keys it
    overrides.
    """
    base = default_config_dict()
    if path is None:
        return base
    return deep_merge(base, read_toml(path))


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def radar_config_from_dict(section: Mapping[str, Any]) -> RadarConfig:
    """Build a RadarConfig from a ``[radar]`` table.

    ``sample_rate_hz`` may be given instead of ``chirp_duration_s``; the
    duration is then derived as N / f_s.
    """
    known = {f.name for f in dataclasses.fields(RadarConfig)}
    kwargs = {k: v for k, v in section.items() if k in known}
    if "sample_rate_hz" in section and "chirp_duration_s" not in section:
        n = int(kwargs.get("samples_per_chirp", RadarConfig.samples_per_chirp))
        kwargs["chirp_duration_s"] = n / float(section["sample_rate_hz"])
    unknown = set(section) - known - {"sample_rate_hz"}
    if unknown:
        raise ValueError(f"unknown [radar] keys: {sorted(unknown)}")
    for name in ("samples_per_chirp", "chirps_per_frame", "num_antennas"):
        if name in kwargs:
            kwargs[name] = int(kwargs[name])
    return RadarConfig(**kwargs)


def db_to_power(db: float) -> float:
    return 10.0 ** (db / 10.0)


def power_to_db(p: float) -> float:
    return 10.0 * math.log10(p) if p > 0 else -math.inf
