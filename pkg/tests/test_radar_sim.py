import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from caltag.config import SPEED_OF_LIGHT, DomainError, RadarConfig
from caltag.dsp import range_doppler_map
from caltag.radar_sim import (
    DataCube,
    Scatterer,
    Scene,
    TagModel,
    beat_frequency,
    cube_from_bytes,
    cube_to_bytes,
    default_doppler_offset,
    doppler_frequency,
    range_for_beat,
    read_cube,
    synthesize_frame,
    tag_modulation_waveform,
    write_cube,
)


def test_beat_frequency_at_quarter_sample_rate(cfg):
    assert beat_frequency(cfg, 148.8) == pytest.approx(cfg.sample_rate_hz / 4, rel=1e-12)
    assert beat_frequency(cfg, 148.8) == pytest.approx(500e3, rel=1e-12)


def test_beat_frequency_zero(cfg):
    assert beat_frequency(cfg, 0.0) == 0.0


def test_beat_frequency_closed_form(cfg):
    expected = 2 * 10.0 * 250e6 / (3e8 * 496e-6)
    assert beat_frequency(cfg, 10.0) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("r", [-0.1, 297.6, 400.0])
def test_beat_frequency_out_of_range(cfg, r):
    with pytest.raises(DomainError):
        beat_frequency(cfg, r)


@given(st.floats(0.0, 297.0))
def test_beat_frequency_round_trip(r):
    cfg = RadarConfig()
    assert range_for_beat(cfg, beat_frequency(cfg, r)) == pytest.approx(r, abs=1e-9)


def test_doppler_convention_flag():
    one_way = RadarConfig()
    two_way = RadarConfig(doppler_round_trip=True)
    assert doppler_frequency(one_way, 1.0) == pytest.approx(24e9 / SPEED_OF_LIGHT)
    assert doppler_frequency(two_way, 1.0) == pytest.approx(2 * 24e9 / SPEED_OF_LIGHT)


def test_empty_scene_without_noise_is_zero(small_cfg):
    assert not synthesize_frame(small_cfg, Scene()).samples.any()
    assert not synthesize_frame(small_cfg, Scene(), snr_db=-math.inf).samples.any()


def test_static_scatterer_peaks_at_quarter_bin(cfg):
    cube = synthesize_frame(cfg, Scene([Scatterer(148.8, 0.0)]))
    x = cube.samples[:, 0, 0]
    spec = np.fft.fft(x, 1024)
    assert int(np.argmax(np.abs(spec[:512]))) == 256
    # independent oracle: direct DFT at bin 256
    n = np.arange(cfg.samples_per_chirp)
    direct = np.sum(x * np.exp(-2j * np.pi * 256 * n / 1024))
    assert spec[256] == pytest.approx(direct, rel=1e-9)


def test_tag_energy_at_modulation_harmonics(cfg):
    d = 10.0
    cube = synthesize_frame(cfg, Scene(tag=TagModel(d, 0.0)))
    spec = np.abs(np.fft.fft(cube.samples[:, 0, 0], 1024)) ** 2
    df = beat_frequency(cfg, d)
    half = spec[:512]
    floor = np.median(half)
    for f in (500e3 - df, 500e3 + df):
        b = int(round(f / cfg.sample_rate_hz * 1024))
        assert half[b - 1 : b + 2].max() > 1e3 * floor


def test_waveform_is_binary_and_static_without_offset(cfg):
    tag = TagModel(5.0, 0.0, doppler_offset_hz=0.0)
    w0 = tag_modulation_waveform(tag, cfg, 0)
    assert set(np.unique(w0)) <= {0.0, 1.0}
    for m in (1, 17, 63):
        np.testing.assert_array_equal(tag_modulation_waveform(tag, cfg, m), w0)


def test_waveform_period_four_samples(cfg):
    w = tag_modulation_waveform(TagModel(5.0, 0.0), cfg, 0)
    np.testing.assert_array_equal(w[4:], w[:-4])
    changes = int(np.count_nonzero(np.diff(w)))
    # 2 edges per 4-sample period
    assert changes == 2 * cfg.samples_per_chirp // 4 - 1


def test_waveform_wraps_after_four_chirps(cfg):
    tag = TagModel(5.0, 0.0)
    assert tag.offset_hz(cfg) == pytest.approx(1 / (4 * cfg.chirp_duration_s))
    for m in range(0, 20):
        np.testing.assert_array_equal(tag_modulation_waveform(tag, cfg, m + 4), tag_modulation_waveform(tag, cfg, m))
    assert not np.array_equal(tag_modulation_waveform(tag, cfg, 1), tag_modulation_waveform(tag, cfg, 0))


def test_waveform_chirp_index_bounds(cfg):
    with pytest.raises(IndexError):
        tag_modulation_waveform(TagModel(5.0, 0.0), cfg, cfg.chirps_per_frame)


def test_tag_validation(cfg):
    with pytest.raises(ValueError):
        TagModel(5.0, 0.0, duty_cycle=1.0)
    with pytest.raises(ValueError):
        TagModel(5.0, 0.0, modulation_freq_hz=1.5e6).validate(cfg)
    with pytest.raises(ValueError):
        TagModel(5.0, 0.0, doppler_offset_hz=2.0 / cfg.chirp_duration_s).validate(cfg)


def test_scene_range_bounds(cfg):
    with pytest.raises(DomainError):
        synthesize_frame(cfg, Scene([Scatterer(300.0, 0.0)]))
    with pytest.raises(ValueError):
        Scatterer(1.0, 90.0)


@settings(max_examples=20, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0.5, 38.0), st.floats(-80, 80), st.floats(0.01, 5.0)), min_size=1, max_size=4),
    st.lists(st.tuples(st.floats(0.5, 38.0), st.floats(-80, 80), st.floats(0.01, 5.0)), min_size=1, max_size=4),
)
def test_superposition(a, b):
    cfg = RadarConfig(chirp_duration_s=128 / 2e6, samples_per_chirp=128, chirps_per_frame=16, num_antennas=4)
    A = [Scatterer(*t) for t in a]
    B = [Scatterer(*t) for t in b]
    both = synthesize_frame(cfg, Scene(A + B)).samples
    split = synthesize_frame(cfg, Scene(A)).samples + synthesize_frame(cfg, Scene(B)).samples
    assert np.linalg.norm(both - split) <= 1e-9 * max(np.linalg.norm(both), 1e-300)


def test_superposition_with_tag(small_cfg):
    s = Scatterer(3.0, 10.0, 2.0)
    t = TagModel(4.0, -20.0, modulation_freq_hz=small_cfg.sample_rate_hz / 4)
    both = synthesize_frame(small_cfg, Scene([s], tag=t)).samples
    split = synthesize_frame(small_cfg, Scene([s])).samples + synthesize_frame(small_cfg, Scene(tag=t)).samples
    np.testing.assert_allclose(both, split, rtol=0, atol=1e-9 * np.abs(both).max())


def test_static_scatterer_has_zero_doppler(small_cfg):
    cube = synthesize_frame(small_cfg, Scene([Scatterer(10.0, 15.0)]))
    rd = range_doppler_map(cube, 128, 16)
    _, j = np.unravel_index(np.argmax(rd.power[:64]), (64, 16))
    assert rd.doppler_bins[j] == 0


def test_clutter_order_does_not_change_cube(small_cfg):
    a, b, c = Scatterer(3.0, 10.0, 2.0), Scatterer(7.5, -33.0, 0.3), Scatterer(12.0, 60.0, 1.1)
    x = synthesize_frame(small_cfg, Scene([a, b, c], seed=5), snr_db=0.0).samples
    y = synthesize_frame(small_cfg, Scene([c, a, b], seed=5), snr_db=0.0).samples
    assert x.tobytes() == y.tobytes()


def test_tag_doppler_line_beats_static_line(cfg):
    """At the shifted harmonic, the offset Doppler bin holds >= 10 dB more than bin 0."""
    tag = TagModel(6.0, 0.0)
    rd = range_doppler_map(synthesize_frame(cfg, Scene(tag=tag)), 1024, cfg.chirps_per_frame)
    offset_bins = tag.offset_hz(cfg) / cfg.doppler_resolution_hz
    assert offset_bins == pytest.approx(round(offset_bins))
    f = 500e3 + beat_frequency(cfg, 6.0)
    i = int(round(f / cfg.sample_rate_hz * 1024))
    i = i - 1 + int(np.argmax(rd.power[i - 1 : i + 2, rd.doppler_column(round(offset_bins))]))
    on = rd.power[i, rd.doppler_column(round(offset_bins))]
    static = rd.power[i, rd.doppler_column(0)]
    assert 10 * np.log10(on / max(static, 1e-300)) >= 10.0


def test_noise_power_matches_snr():
    cfg = RadarConfig(real_sampling=False)
    x = synthesize_frame(cfg, Scene(seed=3), snr_db=10.0).samples
    assert np.mean(np.abs(x) ** 2) == pytest.approx(0.1, rel=0.02)


def test_default_offset_is_quarter_chirp_rate(cfg):
    assert default_doppler_offset(cfg) == pytest.approx(1 / (4 * 496e-6))


def test_cube_bytes_round_trip(small_cfg, tmp_path):
    cube = synthesize_frame(small_cfg, Scene([Scatterer(5.0, 20.0)], seed=1), snr_db=0.0)
    blob = cube_to_bytes(cube.samples)
    assert blob[:8] == b"CTAGCUBE"
    back = cube_from_bytes(blob)
    assert back.shape == cube.shape
    # bit exact at the stored float32 precision
    assert cube_to_bytes(back) == blob
    write_cube(tmp_path / "c.bin", cube)
    again = read_cube(tmp_path / "c.bin", small_cfg)
    assert isinstance(again, DataCube)
    assert cube_to_bytes(again.samples) == blob


def test_cube_header_checks():
    with pytest.raises(ValueError):
        cube_from_bytes(b"short")
    blob = bytearray(cube_to_bytes(np.zeros((2, 2, 2), complex)))
    blob[:8] = b"NOTACUBE"
    with pytest.raises(ValueError):
        cube_from_bytes(bytes(blob))
    with pytest.raises(ValueError):
        cube_from_bytes(cube_to_bytes(np.zeros((2, 2, 2), complex))[:-4])
