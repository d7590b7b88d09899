import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from caltag.config import RadarConfig
from caltag.detect import CalTagParams, caltag_coarse, detect_caltag
from caltag.radar_sim import Scene, TagModel, beat_frequency, synthesize_frame
from caltag.superres import (
    EstimationError,
    MusicConfig,
    PseudoSpectrum,
    angle_grid,
    angle_pseudospectrum,
    music_1d,
    pseudo_power,
    pseudo_power_uniform,
    refine_angle,
    refine_range,
    signal_subspace,
    smoothed_covariance,
)


def _tones(freqs, L=64, S=8, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    n = np.arange(L)[:, None]
    x = np.zeros((L, S), complex)
    for f in freqs:
        x += np.exp(2j * np.pi * (f * n + rng.uniform(0, 1, S)[None, :]))
    if noise:
        x += noise * (rng.standard_normal((L, S)) + 1j * rng.standard_normal((L, S)))
    return x


def _dense_argmax(x, cfg, factor=10):
    fine = MusicConfig(cfg.search_lo, cfg.search_hi, cfg.grid_step / factor, cfg.n_sources, cfg.smoothing_subarray_len)
    return music_1d(x, fine).peak_freq


def test_music_config_validation():
    with pytest.raises(ValueError):
        MusicConfig(0.3, 0.1, 0.01)
    with pytest.raises(ValueError):
        MusicConfig(0.1, 0.3, 0.0)
    with pytest.raises(ValueError):
        MusicConfig(0.1, 0.3, 0.01, n_sources=2, smoothing_subarray_len=2)


def test_pseudospectrum_requires_increasing_grid():
    with pytest.raises(ValueError):
        PseudoSpectrum(np.array([0.2, 0.1]), np.array([1.0, 1.0]))


def test_tone_on_grid_point_is_exact():
    cfg = MusicConfig(0.1, 0.3, 0.001, smoothing_subarray_len=32)
    f0 = cfg.grid()[137]
    spec = music_1d(_tones([f0]), cfg)
    assert spec.argmax == 137


@settings(max_examples=25, deadline=None)
@given(st.floats(0.12, 0.28))
def test_tone_between_grid_points_within_one_step(f0):
    cfg = MusicConfig(0.1, 0.3, 0.002, smoothing_subarray_len=32)
    x = _tones([f0])
    spec = music_1d(x, cfg)
    assert abs(spec.peak_freq - f0) <= cfg.grid_step
    assert abs(spec.peak_freq - _dense_argmax(x, cfg)) <= cfg.grid_step


def test_two_tones_below_fft_resolution_are_resolved():
    L = 64
    f1, f2 = 0.2, 0.2 + 0.6 / L
    cfg = MusicConfig(0.15, 0.25, 0.0002, n_sources=2, smoothing_subarray_len=32)
    spec = music_1d(_tones([f1, f2], L=L, S=16, seed=3), cfg)
    peaks = spec.freqs[spec.local_maxima()]
    top = peaks[np.argsort(spec.power[spec.local_maxima()])[-2:]]
    assert sorted(top) == pytest.approx([f1, f2], abs=0.1 / L)
    # brute-force scan with the direct (non chirp-z) evaluator agrees
    R = smoothed_covariance(_tones([f1, f2], L=L, S=16, seed=3), 32)
    _, Es = signal_subspace(R, 2)
    brute = pseudo_power(Es, spec.freqs)
    # compare denominators; near the peaks both are at rounding level
    np.testing.assert_allclose(1 / brute, 1 / spec.power, atol=1e-10)


def test_argmax_matches_fft_peak():
    f0 = 0.1734
    x = _tones([f0], L=128, S=1)
    cfg = MusicConfig(0.1, 0.3, 0.0005, smoothing_subarray_len=64)
    fft = np.abs(np.fft.fft(x[:, 0], 128))
    k = np.argmax(fft) / 128
    assert abs(music_1d(x, cfg).peak_freq - k) <= 1 / 128


def test_unit_modulus_scaling_invariance():
    x = _tones([0.21], S=4, noise=0.05)
    cfg = MusicConfig(0.1, 0.3, 0.001, smoothing_subarray_len=32)
    a = music_1d(x, cfg)
    b = music_1d(x * np.exp(1j * 0.7), cfg)
    assert a.argmax == b.argmax
    np.testing.assert_allclose(a.power / a.power.max(), b.power / b.power.max(), rtol=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.12, 0.28), st.sampled_from([0.004, 0.002, 0.001]))
def test_refining_grid_moves_argmax_by_at_most_old_step(f0, step):
    x = _tones([f0], noise=0.02)
    coarse = MusicConfig(0.1, 0.3, step, smoothing_subarray_len=32)
    fine = MusicConfig(0.1, 0.3, step / 2, smoothing_subarray_len=32)
    assert abs(music_1d(x, coarse).peak_freq - music_1d(x, fine).peak_freq) <= step + 1e-12


def test_band_restriction_scales_evaluation_count():
    full = MusicConfig(0.0, 0.4, 0.001).grid().size
    half = MusicConfig(0.0, 0.2, 0.001).grid().size
    assert full - 1 == 2 * (half - 1)


def test_rank_deficient_covariance_raises():
    cfg = MusicConfig(0.1, 0.3, 0.01, smoothing_subarray_len=8)
    with pytest.raises(EstimationError):
        music_1d(np.zeros((16, 2), complex), cfg)
    with pytest.raises(EstimationError):
        music_1d(_tones([0.2], L=16), MusicConfig(0.1, 0.3, 0.01, n_sources=3, smoothing_subarray_len=8))


def test_smoothed_covariance_matches_explicit_sum(rng):
    x = rng.standard_normal((20, 3)) + 1j * rng.standard_normal((20, 3))
    Ls = 7
    R = np.zeros((Ls, Ls), complex)
    for i in range(20 - Ls + 1):
        sub = x[i : i + Ls]
        R += sub @ sub.conj().T
    R /= (20 - Ls + 1) * 3
    np.testing.assert_allclose(smoothed_covariance(x, Ls, forward_backward=False), R, atol=1e-12)
    J = np.eye(Ls)[::-1]
    fb = 0.5 * (R + J @ R.conj() @ J)
    np.testing.assert_allclose(smoothed_covariance(x, Ls), fb, atol=1e-12)


def test_signal_subspace_order(rng):
    A = rng.standard_normal((6, 6))
    R = A @ A.T
    vals, vecs = signal_subspace(R, 2)
    full = np.linalg.eigvalsh(R)
    assert vals == pytest.approx(full[::-1][:2])
    assert vals[0] >= vals[1]


def test_chirp_z_path_matches_direct(rng):
    Es = np.linalg.qr(rng.standard_normal((40, 2)) + 1j * rng.standard_normal((40, 2)))[0]
    grid = 0.1 + 0.0013 * np.arange(300)
    np.testing.assert_allclose(pseudo_power_uniform(Es, 0.1, 0.0013, 300), pseudo_power(Es, grid), rtol=1e-9)


def test_angle_grid_is_anchored_at_boresight():
    g = angle_grid(0.25)
    assert g[0] == -90.0 and g[-1] == 90.0
    assert 0.0 in g and 30.0 in g


def _coarse(cube):
    return caltag_coarse(cube, CalTagParams()).peak


def test_refine_range_noiseless_10m(cfg):
    cube = synthesize_frame(cfg, Scene(tag=TagModel(10.0, 0.0)))
    shifted = refine_range(cube, _coarse(cube), 0.02)
    assert shifted == pytest.approx(148.8 + 10.0, abs=0.02)


def test_grid_point_range_is_exact(cfg):
    # the detector grid starts at f_m, so shifted ranges 148.8 + 0.02k are grid points
    det = detect_caltag(synthesize_frame(cfg, Scene(tag=TagModel(6.24, 5.0))))
    assert det.range_m == pytest.approx(6.24, abs=1e-9)


@pytest.mark.parametrize("az", [0.0, 30.0, -47.5])
def test_refine_angle_noiseless(cfg, az):
    cube = synthesize_frame(cfg, Scene(tag=TagModel(5.0, az)))
    pk = _coarse(cube)
    shifted = 500e3 + beat_frequency(cfg, 5.0)
    est = refine_angle(cube, shifted, 0.25, doppler_freq_hz=pk.doppler_freq_hz, mirror_freq_hz=500e3 - beat_frequency(cfg, 5.0))
    assert est == pytest.approx(az, abs=0.25)


def test_angle_needs_two_antennas():
    cfg = RadarConfig(num_antennas=1)
    cube = synthesize_frame(cfg, Scene(tag=TagModel(5.0, 0.0)))
    with pytest.raises(ValueError):
        angle_pseudospectrum(cube, 510e3)
    cfg2 = RadarConfig(num_antennas=4)
    cube2 = synthesize_frame(cfg2, Scene(tag=TagModel(5.0, 0.0)))
    with pytest.raises(ValueError):
        angle_pseudospectrum(cube2, 510e3, subarray_len=5)


def test_pseudospectrum_csv(tmp_path):
    spec = music_1d(_tones([0.2]), MusicConfig(0.1, 0.3, 0.01, smoothing_subarray_len=32))
    spec.to_csv(tmp_path / "ps.csv")
    lines = (tmp_path / "ps.csv").read_text().splitlines()
    assert lines[0] == "frequency,pseudo_power"
    assert len(lines) == spec.freqs.size + 1
