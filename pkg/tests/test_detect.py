import json

import numpy as np
import pytest

from caltag.calibrate import Transform2D, polar_to_cartesian
from caltag.detect import (
    CalTagParams,
    CoarseWindow,
    CornerReflectorParams,
    InvalidWindowError,
    NotFoundError,
    caltag_coarse,
    coarse_window,
    detect_caltag,
    detect_corner_reflector,
    detection_record,
    two_peak_range,
)
from caltag.dsp import RangeDopplerMap, range_doppler_map
from caltag.radar_sim import Scatterer, Scene, TagModel, beat_frequency, synthesize_frame


def test_caltag_noiseless_10m_boresight(cfg):
    det = detect_caltag(synthesize_frame(cfg, Scene(tag=TagModel(10.0, 0.0))))
    assert det.method == "caltag"
    assert det.range_m == pytest.approx(10.0, abs=0.02)
    assert det.azimuth_deg == pytest.approx(0.0, abs=0.25)


def test_caltag_ignores_strong_static_clutter(cfg, rng):
    tag = TagModel(4.3, -12.0)
    clutter = [Scatterer(float(r), float(a), 40.0) for r, a in zip(rng.uniform(0.5, 20, 15), rng.uniform(-80, 80, 15))]
    clutter.append(Scatterer(4.35, -11.0, 100.0))  # right next to the tag
    clean = detect_caltag(synthesize_frame(cfg, Scene(tag=tag, seed=9), -10.0))
    dirty = detect_caltag(synthesize_frame(cfg, Scene(clutter, tag=tag, seed=9), -10.0))
    assert abs(clean.range_m - dirty.range_m) <= 0.02
    assert abs(clean.azimuth_deg - dirty.azimuth_deg) <= 0.25


def test_caltag_without_tag_is_not_found(cfg):
    with pytest.raises(NotFoundError):
        detect_caltag(synthesize_frame(cfg, Scene([Scatterer(3.0, 0.0, 5.0)], seed=2), -10.0))


def test_caltag_shifted_frequency_inside_region(cfg):
    det = detect_caltag(synthesize_frame(cfg, Scene(tag=TagModel(11.5, 40.0), seed=4), -16.0))
    lo, hi, dlo, dhi = det.diagnostics["region"]
    assert lo <= det.diagnostics["shifted_freq_hz"] < hi
    assert dlo <= det.diagnostics["doppler_freq_hz"] <= dhi
    assert det.diagnostics["n_candidate_peaks"] >= 1


def test_two_peak_range_agrees_with_caltag(cfg):
    cube = synthesize_frame(cfg, Scene(tag=TagModel(7.3, 20.0)))
    rd = range_doppler_map(cube)
    one_bin_m = beat_frequency(cfg, 0.0) + (cfg.sample_rate_hz / 1024) * 3e8 * cfg.chirp_duration_s / (2 * cfg.bandwidth_hz)
    assert abs(two_peak_range(rd, 500e3) - detect_caltag(cube).range_m) <= one_bin_m


def _synthetic_map(cfg, bins, R=1024, D=64):
    p = np.full((R, D), 1e-9)
    for b in bins:
        p[b, D // 2 + 16] = 1.0
    return RangeDopplerMap(p, R, D, cfg)


def test_two_peak_range_symmetric_construction(cfg):
    # f_m and df both on bin centres: f_m at bin 256, df = 12 bins
    rd = _synthetic_map(cfg, [256 - 12, 256 + 12])
    df = 12 * cfg.sample_rate_hz / 1024
    expected = df * 3e8 * cfg.chirp_duration_s / (2 * cfg.bandwidth_hz)
    assert two_peak_range(rd, 500e3) == pytest.approx(expected, rel=1e-12)


def test_two_peak_range_lower_harmonic_below_zero(cfg):
    # f_m = 10 bins, df = 30 bins: f_m - df < 0, only the upper harmonic exists
    f_m = 10 * cfg.sample_rate_hz / 1024
    rd = _synthetic_map(cfg, [40])
    with pytest.raises(NotFoundError):
        two_peak_range(rd, f_m, max_shift_hz=40 * cfg.sample_rate_hz / 1024)


def test_corner_reflector_alone(cfg):
    cube = synthesize_frame(cfg, Scene(corner_reflector=Scatterer(4.0, 10.0), seed=1), -10.0)
    det = detect_corner_reflector(cube, CoarseWindow(4.02, 11.0, 0.1, 5.0))
    assert det.method == "corner_reflector"
    assert det.range_m == pytest.approx(4.0, abs=cfg.range_resolution_m)
    assert det.azimuth_deg == pytest.approx(10.0, abs=1.0)
    assert det.range_m == pytest.approx(4.0, abs=0.02)


def test_corner_reflector_grabs_stronger_clutter(cfg):
    clutter = Scatterer(4.9, 35.0, 3.0)
    scene = Scene([clutter], corner_reflector=Scatterer(4.0, 10.0))
    det = detect_corner_reflector(synthesize_frame(cfg, scene), CoarseWindow(4.4, 20.0, 1.0, 30.0))
    assert det.range_m == pytest.approx(4.9, abs=0.02)
    assert det.azimuth_deg == pytest.approx(35.0, abs=0.5)


def test_corner_reflector_multi_peak_rejection(cfg):
    scene = Scene([Scatterer(4.9, 35.0, 1.0)], corner_reflector=Scatterer(4.0, 10.0))
    params = CornerReflectorParams(reject_multi_peak=True)
    with pytest.raises(NotFoundError):
        detect_corner_reflector(synthesize_frame(cfg, scene), CoarseWindow(4.4, 20.0, 1.0, 30.0), params)


def test_corner_reflector_outside_window(cfg):
    scene = Scene([Scatterer(6.0, -40.0, 0.2)], corner_reflector=Scatterer(4.0, 10.0), seed=3)
    cube = synthesize_frame(cfg, scene, -10.0)
    try:
        det = detect_corner_reflector(cube, CoarseWindow(6.0, -40.0, 0.1, 5.0))
    except NotFoundError:
        return
    assert abs(det.range_m - 4.0) > 0.5 or abs(det.azimuth_deg - 10.0) > 5.0


def test_corner_reflector_error_grows_with_clutter_amplitude(cfg):
    truth = np.array(polar_to_cartesian(4.0, 10.0))
    errors = []
    for amp in (0.1, 0.5, 1.5, 3.0, 10.0):
        scene = Scene([Scatterer(4.2, 13.0, amp)], corner_reflector=Scatterer(4.0, 10.0))
        det = detect_corner_reflector(synthesize_frame(cfg, scene), CoarseWindow(4.1, 11.5, 0.3, 5.0))
        errors.append(float(np.linalg.norm(polar_to_cartesian(det.range_m, det.azimuth_deg) - truth)))
    past = errors[2:]  # amplitudes above the reflector's
    assert all(b >= a - 1e-12 for a, b in zip(past, past[1:]))
    assert errors[-1] > errors[0]


def test_coarse_window_centred_on_truth():
    p = polar_to_cartesian(5.0, 20.0)
    win = coarse_window(Transform2D.identity(), p, (10.0, 0.2))
    assert win.center_range_m == pytest.approx(5.0)
    assert win.center_azimuth_deg == pytest.approx(20.0)
    assert (win.angle_halfwidth_deg, win.range_halfwidth_m) == (5.0, 0.1)
    assert win.contains(5.0, 20.0)


def test_coarse_window_large_error_misses_target():
    T = Transform2D.from_angle(15.0, (0.1, -0.2))
    radar = polar_to_cartesian(5.0, 5.0)
    win = coarse_window(T, T.apply(radar), (10.0, 0.2), injected_angle_error_deg=30.0)
    assert not win.contains(5.0, 5.0)
    assert coarse_window(T, T.apply(radar), (10.0, 0.2)).contains(5.0, 5.0)


def test_coarse_window_outside_fov():
    with pytest.raises(InvalidWindowError):
        coarse_window(Transform2D.identity(), (-3.0, 0.5))


def test_window_validation():
    with pytest.raises(ValueError):
        CoarseWindow(1.0, 0.0, 0.0, 1.0)


def test_detection_record_fields(cfg):
    det = detect_caltag(synthesize_frame(cfg, Scene(tag=TagModel(3.0, 0.0))))
    rec = json.loads(detection_record(4, "caltag", det))
    assert rec["position_id"] == 4 and rec["status"] == "ok"
    assert rec["range_m"] == pytest.approx(3.0, abs=0.02)
    assert "diag_n_candidate_peaks" in rec
    miss = json.loads(detection_record(5, "caltag", None, "nothing"))
    assert miss["status"] == "not_found" and miss["range_m"] is None and miss["error"] == "nothing"


def test_coarse_stage_threshold(cfg):
    params = CalTagParams(threshold_db=200.0)
    with pytest.raises(NotFoundError):
        caltag_coarse(synthesize_frame(cfg, Scene(tag=TagModel(3.0, 0.0), seed=1), 0.0), params)
