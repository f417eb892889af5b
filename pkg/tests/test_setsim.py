import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jsmd.analytic import jsmd_matrix, probability_p0
from jsmd.lg import BeamGeometry, LGIndex, lg_field, mode_overlap
from jsmd.setsim import (SetExperimentConfig, estimate_jsmd, idler_ring_radius,
                         project_and_couple, simulate_counts, stimulated_idler_field,
                         total_variation)

GEOM = BeamGeometry.from_gammas(1e-3, 2.03)


def test_idler_order_is_conjugate():
    assert stimulated_idler_field(GEOM, LGIndex(3)).order == -3


def test_idler_flat_pump_limit():
    g = BeamGeometry(w_p=10.0, w_s=1e-3, w_i=1e-3)
    seed = LGIndex(2, 1)
    idler = stimulated_idler_field(g, seed)
    rho = np.linspace(1e-5, 3e-3, 50)
    ratio = idler.radial(rho) / np.conj(lg_field(seed, 1e-3).radial(rho))
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-6)


def test_idler_projection_reproduces_p0_weights():
    g = BeamGeometry.from_gammas(1e-3, 3.05)
    weights = []
    for l in range(7):
        idler = stimulated_idler_field(g, LGIndex(l))
        weights.append(abs(mode_overlap(lg_field(LGIndex(-l), g.w_i), idler)) ** 2)
    weights = np.array(weights) / weights[0]
    np.testing.assert_allclose(weights, [probability_p0(l, 3.05) for l in range(7)], rtol=1e-9)


def test_extended_seed_guard():
    with pytest.raises(ValueError):
        stimulated_idler_field(GEOM, LGIndex(1, 1), allow_extended=False)


def test_coupling_mask_mismatch_is_zero():
    idler = stimulated_idler_field(GEOM, LGIndex(1))
    assert project_and_couple(idler, LGIndex(1), GEOM.w_i) == 0.0


def test_coupling_closed_form_radial_overlap():
    # Flattened idler K rho exp(-a rho^2) against fiber sqrt(2/pi)/w_f exp(-b rho^2)
    # with a = 1/w_p^2 + 1/w_s^2, b = 1/w_f^2 gives eta = 2 pi a^2 b / (a + b)^3.
    idler = stimulated_idler_field(GEOM, LGIndex(1))
    a = 1 / GEOM.w_p ** 2 + 1 / GEOM.w_s ** 2
    for w_f in (GEOM.w_i, 0.5e-3, 0.2e-3):
        b = 1 / w_f ** 2
        expected = 2 * math.pi * a * a * b / (a + b) ** 3
        assert project_and_couple(idler, LGIndex(-1), w_f) == pytest.approx(expected, rel=1e-10)


def test_coupling_large_aperture_limit():
    idler = stimulated_idler_field(GEOM, LGIndex(-2))
    free = project_and_couple(idler, LGIndex(2), GEOM.w_i)
    wide = project_and_couple(idler, LGIndex(2), GEOM.w_i, aperture_radius=1.0)
    assert wide == pytest.approx(free, abs=1e-10)


def test_coupling_unity_for_matched_gaussian():
    idler = stimulated_idler_field(GEOM, LGIndex(0))
    w_eff = 1 / math.sqrt(1 / GEOM.w_p ** 2 + 1 / GEOM.w_s ** 2)
    assert project_and_couple(idler, LGIndex(0), w_eff) == pytest.approx(1.0, abs=1e-12)
    assert project_and_couple(idler, LGIndex(0), 1.1 * w_eff) < 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(0, 2), st.floats(0.2, 4.0),
       st.floats(0.1, 3.0), st.one_of(st.none(), st.floats(0.05, 5.0)))
def test_coupling_bounds(l_seed, l_proj, p, gamma, fiber_scale, aperture_scale):
    g = BeamGeometry.from_gammas(1e-3, gamma)
    idler = stimulated_idler_field(g, LGIndex(l_seed, p))
    ap = None if aperture_scale is None else aperture_scale * g.w_i
    eta = project_and_couple(idler, LGIndex(l_proj), fiber_scale * g.w_i, ap)
    assert 0.0 <= eta <= 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.floats(0.2, 4.0), st.floats(0.05, 3.0), st.floats(1.0, 2.0))
def test_coupling_monotone_in_aperture(l, gamma, r, factor):
    g = BeamGeometry.from_gammas(1e-3, gamma)
    idler = stimulated_idler_field(g, LGIndex(l))
    small = project_and_couple(idler, LGIndex(-l), g.w_i, r * g.w_i)
    large = project_and_couple(idler, LGIndex(-l), g.w_i, r * factor * g.w_i)
    assert large >= small * (1 - 1e-12)


def test_ring_radius_is_intensity_peak():
    l = 6
    idler = stimulated_idler_field(GEOM, LGIndex(l))
    rho = np.linspace(0, 5 * GEOM.w_s, 200001)
    peak = rho[np.argmax(np.abs(idler.radial(rho)) ** 2)]
    assert idler_ring_radius(GEOM, l) == pytest.approx(peak, rel=1e-4)


# counting

def test_counts_all_zero():
    cfg = SetExperimentConfig(GEOM, dark_rate_hz=0.0)
    rec = simulate_counts(0.0, cfg, (0, 0, 0, 0))
    assert rec.window_counts == [0] * 10
    assert rec.dark_counts == [0] * 20
    assert rec.background_subtracted_mean == 0.0 == rec.clamped_estimate


def test_counts_shapes_and_clamp():
    cfg = SetExperimentConfig(GEOM, dark_rate_hz=3.0, n_windows=4, n_dark_trials=7, rng_seed=5)
    for tag in range(30):
        rec = simulate_counts(0.0, cfg, (tag, 0, -tag, 0))
        assert len(rec.window_counts) == 4 and len(rec.dark_counts) == 7
        assert rec.clamped_estimate == max(0.0, rec.background_subtracted_mean)


def test_counts_window_mean_matches_poisson_mean():
    cfg = SetExperimentConfig(GEOM, dark_rate_hz=20.0, n_windows=1000)
    rec = simulate_counts(100.0, cfg, (1, 0, -1, 0))
    expected = 120.0 * 5
    assert np.mean(rec.window_counts) == pytest.approx(expected, abs=4 * math.sqrt(expected / 1000))


def test_estimator_unbiased_monte_carlo():
    values = []
    for seed in range(10_000):
        cfg = SetExperimentConfig(GEOM, dark_rate_hz=20.0, rng_seed=seed)
        values.append(simulate_counts(100.0, cfg, (0, 0, 0, 0)).clamped_estimate)
    values = np.array(values)
    se = values.std(ddof=1) / math.sqrt(len(values))
    assert abs(values.mean() - 500.0) < 3 * se


def test_counts_deterministic_per_tag():
    cfg = SetExperimentConfig(GEOM, rng_seed=99)
    a = simulate_counts(1e3, cfg, (2, 0, -2, 0))
    b = simulate_counts(1e3, cfg, (2, 0, -2, 0))
    c = simulate_counts(1e3, cfg, (-2, 0, 2, 0))
    assert a == b
    assert a.window_counts != c.window_counts


def test_config_validation():
    with pytest.raises(ValueError):
        SetExperimentConfig(GEOM, n_windows=0)
    with pytest.raises(ValueError):
        SetExperimentConfig(GEOM, coupling="perfect")
    with pytest.raises(ValueError):
        SetExperimentConfig(GEOM, rng_seed=2 ** 64)
    with pytest.raises(ValueError):
        SetExperimentConfig(GEOM, seed_modes=[LGIndex(0, 1)], allow_extended=False)


# full estimate

def test_noise_free_estimate_matches_analytic():
    cfg = SetExperimentConfig(GEOM, dark_rate_hz=0.0, peak_rate_hz=1e9)
    est = estimate_jsmd(cfg)
    assert total_variation(est.normalized, jsmd_matrix(GEOM).values) < 0.005
    assert est.normalized.max() == 1.0


def test_off_antidiagonal_is_zero_mean_noise():
    diffs = []
    for seed in range(20):
        est = estimate_jsmd(SetExperimentConfig(GEOM, dark_rate_hz=50.0, peak_rate_hz=1e4,
                                                rng_seed=seed))
        ls = [m.l for m in est.config.seed_modes]
        for a, l_s in enumerate(ls):
            for b, l_i in enumerate(ls):
                if l_s + l_i != 0:
                    assert est.optical_rates[a, b] == 0.0
                    diffs.append(est.records[a][b].background_subtracted_mean)
    diffs = np.array(diffs)
    assert abs(diffs.mean()) < 3 * diffs.std(ddof=1) / math.sqrt(len(diffs))


def test_aperture_suppresses_high_l():
    r6 = idler_ring_radius(GEOM, 6)
    base = dict(dark_rate_hz=0.0, peak_rate_hz=1e9)
    free = estimate_jsmd(SetExperimentConfig(GEOM, **base)).antidiagonal()
    cut = estimate_jsmd(SetExperimentConfig(GEOM, aperture_radius=0.8 * r6, **base)).antidiagonal()
    closed = np.array([probability_p0(l, GEOM.gamma_s) for l in range(-6, 7)])
    assert cut[0] < 0.9 * closed[0] and cut[-1] < 0.9 * closed[-1]
    assert free[0] == pytest.approx(closed[0], rel=1e-3)
    assert cut[6] == 1.0


def test_raw_chain_differs_from_calibrated():
    base = dict(dark_rate_hz=0.0, peak_rate_hz=1e9)
    raw = estimate_jsmd(SetExperimentConfig(GEOM, coupling="raw", **base)).antidiagonal()
    cal = estimate_jsmd(SetExperimentConfig(GEOM, **base)).antidiagonal()
    # Phase-only flattening couples high |l| poorly into the Gaussian fiber mode.
    assert raw[0] < 0.2 * cal[0]


def test_efficiency_corrected_keeps_radial_crosstalk():
    # Dividing by the LG_0 reference response leaves weights (2g^2/(1+2g^2))^{|l|},
    # the square root of the closed-form weights, for a fiber matched to the idler waist.
    base = dict(dark_rate_hz=0.0, peak_rate_hz=1e9)
    est = estimate_jsmd(SetExperimentConfig(GEOM, coupling="efficiency-corrected", **base))
    expected = [math.sqrt(probability_p0(l, GEOM.gamma_s)) for l in range(-6, 7)]
    rates = np.fliplr(est.optical_rates).diagonal() / est.config.peak_rate_hz
    np.testing.assert_allclose(rates, expected, rtol=1e-9)
    np.testing.assert_allclose(est.antidiagonal(), expected, rtol=1e-4)


def test_estimate_deterministic_across_threads():
    cfg = SetExperimentConfig(GEOM, rng_seed=1234, peak_rate_hz=2e3, dark_rate_hz=200.0)
    a = estimate_jsmd(cfg, workers=1).to_json()
    b = estimate_jsmd(cfg, workers=1).to_json()
    c = estimate_jsmd(cfg, workers=8).to_json()
    assert a == b == c


def test_extended_seed_metadata():
    cfg = SetExperimentConfig(GEOM, seed_modes=[LGIndex(1, 1), LGIndex(-1, 1)],
                              projection_modes=[LGIndex(1, 1), LGIndex(-1, 1)],
                              dark_rate_hz=0.0)
    est = estimate_jsmd(cfg)
    assert est.metadata()["extended"] is True
    assert est.normalized[0, 0] == 0.0 and est.normalized[0, 1] == 1.0


def test_estimate_serializations():
    est = estimate_jsmd(SetExperimentConfig(GEOM, rng_seed=3))
    doc = est.to_dict()
    assert doc["metadata"]["rng_seed"] == 3
    assert len(doc["records"][0][0]["window_counts"]) == 10
    lines = [line for line in est.to_csv().splitlines() if not line.startswith("#")]
    assert len(lines) == 14
    assert np.all(est.standard_errors >= 0)


def test_total_variation_basic():
    assert total_variation([1, 0], [0, 1]) == 1.0
    assert total_variation([1, 1], [2, 2]) == 0.0
