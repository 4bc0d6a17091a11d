import math
from dataclasses import replace

import numpy as np
import pytest

from qkdvoa.harness import (
    SEED_SUITE,
    ScenarioConfig,
    ScenarioError,
    TraceMismatchError,
    bias_tradeoff_sweep,
    compare_designs,
    default_chip,
    run_scenario,
    summarize,
    summarize_series,
    sweep_attenuation_curves,
    sweep_voltage_map,
)
from qkdvoa.noise import PhaseNoiseConfig, PhaseNoiseTrace
from qkdvoa.photonics import SATURATION_DB, AttenuationCurve, solve_operating_point

SHORT = dict(duration_sec=600.0, block_sec=60.0)


# summarize

def test_summarize_known_case():
    s = summarize_series([1.0, 2.0, 3.0])
    assert (s.mean, s.std, s.min, s.max, s.count) == (2.0, 1.0, 1.0, 3.0, 3)


def test_summarize_constant_and_degenerate():
    assert summarize_series([4.0] * 5).std == 0.0
    with pytest.raises(ScenarioError):
        summarize_series([1.0])
    with pytest.raises(ScenarioError):
        summarize_series([])


# sweeps

def test_curve_sweep_columns_and_depth_order():
    etas = [1.0, 0.75, 0.5, 0.25]
    ds = sweep_attenuation_curves(etas, 1001)
    assert list(ds.alpha_db) == etas
    i = int(np.argmin(np.abs(ds.delta_phi - math.pi)))
    depth = [ds.alpha_db[e][i] for e in etas]
    assert depth == sorted(depth, reverse=True)
    assert ds.saturated[1.0][i]
    assert not any(ds.saturated[e].any() for e in etas[1:])
    assert ds.alpha_db[0.5].max() == pytest.approx(16.69, abs=0.01)
    assert ds.alpha_db[0.25].max() == pytest.approx(abs(10 * math.log10(0.25 * 0.25)), abs=1e-6)
    assert ds.delta_phi[0] == 0.0 and ds.delta_phi[-1] == pytest.approx(2 * math.pi)


def test_curve_sweep_rejects_small_grid():
    with pytest.raises(ValueError):
        sweep_attenuation_curves([0.5], 50)


def test_voltage_map_argmax_and_anchor():
    chip = default_chip()
    u = np.round(np.arange(0.0, 12.0001, 0.1), 10)
    vm = sweep_voltage_map(chip, u, u)
    u1, u2, a = vm.argmax
    assert (u1, u2) == pytest.approx((11.0, 5.5), abs=0.1)
    assert a == pytest.approx(39.14, abs=0.1)
    i, j = np.argmin(np.abs(u - 6.7)), np.argmin(np.abs(u - 11.1))
    assert vm.alpha_db[i, j] == pytest.approx(12.73, abs=0.1)
    assert vm.alpha_db.shape == (u.size, u.size)


def test_tradeoff_rows():
    rows = {r.eta_bias: r for r in bias_tradeoff_sweep([0.25, 0.5, 1.0])}
    half = rows[0.5]
    assert half.stage_max_db == pytest.approx(16.69, abs=0.01)
    assert half.max_deviation_db == pytest.approx(0.09, abs=0.005)
    assert half.stages_needed == 2
    assert half.covered_max_db >= 38.0
    sym = rows[1.0]
    assert 1.30 <= sym.max_deviation_db <= 1.70
    assert sym.alpha0_db == pytest.approx(16.69)
    assert rows[0.25].stages_needed == 3


def test_tradeoff_deviation_grows_toward_unit_bias():
    grid = np.linspace(0.5, 1.0, 26)
    devs = [r.max_deviation_db for r in bias_tradeoff_sweep(grid)]
    assert all(b > a for a, b in zip(devs, devs[1:]))


# scenario runs

def test_config_validation():
    with pytest.raises(ScenarioError):
        ScenarioConfig(duration_sec=1000, block_sec=600)
    with pytest.raises(ScenarioError):
        ScenarioConfig(voa_variant="other")
    with pytest.raises(ScenarioError):
        ScenarioConfig(reference_mode="other")
    with pytest.raises(ScenarioError):
        ScenarioConfig(noise_target_std_db=-1)
    assert ScenarioConfig(distance_km=60).qkd.distance_km == 60
    assert ScenarioConfig().n_blocks == 8


def test_zero_noise_is_flat():
    rep = run_scenario(ScenarioConfig(noise_target_std_db=0.0, reference_mode="nominal", **SHORT))
    p = rep.per_second["output_power_dbm"]
    assert np.ptp(p) == 0.0
    # only the 1 mV drive quantisation separates it from the nominal level
    assert p[0] == pytest.approx(-65.50, abs=0.01)
    assert np.ptp(rep.per_block["believed_skr"]) == 0.0
    assert rep.summary["block_believed_skr"].std == 0.0


def test_default_run_shape_and_consistency():
    rep = run_scenario(ScenarioConfig(distance_km=60, seed=5))
    assert rep.per_second["t_sec"].size == 4800
    assert rep.per_block["believed_skr"].size == 8
    again = summarize(rep)
    for key, s in rep.summary.items():
        a, b = s.to_dict(), again[key].to_dict()
        for k in a:
            assert a[k] == pytest.approx(b[k], abs=1e-12, rel=0)
    # block means recomputed from the per-second series
    alpha = rep.per_second["alpha_db"].reshape(8, 600).mean(axis=1)
    np.testing.assert_allclose(rep.per_block["mean_alpha_db"], alpha, rtol=0, atol=1e-12)


def test_determinism_bit_identical():
    cfg = ScenarioConfig(distance_km=60, seed=17)
    a, b = run_scenario(cfg), run_scenario(cfg)
    for k in a.per_second:
        np.testing.assert_array_equal(a.per_second[k], b.per_second[k])
    for k in a.per_block:
        np.testing.assert_array_equal(a.per_block[k], b.per_block[k])


def test_seed_changes_trace():
    a = run_scenario(ScenarioConfig(seed=1, **SHORT))
    b = run_scenario(ScenarioConfig(seed=2, **SHORT))
    assert not np.array_equal(a.per_second["alpha_db"], b.per_second["alpha_db"])


def test_run_mean_reference_centres_variance():
    rep = run_scenario(ScenarioConfig(seed=3))
    p = rep.per_second["output_power_dbm"]
    assert rep.meta["reference_power_dbm"] == pytest.approx(p.mean(), abs=1e-12)


def test_block_mode_switch():
    a = run_scenario(ScenarioConfig(seed=4, **SHORT))
    b = run_scenario(ScenarioConfig(seed=4, block_skr_mode="per-second-mean", **SHORT))
    per = b.per_second["believed_skr"].reshape(10, 60).mean(axis=1)
    np.testing.assert_allclose(b.per_block["believed_skr"], per, rtol=1e-12)
    assert not np.allclose(a.per_block["believed_skr"], b.per_block["believed_skr"], rtol=1e-9, atol=0)


def test_explicit_noise_config_used():
    noise = PhaseNoiseConfig(slow_sigma_rad=0.002, fast_sigma_rad=0.001)
    rep = run_scenario(ScenarioConfig(noise=noise, **SHORT))
    assert rep.meta["noise"]["calibrated"] is False
    assert rep.meta["noise"]["slow_sigma_rad"] == 0.002


def test_symmetric_matches_biased_mean():
    cfg = ScenarioConfig(seed=8)
    a = run_scenario(cfg)
    b = run_scenario(replace(cfg, voa_variant="symmetric"))
    assert b.summary["alpha_db"].mean == pytest.approx(a.summary["alpha_db"].mean, abs=1e-9)
    assert b.meta["symmetric_fixed_loss_db"] > 0
    assert b.summary["alpha_db"].std > a.summary["alpha_db"].std


def test_symmetric_target_beyond_chain_is_error():
    with pytest.raises(ScenarioError):
        run_scenario(ScenarioConfig(voa_variant="symmetric", symmetric_target_db=50.0, **SHORT))


def test_saturated_samples_flagged_and_excluded():
    cfg = ScenarioConfig(voa_variant="symmetric", noise_target_std_db=0.0, **SHORT)
    x0 = solve_operating_point(AttenuationCurve.symmetric(), 30.0)
    d = np.zeros(600)
    d[[10, 200, 444]] = math.pi - x0  # lands exactly on the null
    trace = PhaseNoiseTrace(d, 0, PhaseNoiseConfig(duration_sec=600))
    rep = run_scenario(cfg, shared_trace=trace)
    sat = rep.per_second["saturated"]
    assert rep.flags["saturated_samples"] == 3 == int(sat.sum())
    assert np.all(np.isnan(rep.per_second["believed_skr"][sat]))
    assert rep.summary["alpha_db"].count == 597
    assert np.all(np.isfinite(rep.per_block["believed_skr"]))


def test_shared_trace_length_checked():
    trace = PhaseNoiseTrace(np.zeros(10), 0, PhaseNoiseConfig(duration_sec=10))
    with pytest.raises(TraceMismatchError):
        run_scenario(ScenarioConfig(**SHORT), shared_trace=trace)


# comparisons

def test_identical_configs_give_unit_ratios():
    cfg = ScenarioConfig(seed=9, **SHORT)
    cmp = compare_designs(cfg, cfg)
    for key in ("alpha_std", "power_std", "block_skr_std", "per_second_skr_std", "block_skr_mean"):
        assert cmp.ratios[key] == 1.0
    assert np.all(cmp.per_second_delta["alpha_db"] == 0.0)


def test_identical_zero_noise_configs_give_unit_ratios():
    cfg = ScenarioConfig(noise_target_std_db=0.0, **SHORT)
    cmp = compare_designs(cfg, cfg)
    assert cmp.ratios["alpha_std"] == 1.0


def test_compare_shares_trace():
    cfg = ScenarioConfig(seed=10, **SHORT)
    cmp = compare_designs(cfg, replace(cfg, voa_variant="symmetric"))
    assert cmp.a.traces[0].same_samples(cmp.b.traces[0])
    assert cmp.ratios["alpha_std"] > 5


def test_compare_rejects_mismatched_noise():
    cfg = ScenarioConfig(seed=10, **SHORT)
    with pytest.raises(TraceMismatchError):
        compare_designs(cfg, replace(cfg, seed=11))
    with pytest.raises(TraceMismatchError):
        compare_designs(cfg, replace(cfg, noise_target_std_db=0.05))


def test_seed_suite_fixed():
    assert len(SEED_SUITE) == 20 and len(set(SEED_SUITE)) == 20


def test_saturation_sentinel_value():
    assert SATURATION_DB == pytest.approx(120.0)
