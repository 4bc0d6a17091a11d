import json

import pytest

from qkdvoa.cli import main
from qkdvoa.io import OutputPathError, output_path, read_csv, write_csv

FAST = "duration_sec = 600\nblock_sec = 60\n"


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "fast.cfg"
    p.write_text("distance_km = 60\nseed = 3\n" + FAST)
    return p


def test_skr_prints_breakdown(capsys):
    assert main(["skr", "--distance-km", "30"]) == 0
    doc = json.loads(capsys.readouterr().out)
    br = doc["breakdown"]
    assert br["mode"] == "asymptotic"
    assert br["raw_key_rate"] == pytest.approx(0.0419, abs=0.002)
    assert "chi_tot" in br["intermediates"]


def test_skr_finite_size(capsys):
    assert main(["skr", "--distance-km", "60", "--mode", "finite-size"]) == 0
    k = json.loads(capsys.readouterr().out)["breakdown"]["raw_key_rate"]
    assert k == pytest.approx(1.97e-3, rel=0.25)


def test_eta_bias_out_of_range(tmp_path, capsys):
    assert main(["curves", "--eta-bias", "1.5", "--out", str(tmp_path)]) == 2
    assert "eta-bias must be in (0,1]" in capsys.readouterr().err
    assert not any(tmp_path.iterdir())


def test_curves_written(tmp_path):
    assert main(["curves", "--eta-bias", "1,0.5", "--grid-size", "101", "--out", str(tmp_path)]) == 0
    cols = read_csv(tmp_path / "curves.csv")
    assert set(cols) >= {"delta_phi_rad", "alpha_db_eta_1", "alpha_db_eta_0.5"}
    assert cols["delta_phi_rad"].size == 101


def test_curves_json_format(tmp_path):
    assert main(["curves", "--format", "json", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "curves.json").read_text())
    assert len(doc["delta_phi_rad"]) == 1001


def test_simulate_happy_path(tmp_path, cfg):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("timeseries.csv", "blocks.csv", "summary.json"):
        assert (out / name).is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["seed"] == 3
    assert "excess_noise_snu" in summary["defaults_used"]
    ts = read_csv(out / "timeseries.csv")
    assert ts["t_sec"].size == 600
    assert read_csv(out / "blocks.csv")["block"].size == 10


def test_csv_uses_twelve_significant_digits(tmp_path, cfg):
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    row = (tmp_path / "timeseries.csv").read_text().splitlines()[1].split(",")
    digits = row[3].replace("-", "").replace(".", "").lstrip("0")
    assert len(digits) <= 12


def test_summary_round_trip_is_byte_identical(tmp_path, cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(a / "summary.json"), "--out", str(b)]) == 0
    for name in ("timeseries.csv", "blocks.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_precedence(tmp_path, monkeypatch):
    p = tmp_path / "noseed.cfg"
    p.write_text(FAST)
    monkeypatch.setenv("QKDVOA_SEED", "42")
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "env")]) == 0
    assert json.loads((tmp_path / "env" / "summary.json").read_text())["config"]["seed"] == 42
    assert main(["simulate", "--config", str(p), "--seed", "7", "--out", str(tmp_path / "flag")]) == 0
    assert json.loads((tmp_path / "flag" / "summary.json").read_text())["config"]["seed"] == 7


def test_bad_seed_env(tmp_path, monkeypatch):
    p = tmp_path / "noseed.cfg"
    p.write_text(FAST)
    monkeypatch.setenv("QKDVOA_SEED", "abc")
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_compare_outputs(tmp_path, cfg):
    assert main(["compare", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["b"]["config"]["voa_variant"] == "symmetric"
    assert doc["ratios_b_over_a"]["alpha_std"] > 5
    assert (tmp_path / "timeseries_b.csv").is_file()


def test_chip_map(tmp_path):
    assert main(["chip-map", "--step", "0.5", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "chip_map_summary.json").read_text())
    assert doc["argmax"]["alpha_db"] == pytest.approx(39.14, abs=0.1)


def test_tradeoff(tmp_path):
    assert main(["tradeoff", "--eta-bias", "0.5,1", "--out", str(tmp_path)]) == 0
    t = read_csv(tmp_path / "tradeoff.csv")
    assert t["stages_needed"][0] == 2


@pytest.mark.parametrize("text", ["bogus = 1\n", "seed = 1\nseed = 2\n", "pe_fraction = 0\n"])
def test_config_errors_exit_2(tmp_path, text, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert capsys.readouterr().err.startswith("qkdvoa: error:")


def test_missing_config_exit_2(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2


def test_usage_error_exit_2(capsys):
    assert main(["simulate", "--bogus"]) == 2
    assert main([]) == 2


def test_numerical_error_exit_3(tmp_path, capsys):
    p = tmp_path / "sym.cfg"
    p.write_text("voa_variant = symmetric\nsymmetric_target_db = 50\n" + FAST)
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 3
    assert "numerical error" in capsys.readouterr().err


def test_missing_out_is_config_error():
    assert main(["curves"]) == 2


def test_writes_stay_inside_out_dir(tmp_path):
    with pytest.raises(OutputPathError):
        output_path(tmp_path, "../escape.csv")
    with pytest.raises(OutputPathError):
        write_csv(tmp_path, "sub/x.csv", {"a": [1.0]})
