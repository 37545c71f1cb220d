import json

from click.testing import CliRunner

from nimlab.cli import main


def test_cli_selftest_passes(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, ["selftest", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "PASS selftest" in result.output
    assert (tmp_path / "selftest" / "summary.json").exists()


def test_cli_flag_overrides_and_exit_codes(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "stability-scan",
            "--out", str(tmp_path),
            "--mesh-n", "96",
            "--delta-count", "4",
        ],
    )
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "stability-scan" / "summary.json").read_text())
    assert summary["config"]["mesh"]["angular_count"] == 96
    assert summary["config"]["sweep"]["count"] == 4


def test_cli_usage_error_on_bad_sweep(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["stability-scan", "--out", str(tmp_path), "--delta-start", "2.0"],
    )
    assert result.exit_code == 2


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mesh": {"angular_count": 96}, "seed": 3}))
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["passivity", "--config", str(cfg), "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "passivity" / "summary.json").read_text())
    assert summary["config"]["seed"] == 3


def test_cli_unknown_command():
    runner = CliRunner()
    result = runner.invoke(main, ["frobnicate"])
    assert result.exit_code == 2
