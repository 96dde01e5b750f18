import json

import pytest

from frontend.cli import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_OK,
    RunConfig,
    build_parser,
    config_from_args,
    run,
)
from lab_config import LIB_VERSION


def test_unknown_command_is_usage_error(capsys):
    assert run(["bogus"]) == EXIT_CONFIG


def test_supercritical_charge_rejected(tmp_path, capsys):
    code = run(["selfcheck", "--z", "200", "--output-dir", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "critical-coupling" in capsys.readouterr().out
    assert not list(tmp_path.iterdir())


def test_unknown_lemma_rejected(tmp_path):
    assert run(["lemmas", "--only", "kato,nonsense", "--output-dir", str(tmp_path)]) == EXIT_CONFIG


def test_list_lemmas(capsys):
    assert run(["lemmas", "--list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "kato" in out
    assert "trial_energy" not in out


def test_trial_defaults_from_presets():
    args = build_parser().parse_args(["trial", "--output-dir", "x"])
    config = config_from_args(args)
    assert config.z == 2.0
    assert config.r_values == [8.0, 16.0, 32.0]
    assert config.q == 3


def test_hash_ignores_output_dir():
    a = RunConfig(command="selfcheck", output_dir="a")
    b = RunConfig(command="selfcheck", output_dir="b")
    assert a.hash() == b.hash()
    assert RunConfig(command="selfcheck", seed=1).hash() != a.hash()


@pytest.mark.slow
def test_selfcheck_writes_deterministic_reports(tmp_path):
    first, second = tmp_path / "one", tmp_path / "two"
    assert run(["selfcheck", "--output-dir", str(first)]) == EXIT_OK
    assert run(["selfcheck", "--output-dir", str(second)]) == EXIT_OK
    jsonl = (first / "selfcheck_reports.jsonl").read_bytes()
    assert jsonl == (second / "selfcheck_reports.jsonl").read_bytes()
    assert (first / "selfcheck_summary.csv").read_text().startswith("lemma,params,measured,bound,margin,pass\n")
    lines = [json.loads(line) for line in jsonl.decode().splitlines()]
    assert {line["lemma"] for line in lines} == {"dirac_symbols", "bessel_accuracy", "projector_invariants"}
    for line in lines:
        assert len(line["config_hash"]) == 16
        assert line["version"] == LIB_VERSION
        assert line["pass"] is True


def test_fourier_mass_command(tmp_path):
    code = run(["fourier-mass", "--n-random", "5", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    [line] = (tmp_path / "fourier_mass_reports.jsonl").read_text().splitlines()
    report = json.loads(line)
    assert report["lemma"] == "fourier_mass"
    assert report["inputs"]["n_random"] == 5


def test_failed_check_exit_code(tmp_path, monkeypatch):
    from backend.reports import make_report
    import frontend.cli as cli

    failing = [make_report("kato", {}, {}, {}, 2.0, 1.0, -1.0)]
    monkeypatch.setitem(cli.HANDLERS, "fourier-mass", lambda config: failing)
    assert run(["fourier-mass", "--output-dir", str(tmp_path)]) == EXIT_CHECK_FAILED
    assert (tmp_path / "fourier_mass_summary.csv").exists()


def test_empty_sweep_is_config_error(tmp_path, capsys):
    assert run(["trial", "--r-sweep", ",", "--output-dir", str(tmp_path)]) == EXIT_CONFIG
    assert "base scale" in capsys.readouterr().out


def test_fourier_mass_default_sample_count():
    config = config_from_args(build_parser().parse_args(["fourier-mass", "--output-dir", "x"]))
    assert config.n_random == 200
    assert RunConfig(command="fourier-mass").n_random == 200


@pytest.mark.parametrize("command, unit", [
    ("ground-state", "orbital radii"),
    ("trial", "orbital radii"),
    ("weyl", "Compton wavelengths"),
])
def test_box_help_names_its_unit(command, unit, capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args([command, "--help"])
    assert unit in capsys.readouterr().out


def test_box_is_not_offered_where_unused(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["lemmas", "--box", "3"])
    assert "--box" in capsys.readouterr().err
