import json

import pytest

from cbfcompose.cli import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, load_config, main, parse_config_text
from cbfcompose.errors import ConfigError
from cbfcompose.scenario import Mode


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_writes_csvs_and_summary(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "run", "--preset", "paper-2veh-turn", "--t-end", "2", "-o", str(tmp_path))
    assert code == EXIT_OK
    summary = json.loads(out)
    assert summary["steps"] == 101 and summary["error"] is None
    assert (tmp_path / "trajectory.csv").exists() and (tmp_path / "pairs.csv").exists()


def test_run_renders_figures(tmp_path, capsys):
    pytest.importorskip("matplotlib")
    code, _, _ = run_cli(capsys, "run", "--preset", "paper-2veh-straight", "--t-end", "1", "-o", str(tmp_path), "--figures")
    assert code == EXIT_OK
    for name in ("controls.png", "distance.png", "paths.png"):
        assert (tmp_path / name).stat().st_size > 0


@pytest.mark.parametrize(
    "argv",
    [
        ["--preset", "nope"],
        ["--preset", "paper-2veh-turn", "--dt", "0"],
        ["--preset", "paper-2veh-turn", "--kappa", "-1"],
    ],
)
def test_run_config_errors(tmp_path, capsys, argv):
    code, _, err = run_cli(capsys, "run", *argv, "-o", str(tmp_path))
    assert code == EXIT_CONFIG
    assert err.startswith("error:")


def test_run_unsafe_start_aborts(tmp_path, capsys):
    code, _, err = run_cli(capsys, "run", "--preset", "paper-20veh-straight", "--psi", "0", "-o", str(tmp_path))
    assert code == EXIT_ABORT
    assert "UnsafeStart" in err


def test_config_file(tmp_path, capsys):
    path = tmp_path / "s.cfg"
    path.write_text("# two vehicles\npreset = paper-2veh-turn\nmode = decentralized\nt_end = 1  # short\n")
    cfg = load_config(str(path))
    assert cfg.mode is Mode.DECENTRALIZED and cfg.t_end == 1.0
    code, out, _ = run_cli(capsys, "run", "--config", str(path), "-o", str(tmp_path / "out"))
    assert code == EXIT_OK and json.loads(out)["mode"] == "decentralized"


def test_config_from_scratch(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text(
        "k = 3\nv_min = 10\nv_max = 20\nomega_max_deg = 10\nd_s = 4\n"
        "safety = adjusted_sqrt\nmaneuver = turn\nsigma = 1, 1.05, 1.1\n"
    )
    cfg = load_config(str(path))
    assert cfg.k == 3 and cfg.maneuver.k == 3


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("k = 2\nbogus = 1\n", "s.cfg:2: unknown key 'bogus'"),
        ("dt = 0.1\ndt = 0.2\n", "s.cfg:2: duplicate key 'dt' (first set on line 1)"),
        ("\n\nk = two\n", "s.cfg:3: k = 'two' is not a valid int"),
        ("preset\n", "s.cfg:1: expected 'key = value'"),
    ],
)
def test_config_errors_name_the_line(text, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config_text(text, "s.cfg")
    assert fragment in str(err.value)


def test_missing_keys_without_preset(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text("k = 3\n")
    with pytest.raises(ConfigError, match="required"):
        load_config(str(path))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "absent.cfg"))


def test_counterexample_command(capsys):
    code, out, _ = run_cli(capsys, "counterexample")
    assert code == EXIT_OK
    assert "QP infeasible: True" in out
    assert "[FAIL] rows match +-0.4" in out


def test_presets_command(capsys):
    code, out, _ = run_cli(capsys, "presets")
    assert code == EXIT_OK
    assert out.count("paper-") == 4
