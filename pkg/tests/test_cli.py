import csv
import subprocess
import sys

import numpy as np
import pytest

from stwave.cli import THREADS_ENV, _default_threads, format_value, main, parse_config
from stwave.exceptions import ConfigParseError

CONFIG = """\
[DEFAULT]
degree = 1

[conv]
kind = convergence
problem = standing_wave
T = 1.0
n_space = 4, 8
ht_over_hs = 1
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "exp.ini"
    p.write_text(CONFIG)
    return p


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_parse_basic():
    (cfg,) = parse_config(CONFIG, seed=7, threads=2)
    assert cfg.name == "conv" and cfg.kind == "convergence"
    assert cfg.degrees == (1,) and cfg.n_space == (4, 8) and cfg.ht_over_hs == 1.0
    assert cfg.problem_args == {"T": 1.0} and cfg.seed == 7 and cfg.threads == 2


@pytest.mark.parametrize("text,line,field", [
    ("[a]\nkind = convergence\nn_space = 4, x\n", 3, "n_space"),
    ("[a]\nkind = convergence\nn_space =\n", 3, "n_space"),
    ("[a]\nkind = convergence\nn_space = 4\nbogus = 1\n", 4, "bogus"),
    ("[a]\nkind = nonsense\nn_space = 4\n", 2, "kind"),
    ("[a]\nn_space = 4\n", 1, "kind"),
    ("kind = convergence\n", 1, None),
])
def test_parse_errors_name_line_and_field(text, line, field):
    with pytest.raises(ConfigParseError) as info:
        parse_config(text)
    msg = str(info.value)
    assert f"line {line}" in msg
    if field:
        assert field in msg


def test_empty_config_rejected():
    with pytest.raises(ConfigParseError):
        parse_config("# nothing here\n")


def test_empty_list_message():
    with pytest.raises(ConfigParseError, match="empty list"):
        parse_config("[a]\nkind = convergence\nn_space = ,\n")


@pytest.mark.parametrize("value,text", [
    (0.1, "0.10000000000000001"),
    (1.0, "1"),
    (float("nan"), "nan"),
    (float("-inf"), "-inf"),
    (np.float64(2.0) / 3, "0.66666666666666663"),
    (3, "3"),
    (True, "1"),
    (None, ""),
    ("iga-stab", "iga-stab"),
])
def test_format_value(value, text):
    assert format_value(value) == text


def test_floats_roundtrip_exactly():
    rng = np.random.default_rng(0)
    for v in rng.standard_normal(200) * 10.0 ** rng.integers(-20, 20, 200):
        assert float(format_value(float(v))) == v


def test_run_writes_deterministic_csv(cfg_path, tmp_path, capsys):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["--config", str(cfg_path), "--out", str(out1), "--seed", "3"]) == 0
    assert main(["--config", str(cfg_path), "--out", str(out2), "--threads", "2", "--seed", "3"]) == 0
    a, b = (out1 / "conv.csv").read_bytes(), (out2 / "conv.csv").read_bytes()
    assert a == b
    rows = read_rows(out1 / "conv.csv")
    assert len(rows) == 3 and "l2" in rows[0]
    assert "conv: 2 rows" in capsys.readouterr().out


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[a]\nkind = convergence\nn_space = 4, x\n")
    assert main(["--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "line 3" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "o")]) == 1


def test_only_filter(tmp_path):
    p = tmp_path / "two.ini"
    p.write_text(CONFIG + "\n[other]\nkind = convergence\nn_space = 2\nn_time = 2\n")
    assert main(["--config", str(p), "--out", str(tmp_path / "o"), "--only", "other"]) == 0
    assert [f.name for f in (tmp_path / "o").iterdir()] == ["other.csv"]


def test_threads_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "4")
    assert _default_threads() == 4
    monkeypatch.setenv(THREADS_ENV, "junk")
    assert _default_threads() == 1


def test_console_entry_point(cfg_path, tmp_path):
    res = subprocess.run([sys.executable, "-m", "stwave.cli", "--config", str(cfg_path),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "o" / "conv.csv").exists()
    res = subprocess.run([sys.executable, "-m", "stwave.cli", "--out", "x"], capture_output=True)
    assert res.returncode == 2  # argparse usage error
