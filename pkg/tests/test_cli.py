import json
import subprocess
import sys

import pytest

from tqft73.cli import main, read_config, UsageError


def run(capsys, *argv):
    code = main(list(argv))
    return code, json.loads(capsys.readouterr().out)


def test_specfun_lobachevsky_zero(capsys):
    code, doc = run(capsys, "specfun", "--fn", "lobachevsky", "--x", "0")
    assert code == 0 and doc["value"] == 0.0


def test_specfun_faddeev(capsys):
    code, doc = run(capsys, "specfun", "--fn", "faddeev", "--x", "0", "--b", "1")
    assert code == 0
    assert abs(complex(*doc["value"]) ** 2 - complex(3**0.5 / 2, 0.5)) < 1e-10


def test_saddle_t5(capsys):
    code, doc = run(capsys, "saddle", "--t-index", "5")
    assert code == 0
    assert doc["f"] == pytest.approx([2.884158080, -4.592125697], abs=1e-8)
    assert doc["admissible"]


def test_saddle_table(capsys):
    code, doc = run(capsys, "saddle")
    assert len(doc["roots"]) == 7 and "note" in doc["roots"][0]


def test_angles_and_gluing(capsys):
    code, doc = run(capsys, "angles", "--builtin", "ideal73")
    assert code == 0 and doc["volume"] == pytest.approx(4.592125697, abs=1e-6)
    code, doc = run(capsys, "gluing")
    assert code == 0 and doc["volume"] == pytest.approx(4.592125697, abs=1e-8)


def test_triangulation_file(capsys, tmp_path, ideal):
    p = tmp_path / "x.json"
    p.write_text(json.dumps(ideal.to_json()))
    code, doc = run(capsys, "angles", "--triangulation", str(p))
    assert code == 0 and doc["volume"] == pytest.approx(4.592125697, abs=1e-6)


def test_integrate_point_and_csv(capsys, tmp_path):
    out = tmp_path / "s.csv"
    code, doc = run(capsys, "integrate", "sweep", "--b", "0.5,0.45,0.4", "--csv", str(out))
    assert code == 0 and len(doc["rows"]) == 3
    lines = out.read_text().splitlines()
    assert lines[0] == "b,hbar,log_abs_J,volume_estimate,err_bound" and len(lines) == 4
    code, doc = run(capsys, "integrate", "point", "--b", "0.5")
    assert code == 0 and doc["log_abs"] == pytest.approx(-4.0017751505, abs=1e-8)


def test_deterministic_output(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["gluing", "--out", str(a)])
    main(["gluing", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_bad_flags_exit_2():
    for argv in (["specfun", "--fn", "nope", "--x", "1"], ["saddle", "--t-index", "9"],
                 ["angles", "--triangulation", "/nonexistent.json"], ["bogus"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2


def test_numerical_failure_exit_1(capsys):
    code, doc = run(capsys, "specfun", "--fn", "dilog", "--x", "3")
    assert code == 1 and doc["type"] == "DomainError"


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nabs_tol = 1e-11\nthreads = 2\n")
    assert read_config(str(cfg)) == {"abs_tol": 1e-11, "threads": 2}
    code, _ = run(capsys, "specfun", "--fn", "log_faddeev", "--x", "0.2", "--config", str(cfg))
    assert code == 0
    cfg.write_text("colour = red\n")
    with pytest.raises(UsageError):
        read_config(str(cfg))


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "tqft73.cli", "specfun", "--fn", "lobachevsky", "--x", "0"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["value"] == 0.0
