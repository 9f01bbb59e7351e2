import csv
import json

import pytest

from fastconj.cli import (EXIT_BUDGET, EXIT_CONFIG, EXIT_CONSTRUCTION, EXIT_FORMAT, EXIT_IO, EXIT_OK, ConfigError,
                          load_run_config, main)

ONE_STAGE = """
[run]
type = III_lambda
lambda = 4
r = 1
max_stages = 1

[oracle]
kind = tower_series
base = 10
growth = 8

[precision]
sample_points = 200
distance_samples = 100

[budgets]
ratio_samples = 2
"""


def _write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = _write(d / "one.ini", ONE_STAGE)
    out = str(d / "trace.json")
    code = main(["construct", "--config", cfg, "--out", out])
    return d, out, code


def test_construct_ok(built):
    d, out, code = built
    assert code == EXIT_OK
    doc = json.loads(open(out).read())
    assert doc["format"] == "fastconj-trace" and doc["analysis"]["measures"]


def test_verify_ok(built):
    assert main(["verify", "--trace", built[1], "--suite", "integrity"]) == EXIT_OK
    assert main(["verify", "--trace", built[1], "--suite", "measures"]) == EXIT_OK


def test_verify_tampered(built, tmp_path, capsys):
    doc = json.loads(open(built[1]).read())
    doc["trace"]["stages"][0]["generator"]["delta_prime"] = "1/7"
    bad = _write(tmp_path / "bad.json", json.dumps(doc))
    assert main(["verify", "--trace", bad, "--suite", "integrity"]) == EXIT_CONSTRUCTION
    assert "first failing check: stage 1 generator field delta_prime" in capsys.readouterr().err


def test_verify_format_and_io(tmp_path):
    assert main(["verify", "--trace", _write(tmp_path / "j.json", "[1, 2")]) == EXIT_FORMAT
    assert main(["verify", "--trace", _write(tmp_path / "o.json", '{"format": "other"}')]) == EXIT_FORMAT
    assert main(["verify", "--trace", str(tmp_path / "missing.json")]) == EXIT_IO


def test_export(built, tmp_path):
    out = tmp_path / "exp"
    assert main(["export", "--trace", built[1], "--what", "graphs,measures", "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader(open(out / "measures.csv")))
    assert rows[0][0] == "depth" and rows[1][-1] == "True"
    assert (out / "hhat_1.csv").exists() and (out / "f_1.csv").exists()
    assert main(["export", "--trace", built[1], "--what", "", "--out", str(out)]) == EXIT_OK
    assert main(["export", "--trace", built[1], "--what", "pictures", "--out", str(out)]) == EXIT_CONFIG


def test_config_errors(tmp_path):
    bad = _write(tmp_path / "bad.ini", ONE_STAGE.replace("lambda = 4", "lambda = 1"))
    assert main(["construct", "--config", bad, "--out", str(tmp_path / "t.json")]) == EXIT_CONFIG
    with pytest.raises(ConfigError):
        load_run_config(_write(tmp_path / "t.ini", ONE_STAGE.replace("III_lambda", "IV")))
    assert main(["construct", "--config", str(tmp_path / "none.ini"), "--out", str(tmp_path / "t.json")]) == EXIT_IO


def test_type_alias(tmp_path):
    rc = load_run_config(_write(tmp_path / "a.ini", ONE_STAGE.replace("type = III_lambda\nlambda = 4",
                                                                      "type = II_inf")))
    assert rc.type_tag().kind == "II_infty"


def test_budget_exit(tmp_path):
    cfg = _write(tmp_path / "b.ini", ONE_STAGE + "denominator_cap_digits = 1\n")
    assert main(["construct", "--config", cfg, "--out", str(tmp_path / "t.json")]) == EXIT_BUDGET
