import csv
import io
import json

import pytest

from ubknn import cli
from ubknn.generators import TwoMoonsSpec, gen_two_moons
from ubknn.dataset import save_csv

SYNTH = "moons:n_major=600,n_minor=40,test_major=300,test_minor=30"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_int_list():
    assert cli.parse_int_list("1-3,7") == [1, 2, 3, 7]
    assert cli.parse_int_list("5") == [5]
    with pytest.raises(cli.ConfigError):
        cli.parse_int_list(",")


def test_parse_synth_errors():
    with pytest.raises(cli.ConfigError):
        cli.parse_synth("spiral:n=3")
    with pytest.raises(cli.ConfigError):
        cli.parse_synth("moons:bogus=1")


def test_fit_eval_json_deterministic(capsys):
    args = ["fit-eval", "--synth", SYNTH, "--method", "underbag-knn", "--k", "3",
            "--rounds", "4", "--folds", "3", "--repeats", "1", "--seed", "5"]
    code, out1, _ = run(capsys, *args)
    assert code == 0
    _, out2, _ = run(capsys, *args)
    a, b = json.loads(out1), json.loads(out2)
    a.pop("timings"), b.pop("timings")
    assert a == b
    assert len(a["folds"]) == 3
    assert 0.5 <= a["summary"]["am_mean"] <= 1
    assert a["provenance"]["rng"] == "numpy.PCG64"
    assert all("fit_seconds" not in f for f in a["folds"])


def test_fit_eval_csv_with_tuning(capsys, tmp_path):
    out = tmp_path / "r.csv"
    code, _, _ = run(capsys, "fit-eval", "--synth", SYNTH, "--method", "knn", "--k-grid", "1,3,5",
                     "--folds", "3", "--repeats", "1", "--tune-folds", "3", "--format", "csv",
                     "--out", str(out))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [r["repeat"] for r in rows] == ["0", "0", "0", "mean", "sd"]
    assert all(r["k"] in ("1", "3", "5", "") for r in rows)


def test_fit_eval_csv_data(capsys, tmp_path):
    path = tmp_path / "moons.csv"
    save_csv(gen_two_moons(TwoMoonsSpec(300, 30, seed=2)), path)
    code, out, _ = run(capsys, "fit-eval", "--data", str(path), "--label-column", "label",
                       "--method", "undersample-knn", "--auto-params", "--folds", "3", "--repeats", "1")
    assert code == 0
    report = json.loads(out)
    assert report["provenance"]["class_counts"] == [300, 30]
    assert report["folds"][0]["auto_params"]["regime"] == "undersampling"


def test_env_override(capsys, monkeypatch):
    monkeypatch.setenv("UBKNN_SYNTH", SYNTH)
    monkeypatch.setenv("UBKNN_K", "2")
    monkeypatch.setenv("UBKNN_FOLDS", "2")
    monkeypatch.setenv("UBKNN_REPEATS", "1")
    code, out, _ = run(capsys, "fit-eval", "--method", "knn")
    assert code == 0
    report = json.loads(out)
    assert report["config"]["k"] == 2 and {f["k"] for f in report["folds"]} == {2}
    # flags win over the environment
    _, out, _ = run(capsys, "fit-eval", "--method", "knn", "--k", "4")
    assert {f["k"] for f in json.loads(out)["folds"]} == {4}


@pytest.mark.parametrize("argv", [
    ["fit-eval", "--synth", SYNTH, "--s-frac", "1.5"],
    ["fit-eval", "--synth", "spiral:n=3"],
    ["fit-eval"],
    ["fit-eval", "--synth", SYNTH, "--method", "bogus"],
    ["sweep", "--synth", SYNTH, "--k-grid", "0,1"],
])
def test_config_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_bad_env_value_is_config_error(capsys, monkeypatch):
    monkeypatch.setenv("UBKNN_SEED", "abc")
    assert run(capsys, "oracle-check")[0] == 2


def test_data_errors(capsys, tmp_path):
    assert run(capsys, "fit-eval", "--data", str(tmp_path / "missing.csv"))[0] == 3
    path = tmp_path / "one.csv"
    path.write_text("1,a\n2,a\n")
    code, _, err = run(capsys, "fit-eval", "--data", str(path))
    assert code == 3 and "distinct labels" in err


def test_sweep(capsys):
    code, out, _ = run(capsys, "sweep", "--synth", SYNTH, "--rounds-grid", "1,5", "--k-grid", "1-3",
                       "--repeats", "2", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 6
    assert {(r["B"], r["k"]) for r in rows} == {(b, k) for b in "15" for k in "123"}
    assert all(r["runs"] == "2" for r in rows)


def test_bench(capsys):
    code, out, _ = run(capsys, "bench", "--n-grid", "4000,8000", "--queries", "500", "--repeats", "1")
    assert code == 0
    report = json.loads(out)
    assert {r["method"] for r in report["rows"]} == {"knn", "underbag-knn"}
    assert set(report["log_log_slopes"]) == {"knn", "underbag-knn"}


def test_oracle_check(capsys):
    code, out, _ = run(capsys, "oracle-check", "--seed", "3")
    assert code == 0
    assert out.count("PASS") == 5


def test_oracle_check_failure(capsys, monkeypatch):
    from ubknn import selfcheck
    monkeypatch.setattr(selfcheck, "run_all",
                        lambda seed: [selfcheck.CheckResult("x", False, "forced")])
    code, out, _ = run(capsys, "oracle-check")
    assert code == 4 and "FAIL" in out
