import json
import subprocess
import sys

import pytest

from ldprank.cli import main


def test_choose_k(capsys):
    assert main(["choose-k", "--epsilon", "4", "--m", "10"]) == 0
    assert capsys.readouterr().out.strip() == "2"


def test_bound_labels_noninformative(capsys):
    assert main(["bound", "--n", "10", "--m", "10", "--epsilon", "0.1", "--theta", "0.25"]) == 0
    assert "(non-informative)" in capsys.readouterr().out


def test_bound_informative(capsys):
    assert main(["bound", "--n", "100000", "--m", "4", "--k", "1", "--epsilon", "4", "--theta", "0.75"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("K=1 mu=") and "non-informative" not in out


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = main(["run", "--solution", "ldp-rr", "--mallows", "theta=0.5,n=200,m=10",
                 "--epsilon", "2", "--queries", "auto", "--repeats", "2", "--out", str(out), "--no-timing"])
    assert code == 0
    assert "K=1" in capsys.readouterr().out
    assert out.read_text().splitlines()[0].startswith("solution,dataset")


def test_run_is_reproducible(tmp_path):
    args = ["run", "--solution", "ldp-lap", "--bernoulli", "theta=0.5,n=100,m=5",
            "--epsilon", "1", "--repeats", "3", "--seed", "4", "--no-timing"]
    main(args + ["--out", str(tmp_path / "a.csv")])
    main(args + ["--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_phi_raw(tmp_path, capsys):
    code = main(["run", "--solution", "kwiksort", "--mallows", "theta=0.5,n=50,m=4",
                 "--phi-raw", "0.2", "--repeats", "1"])
    assert code == 0
    assert "phi=0.2" in capsys.readouterr().out


def test_dump_estimates(tmp_path, capsys):
    dump = tmp_path / "est.csv"
    code = main(["run", "--solution", "ldp-rr", "--mallows", "theta=0.5,n=100,m=4", "--epsilon", "1",
                 "--queries", "2", "--repeats", "1", "--dump-estimates", str(dump)])
    assert code == 0
    lines = dump.read_text().splitlines()
    assert lines[0].startswith("j,l,answers,est_jl_raw")
    assert len(lines) == 7
    assert "pair coverage" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["run", "--solution", "dp", "--mallows", "theta=0.5,n=10,m=4"],
    ["run", "--solution", "kwiksort", "--mallows", "theta=0.5,n=10,m=4", "--queries", "2"],
    ["run", "--solution", "ldp-rr", "--epsilon", "1"],
    ["run", "--solution", "ldp-rr", "--epsilon", "1", "--mallows", "theta=x,n=1,m=2"],
    ["sweep", "--preset", "k"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus"])
    assert exc.value.code == 2


def test_missing_dataset_exit_3(tmp_path, capsys):
    code = main(["run", "--solution", "kwiksort", "--dataset", "sushi", "--data-dir", str(tmp_path)])
    assert code == 3
    assert "Fetch hint" in capsys.readouterr().err


def test_malformed_file_exit_3(tmp_path):
    bad = tmp_path / "bad.soc"
    bad.write_text("1: 1,2\nfoo\n")
    assert main(["run", "--solution", "kwiksort", "--dataset", str(bad)]) == 3


def test_partial_sweep_exit_4(tmp_path, capsys):
    grid = tmp_path / "g.json"
    grid.write_text(json.dumps([
        {"solution": "kwiksort", "dataset": "mallows:theta=0.5,n=30,m=4", "repeats": 1},
        {"solution": "kwiksort", "dataset": "turkdots", "repeats": 1, "data_dir": str(tmp_path)},
    ]))
    code = main(["sweep", "--grid", str(grid), "--out", str(tmp_path / "s.csv")])
    assert code == 4
    assert "config 1 failed" in capsys.readouterr().err


def test_env_defaults(monkeypatch, capsys):
    monkeypatch.setenv("LDPRANK_EPSILON", "10")
    assert main(["choose-k", "--epsilon", "10", "--m", "10"]) == 0
    monkeypatch.setenv("LDPRANK_REPEATS", "1")
    assert main(["run", "--solution", "ldp-rr", "--mallows", "theta=0.5,n=30,m=4"]) == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ldprank", "choose-k", "--epsilon", "1", "--m", "5"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.strip() == "1"


def test_theta_pairwise_is_default_reading(capsys):
    base = ["run", "--solution", "kwiksort", "--mallows", "theta=0.5,n=40,m=4", "--repeats", "1", "--no-timing"]
    assert main(base + ["--theta-pairwise"]) == 0
    explicit = capsys.readouterr().out
    assert main(base) == 0
    assert capsys.readouterr().out == explicit
    with pytest.raises(SystemExit) as exc:
        main(base + ["--theta-pairwise", "--phi-raw", "0.5"])
    assert exc.value.code == 2
