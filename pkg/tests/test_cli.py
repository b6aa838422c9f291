import csv

import pytest

from uosc.bench import config as cf
from uosc.bench.cli import main
from uosc.bench.experiments import half_normal_adjacency, run_verify, verify_grid
from uosc.exceptions import ParameterError
from uosc.synth import RngSpec


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_int_list_ranges():
    assert cf.parse_int_list("2:10") == list(range(2, 11))
    assert cf.parse_int_list("1:9:4") == [1, 5, 9]
    assert cf.parse_int_list("3, 5") == [3, 5]
    with pytest.raises(ParameterError):
        cf.parse_int_list("2:x")
    with pytest.raises(ParameterError):
        cf.parse_int_list("1:4:0")


def test_override_precedence():
    cfg = cf.build_config("fig1", {"trials": 3, "seed": 4}, {"trials": 2})
    assert cfg.trials == 2 and cfg.seed == 4 and cfg.M1 == [400]


@pytest.mark.parametrize("over", [{"trials": 0}, {"s": [10]}, {"algorithms": []},
                                  {"algorithms": ["SSC"]}, {"m": [1]}, {"kappa": [0.0]},
                                  {"p": 3}, {"delta": 1.0}])
def test_invalid_config_rejected(over):
    with pytest.raises(ParameterError):
        cf.build_config("fig2-m", {}, over)


def test_unknown_key_rejected():
    with pytest.raises(ParameterError):
        cf.parse_overrides({"bogus": "1"})


def test_config_file_for_other_experiment(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("experiment = fig1\n")
    with pytest.raises(ParameterError):
        cf.build_config("verify", cf.load_config_file(p))


@pytest.mark.parametrize("argv", [["fig1", "--trials", "0"], ["fig2-s", "--s", "10"],
                                  ["fig1", "--algorithms", ""], ["fig1", "--bogus", "1"],
                                  ["nope"], ["verify", "--config", "/does/not/exist"]])
def test_cli_config_errors_exit_2(argv, tmp_path):
    assert _exit(argv + ["--out", str(tmp_path)] if argv[0] != "nope" else argv) == 2


def _exit(argv):
    try:
        return main(argv)
    except SystemExit as e:
        return e.code


def test_cli_numeric_failure_exit_3(tmp_path, monkeypatch):
    from uosc.bench import cli
    from uosc.directions import L1SolverParams, solve_l1_reduced, svd_factor
    from uosc.synth import make_dataset

    def failing(cfg, write=True):
        ds = make_dataset(20, 3, 5, 2, 20, RngSpec(3))
        solve_l1_reduced(svd_factor(ds.D), [0], L1SolverParams(max_iters=2, polish_every=0))

    monkeypatch.setitem(cli.RUNNERS, "fig1", failing)
    assert main(["fig1", "--out", str(tmp_path)]) == 3


def test_fig_kappa_run_is_byte_identical(tmp_path):
    argv = ["fig-kappa", "--kappa", "1,4", "--trials", "2", "--n", "20", "--seed", "5"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    for name in ("fig_kappa_trials.csv", "fig_kappa_summary.csv", "fig_kappa.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = _rows(tmp_path / "a" / "fig_kappa_summary.csv")
    assert [float(r["kappa"]) for r in rows] == [1.0, 4.0]


def test_half_normal_ratio():
    import numpy as np
    A, labels = half_normal_adjacency(3, 10, 2.5, RngSpec(1))
    same = labels[:, None] == labels[None, :]
    inside = np.where(same, A, 0).sum(0)
    outside = np.where(same, 0, A).sum(0)
    assert np.allclose(2.5 / 2 * outside, inside)
    assert np.all(A >= 0)


def test_verify_rows_and_summary(tmp_path):
    code = main(["verify", "--trials", "2", "--M1", "40", "--n", "30", "--out", str(tmp_path)])
    assert code == 0
    cfg = cf.build_config("verify", {}, {"trials": 2, "M1": [40], "n": 30})
    rows = _rows(tmp_path / "verify.csv")
    assert len(rows) == len(verify_grid(cfg)) * 2
    summ = _rows(tmp_path / "verify_summary.csv")
    assert [r["theorem_id"] for r in summ] == ["T1", "T4", "T6"]
    assert all(int(r["violations"]) == 0 for r in summ)
    assert sum(int(r["instances"]) for r in summ) == len(rows)


def test_verify_probabilistic_theorems_run():
    cfg = cf.build_config("verify", {}, {"trials": 1, "theorems": ["T2", "T3", "T5", "T7"],
                                         "M1": [40], "n": 30})
    res = run_verify(cfg, write=False)
    assert res["violations"] == 0
    assert len(res["verify"]) == len(verify_grid(cfg))
