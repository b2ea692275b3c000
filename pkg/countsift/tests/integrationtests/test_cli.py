#!/usr/bin/env python
# -*- coding: utf-8 -*-
#
# Copyright (c) 2026 Countsift Developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program. If not, see <http://www.gnu.org/licenses/>.
"""Command line runs on simulated data."""
import json
import os

import pandas as pd
import pytest

from countsift.cli import EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK, main

SCENARIO = ["--n", "60", "--p", "4", "--D", "3", "--delta-p", "0.25", "--delta-D", "0.34", "--total-mean", "80"]


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, json.loads(out), err


def _read(path):
    with open(path, "rb") as fd:
        return fd.read()


@pytest.fixture
def dataset(tmp_path, capsys):
    out_dir = str(tmp_path / "data")
    code, status, _ = _run(capsys, ["simulate"] + SCENARIO + ["--replicates", "1", "--seed", "2",
                                                              "--out-dir", out_dir])
    assert code == EXIT_OK
    return os.path.join(out_dir, "covariates.csv"), os.path.join(out_dir, "counts.csv")


def _inputs(dataset):
    return ["--model", "dm", "--covariates", dataset[0], "--counts", dataset[1]]


def test_simulate_artifacts(tmp_path, capsys):
    out_dir = str(tmp_path / "sim")
    code, status, _ = _run(capsys, ["simulate"] + SCENARIO + ["--replicates", "2", "--replicate", "1",
                                                              "--format", "csv", "--out-dir", out_dir])
    assert code == EXIT_OK
    assert status["status"] == "ok"
    assert status["command"] == "simulate"
    assert (status["n"], status["p"], status["D"]) == (60, 4, 3)
    assert sorted(status["artifacts"]) == ["counts.csv", "covariates.csv", "truth.csv", "truth.json"]
    counts = pd.read_csv(os.path.join(out_dir, "counts.csv"))
    assert counts.shape == (60, 3)
    with open(os.path.join(out_dir, "truth.json")) as fd:
        truth = json.load(fd)
    assert sum(map(sum, truth["nonzero"])) == 1


def test_fit(tmp_path, capsys, dataset):
    out_dir = str(tmp_path / "fit")
    code, status, _ = _run(capsys, ["fit"] + _inputs(dataset) + ["--alpha", "0.5", "--lambda", "2",
                                                                 "--format", "csv", "--out-dir", out_dir])
    assert code == EXIT_OK
    assert status["converged"] is True
    for name in ("coefficients.json", "summary.json", "trace.csv", "coefficients.csv", "summary.csv"):
        assert os.path.exists(os.path.join(out_dir, name))
    with open(os.path.join(out_dir, "coefficients.json")) as fd:
        coefficients = json.load(fd)
    assert coefficients["model"] == "dm"
    assert coefficients["rows"] == ["(intercept)", "x1", "x2", "x3", "x4"]
    assert len(coefficients["coefficients"]) == 5
    with open(os.path.join(out_dir, "summary.json")) as fd:
        summary = json.load(fd)
    assert summary["kappa"] == status["kappa"] == len(coefficients["active_cells"])
    trace = pd.read_csv(os.path.join(out_dir, "trace.csv"))
    assert len(trace) == summary["iterations"]


def test_fit_is_deterministic(tmp_path, capsys, dataset):
    dirs = [str(tmp_path / "first"), str(tmp_path / "second")]
    for out_dir in dirs:
        code, _, _ = _run(capsys, ["fit"] + _inputs(dataset) + ["--alpha", "0.3", "--lambda", "1.5",
                                                                "--out-dir", out_dir])
        assert code == EXIT_OK
    for name in ("coefficients.json", "summary.json", "trace.csv"):
        assert _read(os.path.join(dirs[0], name)) == _read(os.path.join(dirs[1], name))


def test_fit_not_converged(tmp_path, capsys, dataset):
    code, status, _ = _run(capsys, ["fit"] + _inputs(dataset) + ["--alpha", "0.5", "--lambda", "2",
                                                                 "--max-iter", "1", "--out-dir", str(tmp_path)])
    assert code == EXIT_NOT_CONVERGED
    assert status["status"] == "not_converged"
    assert status["converged"] is False


def test_tune_single_point_matches_fit(tmp_path, capsys, dataset):
    tune_dir = str(tmp_path / "tune")
    code, status, _ = _run(capsys, ["tune"] + _inputs(dataset) + ["--alphas", "0.5", "--n-lambda", "1",
                                                                  "--threads", "1", "--out-dir", tune_dir])
    assert code == EXIT_OK
    with open(os.path.join(tune_dir, "lambda_max.json")) as fd:
        lambda_max = json.load(fd)
    assert lambda_max["by_alpha"] == [{"alpha": 0.5, "lambda_max": lambda_max["lambda_max"]}]
    assert status["lambda"] == lambda_max["lambda_max"]
    path = pd.read_csv(os.path.join(tune_dir, "ebic_path.csv"))
    assert list(path.columns) == ["lambda", "alpha", "ebic", "kappa", "converged"]
    assert len(path) == 1

    fit_dir = str(tmp_path / "fit")
    code, _, _ = _run(capsys, ["fit"] + _inputs(dataset) + ["--alpha", "0.5", "--lambda",
                                                            repr(lambda_max["lambda_max"]), "--out-dir", fit_dir])
    assert code == EXIT_OK
    assert _read(os.path.join(tune_dir, "coefficients.json")) == _read(os.path.join(fit_dir, "coefficients.json"))


def test_tune_grid(tmp_path, capsys, dataset):
    out_dir = str(tmp_path / "tune")
    code, status, _ = _run(capsys, ["tune"] + _inputs(dataset) + ["--alphas", "0.3,0.7", "--n-lambda", "4",
                                                                  "--threads", "1", "--lambda-ratio", "0.05",
                                                                  "--format", "csv", "--out-dir", out_dir])
    assert code == EXIT_OK
    assert status["alpha"] in (0.3, 0.7)
    path = pd.read_csv(os.path.join(out_dir, "ebic_path.csv"))
    assert len(path) == 8
    assert os.path.exists(os.path.join(out_dir, "lambda_max.csv"))


def test_bench(tmp_path, capsys):
    out_dir = str(tmp_path / "bench")
    argv = ["bench", "--n", "40", "--p", "4", "--D", "3", "--delta-p", "0.25", "--delta-D", "0.34",
            "--total-mean", "60", "--replicates", "2", "--n-lambda", "3", "--alphas", "0.5",
            "--lambda-ratio", "0.1", "--threads", "1", "--out-dir", out_dir]
    code, status, _ = _run(capsys, argv)
    assert code == EXIT_OK
    assert status["replicates"] == 2
    with open(os.path.join(out_dir, "summary.json")) as fd:
        payload = json.load(fd)
    assert payload["scenario"]["n"] == 40
    assert "group_recall_mean" in payload["summary"]
    first = _read(os.path.join(out_dir, "summary.json"))
    _run(capsys, argv)
    assert _read(os.path.join(out_dir, "summary.json")) == first


def test_bench_sweep(tmp_path, capsys):
    out_dir = str(tmp_path / "sweep")
    argv = ["bench", "--n", "40", "--p", "4", "--D", "3", "--delta-p", "0.25", "--delta-D", "0.34",
            "--total-mean", "60", "--replicates", "1", "--n-lambda", "3", "--alphas", "0.5",
            "--lambda-ratio", "0.1", "--sweep", "f=0.4,0.8", "--threads", "1", "--out-dir", out_dir]
    code, status, _ = _run(capsys, argv)
    assert code == EXIT_OK
    assert status["scenarios"] == 2
    assert status["artifacts"] == ["sweep.csv"]
    sweep = pd.read_csv(os.path.join(out_dir, "sweep.csv"))
    assert list(sweep["f"]) == [0.4, 0.8]
    assert list(sweep["n"]) == [40, 40]
    assert "direction_accuracy_mean" in sweep.columns


def _error(err):
    lines = [line for line in err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


def test_mismatched_rows(tmp_path, capsys):
    covariates = str(tmp_path / "x.csv")
    counts = str(tmp_path / "y.csv")
    pd.DataFrame({"a": [0.1, 0.5, -0.3]}).to_csv(covariates, index=False)
    pd.DataFrame({"t1": [1, 2, 3, 4], "t2": [3, 1, 0, 2]}).to_csv(counts, index=False)
    code, status, err = _run(capsys, ["fit", "--model", "dm", "--alpha", "0.5", "--lambda", "1",
                                      "--covariates", covariates, "--counts", counts,
                                      "--out-dir", str(tmp_path / "out")])
    assert code == EXIT_INPUT
    assert status["status"] == "error"
    error = _error(err)
    assert error["error"] == "DataError"
    assert "x.csv" in error["message"] and "y.csv" in error["message"]


@pytest.mark.parametrize("argv", [
    ["bench", "--replicates", "0"],
    ["bench", "--sweep", "seed=1,2"],
    ["bench", "--sweep", "f=0.5", "--sweep", "f=1"],
    ["bench", "--sweep", "delta-p=0"],
    ["simulate", "--threads", "2"],
    ["fit", "--model", "dm", "--alpha", "0.5", "--lambda", "1", "--threads", "2",
     "--covariates", "x.csv", "--counts", "y.csv"],
    ["fit", "--model", "dm", "--penalty", "lasso", "--alpha", "0.5", "--lambda", "1",
     "--covariates", "x.csv", "--counts", "y.csv"],
    ["tune", "--model", "dm", "--lambda", "1", "--covariates", "x.csv", "--counts", "y.csv"],
    ["fit", "--model", "zip", "--lambda", "1", "--covariates", "x.csv", "--counts", "y.csv"],
    ["fit", "--model", "dm", "--alpha", "0.5", "--lambda", "1", "--covariates", "missing.csv",
     "--counts", "missing.csv"],
])
def test_input_errors(tmp_path, capsys, argv):
    code, status, err = _run(capsys, argv + ["--out-dir", str(tmp_path)])
    assert code == EXIT_INPUT
    assert status["status"] == "error"
    assert status["exit"] == EXIT_INPUT
    assert "error" in _error(err)
