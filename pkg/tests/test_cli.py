"""End-to-end checks of the command-line interface.

Every test drives `main(argv)` in-process and inspects exit codes,
stdout/stderr, and the files left in a temporary output directory.
"""

import json

import numpy as np
import pytest

import sparsemkl
from sparsemkl.cli import main
from sparsemkl.core import Dataset, ProblemInstance
from sparsemkl.kernels import LinearGroupProjection, assemble_gram_blocks
from sparsemkl.solver import SolverConfig, solve
from sparsemkl.support import support_of


def run_cli(argv, capsys):
    rc = main(argv)
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


# ------------------------------------------------------ solve: built-in

EXPECTED_1D_LINES = [
    "supp={1}",
    "esupp={1}",
    "ref_supp={}",
    "qc_holds=false",
    "qc_margin=0.0",
    "cert_norms=1.0",
    "eps_rel=0.0001",
    "objective=0.5",
    "iters_run=50",
    f"final_step_norm={2.0 ** -50!r}",
    "burn_in=1",
    "sandwich=pass",
]


def test_builtin_example_stdout(tmp_path, capsys):
    rc, out, err = run_cli(
        ["solve", "--example", "paper-1d", "--out-dir", str(tmp_path)],
        capsys,
    )
    assert rc == 0
    assert err == ""
    assert out.splitlines() == EXPECTED_1D_LINES


def test_builtin_example_report_file(tmp_path, capsys):
    rc, out, _ = run_cli(
        ["solve", "--preset", "paper-1d", "--out-dir", str(tmp_path)],
        capsys,
    )
    assert rc == 0
    report = (tmp_path / "report.txt").read_text(encoding="utf-8")
    assert report == out
    assert report.splitlines() == EXPECTED_1D_LINES


def test_builtin_example_manifest(tmp_path, capsys):
    rc, _, _ = run_cli(
        ["solve", "--example", "paper-1d", "--out-dir", str(tmp_path)],
        capsys,
    )
    assert rc == 0
    doc = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert doc["command"] == "solve"
    assert doc["version"] == sparsemkl.__version__
    assert doc["master_seed"] is None
    assert doc["config"]["preset"] == "paper-1d"
    assert doc["config"]["m"] == 1
    assert doc["config"]["G"] == 1
    assert doc["config"]["iters"] == 50
    assert doc["config"]["tau_factor"] == 0.5
    assert doc["config"]["lambda"] == 1.0
    assert doc["outputs"] == [str(tmp_path / "report.txt")]
    assert set(doc["timings"]) == {"solve_s", "report_s", "total_s"}


def test_builtin_example_trace_file(tmp_path, capsys):
    rc, _, _ = run_cli(
        ["solve", "--example", "paper-1d", "--trace",
         "--out-dir", str(tmp_path)],
        capsys,
    )
    assert rc == 0
    rows = [
        json.loads(line)
        for line in (tmp_path / "trace.jsonl").read_text().splitlines()
    ]
    assert len(rows) == 50
    # group labels are 1-based on disk
    assert rows[0] == {
        "run": 0, "iter": 1, "support": [1], "objective": 0.625,
    }
    assert rows[-1]["iter"] == 50
    assert all(row["support"] == [1] for row in rows)
    doc = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert str(tmp_path / "trace.jsonl") in doc["outputs"]


def test_solve_dry_run_prints_config_and_writes_nothing(tmp_path, capsys):
    out_dir = tmp_path / "never"
    rc, out, _ = run_cli(
        ["solve", "--example", "paper-1d", "--dry-run",
         "--out-dir", str(out_dir)],
        capsys,
    )
    assert rc == 0
    assert not out_dir.exists()
    assert out.splitlines() == [
        "G=1",
        "eps_rel=0.0001",
        "iters=50",
        "lambda=1.0",
        "lambda_convention=raw",
        "m=1",
        "preset=paper-1d",
        "stop_tol=0.0",
        "tau_factor=0.5",
    ]


# -------------------------------------------------- solve: config files

def write_two_group_inputs(tmp_path, y0=3.0, y1=0.5):
    data = tmp_path / "data.csv"
    data.write_text(f"1,0,{y0}\n0,1,{y1}\n", encoding="utf-8")
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        "[problem]\n"
        f"data = {data}\n"
        "family = group-lasso\n"
        "group_dims = 1,1\n"
        "lambda = 1.0\n"
        "[solver]\n"
        "tau_factor = 0.8\n"
        "iters = 400\n",
        encoding="utf-8",
    )
    return cfg


def test_solve_from_config_matches_library(tmp_path, capsys):
    cfg = write_two_group_inputs(tmp_path)
    rc, out, _ = run_cli(
        ["solve", "--config", str(cfg), "--out-dir", str(tmp_path / "out")],
        capsys,
    )
    assert rc == 0

    dataset = Dataset(np.eye(2), np.array([3.0, 0.5]))
    gram = assemble_gram_blocks(dataset, LinearGroupProjection((1, 1)))
    problem = ProblemInstance(dataset=dataset, gram=gram, lam=1.0)
    coeffs, trace = solve(problem, SolverConfig(
        tau_factor=0.8, max_iters=400, record_trace=True,
    ))
    lines = dict(line.split("=", 1) for line in out.splitlines())
    assert lines["supp"] == "{1}"
    assert support_of(coeffs) == {0}
    assert lines["esupp"] == "{1}"
    assert lines["qc_holds"] == "true"
    assert lines["objective"] == repr(float(trace.objectives[-1]))
    assert lines["iters_run"] == str(trace.iters_run)


def test_solve_lambda_override(tmp_path, capsys):
    # weight above both certificate norms kills every group
    cfg = write_two_group_inputs(tmp_path)
    rc, out, _ = run_cli(
        ["solve", "--config", str(cfg), "--lambda", "4.0",
         "--out-dir", str(tmp_path / "out")],
        capsys,
    )
    assert rc == 0
    lines = dict(line.split("=", 1) for line in out.splitlines())
    assert lines["supp"] == "{}"
    assert lines["esupp"] == "{}"
    assert lines["qc_holds"] == "true"


def test_solve_missing_config_is_a_usage_error(capsys):
    rc, _, err = run_cli(["solve"], capsys)
    assert rc == 1
    assert err.startswith("error:")
    assert "--config" in err


def test_solve_rejects_bad_flag_values(tmp_path, capsys):
    base = ["solve", "--example", "paper-1d", "--out-dir", str(tmp_path)]
    for extra in (["--iters", "0"], ["--lambda", "-1.0"],
                  ["--tau-factor", "2.5"]):
        rc, _, err = run_cli(base + extra, capsys)
        assert rc == 1, extra
        assert err.startswith("error:"), extra


def test_unknown_flag_exits_one(capsys):
    rc, _, err = run_cli(["solve", "--no-such-flag"], capsys)
    assert rc == 1
    assert err.startswith("error:")


def test_missing_dataset_file_named_in_error(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(
        "[problem]\ndata = /nope/missing.csv\nfamily = group-lasso\n"
        "group_dims = 1\nlambda = 1.0\n",
        encoding="utf-8",
    )
    rc, _, err = run_cli(["solve", "--config", str(cfg)], capsys)
    assert rc == 1
    assert "/nope/missing.csv" in err


def test_divergent_problem_exits_two(tmp_path, capsys):
    # response far above the overflow horizon: the first residual step
    # sends the objective to inf and the solver aborts
    cfg = write_two_group_inputs(tmp_path, y0=1e200, y1=0.0)
    rc, _, err = run_cli(
        ["solve", "--config", str(cfg), "--out-dir", str(tmp_path / "out")],
        capsys,
    )
    assert rc == 2
    assert err.startswith("error: solver diverged:")


def test_unwritable_out_dir_exits_three(tmp_path, capsys):
    blocker = tmp_path / "taken"
    blocker.write_text("a file, not a directory", encoding="utf-8")
    rc, _, err = run_cli(
        ["solve", "--example", "paper-1d", "--out-dir", str(blocker)],
        capsys,
    )
    assert rc == 3
    assert err.startswith("error: I/O failure:")


# ---------------------------------------------------------------- batch

def write_batch_ini(tmp_path, **overrides):
    fields = {
        "family": "group-lasso",
        "m": 8,
        "G": 4,
        "s": 2,
        "lambda": 0.3,
        "p": 8,
        "group_dims": "2,2,2,2",
        "noise_std": 0.01,
        "n_instances": 4,
        "iters": 400,
    }
    fields.update(overrides)
    cfg = tmp_path / "batch.ini"
    cfg.write_text(
        "[experiment]\n"
        + "".join(f"{k} = {v}\n" for k, v in fields.items()),
        encoding="utf-8",
    )
    return cfg


def test_batch_tiny_config(tmp_path, capsys):
    cfg = write_batch_ini(tmp_path)
    out_dir = tmp_path / "out"
    rc, out, _ = run_cli(
        ["batch", "--config", str(cfg), "--out-dir", str(out_dir)],
        capsys,
    )
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "instances=4"
    assert lines[1].startswith("histogram=")
    assert lines[2].startswith("sandwich_pass=")

    csv = (out_dir / "histogram.csv").read_text(encoding="utf-8").splitlines()
    assert csv[0] == "support_size,count"
    counts = [int(row.split(",")[1]) for row in csv[1:]]
    assert sum(counts) == 4

    summary = json.loads((out_dir / "summary.json").read_text())
    doc = json.loads((out_dir / "manifest.json").read_text())
    assert doc["command"] == "batch"
    assert doc["master_seed"] == 0
    assert doc["config"]["n_instances"] == 4
    assert str(out_dir / "histogram.csv") in doc["outputs"]
    assert str(out_dir / "summary.json") in doc["outputs"]
    assert len(summary["per_run"]) == 4
    assert summary["config"]["n_instances"] == 4


def test_batch_seed_flag_lands_in_manifest(tmp_path, capsys):
    cfg = write_batch_ini(tmp_path)
    out_dir = tmp_path / "out"
    rc, _, _ = run_cli(
        ["batch", "--config", str(cfg), "--seed", "7",
         "--out-dir", str(out_dir)],
        capsys,
    )
    assert rc == 0
    doc = json.loads((out_dir / "manifest.json").read_text())
    assert doc["master_seed"] == 7
    assert doc["config"]["master_seed"] == 7


def test_batch_byte_identical_outputs(tmp_path, capsys):
    cfg = write_batch_ini(tmp_path)
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        rc, _, _ = run_cli(
            ["batch", "--config", str(cfg), "--out-dir", str(d)], capsys,
        )
        assert rc == 0
    for name in ("histogram.csv", "summary.json"):
        first = (dirs[0] / name).read_bytes()
        second = (dirs[1] / name).read_bytes()
        assert first == second, name


def test_batch_trace_output(tmp_path, capsys):
    cfg = write_batch_ini(tmp_path, n_instances=2)
    out_dir = tmp_path / "out"
    rc, _, _ = run_cli(
        ["batch", "--config", str(cfg), "--trace", "--out-dir", str(out_dir)],
        capsys,
    )
    assert rc == 0
    rows = [
        json.loads(line)
        for line in (out_dir / "traces.jsonl").read_text().splitlines()
    ]
    assert {row["run"] for row in rows} == {0, 1}
    assert all(set(row) == {"run", "iter", "support", "objective"}
               for row in rows)
    assert all(
        all(1 <= g <= 4 for g in row["support"]) for row in rows
    )


def test_batch_preset_dry_run(capsys):
    rc, out, _ = run_cli(
        ["batch", "--preset", "group-lasso-paper", "--dry-run"], capsys,
    )
    assert rc == 0
    lines = dict(line.split("=", 1) for line in out.splitlines())
    assert lines["family"] == "group-lasso"
    assert lines["m"] == "50"
    assert lines["G"] == "20"
    assert lines["iters"] == "5000"
    assert lines["n_instances"] == "200"


def test_batch_unknown_preset_exits_one(capsys):
    rc, _, err = run_cli(["batch", "--preset", "nope"], capsys)
    assert rc == 1
    assert "nope" in err


def test_batch_rejects_bad_worker_count(tmp_path, capsys):
    cfg = write_batch_ini(tmp_path)
    rc, _, err = run_cli(
        ["batch", "--config", str(cfg), "--jobs", "0"], capsys,
    )
    assert rc == 1
    assert "--jobs" in err


def test_batch_missing_key_named_in_error(tmp_path, capsys):
    cfg = tmp_path / "batch.ini"
    cfg.write_text("[experiment]\nfamily = group-lasso\n", encoding="utf-8")
    rc, _, err = run_cli(["batch", "--config", str(cfg)], capsys)
    assert rc == 1
    assert "[experiment]" in err


# --------------------------------------------------------------- verify

def test_verify_lattice_passes(tmp_path, capsys):
    rc, out, _ = run_cli(
        ["verify", "--lattice-G", "3", "--out-dir", str(tmp_path)], capsys,
    )
    assert rc == 0
    assert out.splitlines() == [
        "lattice G=1: pass",
        "lattice G=2: pass",
        "lattice G=3: pass",
    ]
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["command"] == "verify"
    assert doc["config"]["lattice_G"] == 3


def test_verify_oracle_suite(tmp_path, capsys):
    rc, out, _ = run_cli(
        ["verify", "--lattice-G", "1", "--oracle-suite", "small",
         "--out-dir", str(tmp_path)],
        capsys,
    )
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "lattice G=1: pass"
    suite = [line for line in lines[1:]]
    assert len(suite) == 12
    assert all(": pass [" in line for line in suite)
    assert suite[0].startswith("oracle case 0 solver-vs-enumeration")


def test_verify_lattice_bound_enforced(capsys):
    for g in ("0", "17"):
        rc, _, err = run_cli(["verify", "--lattice-G", g], capsys)
        assert rc == 1
        assert "--lattice-G" in err


def test_version_flag_prints_package_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == sparsemkl.__version__


def test_subcommand_required(capsys):
    rc, _, err = run_cli([], capsys)
    assert rc == 1
    assert err.startswith("error:")
