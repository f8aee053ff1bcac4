import json

from noisy_sqp.cli import main


def test_solve_subcommand(capsys):
    code = main([
        "solve", "--problem", "unit-circle", "--variant", "ada",
        "--optimism", "opt", "--eps-f", "1e-2", "--eps-c", "1e-2",
        "--seed", "0", "--max-iters", "60",
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "status" in out and "solved" in out


def test_solve_accepts_qp_json_path(tmp_path, capsys):
    path = tmp_path / "toy.qp.json"
    path.write_text(json.dumps({
        "name": "toy", "Q": [[1, 0], [0, 1]], "q": [0, 0],
        "A": [[1, 1]], "b": [1], "x0": [0, 0],
    }))
    code = main([
        "solve", "--problem", str(path), "--variant", "ls",
        "--optimism", "pes", "--eps-f", "1e-2", "--eps-c", "1e-2",
        "--seed", "1", "--exact", "--max-iters", "40",
    ])
    assert code == 0


def test_grid_and_profile_pipeline(tmp_path, capsys):
    config = {
        "problems": ["quad-linear", "unit-circle"],
        "noise_grid": [[1e-2, 1e-2]],
        "variants": [
            {"scheme": "ada", "optimism": "opt"},
            {"scheme": "ls", "optimism": "opt"},
        ],
        "seeds": [0, 1],
        "budgets": [60, 2000],
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    out_dir = tmp_path / "results"

    code = main(["grid", "--config", str(cfg_path), "--out", str(out_dir)])
    assert code == 0
    csv_path = out_dir / "results.csv"
    assert csv_path.exists()
    header = csv_path.read_text().splitlines()[0]
    assert header.startswith(
        "problem,variant,optimism,exactness,eps_f,eps_c,seed,licq_mode,status,"
        "iters,weighted_evals,minres_iters,cg_iters,best_feas_err,best_stat_err,"
        "best_infeas_stat_err,terminated_early")

    tsv_path = tmp_path / "profile.tsv"
    code = main(["profile", "--in", str(csv_path), "--cost", "evals",
                 "--out", str(tsv_path)])
    assert code == 0
    lines = tsv_path.read_text().splitlines()
    assert lines[0].split("\t")[0] == "tau"
    assert len(lines) > 2
    assert (tmp_path / "profile.costs.tsv").exists()

    code = main(["profile", "--in", str(csv_path), "--cost", "minres",
                 "--out", str(tsv_path)])
    assert code == 0


def test_grid_bad_config_is_io_error(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text("{}")
    code = main(["grid", "--config", str(cfg_path), "--out", str(tmp_path)])
    assert code == 2


def test_verify_subcommand(tmp_path, capsys):
    report_path = tmp_path / "verify.json"
    code = main(["verify", "--suite", "all", "--out", str(report_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "trace_invariant_sweep    pass" in out
    reports = json.loads(report_path.read_text())
    assert {r["check"] for r in reports} >= {
        "cauchy_perturbation_scan", "tangential_gap_scan", "trace_invariant_sweep"}
    assert all(r["pass"] for r in reports)
