import csv
import json


from seirgame import cli

FAST = ["--stages", "2", "--sgd-steps", "2", "--batch", "8", "--n-steps", "40",
        "--set", "solver.validation_paths=8", "--set", "solver.probe_points=8",
        "--set", "solver.hidden=[6,6]", "--quiet"]


def run(tmp_path, *argv):
    return cli.main(["--output", str(tmp_path), *argv])


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def test_calibrate_prints_rates(tmp_path, capsys):
    assert run(tmp_path, "calibrate", "ny-nj-pa") == 0
    out = capsys.readouterr().out
    assert "gamma  = 0.2" in out and "kappa  = 0.0005" in out
    doc = json.loads((tmp_path / "calibrate" / "resolved.json").read_text())
    assert len(doc["epidemiology"]["beta_matrix"]) == 3


def test_missing_initial_state_is_a_config_error(tmp_path, capsys):
    assert run(tmp_path, "solve", "ny-nj-pa", *FAST) == cli.EXIT_CONFIG
    assert "initial_state" in capsys.readouterr().err


def test_bad_override_is_a_config_error(tmp_path, capsys):
    assert run(tmp_path, "calibrate", "ny-nj-pa", "--set", "cost.w=-3") == cli.EXIT_CONFIG
    assert "cost.w" in capsys.readouterr().err
    assert run(tmp_path, "calibrate", "ny-nj-pa", "--set", "nonsense") == cli.EXIT_CONFIG


def test_simulate_fixed_zero_policy(tmp_path, capsys):
    assert run(tmp_path, "simulate", "ny-nj-pa-demo", "--fixed-policy", "0") == 0
    out = tmp_path / "simulate"
    assert len(rows(out / "paths.csv")) == 256 * 41 * 3
    assert {r["label"] for r in rows(out / "classification.csv")} == {"out_of_control"}
    assert (out / "trajectories.png").stat().st_size > 0
    first = (out / "cost.csv").read_text().splitlines()[0]
    assert first.startswith("# seirgame csv-schema=1 manifest=")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["digest"] in first and "paths.csv" in manifest["outputs"]


def test_simulate_is_byte_reproducible(tmp_path):
    args = ["simulate", "ny-nj-pa-demo", "--fixed-policy", "0.2,0.5,0.7", "--paths", "16"]
    assert run(tmp_path / "a", *args) == 0 and run(tmp_path / "b", *args) == 0
    for name in ("paths.csv", "cost.csv", "summary.csv", "classification.csv"):
        assert (tmp_path / "a/simulate" / name).read_bytes() == \
            (tmp_path / "b/simulate" / name).read_bytes()


def test_evaluate_with_probe(tmp_path):
    assert run(tmp_path, "evaluate", "ny-nj-pa-demo", "--fixed-policy", "0.5",
               "--paths", "16", "--probe") == 0
    probe = rows(tmp_path / "evaluate" / "probe.csv")
    assert len(probe) == 3 * 12
    own = [r for r in probe if r["alternative"] == "learned"]
    assert all(float(r["reduction"]) == 0.0 for r in own)
    assert not (tmp_path / "evaluate" / "paths.csv").exists()


def test_fixed_policy_validation(tmp_path):
    assert run(tmp_path, "simulate", "ny-nj-pa-demo", "--fixed-policy", "1.5") == cli.EXIT_CONFIG
    assert run(tmp_path, "simulate", "ny-nj-pa-demo", "--fixed-policy", "0.1,0.2") == \
        cli.EXIT_CONFIG
    assert run(tmp_path, "simulate", "ny-nj-pa-demo") == cli.EXIT_CONFIG


def test_degenerate_solve_and_profile_round_trip(tmp_path, capsys):
    assert run(tmp_path, "solve", "ny-nj-pa-demo", "--degenerate-zero-cost", *FAST) == 0
    out = tmp_path / "solve"
    assert "V[NY](0, x0) = 0" in capsys.readouterr().out
    assert (out / "profile.json").exists() and (out / "losses.png").exists()
    diag = rows(out / "diagnostics.csv")
    assert [(int(r["stage"]), int(r["player"])) for r in diag] == \
        [(s, p) for s in (1, 2) for p in range(3)]
    # evaluating under a different scenario digest is refused unless forced
    assert run(tmp_path, "evaluate", "ny-nj-pa-demo", "--profile",
               str(out / "profile.json"), "--paths", "8") == cli.EXIT_MISMATCH
    assert run(tmp_path, "evaluate", "ny-nj-pa-demo", "--degenerate-zero-cost",
               "--profile", str(out / "profile.json"), "--paths", "8") == 0
    assert run(tmp_path, "evaluate", "ny-nj-pa-demo", "--profile",
               str(out / "profile.json"), "--paths", "8", "--force") == 0


def test_diagnostics_identical_across_runs(tmp_path):
    args = ["solve", "ny-nj-pa-demo", *FAST]
    assert run(tmp_path / "a", *args) == 0 and run(tmp_path / "b", *args) == 0
    a, b = rows(tmp_path / "a/solve/diagnostics.csv"), rows(tmp_path / "b/solve/diagnostics.csv")
    strip = lambda rs: [{k: v for k, v in r.items() if k != "wall_time"} for r in rs]  # noqa: E731
    assert strip(a) == strip(b)


def test_resume_continues_stage_numbering(tmp_path):
    base = ["solve", "ny-nj-pa-demo", *FAST, "--checkpoint-every", "1"]
    assert run(tmp_path, *base) == 0
    ck = tmp_path / "solve" / "checkpoints" / "stage_0001.json"
    assert ck.exists()
    args = [a if a != "2" or i != 3 else "3" for i, a in enumerate(base)]
    assert run(tmp_path, *args, "--resume", str(ck)) == 0
    stages = [int(r["stage"]) for r in rows(tmp_path / "solve" / "diagnostics.csv")]
    assert stages == [1, 1, 1, 2, 2, 2, 3, 3, 3]
    assert run(tmp_path, *args, "--attention", "5", "--resume", str(ck)) == cli.EXIT_MISMATCH


def test_solver_abort_exit_code(tmp_path, capsys):
    assert run(tmp_path, "solve", "ny-nj-pa-demo", *FAST, "--set",
               "solver.divergence_factor=1e-12", "--set",
               "solver.max_divergent_stages=1") == cli.EXIT_ABORT
    assert "aborted" in capsys.readouterr().err


def test_verify_list_and_failure_code(tmp_path, capsys, monkeypatch):
    assert run(tmp_path, "verify", "--list") == 0
    listed = capsys.readouterr().out
    for name in ("beta_matrix", "best_response", "degenerate_solver"):
        assert name in listed
    assert run(tmp_path, "verify", "calibration", "beta_matrix") == 0
    assert run(tmp_path, "verify", "no_such_suite") == cli.EXIT_CONFIG

    from seirgame import verification as vf

    def broken(seed=0):
        res = vf.SuiteResult("broken")
        res.add("always off", 1.0, 0.5)
        return res

    monkeypatch.setitem(vf.SUITES, "broken", broken)
    capsys.readouterr()
    assert run(tmp_path, "verify", "broken", "--json") == cli.EXIT_VERIFY
    (doc,) = json.loads(capsys.readouterr().out)
    assert doc["suite"] == "broken" and not doc["passed"]


def test_info(tmp_path, capsys):
    assert run(tmp_path, "info", "ny-nj-pa") == 0
    assert "initial state missing" in capsys.readouterr().out


def test_stages_flag_is_validated(tmp_path):
    assert run(tmp_path, "solve", "ny-nj-pa-demo", "--stages", "0") == cli.EXIT_CONFIG
