import json
import math
from pathlib import Path

import pytest

from frond import __version__
from frond.cli_runner import SEED_OFFSETS, RunConfig, execute, main, result_payload, run

from conftest import acceptance_sweep_config


def run_main(argv, capsys):
    status = main(argv)
    out, err = capsys.readouterr()
    return status, out, err


def small_sweep(**kw):
    base = dict(graph_kind="er", graph_n=12, er_p=0.4, betas=[0.5, 1.0], n_seeds=2, step_h=0.5, horizon_T=10.0, lipschitz_target=0.8)
    base.update(kw)
    return acceptance_sweep_config(**base)


class TestMlf:
    def test_exp_example(self, capsys):
        status, out, _ = run_main(["mlf", "--beta", "1", "--z", "1"], capsys)
        doc = json.loads(out)
        assert status == 0
        assert doc["results"]["value"] == pytest.approx(math.e, rel=1e-14)
        assert doc["artifact"] == "frond" and doc["version"] == __version__
        assert doc["config"]["beta"] == 1.0 and "wall_clock_s" in doc["timing"]

    def test_bound_scan_csv(self, tmp_path, capsys):
        csv_path = tmp_path / "bound.csv"
        status, out, _ = run_main(
            ["mlf", "--bound-L", "0.3,0.5", "--betas", "0.1,0.5,1.0", "--horizon-T", "10", "--csv-path", str(csv_path)],
            capsys,
        )
        assert status == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "L,T,beta,bound" and len(lines) == 1 + 6
        scans = json.loads(out)["results"]["bound_scans"]
        assert [s["strictly_increasing"] for s in scans] == [True, True]

    def test_needs_z_or_scan(self, capsys):
        status, _, err = run_main(["mlf", "--beta", "0.5"], capsys)
        assert status == 1 and json.loads(err)["error"]["code"] == "cli_runner.config_error"

    def test_domain_error_is_surfaced(self, capsys):
        status, _, err = run_main(["mlf", "--beta", "1", "--z", "-500"], capsys)
        assert status == 1 and json.loads(err)["error"]["code"] == "special_fn.domain_error"


class TestErrors:
    def test_malformed_graph_names_file_and_line(self, tmp_path, capsys):
        g = tmp_path / "bad.txt"
        g.write_text("0 1 1.0\n1 2 oops\n")
        status, out, err = run_main(["solve", "--graph-path", str(g), "--horizon-T", "1"], capsys)
        rec = json.loads(err)["error"]
        assert status == 2 and out == ""
        assert rec["code"] == "cli_runner.parse_error" and f"{g}:2" in rec["message"]

    def test_missing_file_is_config_error(self, tmp_path, capsys):
        status, _, err = run_main(["solve", "--graph-path", str(tmp_path / "nope.txt")], capsys)
        assert status == 1 and "no such file" in json.loads(err)["error"]["message"]

    @pytest.mark.parametrize(
        "argv",
        [["nonsense"], ["mlf", "--bogus", "1"], ["mlf", "--beta", "abc", "--z", "1"], ["sweep", "--betas", "0.5,1.5"]],
    )
    def test_usage_errors_exit_one(self, argv, capsys):
        status, _, err = run_main(argv, capsys)
        assert status == 1 and json.loads(err)["error"]["exit_status"] == 1

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_exits_three(self, tmp_path, capsys):
        (tmp_path / "g.txt").write_text("0 1 1.0\n")
        (tmp_path / "x.csv").write_text("1.7e308\n-1.7e308\n")  # x1 - x0 overflows
        argv = ["solve", "--graph-path", str(tmp_path / "g.txt"), "--features-path", str(tmp_path / "x.csv")]
        status, _, err = run_main(argv + ["--horizon-T", "1"], capsys)
        assert status == 3 and json.loads(err)["error"]["code"] == "fde_solver.non_finite"

    def test_unwritable_output_exits_four(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("")
        status, _, err = run_main(["mlf", "--beta", "1", "--z", "1", "--output-path", str(blocker / "out.json")], capsys)
        assert status == 4 and json.loads(err)["error"]["code"] == "cli_runner.io_error"

    def test_unknown_config_key(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"beta": 1.0, "zz": 1}))
        status, _, err = run_main(["mlf", "--config", str(p), "--z", "1"], capsys)
        assert status == 1 and "zz" in json.loads(err)["error"]["message"]


class TestConfig:
    def test_flags_override_config(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"beta": 0.5, "z": 2.0}))
        status, out, _ = run_main(["mlf", "--config", str(p), "--beta", "1"], capsys)
        assert status == 0 and json.loads(out)["results"]["value"] == pytest.approx(math.exp(2.0), rel=1e-14)

    def test_round_trip(self):
        cfg = small_sweep()
        assert RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_seed_offsets_are_documented_constants(self):
        assert len(set(SEED_OFFSETS.values())) == len(SEED_OFFSETS)

    def test_config_file_fixture_matches(self):
        data = json.loads((Path(__file__).parents[1] / "configs" / "acceptance_sweep.json").read_text())
        ref = acceptance_sweep_config().to_dict()
        assert all(ref[k] == v for k, v in data.items())


class TestRun:
    def test_solve_writes_trajectory(self, tmp_path):
        traj = tmp_path / "traj.csv"
        cfg = small_sweep(subcommand="solve", beta=0.7, trajectory_path=str(traj), output_path=str(tmp_path / "r.json"))
        assert run(cfg) == 0
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["results"]["n_steps"] == 20 and traj.exists()
        assert doc["results"]["lipschitz"] == pytest.approx(0.8, rel=1e-6)

    def test_deviation(self):
        doc = execute(small_sweep(subcommand="deviation", beta=0.6))
        res = doc["results"]
        assert res["beta"] == 0.6 and res["epsilon_effective"] == pytest.approx(0.1, rel=1e-12)
        assert res["seed"] == small_sweep().seed + SEED_OFFSETS["perturbation"]

    def test_topology_deviation(self):
        doc = execute(small_sweep(subcommand="deviation", perturbation_kind="topology", edits=[[0, 1, 2.5]]))
        assert doc["results"]["perturbation"] == "topology" and doc["results"]["epsilon_effective"] > 0

    def test_sweep_document(self, tmp_path):
        out, csv_path = tmp_path / "sweep.json", tmp_path / "sweep.csv"
        assert run(small_sweep(output_path=str(out), csv_path=str(csv_path))) == 0
        doc = json.loads(out.read_text())
        res = doc["results"]
        assert [r["beta"] for r in res["rows"]] == [0.5, 1.0]
        assert res["bound_factor_strictly_increasing"] and res["complete"]
        assert doc["config"] == small_sweep(output_path=str(out), csv_path=str(csv_path)).to_dict()
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("beta,median_sup_deviation") and len(lines) == 3

    def test_reproducible_payload(self):
        a, b = execute(small_sweep()), execute(small_sweep())
        assert json.dumps(result_payload(a), sort_keys=True) == json.dumps(result_payload(b), sort_keys=True)

    def test_seed_changes_payload(self):
        a, b = execute(small_sweep()), execute(small_sweep(seed=99))
        assert result_payload(a)["results"] != result_payload(b)["results"]

    def test_atomic_write_leaves_no_temporaries(self, tmp_path):
        out = tmp_path / "r.json"
        out.write_text("old")
        assert run(small_sweep(subcommand="mlf", z=0.5, output_path=str(out))) == 0
        assert [p.name for p in tmp_path.iterdir()] == ["r.json"]
        assert json.loads(out.read_text())["results"]["value"] == pytest.approx(math.exp(0.5))

    def test_failed_run_keeps_previous_output(self, tmp_path):
        out = tmp_path / "r.json"
        out.write_text("old")
        assert run(small_sweep(subcommand="mlf", z=-1e6, output_path=str(out))) == 1
        assert out.read_text() == "old" and len(list(tmp_path.iterdir())) == 1
