import csv
import json

import numpy as np
import pytest

from leashguide.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main, sha256
from leashguide.predictors import InteractionLog, write_log
from leashguide.sim import TRACE_COLUMNS, walled_map
from leashguide.worldmap import format_map

FAST = ["--profile", "fast"]


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def output_hashes(out):
    m = json.loads((out / "manifest.json").read_text())
    return {name: run["outputs"] for name, run in m["runs"].items()}


class TestGenerate:
    def test_full_session_counts(self, tmp_path):
        assert main(["generate", "--out", str(tmp_path), "--set", "data.subjects=10"]) == EXIT_OK
        for kind in ("human", "robot"):
            files = sorted((tmp_path / kind).glob("*.csv"))
            assert len(files) == 10
            assert all(len(rows(f)) == 6001 for f in files)

    def test_same_seed_same_hashes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["generate", "--out", str(a), "--seed", "4", *FAST]) == EXIT_OK
        assert main(["generate", "--out", str(b), "--seed", "4", *FAST]) == EXIT_OK
        ha, hb = output_hashes(a), output_hashes(b)
        assert ha == hb and len(ha["generate"]) == 5
        assert main(["generate", "--out", str(tmp_path / "c"), "--seed", "5", *FAST]) == EXIT_OK
        assert output_hashes(tmp_path / "c") != ha

    def test_no_subjects(self, tmp_path, capsys):
        assert main(["generate", "--out", str(tmp_path), "--set", "data.subjects=0"]) == EXIT_CONFIG
        assert "no subjects configured" in capsys.readouterr().err

    def test_manifest_lists_every_file(self, tmp_path):
        main(["generate", "--out", str(tmp_path), *FAST])
        entry = json.loads((tmp_path / "manifest.json").read_text())["runs"]["generate"]
        files = {str(p.relative_to(tmp_path)) for p in tmp_path.rglob("*") if p.is_file()} - {"manifest.json"}
        assert set(entry["outputs"]) == files
        for name, digest in entry["outputs"].items():
            assert sha256(tmp_path / name) == digest
        assert entry["seed"] == 0 and "version" in json.loads((tmp_path / "manifest.json").read_text())


def linear_law_logs(root, n_logs=2, n=1500, a=0.9, c=0.01, T=0.02):
    """Human logs whose velocity follows ``v_{k+1} = a v_k + c F_k`` exactly."""
    (root / "human").mkdir(parents=True)
    for i in range(n_logs):
        rng = np.random.default_rng(i)
        F = np.repeat(rng.uniform(2, 20, n // 100 + 1), 100)[:n]
        v = np.zeros(n)
        for k in range(n - 1):
            v[k + 1] = a * v[k] + c * F[k]
        xh = np.column_stack([(np.cumsum(v) - v) * T, np.zeros(n)])
        # robot ahead along +x, so the pull on the person points along +x
        el = np.tile([-1.0, 0.0, 0.0], (n, 1))
        lg = InteractionLog(np.arange(n) * T, f"s{i:02d}", xh + np.array([1.1, 0.0]), np.zeros((n, 3)), F, el,
                            np.full(n, 1.1))
        write_log(lg, root / "human" / f"s{i:02d}.csv")


class TestTrain:
    def test_linear_law_final_loss(self, tmp_path):
        linear_law_logs(tmp_path / "data")
        assert main(["train", "--out", str(tmp_path / "w"), "--set", f"paths.dataset={tmp_path / 'data'}"]) == EXIT_OK
        summary = json.loads((tmp_path / "w" / "train_summary.json").read_text())
        assert list(summary) == ["hmp_tcn"]
        assert summary["hmp_tcn"]["final_loss"] < 1e-5
        assert summary["hmp_tcn"]["final_loss"] <= summary["hmp_tcn"]["initial_loss"]

    def test_missing_dataset(self, tmp_path, capsys):
        missing = tmp_path / "nowhere"
        assert main(["train", "--out", str(tmp_path / "w"), "--set", f"paths.dataset={missing}"]) == EXIT_CONFIG
        assert str(missing) in capsys.readouterr().err

    def test_all_architectures(self, tmp_path, small_workspace):
        out = tmp_path / "w"
        args = ["train", "--out", str(out), *FAST, "--set", f"paths.dataset={small_workspace / 'data'}",
                "--set", "model.arch=all", "--set", "train.epochs=1", "--set", "train.stride=50"]
        assert main(args) == EXIT_OK
        for kind in ("hmp", "rdm"):
            assert sorted(p.name for p in out.glob(f"{kind}_*.json")) == [f"{kind}_cnn.json", f"{kind}_lstm.json",
                                                                          f"{kind}_tcn.json"]
        assert (out / "loss_curves.svg").exists()
        header = rows(out / "loss_hmp_lstm.csv")[0]
        assert header == ["epoch", "train_loss", "monitor_loss"]

    def test_unknown_arch(self, tmp_path, small_workspace, capsys):
        args = ["train", "--out", str(tmp_path), "--set", f"paths.dataset={small_workspace / 'data'}",
                "--set", "model.arch=gru"]
        assert main(args) == EXIT_CONFIG
        assert "gru" in capsys.readouterr().err


class TestEvaluate:
    def test_single_fold_rejected(self, tmp_path, small_workspace, capsys):
        args = ["evaluate", "--out", str(tmp_path), "--set", f"paths.dataset={small_workspace / 'data'}",
                "--set", "eval.k_folds=1"]
        assert main(args) == EXIT_CONFIG
        assert "at least 2" in capsys.readouterr().err

    def test_report_files(self, tmp_path, small_workspace):
        args = ["evaluate", "--out", str(tmp_path), *FAST, "--set", f"paths.dataset={small_workspace / 'data'}",
                "--set", "train.epochs=1", "--set", "train.stride=50"]
        assert main(args) == EXIT_OK
        text = (tmp_path / "eval_hmp.txt").read_text()
        for name in ("TCN", "Linear", "GeoC"):
            assert name in text
        assert "*" in text and "(" in text
        assert "VDCM" in (tmp_path / "eval_rdm.txt").read_text()
        assert rows(tmp_path / "eval_rdm.csv")[0][0] == "model"


class TestSimulate:
    def test_episode_outputs(self, tmp_path, small_workspace):
        args = ["simulate", "--out", str(tmp_path), *FAST, "--set", f"paths.weights={small_workspace / 'weights'}",
                "--set", "sim.episode_s=0.5"]
        assert main(args) == EXIT_OK
        assert rows(tmp_path / "episode_00_trace.csv")[0] == TRACE_COLUMNS
        for kind in ("speed", "separation"):
            header = rows(tmp_path / f"episode_00_{kind}.csv")[0]
            assert set(header) <= set(TRACE_COLUMNS)
            assert (tmp_path / f"episode_00_{kind}.svg").exists()
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary[0]["outcome"] == "timeout"

    def test_unreachable_goal(self, tmp_path, small_workspace, capsys):
        grid = walled_map(14.0, 4.0, 0.1, blocks=[(7.0, 0.0, 7.3, 4.0)])
        sc = tmp_path / "blocked.json"
        sc.write_text(json.dumps({"map": {"text": format_map(grid)}}))
        args = ["simulate", "--out", str(tmp_path / "o"), *FAST, "--set", f"paths.scenario={sc}",
                "--set", f"paths.weights={small_workspace / 'weights'}"]
        assert main(args) != EXIT_OK
        assert "NoPath" in capsys.readouterr().err

    def test_missing_weights(self, tmp_path, capsys):
        args = ["simulate", "--out", str(tmp_path), "--set", f"paths.weights={tmp_path / 'none'}"]
        assert main(args) == EXIT_CONFIG
        assert "hmp_tcn.json" in capsys.readouterr().err


def snapshot(path, **over):
    snap = {"human": {"x": [5.0, 2.0], "v": [0.0, 0.0]}, "robot": {"x": [6.1, 2.0], "v": [0.0, 0.0]},
            "goal": [5.0, 2.0], "leash": {"F": 2.0}}
    snap.update(over)
    path.write_text(json.dumps(snap))
    return path


class TestPlan:
    def plan(self, out, snap, weights, *extra):
        return main(["plan", "--out", str(out), "--set", f"paths.weights={weights}",
                     "--set", f"paths.snapshot={snap}", *extra])

    def test_stationary_near_zero(self, tmp_path, small_workspace):
        snap = snapshot(tmp_path / "s.json")
        assert self.plan(tmp_path / "o", snap, small_workspace / "weights") == EXIT_OK
        table = rows(tmp_path / "o" / "plan.csv")
        u0 = np.array(table[1][-3:], float)
        assert np.max(np.abs(u0)) < 0.15
        assert float(table[1][3]) == pytest.approx(2.0, abs=0.5)
        info = json.loads((tmp_path / "o" / "plan.json").read_text())
        assert set(info["human_breakdown"]) == {"tracking", "force_vector", "force_magnitude", "bearing", "length"}

    def test_byte_stable(self, tmp_path, small_workspace):
        snap = snapshot(tmp_path / "s.json", goal=[11.0, 2.0])
        w = small_workspace / "weights"
        assert self.plan(tmp_path / "a", snap, w, "--seed", "3") == EXIT_OK
        assert self.plan(tmp_path / "b", snap, w, "--seed", "3") == EXIT_OK
        for name in ("plan.csv", "plan.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    @pytest.mark.parametrize("over,field", [
        ({"human": {"x": [5.0]}}, "human.x"),
        ({"goal": "home"}, "goal"),
        ({"robot": {"v": [0, 0]}}, "robot.x"),
        ({"leash": {"F": 2.0, "slack": 1}}, "leash.slack"),
        ({"speed": 1.0}, "speed"),
    ])
    def test_malformed_snapshot(self, tmp_path, small_workspace, capsys, over, field):
        snap = snapshot(tmp_path / "s.json", **over)
        assert self.plan(tmp_path / "o", snap, small_workspace / "weights") == EXIT_CONFIG
        assert field in capsys.readouterr().err


class TestEntryPoint:
    def test_list_keys(self, capsys):
        assert main(["--list-keys"]) == EXIT_OK
        assert "guidance.w1" in capsys.readouterr().out

    def test_no_subcommand(self, capsys):
        assert main([]) == EXIT_CONFIG

    def test_bad_override(self, tmp_path, capsys):
        assert main(["generate", "--out", str(tmp_path), "--set", "train.epochs=many"]) == EXIT_CONFIG
        assert "train.epochs" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["generate", "--out", str(blocker / "sub"), *FAST]) == EXIT_RUNTIME
        assert "not writable" in capsys.readouterr().err
