"""End-to-end tests for the devlab command line."""

import json

import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

from roughdev.cli import main
from roughdev.devlab import invariants
from roughdev.devlab.invariants import InvariantResult


@pytest.fixture
def scenario(small_config, temp_dir):
    """The small additive scenario written as YAML, with the exact kernel."""
    data = small_config.model_dump(mode="json")
    data["optimizer"]["kernel"] = "discrete"
    path = temp_dir / "scenario.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


@pytest.mark.smoke
class TestCommands:
    """Each command runs, writes its files and a manifest."""

    def test_version(self):
        """--version prints and exits 0."""
        result = invoke("--version")
        assert result.exit_code == 0

    def test_lift(self, scenario, temp_dir):
        """The lift is written with its shuffle defect logged."""
        out = temp_dir / "lift"
        result = invoke("lift", "-c", scenario, "-o", out)
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert manifest["outputs"][0]["path"] == "lift.csv"

    def test_solve_rde_many_runs(self, scenario, temp_dir):
        """Several runs are written in long format."""
        out = temp_dir / "solve"
        result = invoke("solve-rde", "-c", scenario, "-o", out, "--eps", 0.25, "--runs", 3)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(out / "trajectories.csv")
        assert sorted(frame["run"].unique()) == [0, 1, 2]

    def test_rate_then_skeleton(self, scenario, temp_dir):
        """The control written by `rate` is read back by `skeleton`."""
        out = temp_dir / "rate"
        result = invoke("rate", "-c", scenario, "-o", out)
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        event = next(e for e in manifest["events"] if e["event"] == "rate")
        assert event["value"] == pytest.approx(0.5, rel=0.01)

        skel = temp_dir / "skeleton"
        result = invoke("skeleton", "-c", scenario, "-o", skel, "--control", out / "control.csv")
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(skel / "skeleton.csv")
        assert frame["x_0"].iloc[-1] >= 1.0 - 1e-6

    def test_mc_tail_is_reproducible(self, scenario, temp_dir):
        """Two runs with one seed write byte-identical files."""
        outs = [temp_dir / "a", temp_dir / "b"]
        for out in outs:
            result = invoke("mc-tail", "-c", scenario, "-o", out, "--eps", 0.5, "--runs", 1000)
            assert result.exit_code == 0, result.output
        for name in ("tail.csv", "manifest.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_seed_changes_output(self, scenario, temp_dir):
        """--seed overrides the scenario seed."""
        invoke("solve-rde", "-c", scenario, "-o", temp_dir / "a", "--runs", 2)
        invoke("solve-rde", "-c", scenario, "-o", temp_dir / "b", "--runs", 2, "--seed", 99)
        a = (temp_dir / "a" / "trajectories.csv").read_bytes()
        b = (temp_dir / "b" / "trajectories.csv").read_bytes()
        assert a != b

    def test_slope_check_from_tail_file(self, scenario, temp_dir):
        """slope-check reads a tail file and a given rate."""
        tail = pd.DataFrame(
            {
                "eps": [0.5, 0.25, 0.125],
                "runs": [100_000] * 3,
                "hits": [26_018, 6_767, 648],
                "probability": [0.26018, 0.06767, 0.00648],
            }
        )
        tail_path = temp_dir / "tail.csv"
        tail.to_csv(tail_path, index=False)
        out = temp_dir / "slope"
        result = invoke("slope-check", "-c", scenario, "-o", out, "--tail", tail_path, "--rate", 0.5)
        assert result.exit_code == 0, result.output
        summary = pd.read_csv(out / "summary.csv")
        assert bool(summary["passed"].iloc[0])


@pytest.mark.smoke
class TestExitCodes:
    """Failures map to documented exit codes."""

    def test_invariants_pass(self, scenario, temp_dir):
        """Passing checks exit 0."""
        result = invoke("check-invariants", "-c", scenario, "-o", temp_dir / "inv", "--only", "chen")
        assert result.exit_code == 0, result.output

    def test_failed_invariant_exits_2(self, scenario, temp_dir, monkeypatch):
        """A failing check exits 2 and the manifest records it."""
        monkeypatch.setitem(
            invariants.CHECKS, "always-fails", lambda config: InvariantResult("always-fails", 1.0, 0.0)
        )
        out = temp_dir / "inv"
        result = invoke("check-invariants", "-c", scenario, "-o", out, "--only", "always-fails")
        assert result.exit_code == 2
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "failed"
        assert manifest["error"]["error_code"] == "INVARIANT_FAILED"

    def test_budget_exits_3_with_partial(self, scenario, temp_dir):
        """An exhausted run budget exits 3 and keeps the partial sweep."""
        out = temp_dir / "tail"
        result = invoke("mc-tail", "-c", scenario, "-o", out, "--runs", 1000, "--budget", 1500)
        assert result.exit_code == 3
        partial = pd.read_csv(out / "partial.csv")
        assert list(partial["runs"]) == [1000, 500]

    def test_unknown_check_exits_1(self, scenario, temp_dir):
        """Input errors exit 1."""
        result = invoke("check-invariants", "-c", scenario, "-o", temp_dir / "inv", "--only", "nope")
        assert result.exit_code == 1

    def test_invalid_scenario_exits_1(self, temp_dir):
        """A scenario that does not validate exits 1 before any run directory exists."""
        path = temp_dir / "bad.yaml"
        path.write_text(yaml.safe_dump({"gaussian": {"hurst": 0.9}}))
        result = invoke("lift", "-c", path, "-o", temp_dir / "never")
        assert result.exit_code == 1
        assert not (temp_dir / "never").exists()
