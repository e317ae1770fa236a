"""
Tests for the delivery sweep tool.
"""

import json
import pytest  # type: ignore
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from fleet import default_scenario
from tools.sweep import SweepRunner, main, run_trial

SMALL = {"n_devices": 2, "duration_s": 600}


class TestSweep:
    """Test trial grids and their summaries."""

    def test_configurations(self) -> None:
        """Test the grid covers every combination in order."""
        runner = SweepRunner(default_scenario(**SMALL))
        configs = runner.configurations([0.0, 0.2], [0, 1], [1, 2])
        assert len(configs) == 8
        assert [(c.drop_probability, c.qos, c.seed) for c in configs[:3]] == [
            (0.0, 0, 1), (0.0, 0, 2), (0.0, 1, 1),
        ]
        assert all(c.n_devices == 2 for c in configs)

    def test_trial_row(self) -> None:
        """Test one trial reports delivery on a clean link."""
        row = run_trial(default_scenario(**SMALL))
        assert row["stored"] == row["generated"]
        assert row["delivery_fraction"] == 1.0
        assert row["header_violations"] == 0

    def test_cells(self) -> None:
        """Test each cell summarizes its seeds."""
        results = SweepRunner(default_scenario(**SMALL)).run([0.0, 0.3], [1], [1, 2])
        assert len(results["trials"]) == 4
        clean, lossy = results["cells"]
        assert clean["runs"] == 2
        assert clean["mean_delivery_fraction"] == 1.0
        assert lossy["min_delivery_fraction"] <= lossy["mean_delivery_fraction"] <= 1.0

    def test_workers_validated(self) -> None:
        """Test at least one worker is needed."""
        with pytest.raises(ValueError):  # type: ignore
            SweepRunner(default_scenario(), workers=0)

    def test_main_writes_results(self, tmp_path: Path, capsys) -> None:
        """Test the script writes JSON results and prints a table."""
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps(SMALL), encoding="utf-8")
        out = tmp_path / "sweep.json"
        argv = ["--scenario", str(scenario), "-p", "0.1", "-q", "1", "-s", "4", "-o", str(out)]
        assert main(argv) == 0
        results = json.loads(out.read_text(encoding="utf-8"))
        assert [t["seed"] for t in results["trials"]] == [4]
        assert "Results saved to" in capsys.readouterr().out

    def test_main_rejects_certain_loss(self) -> None:
        """Test a drop probability of 1 is a usage error."""
        with pytest.raises(SystemExit):  # type: ignore
            main(["-p", "1.0", "-o", "-"])
