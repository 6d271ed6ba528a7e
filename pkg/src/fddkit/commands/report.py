import os
from typing import Optional

import typer

from fddkit.commands.scenario_command import ScenarioCommand
from fddkit.engine.scenario_harness import load_result


class ReportCommand(ScenarioCommand):
    def run(
        self,
        results: str = typer.Argument(..., help="results.json written by simulate, crlb or sweep"),
        out: Optional[str] = typer.Option(None, "--out", help="Output directory, the directory of the results file by default"),
        cdf_points: int = typer.Option(101, "--cdf-points", help="Grid points of the re-rendered CDF tables"),
    ):
        """Re-render CSV, CDF and summary files from stored results"""
        self.execute(lambda: self.report(results, out, cdf_points))

    def report(self, results, out, cdf_points):
        loaded = load_result(results, cdf_points)
        self.messenger.info(f"Loaded {len(loaded)} result(s) from {results}")
        self.publish(loaded, out or os.path.dirname(os.path.abspath(results)), save_json=False)
