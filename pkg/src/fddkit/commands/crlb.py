from typing import Optional

import typer

from fddkit.commands.scenario_command import ScenarioCommand
from fddkit.engine.scenario_harness import compute_bounds


class CrlbCommand(ScenarioCommand):
    def run(
        self,
        config: Optional[str] = typer.Option(None, "--config", help="Scenario YAML file or preset name"),
        seed: Optional[int] = typer.Option(None, "--seed", help="Master random seed"),
        freq_min: Optional[float] = typer.Option(None, "--freq-min", help="Lowest evaluation frequency [Hz]"),
        freq_max: Optional[float] = typer.Option(None, "--freq-max", help="Highest evaluation frequency [Hz]"),
        freq_steps: Optional[int] = typer.Option(None, "--freq-steps", help="Number of evaluation frequencies"),
        out: str = typer.Option("results", "--out", help="Output directory"),
    ):
        """Cramer-Rao bounds and the derived downlink metrics, without Monte-Carlo"""
        self.execute(lambda: self.bounds(config, seed, freq_min, freq_max, freq_steps, out))

    def bounds(self, config, seed, freq_min, freq_max, freq_steps, out):
        scenario = self.load_config(config, seed, freq_min=freq_min, freq_max=freq_max, freq_steps=freq_steps)
        result = compute_bounds(scenario, scenario.sweep.frequencies)
        if result.extrapolation_range is not None:
            self.messenger.note(f"Extrapolation range: {result.extrapolation_range / 1e6:.3f} MHz")
        self.publish([result], out, prefix="crlb_")
