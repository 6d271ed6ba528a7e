from typing import Optional

import typer

from fddkit.commands.scenario_command import ScenarioCommand
from fddkit.engine.scenario_harness import run_grid


class SweepCommand(ScenarioCommand):
    def run(
        self,
        config: Optional[str] = typer.Option(None, "--config", help="Scenario YAML file or preset name"),
        seed: Optional[int] = typer.Option(None, "--seed", help="Master random seed"),
        trials: Optional[int] = typer.Option(None, "--trials", help="Monte-Carlo noise realisations"),
        freq_min: Optional[float] = typer.Option(None, "--freq-min", help="Lowest evaluation frequency [Hz]"),
        freq_max: Optional[float] = typer.Option(None, "--freq-max", help="Highest evaluation frequency [Hz]"),
        freq_steps: Optional[int] = typer.Option(None, "--freq-steps", help="Number of evaluation frequencies"),
        estimators: Optional[str] = typer.Option(None, "--estimators", help="Comma list of ls,lmmse,sage"),
        out: str = typer.Option("results", "--out", help="Output directory"),
    ):
        """Sweep every antenna array and SNR listed in the configuration"""
        self.execute(lambda: self.sweep(config, seed, trials, freq_min, freq_max, freq_steps, estimators, out))

    def sweep(self, config, seed, trials, freq_min, freq_max, freq_steps, estimators, out):
        scenario = self.load_config(config, seed, trials, freq_min, freq_max, freq_steps, estimators)
        settings = scenario.sweep
        self.messenger.info(
            f"Sweeping {len(settings.antennas)} arrays x {len(settings.snrs)} SNRs, {settings.trials} trials each")
        results = run_grid(scenario, settings.frequencies, settings.trials, settings.estimators)
        self.publish(results, out)
