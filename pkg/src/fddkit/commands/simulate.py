from typing import Optional

import typer

from fddkit.commands.scenario_command import ScenarioCommand
from fddkit.engine.scenario_harness import run_drops, run_sweep


class SimulateCommand(ScenarioCommand):
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
        """Monte-Carlo sweep of one scenario over frequency"""
        self.execute(lambda: self.simulate(config, seed, trials, freq_min, freq_max, freq_steps, estimators, out))

    def simulate(self, config, seed, trials, freq_min, freq_max, freq_steps, estimators, out):
        scenario = self.load_config(config, seed, trials, freq_min, freq_max, freq_steps, estimators)
        sweep = scenario.sweep
        self.messenger.info(f"Simulating {sweep.trials} trials at {sweep.freq_steps} frequencies")
        result = run_sweep(scenario, sweep.frequencies, sweep.trials, sweep.estimators)
        if sweep.drops:
            result.cdfs.update(run_drops(scenario, sweep.frequencies, sweep.drops, sweep.cdf_points))
        self.publish([result], out)
