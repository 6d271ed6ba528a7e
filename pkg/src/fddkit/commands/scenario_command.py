import sys
from typing import Callable, List, Optional, Sequence

from fddkit.commands.renderer import ReportRenderer
from fddkit.engine.errors import ConfigError, FddkitError
from fddkit.engine.scenario_harness import ScenarioConfig, SweepResult
from fddkit.utilities.config_loader import ConfigLoader
from fddkit.utilities.messenger import Messenger

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class ScenarioCommand:
    """Shared plumbing of the simulate, crlb, sweep and report subcommands"""

    def __init__(self):
        self.messenger = Messenger()
        self.loader = ConfigLoader()

    def execute(self, work: Callable[[], None]):
        """Run ``work`` and translate its failures to exit codes"""
        try:
            work()
        except KeyboardInterrupt:
            self.messenger.info("\nOperation cancelled by user")
            sys.exit(EXIT_OK)
        except ConfigError as e:
            self.messenger.error(f"Invalid configuration: {str(e)}")
            sys.exit(EXIT_CONFIG)
        except FddkitError as e:
            self.messenger.error(f"Numerical failure: {str(e)}")
            sys.exit(EXIT_NUMERIC)
        except OSError as e:
            self.messenger.error(f"I/O error: {str(e)}")
            sys.exit(EXIT_IO)
        except Exception as e:
            self.messenger.error(f"An error occurred: {str(e)}")
            sys.exit(EXIT_FAILURE)

    def load_config(self, config: Optional[str], seed: Optional[int] = None, trials: Optional[int] = None,
                    freq_min: Optional[float] = None, freq_max: Optional[float] = None,
                    freq_steps: Optional[int] = None, estimators: Optional[str] = None) -> ScenarioConfig:
        scenario = self.loader.load(config)
        return ConfigLoader.override(scenario, seed, trials, freq_min, freq_max, freq_steps, estimators)

    def publish(self, results: Sequence[SweepResult], out: str, prefix: str = "",
                save_json: bool = True) -> List[str]:
        """Write and display the results; all-failed results end the command with the numeric exit code"""
        renderer = ReportRenderer(out)
        written = renderer.write_all(results, prefix=prefix, save_json=save_json)
        renderer.show(results)
        failed = [result.label for result in results if result.all_failed]
        if failed:
            self.messenger.error(f"Every row failed for {', '.join(failed)}")
            sys.exit(EXIT_NUMERIC)
        self.messenger.success(f"Results written to {out}")
        return written
