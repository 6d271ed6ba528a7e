import typer
from fddkit.commands.simulate import SimulateCommand
from fddkit.commands.crlb import CrlbCommand
from fddkit.commands.sweep import SweepCommand
from fddkit.commands.report import ReportCommand
from fddkit.commands.version import VersionCommand


class FddkitCLI:
    def __init__(self):
        self.app = typer.Typer(help="FDD massive MIMO channel extrapolation toolkit", no_args_is_help=True)
        self.simulate_cmd = SimulateCommand()
        self.crlb_cmd = CrlbCommand()
        self.sweep_cmd = SweepCommand()
        self.report_cmd = ReportCommand()
        self.version_cmd = VersionCommand()

        # Register the CLI commands
        self.app.command("simulate")(self.simulate_cmd.run)
        self.app.command("crlb")(self.crlb_cmd.run)
        self.app.command("sweep")(self.sweep_cmd.run)
        self.app.command("report")(self.report_cmd.run)
        self.app.command("version")(self.version_cmd.run)


def main():
    FddkitCLI().app()


if __name__ == "__main__":
    main()
