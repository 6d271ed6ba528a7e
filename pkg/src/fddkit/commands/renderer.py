import os
from typing import List, Sequence

from jinja2 import Environment, FileSystemLoader

from fddkit.engine.scenario_harness import COUPLING_LIMIT, CSV_COLUMNS, SweepResult, save_result, write_report
from fddkit.utilities.messenger import Messenger
from fddkit.utilities.path_resolver import PathResolver


def _scientific(value, digits: int = 3) -> str:
    if value is None:
        return "n/a"
    return f"{value:.{digits}e}"


def _megahertz(value) -> str:
    if value is None:
        return "n/a"
    return f"{value / 1e6:.3f} MHz"


class ReportRenderer:
    def __init__(self, output_dir: str):
        """
        :param output_dir: directory receiving CSV files, results.json and summary.md
        """
        self.output_dir = output_dir
        self.messenger = Messenger()
        self.env = Environment(
            loader=FileSystemLoader(PathResolver.get_templates_dir()),
            trim_blocks=True,
            lstrip_blocks=True
        )
        self.env.filters['sci'] = _scientific
        self.env.filters['mhz'] = _megahertz

    def csv_path(self, result: SweepResult, prefix: str = "") -> str:
        return os.path.join(self.output_dir, f"{prefix}{result.label}.csv")

    def write_all(self, results: Sequence[SweepResult], prefix: str = "", save_json: bool = True) -> List[str]:
        """Write every CSV/CDF file, results.json and the summary; returns the written paths"""
        os.makedirs(self.output_dir, exist_ok=True)
        written = []
        for result in results:
            for path in write_report(result, self.csv_path(result, prefix)):
                written.append(str(path))
                self.messenger.info(f"Wrote {path}")
        if save_json:
            path = save_result(results, os.path.join(self.output_dir, "results.json"))
            written.append(str(path))
            self.messenger.info(f"Wrote {path}")
        written.append(self.write_summary(results))
        return written

    def render_summary(self, results: Sequence[SweepResult]) -> str:
        template = self.env.get_template('summary.md.j2')
        return template.render(results=results, columns=CSV_COLUMNS, coupling_limit=COUPLING_LIMIT)

    def write_summary(self, results: Sequence[SweepResult]) -> str:
        path = os.path.join(self.output_dir, "summary.md")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.render_summary(results))
        self.messenger.info(f"Wrote {path}")
        return path

    def show(self, results: Sequence[SweepResult]):
        """Print a compact table per result"""
        for result in results:
            rows = [
                (f"{row.frequency / 1e6:+.1f}", _scientific(row.mse_ls), _scientific(row.mse_lmmse),
                 _scientific(row.mse_sage), _scientific(row.crlb_mean), _scientific(row.eta_mc),
                 _scientific(row.eta_approx), _scientific(row.se_bits), "!" if row.failed else "")
                for row in result.rows
            ]
            self.messenger.table(
                result.label,
                ("f [MHz]", "LS", "LMMSE", "SAGE", "CRLB", "eta MC", "eta approx", "SE", "err"),
                rows,
            )
