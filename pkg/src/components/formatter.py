"""
Report formatting: text summaries, CSV tables and the JSON-lines run log.
"""
import csv
import logging
from typing import Dict, Iterable, Mapping, Optional, Sequence

import numpy as np

from src.components.metrics import BodyFrameStats, MetricsReport
from src.components.selection import FrameDiagnostics
from src.components.state import PipelineLog

logger = logging.getLogger('formatter')


class ReportFormatter:
    """
    Formats evaluation results as text and writes tabular outputs.
    """
    def __init__(self, precision: int = 3):
        """
        Initialize the formatter.

        Args:
            precision: Decimal places in text tables
        """
        self.precision = precision

    def _f(self, value: float) -> str:
        return f"{value:.{self.precision}f}"

    def format_metrics(self, report: MetricsReport, title: Optional[str] = None) -> str:
        """
        Text report with azimuth / 2D translation summaries and body-frame statistics.

        Args:
            report: Evaluation to format
            title: Optional heading

        Returns:
            str: Multi-line report
        """
        lines = []
        if title:
            lines += [title, "=" * len(title)]
        lines.append(f"alignment: {report.method}   frames: {report.frames}")
        lines.append("")
        lines.append(f"{'':<14}{'mean':>10}{'median':>10}{'RMSE':>10}")
        for label, summary in (("azimuth [deg]", report.theta), ("2D trans [m]", report.t2d)):
            lines.append(
                f"{label:<14}{self._f(summary.mean):>10}{self._f(summary.median):>10}{self._f(summary.rmse):>10}"
            )
        lines.append("")
        lines.append(self.format_body_stats(report.body))
        return "\n".join(lines)

    def format_body_stats(self, stats: BodyFrameStats, label: str = "body frame") -> str:
        rot, trans = stats.rot_threshold_deg, stats.trans_threshold_m
        header = (f"{'':<14}{'azimuth':>10}{f'<{rot:g}deg %':>10}{'long.':>10}{f'<{trans:g}m %':>10}"
                  f"{'lat.':>10}{f'<{trans:g}m %':>10}")
        row = (f"{label:<14}{self._f(stats.azimuth_mean):>10}{stats.azimuth_pct:>10.1f}"
               f"{self._f(stats.longitudinal_mean):>10}{stats.longitudinal_pct:>10.1f}"
               f"{self._f(stats.lateral_mean):>10}{stats.lateral_pct:>10.1f}")
        return "\n".join((header, row))

    def format_ablation(self, reports: Mapping[str, MetricsReport]) -> str:
        """One row per mode: azimuth and 2D translation mean / median / RMSE."""
        lines = [f"{'mode':<14}{'th mean':>10}{'th med':>10}{'th RMSE':>10}{'t mean':>10}{'t med':>10}{'t RMSE':>10}"]
        for mode, r in reports.items():
            lines.append(
                f"{mode:<14}{self._f(r.theta.mean):>10}{self._f(r.theta.median):>10}{self._f(r.theta.rmse):>10}"
                f"{self._f(r.t2d.mean):>10}{self._f(r.t2d.median):>10}{self._f(r.t2d.rmse):>10}"
            )
        return "\n".join(lines)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    logger.info(f"Wrote {path}")
    return path


def write_errors_csv(report: MetricsReport, path: str) -> str:
    """Per-frame errors: k,theta_err_deg,t2d_err_m,longitudinal_m,lateral_m."""
    rows = zip(range(report.frames), report.theta_err, report.t2d_err, report.longitudinal, report.lateral)
    return write_csv(path, ("k", "theta_err_deg", "t2d_err_m", "longitudinal_m", "lateral_m"), rows)


def write_selection_csv(diagnostics: Mapping[int, FrameDiagnostics], path: str) -> str:
    """Selection diagnostics: k,in_bound,rot_diff_deg,dx,dy,in_Cr,in_Ct."""
    rows = (
        (d.frame, int(d.in_bound), d.rot_diff_deg, d.dx, d.dy, int(d.in_Cr), int(d.in_Ct))
        for d in (diagnostics[k] for k in sorted(diagnostics))
    )
    return write_csv(path, ("k", "in_bound", "rot_diff_deg", "dx", "dy", "in_Cr", "in_Ct"), rows)


def write_prediction_errors_csv(frames: Sequence[int], theta_err_deg: np.ndarray, dt: np.ndarray,
                                diagnostics: Mapping[int, FrameDiagnostics], path: str) -> str:
    """Claimed-pose errors of raw predictions with their selection flags."""
    rows = []
    for k, th, e in zip(frames, theta_err_deg, dt):
        d = diagnostics.get(k)
        rows.append((k, th, abs(e[0]), abs(e[1]), float(np.hypot(e[0], e[1])),
                     int(bool(d and d.in_Cr)), int(bool(d and d.in_Ct))))
    return write_csv(path, ("k", "theta_err_deg", "longitudinal_m", "lateral_m", "t2d_err_m", "in_Cr", "in_Ct"), rows)


def write_histogram_csv(columns: Dict[str, np.ndarray], bins: np.ndarray, path: str) -> str:
    """Histogram counts of several series over shared bins: lo,hi,<name>..."""
    names = list(columns)
    counts = [np.histogram(np.asarray(columns[n], dtype=float), bins=bins)[0] for n in names]
    rows = ((bins[i], bins[i + 1], *(int(c[i]) for c in counts)) for i in range(len(bins) - 1))
    return write_csv(path, ("lo", "hi", *names), rows)


def write_scales(scales: np.ndarray, path: str) -> str:
    """One 'k s' line per pose."""
    with open(path, 'w', encoding='utf-8') as f:
        for k, s in enumerate(scales):
            f.write(f"{k} {s:.17g}\n")
    return path


def load_scales(path: str) -> np.ndarray:
    values = []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            fields = line.split()
            if fields:
                values.append(float(fields[1]))
    return np.array(values)


def write_run_log(log: PipelineLog, path: str) -> str:
    """JSON-lines run log, one record per frame."""
    with open(path, 'w', encoding='utf-8') as f:
        f.write(log.to_jsonl())
    logger.info(f"Wrote run log with {len(log.records)} records to {path}")
    return path
