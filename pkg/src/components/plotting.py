"""
Trajectory overlays and error histograms as CSV series and SVG figures.
"""
import logging
from typing import Dict, List, Mapping, Optional

import numpy as np
import matplotlib as mpl
mpl.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from src.components.formatter import write_csv, write_histogram_csv
from src.components.trajectory import Trajectory
from src.utils.path_utils import get_output_path

logger = logging.getLogger('plotting')

PLOT_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (6.0, 4.5),
    "svg.fonttype": "none",
    "svg.hashsalt": "g2s-fusion",
}


def write_overlay_csv(trajectories: Mapping[str, Trajectory], path: str) -> str:
    """Planar positions of several index-aligned trajectories: k,<name>_x,<name>_y,..."""
    names = list(trajectories)
    n = min(len(t) for t in trajectories.values())
    header = ["k"] + [f"{name}_{axis}" for name in names for axis in ("x", "y")]
    rows = (
        [k] + [v for name in names for v in trajectories[name].translations[k, :2]]
        for k in range(n)
    )
    return write_csv(path, header, rows)


def plot_overlay_svg(trajectories: Mapping[str, Trajectory], path: str, title: Optional[str] = None) -> str:
    """Top-down polylines of each trajectory."""
    with mpl.rc_context(PLOT_STYLE):
        fig, ax = plt.subplots()
        for name, traj in trajectories.items():
            ax.plot(traj.translations[:, 0], traj.translations[:, 1], label=name, linewidth=1.0)
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend()
        if title:
            ax.set_title(title)
        fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
        plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def plot_histogram_svg(columns: Mapping[str, np.ndarray], bins: np.ndarray, path: str, xlabel: str) -> str:
    """Overlaid step histograms of error series."""
    with mpl.rc_context(PLOT_STYLE):
        fig, ax = plt.subplots()
        for name, values in columns.items():
            ax.hist(np.asarray(values, dtype=float), bins=bins, histtype="step", label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("frames")
        ax.legend()
        fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
        plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def error_bins(columns: Mapping[str, np.ndarray], count: int = 40) -> np.ndarray:
    upper = max((float(np.max(v)) for v in columns.values() if len(v)), default=1.0)
    return np.linspace(0.0, upper if upper > 0.0 else 1.0, count + 1)


def write_plots(out_dir: str, trajectories: Mapping[str, Trajectory],
                theta_errors: Optional[Mapping[str, np.ndarray]] = None,
                t2d_errors: Optional[Mapping[str, np.ndarray]] = None) -> List[str]:
    """
    Write overlay and histogram CSV series plus their SVG renderings.

    Args:
        out_dir: Output directory
        trajectories: name -> trajectory to overlay
        theta_errors: name -> per-frame azimuth errors (deg)
        t2d_errors: name -> per-frame 2D translation errors (m)

    Returns:
        Written paths
    """
    written = [
        write_overlay_csv(trajectories, get_output_path(out_dir, "trajectories.csv")),
        plot_overlay_svg(trajectories, get_output_path(out_dir, "trajectories.svg")),
    ]
    for stem, columns, xlabel in (("theta_hist", theta_errors, "azimuth error [deg]"),
                                  ("t2d_hist", t2d_errors, "2D translation error [m]")):
        if not columns:
            continue
        bins = error_bins(columns)
        written.append(write_histogram_csv(dict(columns), bins, get_output_path(out_dir, f"{stem}.csv")))
        written.append(plot_histogram_svg(columns, bins, get_output_path(out_dir, f"{stem}.svg"), xlabel))
    return written
