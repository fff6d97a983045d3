"""
Main entry point for the G2S-SLAM fusion command line.
"""
import os
import sys
import argparse
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

# Add the project root directory to the Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.components.formatter import (  # noqa: E402
    ReportFormatter,
    write_csv,
    write_errors_csv,
    write_histogram_csv,
    write_prediction_errors_csv,
    write_run_log,
    write_scales,
    write_selection_csv,
)
from src.components.g2s import (  # noqa: E402
    FileProvider,
    G2SProvider,
    SyntheticOracle,
    compose_correction,
    load_predictions,
)
from src.components.metrics import (  # noqa: E402
    ablation_table,
    claimed_pose_errors,
    evaluate_trajectory,
    prediction_accuracy,
)
from src.components.pipeline import run_ablation, run_iterative_fusion  # noqa: E402
from src.components.plotting import error_bins, write_plots  # noqa: E402
from src.components.selection import select_trajectory  # noqa: E402
from src.components.solver import slam_only_covariances  # noqa: E402
from src.components.state import MODES, PipelineConfig  # noqa: E402
from src.components.synth import ScenarioConfig, generate_scenario, write_scenario  # noqa: E402
from src.components.trajectory import (  # noqa: E402
    Trajectory,
    build_odometry_edges,
    load_covisibility,
    load_edge_poses,
    load_trajectory,
    save_trajectory,
)
from src.utils.config import (  # noqa: E402
    COVIS_FILE,
    DEFAULT_POSE_FORMAT,
    DEFAULT_SEED,
    FUSED_FILE,
    GT_FILE,
    LOG_FILE,
    LOG_FORMAT,
    LOG_LEVEL,
    LOOPS_FILE,
    MANIFEST_FILE,
    PREDICTIONS_FILE,
    PRESETS,
    QUERIES_FILE,
    RUN_LOG_FILE,
    SCALES_FILE,
    SLAM_FILE,
    TOOL_VERSION,
    load_sections,
)
from src.utils.errors import ConfigInvalid, FusionError, SolverError  # noqa: E402
from src.utils.path_utils import get_output_path  # noqa: E402
from src.utils.run_manifest import ManifestRecorder  # noqa: E402

logger = logging.getLogger('main')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3


class UsageError(Exception):
    """Bad command line."""


class CLIArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors instead of exiting with status 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def setup_logging(level: Optional[str] = None) -> None:
    """Configure root logging once: console, plus a file when G2S_FUSION_LOG_FILE is set."""
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if LOG_FILE:
        handlers.append(logging.FileHandler(LOG_FILE))
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
    )


# Argument parsing

def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), help="Named parameter set")
    p.add_argument("--config", help="INI config file, overrides the preset")
    p.add_argument("--seed", type=int, help="Random seed (oracle and scenario)")
    p.add_argument("--format", dest="fmt", choices=("kitti", "tum"), default=DEFAULT_POSE_FORMAT,
                   help="Pose file format")


def _add_input_args(p: argparse.ArgumentParser, need_gt: bool = False) -> None:
    p.add_argument("--data", help=f"Directory holding {SLAM_FILE}, {COVIS_FILE}, {LOOPS_FILE}, {GT_FILE} and predictions")
    p.add_argument("--slam", help="SLAM pose file")
    p.add_argument("--covis", help="Covisibility file 'i j N'")
    p.add_argument("--loops", help="Loop-closure edge-pose file")
    p.add_argument("--gt", help="Ground-truth pose file" + (" (required)" if need_gt else " (oracle provider)"))
    p.add_argument("--provider", choices=("oracle", "file"), help="G2S prediction source")
    p.add_argument("--predictions", help="Prediction file 'k x y theta'")
    p.add_argument("--queries", help="Query-pose sidecar of the prediction file")
    p.add_argument("--mode", choices=MODES, help="Pipeline run mode")


def build_parser() -> CLIArgumentParser:
    parser = CLIArgumentParser(prog="g2s-fusion", description="G2S-SLAM trajectory fusion toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {TOOL_VERSION}")
    parser.add_argument("--log-level", help="Override G2S_FUSION_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", parser_class=CLIArgumentParser)

    p = sub.add_parser("simulate", help="Generate a synthetic scenario")
    _add_config_args(p)
    p.add_argument("--path", choices=("straight", "arc", "figure_eight", "spline"), help="Path shape")
    p.add_argument("--length", type=float, help="Path length in meters")
    p.add_argument("--loop-closure", action="store_true", default=None, help="Add loop-closure edges")
    p.add_argument("--no-predictions", action="store_true", help="Skip writing oracle predictions")
    p.add_argument("--out", required=True, help="Output directory")

    p = sub.add_parser("fuse", help="Run iterative G2S-SLAM fusion")
    _add_config_args(p)
    _add_input_args(p)
    p.add_argument("--out", required=True, help="Output directory")

    p = sub.add_parser("select", help="Gate predictions along the SLAM trajectory without refinement")
    _add_config_args(p)
    _add_input_args(p)
    p.add_argument("--out", required=True, help="Output directory")

    p = sub.add_parser("evaluate", help="Absolute trajectory error against ground truth")
    _add_config_args(p)
    p.add_argument("--est", required=True, help="Estimated pose file")
    p.add_argument("--gt", required=True, help="Ground-truth pose file")
    p.add_argument("--align", choices=("origin", "horn", "both"), default="origin", help="Alignment method")
    p.add_argument("--predictions", help="Also score raw G2S claimed poses from this prediction file")
    p.add_argument("--queries", help="Query-pose sidecar of the prediction file")
    p.add_argument("--out", default=".", help="Output directory")

    p = sub.add_parser("plot", help="Trajectory overlay and error histogram series")
    _add_config_args(p)
    p.add_argument("--gt", required=True, help="Ground-truth pose file")
    p.add_argument("--est", action="append", default=[], metavar="NAME=PATH",
                   help="Named estimate to overlay, repeatable")
    p.add_argument("--out", required=True, help="Output directory")

    p = sub.add_parser("ablate", help="Run every pipeline mode and tabulate their errors")
    _add_config_args(p)
    _add_input_args(p, need_gt=True)
    p.add_argument("--modes", nargs="+", choices=MODES, default=list(MODES), help="Modes to run")
    p.add_argument("--align", choices=("origin", "horn"), default="origin", help="Alignment method")
    p.add_argument("--out", required=True, help="Output directory")
    return parser


# Shared helpers

def _from_data(args, attr: str, filename: str) -> Optional[str]:
    """Explicit flag, else the conventional file inside --data when it exists."""
    value = getattr(args, attr, None)
    if value:
        return value
    data = getattr(args, "data", None)
    if data:
        candidate = os.path.join(data, filename)
        if os.path.isfile(candidate):
            return candidate
    return None


def _resolve_inputs(args) -> None:
    args.slam = _from_data(args, "slam", SLAM_FILE)
    args.covis = _from_data(args, "covis", COVIS_FILE)
    args.loops = _from_data(args, "loops", LOOPS_FILE)
    args.gt = _from_data(args, "gt", GT_FILE)
    args.predictions = _from_data(args, "predictions", PREDICTIONS_FILE)
    if args.predictions and not args.queries:
        args.queries = os.path.join(os.path.dirname(args.predictions), QUERIES_FILE)
    if not args.slam:
        raise UsageError("a SLAM pose file is required (--slam or --data)")


def _resolve_seed(args, sections: Dict[str, Dict]) -> int:
    if args.seed is not None:
        return args.seed
    return int(sections.get("oracle", {}).get("seed", DEFAULT_SEED))


def _pipeline_config(args, recorder: ManifestRecorder) -> PipelineConfig:
    overrides = {"pipeline": {"mode": getattr(args, "mode", None), "provider": getattr(args, "provider", None)}}
    sections = load_sections(args.preset, args.config, overrides)
    seed = _resolve_seed(args, sections)
    sections.setdefault("oracle", {})["seed"] = seed
    sections.pop("scenario", None)
    config = PipelineConfig.from_sections(sections)
    recorder.manifest.seed = seed
    recorder.set_config(config.model_dump())
    return config


def _load_edges(args, slam: Trajectory, recorder: ManifestRecorder):
    covis = load_covisibility(args.covis) if args.covis else None
    loops = load_edge_poses(args.loops, args.fmt) if args.loops else None
    recorder.add_inputs(args.slam, args.covis, args.loops)
    return build_odometry_edges(slam, covis, loops)


def _build_provider(args, config: PipelineConfig, recorder: ManifestRecorder) -> G2SProvider:
    provider = config.provider
    if provider == "file" or (getattr(args, "provider", None) is None and args.predictions and not args.gt):
        if not args.predictions:
            raise UsageError("the file provider needs --predictions")
        recorder.add_inputs(args.predictions, args.queries)
        return FileProvider.from_files(args.predictions, args.queries, args.fmt)
    if not args.gt:
        raise UsageError("the oracle provider needs --gt")
    recorder.add_inputs(args.gt)
    return SyntheticOracle(load_trajectory(args.gt, args.fmt), config.oracle)


# Subcommands

def cmd_simulate(args, recorder: ManifestRecorder) -> int:
    sections = load_sections(args.preset, args.config)
    seed = _resolve_seed(args, sections)
    scenario_config = ScenarioConfig.from_section(
        sections.get("scenario"),
        seed=seed, path=args.path, length=args.length, loop_closure=args.loop_closure,
    )
    noise = None
    if not args.no_predictions:
        noise = PipelineConfig.from_sections({"oracle": dict(sections.get("oracle", {}), seed=seed)}).oracle
    recorder.manifest.seed = seed
    recorder.set_config({"scenario": scenario_config.model_dump(),
                         "oracle": noise.model_dump() if noise else None})

    scenario = generate_scenario(scenario_config)
    for path in write_scenario(scenario, args.out, args.fmt, noise):
        recorder.add_output(path)
    print(f"Wrote {len(scenario.gt)}-frame {scenario_config.path} scenario to {args.out}")
    return EXIT_OK


def cmd_fuse(args, recorder: ManifestRecorder) -> int:
    _resolve_inputs(args)
    config = _pipeline_config(args, recorder)
    slam = load_trajectory(args.slam, args.fmt)
    edges = _load_edges(args, slam, recorder)
    provider = _build_provider(args, config, recorder)

    result = run_iterative_fusion(slam, edges, provider, config)

    fused_path = get_output_path(args.out, FUSED_FILE)
    save_trajectory(result.trajectory, fused_path, args.fmt)
    outputs = [
        fused_path,
        write_scales(result.scales, get_output_path(args.out, SCALES_FILE)),
        write_run_log(result.log, get_output_path(args.out, RUN_LOG_FILE)),
    ]
    for path in outputs:
        recorder.add_output(path)

    print(f"{config.mode}: {result.log.refinements} refinements, "
          f"{len(result.C_r)} rotation / {len(result.C_t)} translation constraints -> {fused_path}")
    if result.aborted:
        logger.error(f"Fusion aborted: {result.log.diagnostic}")
        print(f"Error: {result.log.diagnostic}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_select(args, recorder: ManifestRecorder) -> int:
    _resolve_inputs(args)
    config = _pipeline_config(args, recorder)
    slam = load_trajectory(args.slam, args.fmt)
    edges = _load_edges(args, slam, recorder)
    provider = _build_provider(args, config, recorder)

    covariances = slam_only_covariances(slam, edges, config.solver_params())
    result = select_trajectory(slam, provider, covariances, config.gate_params())
    recorder.add_output(write_selection_csv(result.diagnostics, get_output_path(args.out, "selection.csv")))

    if args.gt:
        gt = load_trajectory(args.gt, args.fmt)
        claims = {k: compose_correction(slam[k], d) for k, d in result.deltas.items() if k > 0}
        if claims:
            frames, dtheta, dt = claimed_pose_errors(claims, gt)
            theta_err = np.degrees(np.abs(dtheta))
            t2d_err = np.linalg.norm(dt[:, :2], axis=1)
            recorder.add_output(write_prediction_errors_csv(
                frames, theta_err, dt, result.diagnostics, get_output_path(args.out, "prediction_errors.csv")))

            in_cr = np.array([k in result.C_r for k in frames])
            in_ct = np.array([k in result.C_t for k in frames])
            for stem, err, mask in (("theta", theta_err, in_cr), ("t2d", t2d_err, in_ct)):
                columns = {"raw": err, "selected": err[mask]}
                recorder.add_output(write_histogram_csv(
                    columns, error_bins(columns), get_output_path(args.out, f"prediction_{stem}_hist.csv")))

    gated = len(result.diagnostics) - 1
    print(f"Gated {gated} predictions: {len(result.C_r) - 1} in C_r, {len(result.C_t) - 1} in C_t")
    return EXIT_OK


def cmd_evaluate(args, recorder: ManifestRecorder) -> int:
    est = load_trajectory(args.est, args.fmt)
    gt = load_trajectory(args.gt, args.fmt)
    recorder.add_inputs(args.est, args.gt)
    methods = ("origin", "horn") if args.align == "both" else (args.align,)
    recorder.set_config({"align": list(methods)})

    formatter = ReportFormatter()
    sections = []
    for method in methods:
        report = evaluate_trajectory(est, gt, method)
        sections.append(formatter.format_metrics(report, title=f"{os.path.basename(args.est)} vs ground truth"))
        recorder.add_output(write_errors_csv(report, get_output_path(args.out, f"errors_{method}.csv")))

    if args.predictions:
        queries = args.queries or os.path.join(os.path.dirname(args.predictions), QUERIES_FILE)
        records = load_predictions(args.predictions, queries, args.fmt)
        recorder.add_inputs(args.predictions, queries)
        stats = prediction_accuracy({r.delta.frame: r.claimed_pose for r in records}, gt)
        sections.append(formatter.format_body_stats(stats, label="G2S claims"))

    text = "\n\n".join(sections)
    report_path = get_output_path(args.out, "report.txt")
    with open(report_path, 'w', encoding='utf-8') as f:
        f.write(text + "\n")
    recorder.add_output(report_path)
    print(text)
    return EXIT_OK


def _named_paths(values: Sequence[str]) -> Dict[str, str]:
    named = {}
    for value in values:
        name, sep, path = value.partition("=")
        if not sep:
            name, path = os.path.splitext(os.path.basename(value))[0], value
        named[name] = path
    return named


def cmd_plot(args, recorder: ManifestRecorder) -> int:
    if not args.est:
        raise UsageError("plot needs at least one --est NAME=PATH")
    gt = load_trajectory(args.gt, args.fmt)
    recorder.add_inputs(args.gt)
    trajectories = {"gt": gt}
    theta_errors, t2d_errors = {}, {}
    for name, path in _named_paths(args.est).items():
        est = load_trajectory(path, args.fmt)
        recorder.add_inputs(path)
        report = evaluate_trajectory(est, gt, "origin")
        trajectories[name] = est
        theta_errors[name] = np.array(report.theta_err)
        t2d_errors[name] = np.array(report.t2d_err)

    for path in write_plots(args.out, trajectories, theta_errors, t2d_errors):
        recorder.add_output(path)
    print(f"Wrote plot series for {len(trajectories) - 1} estimates to {args.out}")
    return EXIT_OK


def cmd_ablate(args, recorder: ManifestRecorder) -> int:
    _resolve_inputs(args)
    if not args.gt:
        raise UsageError("ablate needs --gt to evaluate the modes")
    config = _pipeline_config(args, recorder)
    slam = load_trajectory(args.slam, args.fmt)
    edges = _load_edges(args, slam, recorder)
    provider = _build_provider(args, config, recorder)
    gt = load_trajectory(args.gt, args.fmt)

    results = run_ablation(slam, edges, provider, config, args.modes)
    trajectories = {"slam": slam, **{mode: result.trajectory for mode, result in results.items()}}
    reports = ablation_table(trajectories, gt, args.align)
    for mode, result in results.items():
        if result.aborted:
            logger.error(f"Mode {mode} aborted: {result.log.diagnostic}")

    text = ReportFormatter().format_ablation(reports)
    table_path = get_output_path(args.out, "ablation.txt")
    with open(table_path, 'w', encoding='utf-8') as f:
        f.write(text + "\n")
    rows = (
        (mode, r.theta.mean, r.theta.median, r.theta.rmse, r.t2d.mean, r.t2d.median, r.t2d.rmse,
         int(mode in results and results[mode].aborted))
        for mode, r in reports.items()
    )
    csv_path = write_csv(get_output_path(args.out, "ablation.csv"),
                         ("mode", "theta_mean", "theta_median", "theta_rmse", "t2d_mean", "t2d_median",
                          "t2d_rmse", "aborted"), rows)
    recorder.add_output(table_path)
    recorder.add_output(csv_path)
    print(text)
    return EXIT_SOLVER if any(r.aborted for r in results.values()) else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fuse": cmd_fuse,
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "plot": cmd_plot,
    "ablate": cmd_ablate,
}


def dispatch(argv: Sequence[str]) -> int:
    """
    Parse argv, run one subcommand and write its run manifest.

    Args:
        argv: Arguments without the program name

    Returns:
        int: 0 on success, 1 usage error, 2 data error, 3 solver failure
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except UsageError as e:
        print(f"Error: {str(e)}", file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    setup_logging(args.log_level)
    recorder = ManifestRecorder(args.command, argv, seed=getattr(args, "seed", None))
    try:
        logger.info(f"Running {args.command}")
        code = COMMANDS[args.command](args, recorder)
    except (UsageError, ConfigInvalid) as e:
        logger.error(f"Usage error: {str(e)}")
        parser.print_usage(sys.stderr)
        print(f"Error: {str(e)}", file=sys.stderr)
        code = EXIT_USAGE
    except SolverError as e:
        logger.error(f"Solver failure: {str(e)}")
        print(f"Error: {str(e)}", file=sys.stderr)
        code = EXIT_SOLVER
    except (FusionError, OSError) as e:
        logger.error(f"Data error: {str(e)}")
        print(f"Error: {str(e)}", file=sys.stderr)
        code = EXIT_DATA

    recorder.save(get_output_path(args.out, MANIFEST_FILE), exit_code=code)
    return code


def main():
    """Main entry point for the application."""
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
