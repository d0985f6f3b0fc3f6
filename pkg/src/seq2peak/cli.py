"""
Command-line entry point.

Usage:
    seq2peak fetch --config configs/etth1.json
    seq2peak synth --config configs/synth.json --out results/synth
    seq2peak acf --config configs/etth1.json --channel OT --max-lag 96 --plot
    seq2peak train --config configs/synth.json --set train.max_epochs=20
    seq2peak eval --config configs/synth.json --checkpoint results/train/model.s2pk
    seq2peak compare --config configs/synth.json --jobs 4
    seq2peak ablate --config configs/etth1.json
    seq2peak sweep-alpha --config configs/etth1.json
    seq2peak check-grads --seed 0

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""

import argparse
import json
import logging
import os
import subprocess
import sys
from pathlib import Path

from . import __version__
from .analysis import experiments
from .analysis.acf import compare_full_vs_peak
from .analysis.gradcheck import run_gradient_suite
from .config import load_config
from .utils.data_loader import fetch_dataset
from .utils.validators import ConfigurationError, Seq2PeakError, UsageError, ValidationError

logger = logging.getLogger("seq2peak")

COMMANDS = ("fetch", "synth", "acf", "train", "eval", "compare", "ablate", "sweep-alpha", "check-grads")


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config or run.json manifest")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="Dotted config override, value parsed as JSON (repeatable)")
    common.add_argument("--out", type=Path, help="Output directory (default: <output>/<command>)")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="Warnings and errors only")
    verbosity.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = ArgumentParser(prog="seq2peak", description="Peak-hour series forecasting experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    sub.add_parser("fetch", parents=[common], help="Download and cache the configured dataset")
    sub.add_parser("synth", parents=[common], help="Write the configured synthetic series as CSV")

    p = sub.add_parser("acf", parents=[common], help="ACF of the full and daily-peak series")
    p.add_argument("--channel", help="Channel name (default: last channel)")
    p.add_argument("--max-lag", type=int, default=96)
    p.add_argument("--plot", action="store_true")

    sub.add_parser("train", parents=[common], help="Train the configured paradigm once")

    p = sub.add_parser("eval", parents=[common], help="Evaluate a saved checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)

    for name, text in (
        ("compare", "Compare the configured paradigms"),
        ("ablate", "Four-row module ablation"),
        ("sweep-alpha", "Hybrid-loss weight sweep"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="Worker processes (default: logical cores)")
        p.add_argument("--plot", action="store_true")
        if name == "sweep-alpha":
            p.add_argument("--alphas", type=float, nargs="+", help="Override config alphas")

    p = sub.add_parser("check-grads", parents=[common], help="Finite-difference gradient check")
    p.add_argument("--seed", type=int, default=0)
    return parser


def configure_logging(args):
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def git_version():
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5, cwd=Path(__file__).parent,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(out_dir, command, config):
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "version": git_version(), "config": config.to_dict()}
    path = out_dir / "run.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def print_summary(title, table):
    print(f"\n{title}")
    print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))


def cmd_fetch(args, config, out_dir):
    ds = config.dataset
    if ds.name is None:
        raise UsageError("fetch needs dataset.name (a registry name or a name plus url)")
    path = fetch_dataset(ds.name, ds.url, ds.cache_dir, ds.sha256)
    print(f"{ds.name}: {path}")


def cmd_synth(args, config, out_dir, data):
    path = out_dir / "synthetic.csv"
    data.to_csv(path)
    print(f"Wrote {len(data)} rows x {data.n_channels} channels to {path}")


def cmd_acf(args, config, out_dir, result):
    channel = result["channel"]
    result["full"].to_csv(out_dir / "acf_full.csv", index=False)
    result["peak"].to_csv(out_dir / "acf_peak.csv", index=False)
    if args.plot:
        from .analysis.plots import plot_acf_comparison
        plot_acf_comparison(result["full"], result["peak"], out_dir / "acf.png", channel)
    print(f"{channel}: full-series r(24h) = {result['full_r24']:.4f}, "
          f"peak-series r(1d) = {result['peak_r1']:.4f}")


def cmd_train(args, config, out_dir, data):
    _, result, report = experiments.train_single(config, out_dir, data, progress=not args.quiet)
    print(f"Best epoch {result.best_epoch} (val peak MSE {result.best_val_peak_mse:.4f})")
    print_summary("Test peak metrics", report.to_frame())


def cmd_eval(args, config, out_dir, data):
    report = experiments.evaluate_checkpoint(config, args.checkpoint, out_dir, data)
    print_summary("Test peak metrics", report.to_frame())


def cmd_compare(args, config, out_dir, data):
    rows, summary, traces = experiments.run_paradigm_comparison(
        config, out_dir, data, jobs=args.jobs, progress=not args.quiet
    )
    if args.plot and traces:
        from .analysis.plots import plot_traces
        plot_traces(traces, out_dir / "traces.png")
    print_summary("Paradigm comparison (mean over seeds)", summary)
    return _failed(rows)


def cmd_ablate(args, config, out_dir, data):
    rows, summary = experiments.run_ablation(config, out_dir, data, jobs=args.jobs, progress=not args.quiet)
    print_summary("Ablation (mean over seeds)", summary)
    return _failed(rows)


def cmd_sweep(args, config, out_dir, data):
    curve, rows = experiments.run_alpha_sweep(
        config, out_dir, args.alphas, data, jobs=args.jobs, progress=not args.quiet
    )
    if args.plot and len(curve):
        from .analysis.plots import plot_alpha_curve
        plot_alpha_curve(curve, out_dir / "alpha_sweep.png")
    print_summary("Alpha sweep (mean over seeds)", curve)
    return _failed(rows)


def _failed(rows):
    failed = rows[rows["error"].notna()]
    if len(failed) == len(rows):
        logger.error("Every experiment cell failed")
        return 2
    return 0


def cmd_check_grads(args, config, out_dir):
    passed, results = run_gradient_suite(seed=args.seed)
    (out_dir / "gradcheck.json").write_text(
        json.dumps({"seed": args.seed, "passed": passed, "checks": results}, indent=2) + "\n",
        encoding="utf-8",
    )
    worst = max(r["max_rel_error"] for r in results)
    print(f"Gradient check {'PASSED' if passed else 'FAILED'}: "
          f"{len(results)} pipelines, max rel error {worst:.2e}")
    return 0 if passed else 2


def check_buildable(args, config, n_channels):
    """Build the pipelines a command will train so that bad settings fail before any output."""
    if args.command in ("train", "eval"):
        experiments.build_from_config(config, n_channels)
        return
    cells = {
        "compare": lambda: experiments.paradigm_cells(config),
        "ablate": lambda: experiments.ablation_cells(config),
        "sweep-alpha": lambda: experiments.alpha_cells(config, args.alphas),
    }[args.command]()
    experiments.preflight(config, cells, n_channels)


def run(args):
    config = load_config(args.config, args.set)
    out_dir = args.out or Path(config.output) / args.command

    if args.command == "fetch":
        write_manifest(out_dir, args.command, config)
        return cmd_fetch(args, config, out_dir) or 0
    if args.command == "check-grads":
        write_manifest(out_dir, args.command, config)
        return cmd_check_grads(args, config, out_dir)

    # Inputs are loaded and validated before anything is written
    if args.command == "synth":
        if config.dataset.synthetic is None:
            raise ConfigurationError("synth needs dataset.synthetic in the config")
        data = experiments.load_series(config.dataset)
    elif args.command == "acf":
        frame = experiments.load_series(config.dataset)
        channel = args.channel or frame.channel_names[-1]
        data = {**compare_full_vs_peak(frame, channel, args.max_lag), "channel": channel}
    else:
        if args.command == "eval" and not args.checkpoint.is_file():
            raise UsageError(f"Checkpoint not found: {args.checkpoint}")
        data = experiments.prepare_data(config)
        check_buildable(args, config, data.n_channels)

    write_manifest(out_dir, args.command, config)
    handler = {
        "synth": cmd_synth,
        "acf": cmd_acf,
        "train": cmd_train,
        "eval": cmd_eval,
        "compare": cmd_compare,
        "ablate": cmd_ablate,
        "sweep-alpha": cmd_sweep,
    }[args.command]
    return handler(args, config, out_dir, data) or 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1

    configure_logging(args)
    try:
        return run(args)
    except ValidationError as e:
        logger.error("%s", e)
        return 1
    except Seq2PeakError as e:
        logger.error("%s", e)
        return 2
    except KeyboardInterrupt:
        logger.error("Interrupted")
        return 2


if __name__ == "__main__":
    sys.exit(main())
