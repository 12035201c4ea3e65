"""
Command dispatcher for the ``scef`` command.

``cli_main(argv)`` parses the command line, configures logging, runs one
subcommand and maps library exceptions to exit codes:

* 0 success
* 1 usage error
* 2 data, format, configuration or precondition error
* 3 numeric failure (non-finite values, divergence)
"""

import glob
import json
from pathlib import Path

import numpy as np
import structlog

from cli import reports
from cli.commands import build_parser
from cli.console import print_error, print_header, print_step, print_success, print_warning
from core.checkpoint import load_checkpoint, load_filter_banks, save_checkpoint, save_scef_banks
from core.complexity import network_summary
from core.compressor import METHOD, CompressionMode, compress_banks, compress_network
from core.errors import ConfigError, FormatError, PreconditionError, ScefError, UsageError
from core.experiments import VARIANTS, parse_variant, run_experiment
from core.network import NetworkConfig, build_network
from core.rank_analysis import (
    RobustnessCheckConfig,
    analyze_network,
    rank_trajectory,
    scef_params_of,
    verify_robustness_bound,
)
from core.trainer import TrainConfig, load_dataset, train, write_metrics_csv
from core.utilities import configure_logging

log = structlog.get_logger(__name__)


# ------------------------------------------------------------------
# Config files
# ------------------------------------------------------------------

def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise FormatError("no such file", str(path))
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"invalid JSON ({e})", str(path)) from e


def load_run_config(path):
    """``(NetworkConfig, TrainConfig)`` from a run config.

    A file without a ``"network"`` key is read as a bare network config with
    default training settings.
    """
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if "network" in data:
        unknown = set(data) - {"network", "train"}
        if unknown:
            raise ConfigError(f"{path}: unknown top-level keys {sorted(unknown)}")
        return NetworkConfig.from_dict(data["network"]), TrainConfig.from_dict(data.get("train", {}))
    return NetworkConfig.from_dict(data), TrainConfig()


def _apply_decay(config, rank_decay):
    return config if rank_decay is None else config.with_overrides(rank_decay=rank_decay)


# ------------------------------------------------------------------
# Subcommand handlers
# ------------------------------------------------------------------

def cmd_analyze(args):
    analysis = analyze_network(args.weights, args.gamma)
    text = reports.to_json(analysis.to_dict()) if args.format == "json" else reports.analysis_csv(analysis)
    reports.emit(text, args.out)
    ranks = ", ".join(f"{name}={rank}" for name, rank in analysis.layer_ranks.items())
    print_success(f"analysed {len(analysis.reports)} layer(s) at gamma={args.gamma}: {ranks}")
    return 0


def cmd_train(args):
    net_cfg, train_cfg = load_run_config(args.config)
    net_cfg = _apply_decay(net_cfg, args.rank_decay)
    train_cfg = train_cfg.with_overrides(
        seed=args.seed, epochs=args.epochs, gamma=args.gamma,
        track_ranks=True if args.track_ranks else None,
    )
    out = Path(args.out)
    print_header(f"Training {net_cfg.name}")
    print_step(1, 3, "Loading dataset")
    dataset = load_dataset(train_cfg.dataset, train_cfg.seed)
    print_step(2, 3, "Building network")
    net = build_network(net_cfg, train_cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    run_config = {"network": net.config.to_dict(), "train": train_cfg.to_dict()}
    (out / "config.json").write_text(json.dumps(run_config, indent=2) + "\n", encoding="utf-8")

    print_step(3, 3, f"Training {train_cfg.epochs} epoch(s)")
    result = train(net, train_cfg, dataset, checkpoint_dir=out)
    write_metrics_csv(out / "metrics.csv", result.metrics)
    final = result.final
    print_success(
        f"train acc {reports.format_accuracy(final.train_acc)}, "
        f"val acc {reports.format_accuracy(final.val_acc)}, "
        f"{len(result.checkpoints)} checkpoint(s) in {out}"
    )
    return 0


def _compression_payload(layer_reports):
    return {
        "schema": 1,
        "method": METHOD,
        "layers": [r.to_dict() for r in layer_reports],
        "totals": {
            "params_before": sum(r.params_before for r in layer_reports),
            "params_after": sum(r.params_after for r in layer_reports),
        },
    }


def cmd_compress(args):
    mode = CompressionMode(rank=args.rank, rank_decay=args.rank_decay, error_budget=args.error_budget)
    if Path(args.weights).suffix == ".npz":
        results = compress_banks(load_filter_banks(args.weights), mode)
        save_scef_banks(args.out, {name: params for name, params, _ in results})
        layer_reports = [report for _, _, report in results]
    else:
        compressed, layer_reports = compress_network(load_checkpoint(args.weights), mode)
        save_checkpoint(args.out, compressed)
    reports.emit(reports.to_json(_compression_payload(layer_reports)), args.report)
    print_success(f"compressed {len(layer_reports)} layer(s) into {args.out}")
    return 0


def cmd_complexity(args):
    net_cfg, _ = load_run_config(args.config)
    summary = network_summary(_apply_decay(net_cfg, args.rank_decay), mult_add=args.mult_add)
    if args.format == "json":
        text = reports.to_json(summary.to_dict())
    elif args.format == "csv":
        text = reports.complexity_csv(summary)
    else:
        text = reports.complexity_table(summary)
    reports.emit(text, args.out)
    return 0


def cmd_verify_bound(args):
    if args.weights:
        layers = scef_params_of(args.weights)
    else:
        net_cfg, _ = load_run_config(args.config)
        net = build_network(net_cfg, args.seed)
        layers = [(f"layer{idx}", layer.params) for idx, layer in net.scef_layers()]
    if args.layer is not None:
        layers = [(name, p) for name, p in layers if name == f"layer{args.layer}"]
    if not layers:
        raise PreconditionError("no SCEF layers to check")

    results = []
    for name, params in layers:
        epsilon = args.epsilon
        if epsilon is None:
            epsilon = float(np.max(np.linalg.norm(params.coefficients, axis=2)))
        cfg = RobustnessCheckConfig(epsilon, args.trials, args.scale, (args.image_size, args.image_size))
        report = verify_robustness_bound(params, cfg, args.seed)
        results.append({"layer": name, **report.to_dict()})
        if report.violations:
            print_warning(f"{name}: {report.violations} of {report.trials} trials violate the bound")

    if args.format == "json":
        text = reports.to_json({"schema": 1, "layers": results})
    else:
        header = ["layer", "trials", "violations", "max_ratio", "epsilon"]
        text = reports.to_csv(header, [[r[k] for k in header] for r in results])
    reports.emit(text, args.out)
    print_success(f"checked {len(results)} layer(s), {args.trials} trial(s) each")
    return 0


def expand_checkpoints(patterns):
    paths = []
    for pattern in patterns:
        matches = sorted(glob.glob(pattern))
        if not matches:
            raise FormatError("no checkpoint matches", pattern)
        paths.extend(matches)
    return paths


def cmd_trajectory(args):
    checkpoints = [load_checkpoint(p) for p in expand_checkpoints(args.checkpoints)]
    checkpoints.sort(key=lambda c: c.epoch)
    trajectory = rank_trajectory(checkpoints, args.gamma)
    text = reports.to_json(trajectory.to_dict()) if args.format == "json" else reports.trajectory_csv(trajectory)
    reports.emit(text, args.out)
    print_success(
        f"{len(trajectory.converged)} of {len(trajectory.layers)} layer(s) constant over the last "
        f"{trajectory.window} checkpoint(s)"
    )
    return 0


def cmd_experiment(args):
    net_cfg, train_cfg = load_run_config(args.config)
    train_cfg = train_cfg.with_overrides(seed=args.seed, epochs=args.epochs)
    variants = [
        *(args.variants or VARIANTS),
        *(f"rank={r}" for r in args.ranks),
        *(f"c_out={n}" for n in args.widths),
        *(f"decay={d}" for d in args.rank_decays),
    ]
    for variant in variants:
        parse_variant(variant)
    print_header(f"Experiment on {net_cfg.name}")
    dataset = load_dataset(train_cfg.dataset, train_cfg.seed)
    result = run_experiment(net_cfg, train_cfg, dataset, variants, out_dir=args.run_dir)
    text = reports.to_json(result.to_dict()) if args.format == "json" else reports.experiment_csv(result)
    reports.emit(text, args.out)
    for row in result.rows:
        print_success(
            f"{row.variant:>14}: val {reports.format_accuracy(row.val_acc)}, "
            f"{row.trainable_params} params, max defect {row.max_defect:.4f}"
        )
    return 0


HANDLERS = {
    "analyze": cmd_analyze,
    "train": cmd_train,
    "compress": cmd_compress,
    "complexity": cmd_complexity,
    "verify-bound": cmd_verify_bound,
    "trajectory": cmd_trajectory,
    "experiment": cmd_experiment,
}


def cli_main(argv=None):
    """Run the ``scef`` command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print_error(str(e))
        return e.exit_code
    except SystemExit as e:
        # --help / --version
        return e.code if isinstance(e.code, int) else 0

    configure_logging(args.verbose)
    try:
        return HANDLERS[args.command](args)
    except ScefError as e:
        print_error(str(e))
        log.debug("command failed", command=args.command, error=type(e).__name__)
        return e.exit_code
    except OSError as e:
        print_error(str(e))
        return 2
