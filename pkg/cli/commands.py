"""
Argument parser construction for the ``scef`` command.

Subcommands: analyze, train, compress, complexity, verify-bound, trajectory,
experiment.  Parser errors raise :class:`UsageError` (exit code 1) instead of
argparse's default exit.
"""

import argparse

from core import __version__
from core.errors import UsageError
from core.schedules import DEFAULT_GAMMA

DECAY_CHOICES = ("none", "linear", "log")
FORMAT_CHOICES = ("json", "csv")


class ScefArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as exceptions."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    """Build the complete ``scef`` parser."""
    parser = ScefArgumentParser(
        prog="scef",
        description="Separable convolutional eigen-filter (SCEF) toolkit: "
                    "rank analysis, complexity, compression and training.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log more (-v info, -vv debug) to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=ScefArgumentParser)
    sub.required = True

    _build_analyze(sub)
    _build_train(sub)
    _build_compress(sub)
    _build_complexity(sub)
    _build_verify_bound(sub)
    _build_trajectory(sub)
    _build_experiment(sub)
    return parser


# ------------------------------------------------------------------
# Shared flags
# ------------------------------------------------------------------

def _add_gamma(p, default=DEFAULT_GAMMA):
    p.add_argument("--gamma", type=float, default=default,
                   help=f"singular value threshold (default {DEFAULT_GAMMA})")


def _add_output(p, formats=FORMAT_CHOICES, default="json"):
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=formats, default=default)


def _add_seed(p):
    p.add_argument("--seed", type=int, help="override the configured seed")


def _add_rank_decay(p, help_text="override the config's rank decay"):
    p.add_argument("--rank-decay", choices=DECAY_CHOICES, help=help_text)


# ------------------------------------------------------------------
# Subcommands
# ------------------------------------------------------------------

def _build_analyze(sub):
    p = sub.add_parser("analyze", help="effective ranks of every h > 1 layer")
    p.add_argument("--weights", required=True, help="checkpoint (.ckpt) or .npz of filter banks")
    _add_gamma(p)
    _add_output(p)


def _build_train(sub):
    p = sub.add_parser("train", help="train a network from a JSON config")
    p.add_argument("config", help='JSON file with {"network": ..., "train": ...}')
    p.add_argument("--out", required=True, help="run directory for checkpoints and metrics.csv")
    p.add_argument("--epochs", type=int, help="override the number of epochs")
    p.add_argument("--track-ranks", action="store_true", help="log per-layer effective ranks each epoch")
    _add_seed(p)
    _add_rank_decay(p)
    _add_gamma(p, default=None)


def _build_compress(sub):
    p = sub.add_parser("compress", help="convert Conv2D layers to SCEF by truncated SVD")
    p.add_argument("--weights", required=True, help="checkpoint (.ckpt) or .npz of filter banks")
    p.add_argument("--out", required=True, help="compressed checkpoint / .npz to write")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--rank", type=int, help="same rank for every layer (clamped to min(K, c_out))")
    mode.add_argument("--rank-decay", choices=("linear", "log"), help="rank schedule over depth")
    mode.add_argument("--error-budget", type=float, help="largest relative reconstruction error")
    p.add_argument("--report", help="write the JSON compression report here (default stdout)")


def _build_complexity(sub):
    p = sub.add_parser("complexity", help="parameter and FLOP table of a config")
    p.add_argument("config", help="JSON network config (or a run config with a 'network' key)")
    p.add_argument("--mult-add", action="store_true", help="count multiply and add separately")
    _add_rank_decay(p)
    _add_output(p, formats=("table", "json", "csv"), default="table")


def _build_verify_bound(sub):
    p = sub.add_parser("verify-bound", help="Monte-Carlo check of the SCEF perturbation bound")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--weights", help="checkpoint holding SCEF layers")
    src.add_argument("--config", help="config whose SCEF layers are initialised and checked")
    p.add_argument("--layer", type=int, help="only this layer index")
    p.add_argument("--epsilon", type=float,
                   help="coefficient-norm bound (default: the layer's largest coefficient norm)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--scale", type=float, default=1.0, help="perturbation standard deviation")
    p.add_argument("--image-size", type=int, default=8, help="side of the square perturbations")
    p.add_argument("--seed", type=int, default=0)
    _add_output(p)


def _build_trajectory(sub):
    p = sub.add_parser("trajectory", help="effective rank per layer across checkpoints")
    p.add_argument("checkpoints", nargs="+", help="checkpoint files or glob patterns")
    _add_gamma(p)
    _add_output(p)


def _build_experiment(sub):
    p = sub.add_parser("experiment", help="train and compare Conv2D / SCEF variants")
    p.add_argument("config", help='JSON file with {"network": ..., "train": ...}')
    p.add_argument("--variants", nargs="+", default=None,
                   help="conv2d scef scef-frozen scef-no-phi1 rank=R c_out=N decay=D (default: the first four)")
    p.add_argument("--ranks", type=int, nargs="+", default=(), help="add a rank=R variant per value")
    p.add_argument("--widths", type=int, nargs="+", default=(), help="add a c_out=N variant per value")
    p.add_argument("--rank-decays", nargs="+", choices=DECAY_CHOICES, default=(),
                   help="add a decay=D variant per value")
    p.add_argument("--epochs", type=int, help="override the number of epochs")
    p.add_argument("--run-dir", help="keep per-variant checkpoints and metrics here")
    _add_seed(p)
    _add_output(p)
