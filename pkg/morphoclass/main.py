from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Callable, Sequence

try:
    from .commands.ablate import cmd_ablate
    from .commands.embed import cmd_embed
    from .commands.evaluate import cmd_eval
    from .commands.plot import cmd_plot
    from .commands.split import cmd_split
    from .commands.synth import cmd_synth
    from .commands.train import cmd_train
    from .config import RunConfig, resolve_config
    from .errors import MorphoclassError
except ImportError:
    from morphoclass.commands.ablate import cmd_ablate
    from morphoclass.commands.embed import cmd_embed
    from morphoclass.commands.evaluate import cmd_eval
    from morphoclass.commands.plot import cmd_plot
    from morphoclass.commands.split import cmd_split
    from morphoclass.commands.synth import cmd_synth
    from morphoclass.commands.train import cmd_train
    from morphoclass.config import RunConfig, resolve_config
    from morphoclass.errors import MorphoclassError

logger = logging.getLogger("morphoclass")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

Command = Callable[[RunConfig, argparse.Namespace], int]

COMMANDS: dict[str, tuple[Command, str]] = {
    "split": (cmd_split, "scan the dataset and write a stratified, leakage-free manifest"),
    "train": (cmd_train, "fine-tune one model variant and keep the best checkpoint"),
    "embed": (cmd_embed, "write frozen-backbone embeddings for the requested splits"),
    "eval": (cmd_eval, "score a checkpoint on the test split with the FC or k-NN head"),
    "ablate": (cmd_ablate, "train both backbones and compare all four variants"),
    "plot": (cmd_plot, "render confusion-matrix panels from metrics files"),
    "synth": (cmd_synth, "write a small synthetic corpus in the dataset layout"),
}

_PLACEMENTS = {"block": "per_block", "stage": "per_stage"}
_HEADS = {"fc": "fc", "knn": "embedding_for_knn"}

# flag dest -> dotted config key
_OVERRIDES = {
    "data_root": "data.root",
    "manifest": "manifest",
    "seed": "seed",
    "val_per_class": "split.val_per_class",
    "test_per_class": "split.test_per_class",
    "use_cbam": "model.use_cbam",
    "embedding_dim": "model.embedding_dim",
    "k": "knn.k",
    "include_val": "knn.include_val",
    "lr": "train.learning_rate",
    "momentum": "train.momentum",
    "weight_decay": "train.weight_decay",
    "batch_size": "train.batch_size",
    "max_epochs": "train.max_epochs",
    "patience": "train.early_stop_patience",
    "out_dir": "out_dir",
    "paper_mode": "paper_mode",
    "image_size": "preprocess.target_side",
    "num_workers": "num_workers",
    "device": "device",
}


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--data-root", help="directory holding one sub-directory per class")
    common.add_argument("--manifest", help="manifest CSV (default: <out-dir>/manifest.csv)")
    common.add_argument("--out-dir", help="where every artifact of the run is written")
    common.add_argument("--seed", type=int, help="master seed (fallback: $MORPHOCLASS_SEED)")
    common.add_argument("--val-per-class", type=int)
    common.add_argument("--test-per-class", type=int)
    common.add_argument("--use-cbam", action=argparse.BooleanOptionalAction, default=None)
    common.add_argument("--cbam-placement", choices=sorted(_PLACEMENTS))
    common.add_argument("--embedding-dim", type=int)
    common.add_argument("--k", type=int, help="neighbours for the k-NN head")
    common.add_argument("--include-val", action="store_true", default=None,
                        help="add validation embeddings to the k-NN index")
    common.add_argument("--lr", type=float)
    common.add_argument("--momentum", type=float)
    common.add_argument("--weight-decay", type=float)
    common.add_argument("--batch-size", type=int)
    common.add_argument("--max-epochs", type=int)
    common.add_argument("--patience", type=int, help="early-stopping patience in epochs")
    common.add_argument("--paper-mode", action="store_true", default=None,
                        help="pin the published recipe and disable augmentation")
    common.add_argument("--no-size-check", action="store_true",
                        help="accept images that are not 1600x1200")
    common.add_argument("--image-size", type=int, help="side length fed to the network")
    common.add_argument("--num-workers", type=int)
    common.add_argument("--device", help="torch device, e.g. cpu or cuda:0")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphoclass",
        description="Taxol exposure classification from cell microscopy images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    commands = {
        name: sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        for name, (_, help_text) in COMMANDS.items()
    }

    commands["embed"].add_argument("--checkpoint")
    commands["embed"].add_argument("--splits", nargs="+", choices=["train", "val", "test"])
    commands["eval"].add_argument("--checkpoint")
    commands["eval"].add_argument("--strategy", choices=sorted(_HEADS),
                                  help="evaluation head (default: model.head, fc)")
    commands["plot"].add_argument("--metrics", nargs="+", help="metrics JSON files to plot")
    commands["synth"].add_argument("--per-class", type=int, default=14)
    commands["synth"].add_argument("--side", type=int, default=64)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    values = {key: getattr(args, dest, None) for dest, key in _OVERRIDES.items()}
    if args.cbam_placement:
        values["model.cbam_placement"] = _PLACEMENTS[args.cbam_placement]
    if getattr(args, "strategy", None):
        values["model.head"] = _HEADS[args.strategy]
    return values


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        stream=sys.stderr,
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    command, _ = COMMANDS[args.command]
    try:
        config = resolve_config(args.config, _overrides(args))
        if args.no_size_check:
            config.data.expected_size = None
        logger.debug("Running %s with %s", args.command, config.to_json())
        return command(config, args)
    except MorphoclassError as exc:
        print(f"morphoclass {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
