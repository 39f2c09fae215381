from __future__ import annotations

import argparse

from ..config import RunConfig
from ..data.synthetic import generate_synthetic_dataset
from .common import ArtifactTracker, echo_config


def cmd_synth(config: RunConfig, args: argparse.Namespace) -> int:
    with ArtifactTracker() as tracker:
        echo_config(config, tracker)
        root = generate_synthetic_dataset(
            config.data_root,
            per_class=args.per_class,
            side=args.side,
            seed=config.seed,
            class_dir_map=config.data.class_dir_map(),
        )
        tracker.verify()
    print(f"Synthetic corpus with {args.per_class} images per class written to {root}")
    print("Run `split` with --no-size-check: these images are not 1600x1200.")
    return 0
