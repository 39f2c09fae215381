from __future__ import annotations

import argparse

from ..config import RunConfig
from ..models.backbone import build_model
from ..models.checkpoint import save_checkpoint
from ..training.trainer import fit, seed_everything, write_training_log
from .common import ArtifactTracker, checkpoint_path, echo_config, load_run_manifest, resolve_device


def cmd_train(config: RunConfig, args: argparse.Namespace) -> int:
    with ArtifactTracker() as tracker:
        echo_config(config, tracker)
        manifest = load_run_manifest(config)
        device = resolve_device(config)

        seed_everything(config.seed, config.train.deterministic)
        model = build_model(config.model).to(device)
        result = fit(model, manifest, config.train, config.preprocess, config.num_workers)

        ckpt = tracker.add(save_checkpoint(result.checkpoint, checkpoint_path(config)))
        log_path = tracker.add(
            write_training_log(result.log, config.out_path / f"{config.model.tag}_train_log.csv")
        )
        tracker.verify()

    status = "early stop" if result.stopped_early else "max epochs"
    print(
        f"{config.model.tag}: {len(result.log)} epochs ({status}), best epoch "
        f"{result.best_epoch} with val loss {result.checkpoint.best_val_loss:.4f}"
    )
    print(f"Checkpoint: {ckpt}")
    print(f"Training log: {log_path}")
    return 0
