from __future__ import annotations

import argparse

from ..config import RunConfig
from ..data.dataset import Split
from ..knn.embeddings import export_embeddings_csv, save_embeddings
from ..models.backbone import extract_embeddings, freeze_backbone
from .common import ArtifactTracker, echo_config, load_run_manifest, load_trained_model


def cmd_embed(config: RunConfig, args: argparse.Namespace) -> int:
    splits = [Split(s) for s in (args.splits or ["train", "val", "test"])]
    with ArtifactTracker() as tracker:
        echo_config(config, tracker)
        manifest = load_run_manifest(config)
        model, checkpoint, _ = load_trained_model(config, args.checkpoint)
        freeze_backbone(model)

        out_dir = config.out_path / "embeddings"
        tag = checkpoint.model_config.tag
        for split in splits:
            embeddings = extract_embeddings(
                model,
                manifest,
                manifest.by_split(split),
                config.preprocess,
                config.train.batch_size,
                config.num_workers,
            )
            npz = tracker.add(save_embeddings(embeddings, out_dir / f"{tag}_{split.value}.npz"))
            tracker.add(export_embeddings_csv(embeddings, out_dir / f"{tag}_{split.value}.csv"))
            print(f"{split.value}: {len(embeddings)} x {embeddings.dim} -> {npz}")
        tracker.verify()
    return 0
