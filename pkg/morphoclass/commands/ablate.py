from __future__ import annotations

import argparse
import json
from dataclasses import replace

from ..config import RunConfig
from ..evaluation.ablation import TABLE_VARIANTS, format_ablation_table, run_ablation
from ..evaluation.metrics import write_metrics
from .common import ArtifactTracker, echo_config, load_run_manifest, resolve_device


def cmd_ablate(config: RunConfig, args: argparse.Namespace) -> int:
    out = config.out_path
    checkpoint_dir = out / "checkpoints"
    with ArtifactTracker() as tracker:
        echo_config(config, tracker)
        manifest = load_run_manifest(config)
        device = resolve_device(config)

        result = run_ablation(
            manifest,
            config.train,
            config.preprocess,
            config.model,
            config.knn,
            TABLE_VARIANTS,
            checkpoint_dir=checkpoint_dir,
            num_workers=config.num_workers,
            device=str(device),
            on_artifact=tracker.add,
        )

        for entry in result.entries:
            tracker.add(write_metrics(entry.report, out / f"metrics_{entry.variant.slug}.json"))

        table = format_ablation_table(result.entries)
        table_path = tracker.add(out / "ablation_table.txt")
        table_path.write_text(table + "\n", encoding="utf-8")

        summary = {
            "seed": config.seed,
            "include_val": config.knn.include_val,
            "variants": [
                {"name": e.variant.name, "use_cbam": e.variant.use_cbam, **e.report.to_json()}
                for e in result.entries
            ],
            "best_epochs": {
                replace(config.model, use_cbam=k).tag: fit.best_epoch for k, fit in result.fits.items()
            },
        }
        json_path = tracker.add(out / "ablation.json")
        json_path.write_text(json.dumps(summary, indent=2), encoding="utf-8")
        tracker.verify()

    print(table)
    return 0
