from __future__ import annotations

import argparse
import json

from ..config import RunConfig
from ..data.dataset import Split
from ..evaluation.evaluate import evaluate_fc, evaluate_knn
from ..evaluation.metrics import compute_metrics, format_report, write_metrics
from ..evaluation.plots import render_confusion_plot
from ..models.backbone import freeze_backbone
from ..models.checkpoint import file_hash
from .common import ArtifactTracker, echo_config, load_run_manifest, load_trained_model


def cmd_eval(config: RunConfig, args: argparse.Namespace) -> int:
    strategy = config.model.strategy
    with ArtifactTracker() as tracker:
        echo_config(config, tracker)
        manifest = load_run_manifest(config)
        model, checkpoint, ckpt_path = load_trained_model(config, args.checkpoint)
        freeze_backbone(model)
        tag = checkpoint.model_config.tag
        test = manifest.by_split(Split.TEST)

        neighbors = None
        if strategy == "knn":
            index_records = manifest.by_split(Split.TRAIN)
            if config.knn.include_val:
                index_records += manifest.by_split(Split.VAL)
            cm, prediction = evaluate_knn(
                model,
                manifest,
                index_records,
                test,
                config.preprocess,
                config.knn,
                config.train.batch_size,
                config.num_workers,
            )
            neighbors = [
                {"query": str(record.image_path), **report.to_json()}
                for record, report in zip(test, prediction.neighbors)
            ]
        else:
            cm = evaluate_fc(
                model, manifest, test, config.preprocess, config.train.batch_size, config.num_workers
            )

        report = compute_metrics(cm, model_tag=tag, eval_strategy=strategy)
        report.seed = config.seed
        report.checkpoint_hash = file_hash(ckpt_path)

        out = config.out_path
        tracker.add(write_metrics(report, out / f"metrics_{tag}_{strategy}.json"))
        tracker.add(
            render_confusion_plot(cm, out / f"confusion_{tag}_{strategy}.png", titles=[f"{tag} ({strategy})"])
        )
        if neighbors is not None:
            path = tracker.add(out / f"neighbors_{tag}.json")
            path.write_text(json.dumps(neighbors, indent=2), encoding="utf-8")
        tracker.verify()

    print(format_report(report))
    return 0
