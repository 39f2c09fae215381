from __future__ import annotations

import argparse
from pathlib import Path

from ..config import RunConfig
from ..errors import EvaluationError
from ..evaluation.ablation import TABLE_VARIANTS
from ..evaluation.metrics import read_metrics
from ..evaluation.plots import render_confusion_plot
from .common import ArtifactTracker, echo_config

_TABLE_ORDER = {v.name: i for i, v in enumerate(TABLE_VARIANTS)}


def cmd_plot(config: RunConfig, args: argparse.Namespace) -> int:
    out = config.out_path
    paths = [Path(p).expanduser() for p in args.metrics] if args.metrics else sorted(out.glob("metrics_*.json"))
    if not paths:
        raise EvaluationError(f"No metrics files given and none found in {out}")

    reports = [read_metrics(p) for p in paths]
    missing = [str(p) for p, r in zip(paths, reports) if r.confusion is None]
    if missing:
        raise EvaluationError(f"Metrics files without a confusion matrix: {', '.join(missing)}")
    reports.sort(key=lambda r: (_TABLE_ORDER.get(r.model_tag, len(_TABLE_ORDER)), r.model_tag, r.eval_strategy))

    with ArtifactTracker() as tracker:
        echo_config(config, tracker)
        target = tracker.add(
            render_confusion_plot(
                [r.confusion for r in reports],
                out / "confusion_matrices.png",
                titles=[f"{r.model_tag} ({r.eval_strategy})" for r in reports],
            )
        )
        tracker.verify()
    print(f"Confusion matrices for {len(reports)} model(s) written to {target}")
    return 0
