"""Four-variant comparison: {ResNet-50, ResNet-50 + CBAM} x {FC head, k-NN head}.

Each backbone is fine-tuned once with the FC head; the k-NN variants reuse
that checkpoint, drop the final 128 -> 4 layer and classify test embeddings
against the training-split index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from ..data.dataset import Manifest, Split
from ..data.preprocess import PreprocessConfig
from ..knn.classifier import KnnConfig
from ..models.backbone import ModelConfig, TaxolNet, build_model, freeze_backbone
from ..models.checkpoint import file_hash, save_checkpoint
from ..training.trainer import FitResult, TrainConfig, fit, seed_everything, write_training_log
from .evaluate import evaluate_fc, evaluate_knn
from .metrics import ConfusionMatrix, MetricsReport, compute_metrics

logger = logging.getLogger(__name__)


@dataclass(slots=True, frozen=True)
class Variant:
    name: str
    use_cbam: bool
    strategy: str

    @property
    def slug(self) -> str:
        return self.name.lower().replace("+", "_").replace("-", "_")


TABLE_VARIANTS: tuple[Variant, ...] = (
    Variant("ResAttention-KNN", use_cbam=True, strategy="knn"),
    Variant("ResNet+CBAM", use_cbam=True, strategy="fc"),
    Variant("ResNet", use_cbam=False, strategy="fc"),
    Variant("ResNet+KNN", use_cbam=False, strategy="knn"),
)


@dataclass(slots=True)
class AblationEntry:
    variant: Variant
    report: MetricsReport
    confusion: ConfusionMatrix


@dataclass(slots=True)
class AblationResult:
    entries: list[AblationEntry]
    fits: dict[bool, FitResult]


def run_ablation(
    manifest: Manifest,
    train_config: TrainConfig,
    preprocess: PreprocessConfig | None = None,
    model_config: ModelConfig | None = None,
    knn_config: KnnConfig | None = None,
    variants: Sequence[Variant] = TABLE_VARIANTS,
    checkpoint_dir: str | Path | None = None,
    num_workers: int = 0,
    device: str = "cpu",
    model_factory: Callable[[ModelConfig], TaxolNet] | None = None,
    on_artifact: Callable[[Path], object] | None = None,
) -> AblationResult:
    """Train each backbone once and score every variant on the test split.

    `on_artifact` is called with each checkpoint or training log right after it is written.
    """
    factory = model_factory or build_model
    preprocess = preprocess or PreprocessConfig()
    model_config = model_config or ModelConfig()
    knn_config = knn_config or KnnConfig()

    train = manifest.by_split(Split.TRAIN)
    val = manifest.by_split(Split.VAL)
    test = manifest.by_split(Split.TEST)
    index_records = train + val if knn_config.include_val else train

    fits: dict[bool, FitResult] = {}
    hashes: dict[bool, str | None] = {}
    entries: list[AblationEntry] = []

    for use_cbam in dict.fromkeys(v.use_cbam for v in variants):
        config = replace(model_config, use_cbam=use_cbam)
        logger.info("Training %s", config.tag)
        # Same seed for both backbones so only the attention units differ.
        seed_everything(train_config.seed, train_config.deterministic)
        model = factory(config).to(device)
        result = fit(model, manifest, train_config, preprocess, num_workers)
        fits[use_cbam] = result
        hashes[use_cbam] = None
        if checkpoint_dir is not None:
            ckpt_path = save_checkpoint(result.checkpoint, Path(checkpoint_dir) / f"{config.tag}.pt")
            log_path = write_training_log(result.log, Path(checkpoint_dir) / f"{config.tag}_train_log.csv")
            if on_artifact is not None:
                on_artifact(ckpt_path)
                on_artifact(log_path)
            hashes[use_cbam] = file_hash(ckpt_path)

        freeze_backbone(model)
        for variant in (v for v in variants if v.use_cbam == use_cbam):
            if variant.strategy == "knn":
                cm, _ = evaluate_knn(
                    model,
                    manifest,
                    index_records,
                    test,
                    preprocess,
                    knn_config,
                    train_config.batch_size,
                    num_workers,
                )
            else:
                cm = evaluate_fc(
                    model, manifest, test, preprocess, train_config.batch_size, num_workers
                )
            report = compute_metrics(cm, model_tag=variant.name, eval_strategy=variant.strategy)
            report.seed = train_config.seed
            report.checkpoint_hash = hashes[use_cbam]
            entries.append(AblationEntry(variant, report, cm))
            logger.info("%s: accuracy %.4f macro F1 %.4f", variant.name, report.accuracy, report.macro_f1)

    order = {v: i for i, v in enumerate(variants)}
    entries.sort(key=lambda e: order[e.variant])
    return AblationResult(entries=entries, fits=fits)


def _rank_marks(values: list[float]) -> list[str]:
    distinct = sorted(set(values), reverse=True)
    best = distinct[0]
    second = distinct[1] if len(distinct) > 1 else None
    marks = []
    for value in values:
        if value == best:
            marks.append("**")
        elif value == second:
            marks.append("_")
        else:
            marks.append("")
    return marks


def format_ablation_table(entries: Sequence[AblationEntry]) -> str:
    """Aligned table; best value per column in **bold**, second best _underlined_."""
    header = ["Model", "Eval Strat", "Precision", "Recall", "F1 Score", "Acc"]
    columns = [
        [e.report.macro_precision for e in entries],
        [e.report.macro_recall for e in entries],
        [e.report.macro_f1 for e in entries],
        [e.report.accuracy for e in entries],
    ]
    marked = []
    for values in columns:
        marks = _rank_marks(values) if values else []
        marked.append([f"{m}{v:.4f}{m}" for v, m in zip(values, marks)])

    rows = [header]
    for i, entry in enumerate(entries):
        strategy = "k-NN" if entry.variant.strategy == "knn" else "FC Layer"
        rows.append([entry.variant.name, strategy] + [col[i] for col in marked])

    widths = [max(len(row[c]) for row in rows) for c in range(len(header))]
    lines = []
    for n, row in enumerate(rows):
        cells = [
            cell.ljust(widths[c]) if c < 2 else cell.rjust(widths[c]) for c, cell in enumerate(row)
        ]
        lines.append(" | ".join(cells))
        if n == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)
