from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..data.dataset import ClassLabel  # noqa: E402
from ..errors import EvaluationError  # noqa: E402
from .metrics import ConfusionMatrix  # noqa: E402

PANEL_INCHES = 4.0
DPI = 100


def _draw_panel(ax, cm: ConfusionMatrix, names: Sequence[str], title: str) -> None:
    counts = cm.counts
    ax.imshow(counts, cmap="Blues", vmin=0, vmax=max(1, int(counts.max())))
    threshold = counts.max() / 2.0
    for (row, col), value in np.ndenumerate(counts):
        ax.text(
            col,
            row,
            str(int(value)),
            ha="center",
            va="center",
            color="white" if value > threshold else "black",
        )
    ticks = range(cm.num_classes)
    ax.set_xticks(list(ticks), labels=list(names), rotation=45, ha="right")
    ax.set_yticks(list(ticks), labels=list(names))
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    if title:
        ax.set_title(title)


def render_confusion_plot(
    matrices: ConfusionMatrix | Sequence[ConfusionMatrix],
    output_path: str | Path,
    class_names: Sequence[str] | None = None,
    titles: Sequence[str] | None = None,
) -> Path:
    """Heatmap per matrix; several matrices share one figure laid out on a grid."""
    panels = [matrices] if isinstance(matrices, ConfusionMatrix) else list(matrices)
    if not panels:
        raise EvaluationError("No confusion matrices to plot")
    names = list(class_names or [label.display_name for label in ClassLabel])
    for cm in panels:
        if cm.num_classes != len(names):
            raise EvaluationError(
                f"{cm.num_classes}x{cm.num_classes} matrix but {len(names)} class names"
            )
    titles = list(titles or [""] * len(panels))

    columns = 1 if len(panels) == 1 else 2
    rows = math.ceil(len(panels) / columns)
    fig, axes = plt.subplots(
        rows,
        columns,
        figsize=(PANEL_INCHES * columns, PANEL_INCHES * rows),
        dpi=DPI,
        squeeze=False,
    )
    try:
        for ax, cm, title in zip(axes.flat, panels, titles):
            _draw_panel(ax, cm, names, title)
        for ax in list(axes.flat)[len(panels):]:
            ax.axis("off")
        fig.tight_layout()

        out = Path(output_path)
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(out, format="png", dpi=DPI)
        except OSError as exc:
            raise EvaluationError(f"Cannot write plot to {out}: {exc}") from exc
    finally:
        plt.close(fig)
    return out
