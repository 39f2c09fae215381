from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from morphoclass.errors import EvaluationError
from morphoclass.evaluation.metrics import ConfusionMatrix
from morphoclass.evaluation.plots import render_confusion_plot


def _cm(seed: int) -> ConfusionMatrix:
    return ConfusionMatrix(np.random.default_rng(seed).integers(0, 16, size=(4, 4)))


def test_single_panel(tmp_path: Path):
    out = render_confusion_plot(_cm(0), tmp_path / "cm.png", titles=["ResNet (fc)"])
    assert out.is_file() and out.stat().st_size > 0
    with Image.open(out) as img:
        assert img.size == (400, 400)


def test_four_matrices_share_a_two_by_two_figure(tmp_path: Path):
    out = render_confusion_plot([_cm(i) for i in range(4)], tmp_path / "all.png")
    with Image.open(out) as img:
        assert img.size == (800, 800)


def test_rendering_dimensions_are_stable(tmp_path: Path):
    a = render_confusion_plot(_cm(3), tmp_path / "a.png")
    b = render_confusion_plot(_cm(3), tmp_path / "b.png")
    with Image.open(a) as first, Image.open(b) as second:
        assert first.size == second.size


def test_class_name_count_must_match(tmp_path: Path):
    with pytest.raises(EvaluationError):
        render_confusion_plot(_cm(1), tmp_path / "x.png", class_names=["a", "b"])
    with pytest.raises(EvaluationError):
        render_confusion_plot([], tmp_path / "x.png")


def test_unwritable_path(tmp_path: Path):
    blocker = tmp_path / "file.txt"
    blocker.write_text("occupied")
    with pytest.raises(EvaluationError, match="Cannot write plot"):
        render_confusion_plot(_cm(2), blocker / "cm.png")
