from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .data.dataset import DEFAULT_CLASS_DIRS, RELEASED_IMAGE_SIZE, ClassLabel
from .data.manifest import SplitSpec
from .data.preprocess import AugmentationConfig, PreprocessConfig
from .errors import ConfigError
from .knn.classifier import KnnConfig
from .models.backbone import ModelConfig
from .training.trainer import TrainConfig

logger = logging.getLogger(__name__)

SEED_ENV = "MORPHOCLASS_SEED"
DEFAULT_SEED = 42
RESOLVED_CONFIG_NAME = "resolved_config.json"


@dataclass(slots=True)
class DataConfig:
    root: str = "data"
    class_dirs: dict[str, str] = field(
        default_factory=lambda: {label.slug: d for label, d in DEFAULT_CLASS_DIRS.items()}
    )
    expected_size: list[int] | None = field(default_factory=lambda: list(RELEASED_IMAGE_SIZE))

    def class_dir_map(self) -> dict[ClassLabel, str]:
        return {ClassLabel.from_slug(slug): d for slug, d in self.class_dirs.items()}

    def size_guard(self) -> tuple[int, int] | None:
        if self.expected_size is None:
            return None
        if len(self.expected_size) != 2:
            raise ConfigError(f"expected_size must be [width, height], got {self.expected_size}")
        return int(self.expected_size[0]), int(self.expected_size[1])


@dataclass(slots=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    manifest: str | None = None
    split: SplitSpec = field(default_factory=SplitSpec)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    knn: KnnConfig = field(default_factory=KnnConfig)
    out_dir: str = "runs/default"
    seed: int = DEFAULT_SEED
    paper_mode: bool = False
    num_workers: int = 0
    device: str = "cpu"

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir).expanduser()

    @property
    def manifest_path(self) -> Path:
        if self.manifest:
            return Path(self.manifest).expanduser()
        return self.out_path / "manifest.csv"

    @property
    def data_root(self) -> Path:
        return Path(self.data.root).expanduser()

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "RunConfig":
        preprocess = dict(data["preprocess"])
        preprocess["augmentation"] = AugmentationConfig(**preprocess["augmentation"])
        preprocess["mean"] = tuple(preprocess["mean"])
        preprocess["std"] = tuple(preprocess["std"])
        return cls(
            data=DataConfig(**data["data"]),
            manifest=data["manifest"],
            split=SplitSpec(**data["split"]),
            preprocess=PreprocessConfig(**preprocess),
            model=ModelConfig(**data["model"]),
            train=TrainConfig(**data["train"]),
            knn=KnnConfig(**data["knn"]),
            out_dir=data["out_dir"],
            seed=int(data["seed"]),
            paper_mode=bool(data["paper_mode"]),
            num_workers=int(data["num_workers"]),
            device=data["device"],
        )


def _default() -> dict[str, Any]:
    return RunConfig().to_json()


_FREE_FORM = {("data", "class_dirs")}


def _merge(base: dict[str, Any], override: dict[str, Any], trail: tuple[str, ...] = ()) -> None:
    for key, value in override.items():
        path = trail + (key,)
        if key not in base:
            raise ConfigError(f"Unknown config key: {'.'.join(path)}")
        if isinstance(base[key], dict) and path not in _FREE_FORM:
            if not isinstance(value, dict):
                raise ConfigError(f"Config key {'.'.join(path)} must be an object")
            _merge(base[key], value, path)
        else:
            base[key] = value


def load_config_file(path: str | Path) -> dict[str, Any]:
    src = Path(path).expanduser()
    if not src.is_file():
        raise ConfigError(f"Config file not found: {src}")
    try:
        content = json.loads(src.read_text(encoding="utf-8") or "{}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{src} is not valid JSON: {exc}") from exc
    if not isinstance(content, dict):
        raise ConfigError(f"{src} must contain a JSON object")
    return content


def _recipe_pins() -> dict[tuple[str, str], Any]:
    train = TrainConfig()
    return {
        ("train", "learning_rate"): train.learning_rate,
        ("train", "momentum"): train.momentum,
        ("train", "weight_decay"): train.weight_decay,
        ("train", "batch_size"): train.batch_size,
        ("train", "max_epochs"): train.max_epochs,
        ("train", "early_stop_patience"): train.early_stop_patience,
        ("model", "embedding_dim"): 128,
        ("knn", "k"): 5,
        ("knn", "metric"): "euclidean",
    }


def _pin_recipe_values(data: dict[str, Any]) -> None:
    for (section, key), value in _recipe_pins().items():
        if data[section][key] != value:
            logger.warning(
                "--paper-mode pins %s.%s=%r (ignoring %r)", section, key, value, data[section][key]
            )
            data[section][key] = value
    data["preprocess"]["augmentation"]["enabled"] = False


def resolve_config(
    config_file: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
    environ: dict[str, str] | None = None,
) -> RunConfig:
    """Built-in defaults < config file < flags; the seed falls back to MORPHOCLASS_SEED.

    `overrides` maps dotted keys (e.g. "train.learning_rate") to flag values;
    None values are treated as "flag not given".
    """
    environ = os.environ if environ is None else environ
    data = _default()
    file_values = load_config_file(config_file) if config_file else {}
    _merge(data, file_values)

    flags = {k: v for k, v in (overrides or {}).items() if v is not None}
    for dotted, value in flags.items():
        _merge(data, _nest(dotted.split("."), value))

    if "seed" not in flags and "seed" not in file_values and environ.get(SEED_ENV):
        try:
            data["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {environ[SEED_ENV]!r}") from None

    # One seed governs the split, the training order and the augmentation draws.
    data["split"]["seed"] = data["seed"]
    data["train"]["seed"] = data["seed"]

    if data["paper_mode"]:
        _pin_recipe_values(data)

    train = data["train"]
    patience_given = "train.early_stop_patience" in flags or "early_stop_patience" in file_values.get(
        "train", {}
    )
    if not patience_given and train["early_stop_patience"] > train["max_epochs"]:
        logger.info("Clipping early-stop patience to max_epochs=%d", train["max_epochs"])
        train["early_stop_patience"] = train["max_epochs"]

    return RunConfig.from_json(data)


def _nest(keys: list[str], value: Any) -> dict[str, Any]:
    out: dict[str, Any] = {keys[-1]: value}
    for key in reversed(keys[:-1]):
        out = {key: out}
    return out


def write_resolved_config(config: RunConfig, out_dir: str | Path | None = None) -> Path:
    target = Path(out_dir) if out_dir is not None else config.out_path
    target.mkdir(parents=True, exist_ok=True)
    out = target / RESOLVED_CONFIG_NAME
    out.write_text(json.dumps(config.to_json(), indent=2, sort_keys=True), encoding="utf-8")
    return out
