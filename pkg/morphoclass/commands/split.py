from __future__ import annotations

import argparse

from ..config import RunConfig
from ..data.dataset import scan_dataset
from ..data.manifest import split_summary, stratified_split, verify_no_leakage, write_manifest
from ..errors import DatasetError
from .common import ArtifactTracker, echo_config


def cmd_split(config: RunConfig, args: argparse.Namespace) -> int:
    with ArtifactTracker() as tracker:
        echo_config(config, tracker)
        scanned = scan_dataset(
            config.data_root, config.data.class_dir_map(), config.data.size_guard()
        )
        manifest = stratified_split(scanned, config.split)

        report = verify_no_leakage(manifest)
        print(report.describe())
        if not report.passed:
            raise DatasetError("Split failed the leakage check; manifest not written")

        tracker.add(write_manifest(manifest, config.manifest_path))
        print(split_summary(manifest))
        print(f"Manifest written to {config.manifest_path}")
        tracker.verify()
    return 0
