"""Manifests, configuration, bundles, the end-to-end pipeline and the CLI."""

from .bundle import ModelBundle, load_bundle, save_bundle
from .config import PipelineConfig
from .manifest import DatasetManifest, load_manifest, split_dataset
from .pipeline import RunReport, detect, emit_report, load_report, run_pipeline

__all__ = [
    "DatasetManifest", "ModelBundle", "PipelineConfig", "RunReport", "detect", "emit_report", "load_bundle",
    "load_manifest", "load_report", "run_pipeline", "save_bundle", "split_dataset",
]
