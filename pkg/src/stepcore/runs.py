"""Run directory layout, manifest, and stage bookkeeping.

A run lives under ``runs/<run-id>/`` with chains.jsonl, scores.jsonl,
labels.jsonl, per-problem binaries under influence/ and activations/,
judge transcripts under judge/, report tables under reports/, and a
manifest.json written before any stage output. Stages are
content-addressed: each completed stage records a hash of its inputs so
re-running with unchanged inputs is a no-op.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional


class RunError(Exception):
    """Run directory or manifest problems, including missing stages."""


class MissingStageError(RunError):
    def __init__(self, needed: str):
        super().__init__(f"requires stage: {needed}")
        self.needed = needed


STAGES = (
    "generate",
    "filter",
    "prefix",
    "influence",
    "core",
    "label",
    "probe",
    "baseline",
    "features",
    "crossmodel",
    "report",
)


def _canonical_hash(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def hash_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    run_id: str
    dataset_path: str
    backends: list[dict]
    metrics: dict
    variants: list[str]
    seed: int
    created_at: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S"))
    stages: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        """Identity of the run configuration; stable across stage updates."""
        return _canonical_hash(
            {
                "run_id": self.run_id,
                "dataset_path": self.dataset_path,
                "backends": self.backends,
                "metrics": self.metrics,
                "variants": self.variants,
                "seed": self.seed,
            }
        )

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "dataset_path": self.dataset_path,
            "backends": self.backends,
            "metrics": self.metrics,
            "variants": self.variants,
            "seed": self.seed,
            "created_at": self.created_at,
            "config_hash": self.config_hash,
            "stages": self.stages,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(
            run_id=d["run_id"],
            dataset_path=d["dataset_path"],
            backends=d["backends"],
            metrics=d["metrics"],
            variants=d["variants"],
            seed=d["seed"],
            created_at=d.get("created_at", ""),
            stages=d.get("stages", {}),
        )

    def stage_done(self, stage: str) -> bool:
        return stage in self.stages

    def require_stage(self, stage: str) -> None:
        if not self.stage_done(stage):
            raise MissingStageError(stage)

    def stage_input_hash(self, stage: str) -> Optional[str]:
        entry = self.stages.get(stage)
        return entry.get("input_hash") if entry else None

    def mark_stage(self, stage: str, input_hash: str) -> None:
        self.stages[stage] = {
            "input_hash": input_hash,
            "completed_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        }


class RunDir:
    """Paths and manifest IO for one run directory."""

    def __init__(self, root):
        self.root = Path(root)

    # Layout -----------------------------------------------------------

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    @property
    def chains_path(self) -> Path:
        return self.root / "chains.jsonl"

    @property
    def filter_path(self) -> Path:
        return self.root / "filter.jsonl"

    @property
    def prefix_path(self) -> Path:
        return self.root / "prefix.jsonl"

    @property
    def scores_path(self) -> Path:
        return self.root / "scores.jsonl"

    @property
    def cores_path(self) -> Path:
        return self.root / "cores.jsonl"

    @property
    def labels_path(self) -> Path:
        return self.root / "labels.jsonl"

    @property
    def influence_dir(self) -> Path:
        return self.root / "influence"

    @property
    def activations_dir(self) -> Path:
        return self.root / "activations"

    @property
    def judge_dir(self) -> Path:
        return self.root / "judge"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    def influence_path(self, problem_id: str, method: str) -> Path:
        return self.influence_dir / f"{problem_id}.{method}.bin"

    def activations_path(self, problem_id: str) -> Path:
        return self.activations_dir / f"{problem_id}.bin"

    # Manifest ---------------------------------------------------------

    def exists(self) -> bool:
        return self.manifest_path.exists()

    def initialize(self, manifest: RunManifest) -> None:
        """Create the directory tree and write the manifest first."""
        self.root.mkdir(parents=True, exist_ok=True)
        for sub in (self.influence_dir, self.activations_dir, self.judge_dir, self.reports_dir):
            sub.mkdir(exist_ok=True)
        self.save_manifest(manifest)

    def load_manifest(self) -> RunManifest:
        if not self.exists():
            raise RunError(f"no manifest at {self.manifest_path}")
        with self.manifest_path.open("r", encoding="utf-8") as fh:
            return RunManifest.from_dict(json.load(fh))

    def save_manifest(self, manifest: RunManifest) -> None:
        with self.manifest_path.open("w", encoding="utf-8") as fh:
            json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
