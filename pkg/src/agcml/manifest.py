"""Stage manifests: provenance stamps that chain pipeline stages together.

Every stage writes `<stage>.manifest.json` next to its artifacts with the
config hash, seed, tool version and output file hashes. Later stages
require their upstream manifest and refuse to run against a different
config hash. Deliberately no timestamps: reruns must be byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Mapping, Optional

from .errors import StageDependencyError
from .util import TOOL_VERSION, canonical_json

MANIFEST_SCHEMA = "agcml.manifest.v1"


def file_sha256(path: Path | str) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path(out_dir: Path | str, stage: str) -> Path:
    return Path(out_dir) / f"{stage}.manifest.json"


def write_manifest(
    out_dir: Path | str,
    stage: str,
    config_hash: str,
    seed: int,
    outputs: Mapping[str, Path | str],
    inputs: Optional[Mapping[str, str]] = None,
    extra: Optional[Mapping[str, Any]] = None,
) -> Path:
    """outputs maps artifact names to paths (hashed here); inputs maps
    upstream artifact names to their recorded hashes."""
    out_dir = Path(out_dir)
    payload = {
        "schema": MANIFEST_SCHEMA,
        "stage": stage,
        "tool_version": TOOL_VERSION,
        "config_hash": config_hash,
        "seed": seed,
        "inputs": dict(inputs or {}),
        "outputs": {
            name: {"file": Path(p).name, "sha256": file_sha256(p)}
            for name, p in sorted(outputs.items())
        },
        "extra": dict(extra or {}),
    }
    path = manifest_path(out_dir, stage)
    path.write_text(json.dumps(json.loads(canonical_json(payload)), indent=1, sort_keys=True) + "\n")
    return path


def require_manifest(out_dir: Path | str, stage: str, config_hash: Optional[str] = None) -> dict:
    """Load an upstream stage's manifest or fail with a clear dependency
    error; optionally insist it was produced under the same config."""
    path = manifest_path(out_dir, stage)
    if not path.exists():
        raise StageDependencyError(
            f"stage {stage!r} has not produced {path.name}; run the {stage!r} stage first"
        )
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise StageDependencyError(f"corrupt manifest {path}: {exc}") from exc
    if payload.get("schema") != MANIFEST_SCHEMA:
        raise StageDependencyError(f"unsupported manifest schema in {path}")
    if config_hash is not None and payload.get("config_hash") != config_hash:
        raise StageDependencyError(
            f"manifest {path.name} was produced under config {payload.get('config_hash')}, "
            f"current config is {config_hash}; rerun upstream stages"
        )
    return payload


def output_hashes(manifest: Mapping[str, Any]) -> dict[str, str]:
    return {name: meta["sha256"] for name, meta in manifest.get("outputs", {}).items()}
