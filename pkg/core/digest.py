"""
Digest utilities.

Derives stable SHA-256 digests for output files and configurations and
collects them into a run manifest.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional

MANIFEST_VERSION = 1


def compute_config_digest(config: Mapping[str, Any]) -> str:
    """Digest of the config canonicalised to JSON with sorted keys and compact separators."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def compute_file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(_read_file_bytes(path))
    return digest.hexdigest()


def _read_file_bytes(path: Path) -> bytes:
    """Read file bytes, raising a descriptive error if unavailable."""
    try:
        return Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"File not found for digest computation: {path}") from exc


def digest_tree(root: Path, patterns: Iterable[str] = ("*.csv", "*.json", "*.svg")) -> Dict[str, str]:
    """Digests of every matching file below ``root``, keyed by POSIX relative path."""
    root = Path(root)
    found = set()
    for pattern in patterns:
        found.update(p for p in root.rglob(pattern) if p.is_file())
    return {p.relative_to(root).as_posix(): compute_file_digest(p) for p in sorted(found)}


def build_run_manifest(
    command: str,
    root: Path,
    *,
    config: Mapping[str, Any],
    seed: int,
    metadata: Optional[Mapping[str, Any]] = None,
    exclude: Iterable[str] = ("manifest.json",),
) -> Dict[str, Any]:
    files = {k: v for k, v in digest_tree(root).items() if Path(k).name not in set(exclude)}
    return {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "seed": int(seed),
        "config_digest": compute_config_digest(config),
        "config": dict(config),
        "metadata": dict(metadata or {}),
        "files": files,
    }


def write_run_manifest(path: Path, manifest: Mapping[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
