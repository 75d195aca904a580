"""Run manifests: provenance records written alongside every CLI output.

A manifest captures the exact command line, a hash of the resolved
configuration, the seed, the tool version, and the kernel backend, plus
content hashes of each produced file; re-running the recorded command
reproduces the outputs byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__, backend_name


def config_hash(config_dict: dict) -> str:
    canon = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, name: str, argv, config_dict: dict, seed, outputs) -> Path:
    manifest = {
        "command": list(argv),
        "config": config_dict,
        "config_sha256": config_hash(config_dict),
        "seed": seed,
        "tool_version": __version__,
        "kernel_backend": backend_name(),
        "outputs": [
            {"path": Path(p).name, "sha256": file_hash(p)} for p in outputs
        ],
    }
    path = Path(out_dir) / f"{name}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
