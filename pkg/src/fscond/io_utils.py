"""Deterministic file output helpers.

CSV files use '.' decimals, LF line endings, a fixed column order, and
shortest-roundtrip float formatting, so identical (config, seed) runs
produce byte-identical artifacts. Every artifact gets a JSON sidecar
recording the config hash, seed, package version, and active backend.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__, backends


def fmt_value(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item"):  # numpy scalar
        return fmt_value(value.item())
    return str(value)


def write_csv(path: Path | str, header: Sequence[str],
              rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt_value(v) for v in row) + "\n")


def write_json(path: Path | str, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_hash(config_dict: dict) -> str:
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_sidecar(artifact_path: Path | str, config_dict: dict, seed,
                  extra: dict | None = None) -> None:
    artifact_path = Path(artifact_path)
    payload = {
        "artifact": artifact_path.name,
        "config_hash": config_hash(config_dict),
        "seed": seed,
        "version": __version__,
        "backend": backends.BACKEND,
    }
    if extra:
        payload.update(extra)
    write_json(artifact_path.with_name(artifact_path.name + ".meta.json"), payload)
