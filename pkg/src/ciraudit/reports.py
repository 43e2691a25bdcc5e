"""Rendering and artifact plumbing shared by the CLI: aligned text tables,
count-percent formatting, canonical JSON, and provenance blocks.

Artifacts are byte-stable: canonical key order, no timestamps, and input
files identified by content digest, so re-running a command overwrites its
outputs with identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping, Sequence
from pathlib import Path

__all__ = [
    "format_pct",
    "count_pct",
    "render_table",
    "canonical_json",
    "sha256_file",
    "provenance_block",
    "write_artifact",
]


def format_pct(value: float) -> str:
    """One-decimal percent string, the convention of the published tables."""
    return f"{value:.1f}"


def count_pct(count: int, total: int) -> str:
    """Render "98 (79.0)" style count-plus-percent cells."""
    pct = 0.0 if total == 0 else 100.0 * count / total
    return f"{count} ({format_pct(pct)})"


def render_table(
    rows: Sequence[Mapping[str, object]], columns: Sequence[str]
) -> str:
    """Aligned plain-text table; numeric cells are right-aligned."""
    cells = [[str(row.get(col, "")) for col in columns] for row in rows]
    widths = [
        max(len(col), *(len(r[j]) for r in cells)) if cells else len(col)
        for j, col in enumerate(columns)
    ]

    def is_num(text: str) -> bool:
        try:
            float(text)
            return True
        except ValueError:
            return False

    lines = ["  ".join(col.ljust(w) for col, w in zip(columns, widths))]
    for r in cells:
        lines.append(
            "  ".join(
                (c.rjust(w) if is_num(c) else c.ljust(w))
                for c, w in zip(r, widths)
            )
        )
    return "\n".join(lines)


def canonical_json(doc: object) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return f"sha256:{h.hexdigest()}"


def provenance_block(
    command: str,
    version: str,
    config: Mapping[str, object],
    inputs: Mapping[str, str | Path],
) -> dict:
    """Provenance embedded in every artifact: tool, config, input digests."""
    return {
        "tool": "ciraudit",
        "version": version,
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "inputs": {
            name: sha256_file(path) for name, path in sorted(inputs.items())
        },
    }


def write_artifact(path: str | Path, doc: object) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(doc), encoding="utf-8")
    return path
