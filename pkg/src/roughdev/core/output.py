"""CSV writers shared by the CLI commands."""

from __future__ import annotations

from pathlib import Path

import pandas as pd

from roughdev.core.provenance import OutputRecord, RunManifest


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    """Write ``frame`` with full float precision and fixed line endings."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def write_output(manifest: RunManifest, frame: pd.DataFrame, name: str) -> OutputRecord:
    """Write ``name`` into the run directory and record it in the manifest."""
    path = write_frame(frame, manifest.run_dir / name)
    return manifest.record_output(path, rows=len(frame))


__all__ = ["write_frame", "write_output"]
