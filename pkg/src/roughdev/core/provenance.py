"""
Run manifest — records seed, configuration hash, library versions, the
output files with their content hashes, and an event log, so that a run
can be audited and reproduced byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import platform
from importlib import metadata
from pathlib import Path
from typing import Any

from pydantic import BaseModel

from roughdev.core import DevlabConfig, config_hash
from roughdev.core.errors import RoughDevError


_TRACKED_PACKAGES = ("roughdev", "numpy", "scipy", "pandas", "pydantic", "statsmodels")


class OutputRecord(BaseModel):
    """One file written by a run."""

    path: str  # relative to the run directory
    sha256: str
    rows: int = 0


def library_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in _TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class RunManifest:
    """
    Provenance for one CLI command.

    The event log carries a sequence number instead of wall-clock time: two
    runs with the same seed and configuration write identical manifests.
    """

    def __init__(self, run_dir: Path, command: str, config: DevlabConfig) -> None:
        self.run_dir = run_dir
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.seed = config.seed
        self.config_hash = config_hash(config)
        self.config = config.model_dump(mode="json")
        self.versions = library_versions()
        self.outputs: list[OutputRecord] = []
        self.events: list[dict[str, Any]] = []
        self.status = "running"
        self.error: dict[str, Any] | None = None

    # ------------------------------------------------------------------
    # Events
    # ------------------------------------------------------------------

    def log_event(self, event_type: str, data: dict[str, Any] | None = None) -> None:
        self.events.append({"seq": len(self.events), "event": event_type, **(data or {})})

    # ------------------------------------------------------------------
    # Outputs
    # ------------------------------------------------------------------

    def record_output(self, path: Path, rows: int = 0) -> OutputRecord:
        record = OutputRecord(
            path=str(path.relative_to(self.run_dir)),
            sha256=self._hash(path.read_bytes()),
            rows=rows,
        )
        self.outputs.append(record)
        return record

    def finish(self, status: str = "ok") -> None:
        self.status = status

    def fail(self, exc: RoughDevError) -> None:
        self.status = "failed"
        self.error = exc.to_response()

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "config": self.config,
            "versions": self.versions,
            "outputs": [o.model_dump() for o in self.outputs],
            "events": self.events,
            "status": self.status,
            "error": self.error,
        }

    def save(self) -> Path:
        target = self.run_dir / "manifest.json"
        target.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=str) + "\n")
        return target

    @staticmethod
    def _hash(data: bytes | str) -> str:
        if isinstance(data, str):
            data = data.encode()
        return hashlib.sha256(data).hexdigest()[:16]


__all__ = ["OutputRecord", "RunManifest", "library_versions"]
