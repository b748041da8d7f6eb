"""Provenance records for mxm-frontlab.

Every CLI command is one ``Run``; every file it writes is an ``Artifact``
linked to that run:

    Run → Artifact

A run records the command, the hash of the configuration that produced it
and its final status. An artifact records where a file lives and a SHA-256
checksum of its bytes, so a report, CSV or plot can be re-verified later
against the configuration it came from.

Hashing
-------
``config_hash`` serializes a configuration tree with sorted keys and compact
separators before hashing. Identical trees hash identically regardless of
key order or the YAML file's layout.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any

from mxm_frontlab.types import JSONLike, PathLike

# --------------------------------------------------------------------------- #
# Utility helpers
# --------------------------------------------------------------------------- #


def _utcnow() -> datetime:
    return datetime.now(tz=timezone.utc)


def _uuid() -> str:
    return str(uuid.uuid4())


def json_dumps(data: Any) -> str:
    """Deterministically serialize a JSON-shaped object."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(tree: Any) -> str:
    """SHA-256 of the deterministic JSON of a configuration tree."""
    return hashlib.sha256(json_dumps(tree).encode("utf-8")).hexdigest()


def file_checksum(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# --------------------------------------------------------------------------- #
# Enumerations
# --------------------------------------------------------------------------- #


class RunStatus(str, Enum):
    """Final state of a command run."""

    RUNNING = "running"
    OK = "ok"
    VALIDATION_ERROR = "validation_error"
    SOLVER_ABORT = "solver_abort"


class ArtifactKind(str, Enum):
    REPORT = "report"
    TRAJECTORY = "trajectory"
    SNAPSHOT = "snapshot"
    PROFILE = "profile"
    CURVES = "curves"
    PLOT = "plot"


# --------------------------------------------------------------------------- #
# Dataclasses
# --------------------------------------------------------------------------- #


@dataclass(slots=True)
class Run:
    """One invocation of a lab command."""

    command: str
    config_hash: str | None = None
    status: RunStatus = RunStatus.RUNNING
    started_at: datetime = field(default_factory=_utcnow)
    ended_at: datetime | None = None
    id: str = field(default_factory=_uuid)

    def end(self, status: RunStatus) -> None:
        self.status = status
        self.ended_at = _utcnow()

    def to_json(self) -> dict[str, JSONLike]:
        data = asdict(self)
        data["status"] = self.status.value
        data["started_at"] = self.started_at.isoformat()
        data["ended_at"] = self.ended_at.isoformat() if self.ended_at else None
        return data


@dataclass(slots=True)
class Artifact:
    """A file written by a run, with its checksum.

    Artifacts are built from the bytes on disk after the file is closed;
    ``verify`` re-reads the file and compares checksums.
    """

    run_id: str
    kind: ArtifactKind
    path: str
    checksum: str
    size_bytes: int
    created_at: datetime = field(default_factory=_utcnow)
    id: str = field(default_factory=_uuid)

    @classmethod
    def from_bytes(
        cls, run_id: str, kind: ArtifactKind, data: bytes, path: PathLike
    ) -> "Artifact":
        return cls(
            run_id=run_id,
            kind=kind,
            path=str(path),
            checksum=file_checksum(data),
            size_bytes=len(data),
        )

    @classmethod
    def from_file(cls, run_id: str, kind: ArtifactKind, path: PathLike) -> "Artifact":
        """Create an Artifact from a file already written to disk."""
        return cls.from_bytes(run_id, kind, Path(path).read_bytes(), path)

    def verify(self) -> bool:
        """Return True if the file still matches the stored checksum."""
        p = Path(self.path)
        if not p.is_file():
            return False
        return file_checksum(p.read_bytes()) == self.checksum


__all__ = [
    "Artifact",
    "ArtifactKind",
    "Run",
    "RunStatus",
    "config_hash",
    "file_checksum",
    "json_dumps",
]
