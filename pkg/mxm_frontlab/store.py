"""Run archive for mxm-frontlab.

The RunStore keeps a SQLite index of command runs and the files they wrote.
Files themselves stay where the CLI wrote them; the store holds their paths
and checksums so an archived report can be traced back to its config hash
and its data files verified later.

Design principles:
- One RunStore instance per database path (singleton-per-config)
- Atomic commits with rollback on error
- Paths injected from an mxm-config view, never hard-coded
"""

from __future__ import annotations

import sqlite3
import threading
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import ClassVar, Final, Generator

from mxm_config import MXMConfig

from mxm_frontlab.provenance import Artifact, ArtifactKind, Run, RunStatus

# --------------------------------------------------------------------------- #
# RunStore class
# --------------------------------------------------------------------------- #


class RunStore:
    """Manage the SQLite run/artifact index.

    Expects a **frontlab paths-bearing** view as cfg. Reads only:

        cfg.paths.root      (required)
        cfg.paths.db_path   (optional, default <root>/frontlab.sqlite)
    """

    _instances: ClassVar[dict[str, "RunStore"]] = {}
    _lock: ClassVar[threading.Lock] = threading.Lock()

    def __init__(self, cfg: MXMConfig) -> None:
        try:
            root = cfg.paths.root  # type: ignore[attr-defined]
        except Exception as exc:
            raise ValueError(
                "frontlab.paths.root is required on the passed config view"
            ) from exc
        self.data_root = Path(str(root))
        self.db_path = self._db_path(cfg)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self._ensure_schema()

    @staticmethod
    def _db_path(cfg: MXMConfig) -> Path:
        try:
            return Path(str(cfg.paths.db_path))  # type: ignore[attr-defined]
        except Exception:
            return Path(str(cfg.paths.root)) / "frontlab.sqlite"  # type: ignore[attr-defined]

    # ------------------------------------------------------------------ #
    # Singleton factory
    # ------------------------------------------------------------------ #

    @classmethod
    def get_instance(cls, cfg: MXMConfig) -> "RunStore":
        """Return the singleton RunStore for the view's database path."""
        key: Final[str] = cls._db_path(cfg).expanduser().resolve(strict=False).as_posix()
        with cls._lock:
            inst = cls._instances.get(key)
            if inst is None:
                inst = cls(cfg)
                cls._instances[key] = inst
            return inst

    # ------------------------------------------------------------------ #
    # Database connection context
    # ------------------------------------------------------------------ #

    @contextmanager
    def connect(self) -> Generator[sqlite3.Connection, None, None]:
        """Yield a SQLite connection with automatic commit/rollback."""
        conn = sqlite3.connect(self.db_path)
        try:
            yield conn
            conn.commit()
        except Exception:
            conn.rollback()
            raise
        finally:
            conn.close()

    # ------------------------------------------------------------------ #
    # Schema management
    # ------------------------------------------------------------------ #

    def _ensure_schema(self) -> None:
        with self.connect() as conn:
            conn.executescript(
                """
                CREATE TABLE IF NOT EXISTS runs (
                    id TEXT PRIMARY KEY,
                    command TEXT NOT NULL,
                    config_hash TEXT,
                    status TEXT NOT NULL,
                    started_at TEXT NOT NULL,
                    ended_at TEXT
                );

                CREATE TABLE IF NOT EXISTS artifacts (
                    id TEXT PRIMARY KEY,
                    run_id TEXT NOT NULL,
                    kind TEXT NOT NULL,
                    path TEXT NOT NULL,
                    checksum TEXT NOT NULL,
                    size_bytes INTEGER,
                    created_at TEXT NOT NULL,
                    FOREIGN KEY(run_id) REFERENCES runs(id)
                );
                """
            )
            conn.execute(
                "CREATE INDEX IF NOT EXISTS idx_runs_command ON runs(command);"
            )
            conn.execute(
                "CREATE INDEX IF NOT EXISTS idx_runs_hash ON runs(config_hash);"
            )
            conn.execute(
                "CREATE INDEX IF NOT EXISTS idx_artifacts_run ON artifacts(run_id);"
            )

    # ------------------------------------------------------------------ #
    # Run lifecycle
    # ------------------------------------------------------------------ #

    def insert_run(self, run: Run) -> None:
        """Insert or ignore a Run record."""
        with self.connect() as conn:
            conn.execute(
                """
                INSERT OR IGNORE INTO runs
                (id, command, config_hash, status, started_at, ended_at)
                VALUES (?, ?, ?, ?, ?, ?)
                """,
                (
                    run.id,
                    run.command,
                    run.config_hash,
                    run.status.value,
                    run.started_at.isoformat(),
                    run.ended_at.isoformat() if run.ended_at else None,
                ),
            )

    def finish_run(
        self,
        run_id: str,
        status: RunStatus,
        ended_at: datetime | None,
        config_hash: str | None = None,
    ) -> None:
        """Record the final status (and the hash, if known only late)."""
        ts = ended_at.isoformat() if ended_at else None
        with self.connect() as conn:
            conn.execute(
                """
                UPDATE runs SET status = ?, ended_at = ?,
                config_hash = COALESCE(?, config_hash) WHERE id = ?
                """,
                (status.value, ts, config_hash, run_id),
            )

    def insert_artifact(self, artifact: Artifact) -> None:
        with self.connect() as conn:
            conn.execute(
                """
                INSERT OR IGNORE INTO artifacts
                (id, run_id, kind, path, checksum, size_bytes, created_at)
                VALUES (?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    artifact.id,
                    artifact.run_id,
                    artifact.kind.value,
                    artifact.path,
                    artifact.checksum,
                    artifact.size_bytes,
                    artifact.created_at.isoformat(),
                ),
            )

    # ------------------------------------------------------------------ #
    # Retrieval helpers
    # ------------------------------------------------------------------ #

    def list_runs(self) -> list[tuple[str, str, str | None, str, str]]:
        """Return (id, command, config_hash, status, started_at), newest first."""
        with self.connect() as conn:
            cur = conn.execute(
                """
                SELECT id, command, config_hash, status, started_at FROM runs
                ORDER BY started_at DESC
                """
            )
            return list(cur.fetchall())

    def get_run(self, run_id: str) -> Run | None:
        with self.connect() as conn:
            row = conn.execute(
                """
                SELECT id, command, config_hash, status, started_at, ended_at
                FROM runs WHERE id = ?
                """,
                (run_id,),
            ).fetchone()
        if row is None:
            return None
        return Run(
            id=row[0],
            command=row[1],
            config_hash=row[2],
            status=RunStatus(row[3]),
            started_at=datetime.fromisoformat(row[4]),
            ended_at=datetime.fromisoformat(row[5]) if row[5] else None,
        )

    def artifacts_for(self, run_id: str) -> list[Artifact]:
        """Artifacts written by a run, in creation order."""
        with self.connect() as conn:
            rows = conn.execute(
                """
                SELECT id, run_id, kind, path, checksum, size_bytes, created_at
                FROM artifacts WHERE run_id = ?
                ORDER BY created_at ASC, path ASC
                """,
                (run_id,),
            ).fetchall()
        return [
            Artifact(
                id=r[0],
                run_id=r[1],
                kind=ArtifactKind(r[2]),
                path=r[3],
                checksum=r[4],
                size_bytes=r[5],
                created_at=datetime.fromisoformat(r[6]),
            )
            for r in rows
        ]

    def latest_run_id(self, command: str) -> str | None:
        """Return the most recent run ID for a given command, if any."""
        with self.connect() as conn:
            row = conn.execute(
                """
                SELECT id FROM runs
                WHERE command = ?
                ORDER BY started_at DESC
                LIMIT 1
                """,
                (command,),
            ).fetchone()
            return row[0] if row else None


__all__ = ["RunStore"]
