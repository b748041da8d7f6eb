"""High-level runtime API for mxm-frontlab.

`LabSession` is a context-managed record of one lab command. It opens a
`Run` in the `RunStore` on entry, files every written artifact under that
run, and closes the run with a status derived from how the block exited.

Responsibilities
----------------
- Create and finalize a persisted Run (provenance.Run)
- Checksum and index written files (provenance.Artifact)
- Map package exceptions onto run statuses without swallowing them

Usage
-----
    with LabSession("simulate", paths_view, config_hash=cfg.config_hash) as lab:
        path = write_trajectory_csv(out / "trajectory.csv", traj)
        lab.record(path, ArtifactKind.TRAJECTORY)
"""

from __future__ import annotations

import logging
from types import TracebackType
from typing import Optional, Type

from mxm_config import MXMConfig

from mxm_frontlab.errors import ValidationError
from mxm_frontlab.provenance import Artifact, ArtifactKind, Run, RunStatus
from mxm_frontlab.store import RunStore
from mxm_frontlab.types import PathLike

logger = logging.getLogger(__name__)


def status_for(exc: BaseException | None) -> RunStatus:
    """Run status for an exception leaving a session (None means success)."""
    if exc is None:
        return RunStatus.OK
    if isinstance(exc, ValidationError):
        return RunStatus.VALIDATION_ERROR
    return RunStatus.SOLVER_ABORT


class LabSession:
    """Runtime context manager around one archived command run.

    Parameters
    ----------
    command:
        CLI subcommand name (``simulate``, ``sweep``, ...).
    cfg:
        A view carrying ``paths.root`` and optionally ``paths.db_path``.
    config_hash:
        Hash of the run configuration, when already known. ``set_hash``
        fills it in later for commands that validate inside the session.
    store:
        Optional pre-initialised RunStore; defaults to the per-path singleton.
    """

    def __init__(
        self,
        command: str,
        cfg: MXMConfig,
        *,
        config_hash: str | None = None,
        store: Optional[RunStore] = None,
    ) -> None:
        self.command = command
        self.cfg = cfg
        self.config_hash = config_hash
        self.store = store or RunStore.get_instance(cfg)
        self._run: Optional[Run] = None
        self.artifacts: list[Artifact] = []

    # ------------------------------------------------------------------ #
    # Context management
    # ------------------------------------------------------------------ #

    def __enter__(self) -> "LabSession":
        run = Run(command=self.command, config_hash=self.config_hash)
        self.store.insert_run(run)
        self._run = run
        logger.debug("opened run %s (%s)", run.id, self.command)
        return self

    def __exit__(
        self,
        exc_type: Optional[Type[BaseException]],
        exc_val: Optional[BaseException],
        exc_tb: Optional[TracebackType],
    ) -> None:
        _ = (exc_type, exc_tb)
        if self._run is None:
            return
        status = status_for(exc_val)
        self._run.end(status)
        self.store.finish_run(
            self._run.id, status, self._run.ended_at, config_hash=self.config_hash
        )
        logger.debug("closed run %s with status %s", self._run.id, status.value)

    # ------------------------------------------------------------------ #
    # Recording
    # ------------------------------------------------------------------ #

    @property
    def run_id(self) -> str:
        if self._run is None:
            raise RuntimeError("LabSession must be entered before use.")
        return self._run.id

    def set_hash(self, config_hash: str) -> None:
        self.config_hash = config_hash
        if self._run is not None:
            self._run.config_hash = config_hash

    def record(self, path: PathLike, kind: ArtifactKind | str) -> Artifact:
        """Checksum a written file and index it under the current run."""
        artifact = Artifact.from_file(self.run_id, ArtifactKind(kind), path)
        self.store.insert_artifact(artifact)
        self.artifacts.append(artifact)
        return artifact


__all__ = ["LabSession", "status_for"]
