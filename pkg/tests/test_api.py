"""Integration tests for mxm_frontlab.api.LabSession."""

from __future__ import annotations

from pathlib import Path

import pytest
from mxm_config import MXMConfig, make_subconfig

from mxm_frontlab.api import LabSession, status_for
from mxm_frontlab.cli import EXIT_OK, main
from mxm_frontlab.errors import SolverAbort, ValidationError
from mxm_frontlab.provenance import ArtifactKind, RunStatus
from mxm_frontlab.store import RunStore

# --------------------------------------------------------------------------- #
# Fixtures
# --------------------------------------------------------------------------- #


@pytest.fixture()
def cfg_view(tmp_path: Path) -> MXMConfig:
    return make_subconfig(
        {"paths": {"root": str(tmp_path), "db_path": str(tmp_path / "lab.sqlite")}}
    )


@pytest.fixture()
def store(cfg_view: MXMConfig) -> RunStore:
    return RunStore(cfg_view)


# --------------------------------------------------------------------------- #
# Tests
# --------------------------------------------------------------------------- #


def test_session_records_run_and_artifacts(
    cfg_view: MXMConfig, store: RunStore, tmp_path: Path
) -> None:
    report = tmp_path / "report.json"
    report.write_text("{}\n", encoding="utf-8")
    with LabSession("simulate", cfg_view, config_hash="h" * 64, store=store) as lab:
        art = lab.record(report, "report")
        run_id = lab.run_id

    run = store.get_run(run_id)
    assert run is not None
    assert run.status is RunStatus.OK
    assert run.command == "simulate"
    assert run.config_hash == "h" * 64
    assert run.ended_at is not None

    arts = store.artifacts_for(run_id)
    assert [a.id for a in arts] == [art.id]
    assert arts[0].kind is ArtifactKind.REPORT
    assert lab.artifacts == [art]


@pytest.mark.parametrize(
    "exc,status",
    [
        (ValidationError("bad input"), RunStatus.VALIDATION_ERROR),
        (SolverAbort("diverged", {"history": [1.0]}), RunStatus.SOLVER_ABORT),
    ],
)
def test_errors_close_the_run_and_propagate(
    cfg_view: MXMConfig, store: RunStore, exc: Exception, status: RunStatus
) -> None:
    run_id = ""
    with pytest.raises(type(exc)):
        with LabSession("semiwave", cfg_view, store=store) as lab:
            run_id = lab.run_id
            raise exc
    run = store.get_run(run_id)
    assert run is not None and run.status is status


def test_status_for_success() -> None:
    assert status_for(None) is RunStatus.OK


def test_set_hash_is_persisted_on_exit(cfg_view: MXMConfig, store: RunStore) -> None:
    with LabSession("sweep", cfg_view, store=store) as lab:
        lab.set_hash("late-hash")
        run_id = lab.run_id
    run = store.get_run(run_id)
    assert run is not None and run.config_hash == "late-hash"


def test_run_id_requires_enter(cfg_view: MXMConfig, store: RunStore) -> None:
    lab = LabSession("plot", cfg_view, store=store)
    with pytest.raises(RuntimeError, match="entered"):
        _ = lab.run_id


def test_default_store_is_the_path_singleton(cfg_view: MXMConfig) -> None:
    lab = LabSession("rates", cfg_view)
    assert lab.store is RunStore.get_instance(cfg_view)


def test_cli_archive_indexes_every_written_file(tmp_path: Path) -> None:
    csv = tmp_path / "fronts.csv"
    csv.write_text(
        "t,g,h\n" + "".join(f"{t}.0,-{t * t}.0,{t * t}.0\n" for t in range(1, 41)),
        encoding="utf-8",
    )
    root = tmp_path / "out"
    assert main(["plot", str(csv), "--out", str(root), "--archive"]) == EXIT_OK

    archive = RunStore.get_instance(
        make_subconfig({"paths": {"root": str(root), "db_path": str(root / "frontlab.sqlite")}})
    )
    run_id = archive.latest_run_id("plot")
    assert run_id is not None
    run = archive.get_run(run_id)
    assert run is not None and run.status is RunStatus.OK
    kinds = sorted(a.kind.value for a in archive.artifacts_for(run_id))
    assert kinds == ["plot", "report"]
    assert all(a.verify() for a in archive.artifacts_for(run_id))
