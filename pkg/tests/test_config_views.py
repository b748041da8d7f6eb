from __future__ import annotations

from pathlib import Path
from typing import Callable, cast

import pytest
from mxm_config import load_config
from omegaconf import DictConfig
from omegaconf.errors import ReadonlyConfigError

from mxm_frontlab.config.config import (
    frontlab_paths_view,
    frontlab_run_view,
    frontlab_view,
)


def _load_cfg_from_repo_yaml(
    mxm_config_home: Callable[[str, str], Path],
    *,
    env: str = "dev",
    profile: str = "default",
) -> DictConfig:
    # Mirror mxm_frontlab/config/*.yaml into MXM_CONFIG_HOME/mxm-frontlab/
    mxm_config_home("mxm-frontlab", "mxm_frontlab")
    cfg = cast(DictConfig, load_config(package="mxm-frontlab", env=env, profile=profile))
    assert isinstance(cfg, DictConfig)
    return cfg


def test_frontlab_view_mapping_readonly_and_identity(
    mxm_config_home: Callable[[str, str], Path],
) -> None:
    cfg = _load_cfg_from_repo_yaml(mxm_config_home)

    view = cast(DictConfig, frontlab_view(cfg))
    assert isinstance(view, DictConfig)

    # The view should be the same underlying subtree (no deep copy).
    assert view is cfg.frontlab  # type: ignore[attr-defined]
    assert {"paths", "logging", "run"} <= set(view.keys())

    with pytest.raises(ReadonlyConfigError):
        view.paths.root = "/tmp/override"  # type: ignore[attr-defined]


def test_frontlab_paths_have_core_fields_and_are_readonly(
    mxm_config_home: Callable[[str, str], Path],
) -> None:
    cfg = _load_cfg_from_repo_yaml(mxm_config_home, env="dev", profile="default")
    paths = cast(DictConfig, frontlab_paths_view(cfg))

    assert isinstance(paths.root, str) and paths.root  # type: ignore[attr-defined]
    assert "/dev/frontlab/default" in paths.root  # type: ignore[attr-defined]
    assert paths.db_path.endswith("/frontlab.sqlite")  # type: ignore[attr-defined]
    assert paths.output_root.endswith("/runs")  # type: ignore[attr-defined]

    with pytest.raises(ReadonlyConfigError):
        paths.db_path = "/tmp/x.sqlite"  # type: ignore[attr-defined]


def test_research_profile_overrides_paths_and_horizon(
    mxm_config_home: Callable[[str, str], Path],
) -> None:
    cfg = _load_cfg_from_repo_yaml(mxm_config_home, env="dev", profile="research")
    paths = cast(DictConfig, frontlab_paths_view(cfg))
    run = cast(DictConfig, frontlab_run_view(cfg))

    assert paths.db_path.endswith("frontlab_research.sqlite")  # type: ignore[attr-defined]
    assert paths.output_root.endswith("runs_research")  # type: ignore[attr-defined]
    assert run.sim.T == 5000.0  # type: ignore[attr-defined]
    assert run.sim.dx == 0.25  # type: ignore[attr-defined]


def test_env_overrides_logging_and_archive(
    mxm_config_home: Callable[[str, str], Path],
) -> None:
    d_dev = cast(DictConfig, frontlab_view(_load_cfg_from_repo_yaml(mxm_config_home, env="dev")))
    d_prod = cast(DictConfig, frontlab_view(_load_cfg_from_repo_yaml(mxm_config_home, env="prod")))

    assert d_dev.logging.level == "DEBUG"  # type: ignore[attr-defined]
    assert d_prod.logging.level == "INFO"  # type: ignore[attr-defined]
    assert bool(d_dev.run.output.archive) is False  # type: ignore[attr-defined]
    assert bool(d_prod.run.output.archive) is True  # type: ignore[attr-defined]
