from __future__ import annotations

import shutil
from collections.abc import Iterator
from importlib.resources import files as pkg_files
from pathlib import Path
from typing import Any, Callable

import pytest
from _pytest.monkeypatch import MonkeyPatch  # type: ignore[import-not-found]
from omegaconf import OmegaConf

from mxm_frontlab.kernels import KernelSpec, normalize
from mxm_frontlab.model import GFunction, ModelParams, build_monod
from mxm_frontlab.registry import G_FAMILIES, KERNEL_FAMILIES
from mxm_frontlab.simulator import KernelSet


# --------------------------------------------------------------------------- #
# mxm-config home
# --------------------------------------------------------------------------- #


def _copy_package_yamls(home: Path, package_name: str, package_module: str) -> Path:
    """Copy the packaged config YAMLs to ``home/<package_name>/``.

    A ``machine.yaml`` pinning ``paths.data_root_base`` to /tmp/mxm is written
    next to them unless one is already there.
    """
    target = home / package_name
    target.mkdir(parents=True, exist_ok=True)
    for src in Path(str(pkg_files(package_module) / "config")).glob("*.yaml"):
        shutil.copy2(src, target / src.name)

    machine = home / "machine.yaml"
    if not machine.exists():
        machine.write_text("paths:\n  data_root_base: /tmp/mxm\n", encoding="utf-8")
    return target


@pytest.fixture
def mxm_config_home(
    tmp_path: Path, monkeypatch: MonkeyPatch
) -> Callable[[str, str], Path]:
    """Point MXM_CONFIG_HOME at tmp_path holding this package's YAML layers.

    ``mxm_config_home("mxm-frontlab", "mxm_frontlab")`` makes
    ``load_config(package="mxm-frontlab", ...)`` read the in-repo defaults.
    """

    def _point(package_name: str, package_module: str) -> Path:
        _copy_package_yamls(tmp_path, package_name, package_module)
        monkeypatch.setenv("MXM_CONFIG_HOME", str(tmp_path))
        return tmp_path

    return _point


# --------------------------------------------------------------------------- #
# Registries
# --------------------------------------------------------------------------- #


@pytest.fixture(autouse=True)
def restore_registries() -> Iterator[None]:
    """Tests may register extra families; put the built-ins back afterwards."""
    kernels = KERNEL_FAMILIES.snapshot()
    gs = G_FAMILIES.snapshot()
    yield
    KERNEL_FAMILIES.restore(kernels)
    G_FAMILIES.restore(gs)


# --------------------------------------------------------------------------- #
# Model fixtures
# --------------------------------------------------------------------------- #


@pytest.fixture()
def unit_params() -> ModelParams:
    """d1 = d2 = a11 = a12 = a22 = mu = rho_flux = 1, h0 = 20."""
    return ModelParams()


@pytest.fixture()
def monod2() -> GFunction:
    return build_monod(2.0)


def kernel_set(spec: KernelSpec) -> KernelSet:
    k = normalize(spec)
    return KernelSet(k, k, k)


@pytest.fixture()
def power15() -> KernelSet:
    return kernel_set(KernelSpec.power_law(1.5))


@pytest.fixture()
def triangle() -> KernelSet:
    return kernel_set(KernelSpec.compact(1.0, "triangle"))


@pytest.fixture()
def write_run_file(tmp_path: Path) -> Callable[[dict[str, Any]], Path]:
    """Write a YAML run file under tmp_path and return its path."""

    def _write(tree: dict[str, Any], name: str = "run.yaml") -> Path:
        path = tmp_path / name
        OmegaConf.save(OmegaConf.create(tree), path)
        return path

    return _write
