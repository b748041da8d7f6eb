"""Unit tests for mxm_frontlab.registry.

Covers registration, resolution, unregistration, clearing, snapshots and
introspection of family builders. A fresh registry is used for the
mechanics; the module-level registries are checked for their built-ins.
"""

from __future__ import annotations

import pytest

from mxm_frontlab.registry import G_FAMILIES, KERNEL_FAMILIES, FamilyRegistry

# --------------------------------------------------------------------------- #
# Fixtures and dummy builders
# --------------------------------------------------------------------------- #


def build_bump(width: float = 1.0) -> float:
    return width


def build_spike(height: float = 2.0) -> float:
    return height


@pytest.fixture()
def reg() -> FamilyRegistry:
    return FamilyRegistry("kernel")


# --------------------------------------------------------------------------- #
# Tests
# --------------------------------------------------------------------------- #


def test_register_and_resolve_success(reg: FamilyRegistry) -> None:
    """Builders can be registered and resolved successfully."""
    reg.register("bump", build_bump, "smooth bump")
    assert reg.resolve("bump") is build_bump
    assert reg.resolve("bump")(width=3.0) == 3.0
    assert "bump" in reg


def test_register_duplicate_raises_value_error(reg: FamilyRegistry) -> None:
    reg.register("bump", build_bump)
    with pytest.raises(ValueError, match="already registered"):
        reg.register("bump", build_spike)


def test_resolve_missing_raises_key_error(reg: FamilyRegistry) -> None:
    with pytest.raises(KeyError, match="No kernel family registered under 'unknown'"):
        reg.resolve("unknown")


def test_unregister_removes_family(reg: FamilyRegistry) -> None:
    reg.register("bump", build_bump)
    reg.unregister("bump")
    assert "bump" not in reg.list_registered()
    with pytest.raises(KeyError):
        reg.resolve("bump")


def test_clear_empties_all_entries(reg: FamilyRegistry) -> None:
    reg.register("bump", build_bump)
    reg.register("spike", build_spike)
    assert len(reg.list_registered()) == 2
    reg.clear()
    assert reg.list_registered() == []


def test_list_registered_returns_sorted_names(reg: FamilyRegistry) -> None:
    reg.register("zeta", build_bump)
    reg.register("alpha", build_spike)
    assert reg.list_registered() == ["alpha", "zeta"]


def test_snapshot_and_restore_round_trip(reg: FamilyRegistry) -> None:
    reg.register("bump", build_bump)
    saved = reg.snapshot()
    reg.register("spike", build_spike)
    reg.restore(saved)
    assert reg.list_registered() == ["bump"]


def test_describe_output_contains_registered_names(reg: FamilyRegistry) -> None:
    reg.register("bump", build_bump, "smooth bump")
    output = reg.describe()
    assert "bump" in output
    assert "smooth bump" in output

    reg.clear()
    assert "(no kernel families registered)" in reg.describe()


def test_builtin_families_are_registered() -> None:
    assert KERNEL_FAMILIES.list_registered() == [
        "compact",
        "gaussian",
        "laplace",
        "power_law",
        "table",
    ]
    assert {"monod", "linear_capped", "custom"} <= set(G_FAMILIES.list_registered())
