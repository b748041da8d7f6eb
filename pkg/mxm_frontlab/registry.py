"""Family registries for mxm-frontlab.

Kernel shapes and nonlinearities are selected by name in run-config files.
This module maintains process-local mappings from those names to builder
callables, so that config validation can check referential completeness
("every referenced family exists") and third parties can plug in new
families without touching the solvers.

Usage
-----
    from mxm_frontlab.registry import KERNEL_FAMILIES

    KERNEL_FAMILIES.register("my_shape", build_my_shape, "custom bump")
    builder = KERNEL_FAMILIES.resolve("my_shape")

The built-in families are registered by ``mxm_frontlab.kernels`` and
``mxm_frontlab.model`` at import time.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

# --------------------------------------------------------------------------- #
# Registry
# --------------------------------------------------------------------------- #


@dataclass(slots=True)
class _Entry:
    builder: Callable[..., Any]
    description: str


class FamilyRegistry:
    """Name → builder mapping for one kind of family (kernels, G, ...)."""

    def __init__(self, kind: str) -> None:
        self.kind = kind
        self._entries: dict[str, _Entry] = {}

    def register(
        self, name: str, builder: Callable[..., Any], description: str = ""
    ) -> None:
        """Register a builder under a unique family name.

        Raises
        ------
        ValueError
            If a builder with the same name is already registered.
        """
        if name in self._entries:
            raise ValueError(f"{self.kind} family '{name}' is already registered.")
        self._entries[name] = _Entry(builder, description)

    def unregister(self, name: str) -> None:
        """Remove a previously registered family."""
        self._entries.pop(name, None)

    def resolve(self, name: str) -> Callable[..., Any]:
        """Return the builder registered for ``name``.

        Raises
        ------
        KeyError
            If no builder has been registered under the given name.
        """
        try:
            return self._entries[name].builder
        except KeyError as exc:
            raise KeyError(
                f"No {self.kind} family registered under '{name}'."
            ) from exc

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def list_registered(self) -> list[str]:
        """Return a sorted list of registered family names."""
        return sorted(self._entries.keys())

    def snapshot(self) -> dict[str, _Entry]:
        """Copy of the current entries (tests restore it afterwards)."""
        return dict(self._entries)

    def restore(self, entries: dict[str, _Entry]) -> None:
        self._entries = dict(entries)

    def clear(self) -> None:
        """Clear all registered families (useful for testing)."""
        self._entries.clear()

    # ------------------------------------------------------------------ #
    # Introspection / Debug helpers
    # ------------------------------------------------------------------ #

    def describe(self) -> str:
        """Return a formatted string listing all registered families."""
        if not self._entries:
            return f"(no {self.kind} families registered)"

        lines = [f"Registered {self.kind} families:"]
        for name, entry in sorted(self._entries.items()):
            lines.append(f"  • {name:15s} → {entry.description or '(no description)'}")
        return "\n".join(lines)


KERNEL_FAMILIES = FamilyRegistry("kernel")
G_FAMILIES = FamilyRegistry("G")

__all__ = ["FamilyRegistry", "G_FAMILIES", "KERNEL_FAMILIES"]
