"""Exception hierarchy for mxm-frontlab.

Two failure classes matter to callers: invalid inputs (rejected before any
numerical work, exit code 1 at the CLI) and solver aborts (a numerical
procedure ran and failed, exit code 2). Both subclass the builtin they
refine so existing ``except ValueError`` / ``except RuntimeError`` handlers
keep working.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

from mxm_frontlab.types import JSONLike


class FrontlabError(Exception):
    """Base class for all package errors."""


class ValidationError(FrontlabError, ValueError):
    """Input rejected before computation.

    ``errors`` holds every ``(key_path, message)`` pair found; for errors
    raised outside config loading the key path is empty.
    """

    def __init__(
        self, message: str, errors: Sequence[tuple[str, str]] | None = None
    ) -> None:
        self.errors: list[tuple[str, str]] = (
            list(errors) if errors is not None else [("", message)]
        )
        super().__init__(message)

    def describe(self) -> str:
        lines: list[str] = []
        for path, msg in self.errors:
            lines.append(f"{path}: {msg}" if path else msg)
        return "\n".join(lines)


class SolverAbort(FrontlabError, RuntimeError):
    """A numerical procedure failed; ``diagnostics`` carries the evidence."""

    def __init__(
        self, message: str, diagnostics: Mapping[str, JSONLike] | None = None
    ) -> None:
        self.diagnostics: dict[str, JSONLike] = dict(diagnostics or {})
        super().__init__(message)


__all__ = ["FrontlabError", "SolverAbort", "ValidationError"]
