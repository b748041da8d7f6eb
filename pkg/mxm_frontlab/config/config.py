"""
Config access helpers for mxm-frontlab.

Read-only views over the package's config subtrees, built on
`mxm_config.make_view`. No I/O happens at import time: callers load a global
`MXMConfig` with `mxm_config.load_config(...)` and pass it in.

Typical usage
-------------
    from mxm_config import load_config
    from mxm_frontlab.config.config import frontlab_paths_view, frontlab_run_view

    cfg = load_config(package="mxm-frontlab", env="dev", profile="default")
    paths = frontlab_paths_view(cfg)     # frontlab.paths (read-only)
    run = frontlab_run_view(cfg)         # packaged run defaults

Notes
-----
- The package subtree is `frontlab: { paths, logging, run }`.
- Views raise `omegaconf.errors.ReadonlyConfigError` on write. Convert to a
  plain dict when derived values must change:
      from omegaconf import OmegaConf
      run = OmegaConf.to_container(frontlab_run_view(cfg), resolve=True)
"""

from __future__ import annotations

from mxm_config import MXMConfig, make_view


def frontlab_view(cfg: MXMConfig, *, resolve: bool = True) -> MXMConfig:
    """Return the `frontlab` subtree (read-only view)."""
    return make_view(cfg, "frontlab", resolve=resolve)


def frontlab_paths_view(cfg: MXMConfig, *, resolve: bool = True) -> MXMConfig:
    """Return `frontlab.paths` (read-only view)."""
    return make_view(frontlab_view(cfg, resolve=resolve), "paths", resolve=resolve)


def frontlab_run_view(cfg: MXMConfig, *, resolve: bool = True) -> MXMConfig:
    """Return the packaged run defaults `frontlab.run` (read-only view)."""
    return make_view(frontlab_view(cfg, resolve=resolve), "run", resolve=resolve)


__all__ = [
    "frontlab_paths_view",
    "frontlab_run_view",
    "frontlab_view",
]
