"""Run-config files: load, merge over packaged defaults, validate.

A run file is a YAML document with any subset of the blocks of the packaged
``frontlab.run`` defaults::

    model:    {d1, d2, a11, a12, a22, mu, rho_flux, h0}
    G:        {family, params}
    kernels:  {J1: {family, params}, J2: ..., K: ...}
    init:     {A, B}
    sim:      SimConfig knobs
    semiwave: SemiWaveConfig knobs
    envelopes, subeig, analysis, sweep, output

Missing keys take the packaged defaults. With an mxm-config env or profile
the defaults are the layered ``frontlab.run`` subtree instead (see
``layered_defaults``), so a profile's horizon or an env's archive flag reaches
the run. A ``family`` given for a kernel or
for G replaces the default parameters of that node instead of merging them.

Validation never stops at the first problem: every ``(key_path, message)``
pair is collected and raised together in one ``ValidationError``.
"""

from __future__ import annotations

import copy
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path
from typing import Any, cast

from mxm_config import MXMConfig, make_subconfig
from omegaconf import DictConfig, OmegaConf

from mxm_frontlab.analysis import Thresholds
from mxm_frontlab.config.config import frontlab_run_view
from mxm_frontlab.envelopes import EnvelopeCase, EnvelopeSearch, SampleGrid, log_grid
from mxm_frontlab.errors import ValidationError
from mxm_frontlab.kernels import Kernel, KernelSpec, normalize
from mxm_frontlab.model import GFunction, ModelParams, make_G, validate_G
from mxm_frontlab.provenance import config_hash
from mxm_frontlab.semiwave import SemiWaveConfig
from mxm_frontlab.simulator import InitProfile, KernelSet, SimConfig
from mxm_frontlab.subeig import ProfileFamily, ProfileSpec
from mxm_frontlab.types import PathLike

logger = logging.getLogger(__name__)

RUN_BLOCKS = (
    "model",
    "G",
    "kernels",
    "init",
    "sim",
    "semiwave",
    "envelopes",
    "subeig",
    "analysis",
    "sweep",
    "output",
)
KERNEL_NAMES = ("J1", "J2", "K")

# --------------------------------------------------------------------------- #
# Typed blocks
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class EnvelopeSettings:
    lower_case: EnvelopeCase
    upper_case: EnvelopeCase
    search: EnvelopeSearch
    compare_window: tuple[float, float] | None = None


@dataclass(frozen=True, slots=True)
class SubEigSettings:
    template: ProfileSpec
    epsilon: float
    grid_n: int
    L_grid: tuple[float, ...]


@dataclass(frozen=True, slots=True)
class AnalysisSettings:
    window: tuple[float, float] | None
    rms_tie: float
    thresholds: Thresholds


@dataclass(frozen=True, slots=True)
class SweepSettings:
    alphas: tuple[float, ...]
    jobs: int


@dataclass(frozen=True, slots=True)
class OutputSettings:
    dir: Path
    plot: bool
    snapshots: bool
    archive: bool


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Fully validated run configuration.

    ``view`` is a read-only ``MXMConfig`` over the merged tree and
    ``config_hash`` the SHA-256 of its deterministic JSON.
    """

    model: ModelParams
    G: GFunction
    kernels: KernelSet
    init: InitProfile
    sim: SimConfig
    semiwave: SemiWaveConfig
    envelopes: EnvelopeSettings
    subeig: SubEigSettings
    analysis: AnalysisSettings
    sweep: SweepSettings
    output: OutputSettings
    view: MXMConfig
    config_hash: str
    source: Path | None = None

    def as_dict(self) -> dict[str, Any]:
        """Plain, picklable copy of the merged tree."""
        return cast(dict[str, Any], OmegaConf.to_container(self.view, resolve=True))


# --------------------------------------------------------------------------- #
# Defaults and merging
# --------------------------------------------------------------------------- #


def packaged_defaults() -> dict[str, Any]:
    """The ``frontlab.run`` subtree of the packaged ``default.yaml``."""
    text = files("mxm_frontlab.config").joinpath("default.yaml").read_text(encoding="utf-8")
    base = cast(DictConfig, OmegaConf.create(text))
    return cast(dict[str, Any], OmegaConf.to_container(base.frontlab.run, resolve=False))


def _family_nodes(tree: Mapping[str, Any]) -> list[tuple[tuple[str, ...], Any]]:
    nodes: list[tuple[tuple[str, ...], Any]] = [(("G",), tree.get("G"))]
    kernels = tree.get("kernels")
    if isinstance(kernels, Mapping):
        for name in KERNEL_NAMES:
            nodes.append((("kernels", name), cast(Mapping[str, Any], kernels).get(name)))
    return nodes


def layered_defaults(pkg: MXMConfig) -> dict[str, Any]:
    """The ``frontlab.run`` subtree of a loaded mxm-config, env and profile applied."""
    return cast(dict[str, Any], OmegaConf.to_container(frontlab_run_view(pkg), resolve=True))


def merge_over_defaults(
    user: Mapping[str, Any], defaults: Mapping[str, Any] | None = None
) -> dict[str, Any]:
    """Merge ``user`` over ``defaults`` (packaged ones if None) and resolve."""
    base = packaged_defaults() if defaults is None else copy.deepcopy(dict(defaults))
    for path, node in _family_nodes(user):
        if isinstance(node, Mapping) and "family" in node:
            target = base
            for key in path[:-1]:
                target = target[key]
            target[path[-1]] = {"family": None, "params": {}}
    merged = OmegaConf.merge(OmegaConf.create(base), OmegaConf.create(dict(user)))
    return cast(dict[str, Any], OmegaConf.to_container(merged, resolve=True))


def _unknown_keys(
    user: Mapping[str, Any], defaults: Mapping[str, Any], prefix: str = ""
) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    for key, value in user.items():
        path = f"{prefix}.{key}" if prefix else str(key)
        if key not in defaults:
            what = "block" if not prefix else "key"
            out.append((path, f"unknown {what}"))
            continue
        if key == "params":
            continue
        default = defaults[key]
        if isinstance(value, Mapping) and isinstance(default, Mapping):
            out.extend(_unknown_keys(cast(Mapping[str, Any], value), default, path))
    return out


# --------------------------------------------------------------------------- #
# Field readers
# --------------------------------------------------------------------------- #


class _Collector:
    """Accumulates ``(key_path, message)`` pairs while reading a tree."""

    def __init__(self) -> None:
        self.errors: list[tuple[str, str]] = []

    def add(self, path: str, message: str) -> None:
        self.errors.append((path, message))

    def extend(self, prefix: str, errors: Sequence[tuple[str, str]]) -> None:
        for key, msg in errors:
            self.add(f"{prefix}.{key}" if key else prefix, msg)

    def num(self, block: Mapping[str, Any], prefix: str, key: str, default: float) -> float:
        value = block.get(key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.add(f"{prefix}.{key}", f"must be a number, got {value!r}")
            return default
        if not math.isfinite(value):
            self.add(f"{prefix}.{key}", f"must be finite, got {value!r}")
            return default
        return float(value)

    def integer(self, block: Mapping[str, Any], prefix: str, key: str, default: int) -> int:
        value = block.get(key)
        if isinstance(value, bool) or not isinstance(value, int):
            self.add(f"{prefix}.{key}", f"must be an integer, got {value!r}")
            return default
        return value

    def flag(self, block: Mapping[str, Any], prefix: str, key: str) -> bool:
        value = block.get(key)
        if not isinstance(value, bool):
            self.add(f"{prefix}.{key}", f"must be true or false, got {value!r}")
            return False
        return value

    def numbers(self, value: Any, path: str) -> tuple[float, ...] | None:
        if not isinstance(value, Sequence) or isinstance(value, str):
            self.add(path, f"must be a list of numbers, got {value!r}")
            return None
        items = cast(Sequence[Any], value)
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in items):
            self.add(path, f"must contain numbers only, got {list(items)!r}")
            return None
        return tuple(float(v) for v in items)

    def window(self, value: Any, path: str) -> tuple[float, float] | None:
        if value is None:
            return None
        pair = self.numbers(value, path)
        if pair is None:
            return None
        if len(pair) != 2 or not 0.0 <= pair[0] < pair[1]:
            self.add(path, f"must be [t_lo, t_hi] with 0 <= t_lo < t_hi, got {list(pair)}")
            return None
        return pair[0], pair[1]


def _block(tree: Mapping[str, Any], name: str, col: _Collector) -> Mapping[str, Any]:
    node = tree.get(name)
    if not isinstance(node, Mapping):
        col.add(name, "must be a mapping")
        return {}
    return cast(Mapping[str, Any], node)


# --------------------------------------------------------------------------- #
# Block readers
# --------------------------------------------------------------------------- #


def _read_model(tree: Mapping[str, Any], col: _Collector) -> ModelParams | None:
    block = _block(tree, "model", col)
    before = len(col.errors)
    defaults = ModelParams()
    values = {
        key: col.num(block, "model", key, getattr(defaults, key))
        for key in ("d1", "d2", "a11", "a12", "a22", "mu", "rho_flux", "h0")
    }
    params = ModelParams(**values)
    col.extend("model", params.errors())
    return params if len(col.errors) == before else None


def _read_G(
    tree: Mapping[str, Any], params: ModelParams | None, col: _Collector
) -> GFunction | None:
    block = _block(tree, "G", col)
    family = block.get("family")
    raw = block.get("params") or {}
    if not isinstance(family, str):
        col.add("G.family", f"must be a family name, got {family!r}")
        return None
    if family == "custom":
        col.add("G.family", "custom G is only available from the Python API")
        return None
    if not isinstance(raw, Mapping):
        col.add("G.params", "must be a mapping")
        return None
    try:
        G = make_G(family, **cast(Mapping[str, Any], raw))
    except ValidationError as exc:
        col.extend("G", exc.errors)
        return None
    if params is not None:
        report = validate_G(G, params)
        for msg in report.messages:
            col.add("G", msg)
    return G


def _read_kernel(name: str, node: Any, col: _Collector) -> Kernel | None:
    path = f"kernels.{name}"
    if not isinstance(node, Mapping):
        col.add(path, "must be a mapping with family and params")
        return None
    node = cast(Mapping[str, Any], node)
    family = node.get("family")
    raw = node.get("params") or {}
    if not isinstance(family, str):
        col.add(f"{path}.family", f"must be a family name, got {family!r}")
        return None
    if not isinstance(raw, Mapping):
        col.add(f"{path}.params", "must be a mapping")
        return None
    try:
        return normalize(KernelSpec(family, dict(cast(Mapping[str, Any], raw))))
    except ValidationError as exc:
        col.extend(path, exc.errors)
        return None


def _read_kernels(tree: Mapping[str, Any], col: _Collector) -> KernelSet | None:
    block = _block(tree, "kernels", col)
    built = [_read_kernel(name, block.get(name), col) for name in KERNEL_NAMES]
    if any(k is None for k in built):
        return None
    J1, J2, K = cast(list[Kernel], built)
    return KernelSet(J1, J2, K)


def _read_init(tree: Mapping[str, Any], col: _Collector) -> InitProfile:
    block = _block(tree, "init", col)
    A = col.num(block, "init", "A", 1.0)
    B = col.num(block, "init", "B", 1.0)
    for key, value in (("A", A), ("B", B)):
        if not value > 0:
            col.add(f"init.{key}", f"must be positive, got {value}")
    return InitProfile(A, B)


def _read_sim(
    tree: Mapping[str, Any], params: ModelParams | None, col: _Collector
) -> SimConfig:
    block = _block(tree, "sim", col)
    d = SimConfig()
    max_length = block.get("max_length")
    if max_length is not None:
        max_length = col.num(block, "sim", "max_length", 1.0)
    sim = SimConfig(
        dx=col.num(block, "sim", "dx", d.dx),
        dt=col.num(block, "sim", "dt", d.dt),
        T=col.num(block, "sim", "T", d.T),
        snapshot_every=col.integer(block, "sim", "snapshot_every", d.snapshot_every),
        vanish_threshold=col.num(block, "sim", "vanish_threshold", d.vanish_threshold),
        spread_threshold=col.num(block, "sim", "spread_threshold", d.spread_threshold),
        stall_steps=col.integer(block, "sim", "stall_steps", d.stall_steps),
        stall_tol=col.num(block, "sim", "stall_tol", d.stall_tol),
        neg_tol=col.num(block, "sim", "neg_tol", d.neg_tol),
        conv_method=block.get("conv_method", d.conv_method),
        max_length=max_length,
        log_every=col.integer(block, "sim", "log_every", d.log_every),
    )
    col.extend("sim", sim.errors(params))
    return sim


def _read_semiwave(tree: Mapping[str, Any], sim: SimConfig, col: _Collector) -> SemiWaveConfig:
    block = _block(tree, "semiwave", col)
    d = SemiWaveConfig()
    bracket = col.numbers(block.get("c_bracket"), "semiwave.c_bracket")
    if bracket is not None and len(bracket) != 2:
        col.add("semiwave.c_bracket", f"must be [c_lo, c_hi], got {list(bracket)}")
        bracket = None
    cfg = SemiWaveConfig(
        L_trunc=col.num(block, "semiwave", "L_trunc", d.L_trunc),
        n=col.integer(block, "semiwave", "n", d.n),
        fix_tol=col.num(block, "semiwave", "fix_tol", d.fix_tol),
        c_bracket=(bracket[0], bracket[1]) if bracket else d.c_bracket,
        max_iter=col.integer(block, "semiwave", "max_iter", d.max_iter),
        damping=col.num(block, "semiwave", "damping", d.damping),
        ramp_width=col.num(block, "semiwave", "ramp_width", d.ramp_width),
        conv_method=sim.conv_method,
    )
    col.extend("semiwave", cfg.errors())
    return cfg


def _read_grid(block: Mapping[str, Any], key: str, col: _Collector) -> tuple[float, ...]:
    path = f"envelopes.{key}"
    spec = col.numbers(block.get(key), path)
    fallback = cast(tuple[float, ...], getattr(EnvelopeSearch(), key))
    if spec is None:
        return fallback
    if len(spec) != 3 or not 0 < spec[0] <= spec[1] or spec[2] < 1 or spec[2] != int(spec[2]):
        col.add(path, f"must be [lo, hi, count] with 0 < lo <= hi and count >= 1, got {list(spec)}")
        return fallback
    return log_grid(spec[0], spec[1], int(spec[2]))


def _read_case(block: Mapping[str, Any], key: str, col: _Collector) -> EnvelopeCase:
    value = block.get(key)
    fallback = EnvelopeCase.LOWER_J2DOM_ALPHA_IN_1_2 if key == "lower_case" else EnvelopeCase.UPPER_POWER
    try:
        case = EnvelopeCase(value)
    except ValueError:
        names = ", ".join(c.value for c in EnvelopeCase)
        col.add(f"envelopes.{key}", f"unknown envelope case {value!r} (expected one of {names})")
        return fallback
    if key == "lower_case" and not case.is_lower:
        col.add(f"envelopes.{key}", f"{case.value} is not a lower case")
    if key == "upper_case" and not case.is_upper:
        col.add(f"envelopes.{key}", f"{case.value} is not an upper case")
    return case


def _read_envelopes(tree: Mapping[str, Any], col: _Collector) -> EnvelopeSettings:
    block = _block(tree, "envelopes", col)
    T_check = col.num(block, "envelopes", "T_check", 200.0)
    sample = SampleGrid(
        T_check,
        col.integer(block, "envelopes", "n_t", 64),
        col.integer(block, "envelopes", "n_x", 128),
    )
    coarse = SampleGrid(
        T_check,
        col.integer(block, "envelopes", "coarse_n_t", 8),
        col.integer(block, "envelopes", "coarse_n_x", 16),
    )
    col.extend("envelopes", sample.errors())
    col.extend("envelopes.coarse", coarse.errors())
    lam = col.num(block, "envelopes", "lam", 2.0)
    lam_critical = col.num(block, "envelopes", "lam_critical", 3.0)
    beta = col.num(block, "envelopes", "beta", 0.4)
    if lam < 1:
        col.add("envelopes.lam", f"must be >= 1, got {lam}")
    if lam_critical < 2:
        col.add("envelopes.lam_critical", f"must be >= 2, got {lam_critical}")
    if not 0 < beta < 1:
        col.add("envelopes.beta", f"must lie in (0, 1), got {beta}")
    search = EnvelopeSearch(
        sample=sample,
        coarse=coarse,
        C1=_read_grid(block, "C1", col),
        C2=_read_grid(block, "C2", col),
        C3=_read_grid(block, "C3", col),
        sigma=_read_grid(block, "sigma", col),
        C=_read_grid(block, "C", col),
        upper_sigma=_read_grid(block, "upper_sigma", col),
        lam=lam,
        lam_critical=lam_critical,
        beta=beta,
    )
    return EnvelopeSettings(
        lower_case=_read_case(block, "lower_case", col),
        upper_case=_read_case(block, "upper_case", col),
        search=search,
        compare_window=col.window(block.get("compare_window"), "envelopes.compare_window"),
    )


def _read_subeig(tree: Mapping[str, Any], col: _Collector) -> SubEigSettings:
    block = _block(tree, "subeig", col)
    raw_family = block.get("family")
    try:
        family = ProfileFamily(raw_family)
    except ValueError:
        col.add("subeig.family", f"unknown profile family {raw_family!r}")
        family = ProfileFamily.POWER_KINK
    if family is ProfileFamily.CUSTOM:
        col.add("subeig.family", "custom profiles are only available from the Python API")
        family = ProfileFamily.POWER_KINK
    L_grid = col.numbers(block.get("L_grid"), "subeig.L_grid") or (1.0,)
    if not L_grid or any(v <= 0 for v in L_grid):
        col.add("subeig.L_grid", "must be a non-empty list of positive lengths")
    elif any(b <= a for a, b in zip(L_grid, L_grid[1:])):
        col.add("subeig.L_grid", "must be strictly increasing")
    template = ProfileSpec(
        family,
        L_grid[0] if L_grid and L_grid[0] > 0 else 1.0,
        lam=col.num(block, "subeig", "lam", 2.0),
        eta=col.num(block, "subeig", "eta", 0.9),
        eta1=col.num(block, "subeig", "eta1", 4.0),
        eta2=col.num(block, "subeig", "eta2", 0.9),
    )
    col.extend("subeig", template.errors())
    epsilon = col.num(block, "subeig", "epsilon", 0.1)
    if not 0.0 <= epsilon < 1.0:
        col.add("subeig.epsilon", f"must lie in [0, 1), got {epsilon}")
    grid_n = col.integer(block, "subeig", "grid_n", 4097)
    if grid_n < 512:
        col.add("subeig.grid_n", f"must be >= 512, got {grid_n}")
    return SubEigSettings(template, epsilon, grid_n, L_grid)


def _read_analysis(
    tree: Mapping[str, Any], sim: SimConfig, col: _Collector
) -> AnalysisSettings:
    block = _block(tree, "analysis", col)
    rms_tie = col.num(block, "analysis", "rms_tie", 0.05)
    center_tol = col.num(block, "analysis", "center_tol", 0.1)
    if not rms_tie > 0:
        col.add("analysis.rms_tie", f"must be positive, got {rms_tie}")
    if not center_tol > 0:
        col.add("analysis.center_tol", f"must be positive, got {center_tol}")
    thresholds = Thresholds(
        spread_threshold=sim.spread_threshold,
        vanish_threshold=sim.vanish_threshold,
        stall_tol=sim.stall_tol,
        stall_steps=sim.stall_steps,
        center_tol=center_tol,
    )
    window = col.window(block.get("window"), "analysis.window")
    return AnalysisSettings(window, rms_tie, thresholds)


def _read_sweep(tree: Mapping[str, Any], col: _Collector) -> SweepSettings:
    block = _block(tree, "sweep", col)
    alphas = col.numbers(block.get("alphas") or [], "sweep.alphas") or ()
    jobs = col.integer(block, "sweep", "jobs", 1)
    if jobs < 1:
        col.add("sweep.jobs", f"must be >= 1, got {jobs}")
    return SweepSettings(alphas, max(jobs, 1))


def _read_output(tree: Mapping[str, Any], col: _Collector) -> OutputSettings:
    block = _block(tree, "output", col)
    raw_dir = block.get("dir")
    if not isinstance(raw_dir, str) or not raw_dir:
        col.add("output.dir", f"must be a non-empty path, got {raw_dir!r}")
        raw_dir = "runs"
    return OutputSettings(
        dir=Path(raw_dir),
        plot=col.flag(block, "output", "plot"),
        snapshots=col.flag(block, "output", "snapshots"),
        archive=col.flag(block, "output", "archive"),
    )


# --------------------------------------------------------------------------- #
# Public API
# --------------------------------------------------------------------------- #


def build_run_config(
    user: Mapping[str, Any],
    source: Path | None = None,
    defaults: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Validate a user tree (already parsed) against ``defaults``.

    ``defaults`` is a full ``frontlab.run`` tree; None means the packaged one.

    Raises
    ------
    ValidationError
        With every problem found, each tagged by its key path.
    """
    col = _Collector()
    base = packaged_defaults() if defaults is None else defaults
    col.errors.extend(_unknown_keys(user, base))
    try:
        tree = merge_over_defaults({k: v for k, v in user.items() if k in RUN_BLOCKS}, base)
    except Exception as exc:
        raise ValidationError(f"cannot merge run config: {exc}") from exc

    model = _read_model(tree, col)
    G = _read_G(tree, model, col)
    kernels = _read_kernels(tree, col)
    init = _read_init(tree, col)
    sim = _read_sim(tree, model, col)
    semiwave = _read_semiwave(tree, sim, col)
    envelopes = _read_envelopes(tree, col)
    subeig = _read_subeig(tree, col)
    analysis = _read_analysis(tree, sim, col)
    sweep = _read_sweep(tree, col)
    output = _read_output(tree, col)

    if col.errors or model is None or G is None or kernels is None:
        where = f" in {source}" if source is not None else ""
        raise ValidationError(f"invalid run config{where}", col.errors)

    digest = config_hash(tree)
    logger.debug("run config %s validated (hash %s)", source or "<mapping>", digest[:12])
    return RunConfig(
        model=model,
        G=G,
        kernels=kernels,
        init=init,
        sim=sim,
        semiwave=semiwave,
        envelopes=envelopes,
        subeig=subeig,
        analysis=analysis,
        sweep=sweep,
        output=output,
        view=make_subconfig(tree),
        config_hash=digest,
        source=source,
    )


def load_config(path: PathLike, defaults: Mapping[str, Any] | None = None) -> RunConfig:
    """Read a YAML run file and return the validated ``RunConfig``."""
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"run config not found: {p}", [("", f"no such file: {p}")])
    try:
        raw = OmegaConf.load(p)
    except Exception as exc:
        raise ValidationError(f"cannot parse {p}: {exc}") from exc
    if not isinstance(raw, DictConfig):
        raise ValidationError(f"{p} must hold a mapping of run blocks")
    try:
        user = cast(dict[str, Any], OmegaConf.to_container(raw, resolve=True))
    except Exception as exc:
        raise ValidationError(f"cannot resolve {p}: {exc}") from exc
    return build_run_config(user, source=p, defaults=defaults)


def with_alpha(tree: Mapping[str, Any], alpha: float) -> dict[str, Any]:
    """Copy of ``tree`` with every power-law kernel set to exponent ``alpha``."""
    out = copy.deepcopy(dict(tree))
    kernels = out.get("kernels")
    if isinstance(kernels, dict):
        for name in KERNEL_NAMES:
            node = cast(dict[str, Any], kernels).get(name)
            if isinstance(node, dict) and node.get("family") == "power_law":
                params = dict(cast(Mapping[str, Any], node.get("params") or {}))
                params["alpha"] = float(alpha)
                node["params"] = params
    return out


__all__ = [
    "AnalysisSettings",
    "EnvelopeSettings",
    "OutputSettings",
    "RUN_BLOCKS",
    "RunConfig",
    "SubEigSettings",
    "SweepSettings",
    "build_run_config",
    "layered_defaults",
    "load_config",
    "merge_over_defaults",
    "packaged_defaults",
    "with_alpha",
]
