"""Command-line entry point: ``frontlab <command> ...``.

Commands
--------
simulate         run the free-boundary solver and classify the outcome
sweep            simulate once per kernel exponent and fit the front law
rates            fit growth laws to a trajectory CSV
semiwave         solve for the semi-wave speed and profiles
verify-subeig    find the smallest admissible profile scale
verify-envelope  search envelope constants, optionally compare with a run
plot             draw a trajectory CSV with a fitted law

Every command writes ``report.json`` (plus its data files) into an output
directory named after the command and the config hash, so a replay lands in
the same place and overwrites byte-identical files.

Exit codes: 0 success (including an undecided verdict), 1 invalid input,
2 solver abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from mxm_config import MXMConfig, make_subconfig
from mxm_config import load_config as load_mxm_config

from mxm_frontlab.analysis import (
    RateFit,
    RateLaw,
    check_invariants,
    classify,
    fit_linear_speed,
    fit_power,
    fit_tlnt,
    select_law,
    theory_rate,
)
from mxm_frontlab.api import LabSession
from mxm_frontlab.config.config import frontlab_view
from mxm_frontlab.envelopes import (
    envelope_compare,
    front_curves,
    search_constants,
)
from mxm_frontlab.errors import FrontlabError, SolverAbort, ValidationError
from mxm_frontlab.kernels import Kernel, PowerLawKernel, check_conditions
from mxm_frontlab.model import (
    basic_reproduction_number,
    linearized_eigenpair,
    positive_equilibrium,
)
from mxm_frontlab.provenance import ArtifactKind, config_hash, file_checksum
from mxm_frontlab.reporting import (
    build_report,
    plot_fronts,
    plot_profiles,
    read_trajectory_csv,
    write_curves_csv,
    write_profile_csv,
    write_report,
    write_snapshot_csv,
    write_trajectory_csv,
)
from mxm_frontlab.runconfig import (
    RunConfig,
    build_run_config,
    layered_defaults,
    load_config,
    with_alpha,
)
from mxm_frontlab.semiwave import solve_speed
from mxm_frontlab.simulator import Trajectory, comparison_bound, run
from mxm_frontlab.subeig import (
    check_convexity,
    convexity_region,
    minimal_scale,
    verify_subeigen,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "[%(asctime)s] %(levelname)s %(name)s: %(message)s"
PACKAGE = "mxm-frontlab"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ABORT = 2

# --------------------------------------------------------------------------- #
# Command plumbing
# --------------------------------------------------------------------------- #


@dataclass(slots=True)
class CommandResult:
    """What a command produced: report results plus the files it wrote."""

    results: dict[str, Any]
    artifacts: list[tuple[Path, ArtifactKind]] = field(default_factory=list)

    def add(self, path: Path, kind: ArtifactKind) -> Path:
        self.artifacts.append((path, kind))
        return path


type Handler = Callable[[argparse.Namespace, RunConfig | None, Path], CommandResult]


def _package_config(args: argparse.Namespace) -> MXMConfig | None:
    if args.env is None and args.profile is None:
        return None
    return load_mxm_config(
        package=PACKAGE, env=args.env or "dev", profile=args.profile or "default"
    )


def _output_root(args: argparse.Namespace, cfg: RunConfig | None, pkg: MXMConfig | None) -> Path:
    if args.out is not None:
        return Path(args.out)
    if pkg is not None:
        return Path(str(frontlab_view(pkg).paths.output_root))  # type: ignore[attr-defined]
    if cfg is not None:
        return cfg.output.dir
    return Path("runs")


def _archive_view(root: Path, pkg: MXMConfig | None) -> MXMConfig:
    if pkg is not None:
        return frontlab_view(pkg)
    return make_subconfig(
        {"paths": {"root": str(root), "db_path": str(root / "frontlab.sqlite")}}
    )


def _tail_alpha(kernels: Sequence[Kernel]) -> float | None:
    """Smallest power-law exponent among the given kernels (the heaviest tail)."""
    alphas = [k.alpha for k in kernels if isinstance(k, PowerLawKernel)]
    return min(alphas) if alphas else None


def _fit_summary(
    traj: Trajectory, alpha: float | None, window: tuple[float, float] | None, rms_tie: float
) -> dict[str, Any]:
    """Every fit that applies to the window; failures are reported, not raised."""
    out: dict[str, Any] = {}
    fits: list[tuple[str, Callable[[], Any]]] = [
        ("power", lambda: fit_power(traj, window, alpha)),
        ("t_log_t", lambda: fit_tlnt(traj, window)),
        ("linear", lambda: fit_linear_speed(traj, window)),
        ("selection", lambda: select_law(traj, window, rms_tie)),
    ]
    for name, fit in fits:
        try:
            out[name] = fit().to_json()
        except ValidationError as exc:
            out[name] = {"error": str(exc)}
    if alpha is not None:
        try:
            out["theory"] = theory_rate(alpha).to_json()
        except ValidationError as exc:
            out["theory"] = {"error": str(exc)}
    return out


def _best_fit(
    traj: Trajectory, alpha: float | None, window: tuple[float, float] | None
) -> RateFit | None:
    try:
        if alpha is not None and alpha == 2.0:
            return fit_tlnt(traj, window)
        if alpha is not None and alpha < 2.0:
            return fit_power(traj, window, alpha)
        return fit_linear_speed(traj, window)
    except ValidationError as exc:
        logger.info("no fitted law: %s", exc)
        return None


# --------------------------------------------------------------------------- #
# simulate
# --------------------------------------------------------------------------- #


def _simulate(cfg: RunConfig) -> tuple[Trajectory, dict[str, Any]]:
    traj = run(cfg.model, cfg.G, cfg.kernels, cfg.init, cfg.sim)
    eq = positive_equilibrium(cfg.model, cfg.G)
    verdict = classify(traj, cfg.analysis.thresholds, eq)
    M = comparison_bound(eq, cfg.init.A, cfg.init.B) if eq.exists else None
    invariants = check_invariants(traj, eq, M)
    results: dict[str, Any] = {
        "model": cfg.model.to_json(),
        "G": cfg.G.to_json(),
        "kernels": cfg.kernels.to_json(),
        "R0": basic_reproduction_number(cfg.model, cfg.G),
        "equilibrium": eq.to_json(),
        "trajectory": traj.to_json(),
        "verdict": {"kind": verdict.kind.value, "evidence": verdict.evidence},
        "invariants": invariants.to_json(),
        "comparison_bound": M,
    }
    return traj, results


def cmd_simulate(args: argparse.Namespace, cfg: RunConfig | None, out: Path) -> CommandResult:
    assert cfg is not None
    traj, results = _simulate(cfg)
    res = CommandResult(results)
    res.add(write_trajectory_csv(out / "trajectory.csv", traj), ArtifactKind.TRAJECTORY)
    if cfg.output.snapshots:
        for i, snap in enumerate(traj.snapshots):
            path = out / "snapshots" / f"snapshot_{i:04d}.csv"
            res.add(write_snapshot_csv(path, snap), ArtifactKind.SNAPSHOT)
    alpha = _tail_alpha([cfg.kernels.J1, cfg.kernels.J2])
    fit = None
    if results["verdict"]["kind"] == "spreading":
        results["rates"] = _fit_summary(traj, alpha, cfg.analysis.window, cfg.analysis.rms_tie)
        fit = _best_fit(traj, alpha, cfg.analysis.window)
    if cfg.output.plot:
        res.add(plot_fronts(out / "fronts.svg", traj, fit), ArtifactKind.PLOT)
    return res


# --------------------------------------------------------------------------- #
# sweep
# --------------------------------------------------------------------------- #


def sweep_row(tree: Mapping[str, Any], alpha: float) -> dict[str, Any]:
    """One isolated sweep entry; any package error becomes an error row."""
    row: dict[str, Any] = {"alpha": alpha}
    try:
        theory = theory_rate(alpha)
        row["theory_law"] = theory.law.value
        row["theory_exponent"] = theory.exponent
        cfg = build_run_config(with_alpha(tree, alpha))
        traj, results = _simulate(cfg)
        row["verdict"] = results["verdict"]["kind"]
        row["h_end"] = float(traj.h[-1])
        if row["verdict"] != "spreading":
            row["error"] = "run did not spread; no rate fitted"
            return row
        window = cfg.analysis.window
        if theory.law is RateLaw.T_LOG_T:
            selection = select_law(traj, window, cfg.analysis.rms_tie)
            row["law"] = selection.law
            row["coefficient"] = selection.t_log_t.coefficient
            row["exponent"] = selection.power.exponent
            row["rms_residual"] = selection.t_log_t.rms_residual
        else:
            fit = fit_power(traj, window, alpha)
            row["law"] = fit.law.value
            row["coefficient"] = fit.coefficient
            row["exponent"] = fit.exponent
            row["rms_residual"] = fit.rms_residual
            row["sharp_constant_estimate"] = fit.sharp_constant_estimate
    except FrontlabError as exc:
        row["error"] = str(exc)
    logger.info("sweep alpha=%g: %s", alpha, row.get("law", row.get("error")))
    return row


def _run_sweep(tree: Mapping[str, Any], alphas: Sequence[float], jobs: int) -> list[dict[str, Any]]:
    if not alphas:
        return []
    if jobs <= 1 or len(alphas) == 1:
        return [sweep_row(tree, a) for a in alphas]
    rows: list[dict[str, Any]] = []
    with ProcessPoolExecutor(max_workers=min(jobs, len(alphas))) as pool:
        futures = [pool.submit(sweep_row, dict(tree), a) for a in alphas]
        for alpha, fut in zip(alphas, futures):
            try:
                rows.append(fut.result())
            except Exception as exc:
                rows.append({"alpha": alpha, "error": f"worker failed: {exc}"})
    return rows


def cmd_sweep(args: argparse.Namespace, cfg: RunConfig | None, out: Path) -> CommandResult:
    assert cfg is not None
    alphas = tuple(args.alphas) if args.alphas is not None else cfg.sweep.alphas
    rows = _run_sweep(cfg.as_dict(), alphas, cfg.sweep.jobs)
    return CommandResult({"alphas": list(alphas), "rows": rows})


# --------------------------------------------------------------------------- #
# rates / plot
# --------------------------------------------------------------------------- #


def _window_arg(args: argparse.Namespace, cfg: RunConfig | None) -> tuple[float, float] | None:
    if args.window is not None:
        lo, hi = args.window
        return float(lo), float(hi)
    return cfg.analysis.window if cfg is not None else None


def cmd_rates(args: argparse.Namespace, cfg: RunConfig | None, out: Path) -> CommandResult:
    traj = read_trajectory_csv(args.trajectory)
    alpha = args.alpha
    if alpha is None and cfg is not None:
        alpha = _tail_alpha([cfg.kernels.J1, cfg.kernels.J2])
    rms_tie = cfg.analysis.rms_tie if cfg is not None else 0.05
    window = _window_arg(args, cfg)
    return CommandResult(
        {"trajectory": str(args.trajectory), "alpha": alpha, "fits": _fit_summary(traj, alpha, window, rms_tie)}
    )


_LAW_FITS: dict[str, Callable[[Trajectory, tuple[float, float] | None], RateFit]] = {
    "power": lambda t, w: fit_power(t, w),
    "t_log_t": fit_tlnt,
    "linear": fit_linear_speed,
}


def cmd_plot(args: argparse.Namespace, cfg: RunConfig | None, out: Path) -> CommandResult:
    traj = read_trajectory_csv(args.trajectory)
    window = _window_arg(args, cfg)
    fit = None if args.law == "none" else _LAW_FITS[args.law](traj, window)
    target = Path(args.output) if args.output else out / "fronts.svg"
    res = CommandResult({"trajectory": str(args.trajectory), "law": args.law})
    if fit is not None:
        res.results["fit"] = fit.to_json()
    res.add(plot_fronts(target, traj, fit), ArtifactKind.PLOT)
    res.results["svg"] = str(target)
    return res


# --------------------------------------------------------------------------- #
# semiwave / verify-subeig / verify-envelope
# --------------------------------------------------------------------------- #


def cmd_semiwave(args: argparse.Namespace, cfg: RunConfig | None, out: Path) -> CommandResult:
    assert cfg is not None
    sol = solve_speed(cfg.model, cfg.G, cfg.kernels, cfg.semiwave)
    eq = positive_equilibrium(cfg.model, cfg.G)
    res = CommandResult(
        {
            "semiwave": sol.to_json(),
            "equilibrium": eq.to_json(),
            "boundary_values": [float(sol.phi1[0]), float(sol.phi2[0])],
            "kernels": {
                "J1": check_conditions(cfg.kernels.J1).to_json(),
                "J2": check_conditions(cfg.kernels.J2).to_json(),
            },
        }
    )
    res.add(write_profile_csv(out / "profile.csv", sol), ArtifactKind.PROFILE)
    if cfg.output.plot:
        res.add(plot_profiles(out / "profile.svg", sol), ArtifactKind.PLOT)
    return res


def cmd_verify_subeig(args: argparse.Namespace, cfg: RunConfig | None, out: Path) -> CommandResult:
    assert cfg is not None
    kernel = getattr(cfg.kernels, args.kernel)
    s = cfg.subeig
    L, reports = minimal_scale(kernel, s.template, s.epsilon, s.L_grid, s.grid_n)
    results: dict[str, Any] = {
        "kernel": args.kernel,
        "profile": s.template.to_json(),
        "epsilon": s.epsilon,
        "minimal_L": L,
        "scan": [r.to_json() for r in reports],
        "convexity": check_convexity(s.template, convexity_region(s.template)),
    }
    if L is not None:
        doubled = replace(s.template, L=2.0 * L)
        results["at_2L"] = verify_subeigen(kernel, doubled, s.epsilon, s.grid_n).to_json()
    return CommandResult(results)


def cmd_verify_envelope(
    args: argparse.Namespace, cfg: RunConfig | None, out: Path
) -> CommandResult:
    assert cfg is not None
    env = cfg.envelopes
    eq = positive_equilibrium(cfg.model, cfg.G)
    M = comparison_bound(eq, cfg.init.A, cfg.init.B) if eq.exists else 1.01
    results: dict[str, Any] = {"equilibrium": eq.to_json(), "M": M}
    if eq.exists:
        results["eigenpair"] = linearized_eigenpair(cfg.model, cfg.G, eq).to_json()
    lower = search_constants(env.lower_case, cfg.model, cfg.G, cfg.kernels, env.search)
    upper = search_constants(env.upper_case, cfg.model, cfg.G, cfg.kernels, env.search, M=M)
    results["lower"] = lower.to_json()
    results["upper"] = upper.to_json()
    res = CommandResult(results)
    if not args.compare:
        return res

    traj, sim_results = _simulate(cfg)
    results["simulation"] = {k: sim_results[k] for k in ("trajectory", "verdict", "invariants")}
    res.add(write_trajectory_csv(out / "trajectory.csv", traj), ArtifactKind.TRAJECTORY)
    window = env.compare_window
    if window is None:
        window = (0.25 * traj.T, traj.T)
    verdict = classify(traj, cfg.analysis.thresholds, eq)
    report = envelope_compare(traj, lower.spec, upper.spec, window, verdict) if (
        lower.found or upper.found
    ) else None
    results["compare"] = report.to_json() if report is not None else {
        "ok": False, "reason": "no envelope found"
    }
    t0 = report.t0 if report is not None and report.t0 is not None else 0.0
    curves = front_curves(lower.spec, upper.spec, traj.times, t0)
    res.add(write_curves_csv(out / "envelopes.csv", *curves), ArtifactKind.CURVES)
    if cfg.output.plot:
        res.add(plot_fronts(out / "envelopes.svg", traj, None, curves), ArtifactKind.PLOT)
    return res


# --------------------------------------------------------------------------- #
# Parser
# --------------------------------------------------------------------------- #


COMMANDS: dict[str, Handler] = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "rates": cmd_rates,
    "semiwave": cmd_semiwave,
    "verify-subeig": cmd_verify_subeig,
    "verify-envelope": cmd_verify_envelope,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frontlab",
        description="Numerical lab for nonlocal epidemic fronts with free boundaries.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--env", default=None, help="mxm-config environment (dev, prod)")
    common.add_argument("--profile", default=None, help="mxm-config profile (default, research, ci)")
    common.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="overrides frontlab.logging.level",
    )
    common.add_argument("--out", default=None, help="output root directory")
    common.add_argument(
        "--archive", action="store_true", help="index the run in the SQLite archive"
    )

    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("config", help="YAML run-config file")
        return p

    with_config("simulate", "run the free-boundary solver")
    p_sweep = with_config("sweep", "simulate and fit over kernel exponents")
    p_sweep.add_argument(
        "--alphas", nargs="*", type=float, default=None, help="overrides sweep.alphas"
    )
    with_config("semiwave", "semi-wave speed and profiles")
    p_sub = with_config("verify-subeig", "minimal sub-eigenfunction scale")
    p_sub.add_argument("--kernel", choices=["J1", "J2", "K"], default="J1")
    p_env = with_config("verify-envelope", "search and check envelope constants")
    p_env.add_argument(
        "--compare", action="store_true", help="also simulate and sandwich the fronts"
    )

    p_rates = sub.add_parser("rates", parents=[common], help="fit laws to a trajectory CSV")
    p_rates.add_argument("trajectory", help="trajectory CSV (t,g,h)")
    p_rates.add_argument("--config", dest="config", default=None)
    p_rates.add_argument("--alpha", type=float, default=None)
    p_rates.add_argument("--window", nargs=2, type=float, default=None, metavar=("T_LO", "T_HI"))

    p_plot = sub.add_parser("plot", parents=[common], help="SVG of a trajectory CSV")
    p_plot.add_argument("trajectory", help="trajectory CSV (t,g,h)")
    p_plot.add_argument("--config", dest="config", default=None)
    p_plot.add_argument(
        "--law", choices=["power", "t_log_t", "linear", "none"], default="power"
    )
    p_plot.add_argument("--window", nargs=2, type=float, default=None, metavar=("T_LO", "T_HI"))
    p_plot.add_argument("-o", "--output", default=None, help="SVG path")
    return parser


def _configure_logging(args: argparse.Namespace, pkg: MXMConfig | None) -> None:
    level = args.log_level
    if level is None and pkg is not None:
        level = str(frontlab_view(pkg).logging.level)  # type: ignore[attr-defined]
    logging.basicConfig(level=level or "INFO", format=LOG_FORMAT, force=True)


def _input_hash(args: argparse.Namespace, cfg: RunConfig | None) -> str:
    if cfg is not None and args.command not in ("rates", "plot"):
        return cfg.config_hash
    tree: dict[str, Any] = {
        "command": args.command,
        "trajectory": file_checksum(Path(args.trajectory).read_bytes())
        if Path(args.trajectory).is_file()
        else str(args.trajectory),
        "window": list(args.window) if args.window else None,
        "config": cfg.config_hash if cfg is not None else None,
    }
    for key in ("alpha", "law"):
        if hasattr(args, key):
            tree[key] = getattr(args, key)
    return config_hash(tree)


def execute(args: argparse.Namespace) -> int:
    """Run one parsed command; returns the process exit code."""
    pkg = _package_config(args)
    _configure_logging(args, pkg)
    defaults = layered_defaults(pkg) if pkg is not None else None
    cfg = load_config(args.config, defaults) if args.config is not None else None
    digest = _input_hash(args, cfg)
    root = _output_root(args, cfg, pkg)
    out = root / f"{args.command}-{digest[:12]}"
    handler = COMMANDS[args.command]

    archive = args.archive or (cfg is not None and cfg.output.archive)
    if not archive:
        result = handler(args, cfg, out)
        write_report(out / "report.json", build_report(args.command, digest, result.results))
        logger.info("wrote %s", out / "report.json")
        return EXIT_OK

    with LabSession(args.command, _archive_view(root, pkg), config_hash=digest) as lab:
        result = handler(args, cfg, out)
        report = write_report(
            out / "report.json", build_report(args.command, digest, result.results)
        )
        for path, kind in result.artifacts:
            lab.record(path, kind)
        lab.record(report, ArtifactKind.REPORT)
        logger.info("wrote %s (run %s)", report, lab.run_id)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return execute(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for path, msg in exc.errors:
            print(f"  {path or '<input>'}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except SolverAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        for key, value in sorted(exc.diagnostics.items()):
            print(f"  {key}: {value}", file=sys.stderr)
        return EXIT_ABORT


__all__ = ["COMMANDS", "CommandResult", "build_parser", "execute", "main", "sweep_row"]
