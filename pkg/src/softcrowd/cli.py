"""Command-line entry point: simulate, optimize, sysid, phase, case, serve.

Every command that writes files also writes a ``*.manifest.json`` next to
its outputs recording the command, parameters, seed and produced paths, so
any published number can be regenerated from its manifest.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .casestudy import analyze, load_panel_csv, write_report_csv, write_report_json
from .control import (
    RobustProblem,
    optimize_beta_mc,
    optimize_profile_mc,
    optimize_beta_robust,
    phase_diagram,
    robust_dynamic_schedule,
    write_design_json,
    write_phase_diagram_csv,
)
from .dynamics import (
    Constant,
    CrowdConfig,
    DistanceProfile,
    ExplicitInit,
    MseInit,
    Off,
    Schedule,
    read_trajectory_csv,
    simulate,
    write_trajectory_csv,
)
from .sysid import run_pipeline

REQUIRE_SEED_ENV = "SOFTCROWD_REQUIRE_SEED"


def _usage(message: str):
    print(f"usage error: {message}", file=sys.stderr)
    raise SystemExit(2)


def parse_grid(spec: str) -> np.ndarray:
    """Parse ``start:stop:step`` into an inclusive grid."""
    try:
        start, stop, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"grid must look like start:stop:step, got {spec!r}") from None
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"bad grid bounds in {spec!r}")
    count = int(round((stop - start) / step))
    grid = start + step * np.arange(count + 1)
    return grid[grid <= stop + step * 1e-9]


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if os.environ.get(REQUIRE_SEED_ENV):
        _usage(f"--seed is required when {REQUIRE_SEED_ENV} is set")
    return secrets.randbits(31)


def _write_manifest(command: str, args: argparse.Namespace, seed: int | None,
                    outputs: list[Path]) -> Path | None:
    if not outputs:
        return None
    skip = {"func", "json"}
    params = {k: (str(v) if isinstance(v, Path) else v)
              for k, v in vars(args).items() if k not in skip and v is not None}
    manifest = {
        "command": command,
        "parameters": params,
        "seed": seed,
        "outputs": [str(p) for p in outputs],
        "toolkit_version": __version__,
    }
    path = outputs[0].with_suffix("").with_suffix(".manifest.json") \
        if outputs[0].suffix else outputs[0] / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def _emit(args, payload: dict, human: str):
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2))
    else:
        print(human)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    chosen = [v is not None for v in (args.beta, args.profile_c, args.schedule_file)]
    if sum(chosen) > 1:
        _usage("choose at most one of --beta, --profile-c, --schedule-file")
    if args.mse0 is None and args.init_file is None:
        _usage("one of --mse0 or --init-file is required")
    if args.mse0 is not None and args.init_file is not None:
        _usage("--mse0 and --init-file are mutually exclusive")
    seed = _resolve_seed(args)
    if args.init_file is not None:
        x0 = [float(line) for line in Path(args.init_file).read_text().split()]
        init = ExplicitInit(x0)
    else:
        init = MseInit(args.mse0, args.bias_fraction)
    config = CrowdConfig(n=args.n, gains=args.gain, noise_sigma=args.sigma,
                         init=init, noise_dist=args.noise_dist)
    if args.beta is not None:
        policy = Off() if args.beta == 0 else Constant(args.beta)
    elif args.profile_c is not None:
        policy = DistanceProfile(args.profile_c)
    elif args.schedule_file is not None:
        betas = [float(v) for v in Path(args.schedule_file).read_text().split()]
        policy = Schedule(betas)
    else:
        policy = Off()
    traj = simulate(config, policy, args.horizon, seed)
    outputs = []
    if args.out:
        outputs = write_trajectory_csv(traj, args.out, config, policy)
    manifest = _write_manifest("simulate", args, seed, outputs)
    if manifest:
        outputs.append(manifest)
    _emit(args, {"final_mse": traj.mse[-1], "cost": traj.cost, "seed": seed,
                 "outputs": [str(p) for p in outputs]},
          f"final MSE {traj.mse[-1]:.6g}, cumulative cost {traj.cost:.6g} "
          f"(seed {seed})")
    return 0


def _optimize_design(args):
    if args.mode in ("robust", "dynamic"):
        if args.noise_ratio is None:
            _usage(f"--noise-ratio is required for {args.mode}")
        problem = RobustProblem(args.gain, args.noise_ratio, args.horizon)
        if args.mode == "robust":
            return optimize_beta_robust(problem), None
        return robust_dynamic_schedule(problem), None
    for name in ("sigma", "n", "mse0"):
        if getattr(args, name) is None:
            _usage(f"--{name} is required for {args.mode}")
    seed = _resolve_seed(args)
    config = CrowdConfig(n=args.n, gains=args.gain, noise_sigma=args.sigma,
                         init=MseInit(args.mse0, args.bias_fraction))
    if args.mode == "mc":
        grid = parse_grid(args.beta_grid) if args.beta_grid else None
        return optimize_beta_mc(config, args.horizon, args.replicates, grid,
                                seed), seed
    grid = parse_grid(args.c_grid) if args.c_grid else None
    return optimize_profile_mc(config, args.horizon, args.replicates, grid,
                               seed), seed


def cmd_optimize(args) -> int:
    design, seed = _optimize_design(args)
    outputs = []
    if args.out:
        outputs = [write_design_json(design, args.out)]
    manifest = _write_manifest(f"optimize {args.mode}", args, seed, outputs)
    if manifest:
        outputs.append(manifest)
    if design.kind == "constant":
        what = f"beta = {design.beta:.4f}"
    elif design.kind == "distance_profile":
        what = f"c = {design.c:.4f}"
    else:
        head = ", ".join(f"{b:.3f}" for b in design.schedule[:5])
        what = f"schedule [{head}, ...]"
    _emit(args, design.to_json(),
          f"{what}, predicted cost {design.predicted_cost:.6g}, "
          f"dMSE {design.delta_mse:.3f} ({design.method})")
    return 0


def cmd_sysid(args) -> int:
    seed = _resolve_seed(args)
    traj_open, _ = read_trajectory_csv(args.open)
    traj_soft = None
    if args.soft:
        traj_soft, _ = read_trajectory_csv(args.soft)
    results = run_pipeline(traj_open, traj_soft, replicates=args.replicates,
                           seed=seed)
    payload = {k: (v.to_json() if v is not None else None)
               for k, v in results.items()}
    payload["seed"] = seed
    outputs = []
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps(payload, indent=2))
        outputs = [out]
    manifest = _write_manifest("sysid", args, seed, outputs)
    if manifest:
        outputs.append(manifest)
    fitted = results["open_loop"]
    line = (f"gain {fitted.gain_hat:.4f}, sigma {fitted.sigma_hat:.4g}, "
            f"r2 {fitted.r2:.3f}")
    if results.get("beta") is not None:
        line += f", beta {results['beta'].beta_hat:.4f}"
    if results.get("profile") is not None:
        line += f", profile c {results['profile'].c_hat:.4g}"
    _emit(args, payload, line)
    return 0


def cmd_phase(args) -> int:
    gains = parse_grid(args.gains)
    ratios = parse_grid(args.ratios)
    matrix = phase_diagram(gains, ratios, args.horizon)
    outputs = [write_phase_diagram_csv(args.out, gains, ratios, matrix)]
    manifest = _write_manifest("phase", args, None, outputs)
    if manifest:
        outputs.append(manifest)
    _emit(args, {"gains": gains.tolist(), "ratios": ratios.tolist(),
                 "beta": matrix.tolist(), "outputs": [str(p) for p in outputs]},
          f"wrote {outputs[0]} ({matrix.shape[0]} gains x {matrix.shape[1]} ratios)")
    return 0


def cmd_case(args) -> int:
    seed = _resolve_seed(args)
    panel = load_panel_csv(args.csv)
    report = analyze(panel, window=args.window, horizon=args.horizon,
                     replicates=args.replicates, seed=seed)
    outputs = []
    if args.out:
        stem = Path(args.out)
        outputs = [write_report_csv(report, stem.with_suffix(".csv")),
                   write_report_json(report, stem.with_suffix(".json"))]
    manifest = _write_manifest("case", args, seed, outputs)
    if manifest:
        outputs.append(manifest)
    _emit(args, report.to_json(),
          f"{report.label}: gain {report.gain_hat:.3f}, sigma "
          f"{report.sigma_hat:.3g}, noise ratio {report.noise_ratio:.3f}, "
          f"beta {report.beta_opt:.3f}, dMSE {report.delta_mse:.3f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .game import BotParams, GameConfig
    from .server import create_app

    seed = _resolve_seed(args)
    config = GameConfig(n_bots=args.bots,
                        bot_params=BotParams(gain=args.bot_gain,
                                             sigma=args.bot_sigma,
                                             beta=args.bot_beta))
    rng = np.random.default_rng(seed)
    ui_dir = args.ui if args.ui and Path(args.ui).is_dir() else None
    app = create_app(config, seed_source=lambda: int(rng.integers(2 ** 31)),
                     ui_dir=ui_dir)
    where = f" with UI from {ui_dir}" if ui_dir else ""
    print(f"serving fitness game on port {args.port} (seed {seed}){where}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softcrowd",
        description="Crowd-learning toolkit: simulation, influence design, "
                    "identification, case studies, and the Fitness Game.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one seeded crowd trajectory")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gain", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--beta", type=float)
    p.add_argument("--profile-c", type=float)
    p.add_argument("--schedule-file")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--mse0", type=float)
    p.add_argument("--bias-fraction", type=float, default=0.9)
    p.add_argument("--init-file")
    p.add_argument("--noise-dist", choices=["gaussian", "uniform"],
                   default="gaussian")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="compute an influence design")
    p.add_argument("mode", choices=["robust", "mc", "profile", "dynamic"])
    p.add_argument("--gain", type=float, required=True)
    p.add_argument("--noise-ratio", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--mse0", type=float)
    p.add_argument("--bias-fraction", type=float, default=0.9)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--replicates", type=int, default=5000)
    p.add_argument("--beta-grid", help="start:stop:step")
    p.add_argument("--c-grid", help="start:stop:step")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sysid", help="identify model parameters from CSVs")
    p.add_argument("--open", required=True, help="independent-phase trajectory CSV")
    p.add_argument("--soft", help="feedback-phase trajectory CSV")
    p.add_argument("--replicates", type=int, default=5000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_sysid)

    p = sub.add_parser("phase", help="gain x noise-ratio design diagram")
    p.add_argument("--gains", required=True, help="start:stop:step")
    p.add_argument("--ratios", required=True, help="start:stop:step")
    p.add_argument("--horizon", type=int, default=30)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("case", help="panel case study pipeline")
    p.add_argument("--csv", required=True)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--horizon", type=int)
    p.add_argument("--replicates", type=int, default=5000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_case)

    p = sub.add_parser("serve", help="run the Fitness Game HTTP server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--bots", type=int, default=39)
    p.add_argument("--bot-gain", type=float, default=0.75)
    p.add_argument("--bot-sigma", type=float, default=60.0)
    p.add_argument("--bot-beta", type=float, default=0.32)
    p.add_argument("--ui", help="directory holding the built browser client")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
