"""Command line interface.

Subcommands: solve, converge, stability-map, energy-check, ap-check.
Runs are defined by --preset and/or --config (a key = value file); a few
common scalar overrides are exposed as flags.  Exit codes: 0 success,
2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import PRESET_NAMES, ConfigError, parse_config, preset
from .converge import richardson_table, write_table_csv
from .driver import (
    build_problem,
    energy_monitor_dt,
    evaluate_rho_at,
    run,
    sample_solution,
)
from .reference import FDGrid, diffusion_fd
from .schur import StageSolveError
from .stability import scan_stability


def _load_config(args):
    if args.config is None and args.preset is None:
        raise ConfigError("one of --preset or --config is required")
    if args.preset is not None:
        cfg = preset(args.preset)
    else:
        cfg = None
    if args.config is not None:
        with open(args.config) as fh:
            file_cfg = parse_config(fh.read())
        cfg = file_cfg if cfg is None else cfg.with_overrides(
            **{k: getattr(file_cfg, k) for k in file_cfg.__dataclass_fields__})
    overrides = {}
    if getattr(args, "epsilon", None) is not None:
        overrides["epsilon"] = args.epsilon
    if getattr(args, "scheme", None) is not None:
        overrides["scheme"] = args.scheme
    if getattr(args, "n", None) is not None:
        overrides["n"] = args.n
    if getattr(args, "t_final", None) is not None:
        overrides["t_final"] = args.t_final
    if getattr(args, "dt", None) is not None:
        overrides["dt"] = args.dt
        overrides["dt_policy"] = "fixed"
    return cfg.with_overrides(**overrides)


def _out_path(args, cfg, default):
    if args.out is not None:
        return args.out
    if cfg is not None and cfg.output_path is not None:
        return cfg.output_path
    return default


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    result = run(cfg)
    x, rho, j = sample_solution(result)
    path = _out_path(args, cfg, "solution.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write("x,rho,j\n")
        for xi, ri, ji in zip(x, rho, j):
            fh.write(f"{xi:.17g},{ri:.17g},{ji:.17g}\n")
    print(f"wrote {path}: {x.size} samples, {result.n_steps} steps "
          f"(dt = {result.dt:.6g})")
    return 0


def cmd_converge(args) -> int:
    cfg = _load_config(args)
    n_list = [int(tok) for tok in args.n_list.split(",")]
    rows = richardson_table(cfg, n_list)
    path = _out_path(args, cfg, "convergence.csv")
    write_table_csv(rows, path)
    for r in rows:
        print(f"N={r.n:5d}  Erho={r.e_rho:.3e}  order={r.order_rho:5.2f}  "
              f"Eg={r.e_g:.3e}  order={r.order_g:5.2f}")
    print(f"wrote {path}")
    return 0


def cmd_stability_map(args) -> int:
    if args.resolution == "paper":
        spacing, n_xi = 0.05, 100
    elif args.resolution == "coarse":
        spacing, n_xi = 0.25, 32
    else:
        spacing, n_xi = args.spacing, args.n_xi
        if spacing is None or n_xi is None:
            raise ConfigError("custom resolution needs --spacing and --n-xi")
    grid = scan_stability(args.p, args.k, spacing=spacing, n_xi=n_xi)
    path = args.out if args.out is not None else "stability_map.csv"
    grid.to_csv(path)
    frac = grid.stable.mean()
    print(f"wrote {path}: {grid.alphas.size} x {grid.betas.size} points, "
          f"{100 * frac:.1f}% stable")
    return 0


def cmd_energy_check(args) -> int:
    cfg = _load_config(args).with_overrides(scheme=1)
    problem = build_problem(cfg)
    dt = energy_monitor_dt(problem)
    cfg = cfg.with_overrides(dt_policy="fixed", dt=dt,
                             t_final=args.steps * dt)
    result = run(cfg, record_energy=True, mu=args.mu)
    e = result.energies
    growth = np.diff(e)
    worst = float(growth.max() / max(e.max(), 1e-300))
    monotone = worst <= 1e-12
    path = _out_path(args, cfg, "energy.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write("step,t,energy\n")
        for i, ei in enumerate(e):
            fh.write(f"{i},{i * result.dt:.17g},{ei:.17g}\n")
    print(f"wrote {path}: dt = {result.dt:.6g}, "
          f"max relative energy growth = {worst:.3e} "
          f"({'non-increasing' if monotone else 'INCREASING'})")
    return 0


def cmd_ap_check(args) -> int:
    cfg = _load_config(args)
    result = run(cfg, record_equilibrium=True)
    resid = result.equilibrium
    path = _out_path(args, cfg, "ap_check.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write("step,t,equilibrium_residual\n")
        for i, ri in enumerate(resid, start=1):
            fh.write(f"{i},{i * result.dt:.17g},{ri:.17g}\n")
    print(f"wrote {path}: final residual = {resid[-1]:.3e}")

    linf = ap_reference_linf(result, n_ref=args.n_ref)
    if linf is not None:
        print(f"Linf(rho - diffusion reference) = {linf:.4e}")
    return 0


def ap_reference_linf(result, n_ref: int = 2000):
    """Compare the run's density against a diffusion-limit FD reference."""
    problem = result.problem
    cfg = problem.config
    if cfg.epsilon > 1e-4:
        return None
    v_sq = problem.quad.v_sq_exact
    if cfg.boundary == "inflow":
        from .config import make_v_function
        v, w = problem.quad.nodes, problem.quad.weights
        pos = v >= 0.0
        f_l = make_v_function(cfg.f_left)(v[pos], 0.0)
        f_r = make_v_function(cfg.f_right)(v[~pos], 0.0)
        # plain dv integral of the isotropic inflow: 2 * half-range sum
        bc = (2.0 * float(np.sum(w[pos] * f_l)),
              2.0 * float(np.sum(w[~pos] * f_r)))
    else:
        bc = "periodic"
    dx = (cfg.x_right - cfg.x_left) / n_ref
    sig_min = float(np.min(problem.coefficients.sigma_s(
        np.linspace(cfg.x_left, cfg.x_right, 4 * n_ref + 1))))
    dt_lim = 0.25 * dx * dx * sig_min / v_sq
    n_steps = int(np.ceil(cfg.t_final / dt_lim))
    grid = FDGrid(cfg.x_left, cfg.x_right, n_ref,
                  dt=cfg.t_final / n_steps, t_final=cfg.t_final)
    from .config import make_x_function
    x, rho_ref = diffusion_fd(problem.coefficients,
                              make_x_function(cfg.initial_rho), bc, grid,
                              v_sq=v_sq)
    rho_dg = evaluate_rho_at(result, x)
    return float(np.abs(rho_dg - rho_ref).max())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kindg",
        description="Micro-macro DG/IMEX solver for 1D kinetic transport")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--preset", choices=PRESET_NAMES)
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--out", help="output CSV path")
        p.add_argument("--epsilon", type=float)
        p.add_argument("--scheme", type=int, choices=(1, 2, 3))
        p.add_argument("--n", type=int)
        p.add_argument("--t-final", dest="t_final", type=float)
        p.add_argument("--dt", type=float)

    p_solve = sub.add_parser("solve", help="run and write x,rho,j samples")
    add_common(p_solve)
    p_solve.set_defaults(fn=cmd_solve)

    p_conv = sub.add_parser("converge", help="Richardson convergence table")
    add_common(p_conv)
    p_conv.add_argument("--n-list", default="20,40,80,160",
                        help="comma separated doubling cell counts")
    p_conv.set_defaults(fn=cmd_converge)

    p_map = sub.add_parser("stability-map", help="Fourier stability region scan")
    p_map.add_argument("--p", type=int, required=True, choices=(1, 2, 3))
    p_map.add_argument("--k", type=int, required=True, choices=(1, 2, 3))
    p_map.add_argument("--resolution", choices=("coarse", "paper", "custom"),
                       default="coarse")
    p_map.add_argument("--spacing", type=float)
    p_map.add_argument("--n-xi", dest="n_xi", type=int)
    p_map.add_argument("--out")
    p_map.set_defaults(fn=cmd_stability_map)

    p_en = sub.add_parser("energy-check",
                          help="first-order scheme discrete energy monitor")
    add_common(p_en)
    p_en.add_argument("--steps", type=int, default=200)
    p_en.add_argument("--mu", type=float, default=0.0)
    p_en.set_defaults(fn=cmd_energy_check)

    p_ap = sub.add_parser("ap-check",
                          help="local equilibrium residual and diffusion comparison")
    add_common(p_ap)
    p_ap.add_argument("--n-ref", dest="n_ref", type=int, default=2000)
    p_ap.set_defaults(fn=cmd_ap_check)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StageSolveError, FloatingPointError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
