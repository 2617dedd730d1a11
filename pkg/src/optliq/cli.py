"""Command-line front end.

Subcommands
-----------
solve     converge the stationary profile and write the profile CSV + sidecar
impact    sweep block sizes and write the impact curve CSV
simulate  Monte Carlo of the liquidation under the optimal rate
series    print the near-origin expansion coefficients and constants
oracle    compare the variance-time Monte Carlo estimate against the profile
preset    print one of the three built-in parametrizations as key=value text

Option precedence is flags > config file (--config, key=value lines) >
preset > built-in defaults.  Report outputs render a companion PNG figure
next to each CSV unless --no-plot is given.  Exit codes: 0 success,
1 validation/usage error, 2 convergence or stability failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import __version__, storage
from .errors import SolverError, ValidationError
from .model import MarketState, ModelParams, ReducedParams, reduce
from .asymptotics import series_coefficients, singularity_constants
from .pde_solver import SolverConfig, converge
from .simulate import SimConfig, simulate_liquidation, simulate_transformed
from .solution import price_impact

load_profile = storage.load_profile
save_profile = storage.save_profile

PRESETS = {
    1: {"rho": 0.05, "lambda": 0.0, "r": 0.0, "sigma": 0.2, "eta": 7.5e-6,
        "s": 100.0, "z": 100.0},
    2: {"rho": 0.0, "lambda": -0.1, "r": 0.0, "sigma": 0.2, "eta": 7.5e-6,
        "s": 100.0, "z": 100.0},
    3: {"rho": 0.05, "lambda": 0.03, "r": 0.01, "sigma": 0.2, "eta": 7.5e-6,
        "s": 100.0, "z": 100.0},
}

_MODEL_KEYS = ("rho", "lambda", "r", "sigma", "eta")


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems via exit code 1."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_model_args(p):
    p.add_argument("--rho", type=float, help="discount rate (1/year)")
    p.add_argument("--lambda", dest="lam", type=float,
                   help="drift of the unaffected price (1/year)")
    p.add_argument("--r", type=float, help="inventory interest rate (1/year)")
    p.add_argument("--sigma", type=float, help="volatility (1/sqrt(year))")
    p.add_argument("--eta", type=float, help="temporary impact coefficient")
    p.add_argument("--preset", type=int, choices=(1, 2, 3),
                   help="load a built-in parametrization")


def _add_solver_args(p):
    p.add_argument("--L", type=float, help="starting domain length")
    p.add_argument("--N", type=int, help="starting node count")
    p.add_argument("--h", type=float, help="starting time step")
    p.add_argument("--T", type=float, help="starting horizon checkpoint")
    p.add_argument("--rel-tol", type=float, help="relative stopping tolerance")
    p.add_argument("--abs-tol", type=float, help="absolute stopping tolerance")


def _add_sim_args(p):
    p.add_argument("--paths", type=int, help="number of Monte Carlo paths")
    p.add_argument("--dt", type=float, help="simulation time step (years)")
    p.add_argument("--seed", type=int, help="random seed (64-bit)")
    p.add_argument("--workers", type=int, help="thread workers over path blocks")


def _add_common(p):
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--no-plot", action="store_true",
                   help="skip the companion PNG figure")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="optliq",
                     description="optimal liquidation with an endogenous horizon")
    parser.add_argument("--version", action="version", version=f"optliq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="converge the stationary profile")
    _add_model_args(p)
    _add_solver_args(p)
    _add_common(p)
    p.add_argument("--a", type=float, help="reduced coefficient a (instead of rates)")
    p.add_argument("--b", type=float, help="reduced coefficient b (instead of rates)")

    p = sub.add_parser("impact", help="impact curve over a block-size sweep")
    _add_model_args(p)
    _add_solver_args(p)
    _add_common(p)
    p.add_argument("--profile", help="reuse a saved profile CSV")
    p.add_argument("--s", type=float, help="unaffected price (default 100)")
    p.add_argument("--zmin", type=float, help="smallest block size (default 0.01)")
    p.add_argument("--zmax", type=float, help="largest block size (default 10)")
    p.add_argument("--points", type=int, help="sweep size (default 50)")

    p = sub.add_parser("simulate", help="Monte Carlo of the liquidation")
    _add_model_args(p)
    _add_solver_args(p)
    _add_sim_args(p)
    _add_common(p)
    p.add_argument("--profile", help="reuse a saved profile CSV")
    p.add_argument("--s", type=float, help="initial price (default 100)")
    p.add_argument("--z", type=float, help="initial inventory (default 100)")
    p.add_argument("--per-path-out", help="write per-path outcomes CSV")
    p.add_argument("--traj-out", help="write thinned trajectory CSV")
    p.add_argument("--traj-paths", type=int, default=50,
                   help="paths to record when --traj-out is given")

    p = sub.add_parser("series", help="near-origin expansion coefficients")
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--a", type=float, help="reduced coefficient a")
    p.add_argument("--b", type=float, help="reduced coefficient b")
    p.add_argument("--n", type=int, default=6, help="series order (default 6)")

    p = sub.add_parser("oracle", help="Monte Carlo check of the profile")
    _add_model_args(p)
    _add_solver_args(p)
    _add_sim_args(p)
    _add_common(p)
    p.add_argument("--profile", help="reuse a saved profile CSV")
    p.add_argument("--x0", type=float, required=True, help="reduced state to check")

    p = sub.add_parser("preset", help="print a built-in parametrization")
    p.add_argument("number", type=int, choices=(1, 2, 3))
    return parser


def _resolve(args, file_cfg: dict, key: str, default=None, cast=float):
    """flags > config file > preset > default."""
    flag = getattr(args, "lam" if key == "lambda" else key, None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return cast(file_cfg[key])
    preset = getattr(args, "preset", None)
    if preset is not None and key in PRESETS[preset]:
        return PRESETS[preset][key]
    return default


def _model_params(args, file_cfg) -> ModelParams:
    vals = {}
    for key in _MODEL_KEYS:
        v = _resolve(args, file_cfg, key)
        if v is None:
            raise ValidationError(
                f"missing model parameter --{key} (give all of "
                f"{', '.join('--' + k for k in _MODEL_KEYS)}, a --preset, or a --config file)")
        vals[key] = v
    return ModelParams(rho=vals["rho"], lam=vals["lambda"], r=vals["r"],
                       sigma=vals["sigma"], eta=vals["eta"])


def _solver_config(args, file_cfg) -> SolverConfig:
    kw = {}
    pairs = [("L", "L_start", float), ("N", "N_start", int), ("h", "h_start", float),
             ("T", "T_start", float), ("rel_tol", "rel_tol", float),
             ("abs_tol", "abs_tol", float)]
    for flag, field_name, cast in pairs:
        v = _resolve(args, file_cfg, flag, cast=cast)
        if v is not None:
            kw[field_name] = cast(v)
    # extended keys are file-only (no dedicated flags)
    for field_name in ("T_step", "N_step", "L_step", "shortfall_split",
                       "max_T_iter", "max_N_iter", "max_L_iter", "max_h_halvings",
                       "series_order", "x_switch"):
        if field_name in file_cfg:
            cast = int if field_name.startswith("max_") or field_name.endswith(("_iter", "order")) else float
            kw[field_name] = cast(float(file_cfg[field_name]))
    return SolverConfig(**kw)


def _sim_config(args, file_cfg) -> SimConfig:
    kw = {}
    for flag, field_name, cast in [("paths", "n_paths", int), ("dt", "dt", float),
                                   ("seed", "seed", int), ("workers", "workers", int)]:
        v = _resolve(args, file_cfg, flag, cast=cast)
        if v is not None:
            kw[field_name] = cast(v)
    for field_name in ("z_stop_rel", "t_max", "dt_hat", "block_size"):
        if field_name in file_cfg:
            cast = int if field_name == "block_size" else float
            kw[field_name] = cast(float(file_cfg[field_name]))
    return SimConfig(**kw)


def _reduced(args, file_cfg) -> tuple[ReducedParams, ModelParams | None]:
    a = _resolve(args, file_cfg, "a")
    b = _resolve(args, file_cfg, "b")
    have_rates = any(_resolve(args, file_cfg, k) is not None for k in _MODEL_KEYS)
    if (a is None) != (b is None):
        raise ValidationError("give both --a and --b or neither")
    if a is not None:
        if have_rates:
            raise ValidationError("give either --a/--b or market parameters, not both")
        return ReducedParams(a=a, b=b), None
    params = _model_params(args, file_cfg)
    return reduce(params), params


def _get_profile(args, file_cfg, params: ModelParams):
    if getattr(args, "profile", None):
        profile = load_profile(args.profile)
        red = reduce(params)
        if abs(red.a - profile.a) > 1e-10 or abs(red.b - profile.b) > 1e-10:
            raise ValidationError(
                f"profile {args.profile} with (a,b)=({profile.a},{profile.b}) "
                f"does not match the given parameters (reduce to ({red.a},{red.b}))")
        return profile
    print("no --profile given; converging one (this can take a while)...",
          file=sys.stderr)
    return converge(reduce(params), _solver_config(args, file_cfg))


def _maybe_plot(args, render, png_path):
    if getattr(args, "no_plot", False):
        return
    from . import plotting  # deferred: keeps matplotlib optional at runtime
    render(plotting, png_path)


def _cfg_echo(params=None, reduced=None, extra=None) -> dict:
    cfg = {}
    if params is not None:
        cfg.update({"rho": params.rho, "lambda": params.lam, "r": params.r,
                    "sigma": params.sigma, "eta": params.eta})
    if reduced is not None:
        cfg.update({"a": reduced.a, "b": reduced.b})
    if extra:
        cfg.update(extra)
    return cfg


def _cmd_solve(args, file_cfg) -> int:
    reduced, params = _reduced(args, file_cfg)
    scfg = _solver_config(args, file_cfg)
    profile = converge(reduced, scfg)
    out = args.out or "profile.csv"
    save_profile(profile, out, extra_config=_cfg_echo(params, reduced, {
        "N": profile.meta["N"], "T": profile.meta["T"], "h": profile.meta["h"],
        "gap": profile.gap}))
    print(f"profile written to {out} (N={profile.meta['N']}, L={profile.L:g}, "
          f"T={profile.meta['T']:g}, h={profile.meta['h']:g}, gap={profile.gap:.3e})")
    _maybe_plot(args, lambda pl, p: pl.plot_profile(profile, p), out + ".png")
    return 0


def _cmd_impact(args, file_cfg) -> int:
    params = _model_params(args, file_cfg)
    profile = _get_profile(args, file_cfg, params)
    s = _resolve(args, file_cfg, "s", default=100.0)
    zmin = _resolve(args, file_cfg, "zmin", default=0.01)
    zmax = _resolve(args, file_cfg, "zmax", default=10.0)
    points = int(_resolve(args, file_cfg, "points", default=50, cast=int))
    if not 0 < zmin < zmax or points < 2:
        raise ValidationError("need 0 < zmin < zmax and points >= 2")
    zs = np.geomspace(zmin, zmax, points)
    rows = [price_impact(profile, params, MarketState(s=s, z=z)) for z in zs]
    out = args.out or "impact.csv"
    storage.write_impact_csv(out, rows, _cfg_echo(params, extra={
        "s": s, "zmin": zmin, "zmax": zmax, "points": points}))
    print(f"impact curve written to {out} ({points} block sizes)")
    _maybe_plot(args, lambda pl, p: pl.plot_impact(rows, p), out + ".png")
    return 0


def _cmd_simulate(args, file_cfg) -> int:
    params = _model_params(args, file_cfg)
    profile = _get_profile(args, file_cfg, params)
    cfg = _sim_config(args, file_cfg)
    s = _resolve(args, file_cfg, "s", default=100.0)
    z = _resolve(args, file_cfg, "z", default=100.0)
    record = args.traj_paths if args.traj_out else 0
    stats, paths, traj = simulate_liquidation(
        profile, params, MarketState(s=s, z=z), cfg, return_paths=True,
        record_paths=record)
    echo = _cfg_echo(params, extra={"s": s, "z": z, "paths": cfg.n_paths,
                                    "dt": cfg.dt, "seed": cfg.seed})
    out = args.out or "simulation.csv"
    storage.write_sim_summary(out, stats, echo)
    print(f"summary written to {out}: mean T = {stats.mean_t_days:.3f} days "
          f"(se {stats.se_t_days:.3f}), mean revenue = {stats.mean_revenue:.4f} "
          f"(se {stats.se_revenue:.4f}), capped = {stats.n_capped}")
    if args.per_path_out:
        storage.write_per_path_csv(args.per_path_out, paths, echo)
    if args.traj_out:
        storage.write_trajectories_csv(args.traj_out, traj, echo)
        _maybe_plot(args, lambda pl, p: pl.plot_trajectories(traj, p),
                    args.traj_out + ".png")
    _maybe_plot(args, lambda pl, p: pl.plot_simulation(paths, p), out + ".png")
    return 0


def _cmd_series(args, file_cfg) -> int:
    reduced, _ = _reduced(args, file_cfg)
    exp = series_coefficients(reduced, args.n)
    con = singularity_constants(reduced)
    print(f"a = {reduced.a:.17g}, b = {reduced.b:.17g}")
    for i, k in enumerate(exp.coeffs, start=1):
        print(f"k_{i} = {k:.17g}")
    print(f"K1 = {con.K1:.17g}")
    print(f"K2 = {con.K2:.17g}")
    print(f"alpha = {con.alpha:.17g}")
    print(f"beta = {con.beta:.17g}")
    if args.out:
        idx = np.arange(1, exp.order + 1)
        storage.write_csv(args.out,
                          storage.header_comment("series", {"a": reduced.a,
                                                            "b": reduced.b,
                                                            "n": exp.order}),
                          "i,k_i", (idx, np.array(exp.coeffs)))
    return 0


def _cmd_oracle(args, file_cfg) -> int:
    params = _model_params(args, file_cfg)
    profile = _get_profile(args, file_cfg, params)
    cfg = _sim_config(args, file_cfg)
    est = simulate_transformed(profile, reduce(params), params, args.x0, cfg)
    u_ref, _ = profile.eval(args.x0)
    diff = est.estimate - u_ref
    z_score = diff / est.se if est.se > 0 else float("nan")
    print(f"x0 = {args.x0:g}")
    print(f"monte carlo u = {est.estimate:.8f} (se {est.se:.2e}, "
          f"{est.n_paths} paths, {est.n_capped} capped)")
    print(f"profile     u = {u_ref:.8f}")
    print(f"difference    = {diff:+.3e} ({z_score:+.2f} se)")
    return 0


def _cmd_preset(args) -> int:
    for k, v in PRESETS[args.number].items():
        print(f"{k}={v:.17g}")
    return 0


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage problems by exiting
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False)
                        else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_cfg = (storage.read_key_value(args.config)
                    if getattr(args, "config", None) else {})
        if args.command == "solve":
            return _cmd_solve(args, file_cfg)
        if args.command == "impact":
            return _cmd_impact(args, file_cfg)
        if args.command == "simulate":
            return _cmd_simulate(args, file_cfg)
        if args.command == "series":
            return _cmd_series(args, file_cfg)
        if args.command == "oracle":
            return _cmd_oracle(args, file_cfg)
        if args.command == "preset":
            return _cmd_preset(args)
        parser.error(f"unknown command {args.command!r}")
    except (ValidationError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except SolverError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
