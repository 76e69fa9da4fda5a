"""Command-line front end: ``sobolev-growth <subcommand> ...``.

Exit status is 0 iff every verdict of the command passes, 1 if some verdict
fails, 2 on usage or configuration errors and 3 when a module raises.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import classical_dynamics as cd
from . import growth_rates as gr
from . import perturbation as pt
from . import representations as rp
from .scenarios import (DEFAULT_OUTDIR, OUTDIR_ENV, SCENARIOS, ConfigError, Scenario, ScenarioError,
                        load_scenario, run_scenario, resolve_outdir)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3

_CONFIG_HELP = f"""\
config format: one 'key = value' per line ('#' starts a comment) or a JSON
object. Keys and defaults:
  scenario        shipped scenario to start from (optional)
  name            output subdirectory name (default: file stem)
  rate, params    catalog rate and its parameters, e.g. power_log / 1,1,0
  t0              domain start (default: the rate family's own)
  s               Sobolev exponents, e.g. 1,2           (default 1,2)
  a               forcing amplitude                      (default 0)
  duration        horizon - t0                           (default 200)
  horizon         absolute horizon, instead of duration
  ode_tol         classical rtol = atol                  (default 1e-10)
  quad_tol        quadrature tolerance                   (default 1e-10)
  dt              quantum time step                      (default 1e-3)
  N0, N_max       initial / maximal Hermite truncation   (default 256 / 131072)
  sample_step     output spacing                         (default 0.1)
  window_offset   band window starts at t0 + this        (default 10)
  oracle_window   closed-form comparison length          (default 100)
  check_horizon   horizon of the class M checks          (default 1e4)
  check_step      grid step of the class M checks        (default 0.1)
  envelope_horizon  classical envelope check length     (default 3000)
  growth          auto | baseline | homogeneous | forced | oscillatory
Output goes to --outdir, else ${OUTDIR_ENV}, else ./{DEFAULT_OUTDIR}.
"""


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _run_one(args: tuple) -> tuple[str, dict | None, str | None]:
    sc, outdir = args
    try:
        res = run_scenario(sc, outdir)
    except ScenarioError as exc:
        return sc.name, None, str(exc)
    return sc.name, {v.name: v.passed for v in res.verdicts}, None


def cmd_simulate(args) -> int:
    overrides = _parse_set(args.set)
    scenarios = [load_scenario(spec, overrides) for spec in args.config]
    outdir = resolve_outdir(args.outdir)
    jobs = [(sc, outdir) for sc in scenarios]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    status = EXIT_OK
    for name, verdicts, error in results:
        if error is not None:
            print(f"{name}: ERROR {error}")
            status = max(status, EXIT_ERROR)
            continue
        for vname, passed in verdicts.items():
            print(f"{name}: {vname} {'PASS' if passed else 'FAIL'}")
        ok = all(verdicts.values())
        print(f"{name}: {'ALL PASS' if ok else 'SOME FAIL'} -> {outdir / name}")
        if not ok:
            status = max(status, EXIT_FAIL)
    return status


def _rate_from_args(args) -> gr.GrowthRate:
    try:
        return gr.make_catalog_rate(args.name, args.params, args.t0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=float)


def cmd_check_rate(args) -> int:
    rate = _rate_from_args(args)
    horizon = rate.t0 + args.horizon if args.relative else args.horizon
    cm = gr.check_class_M(rate, horizon, args.step)
    sup = gr.check_support_condition(rate, horizon, args.step)
    decay = pt.check_decay(pt.build_phi(rate), horizon)
    hyp = pt.check_hypotheses(rate, min(horizon, args.hyp_horizon))
    print(_dump({"rate": rate.label, "t0": rate.t0, "class_M": cm.as_dict(),
                 "support": sup.as_dict(), "decay": decay.as_dict(), "hypotheses": hyp.as_dict()}))
    failed = [k for k in ("inf_positive", "tends_to_infinity", "ratio_to_zero", "ratio_monotone")
              if not getattr(cm, k)]
    print(f"class M verdict: {'pass' if cm.in_class else 'fails ' + ', '.join(failed)}"
          f" ({cm.verdict})")
    return EXIT_OK if cm.in_class else EXIT_FAIL


def cmd_metaplectic_test(args) -> int:
    stats = rp.property_suite(seed=args.seed, count=args.count)
    verdicts = rp.suite_verdicts(stats)
    print(_dump(stats))
    for name, passed in verdicts.items():
        print(f"{name}: {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if all(verdicts.values()) else EXIT_FAIL


def appendix_summary(rate: gr.GrowthRate, horizon: float, window_offset: float = 10.0,
                     quad_tol: float = 1e-10) -> dict:
    """Appendix integral bands on ``[t0 + offset, H/2]`` and ``[t0 + offset, H]``,
    plus the oscillatory-integral check of ``f'/f``."""
    basis = cd.AnalyticBasis(rate, quad_tol)
    t0 = rate.t0
    half = t0 + 0.5 * (horizon - t0)
    grid = t0 + cd.HALF_PI / 8 * np.arange(int((horizon - t0) / (cd.HALF_PI / 8)) + 1)
    rep = cd.appendix_integrals(basis, grid)
    start = t0 + window_offset
    b_half = _window_stats(rep, start, half)
    b_full = _window_stats(rep, start, horizon)
    drift = {k: abs(b_full[k] / b_half[k] - 1.0) for k in b_full}
    osc = cd.oscillatory_integral_check(rate.log_derivative, [rate.log_second], 1, horizon, t0,
                                        tol=quad_tol)
    return {"rate": rate.label, "horizon": horizon, "half": b_half, "full": b_full,
            "doubling_drift": drift, "oscillatory_integral": osc.as_dict()}


def _window_stats(rep: cd.AppendixReport, start: float, end: float) -> dict:
    sel = (rep.t >= start) & (rep.t <= end)
    b1, b2, b3 = (np.asarray(b)[sel] for b in rep.bands)
    return {"I1_band": float(b1.max() / b1.min()), "I2_ratio_sup": float(b2.max()),
            "I3_sup": float(b3.max())}


def cmd_appendix(args) -> int:
    rate = _rate_from_args(args)
    horizon = rate.t0 + args.horizon if args.relative else args.horizon
    if horizon <= rate.t0 + 2 * args.window_offset:
        raise ConfigError("horizon too short for the band window")
    out = appendix_summary(rate, horizon, args.window_offset)
    print(_dump(out))
    ok = max(out["doubling_drift"].values()) <= args.drift_tol and out["oscillatory_integral"]["bound_holds"]
    for k, v in out["doubling_drift"].items():
        print(f"{k} doubling drift {v:.4g}: {'PASS' if v <= args.drift_tol else 'FAIL'}")
    osc = out["oscillatory_integral"]
    print(f"oscillatory integral of f'/f: {osc['verdict']}, parts bound "
          f"{'holds' if osc['bound_holds'] else 'violated'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_list(args) -> int:
    for name, sc in SCENARIOS.items():
        params = ",".join(f"{p:g}" for p in sc.params)
        print(f"{name:20s} rate={sc.rate}({params}) a={sc.a:g} s={','.join(f'{s:g}' for s in sc.s)} "
              f"duration={sc.duration:g}  {sc.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sobolev-growth",
        description="Sobolev norm growth experiments for perturbed harmonic oscillators.",
        epilog=_CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run scenarios (shipped names or config files)",
                         epilog=_CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sim.add_argument("config", nargs="+", help="shipped scenario name or config file")
    sim.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    sim.add_argument("--outdir", help=f"output directory (default ${OUTDIR_ENV} or ./{DEFAULT_OUTDIR})")
    sim.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel (default 1)")
    sim.set_defaults(func=cmd_simulate)

    def rate_args(sp, horizon_default):
        sp.add_argument("name", choices=gr.CATALOG_NAMES)
        sp.add_argument("params", nargs="*", type=float, help="family parameters")
        sp.add_argument("--t0", type=float, default=None, help="domain start (family default)")
        sp.add_argument("--horizon", type=float, default=horizon_default,
                        help=f"absolute horizon (default {horizon_default:g})")
        sp.add_argument("--relative", action="store_true", help="read --horizon as horizon - t0")

    cr = sub.add_parser("check-rate", help="class M, support condition and hypothesis reports")
    rate_args(cr, 1e3)
    cr.add_argument("--step", type=float, default=0.1, help="grid step (default 0.1)")
    cr.add_argument("--hyp-horizon", type=float, default=1e3,
                    help="cap on the hypothesis-integral horizon (default 1e3)")
    cr.set_defaults(func=cmd_check_rate)

    mt = sub.add_parser("metaplectic-test", help="representation identities and norm bands")
    mt.add_argument("--seed", type=int, default=0, help="random matrix seed (default 0)")
    mt.add_argument("--count", type=int, default=50, help="random matrices (default 50)")
    mt.set_defaults(func=cmd_metaplectic_test)

    ap = sub.add_parser("appendix-integrals", help="I1/I2/I3 bands and the oscillatory-integral check")
    rate_args(ap, 1e3)
    ap.add_argument("--window-offset", type=float, default=10.0, help="band window start offset (default 10)")
    ap.add_argument("--drift-tol", type=float, default=0.2, help="allowed doubling drift (default 0.2)")
    ap.set_defaults(func=cmd_appendix)

    ls = sub.add_parser("list-scenarios", help="print the shipped scenario catalog")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (gr.RateDomainError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
