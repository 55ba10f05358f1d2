"""Command-line driver.

Every CSV starts with a ``#`` line holding the toolkit version and the
fully resolved config, followed by a header row.  Exit codes: 0 success,
2 usage or config error, 3 numeric failure, 4 target not reached.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__, config, control, convergence, ctmc, distributions, fluid, hilt, policies
from ._parallel import pmap
from .errors import (CoevoError, ConfigurationError, DegenerateThresholdError, DomainError,
                     UnreachableTargetError)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_NOT_REACHED = 0, 2, 3, 4

log = logging.getLogger("coevo")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def _header_line(command, cfg):
    meta = json.dumps({"command": command, "config": cfg}, sort_keys=True,
                      separators=(",", ":"))
    return f"# coevo {__version__} config={meta}\n"


@contextmanager
def _sink(path):
    if path is None or str(path) == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_csv(path, command, cfg, header, rows):
    with _sink(path) as fh:
        fh.write(_header_line(command, cfg))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _sibling(out, suffix):
    if out is None or str(out) == "-":
        return None
    p = Path(out)
    return p.with_name(p.stem + suffix)


def _coevol_config(cfg):
    return control.CoevolConfig(cfg["lambda"], cfg["beta"], cfg["Gamma"], cfg["alpha"],
                                cfg["psi"], cfg["d0"], cfg["xd0_ratio"], cfg.get("horizon"),
                                cfg.get("h", fluid.DEFAULT_STEP))


# --------------------------------------------------------------------------
# subcommands


def _hilt_sim(task):
    model, N, Gamma, dist_spec, d0, horizon, seed = task
    params = hilt.HiltParams(N, Gamma, distributions.from_spec(dist_spec), int(round(d0 * N)))
    rng = hilt.make_rng(seed)
    if model == "hilt-exact":
        return hilt.run_exact(params, int(horizon) if horizon else N, rng, seed)
    return hilt.run_scaled(params, horizon or 10.0, rng, seed)


def _ctmc_sim(task):
    cfg, seed, a_inf = task
    cc = _coevol_config(cfg)
    N = cfg["N"]
    start = ctmc.CoevolCounts.initial(N, int(round(cc.d0 * N)),
                                      int(round(cc.d0 * cc.xd0_ratio * N)))
    horizon = cfg["horizon"] or cc.params.default_horizon()
    return ctmc.run_ctmc(start, cc.params, policies.from_spec(cfg["policy"]), horizon,
                         hilt.make_rng(seed), a_inf=a_inf, seed=seed)


def cmd_simulate(cfg, out, jobs):
    model, seeds = cfg["model"], cfg["seeds"]
    if model.startswith("hilt"):
        tasks = [(model, cfg["N"], cfg["Gamma"], cfg["dist"], cfg["d0"], cfg["horizon"], s)
                 for s in seeds]
        paths = pmap(_hilt_sim, tasks, jobs)
        rows = ((p.seed, k, B, D) for p in paths for k, B, D in zip(p.k, p.B, p.D))
        write_csv(out, "simulate", cfg, ("seed", "k_or_minislot", "B", "D"), rows)
        return EXIT_OK
    cc = _coevol_config(cfg)
    a_inf = fluid.terminal_destinations(cc.params, cc.initial, cc.h)
    paths = pmap(_ctmc_sim, [(cfg, s, a_inf) for s in seeds], jobs)
    rows = (r for p in paths for r in p.event_rows())
    write_csv(out, "simulate", cfg,
              ("seed", "t", "epoch_kind", "B", "D", "X_b", "X_d", "Y"), rows)
    summary = [(p.seed, p.T_hit, p.Y_at_T) for p in paths]
    write_csv(_sibling(out, "_summary.csv"), "simulate", cfg, ("seed", "T_hit", "Y_at_T"),
              summary)
    return EXIT_OK


def cmd_fluid(cfg, out, jobs):
    h = cfg["h"]
    if cfg["model"] == "hilt-fluid":
        dist = distributions.from_spec(cfg["dist"])
        path = fluid.solve_hilt(cfg["Gamma"], dist, cfg["d0"], cfg["horizon"] or 20.0, h)
        write_csv(out, "fluid", cfg, ("t", "b", "d"), zip(path.t, path.b, path.d))
        return EXIT_OK
    cc = _coevol_config(cfg)
    path = fluid.solve_coevol(cc.params, cc.initial, policies.from_spec(cfg["policy"]),
                              cfg["horizon"], h)
    write_csv(out, "fluid", cfg, ("t", "b", "d", "x_b", "x_d", "y", "sigma"),
              (row for row in zip(path.t, *path.z.T, path.sigma)))
    return EXIT_OK


_COST_HEADER = ("kind", "tau", "T", "y_T", "C", "status")


def _report_row(kind, tau, r):
    return (kind, tau, r.T, r.y_T, r.C, r.status)


def cmd_optimize(cfg, out, jobs):
    cc = _coevol_config(cfg)
    if cfg.get("policy") is not None:
        pol = policies.from_spec(cfg["policy"])
        r = control.evaluate_cost(cc.params, cc.initial, pol, horizon=cc.horizon, h=cc.h)
        tau = getattr(pol, "tau", math.nan)
        write_csv(out, "optimize", cfg, _COST_HEADER, [_report_row("policy", tau, r)])
        return EXIT_OK if r.reached else EXIT_NOT_REACHED
    opt = control.optimize_tau(cc.params, cc.initial, n_grid=cfg["n_grid"], tol=cfg["tol"],
                               horizon=cc.horizon, h=cc.h)
    rows = [_report_row("grid", float(t), r) for t, r in zip(opt.taus, opt.grid)]
    rows.append(_report_row("optimum", opt.tau_star, opt.report))
    write_csv(out, "optimize", cfg, _COST_HEADER, rows)
    if out not in (None, "-"):
        print(json.dumps({"tau_star": opt.tau_star, "tau_sat": opt.tau_sat, "C": opt.report.C,
                          "status": opt.report.status, "monotone": opt.monotone}))
    return EXIT_OK if opt.report.reached else EXIT_NOT_REACHED


def cmd_sweep(cfg, out, jobs):
    rows = control.sweep(cfg["param"], cfg["grid"], _coevol_config(cfg), jobs)
    write_csv(out, "sweep", cfg, ("param", "value", "tau_star", "T", "y_T", "C", "status"),
              ((r.param, r.value, r.tau_star, r.T, r.y_T, r.C, r.status) for r in rows))
    return EXIT_OK


def cmd_seed_size(cfg, out, jobs):
    beta_t, G = cfg["beta_target"], cfg["Gamma"]
    T = math.inf if cfg["T"] is None else cfg["T"]
    d0 = control.seed_for_deadline(beta_t, G, T)
    a_T = control.destinations_at(T, d0, G) if math.isfinite(T) else fluid.terminal_fraction(
        distributions.Uniform01(), G, d0)
    write_csv(out, "seed-size", cfg,
              ("beta_target", "Gamma", "T", "d0_star", "a_T", "d0_infinite_horizon"),
              [(beta_t, G, T, d0, a_T, control.seed_for_target(G, beta_t))])
    return EXIT_OK


def cmd_converge(cfg, out, jobs):
    Ns, seeds = cfg["N"], cfg["seeds"]
    if len(Ns) < 2:
        raise ConfigurationError("converge: need at least two values of N")
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ConfigurationError("converge: N list must be strictly increasing")
    if len(seeds) < 20:
        raise ConfigurationError(f"converge: need at least 20 seeds, got {len(seeds)}")
    if cfg["model"] == "hilt-scaled":
        rows = convergence.hilt_study(Ns, seeds, cfg["Gamma"], cfg["d0"],
                                      distributions.from_spec(cfg["dist"]), cfg["horizon"],
                                      cfg["h"], jobs)
    else:
        cc = _coevol_config(cfg)
        rows = convergence.sirsi_study(Ns, seeds, cc.params, policies.from_spec(cfg["policy"]),
                                       cc.d0, cc.d0 * cc.xd0_ratio, cfg["horizon"], cfg["h"], jobs)
    write_csv(out, "converge", cfg, ("N", "median", "q25", "q75", "iqr", "n_seeds"),
              ((r.N, r.median, r.q25, r.q75, r.iqr, len(r.seeds)) for r in rows))
    write_csv(_sibling(out, "_runs.csv"), "converge", cfg, ("N", "seed", "distance"),
              ((r.N, s, dist) for r in rows for s, dist in zip(r.seeds, r.distances)))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fluid": cmd_fluid,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "seed-size": cmd_seed_size,
    "converge": cmd_converge,
}


def build_parser():
    p = argparse.ArgumentParser(prog="coevo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"coevo {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON config file")
        s.add_argument("--out", help="output CSV (default: stdout)")
        s.add_argument("--seeds", help="comma list of seeds, ranges like 0-19 allowed")
        s.add_argument("--jobs", type=int, default=1, help="worker processes")
        s.add_argument("--step", type=float, help="integration step h")
        s.add_argument("--horizon", type=float, help="time horizon")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigurationError("--jobs must be at least 1")
        raw, text, base = {}, None, None
        source = "<defaults>"
        if args.config is not None:
            raw, text = config.load(args.config)
            source, base = str(args.config), args.config.parent
        overrides = {"h": args.step, "horizon": args.horizon,
                     "seeds": config.parse_seeds(args.seeds) if args.seeds else None}
        cfg = config.resolve(args.command, raw, overrides, source=source, text=text,
                             base_dir=base)
        return COMMANDS[args.command](cfg, args.out, args.jobs)
    except UnreachableTargetError as exc:
        print(f"coevo: target not reached: {exc}", file=sys.stderr)
        return EXIT_NOT_REACHED
    except DegenerateThresholdError as exc:
        print(f"coevo: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigurationError, DomainError) as exc:
        print(f"coevo: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CoevoError, ArithmeticError) as exc:
        print(f"coevo: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
