"""Command-line interface: ``ncbesq <command> [flags]``.

Every command writes CSV or JSON to ``--out`` (stdout when omitted).  A JSON
run configuration given with ``--config`` supplies defaults; explicit flags
take precedence.  Exit codes: 0 success, 1 numerical check failure, 2 usage
or domain error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import checks
from .correlation import SpaceTimePointSet, TestFunction, corr_rho, fredholm_generating
from .densities import noncolliding_transition, p_nu
from .kernels import KernelHandle
from .montecarlo import (analytic_density, compare, em_sde_sample, estimate, laguerre_sample,
                         load_ensemble, save_ensemble)
from .pointconf import config_from_json
from .specfun import bessel_zeros


class UsageError(Exception):
    pass


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _grid(text):
    a, b, n = str(text).split(":")
    return np.linspace(float(a), float(b), int(n))


def _csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{float(v):.17g}" for v in row))
    return "\n".join(lines) + "\n"


def _json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args):
    if args.atoms is not None:
        return config_from_json({"kind": "explicit", "points": _floats(args.atoms)})
    if args.configuration is not None:
        spec = args.configuration
        return config_from_json(json.loads(spec) if isinstance(spec, str) else spec)
    raise UsageError("a configuration is required (--atoms or --configuration)")


def _seed(args):
    if args.seed is not None:
        return int(args.seed)
    return int(os.environ.get("BESQ_SEED", "0"))


# -- commands -----------------------------------------------------------------------

def cmd_zeros(args):
    z = bessel_zeros(args.nu, args.count).as_array()
    return _csv(["index", "zero"], [(i + 1, v) for i, v in enumerate(z)]), 0


def cmd_density(args):
    x0 = _floats(args.x0)
    if len(x0) == 1:
        y = _grid(args.grid)
        return _csv(["y", "p"], zip(y, np.atleast_1d(p_nu(args.nu, args.t, y, x0[0])))), 0
    if not args.points:
        raise UsageError("N > 1 needs --points 'y1,...,yN;y1,...,yN'")
    rows = []
    for chunk in args.points.split(";"):
        y = _floats(chunk)
        rows.append(list(y) + [noncolliding_transition(args.nu, args.t, y, x0)])
    return _csv([f"y{i + 1}" for i in range(len(x0))] + ["p"], rows), 0


_KIND = {"finite": "finite_nu", "finite_J": "finite_J", "contour": "contour", "infinite": "infinite",
         "bessel": "bessel_stationary", "extended": "extended_bessel", "relaxation": "relaxation"}


def _kernel(args):
    kind = _KIND[args.kind]
    cfg = _config(args) if kind in ("finite_nu", "finite_J", "contour", "infinite") else None
    return KernelHandle(kind, args.nu, cfg, truncation=args.truncation)


def cmd_kernel(args):
    K = _kernel(args)
    g = _grid(args.grid)
    X, Y = np.meshgrid(g, g, indexing="ij")
    vals = np.asarray(K(args.s, X, args.t, Y))
    return _csv(["x", "y", "K"], zip(X.ravel(), Y.ravel(), vals.ravel())), 0


def cmd_relax(args):
    thetas = _floats(args.theta)
    g = str(args.grid).split(":")
    dev = checks.relaxation_ladder(args.nu, thetas, grid=(float(g[0]), float(g[1]), int(g[2])),
                                   n_zeros=args.n_zeros)
    payload = {"nu": args.nu, "theta": thetas, "sup_deviation": dev,
               "decreasing": all(b < a for a, b in zip(dev, dev[1:]))}
    return _json(payload), 0


def cmd_correlate(args):
    K = _kernel(args)
    times = _floats(args.times)
    pts = [_floats(c) for c in args.points.split(";")]
    rho = corr_rho(K, SpaceTimePointSet(times, pts))
    return _json({"nu": args.nu, "times": times, "points": pts, "rho": rho}), 0


def cmd_gapprob(args):
    K = _kernel(args)
    a, b = _floats(args.interval)
    res = fredholm_generating(K, [args.t], [TestFunction((a, b), args.theta)], n=args.nodes)
    payload = {"value": res.value, "node_ladder": [[n, v] for n, v in res.node_ladder],
               "warnings": res.warnings, "interval": [a, b], "theta": args.theta, "t": args.t}
    return _json(payload), 0


def cmd_simulate(args):
    x0 = _floats(args.x0)
    times = _floats(args.times)
    seed = _seed(args)
    if args.method == "wishart":
        ens = laguerre_sample(args.nu, len(x0), x0, times, args.paths, seed, threads=args.threads)
    else:
        ens = em_sde_sample(args.nu, len(x0), x0, times, args.paths, args.dt, seed, threads=args.threads)
    if not args.out:
        raise UsageError("simulate needs --out for the ensemble file")
    save_ensemble(ens, args.out)
    return None, 0


def cmd_compare(args):
    ens = load_ensemble(args.ensemble)
    nu = ens.params["nu"]
    edges = _grid(args.bins)
    emp = estimate(ens, "density", t=args.t, bins=edges)
    cfg = config_from_json({"points": ens.params["x0"]})
    K = KernelHandle("finite_nu" if cfg.simple else "contour", nu, cfg)
    rep = compare(analytic_density(K, args.t, edges), emp)
    return _json(rep.as_dict()), (0 if rep.passed else 1)


def cmd_check(args):
    groups = [int(g) for g in _floats(args.groups)] if args.groups else checks.IDENTITY_GROUPS
    res = checks.run_suite(groups, quick=args.quick, seed=_seed(args), nu=args.nu)
    failed = [r.name for r in res if not r.passed]
    payload = {"nu": args.nu, "quick": bool(args.quick), "seed": _seed(args),
               "results": [r.as_dict() for r in res], "failed": failed, "passed": not failed}
    return _json(payload), (1 if failed else 0)


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncbesq", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON run configuration (flags override)")
        sp.add_argument("--out", help="output path (stdout if omitted)")
        sp.add_argument("--nu", type=float, default=0.0)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.set_defaults(func=fn)
        return sp

    sp = cmd("zeros", cmd_zeros, "positive zeros of J_nu")
    sp.add_argument("--count", type=int, default=10)

    sp = cmd("density", cmd_density, "BESQ and noncolliding transition densities")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--x0", default="1")
    sp.add_argument("--grid", default="0.1:5:50")
    sp.add_argument("--points")

    def kernel_flags(sp):
        sp.add_argument("--kind", choices=sorted(_KIND), default="finite")
        sp.add_argument("--atoms")
        sp.add_argument("--configuration", help="JSON configuration spec")
        sp.add_argument("--truncation", type=int, default=None)

    sp = cmd("kernel", cmd_kernel, "correlation kernel on a grid")
    kernel_flags(sp)
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--grid", default="0.5:5:10")

    sp = cmd("relax", cmd_relax, "relaxation ladder against the stationary kernel")
    sp.add_argument("--theta", default="1,2,3,4")
    sp.add_argument("--grid", default="0.5:5:10")
    sp.add_argument("--n-zeros", dest="n_zeros", type=int, default=200)

    sp = cmd("correlate", cmd_correlate, "multitime correlation function")
    kernel_flags(sp)
    sp.add_argument("--times", required=False, default="1")
    sp.add_argument("--points", default="1")

    sp = cmd("gapprob", cmd_gapprob, "Fredholm generating function of one interval")
    kernel_flags(sp)
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--interval", default="0,2")
    sp.add_argument("--theta", type=float, default=-20.0)
    sp.add_argument("--nodes", type=int, default=64)

    sp = cmd("simulate", cmd_simulate, "Monte Carlo ensemble")
    sp.add_argument("--method", choices=["wishart", "em_sde"], default="wishart")
    sp.add_argument("--x0", default="1,3")
    sp.add_argument("--times", default="0.5")
    sp.add_argument("--paths", type=int, default=10000)
    sp.add_argument("--dt", type=float, default=1e-4)

    sp = cmd("compare", cmd_compare, "ensemble density against the finite kernel")
    sp.add_argument("--ensemble", required=False)
    sp.add_argument("--t", type=float, default=0.5)
    sp.add_argument("--bins", default="0:12:41")

    sp = cmd("check", cmd_check, "identity suite")
    sp.add_argument("--quick", action="store_true")
    sp.add_argument("--groups", help="comma-separated criterion groups (default 1-8)")
    return p


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config: {exc}")
        sp = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        # lists become the comma form the flags use; the configuration spec stays an object
        sp.set_defaults(**{k: ",".join(map(str, v)) if isinstance(v, list) else v
                           for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "compare" and not args.ensemble:
            raise UsageError("compare needs --ensemble")
        text, code = args.func(args)
    except (UsageError, ValueError) as exc:
        sys.stderr.write(f"ncbesq {args.command}: {exc}\n")
        return 2
    except RuntimeError as exc:
        _emit(_json({"command": args.command, "error": str(exc)}), args.out)
        return 1
    if text is not None:
        _emit(text, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
