"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 every point failed,
3 some points failed.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import opfile
from .config import ConfigError
from .greens import SubstrateStack
from .semianalytic import (
    NonPhysicalEfficiencyError,
    QLinkInput,
    appendix_pipeline,
    delta_sw,
    efficiency_from_q,
    eta_ub_from_qlb,
    parse_scaling,
    q_lossless,
)
from .sweep import OperatorCache, _with_ohmic, expand, fmt, point_setup, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_ALL_FAILED, EXIT_PARTIAL = 0, 1, 2, 3

log = logging.getLogger("patchbounds")


def _common(p):
    p.add_argument("--config", help="INI study file")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
    p.add_argument("--cache-dir", help="directory for cached operator files")
    p.add_argument("--verbose", "-v", action="store_true")


def _point_flags(p):
    g = p.add_argument_group("single point (used without --config)")
    g.add_argument("--lx-over-lambda-eps", type=float, default=0.5)
    g.add_argument("--eps-r", type=float, default=4.0)
    g.add_argument("--tan-delta", type=float, default=0.001)
    g.add_argument("--rs", type=float, default=0.0, help="surface resistivity, ohm/sq")
    g.add_argument("--h-over-lx", type=float, default=0.05)
    g.add_argument("--ly-over-lx", type=float, default=0.77)
    g.add_argument("--shape", default="full")
    g.add_argument("--nx", type=int)
    g.add_argument("--ny", type=int)
    g.add_argument("--nonresonant-only", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="patchbounds", description="Efficiency and gain bounds for microstrip patches.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("efficiency", help="efficiency bound(s)")
    _common(p)
    _point_flags(p)
    p = sub.add_parser("gain", help="gain bound and directivity")
    _common(p)
    _point_flags(p)
    p.add_argument("--theta", type=float, default=0.0, help="degrees")
    p.add_argument("--phi", type=float, default=0.0, help="degrees")

    p = sub.add_parser("sweep", help="run the sweep described by --config")
    _common(p)

    p = sub.add_parser("semianalytic", help="surface-wave ratio and Q-factor relations")
    _common(p)
    p.add_argument("--eps-r", type=float)
    p.add_argument("--kh", type=float)
    p.add_argument("--q", type=float, help="Q-factor of a half-wave patch")
    p.add_argument("--tan-delta", type=float, default=0.0)
    p.add_argument("--delta", type=float, help="dissipation factor, to report delta_rho")

    p = sub.add_parser("appendix-pipeline", help="Q-factor to efficiency extrapolation")
    _common(p)
    p.add_argument("--q", type=float, default=25.4)
    p.add_argument("--eps-r", type=float, default=4.29)
    p.add_argument("--tan-delta", type=float, default=0.015)
    p.add_argument("--h", type=float, default=3.3e-3, help="substrate thickness, m")
    p.add_argument("--f1", type=float, default=1.9e9)
    p.add_argument("--f2", type=float, default=1.5e9)
    p.add_argument("--scaling", default="power_law", help="pinned:VALUE, power_law[:P] or identity")

    p = sub.add_parser("operators", help="dump or inspect PBOP1 operator files")
    osub = p.add_subparsers(dest="op_command", required=True)
    d = osub.add_parser("dump", help="assemble one point and write its operators")
    _common(d)
    _point_flags(d)
    d.add_argument("--point", type=int, default=0, help="grid index within --config")
    ld = osub.add_parser("load", help="read a PBOP1 file and print a summary")
    ld.add_argument("path")
    ld.add_argument("--out")
    ld.add_argument("--verbose", "-v", action="store_true")
    return ap


def _flags_config(args, gain=False) -> cfgmod.SweepConfig:
    cp = configparser.ConfigParser()
    cp["geometry"] = {
        "lx_over_lambda_eps": repr(args.lx_over_lambda_eps),
        "ly_over_lx": repr(args.ly_over_lx),
        "h_over_lx": repr(args.h_over_lx),
        "shape": args.shape,
    }
    if args.nx is not None or args.ny is not None:
        cp["geometry"]["nx"] = str(args.nx)
        cp["geometry"]["ny"] = str(args.ny)
    cp["substrate"] = {"eps_r": repr(args.eps_r), "tan_delta": repr(args.tan_delta)}
    cp["ohmic"] = {"r_s": repr(args.rs)}
    cp["solve"] = {"resonant": str(not args.nonresonant_only), "gain": str(gain)}
    if gain:
        cp["solve"]["theta"] = repr(args.theta)
        cp["solve"]["phi"] = repr(args.phi)
    return cfgmod.from_parser(cp)


def _sweep_config(args, gain=None) -> cfgmod.SweepConfig:
    if args.config:
        cfg = cfgmod.load(args.config)
        if gain is not None and gain != cfg.gain:
            cfg = replace(cfg, gain=gain)
            if gain and hasattr(args, "theta"):
                cfg = replace(cfg, theta=args.theta, phi=args.phi)
        return cfg
    return _flags_config(args, gain=bool(gain))


def _emit(text: str, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_sweep(args, gain=None):
    cfg = _sweep_config(args, gain)
    cache = OperatorCache(args.cache_dir)
    log.info("%d sweep points, %d threads", len(expand(cfg)), args.threads)
    res = run_sweep(cfg, threads=args.threads, cache=cache, out=args.out or cfg.csv)
    if not (args.out or cfg.csv):
        sys.stdout.write(res.csv())
    log.info("cache: %d hits, %d assemblies", cache.hits, cache.misses)
    if res.failed:
        log.error("%d of %d points failed", res.failed, len(res.rows))
    return res.exit_code


def _table(rows, header):
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def _cmd_semianalytic(args):
    if args.config:
        cf = cfgmod.load_file(args.config)
        if cf.semianalytic is None:
            raise ConfigError("config has no [semianalytic] section", args.config)
        sc = cf.semianalytic
        rows = []
        labels = sc.h_over_lambda or sc.kh
        for lab, kh in zip(labels, sc.kh):
            for e in sc.eps_r:
                rows.append((lab, kh, e, delta_sw(e, kh)))
        head = ("h_over_lambda" if sc.h_over_lambda else "kh_label", "kh", "eps_r_real", "delta_sw")
        _emit(_table(rows, head), args.out)
        return EXIT_OK
    if args.eps_r is None or args.kh is None:
        raise ConfigError("semianalytic needs --config or both --eps-r and --kh")
    dsw = delta_sw(args.eps_r, args.kh)
    out = [("delta_sw", dsw)]
    if args.delta is not None:
        out.append(("delta_rho", args.delta - dsw))
    if args.q is not None:
        out += [
            ("eta", efficiency_from_q(args.q, args.tan_delta, dsw)),
            ("Q_lb", q_lossless(args.q, args.tan_delta)),
        ]
        out.append(("eta_ub", eta_ub_from_qlb(out[-1][1], args.tan_delta, dsw)))
    _emit("".join(f"{k}={fmt(float(v))}\n" for k, v in out), args.out)
    return EXIT_OK


def _cmd_pipeline(args):
    if args.config:
        cf = cfgmod.load_file(args.config)
        if cf.pipeline is None:
            raise ConfigError("config has no [pipeline] section", args.config)
        pc = cf.pipeline
        q, eps, td, h, f1, f2, scaling = pc.Q, pc.eps_r, pc.tan_delta, pc.h, pc.f1, pc.f2, pc.scaling
    else:
        q, eps, td, h, f1, f2, scaling = args.q, args.eps_r, args.tan_delta, args.h, args.f1, args.f2, args.scaling
    try:
        rule = parse_scaling(scaling)
        stack = SubstrateStack.from_loss_tangent(eps, td, h)
        rep = appendix_pipeline(QLinkInput(q, td, stack, f1), f2, rule)
    except NonPhysicalEfficiencyError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None
    text = "step,quantity,value\n" + "".join(f"{n},{k},{fmt(float(v))}\n" for n, k, v in rep.rows())
    text += f"# scaling: {rep.scaling}\n"
    _emit(text, args.out)
    return EXIT_OK


def _cmd_dump(args):
    cfg = _sweep_config(args)
    pts = expand(cfg)
    if not 0 <= args.point < len(pts):
        raise ConfigError(f"--point {args.point} outside 0..{len(pts) - 1}")
    if not args.out:
        raise ConfigError("operators dump needs --out")
    cache = OperatorCache(args.cache_dir)
    pt = pts[args.point]
    basis, stack, ctx = point_setup(pt, cfg)
    ops = _with_ohmic(cache.get(basis, stack, ctx, cfg.options), basis, pt.R_s)
    opfile.dump(ops, args.out)
    log.info("wrote %s (N=%d)", args.out, ops.N)
    return EXIT_OK


def _cmd_load(args):
    ops = opfile.load(args.path)
    lines = ["matrix,rows,cols,frobenius_norm"]
    for name in opfile.MATRICES:
        A = getattr(ops, name)
        lines.append(f"{name},{A.shape[0]},{A.shape[1]},{np.linalg.norm(A):.17g}")
    lines += [f"# {k}={v}" for k, v in sorted(ops.metadata.items())]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "sweep":
            if not args.config:
                raise ConfigError("sweep needs --config")
            return _cmd_sweep(args)
        if args.command == "efficiency":
            return _cmd_sweep(args, gain=False)
        if args.command == "gain":
            return _cmd_sweep(args, gain=True)
        if args.command == "semianalytic":
            return _cmd_semianalytic(args)
        if args.command == "appendix-pipeline":
            return _cmd_pipeline(args)
        if args.command == "operators":
            return _cmd_dump(args) if args.op_command == "dump" else _cmd_load(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except opfile.OperatorFileError as e:
        print(f"operator file error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NonPhysicalEfficiencyError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
