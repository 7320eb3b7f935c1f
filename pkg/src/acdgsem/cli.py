"""Command line driver.

    acdgsem run <config.cfg>       march one case, write traces/summary
    acdgsem campaign <config.cfg>  error-vs-mesh table over (order, mesh) grid
    acdgsem verify                 randomized property suite

Config files are INI-style key=value sections; see the README for the
schema.  Exit codes: 0 success, 2 configuration error, 3 diverged run.
"""

import argparse
import configparser
import inspect
import os
import sys

import numpy as np

from . import verification
from .cases import CASE_BUILDERS
from .diagnostics import convergence_order
from .driver import run_case


class ConfigError(Exception):
    pass


def _parse_value(section, key, raw):
    if key in ("counts",):
        parts = raw.split()
        if len(parts) == 1:
            parts = parts * 3
        if len(parts) != 3:
            raise ConfigError(f"[{section}] {key}: expected 1 or 3 integers")
        return tuple(int(p) for p in parts)
    if key in ("order", "momentum_average"):
        return int(raw)
    if key in ("re", "m0sq", "cfl", "dt", "t_final", "residual_target",
               "rho_floor"):
        return float(raw)
    return raw


def load_run_config(path):
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    if not cp.has_section("run") or not cp.has_option("run", "case"):
        raise ConfigError("[run] section with a 'case' key is required")
    case_name = cp.get("run", "case")
    if case_name not in CASE_BUILDERS:
        raise ConfigError(
            f"[run] case: unknown case {case_name!r}; "
            f"choose from {sorted(CASE_BUILDERS)}")
    builder = CASE_BUILDERS[case_name]
    sig = inspect.signature(builder)
    kwargs = {}
    if cp.has_section("case"):
        for key, raw in cp.items("case"):
            name = "dt" if key == "dt" and "dt" in sig.parameters else key
            if name not in sig.parameters:
                raise ConfigError(
                    f"[case] {key}: not a parameter of case {case_name!r} "
                    f"(accepts {sorted(p for p in sig.parameters)})")
            try:
                kwargs[name] = _parse_value("case", key, raw)
            except ValueError as exc:
                raise ConfigError(f"[case] {key}: {exc}") from None
    out = {
        "case": case_name,
        "builder": builder,
        "kwargs": kwargs,
        "label": cp.get("run", "label", fallback=None),
        "output_dir": cp.get("output", "dir", fallback="out"),
        "cadence": cp.getint("output", "cadence_steps", fallback=100),
        "instrument": cp.getboolean("output", "instrument", fallback=False),
        "snapshots": tuple(
            float(v) for v in
            cp.get("output", "snapshot_times", fallback="").split()),
    }
    if cp.has_section("campaign"):
        out["campaign_orders"] = [
            int(v) for v in cp.get("campaign", "orders").split()]
        out["campaign_counts"] = [
            int(v) for v in cp.get("campaign", "counts").split()]
    return out


def _build_case(cfg, **overrides):
    kwargs = dict(cfg["kwargs"])
    kwargs.update(overrides)
    try:
        return cfg["builder"](**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[case] invalid parameters: {exc}") from None


def cmd_run(args):
    cfg = load_run_config(args.config)
    case = _build_case(cfg)
    outdir = args.output_dir or cfg["output_dir"]
    result = run_case(case, output_dir=outdir, cadence_steps=cfg["cadence"],
                      snapshot_times=cfg["snapshots"],
                      instrument=cfg["instrument"], label=cfg["label"])
    s = result.summary
    print(f"case={s['case']} steps={s['steps']} t={s['t_final']:.6g} "
          f"E={s['E_final']:.9e} max|dEdt|={s['max_abs_dEdt']:.3e} "
          f"wall={s['wall_clock_s']:.1f}s")
    if "final_errors" in s:
        print("L2 errors: " + " ".join(f"{v:.4e}" for v in s["final_errors"]))
    if not result.ok:
        print(f"DIVERGED at step {s['diverged']['step']} "
              f"element {s['diverged']['element']} node {s['diverged']['node']}")
        return 3
    return 0


def cmd_campaign(args):
    cfg = load_run_config(args.config)
    if "campaign_orders" not in cfg:
        raise ConfigError("[campaign] section with 'orders' and 'counts' "
                          "lists is required")
    if cfg["case"] != "manufactured":
        raise ConfigError("campaigns are defined for the manufactured case")
    outdir = args.output_dir or cfg["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    varnames = ("rho", "rhou", "rhov", "rhow", "p")
    table_path = os.path.join(outdir, "campaign.csv")
    with open(table_path, "w") as fh:
        cols = ["N", "mesh"]
        for v in varnames:
            cols += [f"err_{v}", f"order_{v}"]
        fh.write(",".join(cols) + "\n")
        for order in cfg["campaign_orders"]:
            prev = None
            for count in cfg["campaign_counts"]:
                case = _build_case(cfg, order=order,
                                   counts=(count, count, count))
                label = f"manufactured_N{order}_{count}cubed"
                result = run_case(case, output_dir=outdir,
                                  cadence_steps=cfg["cadence"], label=label)
                if not result.ok:
                    raise RuntimeError(f"campaign run {label} diverged")
                errs = result.summary["final_errors"]
                row = [str(order), f"{count}^3"]
                for vi in range(5):
                    row.append(repr(errs[vi]))
                    if prev is None:
                        row.append("")
                    else:
                        row.append(repr(convergence_order(
                            prev[1][vi], errs[vi], 1.0 / prev[0], 1.0 / count)))
                fh.write(",".join(row) + "\n")
                print(f"N={order} {count}^3: " +
                      " ".join(f"{e:.3e}" for e in errs))
                prev = (count, errs)
    print(f"table written to {table_path}")
    return 0


def cmd_verify(args):
    ok = verification.run_all(seed=args.seed, n=args.cases)
    return 0 if ok else 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="acdgsem", description=__doc__)
    parser.add_argument("--threads", type=int, default=None,
                        help="numba thread count (default: all cores)")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="march one configured case")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.set_defaults(fn=cmd_run)
    p_camp = sub.add_parser("campaign", help="convergence table runs")
    p_camp.add_argument("config")
    p_camp.add_argument("--output-dir", default=None)
    p_camp.set_defaults(fn=cmd_campaign)
    p_ver = sub.add_parser("verify", help="randomized property suite")
    p_ver.add_argument("--seed", type=int, default=2024)
    p_ver.add_argument("--cases", type=int, default=10000)
    p_ver.set_defaults(fn=cmd_verify)

    args = parser.parse_args(argv)
    if args.threads is not None:
        import numba
        numba.set_num_threads(max(1, args.threads))
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
