"""Command-line front end.

Subcommands: perfect-region, robust-region, power-min, verify-kkt, validate.
Exit status: 0 success, 1 solver failure, 2 infeasible or malformed
configuration.
"""
import argparse
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .channel import (ConfigError, capacity_bounds, load_config, parse_config,
                      bundled_config_text, worst_case_rates_mc)
from .perfect import GridSpec

EXIT_OK, EXIT_FAILURE, EXIT_INFEASIBLE = 0, 1, 2
DEFAULT_EPS = "0,0.01,0.02,0.03,0.04,0.05,0.06"

log = logging.getLogger("fdsecrecy")


# --- argument helpers -------------------------------------------------------

def parse_grid(text):
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be K,L integers: {text!r}")
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2 or min(parts) < 1:
        raise argparse.ArgumentTypeError(f"grid must be K,L with K, L >= 1: {text!r}")
    return tuple(parts)


def parse_list(text):
    try:
        vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def parse_gamma(text):
    if text.strip().lower() in ("inf", "infinity", "none"):
        return math.inf
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError("gamma must be nonnegative")
    return v


def load_instance(args):
    if args.config:
        inst = load_config(args.config)
    else:
        inst = parse_config(bundled_config_text())
    if args.power_db is not None:
        inst = inst.with_power_db(args.power_db)
    return inst


def eps_label(e):
    return f"{e:g}"


class Output:
    """Collects written files for the manifest."""

    def __init__(self, directory):
        self.dir = directory
        os.makedirs(directory, exist_ok=True)
        self.files = []

    def write(self, name, text):
        path = os.path.join(self.dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        self.files.append(name)
        return path


def write_manifest(out, args, started, extra):
    params = {k: (list(v) if isinstance(v, tuple) else v)
              for k, v in vars(args).items() if k != "func"}
    doc = {"tool": "fdsecrecy", "version": __version__,
           "command": args.command, "parameters": params,
           "files": sorted(out.files), "wall_time_s": round(time.time() - started, 3)}
    doc.update(extra)
    out.write("manifest.json", json.dumps(doc, indent=2, sort_keys=True,
                                          default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    raise TypeError(type(o))


def _status_counts(status):
    keys, counts = np.unique(np.asarray(status, dtype=str), return_counts=True)
    return {str(k): int(c) for k, c in zip(keys, counts)}


def _region_exit(results):
    if any((np.asarray(r.status) == "failed").any() for r in results):
        return EXIT_FAILURE
    if not any(r.ok.any() for r in results):
        return EXIT_INFEASIBLE
    return EXIT_OK


# --- subcommands ------------------------------------------------------------

def cmd_perfect_region(args):
    from .perfect import max_sum_secrecy
    from .region import polygon_csv, region_csv, region_polygon, region_svg

    inst = load_instance(args)
    if not inst.perfect:
        inst = inst.with_eps(0.0)
        log.info("perfect-region ignores the configured error bounds")
    started = time.time()
    out = Output(args.out)
    k, l = args.grid
    r = max_sum_secrecy(inst, GridSpec(k, l, args.zeta))
    verts = region_polygon(r)
    p_db = args.power_db
    tag = "perfect"
    if args.format in ("csv", "both"):
        out.write(f"{tag}_region.csv", region_csv(r))
        out.write(f"{tag}_polygon.csv", polygon_csv(verts))
    if args.format in ("svg", "both"):
        out.write(f"{tag}_region.svg",
                  region_svg([("perfect CSI", verts)], "Perfect-CSI region"))
    write_manifest(out, args, started, {
        "capacities": list(capacity_bounds(inst)), "sum_max": r.sum_max,
        "status_counts": _status_counts(r.status), "power_db": p_db})
    print(f"sum secrecy max = {r.sum_max:.9g} bits/channel use "
          f"({len(r)} cells, {int(r.ok.sum())} optimal)")
    return _region_exit([r])


def cmd_robust_region(args):
    from .region import polygon_csv, region_csv, region_polygon, region_svg
    from .robust import shared_grid_sweep

    base = load_instance(args)
    eps = args.eps
    started = time.time()
    out = Output(args.out)
    k, l = args.grid
    instances = {e: base.with_eps(e) for e in eps}
    res = shared_grid_sweep(instances, GridSpec(k, l, args.zeta))
    lines, summary = [], {}
    for e in eps:
        r = res[e]
        verts = region_polygon(r, basis=args.basis)
        name = f"robust_eps{eps_label(e)}"
        header = "eps " + " ".join(f"{n}={v:g}" for n, v in instances[e].eps.items())
        if args.format in ("csv", "both"):
            out.write(f"{name}_region.csv", region_csv(r, robust=True,
                                                       header_comment=header))
            out.write(f"{name}_polygon.csv", polygon_csv(verts))
        lines.append((f"eps = {eps_label(e)}", verts))
        summary[eps_label(e)] = {"sum_max": r.sum_max,
                                 "status_counts": _status_counts(r.status)}
        print(f"eps = {eps_label(e)}: worst-case sum secrecy >= {r.sum_max:.9g}")
    if args.format in ("svg", "both"):
        out.write("robust_regions.svg",
                  region_svg(lines, "Worst-case regions across error bounds"))
    write_manifest(out, args, started, {"results": summary,
                                        "basis": args.basis})
    return _region_exit(list(res.values()))


def cmd_power_min(args):
    from .powermin import (SinrSpec, min_total_power, power_csv,
                           power_vs_sinr_sweep)

    inst = load_instance(args)
    if args.eps is not None:
        inst = inst.with_eps(args.eps[0])
    started = time.time()
    out = Output(args.out)
    if args.floors is not None:
        rows = power_vs_sinr_sweep(inst, args.floors, args.gamma_e)
    else:
        spec = SinrSpec(args.gamma_e, args.gamma_s1, args.gamma_s2)
        r = min_total_power(inst, spec)
        rows = [{"gamma_s1": spec.gamma_s1, "gamma_s2": spec.gamma_s2,
                 "gamma_e": spec.gamma_e, "total_power": r.total_power,
                 "status": r.status, "margin": r.margin, "result": r}]
    out.write("power.csv", power_csv(rows))
    for row in rows:
        extra = f" (Phase-I margin {row['margin']:.3g})" \
            if row["status"] == "infeasible" else ""
        print(f"floors ({row['gamma_s1']:g}, {row['gamma_s2']:g}), "
              f"gammaE {row['gamma_e']:g}: total power {row['total_power']:.9g} "
              f"[{row['status']}]{extra}")
    statuses = [row["status"] for row in rows]
    write_manifest(out, args, started, {
        "points": [{k: v for k, v in row.items() if k != "result"} for row in rows]})
    if "numericalFailure" in statuses:
        return EXIT_FAILURE
    if all(s == "infeasible" for s in statuses):
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_verify_kkt(args):
    from .kkt import KKT_TOL, kkt_report, verify_region
    from .perfect import max_sum_secrecy

    inst = load_instance(args).with_eps(0.0)
    started = time.time()
    out = Output(args.out)
    k, l = args.grid
    r = max_sum_secrecy(inst, GridSpec(k, l, args.zeta))
    rows = verify_region(inst, r)
    out.write("kkt_report.txt", kkt_report(rows))
    cert = [x for x in rows if x["status"] == "optimal"]
    worst = max((x["max_residual"] for x in cert), default=0.0)
    verdicts = _status_counts([x["rank"].verdict for x in cert]) if cert else {}
    print(f"{len(cert)} of {len(rows)} converged cells certified; "
          f"max KKT residual {worst:.3e}; rank verdicts {verdicts}")
    write_manifest(out, args, started, {
        "certified": len(cert), "max_residual": worst, "rank_verdicts": verdicts,
        "status_counts": _status_counts([x["status"] for x in rows])})
    bad = worst > KKT_TOL or verdicts.get("fail", 0) > 0 or any(
        x["status"] == "numericalFailure" for x in rows)
    return EXIT_FAILURE if bad else EXIT_OK


def cmd_validate(args):
    """Oracle and Monte-Carlo checks of the solvers on the configured instance."""
    from .oracles import (adversarial_error_search, random_scalar_instance,
                          scalar_sum_secrecy_oracle)
    from .perfect import max_sum_secrecy
    from .powermin import power_vs_sinr_sweep
    from .robust import robust_max_sum_secrecy

    base = load_instance(args)
    started = time.time()
    out = Output(args.out)
    k, l = args.grid
    checks = []

    def record(name, ok, detail):
        checks.append({"check": name, "pass": bool(ok), "detail": detail})
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")

    # robust bounds under sampled and gridded errors
    eps = args.eps[-1] if args.eps else 0.03
    inst = base.with_eps(eps)
    r = robust_max_sum_secrecy(inst, GridSpec(k, l, args.zeta))
    worst = 0.0
    for i in np.nonzero(r.ok)[0]:
        d = r.design(i)
        for w in (worst_case_rates_mc(inst, d, args.samples, args.seed + int(i)),
                  adversarial_error_search(inst, d)):
            r1, r2, re = w.as_tuple()
            worst = max(worst, r.r1_lower[i] - r1, r.r2_lower[i] - r2, re - r.re[i])
    record(f"robust bounds at eps={eps:g}", worst <= 1e-3,
           f"{int(r.ok.sum())} cells, largest violation {worst:.2e}")

    # zero error bounds reproduce the perfect-CSI sweep
    p = max_sum_secrecy(base.with_eps(0.0), GridSpec(k, l, args.zeta))
    r0 = robust_max_sum_secrecy(base.with_eps(0.0), GridSpec(k, l, args.zeta))
    both = p.ok & r0.ok
    dt = float(np.max(np.abs(p.t_min[both] - r0.t_min[both]))) if both.any() else 0.0
    record("eps=0 reduction", bool((p.ok == r0.ok).all()) and dt <= 2 * args.zeta,
           f"max |tMin difference| {dt:.2e}")

    # scalar oracle
    si = random_scalar_instance(args.seed)
    o = scalar_sum_secrecy_oracle(si, 200)
    ps = max_sum_secrecy(si, GridSpec(200, 200, args.zeta))
    record("scalar oracle", abs(o.sum_max - ps.sum_max) <= 0.01,
           f"oracle {o.sum_max:.6f}, grid sweep {ps.sum_max:.6f}")

    # power minimization soundness and monotonicity
    rows = power_vs_sinr_sweep(inst, [0.0, 0.1, 0.2, 0.4], gamma_e=math.inf)
    pw = [row["total_power"] for row in rows if row["status"] == "optimal"]
    mono = all(b >= a - 1e-7 for a, b in zip(pw, pw[1:]))
    viol = 0.0
    for row in rows:
        if row["status"] == "optimal" and row["total_power"] > 0:
            w = worst_case_rates_mc(inst, row["result"].design, args.samples, args.seed)
            g = adversarial_error_search(inst, row["result"].design)
            f = row["gamma_s1"]
            viol = max(viol, f - min(w.sinr1_min, g.sinr1_min),
                       f - min(w.sinr2_min, g.sinr2_min))
    record("power minimization", mono and viol <= 1e-6 and rows[0]["total_power"] == 0.0,
           f"powers {[round(x, 6) for x in pw]}, largest SINR shortfall {viol:.2e}")

    out.write("validation.json", json.dumps(checks, indent=2) + "\n")
    write_manifest(out, args, started, {"checks": checks})
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_FAILURE


# --- parser -----------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(
        prog="fdsecrecy",
        description="Secrecy-rate regions and power minimization for a "
                    "full-duplex two-user link with an eavesdropper.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, grid="40,40", eps=None):
        p.add_argument("--config", help="instance config file (default: bundled "
                       "two-antenna reference instance)")
        p.add_argument("--power-db", type=float, default=None,
                       help="power budget of both users in dB")
        p.add_argument("--grid", type=parse_grid, default=parse_grid(grid),
                       help="rate grid subdivisions K,L")
        p.add_argument("--zeta", type=float, default=1e-4,
                       help="bisection tolerance on the leakage SINR")
        p.add_argument("--eps", type=parse_list,
                       default=None if eps is None else parse_list(eps),
                       help="comma-separated CSI error bounds")
        p.add_argument("--samples", type=int, default=10000)
        p.add_argument("--seed", type=int, default=7)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", choices=("csv", "svg", "both"), default="both")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("perfect-region", help="perfect-CSI sum secrecy sweep")
    common(p)
    p.set_defaults(func=cmd_perfect_region)

    p = sub.add_parser("robust-region", help="worst-case regions for several eps")
    common(p, grid="10,10", eps=DEFAULT_EPS)
    p.add_argument("--basis", choices=("targets", "certified"), default="targets",
                   help="box corners for the region boundary")
    p.set_defaults(func=cmd_robust_region)

    p = sub.add_parser("power-min", help="minimum total power for SINR thresholds")
    common(p)
    p.add_argument("--gamma-s1", type=parse_gamma, default=0.0)
    p.add_argument("--gamma-s2", type=parse_gamma, default=0.0)
    p.add_argument("--gamma-e", type=parse_gamma, default=math.inf,
                   help="eavesdropper SINR cap ('inf' drops the constraint)")
    p.add_argument("--floors", type=parse_list, default=None,
                   help="sweep symmetric user floors instead of one point")
    p.set_defaults(func=cmd_power_min)

    p = sub.add_parser("verify-kkt", help="KKT residuals and rank predictions")
    common(p)
    p.set_defaults(func=cmd_verify_kkt)

    p = sub.add_parser("validate", help="oracle and Monte-Carlo validation")
    common(p, grid="6,6", eps="0.03")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
