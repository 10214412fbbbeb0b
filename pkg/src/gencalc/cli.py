"""Command-line interface.

Subcommands: mollifier | embed | classify | associate | verify-testobject |
geodesic | curvature | gtcheck.  Options come from flags or a ``--config``
JSON file (flags win).  Every subcommand supports ``--dry-run`` (validate
inputs and print the resolved plan) and writes a schema-versioned JSON report
plus optional CSV tables; report paths also render figures unless
``--no-figures`` is given.

Exit codes: 0 success, 1 error, 2 verdict Indeterminate, 3 verdict Fail
(NotModerate / NotNegligible / no-match / divergent / incomplete), so shell
suites can assert verdicts directly.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import netcore as nc
from . import plots, profiles
from .asymptotics import (DEFAULT_GRID, WIDE_GRID, CompactBox, EpsGrid,
                          classify_moderate, classify_negligible,
                          verify_test_object)
from .association import associate
from .embedding import DistributionSpec, embed_distribution, embed_smooth
from .errors import ArgumentError
from .mollifier import (SmoothingKernelNet, TestFunction,
                        build_vanishing_moment_mollifier, scale_translate,
                        strict_delta_net, translation_kernel_net)
from .spacetime import (build_brinkmann, build_flat_metric, build_kink_metric,
                        christoffel, curvature, geodesic_solve, gt_check,
                        limit_profile, ricci_associate)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INDETERMINATE = 2
EXIT_FAIL = 3


def parse_eps_grid(text: str) -> EpsGrid:
    if text in ("default", ""):
        return DEFAULT_GRID
    if text == "wide":
        return WIDE_GRID
    parts = text.split(":")
    if len(parts) != 3:
        raise ArgumentError(
            f"eps grid must be 'default', 'wide' or 'eps0:ratio:count', "
            f"got {text!r}")
    return EpsGrid(float(parts[0]), float(parts[1]), int(parts[2]))


def parse_box(text: str, resolution=None) -> CompactBox:
    intervals = []
    for chunk in text.split("x"):
        chunk = chunk.strip()
        if not (chunk.startswith("[") and chunk.endswith("]")):
            raise ArgumentError(f"box interval {chunk!r} must look like "
                                f"'[lo,hi]'")
        lo, hi = chunk[1:-1].split(",")
        intervals.append((float(lo), float(hi)))
    return CompactBox(tuple(intervals), resolution)


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def load_mollifier(args) -> TestFunction:
    if getattr(args, "mollifier", None):
        return TestFunction.load(args.mollifier)
    return build_vanishing_moment_mollifier(2)


def load_battery(path):
    if path is None:
        return None
    doc = load_json(path)
    battery = []
    for i, item in enumerate(doc):
        tf = TestFunction.from_json(item["mollifier"])
        scale = float(item.get("scale", 1.0))
        center = float(item.get("center", 0.0))
        psi = scale_translate(tf, scale, (center,)) \
            if (scale != 1.0 or center != 0.0) else tf
        battery.append((item.get("id", f"psi{i}"), psi))
    return battery


def write_report(path, command, options, results):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": options,
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "results": results,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def sibling(out_path, tag, suffix):
    p = Path(out_path)
    return p.with_name(f"{p.stem}.{tag}{suffix}")


def resolved_options(args, names):
    return {n: getattr(args, n.replace("-", "_")) for n in names}


def announce_plan(command, options):
    print(json.dumps({"command": command, "plan": options}, indent=2,
                     sort_keys=True))


# -- subcommand implementations ---------------------------------------------------

def cmd_mollifier(args):
    names = ("q", "radius", "dimension", "parity", "out")
    options = resolved_options(args, names)
    if args.q < 0 or args.radius <= 0 or args.dimension < 1:
        raise ArgumentError(
            f"need q >= 0, radius > 0, dimension >= 1; got q={args.q}, "
            f"radius={args.radius}, dimension={args.dimension}")
    if args.dry_run:
        announce_plan("mollifier", options)
        return EXIT_OK
    tf = build_vanishing_moment_mollifier(args.q, args.radius, args.dimension,
                                          args.parity)
    doc = tf.to_json()
    doc["schema_version"] = SCHEMA_VERSION
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.figures and tf.dimension == 1:
        plots.plot_mollifier(tf, sibling(args.out, "profile", ".png"))
    worst = max(abs(r) for r in tf.certificate["moment_residuals"])
    print(f"mollifier q={args.q} written to {args.out} "
          f"(worst residual {worst:.2e})")
    return EXIT_OK


def cmd_embed(args):
    names = ("spec", "smooth", "mollifier", "out")
    options = resolved_options(args, names)
    if (args.spec is None) == (args.smooth is None):
        raise ArgumentError("embed needs exactly one of --spec or --smooth")
    if args.dry_run:
        if args.spec:
            DistributionSpec.from_json(load_json(args.spec))
        announce_plan("embed", options)
        return EXIT_OK
    if args.smooth is not None:
        net = embed_smooth(profiles.smooth_parse(args.smooth, {"x": 0}))
    else:
        spec = DistributionSpec.from_json(load_json(args.spec))
        kernel = translation_kernel_net(load_mollifier(args))
        net = embed_distribution(spec, kernel)
    nc.save_expr(net, args.out)
    if args.figures:
        box = parse_box(args.box)
        plots.plot_net_values(net, box, (0.5, 0.1, 0.02),
                              sibling(args.out, "values", ".png"))
    print(f"net written to {args.out}")
    return EXIT_OK


_VERDICT_EXIT = {
    "moderate": EXIT_OK, "negligible": EXIT_OK,
    "indeterminate": EXIT_INDETERMINATE,
    "not_moderate": EXIT_FAIL, "not_negligible": EXIT_FAIL,
}


def cmd_classify(args):
    names = ("net", "box", "alpha_max", "m_max", "mode", "eps_grid", "out",
             "threads")
    options = resolved_options(args, names)
    if args.dry_run:
        nc.load_expr(args.net)
        announce_plan("classify", options)
        return EXIT_OK
    net = nc.load_expr(args.net)
    box = parse_box(args.box)
    grid = parse_eps_grid(args.eps_grid)
    results = {}
    codes = []
    reports = {}
    if args.mode in ("moderate", "both"):
        rep = classify_moderate(net, box, args.alpha_max, grid,
                                threads=args.threads)
        results["moderate"] = rep.to_json()
        reports["moderate"] = rep
        codes.append(_VERDICT_EXIT[rep.verdict.kind])
        print(f"moderate classification: {rep.verdict}")
    if args.mode in ("negligible", "both"):
        rep = classify_negligible(net, box, args.alpha_max, args.m_max, grid,
                                  threads=args.threads)
        results["negligible"] = rep.to_json()
        reports["negligible"] = rep
        codes.append(_VERDICT_EXIT[rep.verdict.kind])
        print(f"negligible classification: {rep.verdict}")
    write_report(args.out, "classify", options, results)
    rows = []
    for kind, rep in reports.items():
        for alpha, samples in rep.sweeps.items():
            for s in samples:
                rows.append((kind, ",".join(map(str, alpha)), s.eps, s.sup))
    write_csv(sibling(args.out, "samples", ".csv"),
              ("classification", "alpha", "eps", "sup"), rows)
    if args.figures:
        for kind, rep in reports.items():
            plots.plot_classification(rep, sibling(args.out, kind, ".png"))
    return max(codes) if codes else EXIT_ERROR


def cmd_associate(args):
    names = ("net", "battery", "candidate", "eps_grid", "out")
    options = resolved_options(args, names)
    if args.dry_run:
        nc.load_expr(args.net)
        if args.candidate:
            DistributionSpec.from_json(load_json(args.candidate))
        announce_plan("associate", options)
        return EXIT_OK
    net = nc.load_expr(args.net)
    battery = load_battery(args.battery)
    candidate = (DistributionSpec.from_json(load_json(args.candidate))
                 if args.candidate else None)
    grid = parse_eps_grid(args.eps_grid)
    result = associate(net, battery=battery, grid=grid, candidate=candidate)
    write_report(args.out, "associate", options, result.to_json())
    rows = []
    for rec in result.records:
        for eps, p in zip(rec.eps, rec.pairings):
            rows.append((rec.psi_id, eps, p, rec.limit))
    write_csv(sibling(args.out, "pairings", ".csv"),
              ("psi", "eps", "pairing", "extrapolant"), rows)
    if args.figures:
        plots.plot_association(result, sibling(args.out, "pairings", ".png"))
    print(f"association verdict: {result.verdict}"
          + (f", candidate match: {result.match.matched}" if result.match
             else ""))
    if result.verdict == "indeterminate":
        return EXIT_INDETERMINATE
    if result.verdict == "divergent":
        return EXIT_FAIL
    if result.match is not None and not result.match.matched:
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify_testobject(args):
    names = ("mollifier", "amplitude", "eps_power", "eps_grid", "out")
    options = resolved_options(args, names)
    if args.dry_run:
        announce_plan("verify-testobject", options)
        return EXIT_OK
    tf = load_mollifier(args)
    kernel = SmoothingKernelNet(tf, amplitude=args.amplitude,
                                eps_power=args.eps_power)
    grid = parse_eps_grid(args.eps_grid)
    report = verify_test_object(kernel, grid=grid)
    write_report(args.out, "verify-testobject", options, report.to_json())
    if args.figures:
        plots.plot_test_object(report, sibling(args.out, "conditions", ".png"))
    for name, cond in (("(i) weak identity", report.weak_identity),
                       ("(ii) smooth order", report.smooth_order),
                       ("(iii) moderateness", report.moderateness)):
        print(f"{name}: {'pass' if cond.passed else 'FAIL'} - {cond.detail}")
    return EXIT_OK if report.passed else EXIT_FAIL


def load_init(path):
    if path is None:
        return (-1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0)
    doc = load_json(path)
    keys = ("u0", "v0", "x0", "y0", "vdot0", "xdot0", "ydot0")
    missing = [k for k in keys if k not in doc]
    if missing:
        raise ArgumentError(f"init file {path} is missing {missing}")
    return tuple(float(doc[k]) for k in keys)


def cmd_geodesic(args):
    names = ("profile", "mollifier", "init", "eps_grid", "u_max", "out")
    options = resolved_options(args, names)
    init = load_init(args.init)
    options["resolved_init"] = list(init)
    if args.dry_run:
        build_brinkmann(args.profile, strict_delta_net(load_mollifier(args)))
        announce_plan("geodesic", options)
        return EXIT_OK
    pulse = strict_delta_net(load_mollifier(args))
    metric = build_brinkmann(args.profile, pulse)
    grid = parse_eps_grid(args.eps_grid)
    chris = christoffel(metric)
    solutions = []
    rows = []
    for eps in grid.values:
        sol = geodesic_solve(metric, eps, init, (init[0], args.u_max),
                             chris=chris)
        solutions.append(sol)
        for i in range(sol.u.size):
            rows.append((eps, sol.u[i], sol.states[i, 0], sol.states[i, 1],
                         sol.states[i, 2], sol.states[i, 3], sol.states[i, 4],
                         sol.states[i, 5]))
    write_csv(args.out, ("eps", "u", "v", "x", "y", "du_v", "du_x", "du_y"),
              rows)
    complete = [s.complete for s in solutions]
    results = {
        "complete": dict(zip((f"{s.eps:.8g}" for s in solutions), complete)),
        "drifts": {f"{s.eps:.8g}": {"killing": s.killing_drift,
                                    "null": s.null_drift}
                   for s in solutions},
    }
    can_fit = (all(complete) and len(solutions) >= 4
               and init[5] == 0.0 and init[6] == 0.0)
    if can_fit:
        fit = limit_profile(solutions)
        results["limit_profile"] = fit.to_json()
        print(f"x velocity jump -> {fit.coords['x'].velocity_jump:.6f} "
              f"(err {fit.coords['x'].velocity_jump_err:.1e})")
    write_report(sibling(args.out, "report", ".json"), "geodesic", options,
                 results)
    if args.figures:
        plots.plot_geodesics(solutions, sibling(args.out, "trajectories",
                                                ".png"))
    n_bad = sum(not c for c in complete)
    print(f"geodesic runs: {len(solutions) - n_bad}/{len(solutions)} complete; "
          f"samples written to {args.out}")
    return EXIT_OK if all(complete) else EXIT_FAIL


def cmd_curvature(args):
    names = ("profile", "mollifier", "associate", "points", "eps_grid",
             "check_identities", "seed", "out")
    options = resolved_options(args, names)
    if args.dry_run:
        build_brinkmann(args.profile, strict_delta_net(load_mollifier(args)))
        announce_plan("curvature", options)
        return EXIT_OK
    pulse = strict_delta_net(load_mollifier(args))
    metric = build_brinkmann(args.profile, pulse)
    chris = christoffel(metric)
    curv = curvature(metric, chris)
    results = {
        "nonzero_christoffels": [
            f"{'uvxy'[k]}|{'uvxy'[i]}{'uvxy'[j]}"
            for k, i, j, _ in chris.nonzero()],
        "determinant": -0.25,
    }
    if args.check_identities:
        rng = np.random.default_rng(args.seed)
        pts = np.column_stack([rng.uniform(-1.0, 1.0, 32) for _ in range(4)])
        worst_anti = 0.0
        worst_bianchi = 0.0
        n = 4
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        anti = (curv.riemann[i][j][k][l].eval(0.25, pts)
                                + curv.riemann[i][j][l][k].eval(0.25, pts))
                        worst_anti = max(worst_anti,
                                         float(np.max(np.abs(anti))))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        cyc = (curv.riemann[i][j][k][l].eval(0.25, pts)
                               + curv.riemann[i][k][l][j].eval(0.25, pts)
                               + curv.riemann[i][l][j][k].eval(0.25, pts))
                        worst_bianchi = max(worst_bianchi,
                                            float(np.max(np.abs(cyc))))
        results["identities"] = {"antisymmetry": worst_anti,
                                 "first_bianchi": worst_bianchi}
        print(f"antisymmetry residual {worst_anti:.2e}, "
              f"first Bianchi residual {worst_bianchi:.2e}")
    exit_code = EXIT_OK
    if args.associate:
        pts = []
        for chunk in args.points.split(";"):
            x0, y0 = chunk.split(",")
            pts.append((float(x0), float(y0)))
        grid = parse_eps_grid(args.eps_grid)
        assoc = ricci_associate(metric, curv, eval_points=pts, grid=grid)
        results["ricci_association"] = [r.to_json() for r in assoc]
        for r in assoc:
            tag = "matched" if (r.result.match and r.result.match.matched) \
                else "NO MATCH"
            print(f"Ricci_uu at {r.point}: {r.result.verdict}, candidate "
                  f"{r.candidate_coefficient}*{r.laplacian}*delta -> {tag}")
            if r.result.verdict != "associated" or not (
                    r.result.match and r.result.match.matched):
                exit_code = EXIT_FAIL
        if args.figures and assoc:
            plots.plot_association(assoc[0].result,
                                   sibling(args.out, "ricci", ".png"))
    write_report(args.out, "curvature", options, results)
    return exit_code


_GT_EXIT = {"gt-regular-consistent": EXIT_OK,
            "indeterminate": EXIT_INDETERMINATE,
            "fails-boundedness": EXIT_FAIL, "fails-L2": EXIT_FAIL}


def cmd_gtcheck(args):
    names = ("metric", "profile", "mollifier", "box", "eps_grid", "out")
    options = resolved_options(args, names)
    if args.dry_run:
        announce_plan("gtcheck", options)
        return EXIT_OK
    tf = load_mollifier(args)
    if args.metric == "impulsive":
        metric = build_brinkmann(args.profile, strict_delta_net(tf))
    elif args.metric == "kink":
        metric = build_kink_metric(translation_kernel_net(tf))
    elif args.metric == "flat":
        metric = build_flat_metric()
    else:
        raise ArgumentError(f"unknown metric kind {args.metric!r}")
    if args.box:
        box = parse_box(args.box, resolution=(9, 2, 9, 9))
    else:
        box = CompactBox(((-1.0, 1.0),) * 4, resolution=(9, 2, 9, 9))
    grid = parse_eps_grid(args.eps_grid)
    report = gt_check(metric, box, grid)
    write_report(args.out, "gtcheck", options, report.to_json())
    rows = []
    for label, sweeps in report.sup_sweeps.items():
        for eps, sup in sweeps:
            rows.append(("sup", label, eps, sup))
    for eps, val in report.l2_values:
        rows.append(("l2", "sum|dg|^2", eps, val))
    write_csv(sibling(args.out, "sweeps", ".csv"),
              ("quantity", "label", "eps", "value"), rows)
    if args.figures:
        plots.plot_gt_report(report, sibling(args.out, "sweeps", ".png"))
    print(f"gt-regularity verdict: {report.verdict} ({report.detail})")
    return _GT_EXIT[report.verdict]


# -- parser assembly ----------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="JSON file with option defaults")
    p.add_argument("--dry-run", action="store_true",
                   help="validate inputs and print the resolved plan")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (falls back to GENCALC_THREADS)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for random sample-point selection")
    p.add_argument("--no-figures", dest="figures", action="store_false",
                   help="skip rendering figures next to the output")
    p.set_defaults(figures=True)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gencalc",
        description="Computing with nonlinear generalized functions: "
                    "mollifiers, embeddings, classification, association, "
                    "and regularized impulsive pp-waves.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mollifier", help="build a vanishing-moment mollifier")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--dimension", type=int, default=1)
    p.add_argument("--parity", choices=("even", "generic"), default="even")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_mollifier)

    p = sub.add_parser("embed", help="embed a distribution or smooth function")
    p.add_argument("--spec", help="DistributionSpec JSON file")
    p.add_argument("--smooth", help="smooth profile expression (sigma)")
    p.add_argument("--mollifier", help="mollifier JSON file")
    p.add_argument("--box", default="[-1,1]")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("classify", help="moderate/negligible classification")
    p.add_argument("--net", required=True)
    p.add_argument("--box", default="[-1,1]")
    p.add_argument("--alpha-max", type=int, default=3)
    p.add_argument("--m-max", type=int, default=8)
    p.add_argument("--mode", choices=("moderate", "negligible", "both"),
                   default="moderate")
    p.add_argument("--eps-grid", default="default")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("associate", help="weak-limit association")
    p.add_argument("--net", required=True)
    p.add_argument("--battery", help="battery JSON file")
    p.add_argument("--candidate", help="candidate DistributionSpec JSON")
    p.add_argument("--eps-grid", default="default")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_associate)

    p = sub.add_parser("verify-testobject",
                       help="smoothing-operator conditions (i)-(iii)")
    p.add_argument("--mollifier", help="mollifier JSON file")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--eps-power", type=int, default=0)
    p.add_argument("--eps-grid", default="default")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_verify_testobject)

    p = sub.add_parser("geodesic", help="per-eps geodesics of the "
                       "regularized impulsive metric")
    p.add_argument("--profile", required=True)
    p.add_argument("--mollifier", help="mollifier JSON file")
    p.add_argument("--init", help="init JSON file "
                   "(u0, v0, x0, y0, vdot0, xdot0, ydot0)")
    p.add_argument("--eps-grid", default="default")
    p.add_argument("--u-max", type=float, default=10.0)
    p.add_argument("--out", required=True, help="trajectory CSV path")
    _add_common(p)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("curvature", help="exact curvature of the "
                       "regularized metric")
    p.add_argument("--profile", required=True)
    p.add_argument("--mollifier", help="mollifier JSON file")
    p.add_argument("--associate", action="store_true",
                   help="associate Ricci_uu with c*Delta f*delta(u)")
    p.add_argument("--points", default="1,0",
                   help="semicolon-separated x,y evaluation points")
    p.add_argument("--check-identities", action="store_true")
    p.add_argument("--eps-grid", default="default")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("gtcheck", help="Geroch-Traschen regularity check")
    p.add_argument("--metric", choices=("impulsive", "kink", "flat"),
                   default="impulsive")
    p.add_argument("--profile", default="x^2-y^2")
    p.add_argument("--mollifier", help="mollifier JSON file")
    p.add_argument("--box", default=None)
    p.add_argument("--eps-grid", default="default")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_gtcheck)

    return parser


def config_to_argv(config_path):
    cfg = load_json(config_path)
    argv = []
    for key, value in cfg.items():
        if key == "command":
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if key == "figures":
                if not value:
                    argv.append("--no-figures")
            elif value:
                argv.append(flag)
        else:
            argv.extend([flag, str(value)])
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # a --config file supplies defaults; explicit flags override them
    if "--config" in argv:
        idx = argv.index("--config")
        cfg_path = argv[idx + 1]
        cfg = load_json(cfg_path)
        command = argv[0] if argv and not argv[0].startswith("-") else \
            cfg.get("command")
        if command is None:
            print("error: --config without a command", file=sys.stderr)
            return EXIT_ERROR
        rest = argv[1:] if argv and not argv[0].startswith("-") else argv
        argv = [command] + config_to_argv(cfg_path) + rest
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code not in (0, None) else 0
    if args.threads is None:
        args.threads = int(os.environ.get("GENCALC_THREADS", "1"))
    try:
        return args.func(args)
    except (ArgumentError, FileNotFoundError, json.JSONDecodeError,
            ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
