"""Command-line front end: perturb, optimize, evaluate and export pose graphs."""

import argparse
import logging
import sys
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import chordal, dq, graphio, metrics, synth
from .graph import InvalidGraphError
from .linalg import SingularSystemError
from .optimizer import LinearSolveError, SolverConfig, optimize, total_cost

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3


class CliError(Exception):
    pass


def _load(path, fmt):
    path = Path(path)
    if not path.is_file():
        raise CliError(f"no such file: {path}")
    try:
        return graphio.load_graph(path, fmt)
    except (OSError, ValueError) as err:
        raise CliError(f"{path}: {err}") from None


def _noise_spec(values, seed):
    try:
        return synth.NoiseSpec(synth.sigma_from_values(values), seed)
    except ValueError as err:
        raise CliError(f"--sigma: {err}") from None


def _format_sigma(sigma):
    return "\n".join("  " + " ".join(f"{v:.6g}" for v in row) for row in sigma)


def _initial_guess(g, mode, anchor):
    if mode == "odometry":
        return chordal.odometry_initialize(g, anchor)
    if mode == "chordal":
        return chordal.initialize(g, anchor)
    return g


def _metric_rows(estimate, truth=None, sequential_only=False):
    rows = []
    if truth is not None:
        r = metrics.rpe(estimate, truth, sequential_only)
        rows += [("e_t", r.e_t), ("e_r", r.e_r)]
    rows += [("cost", total_cost(estimate)), ("g2o_cost", metrics.g2o_cost(estimate))]
    return rows


def _metrics_csv(rows):
    return "metric,value\n" + "".join(f"{k},{v:.17g}\n" for k, v in rows)


def _metrics_table(rows):
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v:.6e}" for k, v in rows) + "\n"


def cmd_optimize(args):
    if args.fixed_iters is not None and args.fixed_iters < 1:
        raise CliError("--fixed-iters must be at least 1")
    g = _load(args.input, args.format)
    truth = _load(args.truth, args.format) if args.truth else None
    if args.info == "identity":
        g = g.with_identity_information()
    if args.sigma:
        g = synth.perturb(g, _noise_spec(args.sigma, args.seed), args.sequential_only)
    try:
        cfg = SolverConfig(
            max_iterations=args.max_iters,
            gradient_tolerance=args.grad_tol,
            fixed_iterations=args.fixed_iters,
            anchor_node=args.anchor,
            damping=args.damping,
        )
    except ValueError as err:
        raise CliError(str(err)) from None
    if not 0 <= args.anchor < g.num_nodes:
        raise CliError(f"--anchor {args.anchor} out of range for {g.num_nodes} nodes")

    stem = Path(args.input).name.split(".")[0]
    output = Path(args.output or f"{stem}.opt.g2o")
    report_path = Path(args.report or f"{stem}.report.csv")

    g0 = _initial_guess(g, args.init, args.anchor)
    status = EXIT_OK
    try:
        result, report = optimize(g0, cfg)
    except LinearSolveError as err:
        print(f"error: {err}", file=sys.stderr)
        result, report = err.graph, err.report
        status = EXIT_SOLVER
    report_path.write_text(report.to_csv())
    if status != EXIT_OK:
        return status
    graphio.save_graph(result, output)
    line = f"final_cost={total_cost(result):.17g} g2o_cost={metrics.g2o_cost(result):.17g}"
    if truth is not None:
        r = metrics.rpe(result, truth, args.sequential_only)
        line += f" e_t={r.e_t:.17g} e_r={r.e_r:.17g}"
    print(line)
    print(f"termination={report.termination} iterations={len(report.records)}")
    return EXIT_OK


def cmd_perturb(args):
    spec = _noise_spec(args.sigma, args.seed)
    g = _load(args.input, args.format)
    out = synth.perturb(g, spec, args.sequential_only)
    graphio.save_graph(out, args.output)
    print(f"applied sigma (seed {args.seed}):")
    print(_format_sigma(spec.sigma))
    return EXIT_OK


def cmd_eval(args):
    est = _load(args.estimate, args.format)
    truth = _load(args.truth, args.format)
    if est.num_nodes != truth.num_nodes:
        raise CliError(
            f"graphs do not match: {est.num_nodes} vs {truth.num_nodes} nodes"
        )
    rows = _metric_rows(est, truth, args.sequential_only)
    print(_metrics_table(rows), end="")
    print()
    print(_metrics_csv(rows), end="")
    if args.csv:
        Path(args.csv).write_text(_metrics_csv(rows))
    return EXIT_OK


def trajectory_csv(g):
    xyt = dq.to_xyt(g.nodes)
    lines = ["id,x,y,theta"]
    lines += [f"{vid},{p[0]:.17g},{p[1]:.17g},{p[2]:.17g}" for vid, p in zip(g.ids, xyt)]
    return "\n".join(lines) + "\n"


def trajectory_svg(g, size=800.0):
    """Node positions as a polyline; non-sequential edges drawn as a second stroke."""
    _, t = dq.to_pose(g.nodes)
    lo, hi = t.min(axis=0), t.max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-9)
    margin = 0.05 * size
    scale = (size - 2 * margin) / span

    def xy(p):
        return margin + scale * (p[0] - lo[0]), size - margin - scale * (p[1] - lo[1])

    pts = " ".join("{:.3f},{:.3f}".format(*xy(p)) for p in t)
    closures = []
    for i, j in zip(g.edge_i, g.edge_j):
        if abs(i - j) != 1:
            (x1, y1), (x2, y2) = xy(t[i]), xy(t[j])
            closures.append(f"M{x1:.3f},{y1:.3f}L{x2:.3f},{y2:.3f}")
    title = escape(f"{g.num_nodes} poses, {g.num_edges} edges")
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size:g}" '
        f'height="{size:g}" viewBox="0 0 {size:g} {size:g}">\n'
        f"<title>{title}</title>\n"
        f'<path d="{" ".join(closures)}" fill="none" stroke="#d62728" '
        'stroke-width="0.5" stroke-opacity="0.6"/>\n'
        f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1"/>\n'
        "</svg>\n"
    )


def cmd_export_traj(args):
    g = _load(args.graph, args.format)
    kind = args.to or ("svg" if str(args.output).lower().endswith(".svg") else "csv")
    text = trajectory_svg(g) if kind == "svg" else trajectory_csv(g)
    Path(args.output).write_text(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dqpgo", description="Planar pose-graph optimization on dual quaternions."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver iterations")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument(
            "--format", choices=["auto", "g2o", "toro"], default="auto",
            help="input format (default: detect from record tags)",
        )

    def noise(p, required):
        p.add_argument(
            "--sigma", nargs="+", metavar="S", required=required,
            help="noise covariance over [theta, x, y]: 9 row-major or 6 upper-triangle numbers",
        )
        p.add_argument("--seed", type=int, default=0, help="noise generator seed (default 0)")
        p.add_argument(
            "--sequential-only", action="store_true",
            help="restrict noise and RPE to edges between consecutive nodes",
        )

    p = sub.add_parser("optimize", help="optimize a pose graph")
    p.add_argument("--input", required=True, help="input graph file")
    common(p)
    p.add_argument("--output", help="optimized graph, g2o format (default: <stem>.opt.g2o)")
    p.add_argument("--report", help="per-iteration CSV (default: <stem>.report.csv)")
    p.add_argument("--fixed-iters", type=int, help="run exactly this many iterations")
    p.add_argument("--grad-tol", type=float, default=1e-6, help="gradient-norm tolerance")
    p.add_argument("--max-iters", type=int, default=100, help="iteration cap")
    p.add_argument("--anchor", type=int, default=0, help="index of the fixed node")
    p.add_argument("--damping", type=float, default=0.0, help="diagonal damping")
    p.add_argument(
        "--init", choices=["odometry", "chordal", "as-given"], default="as-given",
        help="initial poses (default: as given in the file)",
    )
    p.add_argument(
        "--info", choices=["identity", "file"], default="file",
        help="information matrices from the file or identity",
    )
    noise(p, required=False)
    p.add_argument("--truth", help="ground-truth graph for RPE")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("perturb", help="add synthetic odometry noise")
    p.add_argument("--input", required=True, help="input graph file")
    p.add_argument("--output", required=True, help="noisy graph, g2o format")
    common(p)
    noise(p, required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("eval", help="RPE and costs of an estimate against ground truth")
    p.add_argument("estimate", help="estimated graph")
    p.add_argument("truth", help="ground-truth graph")
    common(p)
    p.add_argument("--csv", help="also write metric,value rows to this file")
    p.add_argument(
        "--sequential-only", action="store_true", help="RPE over consecutive nodes only"
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-traj", help="write node positions as CSV or SVG")
    p.add_argument("graph", help="graph file")
    p.add_argument("output", help="output path")
    common(p)
    p.add_argument(
        "--to", choices=["csv", "svg"], help="output kind (default: from the file extension)"
    )
    p.set_defaults(func=cmd_export_traj)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularSystemError, InvalidGraphError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
