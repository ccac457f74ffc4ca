"""Command-line front end: body files in, tables, plots and reports out.

Every subcommand writes ``results.csv`` (first line ``# schema,<name>/v<k>``)
and ``report.txt`` (JSON) into ``--out``; sweeps also write ``plot.svg``.
Exit status: 0 success, 2 bad arguments, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bodies import NonSmoothError, WulffError, circle_directions, load_body, lp_combination, save_body
from .harmonics import HarmonicExpansion, harmonic_labels
from .sphere import build_grid

SCHEMAS = {
    "volumes": ("volumes/v1", ["body", "j", "V_j", "method", "error"]),
    "lp-sum": ("lp-sum/v1", None),
    "check-lpbm": ("lpbm-verdicts/v1", ["n", "j", "p", "lambda", "lhs", "rhs_geo", "rhs_p", "margin_geo", "margin_p", "holds"]),
    "counterexample": ("counterexample-scan/v1", ["s", "lhs", "rhs_geo", "margin"]),
    "spectrum": ("spectrum/v1", ["quantity", "index", "value"]),
    "second-derivative": ("second-derivative/v1", ["sample", "p", "fd", "spectral", "discrepancy"]),
    "solve-cm": ("solve-cm/v1", ["iteration", "residual", "min_curvature"]),
    "ivaki-milman": ("ivaki-milman/v1", ["p", "c", "lhs", "rhs", "holds"]),
    "steiner-check": ("steiner/v1", ["rho", "direct", "steiner", "relative_residual"]),
}


class NumericalAbort(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


# -- output helpers ------------------------------------------------------------------


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def write_table(out: Path, command: str, rows, header=None):
    schema, default = SCHEMAS[command]
    header = header or default
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["# schema", schema])
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    (out / "results.csv").write_text(buf.getvalue(), encoding="utf-8")


def write_report(out: Path, report: dict):
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    (out / "report.txt").write_text(text + "\n", encoding="utf-8")


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)


def write_plot(out: Path, x, ys: dict, xlabel: str, ylabel: str, logx=False, logy=False):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "convexlp"
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in ys.items():
        ax.plot(x, y, marker="o", markersize=3, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(ys) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(out / "plot.svg", format="svg", metadata={"Date": None})
    plt.close(fig)


# -- argument types ---------------------------------------------------------------------


def existing_file(text: str) -> Path:
    path = Path(text)
    if not path.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return path


def float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def unit_interval_open(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def resolution_type(text: str) -> int:
    v = int(text)
    if v < 4:
        raise argparse.ArgumentTypeError("resolution must be >= 4")
    return v


def load_field(spec: str, n: int):
    """``constant:VALUE`` or a JSON file with a harmonic field (``coefficients`` triples)."""
    if spec.startswith("constant:"):
        return float(spec.split(":", 1)[1])
    path = Path(spec)
    if not path.is_file():
        raise argparse.ArgumentTypeError(f"no such field file: {spec}")
    d = json.loads(path.read_text(encoding="utf-8"))
    if d.get("kind") == "constant":
        return float(d["value"])
    return HarmonicExpansion.from_triples(int(d.get("n", n)), d["coefficients"], d.get("max_degree"))


# -- subcommands ----------------------------------------------------------------------------


def cmd_volumes(args, out):
    from .volumes import volume_report

    K = load_body(args.body)
    rep = volume_report(K, Path(args.body).stem, args.method, args.resolution, args.seed, args.samples)
    write_table(out, "volumes", [[rep.body_id, j, v, m, e] for j, v, m, e in rep.entries])
    write_report(out, {"command": "volumes", "body": rep.body_id, "volumes": {str(j): v for j, v, _, _ in rep.entries}})


def cmd_lp_sum(args, out):
    K, L = load_body(args.left), load_body(args.right)
    comb = lp_combination(K, L, args.p, args.lam, wulff_samples=args.samples)
    D = circle_directions(args.directions) if K.n == 2 else build_grid(K.n, args.resolution).nodes
    hK, hL, hC = K.support(D), L.support(D), comb.support(D)
    rows = [list(u) + [a, b, c] for u, a, b, c in zip(D, hK, hL, hC)]
    header = [f"u{i}" for i in range(K.n)] + ["h_left", "h_right", "h_combination"]
    write_table(out, "lp-sum", rows, header)
    try:
        save_body(comb, out / "combination.json")
    except TypeError:
        pass
    write_report(out, {"command": "lp-sum", "p": args.p, "lambda": args.lam, "kind": type(comb).__name__})


def cmd_check_lpbm(args, out):
    from .lpbm import check_lpbm, reverse_j1_check

    K, L = load_body(args.left), load_body(args.right)
    grid = build_grid(K.n, args.resolution) if K.n > 2 else None
    rows, verdicts = [], []
    for p in args.p:
        for lam in args.lam:
            if K.n == 2 and args.j == 1:
                v = reverse_j1_check(K, L, p, lam)
            else:
                v = check_lpbm(K, L, p, lam, args.j, grid)
            verdicts.append(v)
            rows.append(v.row() + [v.holds])
    write_table(out, "check-lpbm", rows)
    write_report(out, {"command": "check-lpbm", "all_hold": all(v.holds for v in verdicts), "count": len(verdicts)})


def cmd_counterexample(args, out):
    from .lpbm import CounterexampleSearchError, construct_counterexample

    try:
        res = construct_counterexample(args.n, args.j, args.p, args.lam, min_margin=args.min_margin, s_cap=args.s_cap)
    except CounterexampleSearchError as exc:
        raise NumericalAbort(str(exc), {"command": "counterexample", "p": args.p, "lambda": args.lam}) from exc
    rows = [r for r in res.scan if r[0] > 0]
    write_table(out, "counterexample", rows)
    s = np.array([r[0] for r in rows])
    write_plot(out, s, {"margin": np.array([r[3] for r in rows])}, "s", "relative margin", logx=True)
    v = res.verdict
    write_report(out, {
        "command": "counterexample", "n": args.n, "j": args.j, "p": args.p, "lambda": args.lam,
        "s": res.s, "crossover": res.crossover, "lhs": v.lhs, "rhs_geo": v.rhs_geo, "rhs_p": v.rhs_p,
        "margin_geo": v.margin_geo, "power_mean_ordered": v.power_mean_ordered,
    })


def cmd_spectrum(args, out):
    from .spectral import assemble_T, lambda_1e

    K = load_body(args.body)
    problem = assemble_T(K, args.j, build_grid(K.n, args.resolution), args.degree)
    vals = problem.eigenvalues()
    lam1 = lambda_1e(problem)
    threshold = (args.j - args.p) / (args.j - 1)
    rows = [["eigenvalue", i, v] for i, v in enumerate(vals[:10])]
    rows += [["lambda_1e", 0, lam1], ["threshold", 0, threshold], ["gap_exceeds_threshold", 0, float(lam1 > threshold)]]
    write_table(out, "spectrum", rows)
    write_report(out, {"command": "spectrum", "lambda_1e": lam1, "threshold": threshold, "exceeds": bool(lam1 > threshold),
                       "asymmetry": problem.asymmetry})


def _random_even_field(rng, n, degree):
    labels = harmonic_labels(n, degree)
    return HarmonicExpansion(n, degree, rng.standard_normal(len(labels)) / math.sqrt(len(labels)))


def cmd_second_derivative(args, out):
    from .spectral import second_derivative_identity_check

    K = load_body(args.body)
    grid = build_grid(K.n, args.resolution)
    rng = np.random.default_rng(args.seed)
    rows = []
    for k in range(args.samples):
        z = _random_even_field(rng, K.n, args.z_degree)
        for p in args.p:
            fd, spec, disc = second_derivative_identity_check(K, args.j, p, z, grid, args.degree)
            rows.append([k, p, fd, spec, disc])
    write_table(out, "second-derivative", rows)
    write_report(out, {"command": "second-derivative", "max_discrepancy": max(r[4] for r in rows)})


def cmd_solve_cm(args, out):
    from .cmsolver import CMProblem, bound_monitor, fine_residual, newton_solve, uniqueness_probe

    g = load_field(args.g, args.n)
    problem = CMProblem(args.n, args.j, args.p, g, args.resolution, args.degree, allow_excluded=args.allow_excluded)
    rep = newton_solve(problem, tol=args.tol, max_iter=args.max_iter)
    summary = rep.summary()
    summary.update({"command": "solve-cm", "n": args.n, "j": args.j, "p": args.p, "holder_distance": problem.holder_norm})
    rows = [[i, r, c] for i, (r, c) in enumerate(zip(rep.residuals, rep.convexity))]
    write_table(out, "solve-cm", rows)
    it = np.arange(len(rep.residuals))
    write_plot(out, it, {"residual": np.maximum(np.asarray(rep.residuals), 1e-17)}, "iteration", "sup residual", logy=True)
    if not rep.converged:
        write_report(out, summary)
        raise NumericalAbort(f"solver stopped: {rep.status} {rep.message}".strip(), summary)
    summary["fine_residual"] = fine_residual(problem, rep)
    summary["bounds"] = dict(zip(["min_h", "max_h", "lipschitz"], bound_monitor(rep)))
    if args.probes:
        probe = uniqueness_probe(problem, rep, args.probes, args.spread, args.seed)
        summary["uniqueness"] = {"verdict": probe.verdict, "deviations": list(probe.deviations)}
    write_report(out, summary)


def cmd_ivaki_milman(args, out):
    from .spectral import ivaki_milman_check

    K = load_body(args.body)
    grid = build_grid(K.n, args.resolution)
    rows = []
    for p in args.p:
        for c in args.c:
            v = ivaki_milman_check(K, args.j, p, c, grid)
            rows.append([p, c, v.lhs, v.rhs, v.holds])
    write_table(out, "ivaki-milman", rows)
    write_report(out, {"command": "ivaki-milman", "all_hold": all(r[4] for r in rows)})


def cmd_steiner(args, out):
    from .volumes import intrinsic_volume, parallel_volume, steiner_polynomial

    K = load_body(args.body)
    grid = build_grid(K.n, args.resolution)
    vols = [1.0] + [intrinsic_volume(K, j, grid)[0] for j in range(1, K.n + 1)]
    rows = []
    for rho in args.rho:
        direct = parallel_volume(K, rho, grid)
        poly = steiner_polynomial(vols, K.n, rho)
        rows.append([rho, direct, poly, abs(direct - poly) / abs(direct)])
    write_table(out, "steiner-check", rows)
    if len(rows) > 1:
        write_plot(out, [r[0] for r in rows], {"direct": [r[1] for r in rows], "Steiner": [r[2] for r in rows]},
                   "rho", "volume of parallel body")
    write_report(out, {"command": "steiner-check", "max_residual": max(r[3] for r in rows)})


# -- parser -----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convexlp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.set_defaults(func=func)
        return sp

    sp = add("volumes", cmd_volumes, "intrinsic volumes of a body")
    sp.add_argument("body", type=existing_file)
    sp.add_argument("--method", default="auto",
                    choices=["auto", "surface-integral", "exact-2D", "product-formula", "monte-carlo-oracle"])
    sp.add_argument("--resolution", type=resolution_type, default=24)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--samples", type=int, default=2000)

    sp = add("lp-sum", cmd_lp_sum, "L_p combination of two bodies")
    sp.add_argument("left", type=existing_file)
    sp.add_argument("right", type=existing_file)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--lam", type=unit_interval_open, required=True)
    sp.add_argument("--samples", type=int, default=2048, help="Wulff directions (planar)")
    sp.add_argument("--directions", type=int, default=360, help="output directions (planar)")
    sp.add_argument("--resolution", type=resolution_type, default=8)

    sp = add("check-lpbm", cmd_check_lpbm, "L_p-Brunn-Minkowski verdicts")
    sp.add_argument("left", type=existing_file)
    sp.add_argument("right", type=existing_file)
    sp.add_argument("--j", type=int, required=True)
    sp.add_argument("--p", type=float_list, required=True)
    sp.add_argument("--lam", type=float_list, default=[0.25, 0.5, 0.75])
    sp.add_argument("--resolution", type=resolution_type, default=16)

    sp = add("counterexample", cmd_counterexample, "lifted square/disk counterexample")
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--j", type=int, default=2)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--lam", type=unit_interval_open, required=True)
    sp.add_argument("--min-margin", type=float, default=1e-4)
    sp.add_argument("--s-cap", type=float, default=1e6)

    sp = add("spectrum", cmd_spectrum, "even spectrum of T_K^j")
    sp.add_argument("body", type=existing_file)
    sp.add_argument("--j", type=int, default=2)
    sp.add_argument("--p", type=float, default=0.0)
    sp.add_argument("--degree", type=int, default=8)
    sp.add_argument("--resolution", type=resolution_type, default=16)

    sp = add("second-derivative", cmd_second_derivative, "second-variation identity")
    sp.add_argument("body", type=existing_file)
    sp.add_argument("--j", type=int, default=2)
    sp.add_argument("--p", type=float_list, default=[-0.5, 0.5, 0.9])
    sp.add_argument("--samples", type=int, default=3)
    sp.add_argument("--z-degree", type=int, default=4)
    sp.add_argument("--degree", type=int, default=8)
    sp.add_argument("--resolution", type=resolution_type, default=16)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("solve-cm", cmd_solve_cm, "Newton solve of h^{1-p} s_j(h) = g")
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--j", type=int, default=1)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--g", default="constant:1", help="constant:VALUE or a JSON field file")
    sp.add_argument("--resolution", type=resolution_type, default=32)
    sp.add_argument("--degree", type=int, default=20)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-iter", type=int, default=30)
    sp.add_argument("--probes", type=int, default=0)
    sp.add_argument("--spread", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--allow-excluded", action="store_true")

    sp = add("ivaki-milman", cmd_ivaki_milman, "integral inequality for smooth bodies")
    sp.add_argument("body", type=existing_file)
    sp.add_argument("--j", type=int, default=1)
    sp.add_argument("--p", type=float_list, default=[0.0, 0.5])
    sp.add_argument("--c", type=float_list, default=[0.5, 1.0, 2.0])
    sp.add_argument("--resolution", type=resolution_type, default=24)

    sp = add("steiner-check", cmd_steiner, "Steiner polynomial against direct parallel volumes")
    sp.add_argument("body", type=existing_file)
    sp.add_argument("--rho", type=float_list, default=[0.1, 0.5, 1.0])
    sp.add_argument("--resolution", type=resolution_type, default=24)
    return parser


NUMERICAL_ERRORS = (NumericalAbort, WulffError, NonSmoothError, np.linalg.LinAlgError, ValueError, ArithmeticError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "solve-cm" and not args.g.startswith("constant:") and not Path(args.g).is_file():
        parser.error(f"no such field file: {args.g}")
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    from .cmsolver import ExcludedParametersError

    try:
        args.func(args, out)
    except ExcludedParametersError as exc:
        parser.error(str(exc))
    except NUMERICAL_ERRORS as exc:
        report = getattr(exc, "report", {}) or {"command": args.command}
        report["error"] = f"{type(exc).__name__}: {exc}"
        write_report(out, report)
        print(f"convexlp {args.command}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
