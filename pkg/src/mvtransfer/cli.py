"""Command line interface.

    mvtransfer validate FILE [--tol X]
    mvtransfer harmonic FILE [--degree K] [--tol X]
    mvtransfer analyze {star,cascade,solenoid,martingale} FILE [flags]

FILE is a path or a bundled name (haar, stretched_haar, diag_haar_one,
random_qmf_d2).  Reports go to --out (default ./out).  Exit codes: 0 success,
1 validation or analysis failure, 2 unreadable or malformed input.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import cascade, harmonic_algebra, solenoid
from .filters import FilterFileError, load_filter
from .transfer import (
    InvarianceError,
    e1_spectral_projection,
    el_condition,
    fixed_space,
    invariance_bound,
    lawton_verdict,
    transition_matrix,
)
from .trigmat import midpoint_grid

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TOOL_THREADS", "1")))
    except ValueError:
        return 1


def _c(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _mat(a) -> list:
    a = np.asarray(a)
    if a.ndim == 0:
        return _c(a)
    return [_mat(r) for r in a]


def _poly(p) -> list:
    return [{"k": int(k), "matrix": _mat(c)} for k, c in p.items() if np.any(c != 0)]


def _write_json(out: Path, name: str, data) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    return path


def _el_dict(rep) -> dict:
    return {
        "eigenvalues": [_c(e) for e in rep.eigenvalues],
        "l": rep.l,
        "satisfied": rep.satisfied,
        "e1_basis": [_mat(v) for v in rep.e1_basis],
    }


# commands ----------------------------------------------------------------------


def cmd_validate(args) -> int:
    ff = load_filter(args.file)
    m = ff.filter()
    dets = np.linalg.det(m.poly.eval_many(midpoint_grid(args.grid)))
    ok = m.qmf_residual <= args.tol
    report = {
        "name": ff.name,
        "N": ff.N,
        "d": ff.d,
        "qmf_residual": m.qmf_residual,
        "tol": args.tol,
        "qmf_ok": ok,
        "el_condition": _el_dict(el_condition(m)),
        "min_abs_det": float(np.min(np.abs(dets))),
    }
    _write_json(Path(args.out), "validate.json", report)
    print(json.dumps(report))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_harmonic(args) -> int:
    ff = load_filter(args.file)
    m = ff.filter()
    kmin = invariance_bound(m)
    K = kmin if args.degree is None else args.degree
    try:
        tm = transition_matrix(m, K, args.tol)
    except InvarianceError as e:
        print(f"error: {e}; minimal admissible degree is {e.minimal}", file=sys.stderr)
        return EXIT_FAIL
    dims = {str(k): len(fixed_space(m, k, args.tol)) for k in range(kmin, K + 1)}
    basis = fixed_space(m, K, args.tol)
    verdict = lawton_verdict(basis, ff.d)
    report = {
        "name": ff.name,
        "degree": K,
        "invariance_bound": kmin,
        "dimension": len(basis),
        "dimension_by_degree": dims,
        "peripheral_eigenvalues": [_c(e) for e in tm.peripheral()],
        "basis": [
            {
                "coeffs": _poly(el.poly),
                "residual": el.residual,
                "hermitian": el.hermitian,
                "positivity_floor": el.positivity_floor,
            }
            for el in basis
        ],
        "verdict": verdict,
    }
    _write_json(Path(args.out), "harmonic.json", report)
    print(f"dimension {len(basis)} at degree {K}")
    if verdict is not None:
        print(f"verdict: {verdict}")
    return EXIT_OK


def _analyze_star(args, ff, m, out: Path) -> int:
    h = ff.harmonic(args.h)
    basis = [el.poly for el in fixed_space(m, args.degree)]
    tab = harmonic_algebra.orthogonality_table(m, basis, h, depth=args.depth, grid_size=args.grid, tol=args.tol)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "star_table.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("i,j,norm,sup_increment,depth_used,converged,residual\n")
        for i, row in enumerate(tab.products):
            for j, r in enumerate(row):
                fh.write(
                    f"{i},{j},{tab.norms[i, j]:.17g},{r.sup_increment:.17g},{r.depth_used},"
                    f"{int(r.converged)},{r.residual:.17g}\n"
                )
    report = {
        "name": ff.name,
        "unit": _poly(h),
        "basis": [_poly(b) for b in basis],
        "diagonal_deviation": [float(v) for v in tab.diagonal_deviation],
        "off_diagonal_max": tab.off_diagonal_max,
        "depth": args.depth,
        "grid": args.grid,
    }
    _write_json(out, "star.json", report)
    print(f"star table {len(basis)}x{len(basis)} written")
    return EXIT_OK


def _analyze_cascade(args, ff, m, out: Path) -> int:
    el = el_condition(m)
    if not el.satisfied:
        print("error: filter does not satisfy the E(l) condition", file=sys.stderr)
        return EXIT_FAIL
    out.mkdir(parents=True, exist_ok=True)
    P = cascade.product_grid(m, args.scale, args.range)
    P.to_csv(out / "product.csv")
    P0 = P.at(0)
    proj = e1_spectral_projection(m)
    report = {
        "name": ff.name,
        "scale": args.scale,
        "range": args.range,
        "lattice": args.lattice,
        "P0": _mat(P0),
        "P0_idempotency": float(np.linalg.norm(P0 @ P0 - P0, 2)),
        "P0_vs_spectral_projection": float(np.linalg.norm(P0 - proj, 2)),
        "product_refinement_residual": cascade.refinement_residual(m, P),
        "scaling_functions": [],
    }
    for j, v in enumerate(el.e1_basis):
        phi = cascade.scaling_function_grid(m, v, args.scale, args.range)
        phi.to_csv(out / f"phi_{j}.csv")
        hfun = cascade.correlation_callable(m, v, args.lattice)
        hs = args.scale if args.scale <= 8 else 8
        xs = np.arange(-(m.dilation**hs), m.dilation**hs + 1) / m.dilation**hs
        hg = cascade.GridFunction(m.dilation, hs, 1, hfun(xs), "matrix")
        hg.to_csv(out / f"correlation_{j}.csv")
        report["scaling_functions"].append(
            {
                "v": _mat(v),
                "refinement_residual": cascade.refinement_residual(m, phi),
                "correlation_harmonic_residual": cascade.verify_harmonic_grid(
                    m, hfun, args.grid, 1, workers=_threads()
                ),
            }
        )
    _write_json(out, "cascade.json", report)
    print(f"cascade grids written to {out}")
    return EXIT_OK


def _parse_word(text: str, N: int) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    digits = tuple(int(t) for t in text.replace(",", " ").split())
    if any(not 0 <= w < N for w in digits):
        raise ValueError(f"word digits must lie in 0..{N - 1}")
    return digits


def _analyze_solenoid(args, ff, m, out: Path) -> int:
    if not el_condition(m).satisfied:
        print("error: filter does not satisfy the E(l) condition", file=sys.stderr)
        return EXIT_FAIL
    h = ff.harmonic(args.h)
    w = solenoid.make_word(m, args.x, _parse_word(args.word, m.dilation))
    cyl = solenoid.cylinder_measure(m, h, w)
    kids = [solenoid.cylinder_measure(m, h, solenoid.extend_word(w, i, m)) for i in range(m.dilation)]
    truncs = sorted({t for t in (10, 100, 1000) if t < args.truncation} | {args.truncation})
    atoms = [(t, solenoid.atoms_vs_cylinder(m, h, w, t)) for t in truncs]
    report = {
        "name": ff.name,
        "x": args.x,
        "digits": list(w.digits),
        "anchors": list(w.anchors),
        "cocycle": _mat(w.cocycle),
        "cylinder_mass": _mat(cyl.mass),
        "trace": cyl.trace,
        "unit_harmonic": cyl.harmonic,
        "children_trace_sum": sum(c.trace for c in kids),
        "atoms": [{"truncation": t, "atom_sum": _mat(r.atom_sum), "gap": r.gap} for t, r in atoms],
        "gap": atoms[-1][1].gap,
    }
    _write_json(out, "solenoid.json", report)
    print(f"gap {report['gap']:.3g} at truncation {args.truncation}")
    return EXIT_OK


def _analyze_martingale(args, ff, m, out: Path) -> int:
    h = ff.harmonic(args.h)
    h0 = ff.harmonic(args.h0) if args.h0 else h
    paths = []
    finals = []
    for p in range(args.paths):
        if args.sampling == "uniform":
            w, fb = solenoid.uniform_word(m, args.x, args.depth, args.seed, p), False
        else:
            sp = solenoid.sample_path(m, h, args.x, args.depth, args.seed, p)
            w, fb = sp.word, sp.fallback
        rec = {"path": p, "digits": list(w.digits), "fallback": fb}
        try:
            tr = solenoid.martingale_trace(m, h, h0, w)
        except solenoid.PathOutsideSupport as e:
            rec["outside_support"] = str(e)
            paths.append(rec)
            continue
        rec["entry_00"] = [float(v[0, 0].real) for v in tr.values]
        rec["trace"] = [float(np.trace(v).real) for v in tr.values]
        rec["smallest_singular"] = list(tr.smallest_singular)
        rec["final"] = _mat(tr.values[-1])
        finals.append(tr.values[-1][0, 0].real)
        paths.append(rec)
    below = sum(1 for v in finals if v < args.threshold)
    report = {
        "name": ff.name,
        "x": args.x,
        "depth": args.depth,
        "paths": args.paths,
        "seed": args.seed,
        "sampling": args.sampling,
        "rng": "PCG64, SeedSequence(seed, spawn_key=(path,))",
        "threshold": args.threshold,
        "fraction_entry_00_below": below / args.paths if args.paths else 0.0,
        "records": paths,
    }
    _write_json(out, "martingale.json", report)
    print(f"{below}/{args.paths} paths with entry (0,0) below {args.threshold:g}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    ff = load_filter(args.file)
    m = ff.filter()
    out = Path(args.out)
    run = {
        "star": _analyze_star,
        "cascade": _analyze_cascade,
        "solenoid": _analyze_solenoid,
        "martingale": _analyze_martingale,
    }[args.sub]
    try:
        return run(args, ff, m, out)
    except harmonic_algebra.UnitNotBoundedBelow as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    except cascade.LowPassError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


# parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvtransfer", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file", help="filter file or bundled name")
        p.add_argument("--out", default="out", help="report directory (default ./out)")

    p = sub.add_parser("validate", help="QMF residual and E(l) report")
    common(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--grid", type=int, default=256)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("harmonic", help="fixed space of the transfer operator")
    common(p)
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_harmonic)

    p = sub.add_parser("analyze", help="star products, cascade, solenoid, martingales")
    p.add_argument("sub", choices=["star", "cascade", "solenoid", "martingale"])
    common(p)
    p.add_argument("--h", default=None, help="harmonic unit by name (default: unit, else identity)")
    p.add_argument("--h0", default=None, help="numerator harmonic for martingales (default: the unit)")
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--scale", type=int, default=6)
    p.add_argument("--range", type=int, default=4)
    p.add_argument("--lattice", type=int, default=200)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--word", default="")
    p.add_argument("--truncation", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=200)
    p.add_argument("--sampling", choices=["uniform", "measure"], default="uniform")
    p.add_argument("--threshold", type=float, default=1e-2)
    p.set_defaults(func=cmd_analyze)
    return ap


_DEFAULTS = {"star": (14, 256), "cascade": (None, 16), "solenoid": (None, None), "martingale": (30, None)}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "analyze":
        depth, grid = _DEFAULTS[args.sub]
        if args.depth is None:
            args.depth = depth
        if args.grid is None:
            args.grid = grid
    try:
        return args.func(args)
    except (FilterFileError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
