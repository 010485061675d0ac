"""Command line interface.

Subcommands: ``stabilize`` (one fixed point, fully described),
``scan`` (sampled grain counts with pattern statistics and log fits),
``spectral`` (exact certificates and root/eigenvalue gates per p),
``avalanche`` (detail of the avalanche triggered by grain k), and
``verify`` (consolidated invariant check for one pile).

Exit codes: 0 success, 2 bad arguments, 3 resource or overflow limits,
4 spectral gate failure, 5 verification violation.

Output is JSON (default) or CSV, written to stdout or ``--output``.
Documents are byte-stable across runs: timing fields are zero unless
``--timing`` is given.  ``KSPM_THREADS`` sets the default worker count
for direct-mode scans.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from math import log2, sqrt

from . import analyzer, dds, spectral
from .errors import CapacityError, KSPMError
from .model import grain_count, heights_from_slopes
from .stabilizer import (
    IncrementalStabilizer,
    holes,
    leftmost_avalanche,
    stabilize,
)

VERSION = "0.1.0"


def _meta(command: str, config: dict) -> dict:
    return {"tool": "kspm", "version": VERSION, "command": command, "config": config}


def _emit(args, text: str) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(args, doc: dict) -> None:
    _emit(args, json.dumps(doc, indent=2) + "\n")


def _kv_csv(args, doc: dict) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["field", "value"])
    for key, value in doc["result"].items():
        if isinstance(value, (list, tuple)):
            value = " ".join(str(v) for v in value)
        w.writerow([key, value])
    _emit(args, buf.getvalue())


def _describe_fixed_point(fp) -> dict:
    strict = analyzer.parse_waves(fp.p, fp.slopes, "strict")
    loose = analyzer.parse_waves(fp.p, fp.slopes, "loose")
    rep = dds.trajectory_report(fp.p, fp.slopes, fp.shot_at(0), fp.n_grains, check=False)
    return {
        "p": fp.p,
        "N": fp.n_grains,
        "strategy": fp.strategy,
        "slopes": list(fp.slopes.slopes),
        "heights": list(heights_from_slopes(fp.slopes).heights),
        "shot": list(fp.shot),
        "w": fp.slopes.support,
        "n_strict": strict.start,
        "n_loose": loose.start,
        "uniform_index": rep.uniform_index,
        "interior_zeros": strict.interior_zero_count,
        "zero_positions": list(strict.zero_positions),
        "ambiguous_count": rep.ambiguous_count,
    }


def cmd_stabilize(args) -> int:
    fp = stabilize(args.p, args.n, strategy=args.strategy, seed=args.seed)
    doc = {
        "meta": _meta(
            "stabilize",
            {
                "p": args.p,
                "n": args.n,
                "strategy": args.strategy,
                "seed": args.seed,
            },
        ),
        "result": _describe_fixed_point(fp),
    }
    if args.format == "json":
        _emit_json(args, doc)
    else:
        _kv_csv(args, doc)
    return 0


_SCAN_COLUMNS = [
    "N",
    "p",
    "w",
    "n_strict",
    "n_loose",
    "uniform_index",
    "interior_zeros",
    "density_column",
    "ambiguous_count",
    "elapsed_us",
]


def _row_dict(row) -> dict:
    return {
        "N": row.n_grains,
        "p": row.p,
        "w": row.width,
        "n_strict": row.n_strict,
        "n_loose": row.n_loose,
        "uniform_index": row.uniform_index,
        "interior_zeros": row.interior_zeros,
        "density_column": row.density_column,
        "ambiguous_count": row.ambiguous_count,
        "elapsed_us": row.elapsed_us,
    }


def _fit_dict(rows, field: str):
    try:
        fit = analyzer.log_fit(rows, field)
    except KSPMError as exc:
        return {"ok": False, "reason": str(exc)}
    return {
        "ok": True,
        "c": fit.c,
        "d": fit.d,
        "max_ratio": fit.max_ratio,
        "points": fit.points,
    }


def cmd_scan(args) -> int:
    targets = list(range(args.stride, args.n_max + 1, args.stride))
    if not targets:
        raise _UsageError("stride produced no sample points")
    rows = analyzer.scan_rows(
        args.p,
        targets,
        incremental=(args.mode == "incremental"),
        timing=args.timing,
        threads=args.threads,
    )
    fits = {
        "n_strict": _fit_dict(rows, "n_strict"),
        "uniform_index": _fit_dict(rows, "uniform_index"),
    }
    if args.mode == "incremental":
        fits["density_column"] = _fit_dict(rows, "density_column")
    config = {
        "p": args.p,
        "n_max": args.n_max,
        "stride": args.stride,
        "mode": args.mode,
        "threads": args.threads,
        "timing": args.timing,
    }
    if args.emit_plot_data:
        _write_plot_data(args.emit_plot_data, rows)
    if args.format == "json":
        doc = {
            "meta": _meta("scan", config),
            "result": {"rows": [_row_dict(r) for r in rows], "fits": fits},
        }
        _emit_json(args, doc)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_SCAN_COLUMNS)
        for r in rows:
            d = _row_dict(r)
            w.writerow(["" if d[c] is None else d[c] for c in _SCAN_COLUMNS])
        for field, fit in fits.items():
            if fit["ok"]:
                buf.write(
                    f"# fit {field}: c={fit['c']!r} d={fit['d']!r}"
                    f" max_ratio={fit['max_ratio']!r} points={fit['points']}\n"
                )
            else:
                buf.write(f"# fit {field}: unavailable ({fit['reason']})\n")
        _emit(args, buf.getvalue())
    return 0


def _write_plot_data(path: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "x", "y"])
        for r in rows:
            if r.n_grains >= 2:
                w.writerow(["n_strict_vs_log2N", repr(log2(r.n_grains)), r.n_strict])
        for r in rows:
            w.writerow(["w_vs_sqrtN", repr(sqrt(r.n_grains)), r.width])


def _spectral_row(p: int, tol: float) -> dict:
    bez = spectral.bezout_witness(p)
    rootset = spectral.roots_R(p)
    eigs = spectral.eigvals_O(p)
    match = spectral.pair_distance(eigs, (0j,) + rootset.roots)
    bound = (p - 1) / p
    charpoly_avg_ok = None
    charpoly_win_ok = None
    if p <= 12:
        want = spectral.RationalPolynomial([-1, 1]) * spectral.poly_R(p)
        charpoly_avg_ok = spectral.averaging_matrix(p).charpoly() == want
    if p <= 8:
        want = (
            spectral.RationalPolynomial([-1, 1])
            * spectral.RationalPolynomial([-1, 1])
            * spectral.poly_R(p)
        )
        charpoly_win_ok = spectral.shot_step_matrix(p).charpoly() == want
    max_residual = max(rootset.residuals, default=0.0)
    ok = (
        bez.ok
        and charpoly_avg_ok is not False
        and charpoly_win_ok is not False
        and max_residual < tol
        and rootset.max_modulus <= bound + 1e-9
        and (rootset.min_separation > 1e-8)
        and match <= 1e-8
    )
    return {
        "p": p,
        "ok": ok,
        "bezout_ok": bez.ok,
        "charpoly_averaging_ok": charpoly_avg_ok,
        "charpoly_window_ok": charpoly_win_ok,
        "root_count": len(rootset.roots),
        "max_root_modulus": rootset.max_modulus,
        "modulus_bound": bound,
        "min_separation": rootset.min_separation,
        "max_residual": max_residual,
        "eig_match_distance": match,
        "spectral_radius": eigs.max_modulus,
        "perturbation_bound": spectral.perturbation_bound(p),
    }


def cmd_spectral(args) -> int:
    rows = [_spectral_row(p, args.tol) for p in range(args.p_min, args.p_max + 1)]
    all_ok = all(r["ok"] for r in rows)
    config = {"p_min": args.p_min, "p_max": args.p_max, "tol": args.tol}
    if args.format == "json":
        doc = {
            "meta": _meta("spectral", config),
            "result": {"ok": all_ok, "rows": rows},
        }
        _emit_json(args, doc)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = list(rows[0].keys())
        w.writerow(cols)
        for r in rows:
            w.writerow(["" if r[c] is None else r[c] for c in cols])
        _emit(args, buf.getvalue())
    if not all_ok:
        bad = next(r["p"] for r in rows if not r["ok"])
        print(f"spectral gate failed at p={bad}", file=sys.stderr)
        return 4
    return 0


def cmd_avalanche(args) -> int:
    inc = IncrementalStabilizer(args.p, expect=args.k)
    inc.advance_to(args.k - 1)
    prev = inc.snapshot()
    av = leftmost_avalanche(prev)
    doc = {
        "meta": _meta("avalanche", {"p": args.p, "k": args.k}),
        "result": {
            "p": args.p,
            "k": av.k,
            "fired": list(av.fired),
            "fired_count": len(av.fired),
            "max_fired": av.max_fired,
            "density_column": av.density_column,
            "holes": list(holes(av.fired)),
        },
    }
    if args.format == "json":
        _emit_json(args, doc)
    else:
        _kv_csv(args, doc)
    return 0


def _verification_checks(p: int, n: int, seed: int) -> list[dict]:
    checks: list[dict] = []

    def add(name: str, ok: bool, detail: str = "") -> None:
        checks.append({"name": name, "ok": bool(ok), "detail": detail})

    direct = stabilize(p, n, "leftmost")
    incremental = stabilize(p, n, "incremental")
    randomized = stabilize(p, n, "random", seed=seed)
    add(
        "strategy_independence",
        direct.slopes == incremental.slopes == randomized.slopes
        and direct.shot == incremental.shot == randomized.shot,
        "fixed point and shot vector agree across leftmost/incremental/random",
    )
    add(
        "grain_conservation",
        grain_count(direct.slopes) == n,
        f"weighted slope mass equals N={n}",
    )
    ok_shot = True
    w = direct.slopes.support
    for i in range(w + p + 1):
        # virtual convention: p columns back from column 0 holds all N grains
        back = n if i == 0 else (0 if i < p else direct.shot_at(i - p))
        b = dds.slope_from_shots(p, back, direct.shot_at(i), direct.shot_at(i + 1))
        if b != direct.slopes[i]:
            ok_shot = False
            break
    add("shot_balance", ok_shot, "slopes match the shot-vector balance at every column")
    recon = dds.reconstruct_fixed_point(
        p, n, direct.shot_at(0), dds.GroundTruthResolver(direct.slopes.slopes)
    )
    add(
        "reconstruction",
        recon.slopes == direct.slopes and recon.shot == direct.shot,
        "window recurrence rebuilds the fixed point from (N, a0)",
    )
    rep = dds.trajectory_report(p, direct.slopes, direct.shot_at(0), n, check=True)
    add(
        "trajectory_invariants",
        not rep.violations,
        "; ".join(rep.violations) or "determinations, commutation and envelopes hold",
    )
    strict = analyzer.parse_waves(p, direct.slopes, "strict")
    add(
        "wave_tail",
        strict.interior_zero_count <= 1,
        f"strict parse from column {strict.start} with "
        f"{strict.interior_zero_count} interior zero(s)",
    )
    sup = analyzer.support_bounds(p, n, direct.slopes.support)
    add("support_bounds", sup.within_bounds, f"w={sup.width} inside exact bounds")
    plateau = analyzer.max_plateau(heights_from_slopes(direct.slopes))
    add("plateau_bound", plateau <= p + 1, f"longest plateau {plateau} <= {p + 1}")
    zrep = spectral.z_trajectory(p, n, direct.slopes, direct.shot_at(0))
    add(
        "centered_recurrence",
        zrep.recurrence_exact and zrep.spread0_identity_ok,
        "exact centered recurrence and initial spread identity",
    )
    return checks


def cmd_verify(args) -> int:
    checks = _verification_checks(args.p, args.n, args.seed)
    ok = all(c["ok"] for c in checks)
    doc = {
        "meta": _meta("verify", {"p": args.p, "n": args.n, "seed": args.seed}),
        "result": {"ok": ok, "checks": checks},
    }
    if args.format == "json":
        _emit_json(args, doc)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "ok", "detail"])
        for c in checks:
            w.writerow([c["name"], c["ok"], c["detail"]])
        _emit(args, buf.getvalue())
    if not ok:
        bad = next(c["name"] for c in checks if not c["ok"])
        print(f"verification violated: {bad}", file=sys.stderr)
        return 5
    return 0


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kspm",
        description="Sandpile fixed points with a tunable kick range: "
        "simulation, exact shot-vector dynamics, spectra and wave patterns.",
    )
    parser.add_argument("--version", action="version", version=f"kspm {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument(
            "--format", choices=("json", "csv"), default="json", help="output format"
        )
        sp.add_argument("--output", help="write to this path instead of stdout")

    sp = sub.add_parser("stabilize", help="stabilize N grains and describe the result")
    sp.add_argument("--p", type=int, required=True, help="kick range parameter (>= 1)")
    sp.add_argument("--n", type=int, required=True, help="number of grains")
    sp.add_argument(
        "--strategy",
        choices=("leftmost", "random", "incremental"),
        default="leftmost",
    )
    sp.add_argument("--seed", type=int, default=0, help="seed for --strategy random")
    common(sp)
    sp.set_defaults(func=cmd_stabilize)

    sp = sub.add_parser("scan", help="sample grain counts and fit growth laws")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n-max", type=int, required=True, help="largest grain count")
    sp.add_argument("--stride", type=int, default=1, help="sample every this many grains")
    sp.add_argument(
        "--mode",
        choices=("incremental", "direct"),
        default="incremental",
        help="shared growing pile vs fresh stabilization per sample",
    )
    sp.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker processes for direct mode (default: KSPM_THREADS or 1)",
    )
    sp.add_argument(
        "--timing",
        action="store_true",
        help="fill elapsed_us with real timings (output no longer byte-stable)",
    )
    sp.add_argument(
        "--emit-plot-data",
        metavar="PATH",
        help="also write series/x/y CSV suitable for plotting",
    )
    common(sp)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("spectral", help="exact certificates and root gates per p")
    sp.add_argument("--p-min", type=int, default=2)
    sp.add_argument("--p-max", type=int, required=True)
    sp.add_argument("--tol", type=float, default=1e-9, help="root residual gate")
    common(sp)
    sp.set_defaults(func=cmd_spectral)

    sp = sub.add_parser("avalanche", help="describe the avalanche of grain k")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--k", type=int, required=True, help="index of the added grain")
    common(sp)
    sp.set_defaults(func=cmd_avalanche)

    sp = sub.add_parser("verify", help="consolidated invariant check for one pile")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0, help="seed for the random strategy leg")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    return parser


def _validate(parser: argparse.ArgumentParser, args) -> None:
    if getattr(args, "p", 1) < 1:
        parser.error("--p must be at least 1")
    if getattr(args, "n", 0) < 0:
        parser.error("--n must be non-negative")
    if getattr(args, "n_max", 1) < 1:
        parser.error("--n-max must be at least 1")
    if getattr(args, "stride", 1) < 1:
        parser.error("--stride must be at least 1")
    if getattr(args, "k", 1) < 1:
        parser.error("--k must be at least 1")
    if getattr(args, "p_min", 2) < 1:
        parser.error("--p-min must be at least 1")
    if getattr(args, "p_max", 2) < getattr(args, "p_min", 2):
        parser.error("--p-max must be at least --p-min")
    if getattr(args, "tol", 1.0) <= 0:
        parser.error("--tol must be positive")
    if args.command == "scan":
        if args.threads is None:
            try:
                args.threads = int(os.environ.get("KSPM_THREADS", "1"))
            except ValueError:
                args.threads = 1
        if args.threads < 1:
            parser.error("--threads must be at least 1")
        if args.stride > args.n_max:
            parser.error("--stride exceeds --n-max; no sample points")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.error(str(exc))
    except (CapacityError, OverflowError, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    except KSPMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
