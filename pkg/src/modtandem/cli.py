"""Command-line entry point.

Four commands share one flag set; each prints a JSON summary to stdout and,
with ``--out``, writes its artifacts there.  Exit codes: 0 success, 2 parse,
3 validation, 4 unsupported regime, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .characteristic import trace_level_curves
from .errors import ModtandemError, ModelError, NumericError, StabilityError
from .exact import compare_grids, simulate_pn, solve_pn, solve_tau_inf
from .harmonic import (
    assemble_haK,
    build_bound_certificate,
    build_h_a0,
    c_star,
    c_star_details,
)
from .model import check_stability, load_model
from .roots import build_root_catalog

EXIT_OK = 0
COMMANDS = ("validate", "analyze", "approximate", "compare")


def _fmt(x) -> str:
    return repr(float(x))


def _config(args) -> dict:
    return {
        "command": args.command,
        "model": str(args.model),
        "K": args.K,
        "R": args.R,
        "n": args.n,
        "tol": args.tol,
        "trunc": args.trunc,
        "seed": args.seed,
        "reps": args.reps,
        "version": __version__,
    }


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, allow_nan=True) + "\n")


def _write_csv(path: Path, config: dict, columns: list[str], rows) -> None:
    with path.open("w") as fh:
        fh.write(f"# modtandem {config['command']}\n")
        fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer)) else _fmt(v))
                              for v in row) + "\n")


def _catalog(params, args):
    return build_root_catalog(params, args.K, args.R)


def cmd_validate(params, args, out):
    report = check_stability(params)
    payload = {"config": _config(args), "model": params.to_dict(), "validation": report.to_dict()}
    if report.ok:
        catalog = _catalog(params, args)
        payload["assumptions"] = catalog.flags
        payload["rho1"] = float(catalog.rho1.beta)
        payload["rho2"] = float(catalog.rho2.beta)
    if out:
        _dump_json(out / "validation.json", payload)
    print(json.dumps(payload, indent=2))
    if not report.structurally_valid:
        raise ModelError("; ".join(report.messages))
    if not report.stable:
        m1, m2 = report.stability_margins
        raise StabilityError(f"unstable model: stability margins ({m1:.6g}, {m2:.6g}) must both be negative")
    return EXIT_OK


def cmd_analyze(params, args, out):
    catalog = _catalog(params, args)
    payload = {"config": _config(args), "model": params.to_dict(), "catalog": catalog.to_dict(params)}
    curves = []
    for branch in range(1, params.num_regimes + 1):
        curves += trace_level_curves(params, branch)
    if out:
        _dump_json(out / "catalog.json", payload)
        _write_csv(out / "level_curves.csv", _config(args), ["branch", "alpha", "beta"], curves)
    summary = {
        "config": _config(args),
        "rho1": float(catalog.rho1.beta),
        "rho2": float(catalog.rho2.beta),
        "alpha_star": [catalog_point["alpha"] for catalog_point in payload["catalog"]["alpha_star"]],
        "harmonic_functions": catalog.num_harmonic_functions(),
        "level_curve_samples": len(curves),
        "flags": catalog.flags,
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _sandwich(params, upper, h_a0, c9, trunc, tol, patch=30):
    """Compare the strip oracle with the certified bounds on a patch."""
    tau = solve_tau_inf(params, trunc, tol, upper_bound=upper)
    u, y2 = np.meshgrid(np.arange(min(patch, trunc)), np.arange(min(patch, trunc)), indexing="ij")
    exact = tau.values[u, y2]
    up = np.real(upper(u + y2, y2))
    a0 = np.real(h_a0(u + y2, y2))
    return {
        "trunc": trunc,
        "iterations": tau.iterations,
        "certificate": tau.certificate,
        "upper_minus_exact_min": float((up - exact).min()),
        "h_a0_minus_exact_min": float((a0 - exact).min()),
        "c9_exact_minus_h_a0_min": float((c9 * exact - a0)[exact > 0].min()),
    }


def cmd_approximate(params, args, out):
    catalog = _catalog(params, args)
    cert, upper = build_bound_certificate(params, catalog)
    h_a0, cert0 = build_h_a0(params, catalog)
    h_complex, h_real = assemble_haK(params, catalog)
    details = c_star_details(h_real)
    payload = {
        "config": _config(args),
        "model": params.to_dict(),
        "c_star": details["c_star"],
        "c_star_complex": c_star(h_complex),
        "c_star_argmax": {"k": details["argmax_k"], "m": details["argmax_m"]},
        "fit": {k: h_complex.meta[k] for k in ("K", "R", "condition", "system_size", "fit_residual", "labels",
                                                 "coefficients")},
        "certificates": {"upper": cert.to_dict(), "h_a0": cert0.to_dict()},
        "sandwich": _sandwich(params, upper, h_a0, cert0.c9, args.trunc, args.tol),
        "approximant": h_complex.to_dict(),
        "upper_bound": upper.to_dict(),
        "h_a0": h_a0.to_dict(),
    }
    if out:
        _dump_json(out / "approximant.json", payload)
    brief = {k: payload[k] for k in ("config", "c_star", "c_star_complex", "certificates", "sandwich")}
    brief["condition"] = h_complex.meta["condition"]
    print(json.dumps(brief, indent=2))
    return EXIT_OK


def cmd_compare(params, args, out):
    if args.n is None:
        raise ModelError("--n is required for compare")
    catalog = _catalog(params, args)
    _, h_real = assemble_haK(params, catalog)
    exact = solve_pn(params, args.n, args.tol)
    cmp = compare_grids(params, catalog, h_real, args.n, exact=exact)
    summary = {"config": _config(args), **cmp.summary, "c_star": c_star(h_real)}
    if args.reps:
        rng_starts = [(args.n // 2, args.n // 5), (1, 1), (args.n // 4, 0)]
        summary["monte_carlo"] = []
        for x in rng_starts:
            est = simulate_pn(params, args.n, x, 0, args.reps, args.seed)
            summary["monte_carlo"].append({"x": list(x), "m": 0, "estimate": est.estimate, "stderr": est.stderr,
                                           "exact": float(exact.values[x[0], x[1], 0]), "excluded": est.excluded})
    if out:
        cfg = _config(args)
        n = args.n
        cells = [(i, j, m) for i in range(n + 1) for j in range(n + 1 - i) for m in range(params.num_regimes)]
        _write_csv(out / "exact.csv", cfg, ["x1", "x2", "m", "value"],
                   ((i, j, m, exact.values[i, j, m]) for i, j, m in cells))
        _write_csv(out / "approx.csv", cfg, ["x1", "x2", "m", "value"],
                   ((i, j, m, cmp.approx[i, j, m]) for i, j, m in cells))
        _write_csv(out / "error.csv", cfg,
                   ["x1", "x2", "m", "approx", "exact", "abs_error", "log_rel_error", "in_layer", "in_alt_region"],
                   ((i, j, m, cmp.approx[i, j, m], cmp.exact[i, j, m], cmp.abs_error[i, j, m],
                     cmp.log_rel_error[i, j, m], int(cmp.layer_mask[i, j]), int(cmp.alt_mask[i, j]))
                    for i, j, m in cells))
        _dump_json(out / "summary.json", summary)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


HANDLERS = {
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "approximate": cmd_approximate,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modtandem", description=__doc__.splitlines()[0])
    ap.add_argument("--model", required=True, type=Path, help="model file (key = value format)")
    ap.add_argument("--command", required=True, choices=COMMANDS)
    ap.add_argument("--K", type=int, default=5, help="circle nodes for boundary fitting (default 5)")
    ap.add_argument("--R", type=float, default=0.7, help="circle radius in (0,1) (default 0.7)")
    ap.add_argument("--n", type=int, default=None, help="exit level for compare")
    ap.add_argument("--tol", type=float, default=1e-12, help="oracle stopping tolerance (default 1e-12)")
    ap.add_argument("--out", type=Path, default=None, help="directory for output files")
    ap.add_argument("--seed", type=int, default=0, help="Monte Carlo seed (default 0)")
    ap.add_argument("--trunc", type=int, default=100, help="strip width for the limit oracle (default 100)")
    ap.add_argument("--reps", type=int, default=0, help="Monte Carlo paths per start in compare (default 0)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.K < 0 or not 0 < args.R < 1:
            raise ModelError("--K must be >= 0 and --R must lie in (0,1)")
        if args.n is not None and args.n < 2:
            raise ModelError("--n must be at least 2")
        if args.trunc < 4:
            raise ModelError("--trunc must be at least 4")
        params = load_model(args.model)
        out = args.out
        if out:
            out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](params, args, out)
    except ModtandemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NumericError.exit_code


if __name__ == "__main__":
    sys.exit(main())
