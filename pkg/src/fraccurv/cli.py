"""fraccurv command line: dim, curve, fractal, localize, check, render.

Exit codes: 0 success, 1 runtime/estimator failure, 2 config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import estimators
from .config import parse_config
from .curves import GridScene, curvature_curve
from .errors import ConfigError, FraccurvError
from .grids import parallel_set, write_pgm
from .ifs import IFS


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.17g}"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fraccurv", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("dim", "curve", "fractal", "localize", "check", "render"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the JSON run configuration")
        p.add_argument("--eps-min", type=float, default=None)
        p.add_argument("--eps-max", type=float, default=None)
        p.add_argument("--samples-per-decade", type=int, default=None)
        p.add_argument("--grid", type=int, default=None)
        p.add_argument("-k", type=int, default=None)
        p.add_argument("--method", choices=("cesaro", "renewal"), default=None)
        p.add_argument("--level", type=int, default=1)
        p.add_argument("--R", type=float, default=None)
        p.add_argument("--literal-indicator", action="store_true")
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--delta", type=float, default=None)
        p.add_argument("--cache-dir", type=str, default=".fraccurv-cache")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"fraccurv: {exc}", file=sys.stderr)
        return 2
    try:
        return _dispatch(args, cfg)
    except FraccurvError as exc:
        print(f"fraccurv: {exc}", file=sys.stderr)
        return 1


def _dispatch(args, cfg) -> int:
    if args.grid is not None:
        cfg.grid = args.grid
    if args.samples_per_decade is not None:
        cfg.samples_per_decade = args.samples_per_decade
    if args.eps_min is not None:
        cfg.eps_min = args.eps_min
    if args.eps_max is not None:
        cfg.eps_max = args.eps_max
    if args.R is not None:
        cfg.R = args.R
    ifs = cfg.to_ifs()

    if args.command == "dim":
        print(f"D = {_fmt(ifs.D)}")
        print(f"eta = {_fmt(ifs.eta)}")
        print(f"lattice = {ifs.lattice}")
        print(f"R = {_fmt(ifs.R)}")
        print(f"diam_upper = {_fmt(ifs.diam_F)}")
        return 0

    if args.command == "render":
        if args.eps is None:
            raise FraccurvError("render needs --eps")
        out = Path(args.out or _default_out(cfg, "pgm"))
        if ifs.dim == 2:
            scene = GridScene(ifs, grid_n=cfg.grid, eps_max=max(args.eps, 8 * 1e-9))
            grid = parallel_set(scene.dg, args.eps)
            write_pgm(grid, out)
        else:
            raise FraccurvError("render is only available for planar systems")
        print(out)
        return 0

    scene = None
    if ifs.dim == 2:
        scene = GridScene(ifs, grid_n=cfg.grid, eps_max=cfg.eps_max or ifs.R)
    curve = curvature_curve(
        ifs,
        eps_max=cfg.eps_max,
        eps_min=cfg.eps_min,
        samples_per_decade=cfg.samples_per_decade,
        grid_n=cfg.grid,
        cache_dir=args.cache_dir,
        scene=scene,
    )

    if args.command == "curve":
        out = Path(args.out or _default_out(cfg, "curve.csv"))
        emit_curve_table(curve, out)
        print(out)
        return 0

    if args.command == "fractal":
        ks = [args.k] if args.k is not None else list(range(ifs.dim + 1))
        rows = []
        for k in ks:
            ests = estimators.fractal_estimates(
                curve, ifs, k, delta=args.delta, literal_indicator=args.literal_indicator
            )
            for est in ests:
                if args.method is None or est.method == args.method:
                    rows.append(est)
        out = Path(args.out or _default_out(cfg, "fractal.csv"))
        emit_estimates_table(rows, out)
        print(out)
        return 0

    if args.command == "localize":
        k = args.k if args.k is not None else ifs.dim
        deltas = _localize_deltas(curve, args.delta)
        report = estimators.local_limit(
            ifs, k, level=args.level, curve=curve, scene=scene, deltas=deltas
        )
        out = Path(args.out or _default_out(cfg, "localize.csv"))
        emit_localize_table(report, out)
        print(out)
        return 0

    if args.command == "check":
        rows = []
        for k in range(ifs.dim + 1):
            rep = estimators.variation_bound_report(curve, k)
            rows.append(("variation_bound", k, "M", rep.M))
            rows.append(("variation_bound", k, "argmax_eps", rep.argmax_eps))
            rows.append(("variation_bound", k, "slope", rep.slope))
        if ifs.dim == 2:
            cond = estimators.condition_ii_diagnostic(
                ifs, 0, scene=scene, eps_values=curve.eps[curve.eps <= 0.25 * curve.eps_max][:12]
            )
            rows.append(("condition_ii", 0, "applicable", 1.0 if cond.applicable else 0.0))
            if cond.applicable:
                rows.append(("condition_ii", 0, "sup_ratio", cond.sup_ratio))
                rows.append(("condition_ii", 0, "slope", cond.slope))
        else:
            rows.append(("condition_ii", -1, "applicable", 0.0))
        if ifs.open_set is not None:
            deltas = curve.eps_max * 0.25 * np.asarray([1.0, 0.5, 0.25, 0.125])
            omg = estimators.omega_scaling_diagnostic(ifs, ifs.R, deltas, deltas / 4.0)
            rows.append(("omega_scaling", -1, "gamma_hat",
                         omg.gamma_hat if omg.gamma_hat is not None else float("nan")))
        out = Path(args.out or _default_out(cfg, "check.csv"))
        emit_check_table(rows, out)
        print(out)
        return 0

    raise FraccurvError(f"unknown command {args.command}")


def _localize_deltas(curve, delta):
    if delta is not None:
        return np.asarray([delta])
    lo = curve.eps_min
    hi = min(curve.eps_max / 8.0, lo * 100.0)
    if hi <= lo:
        return np.asarray([lo])
    return np.geomspace(lo, hi, 5)


def _default_out(cfg, suffix: str) -> str:
    stem = Path(cfg.source).stem if cfg.source else (cfg.name or "run")
    return f"{stem}.{suffix}"


# ---------------------------------------------------------------------------
# Table emission (byte-deterministic: fixed order, 17 significant digits)
# ---------------------------------------------------------------------------


def emit_curve_table(curve, path) -> None:
    lines = ["eps,k,total,rescaled,cesaro,variation_proxy"]
    ks = sorted(curve.totals)
    upper = min(1.0, curve.eps_max)
    for j in range(len(curve.eps)):
        e = float(curve.eps[j])
        for k in ks:
            total = float(curve.totals[k][j])
            resc = e ** (curve.D - k) * total
            if e < upper * (1.0 - 1e-12):
                ces = estimators.cesaro_average(curve, k, e, snap=False)
            else:
                ces = float("nan")
            var = float(curve.variation[k][j])
            lines.append(f"{_fmt(e)},{k},{_fmt(total)},{_fmt(resc)},{_fmt(ces)},{_fmt(var)}")
    _write_lines(path, lines)


def emit_estimates_table(rows, path) -> None:
    lines = ["k,method,value,window_lo,window_hi,truncation_bound,gamma_hat,cross_method_spread,flags"]
    for est in rows:
        spread = est.error_indicator.get("cross_method_spread")
        lines.append(
            ",".join(
                [
                    str(est.k),
                    est.method,
                    _fmt(est.value),
                    _fmt(est.window[0]),
                    _fmt(est.window[1]),
                    _fmt(est.truncation_bound),
                    _fmt(est.gamma_hat) if est.gamma_hat is not None else "",
                    _fmt(spread) if spread is not None else "",
                    ";".join(est.flags),
                ]
            )
        )
    _write_lines(path, lines)


def emit_localize_table(report, path) -> None:
    lines = ["cell_id,word,mass_fraction,reference,abs_error"]
    frac = report.finest_fractions
    for idx in range(len(frac)):
        word = "".join(str(c) for c in report.words[idx]) if idx < len(report.words) else "complement"
        ref = float(report.reference[idx])
        lines.append(
            f"{idx},{word},{_fmt(frac[idx])},{_fmt(ref)},{_fmt(abs(frac[idx] - ref))}"
        )
    _write_lines(path, lines)


def emit_check_table(rows, path) -> None:
    lines = ["diagnostic,k,quantity,value"]
    for diag, k, quantity, value in rows:
        lines.append(f"{diag},{k},{quantity},{_fmt(value)}")
    _write_lines(path, lines)


def _write_lines(path, lines) -> None:
    data = ("\n".join(lines) + "\n").encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise FraccurvError(f"cannot write {path}: {exc}") from exc


if __name__ == "__main__":
    raise SystemExit(main())
