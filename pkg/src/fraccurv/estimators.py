"""Fractal curvature estimators and the scaling diagnostics.

The renewal identity used throughout: with R_k(eps) = C_k(F_eps) minus the
rescaled contributions of the first-level cylinders, the Cesaro limit of
eps^(D-k) C_k(F_eps) equals (1/eta) * integral_0^R r^(D-k-1) R_k(r) dr.

Indicator convention: the cylinder term for map i is subtracted while
eps <= R*r_i (scale-consistent with the stopping families, and exactly
R-invariant); the variant cutting at eps <= r_i is available behind
``literal_indicator`` for comparison.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .curves import CurvatureCurve, GridScene
from .errors import InvalidInputError, OutOfRangeError
from .functionals import (
    contour_segments,
    interval_localized,
    kappa_field,
    netted_parts,
    variation_subcell_px,
)
from .grids import parallel_set
from .ifs import IFS, WordSet
from .intervals import Line1DEngine
from .polygons import (
    distance_to_region_complement,
    map_region,
    open_set_union,
    points_in_polygon,
)

_ADAPT_TOL = 1e-9
_ADAPT_DEPTH = 48


# ---------------------------------------------------------------------------
# Rescaling and Cesaro averages
# ---------------------------------------------------------------------------


@dataclass
class RescaledCurve:
    eps: np.ndarray
    values: np.ndarray
    k: int
    near_zero: bool


def rescale(curve: CurvatureCurve, k: int) -> RescaledCurve:
    """Pointwise eps^(D-k) * C_k along the curve; flags a vanishing limit."""
    vals = curve.rescaled(k)
    scale = float(np.max(np.abs(vals))) if len(vals) else 0.0
    last_decade = curve.eps >= curve.eps_min * 0.999
    tail = vals[(curve.eps <= curve.eps_min * 10.0) & last_decade]
    near_zero = scale == 0.0 or (len(tail) > 0 and np.max(np.abs(tail)) < 1e-8 * (1.0 + scale))
    return RescaledCurve(eps=curve.eps.copy(), values=vals, k=k, near_zero=near_zero)


def _rescaled_at(curve: CurvatureCurve, k: int, eps: float) -> float:
    return eps ** (curve.D - k) * curve.evaluate_total(k, eps)


def _log_trapezoid(curve: CurvatureCurve, k: int, lo: float, hi: float) -> float:
    """integral of eps^(D-k) C_k(F_eps) d(ln eps) over [lo, hi]."""
    if not (curve.eps_min * (1.0 - 1e-12) <= lo < hi <= curve.eps_max * (1.0 + 1e-12)):
        raise OutOfRangeError(
            f"window [{lo}, {hi}] outside the sampled range "
            f"[{curve.eps_min}, {curve.eps_max}]"
        )
    eps_asc = curve.eps[::-1]
    f_asc = curve.rescaled(k)[::-1]
    inner = (eps_asc > lo * (1.0 + 1e-12)) & (eps_asc < hi * (1.0 - 1e-12))
    us = [math.log(lo)]
    fs = [_rescaled_at(curve, k, lo)]
    us.extend(np.log(eps_asc[inner]))
    fs.extend(f_asc[inner])
    us.append(math.log(hi))
    fs.append(_rescaled_at(curve, k, hi))
    return float(np.trapezoid(np.asarray(fs), np.asarray(us)))


def cesaro_snap_window(curve: CurvatureCurve, delta: float) -> tuple[float, float] | None:
    """Whole-period averaging window [delta, delta*e^(K*h)] for lattice systems.

    The top is capped at R*r_max (above that scale at least one cylinder term
    is outside its indicator, so the rescaled curve cannot yet be
    renewal-periodic) and at min(1, eps_max).
    """
    h = curve.lattice_h
    if h is None or h <= 0.0:
        return None
    cap = min(1.0, curve.eps_max)
    if curve.r_max is not None:
        cap = min(cap, curve.R * curve.r_max)
    if cap <= delta:
        return None
    periods = math.floor((math.log(cap) - math.log(delta)) / h + 1e-9)
    if periods < 1:
        return None
    return (delta, delta * math.exp(periods * h))


def cesaro_average(
    curve: CurvatureCurve, k: int, delta: float, snap: bool | None = None
) -> float:
    """Logarithmic Cesaro average of the rescaled curvature.

    Literal form: (1/|ln delta|) * integral_delta^1 eps^(D-k) C_k d(eps)/eps
    (upper limit min(1, eps_max)).  For lattice systems the window is snapped
    to whole log-periods anchored at delta and capped at R*r_max, which
    removes both the phase bias and the top boundary-layer bias; pass
    snap=False for the literal form.
    """
    if delta < curve.eps_min * (1.0 - 1e-12):
        raise OutOfRangeError(f"delta={delta} below the sampled eps_min={curve.eps_min}")
    window = None
    if snap is None:
        snap = curve.lattice_h is not None
    if snap:
        window = cesaro_snap_window(curve, delta)
    if window is None:
        hi = min(1.0, curve.eps_max)
        if delta >= hi:
            raise OutOfRangeError(f"delta={delta} not below the window top {hi}")
        window = (delta, hi)
    _warn_if_underresolved(curve)
    lo, hi = window
    return _log_trapezoid(curve, k, lo, hi) / (math.log(hi) - math.log(lo))


def _warn_if_underresolved(curve: CurvatureCurve):
    if curve.lattice_h is None or len(curve.eps) < 3:
        return
    step = float(np.median(np.abs(np.diff(np.log(curve.eps)))))
    if step > 0 and curve.lattice_h / step < 8.0:
        warnings.warn(
            f"fewer than 8 samples per lattice period (h={curve.lattice_h}, step={step})",
            stacklevel=3,
        )


# ---------------------------------------------------------------------------
# Renewal integral
# ---------------------------------------------------------------------------


@dataclass
class FractalCurvatureEstimate:
    k: int
    value: float
    method: str
    window: tuple[float, float]
    truncation_bound: float = 0.0
    gamma_hat: float | None = None
    flags: tuple[str, ...] = ()
    error_indicator: dict = field(default_factory=dict)


def _power_integral(p: float, a: float, b: float) -> float:
    """integral_a^b r^p dr with the log case at p = -1."""
    if abs(p + 1.0) < 1e-13:
        return math.log(b / a)
    if a == 0.0:
        if p + 1.0 <= 0.0:
            raise InvalidInputError("divergent power integral at 0")
        return b ** (p + 1.0) / (p + 1.0)
    return (b ** (p + 1.0) - a ** (p + 1.0)) / (p + 1.0)


def _renewal_integrand_factory(engine: Line1DEngine, ifs: IFS, k: int, cutoffs):
    def r_k(e: float) -> float:
        v = engine.functional(e, k)
        for ratio, cut in zip(ifs.ratios, cutoffs):
            if e <= cut * (1.0 + 1e-15):
                v -= ratio**k * engine.functional(e / ratio, k)
        return v

    return r_k


def _integrate_piece(r_k, p: float, a: float, b: float, scale: float, depth: int = 0) -> float:
    """Closed-form integral of r^p * R_k(r) over a piece where R_k is affine.

    The affine model is fit from two interior points and verified at the
    midpoint; failures subdivide (guards against missed breakpoints).
    """
    t1 = a + (b - a) / 3.0
    t2 = a + 2.0 * (b - a) / 3.0
    tm = 0.5 * (a + b)
    v1, v2, vm = r_k(t1), r_k(t2), r_k(tm)
    beta = (v2 - v1) / (t2 - t1)
    alpha = v1 - beta * t1
    if abs(vm - (alpha + beta * tm)) > _ADAPT_TOL * scale and depth < _ADAPT_DEPTH:
        return _integrate_piece(r_k, p, a, tm, scale, depth + 1) + _integrate_piece(
            r_k, p, tm, b, scale, depth + 1
        )
    total = 0.0
    if abs(alpha) > 1e-300:
        total += alpha * _power_integral(p, a, b)
    if abs(beta) > 1e-300:
        total += beta * _power_integral(p + 1.0, a, b)
    return total


def _renewal_exact(curve: CurvatureCurve, ifs: IFS, k: int, literal: bool, R: float):
    engine = curve.evaluator if isinstance(curve.evaluator, Line1DEngine) else Line1DEngine(ifs)
    cutoffs = [r for r in ifs.ratios] if literal else [R * r for r in ifs.ratios]
    r_k = _renewal_integrand_factory(engine, ifs, k, cutoffs)

    lo, hi = engine.hull
    width = hi - lo
    primary = engine._node_gaps(
        1.0, 0.0, [(m.matrix()[0, 0], m.translation[0]) for m in ifs.maps], lo, hi
    )
    eps_floor = min(cutoffs)
    if primary.size:
        eps_floor = min(eps_floor, float(primary.min()) / 2.0)
    breakpoints = {eps_floor, R}
    breakpoints.update(c for c in cutoffs if eps_floor < c < R)
    if primary.size:
        for g in engine.gap_lengths(min_length=2.0 * eps_floor * (1.0 - 1e-9)):
            b = g / 2.0
            if eps_floor < b < R:
                breakpoints.add(float(b))
    pts = sorted(breakpoints)
    scale = abs(engine.functional(eps_floor, k)) + abs(engine.functional(R, k)) + 1.0
    p = curve.D - k - 1.0
    total = _integrate_piece(r_k, p, 0.0 if not primary.size else eps_floor * 1e-6, pts[0], scale)
    # below the first gap-interaction scale the integrand vanishes for
    # strongly separated systems; the adaptive piece above covers the rest
    for a, b in zip(pts[:-1], pts[1:]):
        total += _integrate_piece(r_k, p, a, b, scale)
    value = total / curve.eta
    return FractalCurvatureEstimate(
        k=k,
        value=value,
        method="renewal",
        window=(0.0, R),
        truncation_bound=0.0,
        gamma_hat=None,
        flags=("exact-support",) + (("literal-indicator",) if literal else ()),
    )


def _renewal_grid(curve: CurvatureCurve, ifs: IFS, k: int, literal: bool, R: float):
    eps = curve.eps
    if curve.eps_max < R * (1.0 - 1e-9):
        raise OutOfRangeError(f"curve must cover (eps_min, R={R}]; have eps_max={curve.eps_max}")
    cutoffs = np.asarray([r if literal else R * r for r in ifs.ratios])
    totals = curve.total(k)
    u_asc = np.log(eps[::-1])
    t_asc = totals[::-1]

    def total_at(e: np.ndarray) -> np.ndarray:
        return np.interp(np.log(e), u_asc, t_asc)

    r_k = totals.copy().astype(float)
    for ratio, cut in zip(ifs.ratios, cutoffs):
        mask = eps <= cut * (1.0 + 1e-12)
        r_k[mask] -= ratio**k * total_at(eps[mask] / ratio)
    integrand = eps ** (curve.D - k) * r_k  # r^(D-k-1) R_k dr = this d(ln r)
    order = np.argsort(eps)
    integral = float(np.trapezoid(integrand[order], np.log(eps[order])))

    flags = []
    gamma_hat = None
    bound = 0.0
    tail_mask = eps <= curve.eps_min * 10.0
    tr, te = np.abs(r_k[tail_mask]), eps[tail_mask]
    nz = tr > 1e-14 * (1.0 + np.max(np.abs(totals)))
    if np.count_nonzero(nz) >= 3:
        slope, logc = np.polyfit(np.log(te[nz]), np.log(tr[nz]), 1)
        gamma_hat = float(slope - (k - curve.D))
        a_fit = math.exp(logc)
        if gamma_hat > 0.0:
            bound = a_fit * curve.eps_min**gamma_hat / gamma_hat / curve.eta
        else:
            flags.append("tail not controlled")
    else:
        flags.append("tail below noise floor")
    if literal:
        flags.append("literal-indicator")
    return FractalCurvatureEstimate(
        k=k,
        value=integral / curve.eta,
        method="renewal",
        window=(curve.eps_min, R),
        truncation_bound=bound,
        gamma_hat=gamma_hat,
        flags=tuple(flags),
    )


def renewal_estimate(
    curve: CurvatureCurve,
    ifs: IFS,
    k: int,
    literal_indicator: bool = False,
    R: float | None = None,
) -> FractalCurvatureEstimate:
    """C_k^f via (1/eta) integral_0^R r^(D-k-1) R_k(r) dr.

    Exact 1-d curves integrate the piecewise-affine integrand in closed form
    (breakpoints at half gap lengths and indicator cutoffs); grid curves use
    the log-trapezoid rule with a reported (never added) power-law tail bound.
    """
    R_val = float(R if R is not None else curve.R)
    if curve.engine == "exact-1d":
        return _renewal_exact(curve, ifs, k, literal_indicator, R_val)
    return _renewal_grid(curve, ifs, k, literal_indicator, R_val)


def fractal_estimates(
    curve: CurvatureCurve,
    ifs: IFS,
    k: int,
    delta: float | None = None,
    literal_indicator: bool = False,
) -> list[FractalCurvatureEstimate]:
    """Cesaro + renewal values with the cross-method spread attached."""
    delta = float(delta if delta is not None else curve.eps_min)
    ces = cesaro_average(curve, k, delta)
    ren = renewal_estimate(curve, ifs, k, literal_indicator=literal_indicator)
    spread = abs(ces - ren.value) / (abs(ren.value) + 1e-300)
    win = cesaro_snap_window(curve, delta) or (delta, min(1.0, curve.eps_max))
    out = [
        FractalCurvatureEstimate(
            k=k,
            value=ces,
            method="cesaro",
            window=win,
            error_indicator={"cross_method_spread": spread},
        ),
        ren,
    ]
    ren.error_indicator["cross_method_spread"] = spread
    if curve.engine == "exact-1d":
        alt = renewal_estimate(curve, ifs, k, literal_indicator=literal_indicator, R=curve.R * 4.0 / 3.0)
        ren.error_indicator["r_invariance_spread"] = abs(alt.value - ren.value) / (
            abs(ren.value) + 1e-300
        )
    return out


# ---------------------------------------------------------------------------
# Uniform-boundedness report
# ---------------------------------------------------------------------------


@dataclass
class VariationBoundReport:
    k: int
    M: float
    argmax_eps: float
    slope: float
    cap: float


def variation_bound_report(curve: CurvatureCurve, k: int) -> VariationBoundReport:
    """sup of eps^(D-k) * variation proxy over the curve (eps <= cap).

    The cap min(1, R*r_max, eps_max) keeps the sup inside the renewal cascade
    zone where the rescaled quantity is meaningful.  Exact 1-d curves refine
    the sampled sup over each inter-breakpoint piece in closed form; the
    trend slope is the regression of ln(rescaled variation) on ln(eps).
    """
    cap = min(1.0, curve.eps_max)
    if curve.r_max is not None:
        cap = min(cap, curve.R * curve.r_max)
    mask = curve.eps <= cap * (1.0 + 1e-12)
    if not np.any(mask):
        raise OutOfRangeError("no samples below the cap")
    eps = curve.eps[mask]
    var = curve.variation[k][mask]
    resc = eps ** (curve.D - k) * var
    best = float(np.max(resc))
    arg = float(eps[int(np.argmax(resc))])
    if isinstance(curve.evaluator, Line1DEngine):
        best, arg = _exact_variation_sup(curve, k, float(eps.min()), cap, best, arg)
    good = var > 0
    slope = 0.0
    if np.count_nonzero(good) >= 3:
        slope = float(np.polyfit(np.log(eps[good]), np.log(resc[good]), 1)[0])
    return VariationBoundReport(k=k, M=best, argmax_eps=arg, slope=slope, cap=cap)


def _exact_variation_sup(curve, k, lo, hi, best, arg):
    """Continuum sup over pieces: on each piece the variation equals the
    functional itself (positive in 1-d), affine in eps."""
    engine: Line1DEngine = curve.evaluator
    D = curve.D
    pts = {lo, hi}
    for g in engine.gap_lengths(min_length=2.0 * lo * (1.0 - 1e-9)):
        b = g / 2.0
        if lo < b < hi:
            pts.add(float(b))
    pts = sorted(pts)

    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= 1e-14 * max(1.0, abs(b)):
            continue
        t1, t2 = a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0
        v1, v2 = engine.functional(t1, k), engine.functional(t2, k)
        beta = (v2 - v1) / (t2 - t1)
        alpha = v1 - beta * t1
        # candidates: piece ends (right end via left-limit of the affine model)
        for e, val in ((a, None), (b, None)):
            value = e ** (D - k) * (alpha + beta * e)
            if value > best:
                best, arg = value, e
        if beta != 0.0 and D - k != 0.0:
            crit = -alpha * (D - k) / (beta * (D - k + 1.0))
            if a < crit < b:
                value = crit ** (D - k) * (alpha + beta * crit)
                if value > best:
                    best, arg = value, crit
    return best, arg


# ---------------------------------------------------------------------------
# Localization (fractal curvature measures)
# ---------------------------------------------------------------------------


@dataclass
class LocalLimitReport:
    k: int
    level: int
    words: list
    reference: np.ndarray  # r_w^D per cell, 0 for the complement slot
    deltas: np.ndarray
    fractions: np.ndarray  # len(deltas) x (n_cells + 1)
    averaged: np.ndarray  # averaged rescaled masses, same shape
    window_periods: float

    @property
    def finest_fractions(self) -> np.ndarray:
        return self.fractions[-1]

    @property
    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.finest_fractions - self.reference)))


def _assign_points_to_regions(points: np.ndarray, regions: list) -> np.ndarray:
    ids = np.full(len(points), len(regions), dtype=np.int32)
    free = np.ones(len(points), dtype=bool)
    for idx, reg in enumerate(regions):
        if isinstance(reg, tuple):
            mask = free & (points[:, 0] > reg[0]) & (points[:, 0] <= reg[1])
        else:
            mask = free.copy()
            mask[free] = points_in_polygon(points[free], reg)
        ids[mask] = idx
        free &= ~mask
    return ids


def local_limit(
    ifs: IFS,
    k: int,
    level: int,
    curve: CurvatureCurve,
    r: float | None = None,
    scene: GridScene | None = None,
    deltas: np.ndarray | None = None,
    window_periods: float = 1.0,
    ks: tuple[int, ...] | None = None,
) -> "LocalLimitReport | dict[int, LocalLimitReport]":
    """Averaged rescaled curvature masses on the level-m cylinder cells.

    Cells are the open images S_w(O) over all words of length ``level``; the
    complement slot collects everything else (in particular the complement of
    O(r)).  Per delta, masses are Cesaro-averaged over the window
    [delta, delta * Lambda] with Lambda = one lattice period (or one factor
    of e for non-lattice systems) times ``window_periods``, then normalized
    by the total; references are the cylinder masses r_w^D.
    """
    if ifs.open_set is None:
        raise InvalidInputError("local_limit needs an IFS with an open set")
    want = tuple(ks) if ks is not None else (k,)
    words = _all_words(ifs, level)
    regions = [map_region_word(ifs, w) for w in words]
    reference = np.asarray([ifs.cylinder_measure(w) for w in words] + [0.0])

    lam = math.exp((ifs.lattice.generator or 1.0) * window_periods)
    if deltas is None:
        deltas = np.asarray([curve.eps_min])
    deltas = np.sort(np.asarray(deltas, dtype=float))[::-1]

    n_slots = len(words) + 1
    reports: dict[int, LocalLimitReport] = {}
    masses = {kk: {} for kk in want}  # eps -> per-cell mass vector

    needed: list[float] = []
    for d in deltas:
        top = min(d * lam, curve.eps_max)
        sel = curve.eps[(curve.eps >= d * (1.0 - 1e-12)) & (curve.eps <= top * (1.0 + 1e-12))]
        needed.extend(float(e) for e in sel)
    needed = sorted(set(needed))
    if not needed:
        raise OutOfRangeError("no curve samples inside the averaging windows")

    if ifs.dim == 1:
        engine = curve.evaluator if isinstance(curve.evaluator, Line1DEngine) else Line1DEngine(ifs)
        cells_1d = [reg for reg in regions]
        for e in needed:
            loc = interval_localized(engine.parallel_set(e), cells_1d)
            for kk in want:
                masses[kk][e] = loc[kk].value
    else:
        if scene is None:
            raise InvalidInputError("local_limit on a planar IFS needs the grid scene")
        ids_cache: np.ndarray | None = None
        for e in needed:
            occ = scene.occupancy(e)
            if ids_cache is None:
                xs, ys = occ.cell_centers()
                ids_cache = np.full(occ.shape, len(regions), dtype=np.int32)
                free = np.ones(occ.shape, dtype=bool)
                pts_x = np.broadcast_to(xs[None, :], occ.shape)
                pts_y = np.broadcast_to(ys[:, None], occ.shape)
                flat = np.column_stack([pts_x.ravel(), pts_y.ravel()])
                ids_cache = _assign_points_to_regions(flat, regions).reshape(occ.shape)
            for kk in want:
                if kk == 2:
                    vec = np.bincount(
                        ids_cache[occ.occupancy].ravel(), minlength=n_slots
                    )[:n_slots] * (scene.h**2)
                elif kk == 0:
                    kap = kappa_field(occ.occupancy)
                    vec = np.bincount(
                        ids_cache.ravel(), weights=kap.ravel(), minlength=n_slots
                    )[:n_slots]
                elif kk == 1:
                    mid, lengths, _ = contour_segments(scene.dg, e)
                    vec = np.zeros(n_slots)
                    if len(mid):
                        seg_ids = _assign_points_to_regions(mid, regions)
                        np.add.at(vec, seg_ids, 0.5 * lengths)
                else:
                    raise InvalidInputError(f"k={kk} unsupported in the plane")
                masses[kk][e] = np.asarray(vec, dtype=float)

    for kk in want:
        fractions = np.empty((len(deltas), n_slots))
        averaged = np.empty((len(deltas), n_slots))
        for row, d in enumerate(deltas):
            top = min(d * lam, curve.eps_max)
            es = np.asarray([e for e in needed if d * (1 - 1e-12) <= e <= top * (1 + 1e-12)])
            if len(es) < 2:
                es = np.asarray([es[0], es[0] * (1 + 1e-9)]) if len(es) else None
            if es is None:
                raise OutOfRangeError(f"no samples in window [{d}, {top}]")
            u = np.log(es)
            vals = np.stack([masses[kk][float(e)] for e in es])  # (n_eps, slots)
            resc = (es ** (curve.D - kk))[:, None] * vals
            if len(es) >= 2 and u[-1] > u[0]:
                avg = np.trapezoid(resc, u, axis=0) / (u[-1] - u[0])
            else:
                avg = resc[0]
            averaged[row] = avg
            total = avg.sum()
            fractions[row] = avg / total if total != 0.0 else np.full(n_slots, np.nan)
        reports[kk] = LocalLimitReport(
            k=kk,
            level=level,
            words=words,
            reference=reference,
            deltas=deltas.copy(),
            fractions=fractions,
            averaged=averaged,
            window_periods=window_periods,
        )
    if ks is None:
        return reports[k]
    return reports


def map_region_word(ifs: IFS, word) -> object:
    """S_word(O) as an interval tuple or CCW polygon array."""
    A, t = ifs.word_affine(word)
    if ifs.dim == 1:
        a, b = ifs.open_set.interval
        ends = np.sort(A[0, 0] * np.asarray([a, b]) + t[0])
        return (float(ends[0]), float(ends[1]))
    verts = np.asarray(ifs.open_set.polygon, dtype=float) @ A.T + t
    from .polygons import polygon_signed_area

    if polygon_signed_area(verts) < 0.0:
        verts = verts[::-1]
    return verts


def _all_words(ifs: IFS, level: int) -> list:
    words = [()]
    for _ in range(level):
        words = [w + (i,) for w in words for i in range(1, len(ifs.maps) + 1)]
    return words


# ---------------------------------------------------------------------------
# Boundary words and scaling diagnostics
# ---------------------------------------------------------------------------


def sigma_b(ifs: IFS, eps: float, R: float | None = None, cloud_resolution: float | None = None) -> WordSet:
    """Stopping words whose cylinders come 2*eps-close to the complement of
    the first-iterate open set (distances evaluated on attractor clouds)."""
    if ifs.open_set is None:
        raise InvalidInputError("sigma_b needs an IFS with an open set")
    stopping = ifs.stopping_set(eps, R=R)
    first = [map_region(m, ifs.open_set) for m in ifs.maps]
    res = cloud_resolution if cloud_resolution is not None else ifs.diam_F / 64.0
    base = ifs.attractor_cloud(res)
    selected = []
    for word in stopping:
        pts = ifs.apply_word(word, base)
        if ifs.dim == 1:
            pts = pts.reshape(-1, 1)
        d = distance_to_region_complement(pts, first)
        if float(d.min()) <= 2.0 * eps:
            selected.append(word)
    return WordSet(eps=eps, R=stopping.R, words=tuple(selected), ifs=ifs)


@dataclass
class ConditionIIReport:
    applicable: bool
    k: int
    eps: np.ndarray = field(default_factory=lambda: np.empty(0))
    sup_ratio: float = 0.0
    ratios: np.ndarray = field(default_factory=lambda: np.empty(0))
    slope: float = 0.0


def condition_ii_diagnostic(
    ifs: IFS,
    k: int,
    scene: GridScene | None = None,
    eps_values: np.ndarray | None = None,
) -> ConditionIIReport:
    """Empirical boundedness of the intersection-zone curvature mass.

    For each sampled eps and each boundary word sigma, measures the netted
    variation proxy of the order-k measure on the boxes inside
    (S_sigma F)_eps intersect A^(sigma,eps), and reports sup mass/eps^k plus
    the regression slope of ln(ratio) against ln(1/eps).
    """
    if k > ifs.dim - 2:
        return ConditionIIReport(applicable=False, k=k)
    if scene is None or eps_values is None:
        raise InvalidInputError("condition_ii_diagnostic needs a scene and eps grid")
    h = scene.h
    ratios = []
    kept_eps = []
    res = ifs.diam_F / 64.0
    base = ifs.attractor_cloud(res)
    for e in np.sort(np.asarray(eps_values))[::-1]:
        occ = scene.occupancy(e)
        kap = kappa_field(occ.occupancy)
        words = ifs.stopping_set(e)
        boundary = set(sigma_b(ifs, e).words)
        clouds = {w: _cloud2d(ifs, w, base) for w in words}
        worst = 0.0
        for word in boundary:
            mask = _intersection_zone(scene, clouds, word, e)
            if mask is None or not mask.any():
                continue
            kap_masked = np.where(mask, kap, 0)
            ids = np.zeros(kap.shape, dtype=np.int32)
            pos, neg = netted_parts(kap_masked, ids, variation_subcell_px(e, h), 1)
            worst = max(worst, float(pos[0] + neg[0]) / e**k)
        ratios.append(worst)
        kept_eps.append(e)
    eps_arr = np.asarray(kept_eps)
    ratio_arr = np.asarray(ratios)
    nz = ratio_arr > 0
    slope = 0.0
    if np.count_nonzero(nz) >= 3:
        slope = float(np.polyfit(np.log(1.0 / eps_arr[nz]), np.log(ratio_arr[nz]), 1)[0])
    return ConditionIIReport(
        applicable=True,
        k=k,
        eps=eps_arr,
        sup_ratio=float(ratio_arr.max(initial=0.0)),
        ratios=ratio_arr,
        slope=slope,
    )


def _cloud2d(ifs, word, base):
    pts = ifs.apply_word(word, base)
    return pts if pts.ndim == 2 else pts.reshape(-1, 1)


def _intersection_zone(scene: GridScene, clouds: dict, word, eps: float):
    """Boolean pixel mask of (S_word F)_eps intersected with the union of the
    other cylinders' eps-neighborhoods (distances via the cylinder clouds)."""
    own = clouds[word]
    x0, y0 = scene.origin
    h = scene.h
    lo = own.min(axis=0) - (2.0 * eps + 4.0 * h)
    hi = own.max(axis=0) + (2.0 * eps + 4.0 * h)
    ny, nx = scene.seeds.shape
    ix0 = max(0, int((lo[0] - x0) / h))
    iy0 = max(0, int((lo[1] - y0) / h))
    ix1 = min(nx, int((hi[0] - x0) / h) + 2)
    iy1 = min(ny, int((hi[1] - y0) / h) + 2)
    if ix1 <= ix0 or iy1 <= iy0:
        return None
    xs = x0 + h * np.arange(ix0, ix1)
    ys = y0 + h * np.arange(iy0, iy1)
    gx, gy = np.meshgrid(xs, ys)
    pix = np.column_stack([gx.ravel(), gy.ravel()])
    d_own = _min_dist(pix, own)
    others = [c for w, c in clouds.items() if w != word and _bbox_near(c, lo, hi)]
    if not others:
        return None
    d_other = np.full(len(pix), np.inf)
    for c in others:
        d_other = np.minimum(d_other, _min_dist(pix, c))
    zone = (d_own <= eps) & (d_other <= eps)
    mask = np.zeros(scene.seeds.shape, dtype=bool)
    mask[iy0:iy1, ix0:ix1] = zone.reshape(iy1 - iy0, ix1 - ix0)
    return mask


def _bbox_near(cloud, lo, hi):
    return bool(np.all(cloud.max(axis=0) >= lo) and np.all(cloud.min(axis=0) <= hi))


def _min_dist(points, cloud):
    out = np.full(len(points), np.inf)
    step = max(1, len(cloud) // 512)
    sub = cloud[::step]
    for chunk in np.array_split(np.arange(len(points)), max(1, len(points) // 65536 + 1)):
        d2 = np.sum((points[chunk, None, :] - sub[None, :, :]) ** 2, axis=-1)
        out[chunk] = np.sqrt(d2.min(axis=1))
    return out


@dataclass
class OmegaScalingReport:
    r: float
    counts: dict  # (delta, eps) -> word count
    gamma_hat: float | None


def omega_scaling_diagnostic(
    ifs: IFS,
    r: float,
    deltas,
    eps_values,
    R: float | None = None,
) -> OmegaScalingReport:
    """Counts of stopping words whose eps-cylinders meet the delta-neighborhood
    of O(r)^c, with the exponent fit ln(count * eps^D) ~ gamma * ln(delta)."""
    regions = open_set_union(ifs, r, R=R)
    base = ifs.attractor_cloud(ifs.diam_F / 64.0)
    counts = {}
    xs, ys = [], []
    for delta, e in zip(np.asarray(deltas, float), np.asarray(eps_values, float)):
        if e > delta:
            raise OutOfRangeError("need eps <= delta for each pair")
        n = 0
        for word in ifs.stopping_set(e, R=R):
            pts = _cloud2d(ifs, word, base)
            d = distance_to_region_complement(pts, regions)
            if float(d.min()) <= e + delta:  # cylinder cloud reaches the set
                n += 1
        counts[(float(delta), float(e))] = n
        if n > 0:
            xs.append(math.log(delta))
            ys.append(math.log(n * e**ifs.D))
    gamma = None
    if len(xs) >= 2 and max(xs) > min(xs):
        gamma = float(np.polyfit(xs, ys, 1)[0])
    return OmegaScalingReport(r=r, counts=counts, gamma_hat=gamma)


def count_words_meeting(ifs: IFS, eps: float, region_distance=None, R: float | None = None) -> int:
    """#Omega(B, eps): stopping words whose eps-cylinder meets a closed set B.

    ``region_distance`` maps an (n, d) point array to distances to B; None
    means B is the whole space (every word counts)."""
    stopping = ifs.stopping_set(eps, R=R)
    if region_distance is None:
        return len(stopping)
    base = ifs.attractor_cloud(ifs.diam_F / 64.0)
    n = 0
    for word in stopping:
        pts = _cloud2d(ifs, word, base)
        if float(np.min(region_distance(pts))) <= eps:
            n += 1
    return n


def lattice_period_extrema(curve: CurvatureCurve, k: int, cap: float | None = None):
    """(max, min) of the rescaled curve over consecutive whole log-periods.

    Periods are anchored at the largest sample below the cap (default
    R*r_max) and walk downward; partial periods at the bottom are dropped.
    """
    if curve.lattice_h is None:
        raise InvalidInputError("lattice_period_extrema needs a lattice system")
    h = curve.lattice_h
    if cap is None:
        cap = min(1.0, curve.eps_max)
        if curve.r_max is not None:
            cap = min(cap, curve.R * curve.r_max)
    vals = curve.rescaled(k)
    eps = curve.eps
    top = eps[eps <= cap * (1.0 + 1e-12)]
    if len(top) == 0:
        raise OutOfRangeError("no samples below the cap")
    anchor = math.log(float(top[0]))
    out = []
    j = 0
    while True:
        lo, hi = anchor - (j + 1) * h, anchor - j * h
        mask = (np.log(eps) > lo + 1e-12) & (np.log(eps) <= hi + 1e-12)
        if not mask.any() or math.exp(lo) < curve.eps_min * (1.0 - 1e-12):
            break
        window = vals[mask]
        if len(window) >= 2:
            out.append((float(window.max()), float(window.min())))
        j += 1
    return out
