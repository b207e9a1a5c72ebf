"""Sampled eps -> C_k(F_eps) curves for both engines, plus the disk cache."""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, OutOfRangeError, ResolutionError
from .functionals import (
    FunctionalVector,
    global_variation_proxy,
    interval_functionals,
    minkowski_functionals,
)
from .grids import BinaryGrid, DistanceGrid, distance_transform, parallel_set
from .ifs import IFS
from .intervals import Line1DEngine


def eps_grid(
    eps_max: float,
    eps_min: float,
    samples_per_decade: int = 64,
    log_period: float | None = None,
) -> np.ndarray:
    """Strictly decreasing geometric eps grid.

    When ``log_period`` is given (lattice generator), the log step is snapped
    to divide it exactly, so the sample phases repeat identically from period
    to period.
    """
    if not (0.0 < eps_min < eps_max):
        raise OutOfRangeError("need 0 < eps_min < eps_max")
    if samples_per_decade < 1:
        raise InvalidInputError("samples_per_decade must be positive")
    step = math.log(10.0) / samples_per_decade
    if log_period is not None and log_period > 0.0:
        per = max(1, round(log_period / step))
        step = log_period / per
    n = int(math.ceil((math.log(eps_max) - math.log(eps_min)) / step - 1e-12))
    u = math.log(eps_max) - step * np.arange(n + 1)
    eps = np.exp(u)
    eps[0] = eps_max
    if eps[-1] > eps_min * (1.0 + 1e-12):
        eps = np.append(eps, eps_min)
    return eps


@dataclass
class CurvatureCurve:
    """Totals and variation proxies along a decreasing eps grid."""

    eps: np.ndarray
    totals: dict[int, np.ndarray]
    variation: dict[int, np.ndarray]
    dim: int
    D: float
    eta: float
    R: float
    engine: str
    h: float | None = None
    lattice_h: float | None = None
    r_max: float | None = None
    ifs_key: str = ""
    evaluator: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not np.all(np.diff(self.eps) < 0.0):
            raise InvalidInputError("eps grid must be strictly decreasing")

    @property
    def eps_min(self) -> float:
        return float(self.eps[-1])

    @property
    def eps_max(self) -> float:
        return float(self.eps[0])

    def total(self, k: int) -> np.ndarray:
        if k not in self.totals:
            raise InvalidInputError(f"curve has no order-{k} functional")
        return self.totals[k]

    def rescaled(self, k: int) -> np.ndarray:
        """eps^(D-k) * C_k(F_eps) along the grid."""
        return self.eps ** (self.D - k) * self.total(k)

    def evaluate_total(self, k: int, eps: float) -> float:
        """Total at an arbitrary eps: exact for the 1-d engine, log-linear
        interpolation of the samples otherwise."""
        if self.evaluator is not None:
            return self.evaluator.functional(eps, k)
        return self.interp_total(k, eps)

    def interp_total(self, k: int, eps: float) -> float:
        vals = self.total(k)
        u = np.log(self.eps[::-1])
        return float(np.interp(math.log(eps), u, vals[::-1]))


class GridScene:
    """One padded lattice + distance transform, shared across eps samples."""

    def __init__(self, ifs: IFS, grid_n: int = 1024, eps_max: float | None = None):
        if ifs.dim != 2:
            raise InvalidInputError("GridScene requires a planar IFS")
        if grid_n < 64:
            raise InvalidInputError("grid_n too small")
        self.ifs = ifs
        self.grid_n = int(grid_n)
        self.eps_max = float(eps_max if eps_max is not None else ifs.R)
        lo, hi = self._attractor_bbox()
        extent = float(max(hi - lo))
        # padding = eps_max + 4h on all sides; h solves
        #   h * (grid_n - 8) = extent + 2 * eps_max
        self.h = (extent + 2.0 * self.eps_max) / (self.grid_n - 8)
        pad = self.eps_max + 4.0 * self.h
        self.origin = (float(lo[0] - pad), float(lo[1] - pad))
        nx = int(math.ceil((hi[0] - lo[0] + 2.0 * pad) / self.h)) + 1
        ny = int(math.ceil((hi[1] - lo[1] + 2.0 * pad) / self.h)) + 1
        self._build_seeds(nx, ny)
        self._dg: DistanceGrid | None = None

    def _attractor_bbox(self):
        depth = min(self.ifs.cloud_depth(self.ifs.diam_F / 256.0), 12)
        pts = self.ifs.fixed_point(0)[None, :]
        mats = [(m.matrix(), np.asarray(m.translation)) for m in self.ifs.maps]
        for _ in range(depth):
            pts = np.concatenate([pts @ A.T + t for A, t in mats], axis=0)
        slack = self.ifs.r_max**depth * self.ifs.diam_F
        return pts.min(axis=0) - slack, pts.max(axis=0) + slack

    def _build_seeds(self, nx: int, ny: int):
        cloud = self.ifs.attractor_cloud(self.h / 2.0)
        x0, y0 = self.origin
        ix = np.floor((cloud[:, 0] - x0) / self.h + 0.5).astype(np.int64)
        iy = np.floor((cloud[:, 1] - y0) / self.h + 0.5).astype(np.int64)
        if ix.min() < 0 or iy.min() < 0 or ix.max() >= nx or iy.max() >= ny:
            raise InvalidInputError("seed cloud escapes the padded grid (bbox bound failed)")
        occ = np.zeros((ny, nx), dtype=bool)
        occ[iy, ix] = True
        margin_cells = min(ix.min(), iy.min(), nx - 1 - ix.max(), ny - 1 - iy.max())
        self.margin = float(margin_cells) * self.h
        self.seeds = BinaryGrid(origin=self.origin, h=self.h, occupancy=occ, margin=self.margin)
        # seeding error: cloud resolution h/2 plus half-cell snap
        self.eps_uncertainty = self.h / 2.0 + self.h / 2.0

    @property
    def dg(self) -> DistanceGrid:
        if self._dg is None:
            self._dg = distance_transform(self.seeds)
        return self._dg

    def occupancy(self, eps: float) -> BinaryGrid:
        return parallel_set(self.dg, eps)

    def functionals(self, eps: float) -> FunctionalVector:
        return minkowski_functionals(self.occupancy(eps), self.dg, eps)

    def variation_proxy(self, eps: float) -> float:
        return global_variation_proxy(self.occupancy(eps).occupancy, eps, self.h)


def curvature_curve(
    ifs: IFS,
    eps_max: float | None = None,
    eps_min: float | None = None,
    samples_per_decade: int = 64,
    engine: str | None = None,
    grid_n: int = 1024,
    R: float | None = None,
    period_align: bool = True,
    cache_dir: str | Path | None = None,
    scene: GridScene | None = None,
) -> CurvatureCurve:
    """Build (or load from cache) the eps -> functionals curve.

    The grid engine enforces eps >= 4h by raising the lower end of the grid
    when necessary (with a warning).  Lattice systems get period-aligned
    sample phases unless period_align is disabled.
    """
    engine = engine or ("exact-1d" if ifs.dim == 1 else "grid")
    R_val = float(R if R is not None else ifs.R)
    eps_max = float(eps_max if eps_max is not None else R_val)
    if eps_max > R_val * (1.0 + 1e-12):
        raise OutOfRangeError(f"eps_max={eps_max} exceeds R={R_val}")
    if eps_min is None:
        eps_min = eps_max * 1e-4
    log_period = ifs.lattice.generator if (period_align and ifs.lattice.is_lattice) else None

    if engine == "exact-1d":
        if ifs.dim != 1:
            raise InvalidInputError("exact-1d engine requires a 1-d IFS")
        grid = eps_grid(eps_max, eps_min, samples_per_decade, log_period)
        key = _cache_key(ifs, engine, R_val, grid, None)
        cached = _cache_load(cache_dir, key)
        if cached is not None:
            cached.evaluator = Line1DEngine(ifs)
            return cached
        eng = Line1DEngine(ifs)
        chi = np.empty(len(grid))
        vol = np.empty(len(grid))
        for j, e in enumerate(grid):
            iv = eng.parallel_set(e)
            chi[j] = iv.count
            vol[j] = iv.total_length
        curve = CurvatureCurve(
            eps=grid,
            totals={0: chi, 1: vol},
            variation={0: chi.copy(), 1: vol.copy()},
            dim=1,
            D=ifs.D,
            eta=ifs.eta,
            R=R_val,
            engine=engine,
            h=None,
            lattice_h=ifs.lattice.generator,
            r_max=ifs.r_max,
            ifs_key=ifs.content_key(),
            evaluator=eng,
        )
        _cache_store(cache_dir, key, curve)
        return curve

    if engine != "grid":
        raise InvalidInputError(f"unknown engine {engine!r}")
    if ifs.dim != 2:
        raise InvalidInputError("grid engine requires a planar IFS")
    scene = scene or GridScene(ifs, grid_n=grid_n, eps_max=eps_max)
    floor = 4.0 * scene.h
    if eps_min < floor:
        warnings.warn(
            f"eps_min={eps_min} below the resolution floor 4h={floor}; raised accordingly",
            stacklevel=2,
        )
        eps_min = floor
    if eps_min >= eps_max:
        raise ResolutionError(f"no admissible eps range: floor 4h={floor} >= eps_max={eps_max}")
    grid = eps_grid(eps_max, eps_min, samples_per_decade, log_period)
    key = _cache_key(ifs, engine, R_val, grid, scene.grid_n)
    cached = _cache_load(cache_dir, key)
    if cached is not None:
        return cached
    chi = np.empty(len(grid))
    half = np.empty(len(grid))
    vol = np.empty(len(grid))
    var0 = np.empty(len(grid))
    for j, e in enumerate(grid):
        occ = scene.occupancy(e)
        fv = minkowski_functionals(occ, scene.dg, e)
        chi[j], half[j], vol[j] = fv.chi, fv.half_boundary, fv.volume
        var0[j] = global_variation_proxy(occ.occupancy, e, scene.h)
    curve = CurvatureCurve(
        eps=grid,
        totals={0: chi, 1: half, 2: vol},
        variation={0: var0, 1: half.copy(), 2: vol.copy()},
        dim=2,
        D=ifs.D,
        eta=ifs.eta,
        R=R_val,
        engine=engine,
        h=scene.h,
        lattice_h=ifs.lattice.generator,
        r_max=ifs.r_max,
        ifs_key=ifs.content_key(),
    )
    _cache_store(cache_dir, key, curve)
    return curve


# ---------------------------------------------------------------------------
# Disk cache
# ---------------------------------------------------------------------------


def _cache_key(ifs: IFS, engine: str, R: float, grid: np.ndarray, grid_n) -> str:
    payload = {
        "ifs": ifs.content_key(),
        "engine": engine,
        "R": R.hex() if isinstance(R, float) else R,
        "grid_n": grid_n,
        "eps": [float(e).hex() for e in grid],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:24]


def _cache_load(cache_dir, key: str) -> CurvatureCurve | None:
    if cache_dir is None:
        return None
    path = Path(cache_dir) / f"curve-{key}.npz"
    if not path.exists():
        return None
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        totals = {int(k): data[f"total{k}"] for k in meta["ks"]}
        variation = {int(k): data[f"var{k}"] for k in meta["ks"]}
        return CurvatureCurve(
            eps=data["eps"],
            totals=totals,
            variation=variation,
            dim=meta["dim"],
            D=meta["D"],
            eta=meta["eta"],
            R=meta["R"],
            engine=meta["engine"],
            h=meta["h"],
            lattice_h=meta["lattice_h"],
            r_max=meta["r_max"],
            ifs_key=meta["ifs_key"],
        )


def _cache_store(cache_dir, key: str, curve: CurvatureCurve) -> None:
    if cache_dir is None:
        return
    path = Path(cache_dir)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "ks": sorted(curve.totals),
        "dim": curve.dim,
        "D": curve.D,
        "eta": curve.eta,
        "R": curve.R,
        "engine": curve.engine,
        "h": curve.h,
        "lattice_h": curve.lattice_h,
        "r_max": curve.r_max,
        "ifs_key": curve.ifs_key,
    }
    arrays = {"eps": curve.eps, "meta": np.asarray(json.dumps(meta))}
    for k in curve.totals:
        arrays[f"total{k}"] = curve.totals[k]
        arrays[f"var{k}"] = curve.variation[k]
    np.savez(path / f"curve-{key}.npz", **arrays)
