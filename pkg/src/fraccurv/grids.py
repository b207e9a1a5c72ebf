"""Binary occupancy grids and exact Euclidean distance transforms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import squared_edt
from .errors import InvalidInputError, MarginError

# distances exactly eps (within this absolute slack) count as occupied,
# matching the closed parallel set
TIE_TOL = 1e-15


@dataclass
class BinaryGrid:
    """Occupancy on a square lattice.

    ``occupancy[iy, ix]`` covers the world cell centred at
    ``origin + (ix*h, iy*h)``.  ``margin`` (optional) is the world distance
    from the seed bounding box to the nearest grid border; grids produced by
    the scene builder carry it so parallel-set clipping can be detected.
    """

    origin: tuple[float, float]
    h: float
    occupancy: np.ndarray
    margin: float | None = None

    def __post_init__(self):
        if self.h <= 0.0:
            raise InvalidInputError("spacing h must be positive")
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.ndim != 2:
            raise InvalidInputError("occupancy must be 2-d")
        self.occupancy = occ

    @property
    def shape(self) -> tuple[int, int]:
        return self.occupancy.shape

    @property
    def width(self) -> int:
        return self.occupancy.shape[1]

    @property
    def height(self) -> int:
        return self.occupancy.shape[0]

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(x, y) center coordinate vectors."""
        x0, y0 = self.origin
        return (x0 + self.h * np.arange(self.width), y0 + self.h * np.arange(self.height))

    def area(self) -> float:
        return float(np.count_nonzero(self.occupancy)) * self.h * self.h


@dataclass
class DistanceGrid:
    """Exact Euclidean distance (world units) to the nearest seed cell center."""

    origin: tuple[float, float]
    h: float
    distance: np.ndarray
    margin: float | None = None
    seed_count: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.distance.shape


def distance_transform(seeds: BinaryGrid) -> DistanceGrid:
    """Exact EDT of the seed set (two-pass squared-integer lower envelope)."""
    occ = seeds.occupancy
    n_seeds = int(np.count_nonzero(occ))
    if n_seeds == 0:
        raise InvalidInputError("distance transform needs at least one seed cell")
    sq = squared_edt(occ.astype(np.uint8))
    dist = seeds.h * np.sqrt(sq)
    return DistanceGrid(
        origin=seeds.origin, h=seeds.h, distance=dist, margin=seeds.margin, seed_count=n_seeds
    )


def parallel_set(dg: DistanceGrid, eps: float) -> BinaryGrid:
    """Cells whose center lies within eps of the seeds (ties occupied)."""
    if eps < 0.0:
        raise InvalidInputError("eps must be nonnegative")
    if dg.margin is not None and eps + 2.0 * dg.h > dg.margin:
        raise MarginError(
            f"eps={eps} would clip at the border: needs eps+2h <= margin={dg.margin}"
        )
    occ = dg.distance <= eps + TIE_TOL
    return BinaryGrid(origin=dg.origin, h=dg.h, occupancy=occ, margin=dg.margin)


def brute_force_edt(seeds: BinaryGrid) -> DistanceGrid:
    """O(n^2 m) reference EDT in the same squared-integer arithmetic."""
    occ = seeds.occupancy
    ii, jj = np.nonzero(occ)
    if len(ii) == 0:
        raise InvalidInputError("distance transform needs at least one seed cell")
    iy, ix = np.indices(occ.shape)
    d2 = np.full(occ.shape, np.inf)
    for si, sj in zip(ii, jj):
        cand = (iy - si).astype(float) ** 2 + (ix - sj).astype(float) ** 2
        np.minimum(d2, cand, out=d2)
    dist = seeds.h * np.sqrt(d2)
    return DistanceGrid(origin=seeds.origin, h=seeds.h, distance=dist,
                        margin=seeds.margin, seed_count=len(ii))


def write_pgm(grid: BinaryGrid, path) -> None:
    """P5 image of the occupancy: occupied = 0 (black), empty = 255.

    Rows are written top-down (row 0 of the file is the highest y), so the
    image appears in the usual orientation.
    """
    occ = grid.occupancy
    img = np.where(occ[::-1, :], 0, 255).astype(np.uint8)
    header = f"P5\n{occ.shape[1]} {occ.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.tobytes())
