"""Exact one-dimensional parallel sets as unions of closed intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, InvalidInputError
from .ifs import IFS


@dataclass(frozen=True)
class IntervalSet:
    """Disjoint closed intervals [a_j, b_j] with a_j <= b_j < a_{j+1}."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        if a.shape != b.shape or a.ndim != 1:
            raise InvalidInputError("endpoint arrays must be 1-d and equal length")
        if np.any(b < a):
            raise InvalidInputError("interval endpoints out of order")
        if len(a) > 1 and not np.all(a[1:] > b[:-1]):
            raise InvalidInputError("intervals must be sorted with strict gaps")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def count(self) -> int:
        return len(self.a)

    @property
    def total_length(self) -> float:
        return float(np.sum(self.b - self.a))

    def gaps(self) -> np.ndarray:
        """Lengths of the open gaps between consecutive components."""
        if self.count < 2:
            return np.empty(0)
        return self.a[1:] - self.b[:-1]


def merge_intervals(a: np.ndarray, b: np.ndarray) -> IntervalSet:
    """Union of closed intervals; touching components merge."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if len(a) == 0:
        return IntervalSet(a, b)
    order = np.argsort(a, kind="stable")
    a, b = a[order], b[order]
    out_a = [a[0]]
    out_b = [b[0]]
    for j in range(1, len(a)):
        if a[j] <= out_b[-1]:  # closed sets: touching (gap 0) merges
            out_b[-1] = max(out_b[-1], b[j])
        else:
            out_a.append(a[j])
            out_b.append(b[j])
    return IntervalSet(np.asarray(out_a), np.asarray(out_b))


def parallel_intervals(centers, eps: float) -> IntervalSet:
    """Exact eps-neighborhood of points on the line (or of an IntervalSet)."""
    if eps <= 0.0:
        raise InvalidInputError("eps must be positive")
    if isinstance(centers, IntervalSet):
        return merge_intervals(centers.a - eps, centers.b + eps)
    pts = np.sort(np.asarray(centers, float).reshape(-1))
    return merge_intervals(pts - eps, pts + eps)


class Line1DEngine:
    """Exact parallel-set evaluator for a 1-d IFS.

    Parallel sets are assembled by descending the word tree until every
    cylinder hull has diameter <= 2*eps; at that point the hull's
    eps-neighborhood equals the cylinder's, so the merged union is exact.
    """

    def __init__(self, ifs: IFS):
        if ifs.dim != 1:
            raise InvalidInputError("Line1DEngine requires a 1-d IFS")
        self.ifs = ifs
        self.hull = self._attractor_hull()

    def _attractor_hull(self) -> tuple[float, float]:
        pts = [float(self.ifs.fixed_point(i)[0]) for i in range(len(self.ifs.maps))]
        lo, hi = min(pts), max(pts)
        coeffs = [(m.matrix()[0, 0], m.translation[0]) for m in self.ifs.maps]
        for _ in range(400):
            ends = [c * e + t for c, t in coeffs for e in (lo, hi)]
            lo2, hi2 = min(ends), max(ends)
            if lo2 == lo and hi2 == hi:
                break
            lo, hi = lo2, hi2
        return lo, hi

    def parallel_set(self, eps: float) -> IntervalSet:
        if eps <= 0.0:
            raise InvalidInputError("eps must be positive")
        lo, hi = self.hull
        width = hi - lo
        if width == 0.0:
            return IntervalSet(np.asarray([lo - eps]), np.asarray([lo + eps]))
        coeffs = [(m.matrix()[0, 0], m.translation[0]) for m in self.ifs.maps]
        out_a: list[float] = []
        out_b: list[float] = []
        # stack entries: (scale s, offset o) representing x -> s*x + o
        stack: list[tuple[float, float]] = [(1.0, 0.0)]
        budget = self.ifs.word_budget
        visited = 0
        while stack:
            s, o = stack.pop()
            if abs(s) * width <= 2.0 * eps:
                e0, e1 = s * lo + o, s * hi + o
                if e0 > e1:
                    e0, e1 = e1, e0
                out_a.append(e0 - eps)
                out_b.append(e1 + eps)
                continue
            for c, t in coeffs:
                visited += 1
                if visited > budget:
                    raise BudgetError(
                        f"exact parallel set at eps={eps} exceeds the word budget {budget}"
                    )
                stack.append((s * c, s * t + o))
        return merge_intervals(np.asarray(out_a), np.asarray(out_b))

    def functional(self, eps: float, k: int) -> float:
        """C_k of the exact parallel set: k=0 component count, k=1 length."""
        iv = self.parallel_set(eps)
        if k == 0:
            return float(iv.count)
        if k == 1:
            return iv.total_length
        raise InvalidInputError("k must be 0 or 1 on the line")

    def gap_lengths(self, min_length: float) -> np.ndarray:
        """All distinct gap lengths of the attractor >= min_length.

        Gaps between adjacent cylinder hulls at a node scale by r_word, so the
        enumeration recurses only while a node could still host one.
        """
        if min_length <= 0.0:
            raise InvalidInputError("min_length must be positive")
        lo, hi = self.hull
        width = hi - lo
        coeffs = [(m.matrix()[0, 0], m.translation[0]) for m in self.ifs.maps]
        primary = self._node_gaps(1.0, 0.0, coeffs, lo, hi)
        if primary.size == 0:
            return np.empty(0)
        gmax = float(primary.max())
        lengths: set[float] = set()
        stack: list[tuple[float, float]] = [(1.0, 0.0)]
        budget = self.ifs.word_budget
        visited = 0
        while stack:
            s, o = stack.pop()
            scale = abs(s)
            if scale * gmax < min_length:
                continue
            for g in self._node_gaps(s, o, coeffs, lo, hi):
                if g >= min_length:
                    lengths.add(float(g))
            for c, t in coeffs:
                visited += 1
                if visited > budget:
                    raise BudgetError(f"gap enumeration exceeds the word budget {budget}")
                stack.append((s * c, s * t + o))
        return np.asarray(sorted(lengths))

    @staticmethod
    def _node_gaps(s, o, coeffs, lo, hi) -> np.ndarray:
        ends = []
        for c, t in coeffs:
            e0 = s * c * lo + s * t + o
            e1 = s * c * hi + s * t + o
            ends.append((min(e0, e1), max(e0, e1)))
        ends.sort()
        gaps = [ends[j + 1][0] - ends[j][1] for j in range(len(ends) - 1)]
        return np.asarray([g for g in gaps if g > 0.0])

    def localized(self, eps: float, cells: list) -> dict:
        """Per-cell masses of C_0 (half-atoms at endpoints) and C_1 (length).

        ``cells`` is a list of intervals (a, b); points landing exactly on a
        shared boundary go to the lower cell.  A trailing implicit complement
        collects whatever no cell claims.  Returns arrays of length
        len(cells)+1 keyed by k.
        """
        iv = self.parallel_set(eps)
        n = len(cells)
        chi_mass = np.zeros(n + 1)
        len_mass = np.zeros(n + 1)
        for x in np.concatenate([iv.a, iv.b]):
            chi_mass[self._find_cell(x, cells)] += 0.5
        for a, b in zip(iv.a, iv.b):
            for idx, cell in enumerate(cells):
                ca, cb = cell
                overlap = min(b, cb) - max(a, ca)
                if overlap > 0.0:
                    len_mass[idx] += overlap
            len_mass[n] += (b - a) - sum(
                max(0.0, min(b, cb) - max(a, ca)) for ca, cb in cells
            )
        return {0: chi_mass, 1: len_mass}

    @staticmethod
    def _find_cell(x: float, cells: list) -> int:
        # half-open (a, b]: a point on a shared boundary falls to the lower cell
        for idx, (ca, cb) in enumerate(cells):
            if ca < x <= cb:
                return idx
        return len(cells)
