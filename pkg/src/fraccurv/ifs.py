"""Self-similar systems: contraction maps, Moran equation, words and stopping sets.

An :class:`IFS` bundles N contracting similarities with the quantities derived
from them (similarity dimension D, renewal constant eta, a certified upper
bound on the attractor diameter, the reference radius R, and the lattice
classification of the contraction ratios).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetError, InvalidInputError, OutOfRangeError

DEFAULT_WORD_BUDGET = 10_000_000
_R_DIAM_FACTOR = 1.5  # default R = 1.5 * diam upper bound; 1.5 > sqrt(2)


@dataclass(frozen=True)
class Similarity:
    """Contracting similarity x -> ratio * Q x + translation.

    In the plane Q is a rotation (radians) optionally composed with a
    reflection across the x-axis (applied before the rotation).  On the line
    Q is +1, or -1 when ``reflect`` is set; ``rotation`` must be 0.
    """

    ratio: float
    translation: tuple[float, ...]
    rotation: float = 0.0
    reflect: bool = False

    def __post_init__(self):
        if not (0.0 < self.ratio < 1.0):
            raise InvalidInputError(f"ratio must be in (0,1), got {self.ratio}")
        if len(self.translation) not in (1, 2):
            raise InvalidInputError("translation must have 1 or 2 components")
        if self.dim == 1 and self.rotation != 0.0:
            raise InvalidInputError("rotation is undefined on the line; use reflect")

    @property
    def dim(self) -> int:
        return len(self.translation)

    def matrix(self) -> np.ndarray:
        """Linear part as a (d, d) array."""
        if self.dim == 1:
            sign = -1.0 if self.reflect else 1.0
            return np.array([[self.ratio * sign]])
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        rot = np.array([[c, -s], [s, c]])
        if self.reflect:
            rot = rot @ np.array([[1.0, 0.0], [0.0, -1.0]])
        return self.ratio * rot

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map points, shape (..., d) or scalar-like for d=1."""
        pts = np.asarray(points, dtype=float)
        if self.dim == 1:
            sign = -1.0 if self.reflect else 1.0
            return self.ratio * sign * pts + self.translation[0]
        return pts @ self.matrix().T + np.asarray(self.translation)


def similarity_dimension(ratios: Sequence[float]) -> float:
    """Unique s with sum(r_i^s) = 1, by bisection refined with Newton steps."""
    ratios = [float(r) for r in ratios]
    if len(ratios) == 0:
        raise InvalidInputError("empty ratio list")
    for r in ratios:
        if not (0.0 < r < 1.0):
            raise InvalidInputError(f"ratio must be in (0,1), got {r}")
    if len(ratios) < 2:
        raise InvalidInputError("need at least 2 maps")
    rs = np.asarray(ratios)

    def f(s):
        return np.sum(rs**s) - 1.0

    lo, hi = 0.0, 3.0
    while f(hi) > 0.0:
        hi *= 2.0
        if hi > 1e6:  # unreachable for valid ratios
            raise InvalidInputError("Moran equation has no root; ratios degenerate")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    for _ in range(8):  # Newton polish; f' = sum r^s ln r < 0
        val = np.sum(rs**s)
        deriv = np.sum(rs**s * np.log(rs))
        step = (val - 1.0) / deriv
        s_new = s - step
        if not (lo - 1e-9 <= s_new <= hi + 1e-9):
            break
        s = s_new
        if abs(val - 1.0) < 1e-15 * len(ratios):
            break
    return float(s)


def eta(ratios: Sequence[float], dimension: float) -> float:
    """Renewal normalization eta = -sum r_i^D ln r_i (> 0)."""
    rs = np.asarray([float(r) for r in ratios])
    if np.any(rs <= 0.0) or np.any(rs >= 1.0):
        raise InvalidInputError("ratios must be in (0,1)")
    return float(-np.sum(rs**dimension * np.log(rs)))


@dataclass(frozen=True)
class LatticeClass:
    """Result of the numeric lattice test.

    ``generator`` is h > 0 with -ln r_i all in h*Z (lattice case) or None.
    ``annotation`` records the denominator cap used when declaring
    "numerically non-lattice".
    """

    generator: float | None
    annotation: str = ""

    @property
    def is_lattice(self) -> bool:
        return self.generator is not None

    def __str__(self):
        if self.is_lattice:
            return f"lattice h={self.generator!r}"
        return f"non-lattice ({self.annotation})"


def lattice_class(ratios: Sequence[float], denominator_cap: int = 10_000) -> LatticeClass:
    """Classify {-ln r_i} as a discrete subgroup of R or (numerically) not.

    Rational dependence of ln r_i / ln r_1 is detected via continued-fraction
    convergents with denominators up to ``denominator_cap``; agreement is
    required to within 1e-12.  Exhausting the cap yields a non-lattice answer
    annotated with the cap, never a claim of irrationality.
    """
    if denominator_cap < 1000:
        raise InvalidInputError("denominator_cap must be >= 1000")
    xs = [-math.log(float(r)) for r in ratios]
    if any(x <= 0.0 for x in xs):
        raise InvalidInputError("ratios must be in (0,1)")
    fracs = []
    for x in xs:
        q = Fraction(x / xs[0]).limit_denominator(denominator_cap)
        if q <= 0 or abs(float(q) - x / xs[0]) > 1e-12 * (1.0 + abs(x / xs[0])):
            return LatticeClass(None, f"numerically non-lattice at cap {denominator_cap}")
        fracs.append(q)
    gcd = fracs[0]
    for q in fracs[1:]:
        gcd = Fraction(math.gcd(gcd.numerator * q.denominator, q.numerator * gcd.denominator),
                       gcd.denominator * q.denominator)
    h = float(gcd) * xs[0]
    for x in xs:
        k = round(x / h)
        if k < 1 or abs(x - k * h) > 1e-12 * (1.0 + x):
            return LatticeClass(None, f"numerically non-lattice at cap {denominator_cap}")
    return LatticeClass(h)


@dataclass(frozen=True)
class OpenSet:
    """Feasible open set for the separation condition.

    On the line: an open interval (a, b).  In the plane: the interior of a
    simple polygon given by its vertices in counterclockwise order.
    """

    interval: tuple[float, float] | None = None
    polygon: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if (self.interval is None) == (self.polygon is None):
            raise InvalidInputError("specify exactly one of interval or polygon")
        if self.interval is not None and not self.interval[0] < self.interval[1]:
            raise InvalidInputError("interval must satisfy a < b")
        if self.polygon is not None:
            if len(self.polygon) < 3:
                raise InvalidInputError("polygon needs at least 3 vertices")
            from .polygons import polygon_is_simple, polygon_signed_area

            verts = np.asarray(self.polygon, dtype=float)
            if not polygon_is_simple(verts):
                raise InvalidInputError("polygon is self-intersecting")
            if polygon_signed_area(verts) <= 0.0:
                raise InvalidInputError("polygon vertices must be counterclockwise")

    @property
    def dim(self) -> int:
        return 1 if self.interval is not None else 2

    def vertices(self) -> np.ndarray:
        if self.interval is not None:
            return np.asarray([[self.interval[0]], [self.interval[1]]])
        return np.asarray(self.polygon, dtype=float)

    def sample_points(self, n_per_edge: int = 24) -> np.ndarray:
        """Boundary + interior probe points used by the numeric separation check."""
        if self.interval is not None:
            a, b = self.interval
            return np.linspace(a, b, n_per_edge)[:, None]
        verts = np.asarray(self.polygon, dtype=float)
        pts = [verts]
        for i in range(len(verts)):
            a, b = verts[i], verts[(i + 1) % len(verts)]
            t = np.linspace(0.0, 1.0, n_per_edge, endpoint=False)[1:, None]
            pts.append(a + t * (b - a))
        centroid = verts.mean(axis=0, keepdims=True)
        pts.append(centroid)
        for w in (0.25, 0.5, 0.75):
            pts.append(centroid + w * (verts - centroid))
        return np.concatenate(pts, axis=0)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Strict interior membership (tol > 0 shrinks the region)."""
        pts = np.asarray(points, dtype=float)
        if self.interval is not None:
            a, b = self.interval
            x = pts[:, 0] if pts.ndim == 2 else pts
            return (x > a + tol) & (x < b - tol)
        from .polygons import points_in_polygon, polygon_boundary_distance

        verts = np.asarray(self.polygon, dtype=float)
        inside = points_in_polygon(pts, verts)
        if tol > 0.0:
            inside &= polygon_boundary_distance(pts, verts) > tol
        return inside


Word = tuple[int, ...]


class IFS:
    """A system of N >= 2 contracting similarities with derived invariants."""

    def __init__(
        self,
        maps: Sequence[Similarity],
        open_set: OpenSet | None = None,
        R: float | None = None,
        word_budget: int = DEFAULT_WORD_BUDGET,
        validate_open_set: bool = True,
    ):
        maps = tuple(maps)
        if len(maps) < 2:
            raise InvalidInputError("an IFS needs at least 2 maps")
        dims = {m.dim for m in maps}
        if len(dims) != 1:
            raise InvalidInputError("all maps must share the ambient dimension")
        self.maps = maps
        self.dim = dims.pop()
        self.word_budget = int(word_budget)
        self.ratios = tuple(m.ratio for m in maps)
        self.D = similarity_dimension(self.ratios)
        self.eta = eta(self.ratios, self.D)
        self.r_min = min(self.ratios)
        self.r_max = max(self.ratios)
        self.lattice = lattice_class(self.ratios)
        self.diam_F = self._diameter_upper_bound()
        if R is None:
            R = _R_DIAM_FACTOR * self.diam_F
        R = float(R)
        if R <= math.sqrt(2.0) * self.diam_F:
            # diam_F is an upper bound, so only reject when R fails even the
            # certified bound; the sqrt(2) margin comes from the ball regime.
            raise InvalidInputError(
                f"R={R} must exceed sqrt(2)*diam_F (diam upper bound {self.diam_F})"
            )
        self.R = R
        self.open_set = open_set
        if open_set is not None:
            if open_set.dim != self.dim:
                raise InvalidInputError("open set dimension mismatch")
            if validate_open_set:
                self._check_open_set(open_set)

    # -- basic word machinery ------------------------------------------------

    def word_ratio(self, word: Iterable[int]) -> float:
        r = 1.0
        for letter in word:
            self._check_letter(letter)
            r *= self.ratios[letter - 1]
        return r

    def word_affine(self, word: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
        """(A, t) of the left-to-right composition S_w1 o ... o S_wn."""
        A = np.eye(self.dim)
        t = np.zeros(self.dim)
        for letter in word:
            self._check_letter(letter)
            m = self.maps[letter - 1]
            B, u = m.matrix(), np.asarray(m.translation, dtype=float)
            # current map acts after the new inner map: x -> A(Bx + u) + t
            t = A @ u + t
            A = A @ B
        return A, t

    def apply_word(self, word: Iterable[int], points: np.ndarray) -> np.ndarray:
        """S_word applied to points (shape (..., d); scalars allowed for d=1)."""
        A, t = self.word_affine(word)
        pts = np.asarray(points, dtype=float)
        if self.dim == 1:
            return A[0, 0] * pts + t[0]
        return pts @ A.T + t

    def cylinder_measure(self, word: Iterable[int]) -> float:
        """Normalized fractal mass of the cylinder: r_word^D."""
        return self.word_ratio(word) ** self.D

    def _check_letter(self, letter: int):
        if not 1 <= letter <= len(self.maps):
            raise InvalidInputError(f"letter {letter} out of range 1..{len(self.maps)}")

    # -- attractor geometry --------------------------------------------------

    def fixed_point(self, index: int = 0) -> np.ndarray:
        """Fixed point of maps[index]: solves x = Ax + t."""
        m = self.maps[index]
        A, t = m.matrix(), np.asarray(m.translation, dtype=float)
        return np.linalg.solve(np.eye(self.dim) - A, t)

    def attractor_cloud(self, resolution: float) -> np.ndarray:
        """Point cloud {S_w(x0) : |w| = n} with r_max^n * diam_F <= resolution/2.

        Every attractor point is within ``resolution`` of the cloud and vice
        versa.  Raises BudgetError when N^n would exceed the word budget.
        """
        if resolution <= 0.0:
            raise InvalidInputError("resolution must be positive")
        n = self.cloud_depth(resolution)
        count = len(self.maps) ** n
        if count > self.word_budget:
            raise BudgetError(
                f"cloud at resolution {resolution} needs {count} points, "
                f"exceeding the word budget {self.word_budget}"
            )
        pts = self.fixed_point(0)[None, :]
        mats = [(m.matrix(), np.asarray(m.translation)) for m in self.maps]
        for _ in range(n):
            pts = np.concatenate([pts @ A.T + t for A, t in mats], axis=0)
        return pts

    def cloud_depth(self, resolution: float) -> int:
        if self.r_max**0 * self.diam_F <= resolution / 2.0:
            return 0
        return max(1, math.ceil(math.log(resolution / (2.0 * self.diam_F)) / math.log(self.r_max)))

    def _diameter_upper_bound(self) -> float:
        """Certified upper bound: diam(cloud_n) / (1 - 2 r_max^n) at the deepest
        affordable n.  Stops early once successive bounds agree to 1e-9."""
        budget_depth = int(math.log(2 ** 20) / math.log(len(self.maps)))
        pts = np.stack([self.fixed_point(i) for i in range(len(self.maps))])
        mats = [(m.matrix(), np.asarray(m.translation)) for m in self.maps]
        prev = None
        bound = None
        for n in range(1, max(2, budget_depth + 1)):
            pts = np.concatenate([pts @ A.T + t for A, t in mats], axis=0)
            d_n = _pointset_diameter(pts)
            shrink = 2.0 * self.r_max**n
            if shrink >= 1.0:
                continue
            bound = d_n / (1.0 - shrink)
            if prev is not None and abs(bound - prev) <= 1e-9 * max(bound, 1e-300):
                break
            prev = bound
        if bound is None:  # r_max very close to 1; fall back to the crude bound
            spread = _pointset_diameter(np.stack([self.fixed_point(i) for i in range(len(self.maps))]))
            bound = spread / (1.0 - self.r_max)
        return float(bound)

    # -- stopping families ---------------------------------------------------

    def stopping_set(self, eps: float, R: float | None = None) -> "WordSet":
        """Maximal prefix-free words with R*r_w < eps <= R*r_parent."""
        R = self.R if R is None else float(R)
        if not (0.0 < eps <= R):
            raise OutOfRangeError(f"eps must lie in (0, R={R}], got {eps}")
        words: list[Word] = []
        stack: list[tuple[Word, float]] = [((), 1.0)]
        n_letters = len(self.maps)
        visited = 0
        while stack:
            word, r = stack.pop()
            for letter in range(n_letters, 0, -1):
                r_child = r * self.ratios[letter - 1]
                child = word + (letter,)
                visited += 1
                if visited > self.word_budget:
                    raise BudgetError(
                        f"stopping set at eps={eps} exceeds the word budget "
                        f"{self.word_budget}"
                    )
                if R * r_child < eps:
                    words.append(child)
                else:
                    stack.append((child, r_child))
        words.sort()
        return WordSet(eps=eps, R=R, words=tuple(words), ifs=self)

    # -- identity ------------------------------------------------------------

    def content_key(self) -> str:
        """Stable hash of the geometric content (maps + dimension)."""
        payload = {
            "dim": self.dim,
            "maps": [
                [m.ratio.hex(), [c.hex() for c in m.translation], m.rotation.hex(), m.reflect]
                for m in self.maps
            ],
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]

    # -- open-set sanity check -------------------------------------------------

    def _check_open_set(self, open_set: OpenSet):
        probes = open_set.sample_points()
        tol = 1e-9 * max(1.0, self.diam_F)
        images = [m.apply(probes) for m in self.maps]
        for i, img in enumerate(images):
            # numeric check on probe points: images must stay inside the closure
            if open_set.interval is not None:
                a, b = open_set.interval
                ok = np.all((img[:, 0] >= a - tol) & (img[:, 0] <= b + tol))
            else:
                from .polygons import points_in_polygon, polygon_boundary_distance

                verts = np.asarray(open_set.polygon, dtype=float)
                inside = points_in_polygon(img, verts)
                near = polygon_boundary_distance(img, verts) <= tol
                ok = np.all(inside | near)
            if not ok:
                raise InvalidInputError(f"image of open set under map {i + 1} leaves the open set")
        interiors = [open_set.contains(img, tol=tol) for img in images]
        for i in range(len(images)):
            for j in range(len(images)):
                if i == j:
                    continue
                strict_i = images[i][interiors[i]]
                if strict_i.size and np.any(_region_contains(open_set, self.maps[j], strict_i, tol)):
                    raise InvalidInputError(f"open-set images {i + 1} and {j + 1} overlap")
        cloud = self.attractor_cloud(max(self.diam_F / 64.0, 1e-6))
        if not np.any(open_set.contains(cloud)):
            raise InvalidInputError("open set misses the attractor (needs O intersect F nonempty)")


def _region_contains(open_set: OpenSet, mapping: Similarity, points: np.ndarray, tol: float) -> np.ndarray:
    """Membership of points in mapping(open_set), strictly inside by tol."""
    if open_set.interval is not None:
        a, b = open_set.interval
        ends = np.sort(mapping.apply(np.asarray([[a], [b]]))[:, 0])
        x = points[:, 0]
        return (x > ends[0] + tol) & (x < ends[1] - tol)
    from .polygons import points_in_polygon, polygon_boundary_distance

    verts = mapping.apply(np.asarray(open_set.polygon, dtype=float))
    inside = points_in_polygon(points, verts)
    inside &= polygon_boundary_distance(points, verts) > tol
    return inside


def _pointset_diameter(pts: np.ndarray) -> float:
    if pts.shape[1] == 1:
        return float(pts.max() - pts.min())
    if len(pts) > 16:
        try:
            from scipy.spatial import ConvexHull

            hull = pts[ConvexHull(pts).vertices]
        except Exception:  # degenerate (collinear) clouds
            hull = pts
    else:
        hull = pts
    d2 = np.sum((hull[:, None, :] - hull[None, :, :]) ** 2, axis=-1)
    return float(np.sqrt(d2.max()))


@dataclass(frozen=True)
class WordSet:
    """Stopping family: prefix-free words whose cylinders have size ~ eps."""

    eps: float
    R: float
    words: tuple[Word, ...]
    ifs: IFS = field(repr=False, compare=False)

    def ratios(self) -> np.ndarray:
        return np.asarray([self.ifs.word_ratio(w) for w in self.words])

    def mass(self) -> float:
        """sum r_w^D; equals 1 for every stopping family."""
        return float(np.sum(self.ratios() ** self.ifs.D))

    def __len__(self):
        return len(self.words)

    def __iter__(self):
        return iter(self.words)
