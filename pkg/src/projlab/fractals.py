"""Cantor-type cube fixtures, their natural measures, and dimension probes.

Sets are unions of half-open grid cubes ``prod [k b^-n, (k+1) b^-n)`` on a
base-``b`` grid (b = 2 or 3 typically; any b >= 2 works).  Measures attach
nonnegative weights per cube.  The ball-mass convention throughout: a cube
contributes its full weight iff its *center* lies in the ball.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpecError

__all__ = [
    "DyadicCube",
    "CubeSet",
    "FractalMeasure",
    "cantor_stage",
    "natural_measure",
    "frostman_constant",
    "box_dimension_estimate",
    "BoxDimensionEstimate",
]


@dataclass(frozen=True)
class DyadicCube:
    """Half-open grid cube at ``level`` on a base-``base`` subdivision."""

    level: int
    coords: tuple
    base: int = 2

    def __post_init__(self):
        hi = self.base ** self.level
        if any(not 0 <= c < hi for c in self.coords):
            raise InvalidSpecError(f"coords {self.coords} outside [0, {hi})")

    @property
    def side(self):
        return float(self.base) ** (-self.level)

    def lower(self):
        return np.asarray(self.coords, dtype=float) * self.side

    def center(self):
        return self.lower() + 0.5 * self.side

    def contains(self, x):
        lo = self.lower()
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= lo) & (x < lo + self.side)))


class CubeSet:
    """A finite set of same-level grid cubes in dimension 1, 2 or 3."""

    def __init__(self, dim, level, coords, base=2):
        if dim not in (1, 2, 3):
            raise InvalidSpecError("dim must be 1, 2 or 3")
        if base < 2:
            raise InvalidSpecError("base must be >= 2")
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, dim)
        if len(coords) == 0:
            raise InvalidSpecError("empty cube set")
        hi = base ** level
        if coords.min() < 0 or coords.max() >= hi:
            raise InvalidSpecError("cube coordinates outside the level grid")
        uniq = np.unique(coords, axis=0)
        if len(uniq) != len(coords):
            raise InvalidSpecError("duplicate cubes")
        # canonical lexicographic order
        order = np.lexsort(uniq.T[::-1])
        self.dim = dim
        self.level = int(level)
        self.base = int(base)
        self.coords = uniq[order]

    def __len__(self):
        return len(self.coords)

    @property
    def side(self):
        return float(self.base) ** (-self.level)

    def lowers(self):
        return self.coords * self.side

    def centers(self):
        return self.lowers() + 0.5 * self.side

    def cubes(self):
        return [
            DyadicCube(self.level, tuple(int(v) for v in c), self.base)
            for c in self.coords
        ]

    def refines(self, coarser):
        """True if every cube here lies inside a cube of ``coarser``."""
        if coarser.base != self.base or coarser.level > self.level:
            return False
        shift = self.base ** (self.level - coarser.level)
        parents = self.coords // shift
        want = {tuple(c) for c in coarser.coords}
        return all(tuple(p) in want for p in parents)

    # -- plain text serialization: "level dim base" header, one cube per line

    def dumps(self):
        buf = io.StringIO()
        buf.write(f"{self.level} {self.dim} {self.base}\n")
        for c in self.coords:
            buf.write(" ".join(str(int(v)) for v in c) + "\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        level, dim, base = (int(v) for v in lines[0].split())
        coords = [[int(v) for v in ln.split()[:dim]] for ln in lines[1:]]
        return cls(dim, level, coords, base)

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())


class FractalMeasure:
    """Weighted cube set; weights are nonnegative with positive total."""

    def __init__(self, cubes: CubeSet, weights, exponent=None):
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if len(weights) != len(cubes):
            raise InvalidSpecError("one weight per cube required")
        if np.any(weights < 0):
            raise InvalidSpecError("weights must be nonnegative")
        if weights.sum() <= 0:
            raise InvalidSpecError("total mass must be positive")
        self.cubes = cubes
        self.weights = weights
        self.exponent = exponent

    @property
    def mass(self):
        return float(self.weights.sum())

    def ball_mass(self, centers, radius):
        """Mass in balls around ``centers`` (cube-center convention)."""
        pts = self.cubes.centers()
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        out = np.empty(len(centers))
        for i in range(0, len(centers), 256):
            chunk = centers[i : i + 256]
            d2 = ((chunk[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
            out[i : i + 256] = (d2 <= radius * radius) @ self.weights
        return out

    def dumps(self):
        buf = io.StringIO()
        buf.write(f"{self.cubes.level} {self.cubes.dim} {self.cubes.base}\n")
        for c, w in zip(self.cubes.coords, self.weights):
            buf.write(" ".join(str(int(v)) for v in c) + f" {w:.17g}\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        level, dim, base = (int(v) for v in lines[0].split())
        coords, weights = [], []
        for ln in lines[1:]:
            parts = ln.split()
            coords.append([int(v) for v in parts[:dim]])
            weights.append(float(parts[dim]))
        return cls(CubeSet(dim, level, coords, base), weights)


def cantor_stage(base, digits, level, dim=1):
    """Stage-``level`` Cantor construction kept-digit cube set.

    Per axis, the surviving cubes at resolution ``base**-level`` are those
    whose base-``base`` digit strings use only ``digits``; in dimension
    d > 1 the product construction applies the same rule per axis.
    """
    digits = sorted(set(int(d) for d in digits))
    if not digits:
        raise InvalidSpecError("kept digit set is empty")
    if any(not 0 <= d < base for d in digits):
        raise InvalidSpecError("digits must lie in [0, base)")
    if len(digits) == base:
        raise InvalidSpecError("kept digits must be a proper subset")
    if level < 0:
        raise InvalidSpecError("level must be nonnegative")
    axis = np.array([0], dtype=np.int64)
    dig = np.asarray(digits, dtype=np.int64)
    for _ in range(level):
        axis = (axis[:, None] * base + dig[None, :]).ravel()
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=-1)
    return CubeSet(dim, level, coords, base)


def natural_measure(cubes: CubeSet):
    """Uniform unit-mass measure: weight ``1/#cubes`` per cube."""
    n = len(cubes)
    return FractalMeasure(cubes, np.full(n, 1.0 / n))


def frostman_constant(measure: FractalMeasure, a, radii):
    """Estimate ``sup r^-a mu(B(x, r))`` over cube centers and given radii.

    The supremum is restricted to ball centers at the cube centers of the
    measure's support and to the finite radius list, so it is a certified
    lower bound for the true supremum.
    """
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if np.any(radii <= 0) or np.any(radii >= 1):
        raise InvalidSpecError("radii must lie in (0, 1)")
    centers = measure.cubes.centers()
    best = 0.0
    for r in radii:
        best = max(best, float(measure.ball_mass(centers, r).max()) * r ** (-a))
    return best


@dataclass
class BoxDimensionEstimate:
    slope: float
    intercept: float
    scales: np.ndarray
    counts: np.ndarray
    table: list = field(default_factory=list)


def box_count(points, delta):
    """Number of occupied mesh-``delta`` grid cells.

    Stands in for the separated-net count ``|X|_delta`` (they agree up to
    the universal factor 3^d, which cancels in log-log slopes).  Points
    sitting on a cell boundary through float rounding are nudged up by
    1e-9 of a cell so constructions aligned to the mesh count exactly.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cells = np.floor(pts / delta + 1e-9).astype(np.int64)
    return len(np.unique(cells, axis=0))


def box_dimension_estimate(obj, scales, method="cells"):
    """Least-squares slope of ``log N(delta)`` against ``log(1/delta)``.

    ``N(delta)`` counts occupied mesh cells (``method="cells"``, the
    deterministic default) or the greedy separated-net cardinality
    (``method="net"``).  No automatic scale selection happens; the caller
    owns the scale list, and coarse-scale bias is theirs to read off the
    returned table.
    """
    scales = np.asarray(sorted(set(float(s) for s in np.atleast_1d(scales)))[::-1])
    if len(scales) < 3:
        raise InvalidSpecError("need at least 3 distinct scales")
    pts = obj.centers() if isinstance(obj, CubeSet) else np.atleast_2d(np.asarray(obj, dtype=float))
    if method == "cells":
        counts = np.array([box_count(pts, s) for s in scales], dtype=float)
    elif method == "net":
        from .nets import covering_number  # local import to avoid a cycle

        counts = np.array([covering_number(pts, s)[0] for s in scales], dtype=float)
    else:
        raise InvalidSpecError("method must be 'cells' or 'net'")
    x = np.log(1.0 / scales)
    y = np.log(counts)
    slope, intercept = np.polyfit(x, y, 1)
    table = [
        {"delta": float(s), "count": int(c)} for s, c in zip(scales, counts)
    ]
    return BoxDimensionEstimate(float(slope), float(intercept), scales, counts, table)
