"""Separated nets, counting certificates, and dyadic covering machinery.

Conventions
-----------
* ``|X|_delta`` is realized greedily: points are visited in lexicographic
  order and kept when no previously kept point lies strictly closer than
  ``delta``.  Greedy maximality puts the count within the universal factor
  of the true optimum that every downstream comparison tolerates.
* "delta-separated" means all pairwise distances >= delta, checked with a
  relative slack of 1e-9 to absorb rounding (grid-center nets meet the
  bound exactly).
* Grid cubes at level m are the half-open cells ``prod [k 2^-m, (k+1) 2^-m)``
  over the integer lattice (negative cells allowed, so projected clouds
  need not live in the unit box).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpecError
from .fractals import CubeSet, FractalMeasure

__all__ = [
    "DeltaSet",
    "SCover",
    "PigeonholeReport",
    "covering_number",
    "is_delta_s_set",
    "SConditionResult",
    "extract_delta_s_subset",
    "dyadic_s_cover",
    "dyadic_envelope",
    "dyadic_pigeonhole",
]

_SEP_SLACK = 1.0 - 1e-9

try:  # the jitted greedy is ~30x faster; plain python is the fallback
    from numba import njit, types
    from numba.typed import Dict as _NbDict

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False


@dataclass
class DeltaSet:
    """A separated point cloud with optional counting certificate."""

    points: np.ndarray
    delta: float
    s: float | None = None
    C: float | None = None
    certified: bool = False
    witness: tuple | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.size == 0:
            raise InvalidSpecError("empty point set")

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def min_separation(self):
        pts = self.points
        best = np.inf
        for i in range(0, len(pts), 512):
            chunk = pts[i : i + 512]
            d2 = ((chunk[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
            d2[np.arange(len(chunk)), i + np.arange(len(chunk))] = np.inf
            best = min(best, float(d2.min()))
        return float(np.sqrt(best))

    def is_separated(self, delta=None):
        delta = self.delta if delta is None else delta
        if len(self.points) < 2:
            return True
        return self.min_separation() >= delta * _SEP_SLACK

    # -- CSV + JSON sidecar --------------------------------------------------

    def to_csv(self, path):
        path = str(path)
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow([f"x{i}" for i in range(self.dim)])
        for p in self.points:
            w.writerow([f"{v:.17g}" for v in p])
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
        sidecar = {
            "delta": self.delta,
            "s": self.s,
            "C": self.C,
            "certified": self.certified,
            "witness": list(self.witness) if self.witness else None,
        }
        with open(path + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path):
        path = str(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        pts = np.asarray([[float(v) for v in r] for r in rows[1:]])
        with open(path + ".json") as fh:
            side = json.load(fh)
        return cls(
            pts,
            side["delta"],
            side.get("s"),
            side.get("C"),
            side.get("certified", False),
            tuple(side["witness"]) if side.get("witness") else None,
        )


# -- greedy separated subset ---------------------------------------------------


def _as_points(X):
    if isinstance(X, CubeSet):
        return X.centers()
    if isinstance(X, DeltaSet):
        return X.points
    return np.atleast_2d(np.asarray(X, dtype=float))


def covering_number(X, delta):
    """Greedy maximal ``delta``-separated subset and its cardinality.

    Parameters
    ----------
    X : points array, CubeSet or DeltaSet
        Cube sets contribute their cube centers.
    delta : float
        Separation scale, > 0.

    Returns
    -------
    (int, DeltaSet)
        The count and the witness subset, in greedy (lexicographic) order
        of acceptance.
    """
    if delta <= 0:
        raise InvalidSpecError("delta must be positive")
    pts = _as_points(X)
    if pts.size == 0:
        raise InvalidSpecError("empty input")
    if pts.shape[1] > 3:
        raise InvalidSpecError("supports dimensions 1..3")
    order = np.lexsort(pts.T[::-1])
    P = np.ascontiguousarray(pts[order])
    span = max(abs(float(P.min())), abs(float(P.max())))
    use_numba = _HAVE_NUMBA and span / delta < 2.0**19
    mask = _greedy_jit(P, float(delta)) if use_numba else _greedy_py(P, float(delta))
    kept = P[mask]
    return len(kept), DeltaSet(kept, float(delta))


def _greedy_py(P, delta):
    n, d = P.shape
    inv = 1.0 / delta
    d2lim = (delta * _SEP_SLACK) ** 2
    buckets: dict = {}
    mask = np.zeros(n, dtype=bool)
    offs = _neighbor_offsets(d)
    for i in range(n):
        p = P[i]
        key = tuple(int(math.floor(v * inv)) for v in p)
        ok = True
        for off in offs:
            nb = tuple(k + o for k, o in zip(key, off))
            for j in buckets.get(nb, ()):
                if float(((p - P[j]) ** 2).sum()) < d2lim:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            mask[i] = True
            buckets.setdefault(key, []).append(i)
    return mask


def _neighbor_offsets(d):
    rng = (-1, 0, 1)
    if d == 1:
        return [(a,) for a in rng]
    if d == 2:
        return [(a, b) for a in rng for b in rng]
    return [(a, b, c) for a in rng for b in rng for c in rng]


if _HAVE_NUMBA:

    @njit(cache=True)
    def _greedy_jit_impl(P, delta):  # pragma: no cover - jitted
        n, d = P.shape
        inv = 1.0 / delta
        d2lim = (delta * (1.0 - 1e-9)) ** 2
        heads = _NbDict.empty(types.int64, types.int64)
        nxt = np.full(n, -1, np.int64)
        mask = np.zeros(n, np.bool_)
        M = np.int64(1) << np.int64(21)
        OFF = np.int64(1) << np.int64(20)
        for i in range(n):
            c0 = np.int64(np.floor(P[i, 0] * inv)) + OFF
            c1 = (np.int64(np.floor(P[i, 1] * inv)) + OFF) if d > 1 else OFF
            c2 = (np.int64(np.floor(P[i, 2] * inv)) + OFF) if d > 2 else OFF
            ok = True
            for a in range(-1, 2):
                if not ok:
                    break
                for b in range(-1 if d > 1 else 0, 2 if d > 1 else 1):
                    if not ok:
                        break
                    for c in range(-1 if d > 2 else 0, 2 if d > 2 else 1):
                        key = ((c0 + a) * M + (c1 + b)) * M + (c2 + c)
                        if key in heads:
                            j = heads[key]
                            while j != -1:
                                sdist = 0.0
                                for t in range(d):
                                    df = P[i, t] - P[j, t]
                                    sdist += df * df
                                if sdist < d2lim:
                                    ok = False
                                    break
                                j = nxt[j]
                        if not ok:
                            break
            if ok:
                mask[i] = True
                key = (c0 * M + c1) * M + c2
                if key in heads:
                    nxt[i] = heads[key]
                heads[key] = i
        return mask

    def _greedy_jit(P, delta):
        return _greedy_jit_impl(P, delta)

else:  # pragma: no cover

    def _greedy_jit(P, delta):
        return _greedy_py(P, delta)


# -- counting certificates ------------------------------------------------------


@dataclass
class SConditionResult:
    ok: bool
    witness: tuple | None  # (level, cell coords, count, cap)
    worst_ratio: float     # max over cells of count / (r/delta)^s
    fitted_C: float        # smallest admissible constant for these points

    def __bool__(self):
        return self.ok


def is_delta_s_set(P, s, C, delta=None):
    """Check ``#(P cap Q) <= C (r/delta)^s`` over grid cubes of all scales.

    Scans every dyadic level with cell side ``r in [delta, 1]``; returns
    the first violating cell (coarsest level, lexicographic) if any.
    """
    if isinstance(P, DeltaSet):
        pts, delta = P.points, P.delta if delta is None else delta
    else:
        pts = _as_points(P)
        if delta is None:
            raise InvalidSpecError("delta required for raw point input")
    n_levels = int(math.floor(math.log2(1.0 / delta) + 1e-9))
    ok = True
    witness = None
    worst = 0.0
    for m in range(0, n_levels + 1):
        r = 2.0 ** (-m)
        cap = C * (r / delta) ** s
        cells = np.floor(pts * 2.0**m).astype(np.int64)
        uniq, counts = np.unique(cells, axis=0, return_counts=True)
        ratio = counts / (r / delta) ** s
        worst = max(worst, float(ratio.max()))
        bad = counts > cap + 1e-9
        if ok and bad.any():
            order = np.lexsort(uniq[bad].T[::-1])
            first = order[0]
            witness = (
                m,
                tuple(int(v) for v in uniq[bad][first]),
                int(counts[bad][first]),
                float(cap),
            )
            ok = False
    return SConditionResult(ok, witness, worst, worst)


# -- separated subset extraction -----------------------------------------------


def extract_delta_s_subset(measure: FractalMeasure, delta, s, box=None):
    """Top-down pruned separated subset carrying an ``(delta, s, 2)`` certificate.

    Starting from the centers of the level-n grid cells (``delta = 2^-n``)
    that meet the weighted support, each coarser level m prunes every cell
    down to at most ``2 (2^(n-m))^s`` points, keeping lexicographically
    smallest, while the cover bookkeeping swaps the pruned cell in for its
    descendants.  The output is delta-separated by construction (distinct
    level-n cell centers) and re-certified via :func:`is_delta_s_set`.

    Returns
    -------
    (DeltaSet, dict)
        The certified subset and a report holding the surviving cover
        cells per level plus the prune trace.
    """
    n = _exact_log2(delta)
    if measure.mass <= 0:
        raise InvalidSpecError("measure has zero mass")
    centers = measure.cubes.centers()
    keep = measure.weights > 0
    if box is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in box)
        keep &= np.all((centers >= lo) & (centers <= hi), axis=1)
    centers = centers[keep]
    if len(centers) == 0:
        raise InvalidSpecError("no mass in the requested region")
    cells = np.unique(np.floor(centers * 2.0**n).astype(np.int64), axis=0)
    pts = (cells + 0.5) * 2.0 ** (-n)
    order = np.lexsort(pts.T[::-1])
    pts, cells = pts[order], cells[order]

    cover = {n: {tuple(int(v) for v in c) for c in cells}}
    alive = np.ones(len(pts), dtype=bool)
    prunes = []
    for m in range(n - 1, -1, -1):
        cap = int(math.floor(2.0 * 2.0 ** ((n - m) * s) + 1e-9))
        parent = cells[alive] >> (n - m)
        live_idx = np.flatnonzero(alive)
        uniq, inverse, counts = np.unique(
            parent, axis=0, return_inverse=True, return_counts=True
        )
        for u in np.flatnonzero(counts > cap):
            members = live_idx[inverse == u]  # already in lex order
            alive[members[cap:]] = False
            bad_cell = tuple(int(v) for v in uniq[u])
            prunes.append((m, bad_cell, int(counts[u]), cap))
            # bookkeeping: the pruned cell replaces all its descendants
            for lev in [k for k in cover if k > m]:
                shift = lev - m
                cover[lev] = {
                    c for c in cover[lev]
                    if tuple(v >> shift for v in c) != bad_cell
                }
            cover.setdefault(m, set()).add(bad_cell)
    out = DeltaSet(pts[alive], float(delta), s=float(s))
    check = is_delta_s_set(out, s, 2.0)
    out.C = 2.0
    out.certified = bool(check.ok) and out.is_separated()
    out.witness = check.witness
    report = {
        "cover": {lev: sorted(cover[lev]) for lev in sorted(cover) if cover[lev]},
        "prunes": prunes,
        "n_start": int(len(pts)),
        "n_kept": int(alive.sum()),
    }
    return out, report


def _exact_log2(delta):
    n = round(math.log2(1.0 / delta))
    if abs(2.0 ** (-n) - delta) > 1e-12 * delta:
        raise InvalidSpecError("delta must be a power of two")
    return n


# -- coarsening covers -----------------------------------------------------------


@dataclass
class SCover:
    """Disjoint grid squares grouped by level, with their s-content."""

    levels: dict            # level -> sorted list of coord tuples
    s: float
    content: float
    eps: float
    met_budget: bool
    dim: int

    def all_cubes(self):
        for lev in sorted(self.levels):
            for c in self.levels[lev]:
                yield lev, c

    def covers(self, cubeset: CubeSet):
        """True if the union of cover squares contains ``cubeset``.

        Checked exactly by refining the cube set to the finest level
        present and asking each fine cell for an ancestor in the cover.
        """
        have = {lev: set(cs) for lev, cs in self.levels.items()}
        if cubeset.base != 2:
            cubeset = dyadic_envelope(cubeset, max(have))
        finest = max(max(have), cubeset.level)
        fine = cubeset if cubeset.level == finest else _refine(cubeset, finest)
        for c in fine.coords:
            hit = False
            for lev in have:
                key = tuple(int(v) >> (finest - lev) for v in c)
                if key in have[lev]:
                    hit = True
                    break
            if not hit:
                return False
        return True

    def s_condition_ok(self):
        """Exhaustive check: level-l ancestors hold <= 2^((k-l)s) level-k squares."""
        levels = sorted(self.levels)
        for k in levels:
            arr = np.asarray(self.levels[k], dtype=np.int64)
            for l in range(0, k):
                parents = arr >> (k - l)
                _, counts = np.unique(parents, axis=0, return_counts=True)
                if counts.max() > 2.0 ** ((k - l) * self.s) + 1e-9:
                    return False
        return True

    def disjoint(self):
        seen = []
        for lev, c in self.all_cubes():
            for lev2, c2 in seen:
                lo, hi = (lev, lev2) if lev >= lev2 else (lev2, lev)
                fine = c if lev >= lev2 else c2
                coarse = c2 if lev >= lev2 else c
                if tuple(v >> (hi - lo) for v in fine) == coarse:
                    return False
            seen.append((lev, c))
        return True


def dyadic_envelope(cubeset: CubeSet, depth):
    """Level-``depth`` binary-grid cubes intersecting a cube set.

    Lets non-binary fixtures (base 3 etc.) enter the coarsening machinery.
    """
    side = cubeset.side
    out = set()
    scale = 2.0**depth
    for lo in cubeset.lowers():
        lo_cell = np.floor(lo * scale).astype(np.int64)
        hi_cell = np.ceil((lo + side) * scale - 1e-12).astype(np.int64)
        ranges = [range(a, max(b, a + 1)) for a, b in zip(lo_cell, hi_cell)]
        if cubeset.dim == 1:
            out.update((int(a),) for a in ranges[0])
        elif cubeset.dim == 2:
            out.update((int(a), int(b)) for a in ranges[0] for b in ranges[1])
        else:
            out.update(
                (int(a), int(b), int(c))
                for a in ranges[0] for b in ranges[1] for c in ranges[2]
            )
    return CubeSet(cubeset.dim, depth, sorted(out), base=2)


def dyadic_s_cover(X: CubeSet, s, max_depth, eps):
    """Coarsen a grid cover until the s-dimensional condition holds.

    Starts from the level-``max_depth`` binary cover of ``X`` and
    repeatedly replaces the squares under a violating ancestor by the
    ancestor itself (coarsest level first, lexicographic order within a
    level) until no ancestor holds more than ``2^((k-l)s)`` level-k
    squares.  Each merge can only lower the s-content, so the final
    content is reported against the ``eps`` budget rather than enforced.
    """
    X = _to_binary(X)
    if X.base == 2:
        if X.level > max_depth:
            raise InvalidSpecError("cube set finer than max depth")
        start = X if X.level == max_depth else _refine(X, max_depth)
    else:
        start = dyadic_envelope(X, max_depth)
    cover = {max_depth: {tuple(int(v) for v in c) for c in start.coords}}

    while True:
        viol = _first_violation(cover, s)
        if viol is None:
            break
        l, cell = viol
        for lev in [k for k in list(cover) if k > l]:
            shift = lev - l
            cover[lev] = {
                c for c in cover[lev] if tuple(v >> shift for v in c) != cell
            }
            if not cover[lev]:
                del cover[lev]
        cover.setdefault(l, set()).add(cell)

    content = sum(
        len(cs) * (2.0 ** (-lev)) ** s for lev, cs in cover.items()
    )
    return SCover(
        {lev: sorted(cs) for lev, cs in cover.items() if cs},
        float(s),
        float(content),
        float(eps),
        bool(content < eps),
        X.dim,
    )


def _to_binary(X: CubeSet):
    """Relabel power-of-two bases onto the binary grid (exact); otherwise
    return the set unchanged (callers fall back to the envelope)."""
    if X.base == 2 or X.base & (X.base - 1) != 0:
        return X
    log2b = X.base.bit_length() - 1
    return CubeSet(X.dim, X.level * log2b, X.coords, base=2)


def _refine(X: CubeSet, depth):
    shift = depth - X.level
    per_axis = np.arange(2**shift, dtype=np.int64)
    grids = np.meshgrid(*([per_axis] * X.dim), indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=-1)
    coords = (X.coords[:, None, :] << shift) + offs[None, :, :]
    return CubeSet(X.dim, depth, coords.reshape(-1, X.dim), base=2)


def _first_violation(cover, s):
    levels = sorted(cover)
    if not levels:
        return None
    for l in range(0, levels[-1]):
        worst = {}
        for k in levels:
            if k <= l:
                continue
            cap = 2.0 ** ((k - l) * s) + 1e-9
            arr = np.asarray(sorted(cover[k]), dtype=np.int64)
            parents = arr >> (k - l)
            uniq, counts = np.unique(parents, axis=0, return_counts=True)
            for u, c in zip(uniq, counts):
                if c > cap:
                    key = tuple(int(v) for v in u)
                    worst.setdefault(key, True)
        if worst:
            return l, sorted(worst)[0]
    return None


# -- pigeonholing ---------------------------------------------------------------


@dataclass
class PigeonholeReport:
    bucket_index: int
    value: int                 # 2^bucket_index
    members: list
    loss_factor: int           # J
    total: int
    bucket_sizes: dict = field(default_factory=dict)

    def bounds_ok(self):
        lo = self.value * len(self.members)
        hi = self.loss_factor * 2 * self.value * len(self.members)
        return lo <= self.total <= hi


def dyadic_pigeonhole(counts):
    """Pick the dyadic count class maximizing ``2^j * #class``.

    ``counts`` maps group keys to integer counts >= 1.  Ties between
    classes break toward the larger exponent.
    """
    if not counts:
        raise InvalidSpecError("empty count map")
    items = sorted(counts.items(), key=lambda kv: repr(kv[0]))
    if any(v < 1 for _, v in items):
        raise InvalidSpecError("counts must be >= 1")
    buckets: dict = {}
    for k, v in items:
        buckets.setdefault(int(math.floor(math.log2(v))), []).append(k)
    best = max(buckets, key=lambda j: (2**j * len(buckets[j]), j))
    total = sum(v for _, v in items)
    maxc = max(v for _, v in items)
    J = int(math.floor(math.log2(maxc))) + 1
    return PigeonholeReport(
        bucket_index=best,
        value=2**best,
        members=buckets[best],
        loss_factor=J,
        total=total,
        bucket_sizes={j: len(m) for j, m in sorted(buckets.items())},
    )
