"""Frame-aligned frequency boxes: parts, cone families, attachment, rescaling.

A plank is a box in frequency space described in the moving frame at an
anchor angle: three per-axis ranges on the frame coordinates
``xi_i = xi . e_i(theta)``.  Ranges may constrain the coordinate itself or
its absolute value (two-sided bands), and may be open at the lower end so
that part families tile their slab exactly.

Sign-restricted cone planks store the ``xi_1 > 0, xi_3 > 0`` representative
with a symmetry flag; membership then tests absolute values, which folds
the four signed copies into one object.

All interval certificates (coverage, disjointness) run on samples with a
documented safety margin ``eta = 1e-9``; exact intersection of boxes from
two different frames is deliberately out of scope.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .curves import FULL_TURN, LightConeCurve, cone_distance, frenet_frame
from .errors import InvalidSpecError
from .fractals import CubeSet

__all__ = [
    "ETA_MARGIN",
    "AxisRange",
    "Plank",
    "ConePlank",
    "ConeRegion",
    "ConeMargins",
    "DESK_MARGINS",
    "PAPER_MARGINS",
    "AttachmentMap",
    "OverlapReport",
    "build_part_planks",
    "part_labels",
    "overlap_count",
    "same_or_disjoint_check",
    "sqrt_plank",
    "narrow_plank",
    "wide_plank",
    "build_cone_family",
    "cone_lattice",
    "cone_region_membership",
    "attach",
    "lorentz_rescale",
    "family_to_json",
    "family_from_json",
    "overlap_histogram_csv",
]

#: safety margin added to sampled interval certificates
ETA_MARGIN = 1e-9

_MODEL = LightConeCurve((0.0, FULL_TURN))


@dataclass(frozen=True)
class AxisRange:
    """Range for one frame coordinate.

    ``two_sided`` tests ``|t|`` instead of ``t``; ``lo_open`` makes the
    lower comparison strict, which is how adjacent bands avoid double
    counting a shared boundary.
    """

    lo: float
    hi: float
    two_sided: bool = True
    lo_open: bool = False

    def __post_init__(self):
        if not self.hi >= self.lo:
            raise InvalidSpecError(f"empty axis range [{self.lo}, {self.hi}]")

    def test(self, t, margin=0.0):
        v = np.abs(t) if self.two_sided else np.asarray(t, dtype=float)
        lower = (v > self.lo - margin) if self.lo_open else (v >= self.lo - margin)
        return lower & (v <= self.hi + margin)

    def sample(self, n, rng):
        v = rng.uniform(self.lo, self.hi, n)
        if self.two_sided and self.lo >= 0.0:
            v = v * np.where(rng.random(n) < 0.5, 1.0, -1.0)
        return v


class Plank:
    """Box in frequency space aligned to the frame at an anchor angle."""

    def __init__(self, frame, ranges, meta=None):
        self.frame = frame
        self.axes = frame.matrix() if hasattr(frame, "matrix") else np.asarray(frame, dtype=float)
        if self.axes.shape != (3, 3):
            raise InvalidSpecError("frame must provide a 3x3 axis matrix")
        if len(ranges) != 3:
            raise InvalidSpecError("three axis ranges required")
        self.ranges = tuple(ranges)
        self.meta = dict(meta or {})

    @property
    def theta(self):
        return getattr(self.frame, "theta", self.meta.get("theta"))

    def coords(self, xi):
        """Frame coordinates of ambient points, shape (..., 3)."""
        return np.asarray(xi, dtype=float) @ self.axes.T

    def contains(self, xi, margin=0.0):
        c = self.coords(xi)
        out = self.ranges[0].test(c[..., 0], margin)
        for i in (1, 2):
            out &= self.ranges[i].test(c[..., i], margin)
        return out

    def sample(self, n, rng):
        cols = [r.sample(n, rng) for r in self.ranges]
        return np.stack(cols, axis=-1) @ self.axes

    def corners(self):
        """The 8 vertices; exact for convex planks.

        A two-sided range touching zero spans the full symmetric interval,
        so its endpoints are ``-hi, hi``; a genuine band (two slabs) is not
        convex and only its positive representative's vertices are
        returned.
        """
        ends = []
        for r in self.ranges:
            if r.two_sided and r.lo == 0.0:
                ends.append((-r.hi, r.hi))
            else:
                ends.append((r.lo, r.hi))
        pts = [(a, b, c) for a in ends[0] for b in ends[1] for c in ends[2]]
        return np.asarray(pts, dtype=float) @ self.axes

    def bounding_radius(self):
        return float(
            np.sqrt(sum(max(abs(r.lo), abs(r.hi)) ** 2 for r in self.ranges))
        )

    def dilated(self, C):
        """Concentric ``C``-dilation (band lower ends shrink by ``C``)."""
        out = []
        for r in self.ranges:
            lo = r.lo / C if r.lo > 0 else r.lo * C
            out.append(AxisRange(lo, r.hi * C, r.two_sided, r.lo_open))
        return Plank(self.frame, out, {**self.meta, "dilation": C})

    def to_dict(self):
        d = {
            "theta": self.theta,
            "ranges": [
                {
                    "lo": r.lo,
                    "hi": r.hi,
                    "two_sided": r.two_sided,
                    "lo_open": r.lo_open,
                }
                for r in self.ranges
            ],
            "dilation": self.meta.get("dilation", 1.0),
        }
        for key in ("j", "k", "kind", "delta", "K", "lam"):
            if key in self.meta:
                d[key] = self.meta[key]
        return d


class ConePlank(Plank):
    """Plank from a conical family, carrying its (j, k) indices."""

    def __init__(self, frame, ranges, j, k, meta=None):
        if not 0 <= k <= j:
            raise InvalidSpecError("need 0 <= k <= j")
        super().__init__(frame, ranges, {**(meta or {}), "j": j, "k": k})
        self.j = int(j)
        self.k = int(k)


# -- slab decomposition into parts -------------------------------------------


def _part_ranges(delta, K, kind, lam=None):
    if not 1.0 <= K <= 1.0 / delta:
        raise InvalidSpecError("K must lie in [1, 1/delta]")
    invK = 1.0 / K
    r1 = AxisRange(0.0, delta)
    if kind == "low":
        return (r1, AxisRange(0.0, invK), AxisRange(0.0, invK))
    if kind == "high":
        return (r1, AxisRange(invK, 1.0, lo_open=True), AxisRange(0.0, 1.0))
    if kind == "sqrt":
        half = math.sqrt(delta)
        return (r1, AxisRange(0.0, half), AxisRange(invK, 1.0, lo_open=True))
    if kind == "mixed":
        if lam is None:
            raise InvalidSpecError("mixed part needs lam")
        half = math.sqrt(delta)
        if not (half < lam <= invK):
            raise InvalidSpecError(
                f"lam={lam} outside the dyadic window ({half}, {invK}]"
            )
        lo = max(lam / 2.0, half)
        return (
            r1,
            AxisRange(lo, lam, lo_open=True),
            AxisRange(invK, 1.0, lo_open=True),
        )
    raise InvalidSpecError(f"unknown part kind {kind!r}")


def build_part_planks(curve, theta, delta, K, kind, lam=None):
    """One part of the unit slab at ``theta``: high, low, sqrt or mixed.

    The slab ``|xi_1| <= delta, |xi_2| <= 1, |xi_3| <= 1`` splits exactly
    into low (both transverse coordinates below 1/K), high (``|xi_2|``
    above 1/K), the sqrt part, and dyadic mixed bands; shared boundaries
    belong to exactly one part via half-open ranges.
    """
    fr = frenet_frame(curve, theta)
    ranges = _part_ranges(delta, K, kind, lam)
    meta = {"kind": kind, "delta": delta, "K": K, "theta": theta}
    if lam is not None:
        meta["lam"] = lam
    return Plank(fr, ranges, meta)


def mixed_lambdas(delta, K):
    """Dyadic band tops in ``(sqrt(delta), 1/K]``, increasing."""
    out = []
    lam = 2.0 ** math.floor(math.log2(1.0 / K) + 1e-12)
    while lam > math.sqrt(delta) * (1 + 1e-12):
        out.append(lam)
        lam /= 2.0
    return out[::-1]


def part_family(curve, theta, delta, K):
    """All parts of the slab at ``theta`` (exact partition)."""
    parts = [
        build_part_planks(curve, theta, delta, K, "low"),
        build_part_planks(curve, theta, delta, K, "high"),
        build_part_planks(curve, theta, delta, K, "sqrt"),
    ]
    for lam in mixed_lambdas(delta, K):
        parts.append(build_part_planks(curve, theta, delta, K, "mixed", lam))
    return parts


def part_labels(parts, xi):
    """Indicator matrix (n_points, n_parts); rows should sum to 1 inside
    the parent slab."""
    return np.stack([p.contains(xi) for p in parts], axis=-1)


# -- overlap counting ----------------------------------------------------------


@dataclass
class OverlapReport:
    max_overlap: int
    histogram: dict
    n_samples: int
    n_in_union: int
    counts: np.ndarray = field(repr=False, default=None)
    points: np.ndarray = field(repr=False, default=None)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["overlap", "n_points"])
            for k in sorted(self.histogram):
                w.writerow([k, self.histogram[k]])


def overlap_count(planks, samples, rng=None, box=None, margin=0.0, keep_points=False):
    """Pointwise indicator-sum statistics over a plank family.

    Parameters
    ----------
    planks : sequence of Plank
    samples : int or points array
        An integer draws uniform samples from ``box`` (default: the
        family's bounding cube); an array is used as is.
    rng : numpy Generator, required when sampling.
    margin : float
        Interval slack passed to membership tests.

    Returns
    -------
    OverlapReport
        Maximum and histogram of the indicator sum over sampled points
        lying in at least one plank.
    """
    if len(planks) == 0:
        raise InvalidSpecError("empty plank family")
    if isinstance(samples, (int, np.integer)):
        if rng is None:
            raise InvalidSpecError("rng required for Monte-Carlo sampling")
        if box is None:
            r = max(p.bounding_radius() for p in planks)
            box = (-r, r)
        pts = rng.uniform(box[0], box[1], (int(samples), 3))
    else:
        pts = np.asarray(samples, dtype=float)
    counts = _indicator_sums(planks, pts, margin)
    inside = counts > 0
    vals, freq = np.unique(counts[inside], return_counts=True)
    return OverlapReport(
        max_overlap=int(counts.max()) if inside.any() else 0,
        histogram={int(v): int(f) for v, f in zip(vals, freq)},
        n_samples=len(pts),
        n_in_union=int(inside.sum()),
        counts=counts if keep_points else None,
        points=pts if keep_points else None,
    )


def _indicator_sums(planks, pts, margin=0.0):
    """Σ_planks 1_plank over points; float32 blocked matmuls."""
    pts32 = np.ascontiguousarray(pts, dtype=np.float32)
    counts = np.zeros(len(pts), dtype=np.int32)
    B = 64
    for i in range(0, len(planks), B):
        block = planks[i : i + B]
        M = np.concatenate([p.axes.T.astype(np.float32) for p in block], axis=1)
        C = pts32 @ M  # (n, 3*B)
        ok = np.ones((len(pts), len(block)), dtype=bool)
        for a in range(3):
            col = C[:, a::3]
            for idx, p in enumerate(block):
                ok[:, idx] &= p.ranges[a].test(col[:, idx], margin)
        counts += ok.sum(axis=1, dtype=np.int32)
    return counts


# -- essentially-same / disjoint classification --------------------------------


def narrow_plank(curve, theta, delta, lam, K):
    """Sign-restricted dyadic band plank (thin normal width ``delta``)."""
    fr = frenet_frame(curve, theta)
    return Plank(
        fr,
        (
            AxisRange(0.0, delta),
            AxisRange(lam / 2.0, lam, two_sided=False),
            AxisRange(1.0 / K, 1.0, two_sided=False),
        ),
        {"kind": "narrow", "delta": delta, "lam": lam, "K": K, "theta": theta},
    )


def _narrow_dilated(curve, theta, delta, lam, K, C):
    fr = frenet_frame(curve, theta)
    return Plank(
        fr,
        (
            AxisRange(0.0, C * delta),
            AxisRange(lam / (2.0 * C), C * lam, two_sided=False),
            AxisRange(1.0 / (C * K), C, two_sided=False),
        ),
        {"kind": "narrow", "dilation": C, "theta": theta},
    )


def wide_plank(curve, theta, lam, K, C=1.0):
    """Aperture-``lam`` plank with matching thickness ``lam^2``."""
    fr = frenet_frame(curve, theta)
    return Plank(
        fr,
        (
            AxisRange(0.0, C * lam * lam),
            AxisRange(0.0, C * lam),
            AxisRange(1.0 / (C * K), C, two_sided=False),
        ),
        {"kind": "wide", "lam": lam, "K": K, "dilation": C, "theta": theta},
    )


def sqrt_plank(curve, omega, delta, K, C=1.0):
    """The scale-matched plank of aperture ``sqrt(delta)`` used for
    superposition benches: thickness C*delta, aperture C*sqrt(delta),
    radial range [1/(CK), C]."""
    fr = frenet_frame(curve, omega)
    return Plank(
        fr,
        (
            AxisRange(0.0, C * delta),
            AxisRange(0.0, C * math.sqrt(delta)),
            AxisRange(1.0 / (C * K), C, two_sided=False),
        ),
        {"kind": "sqrt-cover", "delta": delta, "K": K, "dilation": C, "theta": omega},
    )


@dataclass
class SameOrDisjoint:
    classification: str      # 'essentially-same' | 'disjoint' | 'neither'
    contained: bool
    separated: bool
    n_samples: int


def same_or_disjoint_check(
    curve, theta, theta_p, delta, lam, K, C1=16.0, C2=8.0,
    n_samples=100_000, rng=None, kind="narrow",
):
    """Classify two band planks as essentially the same or disjoint.

    Containment (``'essentially-same'``) is exact: the 8 vertices of the
    plank at ``theta`` are tested inside the C1-dilation at ``theta_p``
    (both convex).  Disjointness of the two C1-dilations is a sampling
    certificate with ``n_samples`` points each way and margin
    ``ETA_MARGIN``.
    """
    rng = rng or np.random.default_rng(0)
    if kind == "narrow":
        plain = narrow_plank(curve, theta, delta, lam, K)
        big = _narrow_dilated(curve, theta, delta, lam, K, C1)
        big_p = _narrow_dilated(curve, theta_p, delta, lam, K, C1)
    elif kind == "sqrt":
        plain = sqrt_plank(curve, theta, delta, K)
        big = sqrt_plank(curve, theta, delta, K, C1)
        big_p = sqrt_plank(curve, theta_p, delta, K, C1)
    else:
        raise InvalidSpecError("kind must be 'narrow' or 'sqrt'")
    contained = bool(np.all(big_p.contains(plain.corners(), margin=ETA_MARGIN)))
    if contained:
        return SameOrDisjoint("essentially-same", True, False, 0)
    # disjointness certificate: hits against the eta-enlarged partner block it
    a_in_b = big_p.contains(big.sample(n_samples, rng), margin=ETA_MARGIN)
    b_in_a = big.contains(big_p.sample(n_samples, rng), margin=ETA_MARGIN)
    separated = not bool(a_in_b.any() or b_in_a.any())
    return SameOrDisjoint(
        "disjoint" if separated else "neither", False, separated, 2 * n_samples
    )


# -- conical families -----------------------------------------------------------


@dataclass(frozen=True)
class ConeMargins:
    """Dimensionless range coefficients for conical planks.

    For ``k < j`` the plank at angle ``theta`` is (sign-restricted)

        xi_1 in [normal_lo, normal_hi] * 2^(j-k)
        |xi_2| <= aperture(c) * 2^(j-k/2)
        xi_3 in [radial_lo(k), radial_hi] * 2^j

    and for ``k = j`` the normal range is ``|xi_1| <= normal_jj``.  When
    ``aperture`` is None it scales with the lattice constant as
    ``0.75 c`` (wide enough for nearest-lattice coverage, narrow enough
    for the distance band and the O(1) overlap).  The coarse radial floor
    applies below ``k = 2``, where points of the shell sit much closer to
    the apex.
    """

    normal_lo: float = 1.0 / 16.0
    normal_hi: float = 1.0
    normal_jj: float = 1.0
    aperture: float | None = None
    radial_lo: float = 3.0 / 8.0
    radial_lo_coarse: float = 1.0 / 8.0
    radial_hi: float = 9.0 / 8.0
    coarse_k: int = 2

    def aperture_coeff(self, c):
        return 0.75 * c if self.aperture is None else self.aperture

    def radial_floor(self, k):
        return self.radial_lo_coarse if k < self.coarse_k else self.radial_lo


DESK_MARGINS = ConeMargins()
#: the original astronomically-thin formulas (2^±10 slabs, 2^-100 aperture)
PAPER_MARGINS = ConeMargins(
    normal_lo=2.0**-10,
    normal_hi=2.0**10,
    normal_jj=2.0**10,
    aperture=2.0**-100,
    radial_lo=2.0**-10,
    radial_lo_coarse=2.0**-10,
    radial_hi=2.0**10,
)


def cone_lattice(k, c):
    """Angle lattice with spacing ``c 2^(-k/2)`` covering one full turn."""
    if not 0.0 < c <= 0.25:
        raise InvalidSpecError("lattice constant c must lie in (0, 1/4]")
    return np.arange(0.0, FULL_TURN, c * 2.0 ** (-k / 2.0))


def cone_plank_ranges(j, k, c, margins=DESK_MARGINS):
    if k > j:
        raise InvalidSpecError("need k <= j")
    ap = margins.aperture_coeff(c) * 2.0 ** (j - k / 2.0)
    radial = AxisRange(
        margins.radial_floor(k) * 2.0**j, margins.radial_hi * 2.0**j
    )
    if k == j:
        normal = AxisRange(0.0, margins.normal_jj)
    else:
        normal = AxisRange(
            margins.normal_lo * 2.0 ** (j - k), margins.normal_hi * 2.0 ** (j - k)
        )
    return (normal, AxisRange(0.0, ap), radial)


def build_cone_family(j, k, c=0.25, margins=DESK_MARGINS, curve=None):
    """The family of conical planks at shell ``j`` and distance class ``k``.

    One plank per lattice angle; membership folds the four sign copies
    (two nappes times two sides of the cone) through the two-sided axis
    ranges.
    """
    curve = curve or _MODEL
    ranges = cone_plank_ranges(j, k, c, margins)
    out = []
    for th in cone_lattice(k, c):
        fr = frenet_frame(curve, float(th))
        out.append(ConePlank(fr, ranges, j, k, {"theta": float(th), "c": c}))
    return out


@dataclass(frozen=True)
class ConeRegion:
    """Radial-shell/distance-band region around the cone.

    ``C``-dilated form: ``|xi|`` within ``[2^(j-1)/C, C 2^j]`` and
    ``dist(xi, cone)`` within ``[2^(-k-3/2)|xi|/C, C 2^(-k-1/2)|xi|]``
    (lower bound dropped at ``k = j``).
    """

    j: int
    k: int
    C: float = 1.0

    def __post_init__(self):
        if self.C < 1.0:
            raise InvalidSpecError("dilation factor must be >= 1")
        if not 0 <= self.k <= self.j:
            raise InvalidSpecError("need 0 <= k <= j")

    def contains(self, xi):
        xi = np.asarray(xi, dtype=float)
        r = np.linalg.norm(xi, axis=-1)
        d = cone_distance(xi)
        ok = (r >= 2.0 ** (self.j - 1) / self.C) & (r <= self.C * 2.0**self.j)
        ok &= d <= self.C * 2.0 ** (-self.k - 0.5) * r
        if self.k < self.j:
            ok &= d >= 2.0 ** (-self.k - 1.5) * r / self.C
        return ok

    def sample(self, n, rng):
        """Uniform-in-parameters points of the region (both nappes/sides)."""
        r = 2.0**self.j * (0.5 + 0.5 * rng.random(n))
        top = 2.0 ** (-self.k - 0.5)
        lo = 0.0 if self.k == self.j else 2.0 ** (-self.k - 1.5)
        frac = lo + (top - lo) * rng.random(n)
        frac = np.minimum(frac, 2.0**-0.5 - 1e-12)
        d = frac * r
        rr = np.sqrt(r * r - d * d)
        om = rng.random(n) * FULL_TURN
        nappe = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        side = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        _, _, e3, _ = _MODEL.frame_vectors(om)
        e1 = _MODEL.frame_vectors(om)[0].copy()
        foot = rr[:, None] * e3
        foot[:, 2] *= nappe
        e1[:, 2] *= nappe
        return foot + (d * side)[:, None] * e1


def cone_region_membership(xi, region: ConeRegion):
    """Exact band predicate (no sampling margin)."""
    return region.contains(xi)


# -- attachment lattices ---------------------------------------------------------


@dataclass(frozen=True)
class AttachmentMap:
    """Three nested lattices and their half-open nearest-point attachment.

    Scales: fine ``delta`` (angles), middle ``delta/lam``, coarse ``lam``.
    A value attaches to the unique lattice point with residual in
    ``(-h/2, h/2]``.  The coarse attachment of a fine value is defined by
    composition through the middle lattice.
    """

    delta: float
    lam: float

    def __post_init__(self):
        if not 0.0 < self.delta < self.lam < 1.0:
            raise InvalidSpecError("need 0 < delta < lam < 1")

    @property
    def middle_spacing(self):
        return self.delta / self.lam

    def snap(self, value, spacing):
        m = math.ceil(value / spacing - 0.5)
        return m * spacing

    def attach(self, value, level):
        if not 0.0 <= value <= 1.0:
            raise InvalidSpecError("value must lie in [0, 1]")
        if level == "theta->tau":
            return self.snap(value, self.middle_spacing)
        if level == "tau->sigma":
            return self.snap(value, self.lam)
        if level == "theta->sigma":
            return self.snap(self.snap(value, self.middle_spacing), self.lam)
        raise InvalidSpecError(f"unknown attachment level {level!r}")


def attach(value, amap: AttachmentMap, level):
    return amap.attach(value, level)


# -- anisotropic frame rescaling --------------------------------------------------


def lorentz_rescale(curve, theta_anchor, K, xi, inverse=False):
    """Scale frame coordinates at the anchor by (1, K, K^2).

    Linear and invertible; ``inverse=True`` applies the reciprocal
    factors.  The first frame axis is left unscaled.
    """
    if K == 0:
        raise InvalidSpecError("scale factor K must be nonzero")
    fr = frenet_frame(curve, theta_anchor)
    E = fr.matrix()
    coords = np.asarray(xi, dtype=float) @ E.T
    fac = np.array([1.0, K, K * K])
    if inverse:
        fac = 1.0 / fac
    return (coords * fac) @ E


# -- serialization -----------------------------------------------------------------


def family_to_json(planks, path=None):
    payload = [p.to_dict() for p in planks]
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def family_from_json(text_or_path, curve=None):
    curve = curve or _MODEL
    try:
        payload = json.loads(text_or_path)
    except (json.JSONDecodeError, TypeError):
        with open(text_or_path) as fh:
            payload = json.load(fh)
    out = []
    for d in payload:
        fr = frenet_frame(curve, d["theta"])
        ranges = tuple(
            AxisRange(r["lo"], r["hi"], r["two_sided"], r["lo_open"])
            for r in d["ranges"]
        )
        meta = {k: d[k] for k in ("j", "k", "kind", "delta", "K", "lam") if k in d}
        meta["theta"] = d["theta"]
        meta["dilation"] = d.get("dilation", 1.0)
        if "j" in d and "k" in d:
            out.append(ConePlank(fr, ranges, d["j"], d["k"], meta))
        else:
            out.append(Plank(fr, ranges, meta))
    return out


def overlap_histogram_csv(report: OverlapReport, path):
    report.to_csv(path)


def region_samples_on_cubes(cubes: CubeSet, rng, per_cube=4):
    """Uniform samples inside the cubes of a set (mask-style helper)."""
    lo = cubes.lowers()
    side = cubes.side
    reps = np.repeat(lo, per_cube, axis=0)
    return reps + rng.random(reps.shape) * side
