"""Unit-speed spherical curves, their moving frames, and cone geometry.

A curve here is a C^2 map ``gamma`` from an interval into the unit sphere,
normalized to unit speed, with the non-degeneracy requirement
``det(gamma, gamma', gamma'') != 0``.  The moving frame is

    e1 = gamma,  e2 = gamma',  e3 = gamma x gamma',

an orthonormal right-handed triple, and ``tau = det(gamma, gamma', gamma'')``
plays the role of torsion (the frame satisfies e1' = e2,
e2' = -e1 + tau e3, e3' = -tau e2).

The model curve is the circle generating the standard 45-degree cone; its
frame has closed forms and ``tau = 1`` identically.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    DomainError,
    InvalidSpecError,
    NonDegeneracyError,
    SingularTorsionError,
)

__all__ = [
    "SQRT2",
    "FULL_TURN",
    "DET_FLOOR",
    "FrenetFrame",
    "SphericalCurve",
    "LightConeCurve",
    "TabulatedCurve",
    "ReparametrizedFrame",
    "ConeModel",
    "frenet_frame",
    "frame_inner_products",
    "cone_distance",
    "nearest_cone_point",
    "reparametrize_binormal",
    "load_curve_csv",
]

SQRT2 = float(np.sqrt(2.0))
#: parameter length of one full turn of the model cone circle
FULL_TURN = SQRT2 * np.pi
#: determinants below this are treated as degeneracy violations
DET_FLOOR = 1e-8


@dataclass(frozen=True)
class FrenetFrame:
    """Moving frame at a single parameter value."""

    theta: float
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    tau: float

    def matrix(self):
        """Rows e1, e2, e3."""
        return np.stack([self.e1, self.e2, self.e3])

    def orthonormality_defect(self):
        """Max abs deviation of the Gram matrix from the identity."""
        m = self.matrix()
        return float(np.abs(m @ m.T - np.eye(3)).max())

    def validate(self, tol=1e-10):
        if self.orthonormality_defect() > tol:
            raise NonDegeneracyError(
                f"frame at theta={self.theta} not orthonormal to {tol}"
            )
        if np.abs(np.cross(self.e1, self.e2) - self.e3).max() > tol:
            raise NonDegeneracyError("frame is not right-handed (e3 != e1 x e2)")


class SphericalCurve:
    """Base class; subclasses provide gamma and its first two derivatives."""

    domain = (0.0, 1.0)

    def gamma(self, theta):
        raise NotImplementedError

    def dgamma(self, theta):
        raise NotImplementedError

    def d2gamma(self, theta):
        raise NotImplementedError

    # -- derived quantities -------------------------------------------------

    def check_domain(self, theta):
        th = np.asarray(theta, dtype=float)
        lo, hi = self.domain
        eps = 1e-12 * max(1.0, abs(hi - lo))
        if np.any(th < lo - eps) or np.any(th > hi + eps):
            raise DomainError(f"theta={theta} outside domain [{lo}, {hi}]")

    def torsion(self, theta):
        g, dg, ddg = self.gamma(theta), self.dgamma(theta), self.d2gamma(theta)
        return _det3(g, dg, ddg)

    def frame_vectors(self, theta):
        """Vectorized (e1, e2, e3, tau) without validation."""
        g = self.gamma(theta)
        dg = self.dgamma(theta)
        e3 = np.cross(g, dg)
        tau = _dot(e3, self.d2gamma(theta))
        return g, dg, e3, tau

    def frame_matrix(self, theta):
        """3x3 matrix with rows e1, e2, e3 at a scalar parameter."""
        e1, e2, e3, _ = self.frame_vectors(float(theta))
        return np.stack([e1, e2, e3])


class LightConeCurve(SphericalCurve):
    """The unit-speed circle whose binormal sweeps the standard cone.

    ``gamma(theta) = (cos(sqrt2 theta), sin(sqrt2 theta), 1)/sqrt2``; one
    full turn has parameter length ``FULL_TURN``.  Torsion is 1.
    """

    def __init__(self, domain=(0.0, 1.0)):
        if not domain[1] > domain[0]:
            raise InvalidSpecError("empty domain")
        self.domain = (float(domain[0]), float(domain[1]))

    def gamma(self, theta):
        th = SQRT2 * np.asarray(theta, dtype=float)
        return np.stack(
            [np.cos(th), np.sin(th), np.ones_like(th)], axis=-1
        ) / SQRT2

    def dgamma(self, theta):
        th = SQRT2 * np.asarray(theta, dtype=float)
        return np.stack([-np.sin(th), np.cos(th), np.zeros_like(th)], axis=-1)

    def d2gamma(self, theta):
        th = SQRT2 * np.asarray(theta, dtype=float)
        return np.stack(
            [-np.cos(th), -np.sin(th), np.zeros_like(th)], axis=-1
        ) * SQRT2

    def frame_vectors(self, theta):
        th = SQRT2 * np.asarray(theta, dtype=float)
        c, s = np.cos(th), np.sin(th)
        z, o = np.zeros_like(th), np.ones_like(th)
        e1 = np.stack([c, s, o], axis=-1) / SQRT2
        e2 = np.stack([-s, c, z], axis=-1)
        e3 = np.stack([-c, -s, o], axis=-1) / SQRT2
        return e1, e2, e3, np.ones_like(th) if th.ndim else 1.0


class TabulatedCurve(SphericalCurve):
    """Curve given by samples of gamma, gamma', gamma'' on a uniform grid.

    Second derivatives are part of the data (never inferred numerically);
    evaluation between nodes is componentwise linear interpolation.
    """

    def __init__(self, thetas, gammas, dgammas, ddgammas, validate=True):
        thetas = np.asarray(thetas, dtype=float)
        if thetas.ndim != 1 or len(thetas) < 2:
            raise InvalidSpecError("need at least two sample nodes")
        if np.any(np.diff(thetas) <= 0):
            raise InvalidSpecError("sample nodes must be strictly increasing")
        self._th = thetas
        self._g = np.asarray(gammas, dtype=float).reshape(len(thetas), 3)
        self._dg = np.asarray(dgammas, dtype=float).reshape(len(thetas), 3)
        self._ddg = np.asarray(ddgammas, dtype=float).reshape(len(thetas), 3)
        self.domain = (float(thetas[0]), float(thetas[-1]))
        if validate:
            self._validate_samples()

    def _validate_samples(self, tol=1e-6):
        ng = np.linalg.norm(self._g, axis=1)
        nd = np.linalg.norm(self._dg, axis=1)
        if np.abs(ng - 1.0).max() > tol:
            raise InvalidSpecError("|gamma| != 1 at some sample node")
        if np.abs(nd - 1.0).max() > tol:
            raise InvalidSpecError("|gamma'| != 1 at some sample node (not unit speed)")
        dets = _det3(self._g, self._dg, self._ddg)
        if np.abs(dets).min() < DET_FLOOR:
            raise NonDegeneracyError("det(gamma, gamma', gamma'') vanishes at a node")

    def _interp(self, table, theta):
        th = np.asarray(theta, dtype=float)
        out = np.empty(th.shape + (3,))
        for i in range(3):
            out[..., i] = np.interp(th, self._th, table[:, i])
        return out

    def gamma(self, theta):
        return self._interp(self._g, theta)

    def dgamma(self, theta):
        return self._interp(self._dg, theta)

    def d2gamma(self, theta):
        return self._interp(self._ddg, theta)


def frenet_frame(curve, theta):
    """Moving frame (e1, e2, e3, tau) of ``curve`` at ``theta``.

    Raises
    ------
    DomainError
        if ``theta`` is outside the curve domain.
    NonDegeneracyError
        if ``|det(gamma, gamma', gamma'')| < DET_FLOOR``.
    """
    curve.check_domain(theta)
    e1, e2, e3, tau = curve.frame_vectors(float(theta))
    if abs(float(tau)) < DET_FLOOR:
        raise NonDegeneracyError(
            f"|det| = {abs(float(tau)):.3e} < {DET_FLOOR} at theta={theta}"
        )
    return FrenetFrame(float(theta), e1, e2, e3, float(tau))


def frame_inner_products(curve, theta, theta_p):
    """Gram matrix ``M[i, j] = e_i(theta) . e_j(theta_p)``."""
    return curve.frame_matrix(_checked(curve, theta)) @ curve.frame_matrix(
        _checked(curve, theta_p)
    ).T


def _checked(curve, theta):
    curve.check_domain(theta)
    return float(theta)


# -- cone geometry ----------------------------------------------------------


def cone_distance(xi):
    """Distance from ``xi`` to the full 45-degree double cone.

    Closed form ``|sqrt(x1^2 + x2^2) - |x3|| / sqrt2``.  On the upper half
    space this equals ``|x3 - sqrt(x1^2+x2^2)| / sqrt2``; taking ``|x3|``
    extends the identity to points below the equatorial plane, where the
    nearest generator lies on the lower nappe.
    """
    xi = np.asarray(xi, dtype=float)
    rho = np.hypot(xi[..., 0], xi[..., 1])
    return np.abs(rho - np.abs(xi[..., 2])) / SQRT2


@dataclass(frozen=True)
class NearestConePoint:
    omega: float
    r: float
    foot: np.ndarray


def nearest_cone_point(xi, domain=(0.0, FULL_TURN)):
    """Nearest cone point ``foot = r * e3(omega)`` and its parameters.

    The residual ``xi - foot`` is parallel to ``e1(omega)``.  Ties on the
    symmetry axis resolve to the smallest ``omega`` in ``domain``; points
    on the equatorial plane resolve to the upper nappe.

    Raises
    ------
    DegenerateInputError
        at the origin, where every generator attains the distance.
    """
    xi = np.asarray(xi, dtype=float).reshape(3)
    rho = float(np.hypot(xi[0], xi[1]))
    if rho == 0.0 and xi[2] == 0.0:
        raise DegenerateInputError("nearest cone point undefined at the origin")
    zsign = 1.0 if xi[2] >= 0.0 else -1.0
    rho_foot = 0.5 * (rho + abs(xi[2]))
    r = SQRT2 * zsign * rho_foot
    if rho == 0.0:
        omega = float(domain[0])
    else:
        phi = float(np.arctan2(xi[1], xi[0]))
        # e3(omega) points to azimuth sqrt2*omega + pi on the upper nappe
        raw = phi - np.pi if zsign > 0 else phi
        omega = float((raw / SQRT2 - domain[0]) % FULL_TURN + domain[0])
    th = SQRT2 * omega
    e3 = np.array([-np.cos(th), -np.sin(th), 1.0]) / SQRT2
    return NearestConePoint(omega, float(r), r * e3)


@dataclass(frozen=True)
class ConeModel:
    """Radially truncated piece of the cone swept by ``e3``.

    ``{r * e3(omega) : omega in domain, r_min <= r <= 1}`` with
    ``0 < r_min <= 1``.
    """

    r_min: float
    domain: tuple = (0.0, FULL_TURN)

    def __post_init__(self):
        if not 0.0 < self.r_min <= 1.0:
            raise InvalidSpecError("r_min must lie in (0, 1]")

    def sample(self, n_omega, n_r, curve=None):
        """Deterministic (omega, r) product grid of cone points."""
        curve = curve or LightConeCurve(self.domain)
        om = np.linspace(self.domain[0], self.domain[1], n_omega)
        rr = np.linspace(self.r_min, 1.0, n_r)
        _, _, e3, _ = curve.frame_vectors(om)
        return (rr[:, None, None] * e3[None, :, :]).reshape(-1, 3)

    def contains(self, xi, tol=1e-9):
        xi = np.asarray(xi, dtype=float)
        d = cone_distance(xi)
        r = np.linalg.norm(xi, axis=-1)
        return (d <= tol) & (r >= self.r_min - tol) & (r <= 1.0 + tol)


# -- binormal reparametrization ---------------------------------------------


class ReparametrizedFrame(SphericalCurve):
    """Frame field ``t -> frame(warp(t))`` with ``warp' = -1/tau``.

    After the warp the third frame vector becomes C^2 with
    ``e3' = e2`` (and ``e1' = -e2/tau``, ``e2' = e1/tau - e3``).  The
    point set of the curve is unchanged; only the parameter runs at the
    reciprocal-torsion rate, so this object composes the base frame with
    the warp rather than recomputing it from derivatives.
    """

    def __init__(self, base, grid, warp_values):
        self.base = base
        self._grid = grid
        self._warp = warp_values
        self.domain = (float(grid[0]), float(grid[-1]))

    def warp(self, theta):
        """The accumulated parameter change s(theta)."""
        self.check_domain(theta)
        return np.interp(np.asarray(theta, dtype=float), self._grid, self._warp)

    def gamma(self, theta):
        return self.base.gamma(self.warp(theta))

    def dgamma(self, theta):
        return self.base.dgamma(self.warp(theta))

    def d2gamma(self, theta):
        return self.base.d2gamma(self.warp(theta))

    def frame_vectors(self, theta):
        return self.base.frame_vectors(self.warp(theta))


def reparametrize_binormal(curve, resolution):
    """Reparametrize so the binormal obeys ``e3' = e2``.

    The warp ``s(t) = integral_0^t -1/tau`` is accumulated by the
    composite trapezoid rule on ``resolution + 1`` uniform nodes spanning
    the curve domain (evaluation between nodes interpolates linearly).

    Raises
    ------
    SingularTorsionError
        if ``|tau| < 1e-6`` anywhere on the quadrature grid.
    """
    if resolution < 2:
        raise InvalidSpecError("resolution must be at least 2")
    lo, hi = curve.domain
    grid = np.linspace(lo, hi, int(resolution) + 1)
    tau = np.asarray(curve.torsion(grid), dtype=float)
    if np.abs(tau).min() < 1e-6:
        raise SingularTorsionError("torsion vanishes on the quadrature grid")
    integrand = -1.0 / tau
    h = np.diff(grid)
    warp = np.concatenate(
        [[0.0], np.cumsum(0.5 * h * (integrand[1:] + integrand[:-1]))]
    )
    # the warp is measured from the domain's left endpoint
    warp = warp + lo if lo != 0.0 else warp
    return ReparametrizedFrame(curve, grid, warp)


# -- serialization -----------------------------------------------------------

_CSV_FIELDS = [
    "theta",
    "gamma_x", "gamma_y", "gamma_z",
    "dgamma_x", "dgamma_y", "dgamma_z",
    "ddgamma_x", "ddgamma_y", "ddgamma_z",
]


def load_curve_csv(path_or_buffer):
    """Load a tabulated curve from CSV (header row required).

    Columns: theta, then the three components each of gamma, gamma' and
    gamma''; angles in radians, components unitless.
    """
    if isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__"):
        with open(path_or_buffer, "r", newline="") as fh:
            return _parse_curve_csv(fh)
    return _parse_curve_csv(path_or_buffer)


def _parse_curve_csv(fh):
    reader = csv.DictReader(fh)
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != _CSV_FIELDS:
        raise InvalidSpecError(
            f"curve CSV must have header columns {', '.join(_CSV_FIELDS)}"
        )
    rows = [[float(row[k]) for k in _CSV_FIELDS] for row in reader]
    if not rows:
        raise InvalidSpecError("curve CSV has no data rows")
    data = np.asarray(rows)
    return TabulatedCurve(
        data[:, 0], data[:, 1:4], data[:, 4:7], data[:, 7:10]
    )


def save_curve_csv(curve, thetas, path):
    """Sample ``curve`` on ``thetas`` and write the tabulated CSV form."""
    thetas = np.asarray(thetas, dtype=float)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_CSV_FIELDS)
    g, dg, ddg = curve.gamma(thetas), curve.dgamma(thetas), curve.d2gamma(thetas)
    for i, th in enumerate(thetas):
        writer.writerow(
            [f"{v:.17g}" for v in (th, *g[i], *dg[i], *ddg[i])]
        )
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


# -- small vector helpers ----------------------------------------------------


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _det3(a, b, c):
    return _dot(a, np.cross(b, c))
