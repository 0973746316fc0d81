"""Plank parts, overlap counting, cone families, attachment, rescaling."""

import json
import math

import numpy as np
import pytest

from projlab.curves import FULL_TURN, LightConeCurve, frame_inner_products, frenet_frame
from projlab.errors import InvalidSpecError
from projlab.planks import (
    PAPER_MARGINS,
    AttachmentMap,
    AxisRange,
    ConeRegion,
    Plank,
    attach,
    build_cone_family,
    build_part_planks,
    cone_lattice,
    cone_plank_ranges,
    cone_region_membership,
    family_from_json,
    family_to_json,
    lorentz_rescale,
    mixed_lambdas,
    narrow_plank,
    overlap_count,
    part_family,
    part_labels,
    same_or_disjoint_check,
    sqrt_plank,
)

CONE = LightConeCurve((0.0, 1.0))
CONE_FULL = LightConeCurve((0.0, FULL_TURN))


class TestPartPlanks:
    def test_low_ranges(self):
        p = build_part_planks(CONE, 0.3, 2.0**-10, 8.0, "low")
        los = [r.lo for r in p.ranges]
        his = [r.hi for r in p.ranges]
        assert los == [0.0, 0.0, 0.0]
        assert his == [2.0**-10, 1.0 / 8.0, 1.0 / 8.0]

    def test_parts_partition_slab(self):
        rng = np.random.default_rng(42)
        for theta, delta, K in [
            (0.2, 2.0**-8, 4.0),
            (0.55, 2.0**-8, 16.0),
            (0.8, 2.0**-6, 8.0),
            (0.05, 2.0**-10, 4.0),
            (0.4, 2.0**-10, 32.0),
        ]:
            parts = part_family(CONE, theta, delta, K)
            fr = frenet_frame(CONE, theta)
            coords = np.stack(
                [
                    rng.uniform(-delta, delta, 100_000),
                    rng.uniform(-1, 1, 100_000),
                    rng.uniform(-1, 1, 100_000),
                ],
                axis=-1,
            )
            pts = coords @ fr.matrix()
            lab = part_labels(parts, pts)
            assert (lab.sum(axis=1) == 1).all()

    def test_mixed_band_count(self):
        delta, K = 2.0**-8, 8.0
        lams = mixed_lambdas(delta, K)
        expect = math.log2((1.0 / K) / math.sqrt(delta))
        assert abs(len(lams) - expect) <= 1

    def test_degenerate_window_rejected(self):
        delta = 2.0**-8
        K = delta**-0.5
        with pytest.raises(InvalidSpecError):
            build_part_planks(CONE, 0.2, delta, K, "mixed", 2.0 * math.sqrt(delta))


class TestContains:
    def test_center_inside(self):
        p = build_part_planks(CONE, 0.3, 2.0**-8, 4.0, "low")
        fr = frenet_frame(CONE, 0.3)
        center = 0.0 * fr.e1
        assert p.contains(center[None, :])[0]

    def test_scaled_outside(self):
        p = build_part_planks(CONE, 0.3, 2.0**-8, 4.0, "low")
        fr = frenet_frame(CONE, 0.3)
        xi = 2.0 * (1.0 / 4.0) * fr.e3
        assert not p.contains(xi[None, :])[0]

    def test_agrees_with_inner_product_oracle(self):
        rng = np.random.default_rng(1)
        p = build_part_planks(CONE, 0.41, 2.0**-6, 4.0, "sqrt")
        pts = rng.uniform(-1.2, 1.2, (2000, 3))
        got = p.contains(pts)
        m = CONE.frame_matrix(0.41)
        c = pts @ m.T
        delta, K = 2.0**-6, 4.0
        want = (
            (np.abs(c[:, 0]) <= delta)
            & (np.abs(c[:, 1]) <= math.sqrt(delta))
            & (np.abs(c[:, 2]) > 1.0 / K)
            & (np.abs(c[:, 2]) <= 1.0)
        )
        assert (got == want).all()


class TestOverlap:
    def test_disjoint_pair(self):
        rng = np.random.default_rng(0)
        a = build_part_planks(CONE, 0.1, 2.0**-6, 4.0, "low")
        b = build_part_planks(CONE, 0.9, 2.0**-6, 4.0, "low")
        rep = overlap_count([a, b], 50_000, rng=rng)
        # the two thin slabs at far-apart angles still cross near the axis;
        # restrict to a box away from the intersection line instead
        pts = a.sample(20_000, rng)
        pts = pts[np.abs(pts @ CONE.frame_matrix(0.9).T[:, 0]) > 2.0**-5]
        rep = overlap_count([a, b], pts)
        assert rep.max_overlap == 1

    def test_high_family_overlap_over_K(self):
        # thin高-band slabs at delta-separated angles: indicator max scales
        # like K (one extra angular window per doubling)
        rng = np.random.default_rng(7)
        delta = 2.0**-8
        thetas = np.arange(0.0, 1.0 + 1e-12, delta)
        for K in (2.0, 8.0):
            fam = [build_part_planks(CONE, t, delta, K, "high") for t in thetas]
            rep = overlap_count(fam, 200_000, rng=rng, box=(-1.45, 1.45))
            assert rep.max_overlap <= 8 * K

    def test_histogram_totals(self):
        rng = np.random.default_rng(3)
        fam = [build_part_planks(CONE, t, 2.0**-4, 2.0, "low") for t in (0.2, 0.4)]
        rep = overlap_count(fam, 10_000, rng=rng)
        assert sum(rep.histogram.values()) == rep.n_in_union


class TestSameOrDisjoint:
    def test_same_angle(self):
        out = same_or_disjoint_check(CONE, 0.3, 0.3, 2.0**-10, 2.0**-4, 16.0)
        assert out.classification == "essentially-same"

    def test_half_lattice_offset_contained(self):
        delta, lam, K = 2.0**-30, 2.0**-12, 16.0
        gap = delta / lam / 2.0
        out = same_or_disjoint_check(CONE, 0.3, 0.3 + gap, delta, lam, K, C1=16.0)
        assert out.classification == "essentially-same"

    def test_far_angles_disjoint(self):
        delta, lam, K = 2.0**-30, 2.0**-12, 16.0
        gap = 10.0 * delta / lam  # inside [C2 d/l, l/C2] for C2 = 8
        assert 8.0 * delta / lam <= gap <= lam / 8.0
        out = same_or_disjoint_check(
            CONE, 0.3, 0.3 + gap, delta, lam, K, C2=8.0, n_samples=100_000,
            rng=np.random.default_rng(5),
        )
        assert out.classification == "disjoint"


class TestConeFamily:
    def test_paper_formula_instantiation(self):
        ranges = cone_plank_ranges(0, 0, c=0.25, margins=PAPER_MARGINS)
        assert ranges[0].hi == 2.0**10          # k = j degenerate normal slab
        assert ranges[1].hi == 2.0**-100        # hair-thin aperture
        assert ranges[2].lo == 2.0**-10 and ranges[2].hi == 2.0**10

    def test_distance_band_on_plank_points(self):
        rng = np.random.default_rng(11)
        from projlab.curves import cone_distance

        for (j, k) in [(4, 2), (6, 2), (8, 4)]:
            fam = build_cone_family(j, k, c=0.25)
            for p in fam[:: max(1, len(fam) // 8)]:
                pts = p.sample(3000, rng)
                d = cone_distance(pts)
                assert (d <= 2.0 ** (j - k + 10)).all()
                assert (d >= 2.0 ** (j - k - 40)).all()

    def test_coverage_of_region(self):
        rng = np.random.default_rng(13)
        for (j, k) in [(4, 2), (6, 6)]:
            fam = build_cone_family(j, k, c=0.25)
            pts = ConeRegion(j, k).sample(20_000, rng)
            covered = np.zeros(len(pts), dtype=bool)
            for p in fam:
                covered |= p.contains(pts, margin=1e-9)
            assert covered.all()

    def test_overlap_bounded(self):
        rng = np.random.default_rng(17)
        for (j, k) in [(6, 2), (6, 6)]:
            fam = build_cone_family(j, k, c=0.25)
            pts = np.concatenate([p.sample(400, rng) for p in fam])
            rep = overlap_count(fam, pts)
            assert rep.max_overlap <= 64

    def test_k_greater_than_j_rejected(self):
        with pytest.raises(InvalidSpecError):
            build_cone_family(2, 3)


class TestConeRegion:
    def test_on_cone_in_diagonal_region(self):
        j = 5
        _, _, e3, _ = CONE_FULL.frame_vectors(0.7)
        assert cone_region_membership((2.0**j * e3)[None, :], ConeRegion(j, j))[0]

    def test_mid_band(self):
        j, k = 6, 2
        reg = ConeRegion(j, k)
        rng = np.random.default_rng(2)
        pts = reg.sample(500, rng)
        assert reg.contains(pts).all()

    def test_strict_band_boundary(self):
        from projlab.curves import cone_distance

        j, k = 6, 2
        reg = ConeRegion(j, k)
        pts = reg.sample(200, np.random.default_rng(3))
        p = pts[0]
        # push the point radially off the cone until dist just exceeds the band
        from projlab.curves import nearest_cone_point

        near = nearest_cone_point(p)
        direction = (p - near.foot) / np.linalg.norm(p - near.foot)
        r = np.linalg.norm(p)
        target = 2.0 ** (-k - 0.5) * r * (1 + 1e-9)
        q = near.foot + direction * target
        # renormalize |q| back to r so only the distance moves
        q *= r / np.linalg.norm(q)
        if cone_distance(q) > 2.0 ** (-k - 0.5) * np.linalg.norm(q):
            assert not reg.contains(q[None, :])[0]


class TestAttachment:
    def test_lattice_point_is_own_parent(self):
        amap = AttachmentMap(2.0**-10, 2.0**-3)
        tau = 5 * amap.middle_spacing
        assert attach(tau, amap, "theta->tau") == pytest.approx(tau)

    def test_right_endpoint_included(self):
        amap = AttachmentMap(2.0**-10, 2.0**-3)
        h = amap.middle_spacing
        tau0 = 4 * h
        assert attach(tau0 + h / 2, amap, "theta->tau") == pytest.approx(tau0)
        assert attach(tau0 + h / 2 + 1e-12, amap, "theta->tau") == pytest.approx(tau0 + h)

    def test_two_step_equals_direct(self):
        amap = AttachmentMap(2.0**-12, 2.0**-4)
        rng = np.random.default_rng(0)
        for theta in np.arange(0.0, 1.0, 2.0**-12)[rng.integers(0, 4096, 2000)]:
            tau = attach(theta, amap, "theta->tau")
            sigma = attach(tau, amap, "tau->sigma")
            assert attach(theta, amap, "theta->sigma") == pytest.approx(sigma)

    def test_unique_parent_residual(self):
        amap = AttachmentMap(2.0**-10, 2.0**-3)
        h = amap.middle_spacing
        rng = np.random.default_rng(4)
        for v in rng.random(200):
            tau = amap.attach(v, "theta->tau")
            assert -h / 2 < v - tau <= h / 2 + 1e-15


class TestLorentzRescale:
    def test_identity_at_unit_scale(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(50, 3))
        out = lorentz_rescale(CONE, 0.3, 1.0, pts)
        np.testing.assert_allclose(out, pts, atol=1e-12)

    def test_first_axis_fixed(self):
        g = CONE.gamma(0.44)
        out = lorentz_rescale(CONE, 0.44, 7.0, g[None, :])
        np.testing.assert_allclose(out[0], g, atol=1e-12)

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(6)
        pts = rng.normal(size=(100, 3))
        fwd = lorentz_rescale(CONE, 0.2, 4.0, pts)
        back = lorentz_rescale(CONE, 0.2, 4.0, fwd, inverse=True)
        np.testing.assert_allclose(back, pts, atol=1e-10)

    def test_zero_scale_rejected(self):
        with pytest.raises(InvalidSpecError):
            lorentz_rescale(CONE, 0.2, 0.0, np.zeros((1, 3)))


class TestSerialization:
    def test_family_round_trip(self, tmp_path):
        fam = build_cone_family(4, 2, c=0.25)[:5]
        path = tmp_path / "family.json"
        family_to_json(fam, path)
        again = family_from_json(path)
        assert len(again) == 5
        assert again[0].j == 4 and again[0].k == 2
        rng = np.random.default_rng(0)
        pts = fam[0].sample(500, rng)
        assert (again[0].contains(pts) == fam[0].contains(pts)).all()

    def test_overlap_csv(self, tmp_path):
        rng = np.random.default_rng(1)
        fam = [build_part_planks(CONE, t, 2.0**-4, 2.0, "low") for t in (0.2, 0.6)]
        rep = overlap_count(fam, 5000, rng=rng)
        path = tmp_path / "hist.csv"
        rep.to_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "overlap,n_points"


class TestHighPartSeparation:
    def test_plane_separation_dot_product(self):
        # at C = 2^8 the angular window [C K delta, 1/(C K)] is nonempty
        # only for delta <= (CK)^-2; pure frame geometry, no grid
        C, delta = 2.0**8, 2.0**-20
        rng = np.random.default_rng(8)
        for K in (2.0, 4.0):
            lo, hi = C * K * delta, 1.0 / (C * K)
            assert lo < hi
            for _ in range(60):
                th = rng.uniform(0.2, 0.6)
                gap = rng.uniform(lo, hi)
                a = rng.uniform(1.0 / K, 1.0) * np.sign(rng.normal())
                b = rng.uniform(-1.0, 1.0)
                fr = frenet_frame(CONE, th)
                xi = a * fr.e2 + b * fr.e3
                gp = CONE.gamma(th + gap)
                assert abs(float(xi @ gp)) > 10.0 * delta
