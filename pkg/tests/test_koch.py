import math

import numpy as np
import pytest
from matplotlib.path import Path

from dyadica.geometry import EMPTY, FULL, MIXED, Snowflake, snowflake_polygon

SQ3 = math.sqrt(3.0)


def ring_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


class TestPolygon:
    def test_edge_counts_and_lengths(self):
        for L in (0, 1, 2, 3):
            poly = snowflake_polygon(L)
            assert len(poly) == 3 * 4 ** L
            seg = np.roll(poly, -1, axis=0) - poly
            lens = np.hypot(seg[:, 0], seg[:, 1])
            assert np.allclose(lens, 3.0 ** -L, rtol=1e-12)

    def test_side_length_growth(self):
        # total length of the ring grows by 4/3 per generation
        for L in (0, 1, 2, 4):
            poly = snowflake_polygon(L)
            seg = np.roll(poly, -1, axis=0) - poly
            total = np.hypot(seg[:, 0], seg[:, 1]).sum()
            assert total == pytest.approx(3.0 * (4.0 / 3.0) ** L, rel=1e-12)

    def test_counterclockwise_and_area_recursion(self):
        a_prev = None
        for L in range(6):
            a = ring_area(snowflake_polygon(L))
            assert a > 0  # CCW
            if a_prev is not None:
                # each generation adds one ninth-scale triangle per edge
                n_edges = 3 * 4 ** (L - 1)
                tri = (SQ3 / 4.0) * (3.0 ** -(L - 1) / 3.0) ** 2
                assert a == pytest.approx(a_prev + n_edges * tri, rel=1e-9)
            a_prev = a
        # adding the analytic tail of the bump series gives the limit area
        tail = (3 * SQ3 / 16.0) * (4.0 / 9.0) ** 6 / (1.0 - 4.0 / 9.0)
        assert a_prev + tail == pytest.approx(0.4 * SQ3, rel=1e-9)

    def test_refinement_stays_within_certified_band(self):
        # every vertex of any finer generation lies within sqrt(3)/6 * 3^-L of
        # generation L (the next generation's tips attain the bound exactly)
        for L in (1, 2, 3):
            coarse = snowflake_polygon(L)
            seg_a = coarse
            seg_b = np.roll(coarse, -1, axis=0)
            bound = SQ3 / 6.0 * 3.0 ** -L
            for extra in (1, 4):
                fine = snowflake_polygon(L + extra)
                worst = 0.0
                for p in fine[:: max(1, len(fine) // 700)]:
                    worst = max(worst, _point_ring_distance(p, seg_a, seg_b))
                assert worst <= bound + 1e-12
            tips = snowflake_polygon(L + 1)[2::4]  # the new bump tips
            d_tip = max(_point_ring_distance(p, seg_a, seg_b) for p in tips[:64])
            assert d_tip == pytest.approx(bound, rel=1e-9)

    def test_placement_clearance(self):
        poly = snowflake_polygon(6)
        assert poly[:, 0].min() > 1.0
        assert poly[:, 1].min() > 1.0


def _point_ring_distance(p, a, b):
    d = b - a
    ln2 = (d ** 2).sum(axis=1)
    t = np.clip(((p - a) * d).sum(axis=1) / np.maximum(ln2, 1e-300), 0, 1)
    q = a + t[:, None] * d
    return float(np.min(np.hypot(*(q - p).T)))


class TestClassification:
    @pytest.fixture(scope="class")
    def oracle(self):
        return Path(snowflake_polygon(8))

    def test_side_of_points_matches_path_oracle(self, oracle, rng):
        dom = Snowflake()
        pts = rng.uniform(1.2, 2.8, size=(3000, 2))
        got = dom.contains_points(pts)
        want = oracle.contains_points(pts)
        # disagreements may only happen within the generation-8 band
        bad = got != want
        assert bad.mean() < 2e-3
        if bad.any():
            ring = snowflake_polygon(8)
            for p in pts[bad]:
                d = _point_ring_distance(p, ring, np.roll(ring, -1, axis=0))
                assert d < SQ3 / 6.0 * 3.0 ** -8

    def test_classify_full_empty_never_wrong(self, oracle, rng):
        dom = Snowflake()
        n = 500
        a = rng.uniform(1.2, 2.8, size=(n, 2))
        w = rng.uniform(0.002, 0.3, size=(n, 1))
        lo, hi = a, a + w
        cls = dom.classify_boxes(lo, hi)
        assert set(np.unique(cls)) <= {EMPTY, FULL, MIXED}
        for i in range(n):
            if cls[i] == MIXED:
                continue
            pts = rng.uniform(lo[i], hi[i], size=(30, 2))
            inside = oracle.contains_points(pts)
            if cls[i] == FULL:
                assert inside.all()
            else:
                assert not inside.any()

    def test_center_is_full(self):
        dom = Snowflake()
        cls = dom.classify_boxes(np.array([[1.95, 1.95]]), np.array([[2.05, 2.05]]))
        assert cls[0] == FULL

    def test_far_box_is_empty(self):
        dom = Snowflake()
        cls = dom.classify_boxes(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]]))
        assert cls[0] == EMPTY

    def test_distance_intervals_bracket_polygon_distance(self, rng):
        dom = Snowflake()
        n = 300
        a = rng.uniform(1.3, 2.7, size=(n, 2))
        w = rng.uniform(0.002, 0.05, size=(n, 1))
        lo, hi = a, a + w
        dlo, dhi = dom.boundary_distance_intervals(lo, hi)
        assert np.all(dlo <= dhi + 1e-12)
        ring = snowflake_polygon(7)
        sa, sb = ring, np.roll(ring, -1, axis=0)
        # true distance is within [d_ref - sqrt3/6*3^-7, d_ref + sqrt3/12*3^-7]
        band7 = SQ3 / 6.0 * 3.0 ** -7
        for i in range(0, n, 7):
            pts = rng.uniform(lo[i], hi[i], size=(8, 2))
            for p in pts:
                d_ref = _point_ring_distance(p, sa, sb)
                assert dlo[i] <= d_ref + band7 / 2 + 1e-12
                assert dhi[i] >= d_ref - band7 - 1e-12
