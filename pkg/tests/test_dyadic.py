import math

import numpy as np
import pytest

from dyadica.geometry import EMPTY, FULL, MIXED, AxisCube, Ball, SpiralPower
from dyadica.dyadic import (
    whitney_invariants,
    BoxForest,
    CellTree,
    DyadicCube,
    cell_boxes,
    default_roots,
    domain_tree,
    refine,
    whitney,
)
from dyadica.regularity import scaling_fit


class TestDyadicCube:
    def test_box_and_edge(self):
        q = DyadicCube(3, (5, -2))
        lo, hi = q.box()
        assert lo == (5 / 8, -2 / 8)
        assert hi == (6 / 8, -1 / 8)
        assert q.edge == 1 / 8

    def test_children_partition_exactly(self):
        q = DyadicCube(2, (3, 1))
        kids = q.children()
        assert len(kids) == 4
        # integer index arithmetic: children tile the parent
        ks = sorted(k.k for k in kids)
        assert ks == [(6, 2), (6, 3), (7, 2), (7, 3)]
        for kid in kids:
            assert q.contains_cube(kid)
            assert kid.parent() == q

    def test_negative_levels(self):
        q = DyadicCube(-1, (0, 0))
        lo, hi = q.box()
        assert lo == (0.0, 0.0) and hi == (2.0, 2.0)


class TestRefine:
    def test_aligned_cube_root_full(self):
        tree = refine(AxisCube((0, 0), (1, 1)), DyadicCube(0, (0, 0)), 4)
        assert len(tree.levels[0].full) == 1
        assert tree.mixed_count(0) == 0

    def test_ball_first_level(self):
        tree = refine(Ball((0, 0), 1.0), DyadicCube(0, (0, 0)), 1)
        lev = tree.levels[1]
        # the (0,0)-child [0,.5)^2 is full, the rest straddle the circle
        assert any(tuple(k) == (0, 0) for k in lev.full)
        assert tree.mixed_count(1) >= 2

    def test_ball_mixed_count_slope_one(self):
        tree = refine(Ball((0, 0), 1.0), DyadicCube(-1, (0, 0)), 8)
        levels = np.arange(3, 9)
        counts = np.array([tree.mixed_count(j) for j in levels], float)
        fit = scaling_fit(dict(zip(levels.tolist(), counts.tolist())))
        assert abs(fit.slope - 1.0) <= 0.1

    def test_measures_nested_and_correct_for_ball(self):
        tree = domain_tree(Ball((0, 0), 1.0), 10)
        lo, hi = tree.measure()
        assert lo <= math.pi <= hi
        assert hi - lo < 5e-3

    def test_cell_measure_lookup_against_truth(self, rng):
        dom = Ball((0, 0), 1.0)
        tree = domain_tree(dom, 10)
        level = 4
        ks = rng.integers(-16, 16, size=(200, 2))
        m_lo, m_hi = tree.cell_measure_lookup(level, ks)
        blo, bhi = cell_boxes(level, ks)
        for i in range(len(ks)):
            xs = np.linspace(blo[i, 0], bhi[i, 0], 33)
            ys = np.linspace(blo[i, 1], bhi[i, 1], 33)
            xx, yy = np.meshgrid(xs, ys)
            truth = (np.hypot(xx, yy) < 1).mean() * 2.0 ** (-2 * level)
            pad = 2.0 ** (-level) * 2.0 ** (-level) / 8
            assert m_lo[i] - pad <= truth <= m_hi[i] + pad

    def test_mixed_monotone_under_depth(self):
        dom = Ball((0, 0), 1.0)
        t6 = CellTree(dom, 0, np.array([[0, 0]]), 6)
        t9 = CellTree(dom, 0, np.array([[0, 0]]), 9)
        for j in range(0, 7):
            assert t6.mixed_count(j) == t9.mixed_count(j)

    def test_csv_rows(self):
        tree = refine(Ball((0, 0), 1.0), DyadicCube(0, (0, 0)), 3)
        rows = tree.to_csv_rows()
        assert all(len(r) == 4 for r in rows)
        assert rows == tree.to_csv_rows()  # deterministic


class TestBoxForest:
    def test_min_boxdist_matches_bruteforce(self, rng):
        ks = rng.integers(-6, 6, size=(40, 2))
        forest = BoxForest({3: np.unique(ks, axis=0)}, 2)
        q = rng.uniform(-1, 1, size=(60, 2))
        qlo = q
        qhi = q + rng.uniform(0.01, 0.2, size=(60, 2))
        got = forest.min_boxdist(qlo, qhi)
        tlo, thi = cell_boxes(3, np.unique(ks, axis=0))
        for i in range(len(q)):
            gaps = np.maximum(np.maximum(tlo - qhi[i], qlo[i] - thi), 0.0)
            want = np.sqrt((gaps ** 2).sum(axis=1)).min()
            assert got[i] == pytest.approx(want, abs=1e-12)


class TestWhitney:
    def test_unit_square_properties(self):
        dom = AxisCube((0, 0), (1, 1))
        res = whitney(dom, DyadicCube(0, (0, 0)), max_level=9)
        assert res.count() > 0
        # property (iii): certified 1 <= dist/diam <= 4 for every cube
        diam = math.sqrt(2) * 2.0 ** (-res.levels.astype(float))
        assert np.all(res.dist_lo >= diam - 1e-12)
        assert np.all(res.dist_hi <= 4 * diam + 1e-12)

    def test_unit_square_disjoint_and_touch_ratios(self):
        dom = AxisCube((0, 0), (1, 1))
        res = whitney(dom, DyadicCube(0, (0, 0)), max_level=8)
        boxes = [(l, tuple(k)) for l, k in zip(res.levels, res.ks)]
        assert len(set(boxes)) == len(boxes)
        chk = whitney_invariants(res)
        assert chk["nested"] == 0
        assert chk["ratio"] == 0
        assert chk["contacts"] == 0

    def test_invariant_checker_matches_bruteforce(self):
        dom = AxisCube((0, 0), (1, 1))
        res = whitney(dom, DyadicCube(0, (0, 0)), max_level=5)
        chk = whitney_invariants(res)
        cubes = [DyadicCube(int(l), tuple(k)) for l, k in zip(res.levels, res.ks)]
        lohi = [np.array(c.box()) for c in cubes]
        n = len(cubes)
        touches = np.zeros(n, dtype=int)
        for i in range(n):
            for j in range(i + 1, n):
                (alo, ahi), (blo, bhi) = lohi[i], lohi[j]
                overlap = np.minimum(ahi, bhi) - np.maximum(alo, blo)
                assert not np.all(overlap > 1e-12)
                if np.all(overlap > -1e-12):
                    touches[i] += 1
                    touches[j] += 1
                    assert abs(int(cubes[i].level) - int(cubes[j].level)) <= 2
        assert np.array_equal(np.sort(chk["touches"]), np.sort(touches))

    def test_unit_square_coverage(self):
        dom = AxisCube((0, 0), (1, 1))
        res = whitney(dom, DyadicCube(0, (0, 0)), max_level=10)
        covered = float(np.sum(4.0 ** (-res.levels.astype(float))))
        total = covered + res.tail_measure + res.unresolved_measure + res.mixed_measure
        assert total == pytest.approx(1.0, abs=4 * 2.0 ** -10)
        assert res.unresolved_measure < 0.01

    def test_spiral_no_coarse_cubes(self):
        dom = SpiralPower(1.0)
        res = whitney(dom, DyadicCube(2, (0, 0)), max_level=10)
        # strips inside [0, 1/4)^2 are thinner than the first winding there,
        # so no Whitney cube can live at the widest-strip level or above
        width = float(dom.strip_width(np.array([math.sqrt(2) * 2.0 ** -2]))[0])
        j_min = -math.log2(width)
        present = sorted(res.per_level)
        if present:
            assert present[0] >= j_min - 1
