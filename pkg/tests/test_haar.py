import math

import numpy as np
import pytest

from dyadica.geometry import AxisCube, Ball, SpiralPower
from dyadica.dyadic import DyadicCube
from dyadica.haar import (
    HaarCoefficientTable,
    NormParams,
    b_seq_norm,
    f_seq_norm,
    haar_coefficients,
)
from dyadica.regularity import scaling_fit

INF = math.inf


def lookup(table, j, k, i):
    ks, vlo, vhi = table.detail[j]
    for idx, kk in enumerate(ks):
        if tuple(kk) == k:
            return 0.5 * (vlo[i, idx] + vhi[i, idx])
    return 0.0


def random_table(rng, J=6, per_level=10):
    detail = {}
    for j in range(J + 1):
        ks = rng.integers(0, 2 ** j if j else 1, size=(per_level, 2))
        ks = np.unique(ks, axis=0)
        vals = rng.normal(size=(3, len(ks)))
        detail[j] = (ks.astype(np.int64), vals, vals.copy())
    sk = np.array([[0, 0]], np.int64)
    return HaarCoefficientTable(2, J, sk, np.array([0.5]), np.array([0.5]), detail)


class TestCoefficients:
    def test_aligned_cube_all_details_vanish(self):
        dom = AxisCube((0, 0), (1, 1))
        table = haar_coefficients(dom, J=6)
        assert table.entry_count() == 0
        # scaling coefficient of the unit cell is exactly one
        ix = [i for i, k in enumerate(table.scaling_ks) if tuple(k) == (0, 0)]
        assert table.scaling_lo[ix[0]] == pytest.approx(1.0)

    def test_three_quarter_strip_level0(self):
        dom = AxisCube((0, 0), (0.75, 1.0))
        table = haar_coefficients(dom, J=4)
        # orientation (1,0) detail at the unit cell: 1/2 - 1/4 = 1/4
        got = lookup(table, 0, (0, 0), 0)
        assert got == pytest.approx(0.25, abs=1e-12)
        # orientation (0,1) vanishes by symmetry in y
        assert lookup(table, 0, (0, 0), 1) == pytest.approx(0.0, abs=1e-12)

    def test_three_quarter_strip_level1(self):
        dom = AxisCube((0, 0), (0.75, 1.0))
        table = haar_coefficients(dom, J=4)
        got = lookup(table, 1, (1, 0), 0)
        assert got == pytest.approx(0.25, abs=1e-12)

    def test_orientation_index_convention(self):
        # orientation order: (1,0), (0,1), (1,1)
        dom = AxisCube((0, 0), (1.0, 0.75))
        table = haar_coefficients(dom, J=2)
        assert lookup(table, 0, (0, 0), 1) == pytest.approx(0.25, abs=1e-12)
        assert lookup(table, 0, (0, 0), 0) == pytest.approx(0.0, abs=1e-12)

    def test_coefficient_bound(self):
        dom = Ball((0, 0), 1.0)
        table = haar_coefficients(dom, J=8)
        tree_bound_failures = 0
        from dyadica.dyadic import domain_tree
        tree = domain_tree(dom, 10)
        for j, (ks, vlo, vhi) in table.detail.items():
            m_lo, m_hi = tree.cell_measure_lookup(j, ks)
            bound = 2.0 ** j * m_hi  # 2^{jn/2} |E ∩ Q|
            amax = np.maximum(np.abs(vlo), np.abs(vhi)).max(axis=0)
            tree_bound_failures += int((amax > bound + 1e-12).sum())
        assert tree_bound_failures == 0

    def test_entries_only_on_mixed_cells(self):
        dom = Ball((0, 0), 1.0)
        table = haar_coefficients(dom, J=6)
        for j, (ks, _, _) in table.detail.items():
            lo = ks * 2.0 ** -j
            hi = lo + 2.0 ** -j
            cls = dom.classify_boxes(lo, hi)
            assert np.all(cls == 2)

    def test_completeness_toward_disk_area(self):
        dom = Ball((0, 0), 1.0)
        table = haar_coefficients(dom, J=10)
        energies = [table.energy(upto=j) for j in range(0, 11, 2)]
        assert all(b >= a - 1e-12 for a, b in zip(energies, energies[1:]))
        assert math.pi - table.energy() < 0.01 * math.pi

    def test_sparsity_slope_matches_boundary_dimension(self):
        dom = Ball((0, 0), 1.0)
        table = haar_coefficients(dom, J=9)
        series = {j: table.entry_count(j) for j in range(3, 10)}
        fit = scaling_fit(series)
        assert abs(fit.slope - 1.0) <= 0.15


class TestNorms:
    def test_empty_table_zero_detail(self):
        dom = AxisCube((0, 0), (1, 1))
        table = haar_coefficients(dom, J=6)
        rep = b_seq_norm(table, NormParams(s=0.5, tau=0.3, p=1, q=INF, J=6))
        assert rep.detail == 0.0
        assert rep.value == rep.low_freq > 0

    def test_q_equals_p_b_equals_f(self, rng):
        table = random_table(rng)
        for p in (1.0, 2.0):
            params = NormParams(s=0.4, tau=0.2, p=p, q=p, J=6)
            rb = b_seq_norm(table, params)
            rf = f_seq_norm(table, params)
            assert rb.detail == pytest.approx(rf.detail, rel=1e-9)

    def test_monotone_in_s_tau_q(self, rng):
        for trial in range(12):
            table = random_table(rng)
            base = dict(s=0.5, tau=0.3, p=1.5, q=2.0, J=6)
            for norm in (b_seq_norm, f_seq_norm):
                v0 = norm(table, NormParams(**base)).detail
                vs = norm(table, NormParams(**{**base, "s": 0.6})).detail
                vt = norm(table, NormParams(**{**base, "tau": 0.4})).detail
                vq = norm(table, NormParams(**{**base, "q": 3.0})).detail
                assert vs >= v0 - 1e-12
                assert vt >= v0 - 1e-12
                assert vq <= v0 + 1e-12

    def test_ball_interior_range_bounded_profile(self):
        dom = Ball((0, 0), 1.0)
        table = haar_coefficients(dom, J=10)
        params = NormParams(s=0.95, tau=0.45, p=1, q=INF, J=10)
        rep = b_seq_norm(table, params)
        # membership region: bounded per-level sup across candidate levels
        sup = rep.levelwise_sup
        lvls = sorted(sup)[-5:]
        vals = [sup[l] for l in lvls if sup[l] > 0]
        assert max(vals) / min(vals) <= 4.0

    def test_spiral_outside_range_growing_profile(self):
        dom = SpiralPower(1.0)
        table = haar_coefficients(dom, J=11)
        # inside the Haar window but far outside the membership region:
        # tau + s = 1.40 > 1/p forces growth along the singular cubes at rate
        # 2(tau + s - 1) = 0.8; trust levels whose dominant shell 2l fits
        # under the truncation J
        params = NormParams(s=0.95, tau=0.45, p=1, q=INF, J=11)
        rep = b_seq_norm(table, params)
        trusted = (11 - 2) // 2
        sup = {l: v for l, v in rep.levelwise_sup.items() if v > 0 and l <= trusted}
        fit = scaling_fit(sup)
        assert fit.slope > 0.4

    def test_f_norm_finite_interior(self):
        # membership region for the disk: truncations converge geometrically
        dom = Ball((0, 0), 1.0)
        vals = [f_seq_norm(haar_coefficients(dom, J=J),
                           NormParams(s=0.4, tau=0.2, p=2, q=1, J=J)).detail
                for J in (8, 9, 10, 11)]
        incr = np.diff(vals)
        assert vals[0] > 0
        assert np.all(incr > 0)
        ratios = incr[1:] / incr[:-1]
        assert np.all(ratios < 0.92)
        # extrapolated limit stays within a factor of the truncation
        limit = vals[-1] + incr[-1] * ratios[-1] / (1 - ratios[-1])
        assert limit < 1.5 * vals[-1]

    def test_validity_gate(self):
        assert NormParams(s=0.5, tau=0.3, p=1, q=INF).haar_valid
        assert not NormParams(s=1.0, tau=0.3, p=1, q=INF).haar_valid  # s = 1/p
        assert not NormParams(s=0.95, tau=0.6, p=1, q=INF).haar_valid  # s > 2(1-tau)
