import math

import numpy as np
import pytest

from dyadica.geometry import AxisCube, Ball, GateViolation, SpiralLog, SpiralPower
from dyadica.dyadic import DyadicCube
from dyadica.differences import (
    DiffParams,
    local_diff_sup,
    lp_tau_norm,
    morrey_shift_modulus,
    perimeter_quotient,
    shell_masses,
    singular_family,
    spade_seminorm,
)
from dyadica.regularity import scaling_fit

INF = math.inf


class TestGates:
    def test_s_outside_order(self):
        with pytest.raises(GateViolation):
            DiffParams(s=1.2, tau=0.1, p=1, order=1)
        DiffParams(s=1.2, tau=0.1, p=1, order=2)  # fine with second differences

    def test_tau_range(self):
        with pytest.raises(GateViolation):
            DiffParams(s=0.5, tau=0.8, p=2)

    def test_morrey_exponents(self):
        with pytest.raises(GateViolation):
            morrey_shift_modulus(Ball((0, 0), 1.0), s=1.0, p=1, u=0.5)


class TestLpTau:
    def test_subset_of_unit_cell(self):
        dom = AxisCube((0.1, 0.1), (0.9, 0.6))
        area = 0.8 * 0.5
        for tau in (0.0, 0.3, 1.0):
            got = lp_tau_norm(dom, tau, 1.0)
            assert got == pytest.approx(area, rel=1e-9)

    def test_ball_quadrants(self):
        # no dyadic cube holds the origin-centered disk in one piece: the sup
        # is the quarter-disk area regardless of tau
        for tau in (0.0, 0.5):
            got = lp_tau_norm(Ball((0, 0), 1.0), tau, 1.0)
            assert got == pytest.approx(math.pi / 4, rel=1e-3)

    def test_contained_ball(self):
        got = lp_tau_norm(Ball((0.5, 0.5), 0.4), 0.0, 2.0)
        assert got == pytest.approx(math.sqrt(math.pi * 0.16), rel=1e-3)


class TestLocalDiff:
    def test_full_region_zero(self):
        dom = Ball((0, 0), 1.0)
        res = local_diff_sup(dom, DyadicCube(3, (0, 0)),
                             DiffParams(s=0.5, tau=0.0, p=1, directions=4),
                             shells=range(6, 9))
        assert res.sup_t[1] <= 1e-12

    def test_log_spiral_rate(self):
        dom = SpiralLog()
        vals = {}
        for lv in range(3, 8):
            res = local_diff_sup(dom, DyadicCube(lv, (0, 0)),
                                 DiffParams(s=0.5, tau=0.0, p=1, directions=8),
                                 shells=range(lv, min(2 * lv + 3, lv + 10)))
            vals[lv] = 0.5 * (res.sup_t[0] + res.sup_t[1])
        fit = scaling_fit(vals)
        assert abs(fit.slope - 2 * (0.5 - 1.0)) <= 0.15

    def test_half_spiral_global_decay(self):
        dom = SpiralPower(0.5)
        table = shell_masses(dom, None, range(3, 9), directions=8)
        series = {j: 0.5 * (v[0] + v[1]) for j, v in table.shells.items()}
        fit = scaling_fit(series)
        assert abs(fit.slope + 2.0 / 3.0) <= 0.1


class TestSpade:
    def test_shifted_cube_bounded(self):
        dom = AxisCube((0.3, 0.3), (1.3, 1.3))
        res = spade_seminorm(dom, DiffParams(s=0.7, tau=0.3, p=1, directions=8),
                             levels=range(0, 7), depth_budget=12)
        prof = {l: v for l, v in res.profile.items() if v > 0}
        fit = scaling_fit(prof)
        assert fit.slope <= 0.05

    def test_log_spiral_divergent_when_tau_large(self):
        dom = SpiralLog()
        res = spade_seminorm(dom, DiffParams(s=0.5, tau=0.6, p=1, directions=8),
                             levels=range(1, 7), depth_budget=13)
        prof = {l: v for l, v in res.profile.items() if v > 0 and l in res.trusted_levels}
        fit = scaling_fit(prof)
        assert abs(fit.slope - 0.2) <= 0.15

    def test_log_spiral_bounded_when_tau_small(self):
        dom = SpiralLog()
        res = spade_seminorm(dom, DiffParams(s=0.5, tau=0.4, p=1, directions=8),
                             levels=range(1, 7), depth_budget=13)
        prof = {l: v for l, v in res.profile.items() if v > 0 and l in res.trusted_levels}
        fit = scaling_fit(prof)
        assert fit.slope <= 0.05

    def test_family_tracks_boundary(self):
        fam = singular_family(Ball((0, 0), 1.0), range(2, 6))
        for lv, cube in fam.items():
            lo, hi = cube.box()
            r_lo = math.hypot(*lo)
            r_hi = math.hypot(*hi)
            assert min(r_lo, r_hi) < 1.2 and max(r_lo, r_hi) > 0.8

    def test_spiral_family_is_corner(self):
        fam = singular_family(SpiralPower(1.0), range(2, 5))
        assert all(cube.k == (0, 0) for cube in fam.values())


class TestPerimeter:
    def test_disk_quotient(self):
        pe = perimeter_quotient(Ball((0, 0), 1.0), h_grid=[2.0 ** -8, 2.0 ** -9],
                                directions=4, rel_depth=5)
        for lo, hi in pe.quotients.values():
            assert 0.5 * (lo + hi) == pytest.approx(4.0, rel=0.03)

    def test_cube_axis_shift_exact(self):
        a = 0.5
        dom = AxisCube((0.25, 0.25), (0.75, 0.75))
        pe = perimeter_quotient(dom, h_grid=[2.0 ** -7], directions=2)
        lo, hi = pe.quotients[2.0 ** -7]
        assert lo == pytest.approx(2 * a, rel=1e-6)
        assert hi == pytest.approx(2 * a, rel=1e-6)

    def test_log_spiral_quotient_stable(self):
        dom = SpiralLog()
        pe = perimeter_quotient(dom, h_grid=[2.0 ** -j for j in (6, 8, 10)],
                                directions=4, rel_depth=4)
        assert pe.stable_ratio() <= 2.0


class TestSecondDifferences:
    def test_domination_by_first(self):
        dom = Ball((0, 0), 1.0)
        t1 = shell_masses(dom, None, [6], order=1, directions=4)
        t2 = shell_masses(dom, None, [6], order=2, directions=4)
        assert t2.shells[6][0] <= 2 * t1.shells[6][1] + 1e-9


class TestMorrey:
    def test_ball_shift_modulus_bounded_at_s1(self):
        dom = Ball((0, 0), 1.0)
        res = morrey_shift_modulus(dom, s=1.0, p=1, u=2.0,
                                   h_shells=range(2, 7), ball_levels=range(0, 6),
                                   directions=4)
        vals = list(res.per_shell.values())
        assert max(vals) / min(vals) <= 4.0
        assert res.companion_norm > 0
