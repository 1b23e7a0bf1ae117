"""Certified geometry for the Koch snowflake.

The boundary is handled through its generation-``L`` polygons.  The two
one-sided deviations differ by a factor two and both are exact:

* every point of the generation-``L`` polygon is within
  ``sqrt(3)/12 * 3**-L`` of the limit curve, and
* every point of the limit curve is within ``sqrt(3)/6 * 3**-L`` of the
  polygon (the next generation's bump tips attain it).

A box farther than the larger band from the polygon therefore lies
certifiably on one side of the snowflake; the side is read off the nearest
polygon feature (the polygon is simple and oriented counter-clockwise,
interior on the left).

Deep generations are never materialized globally.  Boxes descend together
with the handful of polygon segments near them: each generation replaces a
segment by its four children and prunes children that moved out of range.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree

EMPTY, FULL, MIXED = 0, 1, 2

_ROT = 0.5 - 0.5j * math.sqrt(3.0)  # -60 degrees: bumps point outward on a CCW ring
_L_HARD_CAP = 18
_BASE_LEVEL = 7


def _band(level, side):
    """Curve-to-polygon deviation: certification radius at generation level."""
    return (math.sqrt(3.0) / 6.0) * 3.0 ** (-level) * side


def _band_in(level, side):
    """Polygon-to-curve deviation (half the certification radius)."""
    return (math.sqrt(3.0) / 12.0) * 3.0 ** (-level) * side


def point_segment_distance(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    ln2 = dx * dx + dy * dy
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / np.maximum(ln2, 1e-300), 0.0, 1.0)
    qx = ax + t * dx
    qy = ay + t * dy
    return np.hypot(px - qx, py - qy)


def _point_box_distance(px, py, lo, hi):
    gx = np.maximum(np.maximum(lo[:, 0] - px, px - hi[:, 0]), 0.0)
    gy = np.maximum(np.maximum(lo[:, 1] - py, py - hi[:, 1]), 0.0)
    return np.hypot(gx, gy)


def segment_box_distance(ax, ay, bx, by, lo, hi):
    """Exact distance between segments and (per-row) axis boxes; 0 if they meet."""
    dx, dy = bx - ax, by - ay
    # Liang-Barsky slab clipping to detect intersection
    t0 = np.zeros_like(ax)
    t1 = np.ones_like(ax)
    ok = np.ones(ax.shape, dtype=bool)
    for p, q0, q1 in ((dx, lo[:, 0] - ax, hi[:, 0] - ax),
                      (dy, lo[:, 1] - ay, hi[:, 1] - ay)):
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = np.where(p != 0, q0 / p, np.where((q0 <= 0) & (q1 >= 0), 0.0, np.inf))
            tb = np.where(p != 0, q1 / p, np.where((q0 <= 0) & (q1 >= 0), 1.0, -np.inf))
        lo_t = np.minimum(ta, tb)
        hi_t = np.maximum(ta, tb)
        para_out = (p == 0) & ((q0 > 0) | (q1 < 0))
        t0 = np.maximum(t0, np.where(p != 0, lo_t, 0.0))
        t1 = np.minimum(t1, np.where(p != 0, hi_t, 1.0))
        ok &= ~para_out
    hit = ok & (t0 <= t1)
    d = np.full(ax.shape, np.inf)
    miss = ~hit
    if np.any(miss):
        mlo, mhi = lo[miss], hi[miss]
        a2x, a2y, b2x, b2y = ax[miss], ay[miss], bx[miss], by[miss]
        best = np.minimum(_point_box_distance(a2x, a2y, mlo, mhi),
                          _point_box_distance(b2x, b2y, mlo, mhi))
        for cx, cy in ((mlo[:, 0], mlo[:, 1]), (mhi[:, 0], mlo[:, 1]),
                       (mhi[:, 0], mhi[:, 1]), (mlo[:, 0], mhi[:, 1])):
            best = np.minimum(best, point_segment_distance(cx, cy, a2x, a2y, b2x, b2y))
        d[miss] = best
    d[hit] = 0.0
    return d


def segment_box_maxdist(ax, ay, bx, by, lo, hi):
    """max over the box of the distance to the segment (attained at a corner)."""
    out = np.zeros(ax.shape)
    for cx, cy in ((lo[:, 0], lo[:, 1]), (hi[:, 0], lo[:, 1]),
                   (hi[:, 0], hi[:, 1]), (lo[:, 0], hi[:, 1])):
        out = np.maximum(out, point_segment_distance(cx, cy, ax, ay, bx, by))
    return out


def _grouped_min(bi_sorted, vals, n, fill=np.inf):
    if len(bi_sorted) == 0:
        return np.full(n, fill)
    starts = np.concatenate([[0], np.flatnonzero(np.diff(bi_sorted)) + 1])
    out = np.full(n, fill)
    out[bi_sorted[starts]] = np.minimum.reduceat(vals, starts)
    return out


def _grouped_max(bi_sorted, vals, n, fill=-np.inf):
    if len(bi_sorted) == 0:
        return np.full(n, fill)
    starts = np.concatenate([[0], np.flatnonzero(np.diff(bi_sorted)) + 1])
    out = np.full(n, fill)
    out[bi_sorted[starts]] = np.maximum.reduceat(vals, starts)
    return out


def _refine_ring(ring):
    """One snowflake generation applied to a closed vertex ring (complex)."""
    a = ring
    b = np.roll(ring, -1)
    t = (b - a) / 3.0
    p1 = a + t
    tip = p1 + t * _ROT
    p2 = a + 2.0 * t
    return np.stack([a, p1, tip, p2], axis=1).reshape(-1)


class KochEngine:
    def __init__(self, center=(2.0, 2.0), side=1.0):
        self.center = complex(center[0], center[1])
        self.side = float(side)
        r = side / math.sqrt(3.0)
        angles = [math.pi / 2, math.pi * 7 / 6, math.pi * 11 / 6]
        self._rings = {0: self.center + r * np.exp(1j * np.array(angles))}
        self._base = {}

    # -- polygons -----------------------------------------------------------
    def ring(self, level):
        top = max(self._rings)
        while top < level:
            self._rings[top + 1] = _refine_ring(self._rings[top])
            top += 1
        return self._rings[level]

    def polygon(self, level):
        ring = self.ring(level)
        return np.stack([ring.real, ring.imag], axis=1)

    def _base_index(self, level):
        if level not in self._base:
            ring = self.ring(level)
            a = ring
            b = np.roll(ring, -1)
            mids = 0.5 * (a + b)
            tree = cKDTree(np.stack([mids.real, mids.imag], axis=1))
            self._base[level] = (a, b, tree)
        return self._base[level]

    # -- the descent --------------------------------------------------------
    def _descend(self, lo, hi, l_stop, want_distance=False):
        """Shared machinery: returns per-box nearest-feature data at the last
        generation each box still had candidate segments.

        Output arrays: dmin, cross (of nearest feature), eps of the recording
        generation, and (optionally) an upper bound for sup-over-box distance.
        """
        n = len(lo)
        diag = np.hypot(hi[:, 0] - lo[:, 0], hi[:, 1] - lo[:, 1])
        cx = 0.5 * (lo[:, 0] + hi[:, 0])
        cy = 0.5 * (lo[:, 1] + hi[:, 1])

        l_start = min(_BASE_LEVEL, max(0, l_stop))
        base_a, base_b, tree = self._base_index(l_start)
        seg_half = 0.5 * self.side * 3.0 ** (-l_start)
        radius = _band(l_start, self.side) + 6.0 * (3.0 ** (-l_start) * self.side + diag) \
            + 0.5 * diag + seg_half
        groups = tree.query_ball_point(np.stack([cx, cy], axis=1), radius, return_sorted=True)
        counts = np.fromiter((len(g) for g in groups), dtype=np.int64, count=n)
        bi = np.repeat(np.arange(n), counts)
        si = np.concatenate([np.asarray(g, dtype=np.int64) for g in groups]) if len(bi) else \
            np.empty(0, dtype=np.int64)

        # far boxes got no candidates: fall back to nearest-midpoint queries
        lonely = counts == 0
        if np.any(lonely):
            k = min(12, len(base_a))
            _, idx = tree.query(np.stack([cx[lonely], cy[lonely]], axis=1), k=k)
            idx = np.atleast_2d(idx)
            extra_bi = np.repeat(np.nonzero(lonely)[0], idx.shape[1])
            bi = np.concatenate([bi, extra_bi])
            si = np.concatenate([si, idx.reshape(-1)])
            order = np.argsort(bi, kind="stable")
            bi, si = bi[order], si[order]

        pa = base_a[si]
        pb = base_b[si]

        dmin = np.full(n, np.inf)
        cross = np.zeros(n)
        rec_eps = np.full(n, _band(l_start, self.side))
        dub = np.full(n, np.inf)
        active = np.ones(n, dtype=bool)

        level = l_start
        while True:
            eps = _band(level, self.side)
            d = segment_box_distance(pa.real, pa.imag, pb.real, pb.imag, lo[bi], hi[bi])
            dm = _grouped_min(bi, d, n)
            near = d <= dm[bi] * (1.0 + 1e-9) + 1e-300
            # tie-break toward the feature with the larger normalized cross product
            seg = pb - pa
            rel = (cx[bi] + 1j * cy[bi]) - pa
            cr = (seg.real * rel.imag - seg.imag * rel.real) / np.maximum(np.abs(seg), 1e-300)
            score = np.where(near, np.abs(cr), -np.inf)
            best_score = _grouped_max(bi, score, n)
            winner = near & (score >= best_score[bi] - 1e-300) & np.isfinite(score)
            got = np.zeros(n, dtype=bool)
            got[bi[winner]] = True
            cross_new = np.zeros(n)
            cross_new[bi[winner]] = cr[winner]
            upd = got & active
            dmin[upd] = dm[upd]
            cross[upd] = cross_new[upd]
            rec_eps[upd] = eps
            if want_distance:
                du = segment_box_maxdist(pa.real, pa.imag, pb.real, pb.imag, lo[bi], hi[bi])
                dub[upd] = _grouped_min(bi, du, n)[upd]

            if want_distance:
                # keep tightening until the polygon slack is small next to dmin
                active &= ~(rec_eps <= 0.05 * dmin)
            else:
                active &= ~(dmin > rec_eps)
            if level >= l_stop or not np.any(active):
                break
            keep = active[bi] & (d <= eps + 6.0 * (3.0 ** (-level) * self.side + diag[bi]))
            bi, pa, pb = bi[keep], pa[keep], pb[keep]
            if len(bi) == 0:
                break
            # expand into the four children
            t = (pb - pa) / 3.0
            p1 = pa + t
            tip = p1 + t * _ROT
            p2 = pa + 2.0 * t
            pa = np.concatenate([pa, p1, tip, p2])
            pb = np.concatenate([p1, tip, p2, pb])
            bi = np.concatenate([bi, bi, bi, bi])
            order = np.argsort(bi, kind="stable")
            bi, pa, pb = bi[order], pa[order], pb[order]
            level += 1

        return dmin, cross, rec_eps, dub

    # -- public queries ------------------------------------------------------
    def classify_boxes(self, lo, hi):
        n = len(lo)
        diag = float(np.max(np.hypot(hi[:, 0] - lo[:, 0], hi[:, 1] - lo[:, 1])))
        l_stop = self._l_stop(diag)
        dmin, cross, eps, _ = self._descend(lo, hi, l_stop)
        out = np.full(n, MIXED, dtype=np.int8)
        certain = dmin > eps
        out[certain & (cross > 0)] = FULL
        out[certain & (cross <= 0)] = EMPTY
        return out

    def distance_intervals(self, lo, hi):
        diag = float(np.max(np.hypot(hi[:, 0] - lo[:, 0], hi[:, 1] - lo[:, 1])))
        l_stop = self._l_stop(diag, factor=0.05)
        dmin, _, eps, dub = self._descend(lo, hi, l_stop, want_distance=True)
        # curve within eps of the polygon (below), polygon within eps/2 of the curve
        return np.maximum(dmin - eps, 0.0), dub + 0.5 * eps

    def side_of_points(self, pts, l_stop):
        pts = np.asarray(pts, float)
        dmin, cross, eps, _ = self._descend(pts, pts, min(l_stop, _L_HARD_CAP))
        certified = dmin > eps
        return cross > 0, certified

    def _l_stop(self, diag, factor=0.25):
        if diag <= 0:
            return _L_HARD_CAP
        need = (math.sqrt(3.0) / 6.0 * self.side) / max(factor * diag, 1e-300)
        return int(min(_L_HARD_CAP, max(2, math.ceil(math.log(need, 3.0)))))
