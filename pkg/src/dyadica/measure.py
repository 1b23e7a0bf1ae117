"""Certified Lebesgue measures: cells, shift differences, boundary collars.

All quantities come back as intervals ``[lower, upper]``.  The adaptive
integrator refines only boxes whose certified interval is still wide, so the
work concentrates where the relevant set boundary lives.  Reductions sum
arrays in construction order, which makes every estimate bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    DEPTH_CAP,
    EMPTY,
    FULL,
    MIXED,
    AxisBox,
    Ball,
    AxisCube,
    Domain,
    Snowflake,
    _SpiralBase,
)
from .dyadic import CellTree, DyadicCube, cell_boxes, default_roots, domain_tree


@dataclass
class MeasureEstimate:
    """Certified interval for an area; width is the unresolved Mixed mass."""

    lower: float
    upper: float
    depth_exceeded: bool = False

    def __post_init__(self):
        if self.upper < self.lower - 1e-12:
            raise ValueError("upper < lower")
        self.upper = max(self.upper, self.lower)

    @property
    def mid(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self):
        return self.upper - self.lower

    def __add__(self, other):
        return MeasureEstimate(self.lower + other.lower, self.upper + other.upper,
                               self.depth_exceeded or other.depth_exceeded)

    def scaled(self, c):
        return MeasureEstimate(c * self.lower, c * self.upper, self.depth_exceeded)


@dataclass
class ShiftPair:
    """|E(P,h)| and |F(P,h)|: one-sided shift-difference masses."""

    e_measure: MeasureEstimate
    f_measure: MeasureEstimate

    def total(self):
        return self.e_measure + self.f_measure


# ----------------------------------------------------------------------------
# exact disk oracle
# ----------------------------------------------------------------------------

def disk_cell_measure_exact(ball: Ball, box: AxisBox) -> float:
    """|disk ∩ box| by decomposition into circular segments and rectangles."""
    r = ball.radius
    x0, y0 = box.lo[0] - ball.center[0], box.lo[1] - ball.center[1]
    x1, y1 = box.hi[0] - ball.center[0], box.hi[1] - ball.center[1]

    def antider(x):
        x = min(max(x, -r), r)
        return 0.5 * (x * math.sqrt(max(r * r - x * x, 0.0)) + r * r * math.asin(x / r))

    xa, xb = max(x0, -r), min(x1, r)
    if xb <= xa:
        return 0.0
    cuts = {xa, xb}
    for y in (y0, y1):
        if abs(y) < r:
            root = math.sqrt(r * r - y * y)
            for x in (-root, root):
                if xa < x < xb:
                    cuts.add(x)
    xs = sorted(cuts)
    total = 0.0
    for a, b in zip(xs[:-1], xs[1:]):
        m = 0.5 * (a + b)
        yc = math.sqrt(max(r * r - m * m, 0.0))
        top_is_arc = yc <= y1
        bot_is_arc = -yc >= y0
        top_mid = min(y1, yc)
        bot_mid = max(y0, -yc)
        if top_mid <= bot_mid:
            continue
        piece = 0.0
        piece += (antider(b) - antider(a)) if top_is_arc else y1 * (b - a)
        piece -= (-(antider(b) - antider(a))) if bot_is_arc else y0 * (b - a)
        total += piece
    return max(total, 0.0)


# ----------------------------------------------------------------------------
# the adaptive mass integrator
# ----------------------------------------------------------------------------

def _adaptive_mass(interval_fn, root_level, root_ks, max_level, tol=0.0,
                   floor_fn=None, dim=2):
    """Sum a per-box certified interval over a lattice region, refining
    boxes while their interval is wide.  Returns (lo, hi, exceeded)."""
    level = root_level
    cells = np.asarray(root_ks, np.int64)
    acc_lo = acc_hi = 0.0
    exceeded = False
    while len(cells):
        lo, hi = cell_boxes(level, cells)
        vlo, vhi = interval_fn(lo, hi)
        wide = (vhi - vlo) > 1e-15
        if level >= max_level:
            acc_lo += float(vlo.sum())
            acc_hi += float(vhi.sum())
            exceeded = exceeded or bool(wide.any())
            break
        if floor_fn is not None and np.any(wide):
            hopeless = np.zeros(len(cells), bool)
            hopeless[wide] = floor_fn(lo[wide], hi[wide], max_level)
            settle = ~wide | hopeless
        else:
            settle = ~wide
        # optional global early stop once the remaining width is inside tol
        if tol > 0.0:
            rem = float((vhi - vlo)[~settle].sum())
            if rem <= tol:
                settle = np.ones(len(cells), bool)
        acc_lo += float(vlo[settle].sum())
        acc_hi += float(vhi[settle].sum())
        go = cells[~settle]
        if not len(go):
            break
        cells = (2 * go[:, None, :] + _child_offsets(dim)[None, :, :]).reshape(-1, dim)
        level += 1
    return acc_lo, acc_hi, exceeded


def _region_roots(domain, region, pad=0.0):
    """Lattice roots covering a region (DyadicCube, AxisBox or None=global)."""
    if region is None:
        if pad <= 0.0:
            return default_roots(domain)
        bb = domain.bounding_box()
        lo = np.floor(np.asarray(bb.lo) - pad).astype(np.int64)
        hi = np.ceil(np.asarray(bb.hi) + pad).astype(np.int64)
        ranges = [np.arange(a, b) for a, b in zip(lo, hi)]
        grids = np.meshgrid(*ranges, indexing="ij")
        return 0, np.stack([g.reshape(-1) for g in grids], axis=1)
    if isinstance(region, DyadicCube):
        return region.level, np.array([region.k], np.int64)
    if isinstance(region, AxisBox):
        # cover with cells at the finest level whose lattice aligns the box
        level = 0
        while level < 20:
            e = 2.0 ** -level
            lo = np.asarray(region.lo) / e
            hi = np.asarray(region.hi) / e
            if np.allclose(lo, np.round(lo), atol=1e-12) and \
               np.allclose(hi, np.round(hi), atol=1e-12):
                los = np.round(lo).astype(np.int64)
                his = np.round(hi).astype(np.int64)
                ranges = [np.arange(a, b) for a, b in zip(los, his)]
                grids = np.meshgrid(*ranges, indexing="ij")
                return level, np.stack([g.reshape(-1) for g in grids], axis=1)
            level += 1
        raise ValueError("AxisBox region must have dyadic corners")
    raise TypeError("region must be DyadicCube, AxisBox or None")


def cell_measure(domain: Domain, box: AxisBox, tol: float = 1e-6,
                 max_splits: int = 24) -> MeasureEstimate:
    """Certified |domain ∩ box| within ``tol`` (absolute) where reachable."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo0 = np.asarray(box.lo, float)
    hi0 = np.asarray(box.hi, float)
    dim = len(lo0)
    boxes = [(lo0, hi0)]
    acc_lo = acc_hi = 0.0
    exceeded = False
    depth = 0
    cur_lo = lo0[None, :]
    cur_hi = hi0[None, :]
    while len(cur_lo):
        vlo, vhi = domain.cell_area_intervals(cur_lo, cur_hi)
        wide = (vhi - vlo) > 1e-15
        rem = float((vhi - vlo)[wide].sum())
        if depth >= max_splits or rem <= tol:
            acc_lo += float(vlo.sum())
            acc_hi += float(vhi.sum())
            exceeded = depth >= max_splits and rem > tol
            break
        acc_lo += float(vlo[~wide].sum())
        acc_hi += float(vhi[~wide].sum())
        glo, ghi = cur_lo[wide], cur_hi[wide]
        mid = 0.5 * (glo + ghi)
        pieces_lo, pieces_hi = [], []
        from itertools import product as _prod
        for mask in _prod((0, 1), repeat=dim):
            m = np.array(mask, bool)
            pieces_lo.append(np.where(m, mid, glo))
            pieces_hi.append(np.where(m, ghi, mid))
        cur_lo = np.concatenate(pieces_lo)
        cur_hi = np.concatenate(pieces_hi)
        depth += 1
    del boxes
    return MeasureEstimate(acc_lo, acc_hi, exceeded)


# ----------------------------------------------------------------------------
# shift differences
# ----------------------------------------------------------------------------

def _shift_interval_fn(domain, h):
    h = np.asarray(h, float)

    def fn(lo, hi):
        area = np.prod(hi - lo, axis=1)
        e_lo_m, e_hi_m = domain.cell_area_intervals(lo, hi)
        s_lo_m, s_hi_m = domain.cell_area_intervals(lo + h, hi + h)
        # E(P,h) ∩ box = (E ∩ box) minus the pullback of E
        e_set_lo = np.clip(e_lo_m - s_hi_m, 0.0, None)
        e_set_hi = np.clip(np.minimum(e_hi_m, area - s_lo_m), 0.0, None)
        # F(P,h) ∩ box = (pullback of E) minus E
        f_set_lo = np.clip(s_lo_m - e_hi_m, 0.0, None)
        f_set_hi = np.clip(np.minimum(s_hi_m, area - e_lo_m), 0.0, None)
        return e_set_lo, e_set_hi, f_set_lo, f_set_hi

    return fn


def shift_difference(domain: Domain, region, h, tol: float = 0.0,
                     max_level: int = None) -> ShiftPair:
    """Certified |E(P,h)| and |F(P,h)| for the shift ``h`` inside ``region``."""
    h = np.asarray(h, float)
    if not np.any(h != 0):
        return ShiftPair(MeasureEstimate(0.0, 0.0), MeasureEstimate(0.0, 0.0))
    root_level, root_ks = _region_roots(domain, region, pad=float(np.linalg.norm(h)))
    if max_level is None:
        max_level = min(root_level + 14, DEPTH_CAP + 6)
    pair_fn = _shift_interval_fn(domain, h)

    def floor_fn(lo, hi, ml):
        f = domain.refinement_floor(lo, hi, ml)
        return f & domain.refinement_floor(lo + h, hi + h, ml)

    # run the combined-mass refinement, accumulating both parts
    level = root_level
    cells = root_ks
    offs = _child_offsets(root_ks.shape[1])
    exceeded = False
    e_acc = [0.0, 0.0]
    f_acc = [0.0, 0.0]
    while len(cells):
        lo, hi = cell_boxes(level, cells)
        e_lo, e_hi, f_lo, f_hi = pair_fn(lo, hi)
        wide = ((e_hi - e_lo) > 1e-15) | ((f_hi - f_lo) > 1e-15)
        if level >= max_level:
            settle = np.ones(len(cells), bool)
            exceeded = bool(wide.any())
        else:
            if np.any(wide):
                hopeless = np.zeros(len(cells), bool)
                hopeless[wide] = floor_fn(lo[wide], hi[wide], max_level)
                settle = ~wide | hopeless
            else:
                settle = ~wide
            if tol > 0.0:
                rem = float((e_hi - e_lo + f_hi - f_lo)[~settle].sum())
                if rem <= tol:
                    settle = np.ones(len(cells), bool)
        e_acc[0] += float(e_lo[settle].sum())
        e_acc[1] += float(e_hi[settle].sum())
        f_acc[0] += float(f_lo[settle].sum())
        f_acc[1] += float(f_hi[settle].sum())
        go = cells[~settle]
        if not len(go):
            break
        cells = (2 * go[:, None, :] + offs[None, :, :]).reshape(-1, cells.shape[1])
        level += 1
    return ShiftPair(MeasureEstimate(e_acc[0], e_acc[1], exceeded),
                     MeasureEstimate(f_acc[0], f_acc[1], exceeded))


def second_difference_mass(domain: Domain, region, h, max_level=None) -> MeasureEstimate:
    """Certified ∫ |1_E(x+2h) - 2 1_E(x+h) + 1_E(x)| dx over the region."""
    h = np.asarray(h, float)
    root_level, root_ks = _region_roots(domain, region, pad=2 * float(np.linalg.norm(h)))
    if max_level is None:
        max_level = min(root_level + 14, DEPTH_CAP + 6)

    def fn(lo, hi):
        area = np.prod(hi - lo, axis=1)
        m = []
        for shift in (0.0, 1.0, 2.0):
            mlo, mhi = domain.cell_area_intervals(lo + shift * h, hi + shift * h)
            m.append((mlo, mhi))
        # |a - 2b + c| integrated: use interval arithmetic on the three masses
        # exact when every mass is exact (0 or full)
        lo_val = np.zeros(len(lo))
        hi_val = np.zeros(len(lo))
        a_lo, a_hi = m[0]
        b_lo, b_hi = m[2]
        c_lo, c_hi = m[1]
        certain = ((a_hi - a_lo) < 1e-15) & ((b_hi - b_lo) < 1e-15) & \
                  ((c_hi - c_lo) < 1e-15) & \
                  (np.isclose(a_lo, 0) | np.isclose(a_lo, area)) & \
                  (np.isclose(b_lo, 0) | np.isclose(b_lo, area)) & \
                  (np.isclose(c_lo, 0) | np.isclose(c_lo, area))
        a = np.isclose(a_lo, area).astype(float)
        b2 = np.isclose(c_lo, area).astype(float)
        c = np.isclose(b_lo, area).astype(float)
        w = np.abs(a - 2 * b2 + c)
        lo_val[certain] = (w * area)[certain]
        hi_val[certain] = (w * area)[certain]
        hi_val[~certain] = 2 * area[~certain]
        return lo_val, hi_val

    def floor_fn(lo, hi, ml):
        f = domain.refinement_floor(lo, hi, ml)
        f &= domain.refinement_floor(lo + h, hi + h, ml)
        f &= domain.refinement_floor(lo + 2 * h, hi + 2 * h, ml)
        return f

    lo, hi, exc = _adaptive_mass(fn, root_level, root_ks, max_level,
                                 floor_fn=floor_fn, dim=root_ks.shape[1])
    return MeasureEstimate(lo, hi, exc)


# ----------------------------------------------------------------------------
# boundary distance bounds
# ----------------------------------------------------------------------------

class BoundaryDistance:
    """Certified per-box bounds for dist(x, boundary of E).

    Exact closed forms are used where the domain provides them (disk, cube,
    snowflake polygon engine); spirals give a direct upper bound only, and
    the quadtree frontier supplies the rest: a Full box is at least as far
    from the boundary as from the nearest not-certainly-Full cell, and a
    witness pair of certified Full/Empty cells caps the distance above.
    """

    def __init__(self, domain: Domain, cap: int = None):
        self.domain = domain
        self.exact = isinstance(domain, (Ball, AxisCube, Snowflake))
        self.cap = DEPTH_CAP - 2 if cap is None else cap
        self._tree = None

    @property
    def tree(self) -> CellTree:
        if self._tree is None:
            self._tree = domain_tree(self.domain, self.cap)
        return self._tree

    def intervals(self, lo, hi):
        direct = self.domain.boundary_distance_intervals(lo, hi)
        if self.exact and direct is not None:
            return direct
        tree = self.tree
        cls = self.domain.classify_boxes(lo, hi)
        n = len(lo)
        dlo = np.zeros(n)
        f_notfull = tree.forest("not_full")
        f_notempty = tree.forest("not_empty")
        full = cls == FULL
        empty = cls == EMPTY
        if np.any(full):
            d = f_notfull.min_boxdist(lo[full], hi[full]) if not f_notfull.empty() \
                else np.full(int(full.sum()), np.inf)
            d = np.minimum(d, tree.exterior_distance(lo[full], hi[full]))
            dlo[full] = d
        if np.any(empty):
            d = f_notempty.min_boxdist(lo[empty], hi[empty]) if not f_notempty.empty() \
                else np.full(int(empty.sum()), np.inf)
            dlo[empty] = d
        # upper bound from Full/Empty witnesses
        diag = np.hypot(*(hi - lo).T)
        f_full = tree.forest("full")
        f_empty = tree.forest("empty")
        d_full = f_full.min_boxdist(lo, hi) if not f_full.empty() else np.full(n, np.inf)
        d_empty = f_empty.min_boxdist(lo, hi) if not f_empty.empty() else np.full(n, np.inf)
        dhi = np.maximum(d_full, d_empty) + diag
        if direct is not None:
            dlo = np.maximum(dlo, direct[0])
            dhi = np.minimum(dhi, direct[1])
        return dlo, dhi


_BD_CACHE = {}


def boundary_distance(domain: Domain, cap=None) -> BoundaryDistance:
    key = (domain.key(), cap)
    if key not in _BD_CACHE:
        _BD_CACHE[key] = BoundaryDistance(domain, cap)
        while len(_BD_CACHE) > 8:
            _BD_CACHE.pop(next(iter(_BD_CACHE)))
    return _BD_CACHE[key]


# ----------------------------------------------------------------------------
# neighborhoods and annuli
# ----------------------------------------------------------------------------

def _child_offsets(dim):
    from itertools import product as _prod
    return np.array(list(_prod((0, 1), repeat=dim)), np.int64)


def neighborhood_measure(domain: Domain, region, delta, tol: float = 1e-4,
                         cap: int = None):
    """Certified |{dist(·, ∂E) < δ} ∩ region| for one δ or a grid of them.

    A single adaptive pass serves the whole grid: a box refines while any δ
    in the grid is still undecided on it.
    """
    deltas = np.atleast_1d(np.asarray(delta, float))
    if np.any(deltas <= 0):
        raise ValueError("delta must be positive")
    bd = boundary_distance(domain, cap)
    root_level, root_ks = _region_roots(domain, region, pad=float(deltas.max()))
    dim = root_ks.shape[1]
    max_level = DEPTH_CAP - 2 if cap is None else cap
    offs = _child_offsets(dim)

    acc_lo = np.zeros(len(deltas))
    acc_hi = np.zeros(len(deltas))
    exceeded = False
    level, cells = root_level, root_ks
    while len(cells):
        lo, hi = cell_boxes(level, cells)
        area = 2.0 ** (-level * dim)
        dlo, dhi = bd.intervals(lo, hi)
        inside = dhi[:, None] < deltas[None, :]
        outside = dlo[:, None] >= deltas[None, :]
        decided = (inside | outside).all(axis=1)
        final = level >= max_level
        settle = np.ones(len(cells), bool) if final else decided
        acc_lo += area * inside[settle].sum(axis=0)
        acc_hi += area * (~outside)[settle].sum(axis=0)
        if final:
            exceeded = bool((~decided).any())
            break
        go = cells[~settle]
        if not len(go):
            break
        cells = (2 * go[:, None, :] + offs[None, :, :]).reshape(-1, dim)
        level += 1
    out = [MeasureEstimate(float(a), float(b), exceeded)
           for a, b in zip(acc_lo, acc_hi)]
    return out[0] if np.asarray(delta).ndim == 0 else out


def annulus_measures(domain: Domain, region, alphas, cap: int = None):
    """Certified |O^α| and |O^α ∩ E| for the boundary-distance annuli
    ``sqrt(n) 2^-α-1 <= dist < sqrt(n) 2^-α`` within the region."""
    alphas = sorted(int(a) for a in np.atleast_1d(alphas))
    bd = boundary_distance(domain, cap)
    pad = math.sqrt(2) * 2.0 ** (-min(alphas)) if region is None else 0.0
    root_level, root_ks = _region_roots(domain, region, pad=pad)
    dim = root_ks.shape[1]
    sqn = math.sqrt(dim)
    max_level = DEPTH_CAP - 2 if cap is None else cap
    offs = _child_offsets(dim)
    t_lo = np.array([sqn * 2.0 ** (-a - 1) for a in alphas])
    t_hi = np.array([sqn * 2.0 ** (-a) for a in alphas])

    acc = np.zeros((len(alphas), 4))  # O_lo, O_hi, OE_lo, OE_hi
    exceeded = False
    level, cells = root_level, root_ks
    while len(cells):
        lo, hi = cell_boxes(level, cells)
        area = 2.0 ** (-level * dim)
        dlo, dhi = bd.intervals(lo, hi)
        cls = domain.classify_boxes(lo, hi)
        inside = (dlo[:, None] >= t_lo[None, :]) & (dhi[:, None] < t_hi[None, :])
        outside = (dhi[:, None] < t_lo[None, :]) | (dlo[:, None] >= t_hi[None, :])
        class_sure = (cls != MIXED)[:, None]
        decided = (outside | (inside & class_sure)).all(axis=1)
        final = level >= max_level
        settle = np.ones(len(cells), bool) if final else decided
        in_e = inside & (cls == FULL)[:, None]
        maybe = ~outside
        maybe_e = maybe & (cls != EMPTY)[:, None]
        acc[:, 0] += area * inside[settle].sum(axis=0)
        acc[:, 1] += area * maybe[settle].sum(axis=0)
        acc[:, 2] += area * in_e[settle].sum(axis=0)
        acc[:, 3] += area * maybe_e[settle].sum(axis=0)
        if final:
            exceeded = bool((~decided).any())
            break
        go = cells[~settle]
        if not len(go):
            break
        cells = (2 * go[:, None, :] + offs[None, :, :]).reshape(-1, dim)
        level += 1
    return {a: (MeasureEstimate(float(acc[i, 0]), float(acc[i, 1]), exceeded),
                MeasureEstimate(float(acc[i, 2]), float(acc[i, 3]), exceeded))
            for i, a in enumerate(alphas)}
