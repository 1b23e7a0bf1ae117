"""Planar domains with exact membership tests and certified box classification.

Every domain offers two consistent views of the same point set:

* ``contains_points`` evaluates the defining inequalities exactly
  (strict vs non-strict as written in each definition), and
* ``classify_boxes`` classifies half-open axis boxes as ``FULL`` (certified
  subset), ``EMPTY`` (certified disjoint) or ``MIXED``.  Full/Empty answers
  are never wrong; Mixed may be conservative.

Domains with closed-form geometry additionally expose exact cell areas and
certified distance-to-boundary bounds, which the measure layer picks up
automatically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EMPTY, FULL, MIXED = 0, 1, 2

TWO_PI = 2.0 * math.pi

#: hard cap on quadtree depth (cells of side 2**-DEPTH_CAP); overridable per call
DEPTH_CAP = 16

#: deepest snowflake polygon generation used for certification
SNOWFLAKE_LEVEL_CAP = 14


class DepthExceeded(RuntimeError):
    """Raised when a certification cannot be completed within the depth cap."""


class GateViolation(ValueError):
    """A parameter fell outside the hypothesis range of the rule it feeds."""

    def __init__(self, hypothesis: str, rule: str):
        super().__init__(f"{hypothesis} (required by {rule})")
        self.hypothesis = hypothesis
        self.rule = rule


@dataclass(frozen=True)
class AxisBox:
    """Half-open axis-aligned box ``[lo, hi)``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo/hi must be 1-d and of equal length")
        if not np.all(lo < hi):
            raise ValueError("AxisBox requires lo < hi on every axis")
        object.__setattr__(self, "lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in hi))

    @property
    def dim(self):
        return len(self.lo)

    def volume(self):
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def arrays(self):
        return np.asarray(self.lo, float)[None, :], np.asarray(self.hi, float)[None, :]


@dataclass(frozen=True)
class AngularWindow:
    """Half-open winding-parameter interval ``[phi_lo, phi_hi)``."""

    phi_lo: float
    phi_hi: float

    def __post_init__(self):
        width = self.phi_hi - self.phi_lo
        if not (0.0 < width <= math.pi + 1e-12):
            raise ValueError("angular window width must lie in (0, pi]")

    @property
    def width(self):
        return self.phi_hi - self.phi_lo


class Domain:
    """Base interface; concrete domains are frozen dataclasses below."""

    kind = "abstract"
    dim = 2

    # -- mandatory ---------------------------------------------------------
    def bounding_box(self) -> AxisBox:
        raise NotImplementedError

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def classify_boxes(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- optional closed-form helpers --------------------------------------
    def cell_area_intervals(self, lo, hi):
        """Certified ``[lower, upper]`` for ``|E ∩ box|`` per box.

        Default implementation is purely classification based: Full boxes
        get their area, Empty boxes zero, Mixed boxes ``[0, area]``.
        """
        cls = self.classify_boxes(lo, hi)
        area = np.prod(hi - lo, axis=1)
        lower = np.where(cls == FULL, area, 0.0)
        upper = np.where(cls == EMPTY, 0.0, area)
        return lower, upper

    def boundary_distance_intervals(self, lo, hi):
        """Certified bounds for ``dist(x, boundary)`` over each box, or None."""
        return None

    def refinement_floor(self, lo, hi, max_level):
        """Boxes whose classification provably cannot improve by ``max_level``."""
        return np.zeros(len(lo), dtype=bool)

    @property
    def singular_point(self):
        return None

    # -- serialization ------------------------------------------------------
    def params(self) -> dict:
        return {}

    def key(self) -> str:
        parts = [self.kind] + [f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                               for k, v in sorted(self.params().items())]
        return " ".join(parts)

    def __str__(self):
        return self.key()


def _corner_norms(lo, hi, center):
    """Min/max euclidean distance from ``center`` to each half-open box."""
    cx, cy = center
    dx = np.maximum(np.maximum(lo[:, 0] - cx, cx - hi[:, 0]), 0.0)
    dy = np.maximum(np.maximum(lo[:, 1] - cy, cy - hi[:, 1]), 0.0)
    dmin = np.hypot(dx, dy)
    fx = np.maximum(np.abs(lo[:, 0] - cx), np.abs(hi[:, 0] - cx))
    fy = np.maximum(np.abs(lo[:, 1] - cy), np.abs(hi[:, 1] - cy))
    dmax = np.hypot(fx, fy)
    return dmin, dmax


@dataclass(frozen=True)
class AxisCube(Domain):
    """Axis-parallel box ``[lo, hi)`` in dimension 1..3 (our "cube")."""

    lo: tuple
    hi: tuple
    kind = "cube"

    def __post_init__(self):
        box = AxisBox(self.lo, self.hi)
        object.__setattr__(self, "lo", box.lo)
        object.__setattr__(self, "hi", box.hi)
        if box.dim not in (1, 2, 3):
            raise ValueError("cube dimension must be 1, 2 or 3")

    @property
    def dim(self):
        return len(self.lo)

    def params(self):
        return {"lo": ",".join(f"{v:g}" for v in self.lo),
                "hi": ",".join(f"{v:g}" for v in self.hi)}

    def bounding_box(self):
        return AxisBox(self.lo, self.hi)

    def contains_points(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((pts >= lo) & (pts < hi), axis=1)

    def classify_boxes(self, lo, hi):
        clo = np.asarray(self.lo)
        chi = np.asarray(self.hi)
        full = np.all((lo >= clo) & (hi <= chi), axis=1)
        empty = np.any((hi <= clo) | (lo >= chi), axis=1)
        return np.where(full, FULL, np.where(empty, EMPTY, MIXED)).astype(np.int8)

    def cell_area_intervals(self, lo, hi):
        # exact: overlap of two boxes
        clo = np.asarray(self.lo)
        chi = np.asarray(self.hi)
        edges = np.clip(np.minimum(hi, chi) - np.maximum(lo, clo), 0.0, None)
        area = np.prod(edges, axis=1)
        return area, area.copy()

    def boundary_distance_intervals(self, lo, hi):
        clo = np.asarray(self.lo)
        chi = np.asarray(self.hi)
        #פer-axis distance of the box interval to [clo, chi]'s interior/exterior
        # signed distance to the rectangle boundary: for points, it is
        #   max(outside-gap) outside, min(inside-margin) inside
        out_gap = np.maximum(np.maximum(clo - hi, lo - chi), 0.0)  # per-axis outside gap (box fully past face)
        # evaluate at corners to get certified bounds: distance field is 1-Lipschitz
        n = lo.shape[1]
        corners = []
        for mask in range({1: 2, 2: 4, 3: 8}[n]):
            pick = np.array([(mask >> ax) & 1 for ax in range(n)], dtype=bool)
            corners.append(np.where(pick, hi, lo))
        vals = np.stack([self._boundary_dist_points(c) for c in corners])
        halfdiag = 0.5 * np.linalg.norm(hi - lo, axis=1)
        dlo = np.maximum(vals.min(axis=0) - halfdiag, 0.0)
        dhi = vals.max(axis=0) + halfdiag
        # tighten: corner-extremes are exact when box does not straddle a face
        del out_gap
        return dlo, dhi

    def _boundary_dist_points(self, pts):
        clo = np.asarray(self.lo)
        chi = np.asarray(self.hi)
        inside_margin = np.minimum(pts - clo, chi - pts)
        inside = np.all(inside_margin > 0, axis=1)
        outside_gap = np.maximum(np.maximum(clo - pts, pts - chi), 0.0)
        d_out = np.linalg.norm(outside_gap, axis=1)
        d_in = inside_margin.min(axis=1)
        return np.where(inside, d_in, d_out)


@dataclass(frozen=True)
class Ball(Domain):
    """Open disk ``{ |x - c| < r }`` in the plane."""

    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    kind = "ball"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))

    def params(self):
        return {"cx": self.center[0], "cy": self.center[1], "r": self.radius}

    def bounding_box(self):
        cx, cy = self.center
        r = self.radius
        return AxisBox((cx - r, cy - r), (cx + r, cy + r))

    def contains_points(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        return np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1]) < self.radius

    def classify_boxes(self, lo, hi):
        dmin, dmax = _corner_norms(lo, hi, self.center)
        return np.where(dmax < self.radius, FULL,
                        np.where(dmin >= self.radius, EMPTY, MIXED)).astype(np.int8)

    def cell_area_intervals(self, lo, hi):
        # linear-cut leaf model with a certified curvature error bound; the
        # exact segment-decomposition oracle lives in measure.py and stays an
        # independent cross-check.
        cls = self.classify_boxes(lo, hi)
        area = np.prod(hi - lo, axis=1)
        lower = np.where(cls == FULL, area, 0.0)
        upper = np.where(cls == EMPTY, 0.0, area)
        mixed = cls == MIXED
        if np.any(mixed):
            est, err = self._chord_cut(lo[mixed], hi[mixed])
            a = area[mixed]
            lower[mixed] = np.clip(est - err, 0.0, a)
            upper[mixed] = np.clip(est + err, 0.0, a)
        return lower, upper

    def _chord_cut(self, lo, hi):
        """Half-plane approximation of the disk cut through a small box.

        The signed distance f(x)=|x-c|-r is linearized at the box center;
        |f - linear| <= (diag/2)^2 / (2 (r - diag)) bounds the level-set sway,
        giving an area error <= sway * (cut length + 4*sway).
        """
        c = np.asarray(self.center)
        mid = 0.5 * (lo + hi)
        rel = mid - c
        rho = np.hypot(rel[:, 0], rel[:, 1])
        rho = np.maximum(rho, 1e-300)
        g = rel / rho[:, None]
        f0 = rho - self.radius
        w = hi - lo
        diag = np.hypot(w[:, 0], w[:, 1])
        denom = np.maximum(self.radius - diag, 0.25 * self.radius)
        sway = (0.5 * diag) ** 2 / (2.0 * denom)
        est = _halfplane_box_area(mid, g, f0, lo, hi)
        err = sway * (diag + 4.0 * sway)
        return est, err

    def boundary_distance_intervals(self, lo, hi):
        dmin, dmax = _corner_norms(lo, hi, self.center)
        r = self.radius
        # dist(x, circle) = |r - |x-c||; exact interval from the radius range
        inner = np.where((dmin <= r) & (dmax >= r), 0.0,
                         np.minimum(np.abs(dmin - r), np.abs(dmax - r)))
        outer = np.maximum(np.abs(dmin - r), np.abs(dmax - r))
        return inner, outer


def _halfplane_box_area(anchor, normal, offset, lo, hi):
    """Area of ``{x in box : (x-anchor)·normal + offset < 0}``, vectorized.

    Exact for the linear model: after mirroring the box so that both gradient
    components are nonnegative, the cut height is a nonincreasing clamped
    linear function of x and integrates in closed form.
    """
    w = hi[:, 0] - lo[:, 0]
    h = hi[:, 1] - lo[:, 1]
    a = normal[:, 0].copy()
    b = normal[:, 1].copy()
    c = (lo[:, 0] - anchor[:, 0]) * a + (lo[:, 1] - anchor[:, 1]) * b + offset
    # mirror axes so a, b >= 0 (area is invariant)
    c = np.where(b < 0, c + b * h, c)
    b = np.abs(b)
    c = np.where(a < 0, c + a * w, c)
    a = np.abs(a)

    out = np.empty_like(c)
    degenerate = (a <= 1e-14) & (b <= 1e-14)
    vert = (b <= 1e-14 * np.maximum(a, 1.0)) & ~degenerate
    horiz = (a <= 1e-14 * np.maximum(b, 1.0)) & ~degenerate & ~vert
    gen = ~(degenerate | vert | horiz)

    out[degenerate] = np.where(c[degenerate] < 0, (w * h)[degenerate], 0.0)
    if np.any(vert):
        out[vert] = (h * np.clip(-c / np.maximum(a, 1e-300), 0.0, w))[vert]
    if np.any(horiz):
        out[horiz] = (w * np.clip(-c / np.maximum(b, 1e-300), 0.0, h))[horiz]
    if np.any(gen):
        ag, bg, cg = a[gen], b[gen], c[gen]
        wg, hg = w[gen], h[gen]
        # cut height y*(u) = -(a u + c)/b is nonincreasing in u
        s1 = np.clip(-(cg + bg * hg) / ag, 0.0, wg)   # y* >= h for u <= s1
        s2 = np.clip(-cg / ag, 0.0, wg)               # y* <= 0 for u >= s2
        mid = -(0.5 * ag * (s2 ** 2 - s1 ** 2) + cg * (s2 - s1)) / bg
        out[gen] = hg * s1 + mid
    return out


# ----------------------------------------------------------------------------
# spirals
# ----------------------------------------------------------------------------

_LN2_SQ = math.log(2.0) ** 2


def _log2(x):
    return np.log2(x)


class _SpiralBase(Domain):
    """Region swept between a decreasing spiral r=f(phi) and its half-turn.

    A point at radius r and polar angle theta belongs to the set iff the
    winding offset ``delta = (u(r) - theta) mod 2π`` lies in ``(0, π]`` and
    the implied winding ``phi = u(r) - delta`` satisfies ``phi >= 2π``, where
    ``u = f^{-1}``.
    """

    @property
    def singular_point(self):
        return (0.0, 0.0)

    def outer_radius(self):
        return float(self._f(np.array([TWO_PI]))[0])

    def bounding_box(self):
        r = self.outer_radius()
        return AxisBox((-r, -r), (r, r))

    # subclasses: _f(phi)->r (vector), _u(r)->phi (vector, exact or certified)
    def _f(self, phi):
        raise NotImplementedError

    def _u(self, r):
        raise NotImplementedError

    def strip_width(self, r):
        """Exact width ``f(u) - f(u+π)`` of the winding strip at outer radius r."""
        r = np.asarray(r, float)
        u = self._u(r)
        return r - self._f(u + math.pi)

    def window(self, r):
        rmax = self.outer_radius()
        if not (0.0 < r < rmax):
            raise GateViolation(f"radius r={r!r} outside (0, {rmax!r})", "spiral window")
        u = float(self._u(np.array([r]))[0])
        return AngularWindow(u - math.pi, u)

    def contains_points(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        r = np.hypot(pts[:, 0], pts[:, 1])
        ok = (r > 0) & (r < self.outer_radius())
        out = np.zeros(len(pts), dtype=bool)
        if not np.any(ok):
            return out
        theta = np.mod(np.arctan2(pts[ok, 1], pts[ok, 0]), TWO_PI)
        u = self._u(r[ok])
        delta = np.mod(u - theta, TWO_PI)
        phi = u - delta
        out[ok] = (delta > 0) & (delta <= math.pi) & (phi >= TWO_PI)
        return out

    def boundary_crossing_gap(self, pts):
        """Exact upper bound for dist(p, boundary): nearest radial crossing,
        the closing segment at angle 0, or the origin."""
        pts = np.atleast_2d(np.asarray(pts, float))
        x, y = pts[:, 0], pts[:, 1]
        r = np.hypot(x, y)
        ub = r.copy()  # the origin is a boundary point
        # closing radial segment {angle 0, f(3π) <= rho <= f(2π)}
        r_in = float(self._f(np.array([3 * math.pi]))[0])
        r_out = self.outer_radius()
        segdx = np.maximum(np.maximum(r_in - x, x - r_out), 0.0)
        ub = np.minimum(ub, np.hypot(segdx, np.abs(y)))
        pos = r > 0
        if np.any(pos):
            theta = np.mod(np.arctan2(y[pos], x[pos]), TWO_PI)
            rp = r[pos]
            u = self._u(np.minimum(rp, r_out * (1 - 1e-15)))
            k0 = np.round((u - theta) / math.pi)
            best = np.full(pos.sum(), np.inf)
            for dk in (-2.0, -1.0, 0.0, 1.0, 2.0):
                k = k0 + dk
                psi = theta + math.pi * k
                even = np.mod(k, 2.0) == 0.0
                valid = np.where(even, psi >= TWO_PI, psi >= 3 * math.pi)
                with np.errstate(all="ignore"):
                    gap = np.abs(rp - self._f(np.maximum(psi, TWO_PI)))
                best = np.where(valid, np.minimum(best, gap), best)
            ub[pos] = np.minimum(ub[pos], best)
        return ub

    def classify_boxes(self, lo, hi):
        n = len(lo)
        out = np.full(n, MIXED, dtype=np.int8)
        rmin, rmax = _corner_norms(lo, hi, (0.0, 0.0))
        r_out = self.outer_radius()
        out[rmin >= r_out] = EMPTY
        todo = (rmin > 0) & (rmin < r_out)
        if not np.any(todo):
            return out
        idx = np.nonzero(todo)[0]
        blo, bhi = lo[idx], hi[idx]
        rmn, rmx = rmin[idx], np.minimum(rmax[idx], r_out * (1 - 1e-15))
        capped = rmax[idx] >= r_out  # box pokes past the outermost arc

        # angle interval from the four corners, box strictly away from origin
        cx = 0.5 * (blo[:, 0] + bhi[:, 0])
        cy = 0.5 * (blo[:, 1] + bhi[:, 1])
        tc = np.arctan2(cy, cx)
        tlo = np.full(len(idx), np.inf)
        thi = np.full(len(idx), -np.inf)
        for px, py in ((blo[:, 0], blo[:, 1]), (bhi[:, 0], blo[:, 1]),
                       (bhi[:, 0], bhi[:, 1]), (blo[:, 0], bhi[:, 1])):
            rel = np.arctan2(py, px) - tc
            rel = np.mod(rel + math.pi, TWO_PI) - math.pi
            tlo = np.minimum(tlo, tc + rel)
            thi = np.maximum(thi, tc + rel)

        u_hi = self._u(rmn)   # u decreasing in r
        u_lo = self._u(rmx)
        zlo = u_lo - thi
        zhi = u_hi - tlo
        width = zhi - zlo
        decidable = width < TWO_PI - 1e-9
        m = np.floor(zlo / TWO_PI)
        a = zlo - TWO_PI * m
        b = zhi - TWO_PI * m
        no_wrap = b <= TWO_PI
        # membership needs the offset in (0, pi] AND a winding phi >= 2 pi,
        # i.e. offset <= u - 2 pi (binding only on the outermost winding)
        full = decidable & no_wrap & (a > 0) & (b <= math.pi) & \
            (b <= u_lo - TWO_PI) & ~capped
        empty = decidable & no_wrap & ((a > math.pi) | (a > u_hi - TWO_PI))
        sub = np.where(full, FULL, np.where(empty, EMPTY, MIXED)).astype(np.int8)
        out[idx] = sub
        return out

    def refinement_floor(self, lo, hi, max_level):
        # hopeless once even the widest strip in the cell (at its outermost
        # radius) is thinner than the deepest reachable cell
        rmin, rmax = _corner_norms(lo, hi, (0.0, 0.0))
        cell = 2.0 ** (-max_level)
        r_out = self.outer_radius()
        r = np.clip(rmax, 1e-300, r_out * (1 - 1e-12))
        width = self.strip_width(r)
        return (rmin < r_out) & (width < cell)

    def boundary_distance_intervals(self, lo, hi):
        # upper bound only (lower bounds come from the cell-tree frontier)
        corners = [np.stack([lo[:, 0], lo[:, 1]], axis=1),
                   np.stack([hi[:, 0], lo[:, 1]], axis=1),
                   np.stack([hi[:, 0], hi[:, 1]], axis=1),
                   np.stack([lo[:, 0], hi[:, 1]], axis=1)]
        ub = np.max(np.stack([self.boundary_crossing_gap(c) for c in corners]), axis=0)
        w = hi - lo
        ub = ub + 0.5 * np.hypot(w[:, 0], w[:, 1])
        dlo = np.zeros_like(ub)
        return dlo, ub


@dataclass(frozen=True)
class SpiralPower(_SpiralBase):
    """Strip between ``r = phi^-alpha`` and its half-turn, ``phi >= 2π``."""

    alpha: float = 1.0
    kind = "spiral_power"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        object.__setattr__(self, "alpha", float(self.alpha))

    def params(self):
        return {"alpha": self.alpha}

    def _f(self, phi):
        return np.asarray(phi, float) ** (-self.alpha)

    def _u(self, r):
        return np.asarray(r, float) ** (-1.0 / self.alpha)

    def j_alpha(self, level):
        """Level below which shifts start to resolve individual windings."""
        return (1.0 + 1.0 / self.alpha) * level


@dataclass(frozen=True)
class SpiralLog(_SpiralBase):
    """Strip between ``r = 1/(phi log2(phi)^2)`` and its half-turn."""

    kind = "spiral_log"

    def _f(self, phi):
        phi = np.asarray(phi, float)
        return 1.0 / (phi * _log2(phi) ** 2)

    def _u(self, r):
        # solve phi * log2(phi)^2 = 1/r; g is strictly increasing on [2π, ∞)
        r = np.asarray(r, float)
        target = 1.0 / r
        lo = np.full(r.shape, TWO_PI)
        hi = np.maximum(target * _LN2_SQ, 16.0)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            g = mid * _log2(mid) ** 2
            lo = np.where(g < target, mid, lo)
            hi = np.where(g < target, hi, mid)
        return 0.5 * (lo + hi)

    def j_alpha(self, level):
        return 2.0 * level


# ----------------------------------------------------------------------------
# graph-bounded domains
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class LipschitzGraph(Domain):
    """Open region below a piecewise-linear graph: ``base < y < phi(x)``."""

    xs: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    ys: tuple = (0.6, 1.1, 0.8, 1.3, 0.9)
    base: float = 0.1
    kind = "lipschitz_graph"

    def __post_init__(self):
        xs = tuple(float(v) for v in self.xs)
        ys = tuple(float(v) for v in self.ys)
        if len(xs) != len(ys) or len(xs) < 2:
            raise ValueError("need matching knot arrays with >= 2 knots")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("knot abscissae must increase")
        if min(ys) <= self.base:
            raise ValueError("graph must stay above the base height")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "base", float(self.base))

    def params(self):
        return {"base": self.base,
                "knots": ",".join(f"{x:g}:{y:g}" for x, y in zip(self.xs, self.ys))}

    def key(self):
        p = self.params()
        return f"{self.kind} base={p['base']:g} knots={p['knots']}"

    @property
    def lipschitz_constant(self):
        xs, ys = np.asarray(self.xs), np.asarray(self.ys)
        return float(np.max(np.abs(np.diff(ys) / np.diff(xs))))

    def bounding_box(self):
        return AxisBox((self.xs[0], self.base), (self.xs[-1], max(self.ys)))

    def _phi(self, x):
        return np.interp(x, self.xs, self.ys)

    def _phi_range(self, a, b):
        """Exact min/max of the graph over [a, b] (clipped to the window)."""
        a = np.clip(a, self.xs[0], self.xs[-1])
        b = np.clip(b, self.xs[0], self.xs[-1])
        va, vb = self._phi(a), self._phi(b)
        gmin = np.minimum(va, vb)
        gmax = np.maximum(va, vb)
        for x, y in zip(self.xs, self.ys):
            interior = (a < x) & (x < b)
            gmin = np.where(interior, np.minimum(gmin, y), gmin)
            gmax = np.where(interior, np.maximum(gmax, y), gmax)
        return gmin, gmax

    def contains_points(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        x, y = pts[:, 0], pts[:, 1]
        inside_x = (x > self.xs[0]) & (x < self.xs[-1])
        return inside_x & (y > self.base) & (y < self._phi(x))

    def classify_boxes(self, lo, hi):
        a, b = lo[:, 0], hi[:, 0]
        c, d = lo[:, 1], hi[:, 1]
        gmin, gmax = self._phi_range(a, b)
        full = (a > self.xs[0]) & (b <= self.xs[-1]) & (c > self.base) & (d <= gmin)
        empty = (b <= self.xs[0]) | (a >= self.xs[-1]) | (d <= self.base) | (c >= gmax)
        return np.where(full, FULL, np.where(empty, EMPTY, MIXED)).astype(np.int8)

    def cell_area_intervals(self, lo, hi):
        # exact via the piecewise-linear antiderivative of clamp(phi, c, d)
        a, b = lo[:, 0], hi[:, 0]
        c, d = lo[:, 1], hi[:, 1]
        a2 = np.clip(a, self.xs[0], self.xs[-1])
        b2 = np.clip(b, self.xs[0], self.xs[-1])
        area = np.zeros(len(lo))
        for j, x0 in enumerate(self.xs[:-1]):
            x1 = self.xs[j + 1]
            y0, y1 = self.ys[j], self.ys[j + 1]
            s0 = np.clip(a2, x0, x1)
            s1 = np.clip(b2, x0, x1)
            seg = s1 > s0
            if not np.any(seg):
                continue
            area[seg] += _trapezoid_clamped(s0[seg], s1[seg], x0, x1, y0, y1,
                                            np.maximum(c[seg], self.base), d[seg])
        return area, area.copy()


def _trapezoid_clamped(s0, s1, x0, x1, y0, y1, c, d):
    """∫_{s0}^{s1} (min(phi,d) - c)_+ dx with phi linear on [x0,x1], per element."""
    slope = (y1 - y0) / (x1 - x0)
    out = np.zeros_like(s0)
    # split at the points where phi crosses the clamp levels c and d
    crossings = []
    for level in (c, d):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(slope != 0, x0 + (level - y0) / slope, np.inf)
        crossings.append(np.clip(t, s0, s1))
    t1 = np.minimum(crossings[0], crossings[1])
    t2 = np.maximum(crossings[0], crossings[1])
    pieces = [(s0, np.clip(t1, s0, s1)), (np.clip(t1, s0, s1), np.clip(t2, s0, s1)),
              (np.clip(t2, s0, s1), s1)]
    for p0, p1 in pieces:
        mid = 0.5 * (p0 + p1)
        phi_mid = y0 + slope * (mid - x0)
        h = np.clip(np.minimum(phi_mid, d) - c, 0.0, None)
        out += h * (p1 - p0)
    return out


@dataclass(frozen=True)
class HoelderCusp(Domain):
    """Open region ``{ -1 < x < 1, |x|^eps < y < 1 }`` with a cusp at 0."""

    eps: float = 0.5
    kind = "hoelder_cusp"

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        object.__setattr__(self, "eps", float(self.eps))

    def params(self):
        return {"eps": self.eps}

    def bounding_box(self):
        return AxisBox((-1.0, 0.0), (1.0, 1.0))

    def contains_points(self, pts):
        pts = np.atleast_2d(np.asarray(pts, float))
        x, y = pts[:, 0], pts[:, 1]
        return (x > -1) & (x < 1) & (y < 1) & (y > np.abs(x) ** self.eps)

    def _g_range(self, a, b):
        ga = np.abs(a) ** self.eps
        gb = np.abs(b) ** self.eps
        gmax = np.maximum(ga, gb)
        gmin = np.where((a <= 0) & (b >= 0), 0.0, np.minimum(ga, gb))
        return gmin, gmax

    def classify_boxes(self, lo, hi):
        a, b = lo[:, 0], hi[:, 0]
        c, d = lo[:, 1], hi[:, 1]
        gmin, gmax = self._g_range(a, b)
        full = (a > -1) & (b <= 1) & (d <= 1) & (c >= gmax)
        empty = (b <= -1) | (a >= 1) | (c >= 1) | (d <= gmin)
        return np.where(full & ~empty, FULL, np.where(empty, EMPTY, MIXED)).astype(np.int8)

    def cell_area_intervals(self, lo, hi):
        # exact: integrate (min(1,d) - max(c, |x|^eps))_+ with the power antiderivative
        a = np.clip(lo[:, 0], -1.0, 1.0)
        b = np.clip(hi[:, 0], -1.0, 1.0)
        c = lo[:, 1]
        d = np.minimum(hi[:, 1], 1.0)
        area = np.zeros(len(lo))
        for sgn in (-1.0, 1.0):
            if sgn < 0:
                s0, s1 = np.clip(-b, 0, 1), np.clip(-a, 0, 1)
            else:
                s0, s1 = np.clip(a, 0, 1), np.clip(b, 0, 1)
            seg = s1 > s0
            if not np.any(seg):
                continue
            area[seg] += _cusp_strip_area(s0[seg], s1[seg], np.maximum(c[seg], 0.0),
                                          d[seg], self.eps)
        return area, area.copy()


def _cusp_strip_area(x0, x1, c, d, eps):
    """∫_{x0}^{x1} (min(d,1) - max(c, x^eps))_+ dx on x >= 0, per element."""
    def antider(x):
        return x ** (1.0 + eps) / (1.0 + eps)

    # crossing points x^eps = c and = d
    xc = np.clip(np.where(c > 0, c, 0.0) ** (1.0 / eps), x0, x1)
    xd = np.clip(np.clip(d, 0.0, None) ** (1.0 / eps), x0, x1)
    out = np.zeros_like(x0)
    # region 1: x in [x0, xc): curve below c -> height (d - c)
    out += np.clip(d - c, 0, None) * np.clip(xc - x0, 0, None)
    # region 2: x in [xc, xd): height (d - x^eps)
    lo2, hi2 = xc, np.maximum(xd, xc)
    out += np.clip(d, 0, None) * (hi2 - lo2) - (antider(hi2) - antider(lo2))
    # region 3: x >= xd: curve above d -> zero
    return np.clip(out, 0.0, None)


# ----------------------------------------------------------------------------
# snowflake
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Snowflake(Domain):
    """Koch snowflake built on a unit-side triangle centered at (2, 2).

    The placement keeps the whole domain at distance > 1 from both axes so
    the singular dyadic corner at the origin never interferes with it.
    """

    center: tuple = (2.0, 2.0)
    side: float = 1.0
    kind = "snowflake"

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "side", float(self.side))
        from . import koch  # deferred import to avoid cycle
        object.__setattr__(self, "_engine", koch.KochEngine(self.center, self.side))

    def params(self):
        return {}

    def key(self):
        return self.kind

    def bounding_box(self):
        cx, cy = self.center
        r = self.side * 0.7
        return AxisBox((cx - r, cy - r), (cx + r, cy + r))

    def contains_points(self, pts, level=None):
        pts = np.atleast_2d(np.asarray(pts, float))
        inside, certified = self._engine.side_of_points(pts, SNOWFLAKE_LEVEL_CAP)
        if not np.all(certified):
            raise DepthExceeded("point within the polygon uncertainty band at the level cap")
        return inside

    def classify_boxes(self, lo, hi):
        return self._engine.classify_boxes(lo, hi)

    def boundary_distance_intervals(self, lo, hi):
        return self._engine.distance_intervals(lo, hi)

    def polygon(self, level):
        return self._engine.polygon(level)


def snowflake_polygon(level, center=(2.0, 2.0), side=1.0):
    """Closed generation-``level`` polygon (vertex ring, 3*4^level edges)."""
    if level < 0 or level > SNOWFLAKE_LEVEL_CAP:
        raise DepthExceeded(f"polygon level {level} outside [0, {SNOWFLAKE_LEVEL_CAP}]")
    from . import koch
    return koch.KochEngine(tuple(center), side).polygon(level)


# ----------------------------------------------------------------------------
# module-level operations
# ----------------------------------------------------------------------------

def contains(domain: Domain, point) -> bool:
    """Exact membership of a single point (strictness as defined)."""
    return bool(domain.contains_points(np.asarray(point, float)[None, :])[0])


def classify_cell(domain: Domain, box: AxisBox) -> int:
    """Certified Full/Empty/Mixed classification of one box."""
    lo, hi = box.arrays()
    return int(domain.classify_boxes(lo, hi)[0])


def spiral_window(domain, r: float) -> AngularWindow:
    if not isinstance(domain, _SpiralBase):
        raise TypeError("spiral_window needs a spiral domain")
    return domain.window(r)


_DOMAIN_KINDS = {}


def _register(cls):
    _DOMAIN_KINDS[cls.kind] = cls
    return cls


for _cls in (AxisCube, Ball, SpiralPower, SpiralLog, Snowflake, HoelderCusp, LipschitzGraph):
    _register(_cls)


def parse_domain(text: str) -> Domain:
    """Parse flat records like ``"spiral_power alpha=0.5"`` or ``"ball r=1"``."""
    tokens = text.replace("domain=", "", 1).split()
    if not tokens:
        raise ValueError("empty domain description")
    kind = tokens[0]
    kv = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ValueError(f"malformed token {tok!r}")
        k, v = tok.split("=", 1)
        kv[k] = v
    if kind == "cube":
        lo = tuple(float(v) for v in kv.pop("lo", "0,0").split(","))
        hi = tuple(float(v) for v in kv.pop("hi", "1,1").split(","))
        return AxisCube(lo, hi)
    if kind == "ball":
        return Ball((float(kv.pop("cx", 0)), float(kv.pop("cy", 0))), float(kv.pop("r", 1)))
    if kind == "spiral_power":
        return SpiralPower(float(kv.pop("alpha", 1)))
    if kind == "spiral_log":
        return SpiralLog()
    if kind == "snowflake":
        return Snowflake()
    if kind == "hoelder_cusp":
        return HoelderCusp(float(kv.pop("eps", 0.5)))
    if kind == "lipschitz_graph":
        if "knots" in kv:
            pairs = [p.split(":") for p in kv.pop("knots").split(",")]
            xs = tuple(float(a) for a, _ in pairs)
            ys = tuple(float(b) for _, b in pairs)
            return LipschitzGraph(xs, ys, float(kv.pop("base", 0.1)))
        return LipschitzGraph(base=float(kv.pop("base", 0.1)))
    raise ValueError(f"unknown domain kind {kind!r}")
