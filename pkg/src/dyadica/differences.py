"""Difference-based seminorms for indicator functions.

The only measured primitive is the pair |E(P,h)|, |F(P,h)| (one-sided shift
masses): first-difference L^p masses are p-independent set measures, so one
sampled table of shell masses serves every parameter combination.  Shells are
dyadic in |h|, with a few magnitudes and directions sampled per shell; the
sup over h is therefore undersampled and the computed values are biased down,
never up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    DEPTH_CAP,
    MIXED,
    Ball,
    Domain,
    GateViolation,
    Snowflake,
    _SpiralBase,
)
from .dyadic import DyadicCube, _keys, cell_boxes, domain_tree
from .measure import MeasureEstimate, second_difference_mass, shift_difference

LN2 = math.log(2.0)

#: |h| factors sampled inside one dyadic shell [2^-j, 2^-j+1)
SHELL_MAGNITUDES = (1.1, 1.5, 1.9)


@dataclass
class DiffParams:
    s: float
    tau: float
    p: float
    q: float = math.inf
    order: int = 1
    directions: int = 16
    max_shell: int = 12

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("difference order must be 1 or 2")
        if not (0.0 < self.s < self.order):
            raise GateViolation(
                f"s={self.s} outside (0, {self.order})",
                "difference characterization of the B-scale")
        if not (0.0 <= self.tau <= 1.0 / self.p):
            raise GateViolation(
                f"tau={self.tau} outside [0, 1/p]",
                "difference characterization of the B-scale")


@dataclass
class ShellTable:
    """max over sampled shifts of the difference mass, per dyadic shell."""

    shells: dict            # j -> (lo, hi) for max_h ||Δ_h 1_E||_{L^1(P)}
    region: object
    order: int

    def value(self, j):
        return self.shells.get(j)


_SHELL_CACHE = {}


def _region_key(region):
    if region is None:
        return "global"
    return f"Q({region.level},{region.k})"


def _directions(n):
    angles = np.arange(n) * math.pi / n
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def shell_masses(domain: Domain, region, shells, order: int = 1,
                 directions: int = 16, rel_depth: int = 4,
                 depth_budget: int = 14) -> ShellTable:
    """Sampled sup over each dyadic shell of the difference mass in a region.

    ``rel_depth`` extra levels below the shift scale bound the certification
    width at roughly ``2^-rel_depth`` of the measured value; the per-region
    depth budget caps how deep a shell can be trusted.
    """
    key = (domain.key(), _region_key(region), order, directions, rel_depth,
           depth_budget)
    table = _SHELL_CACHE.setdefault(key, {})
    dirs = _directions(directions)
    base_level = 0 if region is None else region.level
    out = {}
    for j in sorted(set(int(j) for j in shells)):
        if j not in table:
            max_level = min(j + rel_depth, base_level + depth_budget, DEPTH_CAP + 6)
            if max_level < j + 2:
                continue  # shell finer than the depth budget: not measurable
            best_lo, best_hi = 0.0, 0.0
            for mag in SHELL_MAGNITUDES:
                for d in dirs:
                    h = d * (mag * 2.0 ** -j)
                    if order == 1:
                        pair = shift_difference(domain, region, h, max_level=max_level)
                        est = pair.total()
                    else:
                        est = second_difference_mass(domain, region, h,
                                                     max_level=max_level)
                    if est.lower > best_lo:
                        best_lo = est.lower
                    if est.upper > best_hi:
                        best_hi = est.upper
            table[j] = (best_lo, best_hi)
        if j in table:
            out[j] = table[j]
    return ShellTable(out, region, order)


@dataclass
class LocalDiffResult:
    per_t: dict             # t -> (value_lo, value_hi), the L^p norm at the shell
    sup_t: tuple            # interval for sup_t t^-s * value(t)
    sup_shell: int
    params: DiffParams


def local_diff_sup(domain: Domain, region, params: DiffParams,
                   shells=None, rel_depth: int = 4,
                   depth_budget: int = 14) -> LocalDiffResult:
    """Per-shell difference masses and ``sup_t t^-s ||Δ_h 1_E||_{L^p(P)}``."""
    base_level = 0 if region is None else max(region.level, 0)
    if shells is None:
        shells = range(base_level, params.max_shell + 1)
    table = shell_masses(domain, region, shells, order=params.order,
                         directions=params.directions, rel_depth=rel_depth,
                         depth_budget=depth_budget)
    per_t = {}
    best = (0.0, 0.0)
    best_shell = -1
    for j, (m_lo, m_hi) in sorted(table.shells.items()):
        t = 2.0 ** (-j + 1)
        v_lo = m_lo ** (1.0 / params.p)
        v_hi = m_hi ** (1.0 / params.p)
        per_t[t] = (v_lo, v_hi)
        w = t ** (-params.s)
        if w * v_hi > best[1]:
            best = (w * v_lo, w * v_hi)
            best_shell = j
    return LocalDiffResult(per_t, best, best_shell, params)


def _aggregate_q(table: ShellTable, params: DiffParams):
    """q-aggregation of t^-s-weighted shell masses (interval arithmetic)."""
    lo = hi = 0.0
    if params.q == math.inf:
        for j, (m_lo, m_hi) in table.shells.items():
            t = 2.0 ** (-j + 1)
            w = t ** (-params.s)
            lo = max(lo, w * m_lo ** (1.0 / params.p))
            hi = max(hi, w * m_hi ** (1.0 / params.p))
        return lo, hi
    for j, (m_lo, m_hi) in table.shells.items():
        t = 2.0 ** (-j + 1)
        w = t ** (-params.s)
        lo += (w * m_lo ** (1.0 / params.p)) ** params.q * LN2
        hi += (w * m_hi ** (1.0 / params.p)) ** params.q * LN2
    return lo ** (1.0 / params.q), hi ** (1.0 / params.q)


# ----------------------------------------------------------------------------
# cube families along the singular structure
# ----------------------------------------------------------------------------

def singular_family(domain: Domain, levels, tree_depth: int = 12):
    """One probing cube per level: the nested corner cubes at a spiral's
    accumulation point, or the most balanced boundary cell otherwise."""
    out = {}
    if isinstance(domain, _SpiralBase):
        for lv in levels:
            out[lv] = DyadicCube(lv, (0, 0))
        return out
    tree = domain_tree(domain, tree_depth)
    for lv in levels:
        ks, cls, m_lo, m_hi = tree.cells_at(lv)
        sel = cls == MIXED
        if not sel.any():
            continue
        mids = 0.5 * (m_lo[sel] + m_hi[sel])
        area = 2.0 ** (-2 * lv)
        balance = np.minimum(mids, area - mids)
        cand = ks[sel]
        order = np.argsort(_keys(cand), kind="stable")
        bal_sorted = balance[order]
        out[lv] = DyadicCube(lv, tuple(cand[order][int(np.argmax(bal_sorted))]))
    return out


@dataclass
class SpadeResult:
    value: tuple                  # interval for the seminorm over the family
    maximizer: DyadicCube | None
    profile: dict                 # level -> weighted interval midpoint
    profile_intervals: dict
    trusted_levels: list
    params: DiffParams


def trusted_level_cap(domain: Domain, depth_budget: int, rel_depth: int = 4):
    """Deepest family level whose dominant shift shell fits the depth budget.

    On a spiral the extremal shifts live at shell ``(1 + 1/alpha) * level``;
    elsewhere at the cube's own scale.
    """
    if isinstance(domain, _SpiralBase):
        rate = domain.j_alpha(1.0)
        return int((depth_budget - rel_depth - 1) / max(rate - 1.0, 1e-9))
    return depth_budget - rel_depth - 2


def spade_seminorm(domain: Domain, params: DiffParams, levels=None,
                   depth_budget: int = 14, rel_depth: int = 4) -> SpadeResult:
    """Morrey-weighted difference seminorm over the singular cube family."""
    if levels is None:
        cap = trusted_level_cap(domain, depth_budget, rel_depth)
        levels = list(range(0, max(cap, 2) + 1))
    family = singular_family(domain, levels)
    n = domain.dim
    best = (0.0, 0.0)
    best_cube = None
    profile = {}
    intervals = {}
    for lv, cube in sorted(family.items()):
        shells = range(max(lv, 0),
                       min(params.max_shell + lv, lv + depth_budget - rel_depth) + 1)
        table = shell_masses(domain, cube, shells, order=params.order,
                             directions=params.directions, rel_depth=rel_depth,
                             depth_budget=depth_budget)
        if not table.shells:
            continue
        a_lo, a_hi = _aggregate_q(table, params)
        w = 2.0 ** (lv * n * params.tau)
        intervals[lv] = (w * a_lo, w * a_hi)
        profile[lv] = 0.5 * (intervals[lv][0] + intervals[lv][1])
        if intervals[lv][1] > best[1]:
            best = intervals[lv]
            best_cube = cube
    trusted = [lv for lv in profile
               if lv <= trusted_level_cap(domain, depth_budget, rel_depth)]
    return SpadeResult(best, best_cube, profile, intervals, trusted, params)


# ----------------------------------------------------------------------------
# companion norms
# ----------------------------------------------------------------------------

def lp_tau_norm(domain: Domain, tau: float, p: float, coarse_levels: int = 6):
    """sup over dyadic P with |P| >= 1 of |P|^{-tau} |E ∩ P|^{1/p}."""
    tree = domain_tree(domain, 8)
    ks, _, m_lo, m_hi = tree.cells_at(max(0, tree.root_level))
    mids = 0.5 * (m_lo + m_hi)
    if tree.root_level < 0:
        raise NotImplementedError("coarse-rooted trees not used by built-ins")
    best = 0.0
    for lv in range(0, -coarse_levels, -1):
        anc = ks >> (0 - lv)
        key = _keys(anc)
        order = np.argsort(key, kind="stable")
        sk = key[order]
        starts = np.concatenate([[0], np.flatnonzero(np.diff(sk)) + 1])
        sums = np.add.reduceat(mids[order], starts)
        weight = 2.0 ** (lv * domain.dim * tau)
        best = max(best, float(weight * sums.max() ** (1.0 / p)))
    return best


@dataclass
class MorreyShiftResult:
    value: float
    maximizer_h: tuple
    maximizer_ball: tuple       # (center, radius)
    companion_norm: float       # the Morrey norm of the indicator itself
    per_shell: dict             # j -> sup over h in shell of the weighted norm


def morrey_shift_modulus(domain: Domain, s: float, p: float, u: float,
                         h_shells=range(1, 7), ball_levels=range(0, 7),
                         directions: int = 8) -> MorreyShiftResult:
    """Discretized shift modulus in the Morrey norm with exponent 1/u - 1/p.

    Balls are dyadic-centered with radii 2^-l; the difference mass inside a
    ball is aggregated from a moderate-depth cell tree of the shifted set.
    """
    if p > u:
        raise GateViolation(f"p={p} must not exceed u={u}", "Morrey norm exponents")
    tau = 1.0 / p - 1.0 / u
    if tau > 1.0 / p + 1e-12:
        raise GateViolation("tau outside [0, 1/p]", "Morrey norm exponents")
    dirs = _directions(directions)
    per_shell = {}
    best = 0.0
    best_h = (0.0, 0.0)
    best_ball = ((0.0, 0.0), 0.0)
    for j in h_shells:
        shell_best = 0.0
        for mag in SHELL_MAGNITUDES[:2]:
            for d in dirs:
                h = tuple(d * (mag * 2.0 ** -j))
                val, ball = _morrey_norm_of_difference(domain, h, p, u, ball_levels,
                                                       max_level=min(j + 4, 13))
                w = float(np.hypot(*h)) ** (-s) * val
                shell_best = max(shell_best, w)
                if w > best:
                    best, best_h, best_ball = w, h, ball
        per_shell[j] = shell_best
    companion = _morrey_norm_of_indicator(domain, p, u, ball_levels)
    return MorreyShiftResult(best, best_h, best_ball, companion, per_shell)


def _ball_candidates(leaf_lo, leaf_hi, level):
    centers = 0.5 * (leaf_lo + leaf_hi)
    anchors = np.unique(np.floor(centers * 2.0 ** level).astype(np.int64), axis=0)
    return anchors * 2.0 ** (-level)


def _mass_in_balls(leaf_lo, leaf_hi, mass_hi, centers, radius):
    """Upper Morrey masses: sum leaf upper masses over leaves meeting each ball."""
    out = np.zeros(len(centers))
    c_leaf = 0.5 * (leaf_lo + leaf_hi)
    half = 0.5 * (leaf_hi - leaf_lo)
    for i, c in enumerate(centers):
        gaps = np.maximum(np.abs(c_leaf - c[None, :]) - half, 0.0)
        inside = (gaps ** 2).sum(axis=1) <= radius * radius
        out[i] = mass_hi[inside].sum()
    return out


def _difference_leaves(domain, h, max_level):
    from .measure import _region_roots, _shift_interval_fn, _child_offsets
    root_level, root_ks = _region_roots(domain, None, pad=float(np.hypot(*h)))
    fn = _shift_interval_fn(domain, np.asarray(h, float))
    offs = _child_offsets(root_ks.shape[1])
    leaves_lo, leaves_hi, masses = [], [], []
    level, cells = root_level, root_ks
    while len(cells):
        lo, hi = cell_boxes(level, cells)
        e_lo, e_hi, f_lo, f_hi = fn(lo, hi)
        tot_lo, tot_hi = e_lo + f_lo, e_hi + f_hi
        wide = (tot_hi - tot_lo) > 1e-15
        settle = ~wide if level < max_level else np.ones(len(cells), bool)
        keep = settle & (tot_hi > 0)
        if keep.any():
            leaves_lo.append(lo[keep])
            leaves_hi.append(hi[keep])
            masses.append(tot_hi[keep])
        go = cells[~settle]
        if not len(go):
            break
        cells = (2 * go[:, None, :] + offs[None, :, :]).reshape(-1, cells.shape[1])
        level += 1
    if not leaves_lo:
        return (np.empty((0, 2)), np.empty((0, 2)), np.empty(0))
    return np.concatenate(leaves_lo), np.concatenate(leaves_hi), np.concatenate(masses)


def _morrey_norm_of_difference(domain, h, p, u, ball_levels, max_level):
    leaf_lo, leaf_hi, mass = _difference_leaves(domain, h, max_level)
    if not len(mass):
        return 0.0, ((0.0, 0.0), 0.0)
    best = 0.0
    best_ball = ((0.0, 0.0), 0.0)
    for lv in ball_levels:
        r = 2.0 ** -lv
        centers = _ball_candidates(leaf_lo, leaf_hi, lv)
        vals = _mass_in_balls(leaf_lo, leaf_hi, mass, centers, r)
        weight = (math.pi * r * r) ** (1.0 / u - 1.0 / p)
        idx = int(np.argmax(vals))
        v = weight * vals[idx] ** (1.0 / p)
        if v > best:
            best = v
            best_ball = (tuple(centers[idx]), r)
    return best, best_ball


def _morrey_norm_of_indicator(domain, p, u, ball_levels):
    tree = domain_tree(domain, 10)
    best = 0.0
    ks, _, m_lo, m_hi = tree.cells_at(max(0, tree.root_level))
    lo, hi = cell_boxes(max(0, tree.root_level), ks)
    mids = 0.5 * (m_lo + m_hi)
    for lv in ball_levels:
        r = 2.0 ** -lv
        centers = _ball_candidates(lo, hi, max(lv, 0))
        vals = _mass_in_balls(lo, hi, mids, centers, r)
        weight = (math.pi * r * r) ** (1.0 / u - 1.0 / p)
        best = max(best, float(weight * vals.max() ** (1.0 / p)))
    return best


# ----------------------------------------------------------------------------
# the perimeter quotient
# ----------------------------------------------------------------------------

@dataclass
class PerimeterEstimate:
    quotients: dict             # |h| -> (lo, hi) of |h|^-1 (|E(h)| + |F(h)|)
    sup: float
    extrapolated: float

    def stable_ratio(self):
        mids = [0.5 * (a + b) for a, b in self.quotients.values()]
        return max(mids) / min(mids) if mids and min(mids) > 0 else math.inf


def perimeter_quotient(domain: Domain, h_grid=None, directions: int = 8,
                       rel_depth: int = 5) -> PerimeterEstimate:
    """|h|^{-1} (|E(h)| + |F(h)|) over a dyadic grid of shift lengths."""
    if h_grid is None:
        h_grid = [2.0 ** -j for j in range(4, 11)]
    dirs = _directions(directions)
    quotients = {}
    for h_len in sorted(h_grid, reverse=True):
        j = int(round(-math.log2(h_len)))
        max_level = min(j + rel_depth, DEPTH_CAP + 4)
        best = (0.0, 0.0)
        for d in dirs:
            pair = shift_difference(domain, None, d * h_len, max_level=max_level)
            tot = pair.total()
            if tot.upper > best[1]:
                best = (tot.lower, tot.upper)
        quotients[h_len] = (best[0] / h_len, best[1] / h_len)
    hs = sorted(quotients)
    mids = {h: 0.5 * (v[0] + v[1]) for h, v in quotients.items()}
    sup = max(v[1] for v in quotients.values())
    if len(hs) >= 2 and hs[1] == 2 * hs[0]:
        extrap = mids[hs[0]] + (mids[hs[0]] - mids[hs[1]]) / 3.0
    else:
        extrap = mids[hs[0]]
    return PerimeterEstimate(quotients, sup, extrap)
