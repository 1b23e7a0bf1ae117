"""Dyadic-cube indexing, adaptive quadtree refinement and Whitney decompositions.

Cells are the half-open lattice cubes ``2^-j ([0,1)^n + k)``.  All parent and
child arithmetic is integer index arithmetic, so children partition their
parent exactly.  Only Mixed cells are subdivided; certified Full/Empty cells
become leaves immediately, which keeps the work proportional to the boundary
at every level.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.spatial import cKDTree

from .geometry import DEPTH_CAP, EMPTY, FULL, MIXED, DepthExceeded, Domain

_KEY_BASE = 1 << 20
_KEY_MULT = 1 << 21


@dataclass(frozen=True)
class DyadicCube:
    """The cube ``Q_{j,k} = 2^-j ([0,1)^n + k)``; edge length ``2^-j``."""

    level: int
    k: tuple

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))

    @property
    def dim(self):
        return len(self.k)

    @property
    def edge(self):
        return 2.0 ** (-self.level)

    def box(self):
        e = self.edge
        lo = tuple(v * e for v in self.k)
        hi = tuple((v + 1) * e for v in self.k)
        return lo, hi

    def children(self):
        return [DyadicCube(self.level + 1, tuple(2 * v + o for v, o in zip(self.k, off)))
                for off in product((0, 1), repeat=self.dim)]

    def parent(self):
        return DyadicCube(self.level - 1, tuple(v >> 1 for v in self.k))

    def contains_cube(self, other: "DyadicCube"):
        if other.level < self.level:
            return False
        shift = other.level - self.level
        return all((v >> shift) == w for v, w in zip(other.k, self.k))


def cell_boxes(level, karr):
    e = 2.0 ** (-level)
    lo = karr.astype(float) * e
    return lo, lo + e


def _chunked_classify(fn, lo, hi, chunk=1 << 20):
    """Apply a box classifier in bounded-memory chunks."""
    n = len(lo)
    if n == 0:
        return np.empty(0, np.int8)
    if n <= chunk:
        return fn(lo, hi)
    return np.concatenate([fn(lo[i:i + chunk], hi[i:i + chunk])
                           for i in range(0, n, chunk)])


def _keys(karr):
    karr = np.asarray(karr, dtype=np.int64)
    if karr.size and (np.abs(karr) >= _KEY_BASE).any():
        raise ValueError("cell index out of encodable range")
    out = np.zeros(len(karr), dtype=np.int64)
    for d in range(karr.shape[1]):
        out = out * _KEY_MULT + (karr[:, d] + _KEY_BASE)
    return out


def _children_of(karr, dim):
    n = len(karr)
    offs = np.array(list(product((0, 1), repeat=dim)), dtype=np.int64)
    out = (2 * karr[:, None, :] + offs[None, :, :]).reshape(n * len(offs), dim)
    return out


@dataclass
class _Level:
    full: np.ndarray
    empty: np.ndarray
    mixed_split: np.ndarray
    mixed_leaf: np.ndarray
    # certified measure of E within each mixed cell (split then leaf order)
    node_lo: np.ndarray = None
    node_hi: np.ndarray = None

    def mixed_all(self):
        return np.concatenate([self.mixed_split, self.mixed_leaf])


class CellTree:
    """Adaptive classification tree over the dyadic lattice."""

    def __init__(self, domain, root_level, root_ks, max_level, classify=None,
                 leaf_interval=None, floor=None):
        if max_level > DEPTH_CAP + 8:
            raise DepthExceeded(f"depth {max_level} beyond the hard cap")
        if max_level < root_level:
            raise ValueError("max_level must reach the root level")
        self.domain = domain
        self.dim = root_ks.shape[1]
        self.root_level = root_level
        self.root_ks = np.array(root_ks, dtype=np.int64)
        self.max_level = max_level
        self._classify = classify if classify is not None else domain.classify_boxes
        self._leaf_interval = leaf_interval if leaf_interval is not None else (
            domain.cell_area_intervals if domain is not None else None)
        self._floor = floor if floor is not None else (
            domain.refinement_floor if domain is not None else None)
        self.levels: dict[int, _Level] = {}
        self._forests = {}
        self._build()
        self._accumulate_measures()

    # -- construction -------------------------------------------------------
    def _build(self):
        j = self.root_level
        cells = self.root_ks
        while True:
            lo, hi = cell_boxes(j, cells)
            cls = _chunked_classify(self._classify, lo, hi)
            full = cells[cls == FULL]
            empty = cells[cls == EMPTY]
            mixed = cells[cls == MIXED]
            if j < self.max_level and self._floor is not None and len(mixed):
                mlo, mhi = cell_boxes(j, mixed)
                hopeless = self._floor(mlo, mhi, self.max_level)
                leaf = mixed[hopeless]
                split = mixed[~hopeless]
            elif j == self.max_level:
                leaf, split = mixed, mixed[:0]
            else:
                leaf, split = mixed[:0], mixed
            self.levels[j] = _Level(full, empty, split, leaf)
            if j == self.max_level or len(split) == 0:
                break
            cells = _children_of(split, self.dim)
            j += 1
        self.deepest = j

    def _accumulate_measures(self):
        if self._leaf_interval is None:
            return
        below_lo = below_hi = below_keys = None
        for j in range(self.deepest, self.root_level - 1, -1):
            lev = self.levels[j]
            n_split, n_leaf = len(lev.mixed_split), len(lev.mixed_leaf)
            lo_arr = np.zeros(n_split + n_leaf)
            hi_arr = np.zeros(n_split + n_leaf)
            if n_leaf:
                blo, bhi = cell_boxes(j, lev.mixed_leaf)
                llo, lhi = self._leaf_interval(blo, bhi)
                lo_arr[n_split:] = llo
                hi_arr[n_split:] = lhi
            if n_split:
                # children live at level j+1: aggregate by parent key
                child = self.levels[j + 1]
                area = 2.0 ** (-(j + 1) * self.dim)
                ks = [child.full, child.empty, child.mixed_split, child.mixed_leaf]
                vlo = [np.full(len(child.full), area), np.zeros(len(child.empty)),
                       None, None]
                vhi = [np.full(len(child.full), area), np.zeros(len(child.empty)),
                       None, None]
                nm = len(child.mixed_split)
                vlo[2], vhi[2] = below_lo[:nm], below_hi[:nm]
                vlo[3], vhi[3] = below_lo[nm:], below_hi[nm:]
                allk = np.concatenate(ks)
                alo = np.concatenate(vlo)
                ahi = np.concatenate(vhi)
                pkey = _keys(allk >> 1)
                order = np.argsort(pkey, kind="stable")
                pkey, alo, ahi = pkey[order], alo[order], ahi[order]
                starts = np.concatenate([[0], np.flatnonzero(np.diff(pkey)) + 1])
                sums_lo = np.add.reduceat(alo, starts)
                sums_hi = np.add.reduceat(ahi, starts)
                skey = _keys(lev.mixed_split)
                pos = np.searchsorted(pkey[starts], skey)
                lo_arr[:n_split] = sums_lo[pos]
                hi_arr[:n_split] = sums_hi[pos]
            lev.node_lo, lev.node_hi = lo_arr, hi_arr
            below_lo, below_hi = lo_arr, hi_arr

    # -- queries ------------------------------------------------------------
    def mixed_count(self, level):
        lev = self.levels.get(level)
        return 0 if lev is None else len(lev.mixed_all())

    def measure(self):
        """Certified interval for |E ∩ coverage|."""
        lo = hi = 0.0
        for j, lev in self.levels.items():
            area = 2.0 ** (-j * self.dim)
            lo += area * len(lev.full)
            hi += area * len(lev.full)
            if len(lev.mixed_leaf):
                nm = len(lev.mixed_split)
                lo += float(np.sum(lev.node_lo[nm:]))
                hi += float(np.sum(lev.node_hi[nm:]))
        return lo, hi

    def cells_at(self, level):
        """All tree cells at a level with classes and measure intervals."""
        lev = self.levels.get(level)
        if lev is None:
            empty = np.empty((0, self.dim), np.int64)
            return empty, np.empty(0, np.int8), np.empty(0), np.empty(0)
        area = 2.0 ** (-level * self.dim)
        ks = np.concatenate([lev.full, lev.empty, lev.mixed_split, lev.mixed_leaf])
        cls = np.concatenate([np.full(len(lev.full), FULL, np.int8),
                              np.full(len(lev.empty), EMPTY, np.int8),
                              np.full(len(lev.mixed_split) + len(lev.mixed_leaf), MIXED, np.int8)])
        m_lo = np.concatenate([np.full(len(lev.full), area), np.zeros(len(lev.empty)),
                               lev.node_lo if lev.node_lo is not None else
                               np.zeros(len(lev.mixed_split) + len(lev.mixed_leaf))])
        m_hi = np.concatenate([np.full(len(lev.full), area), np.zeros(len(lev.empty)),
                               lev.node_hi if lev.node_hi is not None else
                               np.full(len(lev.mixed_split) + len(lev.mixed_leaf), area)])
        return ks, cls, m_lo, m_hi

    def frontier(self, which):
        """Leaf cells certifying where E (resp. its complement) is absent.

        ``which='not_full'``: Empty leaves + Mixed leaves (complement can hide
        there); ``'empty'``: Empty leaves only; ``'not_empty'``: Full + Mixed;
        ``'full'``: Full leaves only.
        """
        picks = {"not_full": ("empty", "mixed_leaf"), "empty": ("empty",),
                 "not_empty": ("full", "mixed_leaf"), "full": ("full",)}[which]
        out = {}
        for j, lev in self.levels.items():
            parts = [getattr(lev, name) for name in picks]
            ks = np.concatenate(parts) if parts else np.empty((0, self.dim), np.int64)
            if len(ks):
                out[j] = ks
        return out

    def forest(self, which):
        if which not in self._forests:
            self._forests[which] = BoxForest(self.frontier(which), self.dim)
        return self._forests[which]

    def coverage_box(self):
        e = 2.0 ** (-self.root_level)
        lo = self.root_ks.min(axis=0) * e
        hi = (self.root_ks.max(axis=0) + 1) * e
        return lo, hi

    def exterior_distance(self, qlo, qhi):
        """Distance from query boxes to the complement of the coverage box."""
        lo, hi = self.coverage_box()
        margins = np.minimum(qlo - lo[None, :], hi[None, :] - qhi)
        return np.clip(margins.min(axis=1), 0.0, None)

    def cell_measure_lookup(self, level, karr):
        """Certified |E ∩ cell| for lattice cells at ``level``.

        Cells deeper than the resolved tree inherit the conservative leaf
        interval of their Mixed-leaf ancestor, scaled is not attempted: they
        report ``[0, cell area]``.  Cells outside the coverage count as empty.
        """
        karr = np.asarray(karr, dtype=np.int64)
        n = len(karr)
        out_lo = np.zeros(n)
        out_hi = np.zeros(n)
        pending = np.arange(n)
        ks = karr.copy()
        area = 2.0 ** (-level * self.dim)

        def resolve(idx_local, values_lo, values_hi):
            nonlocal pending, ks
            out_lo[pending[idx_local]] = values_lo
            out_hi[pending[idx_local]] = values_hi
            keep = np.ones(len(pending), bool)
            keep[idx_local] = False
            pending = pending[keep]
            ks = ks[keep]

        for j in range(level, self.root_level - 1, -1):
            if not len(pending):
                break
            lev = self.levels.get(j)
            if lev is not None:
                keys = _keys(ks)
                if len(lev.full):
                    rk = np.sort(_keys(lev.full))
                    pos = np.clip(np.searchsorted(rk, keys), 0, len(rk) - 1)
                    hit = np.nonzero(rk[pos] == keys)[0]
                    if len(hit):
                        resolve(hit, area, area)
                        keys = _keys(ks)
                if len(lev.empty) and len(pending):
                    rk = np.sort(_keys(lev.empty))
                    pos = np.clip(np.searchsorted(rk, keys), 0, len(rk) - 1)
                    hit = np.nonzero(rk[pos] == keys)[0]
                    if len(hit):
                        resolve(hit, 0.0, 0.0)
                        keys = _keys(ks)
                if len(pending):
                    mix = lev.mixed_all()
                    if len(mix):
                        mk = _keys(mix)
                        order = np.argsort(mk)
                        pos = np.clip(np.searchsorted(mk[order], keys), 0, len(mk) - 1)
                        ok = mk[order][pos] == keys
                        hit = np.nonzero(ok)[0]
                        if len(hit):
                            rows = order[pos[ok]]
                            if j == level and lev.node_lo is not None:
                                resolve(hit, lev.node_lo[rows], lev.node_hi[rows])
                            else:
                                # query is inside an unresolved Mixed leaf
                                resolve(hit, 0.0, area)
            ks = ks >> 1
        return out_lo, out_hi

    def to_csv_rows(self):
        """(level, k..., class) rows for every leaf, canonical order."""
        rows = []
        for j in sorted(self.levels):
            ks, cls, _, _ = self.cells_at(j)
            lev = self.levels[j]
            leafmask = np.concatenate([np.ones(len(lev.full) + len(lev.empty), bool),
                                       np.zeros(len(lev.mixed_split), bool),
                                       np.ones(len(lev.mixed_leaf), bool)])
            kk, cc = ks[leafmask], cls[leafmask]
            order = np.argsort(_keys(kk)) if len(kk) else np.empty(0, np.int64)
            for i in order:
                rows.append((j, *kk[i], int(cc[i])))
        return rows


class BoxForest:
    """Exact nearest-box distances against per-level families of dyadic cells."""

    def __init__(self, level_ks: dict, dim):
        self.dim = dim
        self.entries = []
        for j, ks in sorted(level_ks.items()):
            lo, hi = cell_boxes(j, ks)
            centers = 0.5 * (lo + hi)
            self.entries.append((j, ks, cKDTree(centers), 2.0 ** (-j)))

    def empty(self):
        return not self.entries

    def min_boxdist(self, qlo, qhi, k_probe=12):
        n = len(qlo)
        best = np.full(n, np.inf)
        qc = 0.5 * (qlo + qhi)
        qh = 0.5 * (qhi - qlo)
        for j, ks, tree, edge in self.entries:
            m = tree.n
            kk = min(k_probe, m)
            dist_c, idx = tree.query(qc, k=kk)
            if kk == 1:
                dist_c = dist_c[:, None]
                idx = idx[:, None]
            th = 0.5 * edge
            # exact box distances for the candidates
            cand_lo = ks[idx.reshape(-1)] * edge
            cand_lo = cand_lo.reshape(n, kk, self.dim)
            gaps = np.maximum(np.maximum(cand_lo - qhi[:, None, :],
                                         qlo[:, None, :] - (cand_lo + edge)), 0.0)
            d_exact = np.sqrt((gaps ** 2).sum(axis=2)).min(axis=1)
            # completeness: a farther center cannot beat d_exact once
            # centerdist - (qh + th)*sqrt(dim) > d_exact
            off = np.sqrt((qh ** 2).sum(axis=1)) + th * math.sqrt(self.dim)
            incomplete = (kk < m) & (dist_c[:, -1] - off < d_exact)
            if np.any(incomplete):
                for i in np.nonzero(incomplete)[0]:
                    r = d_exact[i] + off[i] + 1e-12
                    cand = tree.query_ball_point(qc[i], r)
                    if cand:
                        clo = ks[cand] * edge
                        g = np.maximum(np.maximum(clo - qhi[i], qlo[i] - (clo + edge)), 0.0)
                        d_exact[i] = min(d_exact[i], float(np.sqrt((g ** 2).sum(axis=1)).min()))
            best = np.minimum(best, d_exact)
        return best


# ----------------------------------------------------------------------------
# constructors and cache
# ----------------------------------------------------------------------------

def default_roots(domain: Domain):
    bb = domain.bounding_box()
    lo = np.floor(np.asarray(bb.lo)).astype(np.int64)
    hi = np.ceil(np.asarray(bb.hi)).astype(np.int64)
    ranges = [np.arange(a, b) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*ranges, indexing="ij")
    return 0, np.stack([g.reshape(-1) for g in grids], axis=1)


_TREE_CACHE: OrderedDict = OrderedDict()
_TREE_CACHE_MAX = 10


def domain_tree(domain: Domain, max_level, roots=None) -> CellTree:
    """Memoized classification tree for a domain over its default coverage."""
    if roots is None:
        root_level, root_ks = default_roots(domain)
    else:
        root_level, root_ks = roots
    key = (domain.key(), root_level, tuple(map(tuple, np.asarray(root_ks))), max_level)
    if key in _TREE_CACHE:
        _TREE_CACHE.move_to_end(key)
        return _TREE_CACHE[key]
    tree = CellTree(domain, root_level, np.asarray(root_ks, np.int64), max_level)
    _TREE_CACHE[key] = tree
    while len(_TREE_CACHE) > _TREE_CACHE_MAX:
        _TREE_CACHE.popitem(last=False)
    return tree


def refine(domain: Domain, root, depth: int) -> CellTree:
    """Classification tree under one root cube (or the default coverage)."""
    if depth > DEPTH_CAP:
        raise DepthExceeded(f"requested depth {depth} beyond cap {DEPTH_CAP}")
    if root is None:
        return domain_tree(domain, depth)
    if isinstance(root, DyadicCube):
        return CellTree(domain, root.level, np.array([root.k], np.int64), depth)
    raise TypeError("root must be a DyadicCube or None")


# ----------------------------------------------------------------------------
# Whitney decomposition
# ----------------------------------------------------------------------------

@dataclass
class WhitneyCube:
    cube: DyadicCube
    dist_lo: float
    dist_hi: float


@dataclass
class WhitneyResult:
    cubes: list
    levels: np.ndarray
    ks: np.ndarray
    dist_lo: np.ndarray
    dist_hi: np.ndarray
    per_level: dict
    unresolved_measure: float      # cells whose Whitney status is uncertain
    tail_measure: float            # certified interior mass finer than max_level
    mixed_measure: float           # uncertain boundary collar mass
    region_measure: tuple          # certified |E ∩ region| interval

    def count(self):
        return len(self.levels)


def whitney(domain: Domain, region: DyadicCube, min_level=None, max_level=12,
            tree_margin=2, within_region=False) -> WhitneyResult:
    """Maximal dyadic cubes inside E with ``diam Q <= dist(Q, complement)``.

    A cube is accepted when its own inequality is certified and its parent is
    certified to violate it; interval straddles descend and are eventually
    reported as unresolved.  With ``within_region=True`` the complement is
    taken relative to the open region (walls count as complement).
    """
    if min_level is None:
        min_level = region.level
    tree = domain_tree(domain, min(max_level + tree_margin, DEPTH_CAP + 4))
    forest_nf = tree.forest("not_full")
    forest_em = tree.forest("empty")
    dim = region.dim
    rlo, rhi = region.box()
    rlo = np.asarray(rlo)
    rhi = np.asarray(rhi)

    accepted_levels, accepted_ks = [], []
    accepted_dlo, accepted_dhi = [], []
    per_level = {}
    unresolved = 0.0
    tail = 0.0
    mixed_m = 0.0

    # enumerate the region at min_level
    shift = min_level - region.level
    if shift < 0:
        raise ValueError("min_level may not be coarser than the region")
    base = np.array(region.k, np.int64) * (1 << shift)
    ranges = [np.arange(0, 1 << shift)] * dim
    grids = np.meshgrid(*ranges, indexing="ij")
    cells = base[None, :] + np.stack([g.reshape(-1) for g in grids], axis=1)

    parent_violated = np.zeros(len(cells), dtype=bool)
    j = min_level
    while len(cells) and j <= max_level:
        lo, hi = cell_boxes(j, cells)
        area = 2.0 ** (-j * dim)
        diam = math.sqrt(dim) * 2.0 ** (-j)
        cls = domain.classify_boxes(lo, hi)
        m_lo, m_hi = tree.cell_measure_lookup(j, cells)

        # Empty cells carry no Whitney mass at all
        keep = cls != EMPTY
        cells, lo, hi, cls = cells[keep], lo[keep], hi[keep], cls[keep]
        parent_violated = parent_violated[keep]
        m_lo, m_hi = m_lo[keep], m_hi[keep]
        if not len(cells):
            break

        dist_lb = np.minimum(forest_nf.min_boxdist(lo, hi) if not forest_nf.empty()
                             else np.full(len(cells), np.inf),
                             tree.exterior_distance(lo, hi))
        dist_ub = np.minimum(forest_em.min_boxdist(lo, hi) if not forest_em.empty()
                             else np.full(len(cells), np.inf),
                             tree.exterior_distance(lo, hi))
        if within_region:
            wall = np.minimum(lo - rlo[None, :], rhi[None, :] - hi).min(axis=1)
            wall = np.clip(wall, 0.0, None)
            dist_lb = np.minimum(dist_lb, wall)
            dist_ub = np.minimum(dist_ub, wall)

        full = cls == FULL
        satisfied = full & (dist_lb >= diam)
        violated = dist_ub < diam  # valid regardless of class
        accept = satisfied & parent_violated
        if np.any(accept):
            per_level[j] = per_level.get(j, 0) + int(accept.sum())
            accepted_levels.append(np.full(accept.sum(), j))
            accepted_ks.append(cells[accept])
            accepted_dlo.append(dist_lb[accept])
            accepted_dhi.append(dist_ub[accept])

        stuck = satisfied & ~parent_violated
        unresolved += float(m_hi[stuck].sum())

        descend = ~accept & ~stuck
        if j == max_level:
            # below resolution: certified-interior mass belongs to finer cubes
            deeper = descend & full & violated
            tail += float(area * deeper.sum())
            unresolved += float(m_hi[descend & full & ~violated].sum())
            mixed_m += float((m_hi - m_lo)[descend & ~full].sum())
            tail += float(m_lo[descend & ~full].sum())
            break
        nxt = cells[descend]
        pv = violated[descend]
        cells = _children_of(nxt, dim)
        parent_violated = np.repeat(pv, 1 << dim)
        j += 1

    if accepted_levels:
        levels = np.concatenate(accepted_levels).astype(np.int64)
        ks = np.concatenate(accepted_ks)
        dlo = np.concatenate(accepted_dlo)
        dhi = np.concatenate(accepted_dhi)
    else:
        levels = np.empty(0, np.int64)
        ks = np.empty((0, dim), np.int64)
        dlo = np.empty(0)
        dhi = np.empty(0)
    cubes = [WhitneyCube(DyadicCube(int(l), tuple(kk)), float(a), float(b))
             for l, kk, a, b in zip(levels, ks, dlo, dhi)]

    rtree = CellTree(domain, region.level, np.array([region.k], np.int64),
                     min(max_level + tree_margin, DEPTH_CAP + 4))
    return WhitneyResult(cubes, levels, ks, dlo, dhi, per_level,
                         unresolved, tail, mixed_m, rtree.measure())


def whitney_invariants(result: WhitneyResult):
    """Check disjointness, 4:1 touching ratios and the 12^n contact bound.

    Returns a dict of violation counts (all zero for a valid decomposition)
    plus the per-cube touch counts.
    """
    levels = result.levels
    ks = result.ks
    if not len(levels):
        return {"nested": 0, "ratio": 0, "contacts": 0, "touches": np.zeros(0, int)}
    dim = ks.shape[1]
    by_level = {}
    for j in np.unique(levels):
        sel = levels == j
        kj = ks[sel]
        order = np.argsort(_keys(kj))
        by_level[int(j)] = (kj[order], np.sort(_keys(kj)), np.nonzero(sel)[0][order])

    touches = np.zeros(len(levels), dtype=np.int64)
    nested = ratio = 0
    present = sorted(by_level)
    offs = np.array(list(product((-1, 0, 1), repeat=dim)), dtype=np.int64)
    for j in present:
        kj, _, rows_j = by_level[j]
        for j2 in present:
            if j2 > j:
                continue
            s = 1 << (j - j2)
            # level-j2 cells whose closed box meets the closed box of each cube
            cand = (kj[:, None, :] + offs[None, :, :])
            cand = np.floor_divide(cand, s)
            flat = cand.reshape(-1, dim)
            keys = _keys(flat)
            ref_k, ref_keys, rows_j2 = by_level[j2]
            pos = np.clip(np.searchsorted(ref_keys, keys), 0, len(ref_keys) - 1)
            hit = (ref_keys[pos] == keys).reshape(len(kj), len(offs))
            if j2 == j:
                same = np.all(cand == kj[:, None, :], axis=2)
                hit &= ~same
            # dedupe identical candidate cells per cube
            uniq = np.ones_like(hit)
            seen_keys = keys.reshape(len(kj), len(offs))
            order = np.argsort(seen_keys, axis=1, kind="stable")
            sorted_keys = np.take_along_axis(seen_keys, order, axis=1)
            dup_sorted = np.zeros_like(hit)
            dup_sorted[:, 1:] = sorted_keys[:, 1:] == sorted_keys[:, :-1]
            dup = np.zeros_like(hit)
            np.put_along_axis(dup, order, dup_sorted, axis=1)
            uniq &= ~dup
            eff = hit & uniq
            counts = eff.sum(axis=1)
            if j2 == j:
                touches[rows_j] += counts
            else:
                touches[rows_j] += counts
                # containment = interior overlap: the coarser cell holding us
                inner = np.all(np.floor_divide(kj, s)[:, None, :] == cand, axis=2) & eff
                nested += int(inner.sum())
                # symmetric touch count for the coarser partner
                contrib = np.zeros(len(ref_k), dtype=np.int64)
                idx_hit = pos.reshape(len(kj), len(offs))[eff]
                np.add.at(contrib, idx_hit, 1)
                touches[rows_j2] += contrib
                if j - j2 > 2 and counts.sum() > 0:
                    ratio += int(counts.sum())
    contacts = int(np.sum(touches > 12 ** dim))
    return {"nested": nested, "ratio": ratio, "contacts": contacts, "touches": touches}
