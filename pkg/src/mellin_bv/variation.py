"""phi-variation estimators: 1-D sup over partitions, Tonelli section
functionals, the Euclidean box functional, and the phi-modulus of smoothness.

Every number here is a lower bound of a supremum, obtained by maximizing
over a concrete family of partitions.  For convex phi with phi(0) = 0 the
1-D sup over sub-partitions of a sample set is computed exactly by a
dynamic program restricted to local extrema (see ``_accel``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _accel
from .errors import TooManyPoints
from .functions import TestFunction, increment
from .phi import PhiFunction

DEFAULT_DEPTH = 12
DEFAULT_TOL = 1e-4
DEFAULT_LADDER = (1.0, 2.0, 4.0, 8.0)
DEFAULT_P_MAX = 3
DEFAULT_SECTION_DEPTH = 8
DEFAULT_MARGINAL_ORDER = 4
DEFAULT_MARGINAL_PIECES = 16
JUMP_EPS = 1e-12
POLISH_ITERS = 52
POLISH_MAX_EXTREMA = 512


# ---------------------------------------------------------------- geometry

@dataclass(frozen=True)
class Box:
    """Product of intervals [a_i, b_i] inside (0, inf)."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(a) for a in np.atleast_1d(self.lo))
        hi = tuple(float(b) for b in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not lo:
            raise ValueError("lo and hi must have the same positive length")
        for a, b in zip(lo, hi):
            if not (0.0 < a < b < math.inf):
                raise ValueError(f"degenerate or invalid interval [{a}, {b}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def interval(cls, a: float, b: float) -> "Box":
        return cls((a,), (b,))

    @classmethod
    def symmetric(cls, N: int, M: float) -> "Box":
        """[e^-M, e^M]^N."""
        return cls((math.exp(-M),) * N, (math.exp(M),) * N)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def haar_measure(self) -> float:
        return float(np.prod(np.log(np.array(self.hi) / np.array(self.lo))))


@dataclass(frozen=True)
class Partition1D:
    points: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if len(pts) < 2 or any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("partition points must be strictly increasing, at least two")
        if pts[0] <= 0:
            raise ValueError("partition must lie in (0, inf)")
        object.__setattr__(self, "points", pts)

    @property
    def interval(self) -> tuple:
        return self.points[0], self.points[-1]


@dataclass(frozen=True)
class BoxPartition:
    """Tensor partition of ``box`` by interior cut points on each axis."""

    box: Box
    cuts: tuple

    def __post_init__(self):
        cuts = tuple(tuple(sorted(float(c) for c in ax)) for ax in self.cuts)
        if len(cuts) != self.box.dim:
            raise ValueError("one cut list per axis required")
        for c, a, b in zip(cuts, self.box.lo, self.box.hi):
            if any(not (a < x < b) for x in c) or len(set(c)) != len(c):
                raise ValueError("cuts must be distinct and interior to the box")
        object.__setattr__(self, "cuts", cuts)

    def boxes(self) -> list:
        edges = [(a, *c, b) for a, c, b in zip(self.box.lo, self.cuts, self.box.hi)]
        out = []
        for idx in itertools.product(*[range(len(e) - 1) for e in edges]):
            out.append(Box(tuple(e[i] for e, i in zip(edges, idx)),
                           tuple(e[i + 1] for e, i in zip(edges, idx))))
        return out


@dataclass
class VariationEstimate:
    lower_bound: float
    refinement_depth: int
    converged: bool
    breakdown: Optional[tuple] = None
    history: tuple = ()
    detail: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.lower_bound)


def _as_box(region, dim: int) -> Box:
    if isinstance(region, Box):
        box = region
    elif isinstance(region, Partition1D):
        box = Box.interval(*region.interval)
    else:
        a, b = region
        box = Box(a, b) if np.ndim(a) else Box.interval(a, b)
    if box.dim != dim:
        raise ValueError(f"box is {box.dim}-D but the function is {dim}-D")
    return box


def _as_function(g, dim: int = 1) -> TestFunction:
    if isinstance(g, TestFunction):
        return g
    return TestFunction(getattr(g, "__name__", "g"), dim, lambda x: g(x[..., 0]) if dim == 1 else g(x))


# ---------------------------------------------------------------- 1-D sups

def _custom_dp(values, phi):
    v = np.asarray(values, dtype=float)
    best = np.zeros(v.shape[0])
    for j in range(1, v.shape[0]):
        best[j] = np.max(best[:j] + phi.eval(np.abs(v[j] - v[:j])))
    return float(best[-1]) if v.shape[0] > 1 else 0.0


def var1d_sup_samples(values, phi: PhiFunction) -> float:
    """Exact sup of sum phi(|increments|) over sub-partitions of the samples."""
    values = np.asarray(values, dtype=float)
    if phi.exponent is None:
        return _custom_dp(values, phi)
    return _accel.impl.sup(values, phi.exponent)


def _sup_segments(values, starts, stops, phi):
    if phi.exponent is None:
        out = np.zeros((values.shape[0], len(starts)))
        for r in range(values.shape[0]):
            for k, (a, b) in enumerate(zip(starts, stops)):
                out[r, k] = _custom_dp(values[r, a:b], phi)
        return out
    return _accel.impl.sup_segments(values, starts, stops, phi.exponent)


def brute_force_var1d(values, phi: PhiFunction) -> float:
    """Exhaustive max over all 2^(n-2) sub-partitions of at most 14 samples."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] > _accel.BRUTE_FORCE_MAX:
        raise TooManyPoints(f"{values.shape[0]} samples > {_accel.BRUTE_FORCE_MAX}")
    if phi.exponent is not None:
        return _accel.impl.brute_force(values, phi.exponent)
    n = values.shape[0]
    best = 0.0
    for mask in range(1 << max(0, n - 2)):
        idx = [0] + [k + 1 for k in range(n - 2) if mask >> k & 1] + [n - 1]
        best = max(best, float(np.sum(phi.eval(np.abs(np.diff(values[idx]))))))
    return best if n > 1 else 0.0


def var1d(g, phi: PhiFunction, partition: Partition1D) -> float:
    """sum phi(|g(s_i) - g(s_{i-1})|) for one partition."""
    f = _as_function(g)
    vals = np.asarray(f(np.array(partition.points)), dtype=float)
    return float(np.sum(phi.eval(np.abs(np.diff(vals)))))


def _interval_samples(a: float, b: float, depth: int, jumps: Sequence[float] = ()):
    """Log-uniform dyadic nodes on [a, b] plus both sides of each jump.

    Returns the sorted points, the dyadic level at which each point first
    appears (jump points: level 0), and the position of every uniform node.
    """
    n = 1 << depth
    y = np.linspace(math.log(a), math.log(b), n + 1)
    x = np.exp(y)
    x[0], x[-1] = a, b
    k = np.arange(n + 1)
    tz = np.zeros(n + 1, dtype=np.int64)
    inner = k[1:-1]
    # level of index k: depth - (trailing zero bits of k)
    tz[1:-1] = np.log2(inner & -inner).astype(np.int64)
    level = np.where((k == 0) | (k == n), 0, depth - tz)
    extra = []
    for c in jumps:
        if a < c <= b:
            left = c * (1.0 - JUMP_EPS)
            if left > a:
                extra.append(left)
            extra.append(c)
    if not extra:
        return x, level, np.arange(n + 1)
    xs = np.concatenate((x, extra))
    lv = np.concatenate((level, np.zeros(len(extra), dtype=np.int64)))
    is_uniform = np.concatenate((np.ones(n + 1, bool), np.zeros(len(extra), bool)))
    order = np.lexsort((~is_uniform, xs))
    xs, lv, is_uniform = xs[order], lv[order], is_uniform[order]
    dup = np.concatenate(([False], xs[1:] == xs[:-1]))  # jump landing on a node
    xs, lv, is_uniform = xs[~dup], lv[~dup], is_uniform[~dup]
    return xs, lv, np.flatnonzero(is_uniform)


def _polish(f: TestFunction, x: np.ndarray, vals: np.ndarray, jumps) -> tuple:
    """Golden-section refinement of every interior local extremum, vectorized."""
    idx = _accel.numpy_impl.extrema(vals)[1:-1]
    if idx.size == 0 or idx.size > POLISH_MAX_EXTREMA:
        return np.empty(0), np.empty(0)
    lo, hi = np.log(x[idx - 1]), np.log(x[idx + 1])
    sign = np.where(vals[idx] >= vals[idx - 1], 1.0, -1.0)
    if len(jumps):
        lj = np.log(np.asarray(jumps, dtype=float))
        clear = ~np.any((lj[None, :] > lo[:, None]) & (lj[None, :] < hi[:, None]), axis=1)
        lo, hi, sign = lo[clear], hi[clear], sign[clear]
    if lo.size == 0:
        return np.empty(0), np.empty(0)
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    m1, m2 = hi - gr * (hi - lo), lo + gr * (hi - lo)
    f1, f2 = sign * f(np.exp(m1)), sign * f(np.exp(m2))
    for _ in range(POLISH_ITERS):
        left = f1 >= f2  # keep [lo, m2]
        hi = np.where(left, m2, hi)
        lo = np.where(left, lo, m1)
        new = np.where(left, hi - gr * (hi - lo), lo + gr * (hi - lo))
        fn = sign * f(np.exp(new))
        m1, m2, f1, f2 = (np.where(left, new, m2), np.where(left, m1, new),
                          np.where(left, fn, f2), np.where(left, f1, fn))
    xm = np.exp(np.where(f1 >= f2, m1, m2))
    return xm, np.asarray(f(xm), dtype=float)


def _converged(history, tol) -> bool:
    if len(history) < 2:
        return True
    a, b = history[-2], history[-1]
    if a == b:
        return True
    return abs(b - a) <= tol * max(abs(a), abs(b))


def var1d_sup(g, phi: PhiFunction, interval, depth_max: int = DEFAULT_DEPTH,
              tol: float = DEFAULT_TOL, polish: bool = True,
              jumps: Optional[Sequence[float]] = None) -> VariationEstimate:
    """Lower bound of V^phi_[a,b][g] by nested dyadic grids and extrema partitions."""
    f = _as_function(g)
    box = _as_box(interval, 1)
    a, b = box.lo[0], box.hi[0]
    if jumps is None:
        jumps = f.jumps[0]
    x, level, _ = _interval_samples(a, b, depth_max, jumps)
    vals = np.asarray(f(x), dtype=float)
    history = tuple(var1d_sup_samples(vals[level <= d], phi) for d in range(depth_max + 1))
    best = max(history)
    polished = best
    if polish:
        xp, vp = _polish(f, x, vals, jumps)
        if xp.size:
            xs = np.concatenate((x, xp))
            vs = np.concatenate((vals, vp))
            polished = var1d_sup_samples(vs[np.argsort(xs, kind="stable")], phi)
    return VariationEstimate(max(best, polished), depth_max, _converged(history, tol),
                             history=history, detail={"grid": best, "polished": polished})


# ------------------------------------------------------------ Tonelli (N-D)

def _marginal_rule(lo: float, hi: float, pieces: int, order: int, jumps):
    """GL nodes in log coordinates on [lo, hi]: dyadic pieces split at jumps."""
    ref_x, ref_w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(math.log(lo), math.log(hi), pieces + 1)
    lj = sorted(math.log(c) for c in jumps)
    ys, ws, ps = [], [], []
    for k in range(pieces):
        cuts = [edges[k], *[c for c in lj if edges[k] < c < edges[k + 1]], edges[k + 1]]
        for u, v in zip(cuts, cuts[1:]):
            half, mid = 0.5 * (v - u), 0.5 * (v + u)
            ys.append(mid + half * ref_x)
            ws.append(half * ref_w)
            ps.append(np.full(order, k))
    return np.concatenate(ys), np.concatenate(ws), np.concatenate(ps)


@dataclass
class _AxisTable:
    """Weighted section sups along one axis for every dyadic level."""

    axis: int
    others: tuple
    pieces: np.ndarray          # (n_marginal, N-1) finest marginal piece indices
    piece_bits: int             # log2 of the number of marginal pieces
    levels: list                # levels[q]: (n_marginal, 2^q) weighted sups


def _tonelli_tables(f: TestFunction, phi: PhiFunction, box: Box, p_max: int,
                    section_depth: int, order: int,
                    marginal_pieces: int = DEFAULT_MARGINAL_PIECES) -> list:
    N = box.dim
    section_depth = max(section_depth, p_max)
    bits = max(p_max, int(math.ceil(math.log2(max(1, marginal_pieces)))))
    tables = []
    for j in range(N):
        others = tuple(i for i in range(N) if i != j)
        rules = [_marginal_rule(box.lo[i], box.hi[i], 1 << bits, order, f.jumps[i])
                 for i in others]
        grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        Y = np.stack([g.ravel() for g in grids], axis=-1)
        Wm = np.prod(np.stack(np.meshgrid(*[r[1] for r in rules], indexing="ij"), 0), 0).ravel()
        P = np.stack([g.ravel() for g in np.meshgrid(*[r[2] for r in rules], indexing="ij")], -1)
        x, _, upos = _interval_samples(box.lo[j], box.hi[j], section_depth, f.jumps[j])
        X = np.empty((Y.shape[0], x.size, N))
        X[..., j] = x[None, :]
        for col, i in enumerate(others):
            X[..., i] = np.exp(Y[:, col])[:, None]
        vals = np.asarray(f(X), dtype=float).reshape(Y.shape[0], x.size)
        levels = []
        for q in range(p_max + 1):
            bounds = upos[:: 1 << (section_depth - q)]
            sups = _sup_segments(vals, bounds[:-1], bounds[1:] + 1, phi)
            levels.append(sups * Wm[:, None])
        tables.append(_AxisTable(j, others, P, bits, levels))
    return tables


def _phi_by_subbox(table: _AxisTable, combo: tuple) -> np.ndarray:
    """Phi_j over the tensor partition with per-axis dyadic levels ``combo``."""
    N = len(combo)
    shape = tuple(1 << q for q in combo)
    lev = table.levels[combo[table.axis]]  # (n_m, 2^q_j)
    out = np.zeros(shape)
    idx = [None] * N
    for col, i in enumerate(table.others):
        idx[i] = np.broadcast_to((table.pieces[:, col] >> (table.piece_bits - combo[i]))[:, None],
                                 lev.shape)
    idx[table.axis] = np.broadcast_to(np.arange(lev.shape[1])[None, :], lev.shape)
    np.add.at(out, tuple(ix.ravel() for ix in idx), lev.ravel())
    return out


def _combos(N, p_max):
    return list(itertools.product(range(p_max + 1), repeat=N))


def section_functional(f, phi: PhiFunction, box, j: int, p_max: int = DEFAULT_P_MAX,
                       section_depth: int = DEFAULT_SECTION_DEPTH,
                       order: int = DEFAULT_MARGINAL_ORDER,
                       marginal_pieces: int = DEFAULT_MARGINAL_PIECES, **var1d_kw) -> float:
    """Phi^phi_j(f, I): Haar integral over the face of the j-th section variations.

    ``j`` is zero-based.  For N = 1 this is the interval variation itself.
    """
    f = _as_function(f)
    box = _as_box(box, f.dim)
    if not 0 <= j < f.dim:
        raise ValueError(f"axis {j} out of range for N = {f.dim}")
    if f.dim == 1:
        return var1d_sup(f, phi, box, **var1d_kw).lower_bound
    table = _tonelli_tables(f, phi, box, p_max, section_depth, order, marginal_pieces)[j]
    return float(table.levels[0].sum())


def _norm(values) -> float:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        return math.inf
    return float(math.sqrt(float(np.sum(values * values))))


def box_functional(f, phi: PhiFunction, box, **kw) -> float:
    """Euclidean norm of the section functionals; +inf if any diverges."""
    f = _as_function(f)
    box = _as_box(box, f.dim)
    if f.dim == 1:
        return section_functional(f, phi, box, 0, **kw)
    p_max = kw.get("p_max", DEFAULT_P_MAX)
    tables = _tonelli_tables(f, phi, box, p_max, kw.get("section_depth", DEFAULT_SECTION_DEPTH),
                             kw.get("order", DEFAULT_MARGINAL_ORDER),
                             kw.get("marginal_pieces", DEFAULT_MARGINAL_PIECES))
    return _norm([t.levels[0].sum() for t in tables])


def var_box(f, phi: PhiFunction, box, p_max: int = DEFAULT_P_MAX,
            section_depth: int = DEFAULT_SECTION_DEPTH, order: int = DEFAULT_MARGINAL_ORDER,
            marginal_pieces: int = DEFAULT_MARGINAL_PIECES,
            tol: float = DEFAULT_TOL, **var1d_kw) -> VariationEstimate:
    """V^phi_I lower bound: max over tensor dyadic partitions of sum_k Phi(f, J_k)."""
    f = _as_function(f)
    box = _as_box(box, f.dim)
    if f.dim == 1:
        return var1d_sup(f, phi, box, tol=tol, **var1d_kw)
    tables = _tonelli_tables(f, phi, box, p_max, section_depth, order, marginal_pieces)
    N = f.dim
    breakdown = tuple(float(t.levels[0].sum()) for t in tables)
    best, best_combo = -math.inf, (0,) * N
    by_depth = [-math.inf] * (p_max + 1)
    for combo in _combos(N, p_max):
        parts = [_phi_by_subbox(t, combo) for t in tables]
        stack = np.stack(parts, 0)
        if not np.all(np.isfinite(stack)):
            total = math.inf
        else:
            total = float(np.sum(np.sqrt(np.sum(stack * stack, axis=0))))
        depth = max(combo)
        by_depth[depth] = max(by_depth[depth], total)
        if total > best:
            best, best_combo = total, combo
    history = tuple(np.maximum.accumulate(by_depth))
    return VariationEstimate(best, max(best_combo), _converged(history, tol), breakdown,
                             history, {"partition_levels": best_combo})


def var_global(f, phi: PhiFunction, box_ladder: Sequence[float] = DEFAULT_LADDER,
               tol: float = DEFAULT_TOL, **kw) -> VariationEstimate:
    """V^phi over R^N_+ via expanding boxes [e^-M, e^M]^N."""
    f = _as_function(f)
    ests = [var_box(f, phi, Box.symmetric(f.dim, M), tol=tol, **kw) for M in box_ladder]
    values = tuple(e.lower_bound for e in ests)
    top = ests[int(np.argmax(values))]
    return VariationEstimate(top.lower_bound, top.refinement_depth, _converged(values, tol),
                             top.breakdown, values, {"box_ladder": tuple(box_ladder)})


def var_upper(f, phi: PhiFunction, box_ladder: Sequence[float] = DEFAULT_LADDER,
              depth_max: int = DEFAULT_DEPTH) -> float:
    """Fine-grid sum phi(|Delta|) over consecutive points on the largest box (N = 1).

    The grid contains both sides of every jump and the polished extrema, so
    for classical phi and piecewise monotone f it reproduces the variation
    up to the extremum-location residual; it is the comparison side of
    inequality checks that need V from above.
    """
    f = _as_function(f)
    if f.dim != 1:
        raise ValueError("fine-grid upper estimate is one-dimensional")
    M = max(box_ladder)
    a, b = math.exp(-M), math.exp(M)
    x, _, _ = _interval_samples(a, b, depth_max, f.jumps[0])
    vals = np.asarray(f(x), dtype=float)
    xp, vp = _polish(f, x, vals, f.jumps[0])
    xs, vs = np.concatenate((x, xp)), np.concatenate((vals, vp))
    vs = vs[np.argsort(xs, kind="stable")]
    d = np.abs(np.diff(vs))
    if phi.exponent is None:
        return float(np.sum(phi.eval(d)))
    return _accel.impl.grid_sum(vs, phi.exponent)


# ---------------------------------------------------------------- modulus

def default_t_samples(N: int, delta: float) -> list:
    """Deterministic t with |1 - t| in {delta, delta/2, delta/4} along axes and diagonals."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    dirs = []
    for i in range(N):
        e = np.zeros(N)
        e[i] = 1.0
        dirs += [e, -e]
    if N > 1:
        for signs in itertools.product((1.0, -1.0), repeat=N):
            dirs.append(np.array(signs) / math.sqrt(N))
    return [1.0 + r * d for r in (delta, delta / 2, delta / 4) for d in dirs]


def modulus_samples(f, phi: PhiFunction, delta: float, t_samples=None, **var_kw) -> list:
    f = _as_function(f)
    ts = default_t_samples(f.dim, delta) if t_samples is None else t_samples
    out = []
    for t in ts:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.linalg.norm(1.0 - t) > delta * (1 + 1e-12):
            raise ValueError(f"sample t = {t} lies outside |1 - t| <= {delta}")
        est = var_global(increment(f, t), phi, **var_kw)
        out.append((tuple(t), est.lower_bound))
    return out


def modulus(f, phi: PhiFunction, delta: float, t_samples=None, **var_kw) -> float:
    """omega^phi(f, delta) = sup over |1 - t| <= delta of V^phi[tau_t f - f] (sampled)."""
    return max(v for _, v in modulus_samples(f, phi, delta, t_samples, **var_kw))
