"""Integration over R^N_+ against the Haar measure dt / <t>.

Everything runs in log coordinates u = log t, where the measure becomes
Lebesgue measure on R^N and the integral is truncated to the box [-R, R]^N.
Kernels concentrate at u = 0, so the composite Gauss-Legendre rule grades its
panels geometrically toward 0 and toward any caller-supplied breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonFiniteIntegrand, UnknownDimension

RULES = ("midpoint", "trapezoid", "gauss_legendre_composite")
DEFAULT_NODES = {1: 512, 2: 128, 3: 96}
MAX_DIM = 3
REGION_LEVELS = 4
_CHUNK = 1 << 20


@lru_cache(maxsize=None)
def _reference_rule(rule: str, order: int):
    if rule == "gauss_legendre_composite":
        return np.polynomial.legendre.leggauss(order)
    if rule == "midpoint":
        return np.array([0.0]), np.array([2.0])
    return np.array([-1.0, 1.0]), np.array([1.0, 1.0])


def _graded(a: float, b: float, m: int, toward: str, ratio: float) -> np.ndarray:
    """Panel edges on [a, b], m panels growing geometrically away from ``toward``."""
    length = b - a
    if ratio == 1.0:
        h = np.full(m, length / m)
    else:
        h = length * (ratio - 1.0) / (ratio ** m - 1.0) * ratio ** np.arange(m)
    cum = np.concatenate(([0.0], np.cumsum(h)))
    cum[-1] = length
    return a + cum if toward == "lo" else b - cum[::-1]


@dataclass(frozen=True)
class LogDomainQuadrature:
    """Tensor rule on the log box [-R, R]^N.

    Composite Gauss-Legendre panels grow geometrically (factor ``grading``)
    away from u = 0 and from every breakpoint, which suits integrands
    concentrated at the identity; features elsewhere should be passed as
    ``breaks`` or integrated with ``grading`` closer to 1 (1 is uniform).
    """

    dim: int
    half_width: float = 40.0
    nodes_per_axis: int = 0
    rule: str = "gauss_legendre_composite"
    order: int = 8
    grading: float = 2.0

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise UnknownDimension(f"dimension {self.dim} unsupported (1..{MAX_DIM})")
        if self.nodes_per_axis == 0:
            object.__setattr__(self, "nodes_per_axis", DEFAULT_NODES[self.dim])
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.nodes_per_axis < 8:
            raise ValueError("nodes_per_axis must be >= 8")
        if not self.grading >= 1.0:
            raise ValueError("grading must be >= 1")
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")

    @classmethod
    def for_bandwidth(cls, dim: int, w: float, **kw) -> "LogDomainQuadrature":
        """Box scaled to a kernel concentrating like 1/w around u = 0."""
        R = min(40.0, max(1e-2, 40.0 / max(1.0, float(w))))
        return cls(dim, half_width=R, **kw)

    @property
    def total_nodes(self) -> int:
        return self.nodes_per_axis ** self.dim

    def coarsened(self) -> "LogDomainQuadrature":
        return replace(self, nodes_per_axis=max(8, self.nodes_per_axis // 2))

    def widened(self, factor: float = 2.0) -> "LogDomainQuadrature":
        return replace(self, half_width=self.half_width * factor)

    def panel_edges(self, breaks: Sequence[float] = ()) -> np.ndarray:
        """Sorted panel edges on [-R, R] for one axis."""
        R = self.half_width
        if self.rule != "gauss_legendre_composite":
            n = self.nodes_per_axis if self.rule == "midpoint" else self.nodes_per_axis - 1
            edges = np.linspace(-R, R, n + 1)
            extra = [b for b in breaks if -R < b < R]
            return np.unique(np.concatenate((edges, extra)))

        inner = sorted({0.0, *(float(b) for b in breaks if -R < b < R)})
        bounds = [-R, *inner, R]
        segments = []
        for i in range(len(bounds) - 1):
            a, b = bounds[i], bounds[i + 1]
            if b <= a:
                continue
            left, right = i > 0, i < len(bounds) - 2
            if left and right:
                m = 0.5 * (a + b)
                segments += [(a, m, "lo"), (m, b, "hi")]
            elif left:
                segments.append((a, b, "lo"))
            else:
                segments.append((a, b, "hi"))
        # each segment gets a half-axis share, so breakpoints add panels
        per = max(1, self.nodes_per_axis // self.order // 2)
        edges = [_graded(a, b, per, toward, self.grading) for a, b, toward in segments]
        return np.unique(np.concatenate(edges))

    def axis_rule(self, breaks: Sequence[float] = ()):
        """Nodes and weights along one axis."""
        edges = self.panel_edges(breaks)
        return panel_rule(edges, self.rule, self.order)

    def tensor_rule(self, breaks_per_axis: Optional[Sequence[Sequence[float]]] = None):
        """Tensor-product nodes of shape (M, N) and weights of shape (M,)."""
        breaks_per_axis = breaks_per_axis or [()] * self.dim
        rules = [self.axis_rule(b) for b in breaks_per_axis]
        return tensor_product(rules)


def panel_rule(edges: np.ndarray, rule: str = "gauss_legendre_composite", order: int = 8):
    x, w = _reference_rule(rule, order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (half[:, None] * x + (0.5 * (hi + lo))[:, None]).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


def tensor_product(rules):
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=0), axis=0)
    return U, W


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    est_truncation_error: float = 0.0
    est_discretization_error: float = 0.0
    nodes_used: int = 0

    def __float__(self):
        return self.value


def _weighted_sum(F: Callable, U: np.ndarray, W: np.ndarray, mask=None) -> float:
    """sum W * F(exp(U)) in fixed chunks; raises on non-finite values."""
    total = []
    for start in range(0, U.shape[0], _CHUNK):
        u = U[start:start + _CHUNK]
        vals = np.asarray(F(np.exp(u)), dtype=float).reshape(-1)
        if not np.all(np.isfinite(vals)):
            bad = np.flatnonzero(~np.isfinite(vals))[0]
            raise NonFiniteIntegrand(f"integrand is {vals[bad]} at t = {np.exp(u[bad])}")
        w = W[start:start + _CHUNK]
        if mask is not None:
            w = w * mask[start:start + _CHUNK]
        total.append(np.sum(w * vals))
    return float(np.sum(total))


def _plain(F, quad, breaks):
    U, W = quad.tensor_rule(breaks)
    return _weighted_sum(F, U, W), U.shape[0]


def integrate_haar(F: Callable, quad: LogDomainQuadrature,
                   breaks: Optional[Sequence[Sequence[float]]] = None,
                   estimate_errors: bool = True) -> QuadratureResult:
    """Integrate F(t) <t>^-1 dt over R^N_+ (truncated to the log box).

    ``breaks`` lists extra panel edges per axis in u = log t coordinates; pass
    the locations of known discontinuities or kinks of F there.
    """
    value, n = _plain(F, quad, breaks)
    if not estimate_errors:
        return QuadratureResult(value, nodes_used=n)
    coarse = quad.coarsened()
    v_coarse, n1 = _plain(F, coarse, breaks)
    v_wide, n2 = _plain(F, coarse.widened(), breaks)
    return QuadratureResult(value, abs(v_wide - v_coarse), abs(value - v_coarse), n + n1 + n2)


# -------------------------------------------------------------- regions

def region_indicator(U: np.ndarray, region: str, delta: float) -> np.ndarray:
    """True where u = log t lies in the region; distance is |1 - t| in t space."""
    dist = np.sqrt(np.sum((1.0 - np.exp(U)) ** 2, axis=-1))
    return dist <= delta if region == "near" else dist > delta


def _cells_from_edges(edges_per_axis):
    los = np.meshgrid(*[e[:-1] for e in edges_per_axis], indexing="ij")
    his = np.meshgrid(*[e[1:] for e in edges_per_axis], indexing="ij")
    lo = np.stack([g.ravel() for g in los], axis=-1)
    hi = np.stack([g.ravel() for g in his], axis=-1)
    return lo, hi


def _cell_nodes(lo, hi, rule, order):
    """GL nodes (M, k, N) and weights (M, k) of each cell."""
    x, w = _reference_rule(rule, order)
    dim = lo.shape[1]
    ref, refw = tensor_product([(x, w)] * dim)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = mid[:, None, :] + half[:, None, :] * ref[None, :, :]
    weights = np.prod(half, axis=1)[:, None] * refw[None, :]
    return nodes, weights


def _corners(lo, hi):
    dim = lo.shape[1]
    combos = np.array(np.meshgrid(*[[0, 1]] * dim, indexing="ij")).reshape(dim, -1).T
    return np.where(combos[None, :, :] == 0, lo[:, None, :], hi[:, None, :])


def _split(lo, hi):
    dim = lo.shape[1]
    mid = 0.5 * (lo + hi)
    combos = np.array(np.meshgrid(*[[0, 1]] * dim, indexing="ij")).reshape(dim, -1).T
    new_lo = np.where(combos[None] == 0, lo[:, None], mid[:, None]).reshape(-1, dim)
    new_hi = np.where(combos[None] == 0, mid[:, None], hi[:, None]).reshape(-1, dim)
    return new_lo, new_hi


def _region_value(F, quad, region, delta, breaks):
    breaks = [list(b) for b in (breaks or [()] * quad.dim)]
    if quad.dim == 1:
        # the region boundary is exactly two points; no cell is ever cut
        breaks[0].extend((np.log1p(-delta), np.log1p(delta)))
    edges = [quad.panel_edges(b) for b in breaks]
    lo, hi = _cells_from_edges(edges)
    parts = []
    used = 0
    for level in range(REGION_LEVELS + 1):
        if lo.shape[0] == 0:
            break
        nodes, weights = _cell_nodes(lo, hi, quad.rule, quad.order)
        ind = region_indicator(nodes, region, delta)
        corner_ind = region_indicator(_corners(lo, hi), region, delta)
        all_in = ind.all(axis=1) & corner_ind.all(axis=1)
        all_out = ~ind.any(axis=1) & ~corner_ind.any(axis=1)
        cut = ~(all_in | all_out)
        final = level == REGION_LEVELS
        take = all_in | (cut & final)
        if take.any():
            U = nodes[take].reshape(-1, quad.dim)
            mask = ind[take].reshape(-1).astype(float)
            W = weights[take].reshape(-1)
            parts.append(_weighted_sum(F, U, W, mask))
            used += U.shape[0]
        if final or not cut.any():
            break
        lo, hi = _split(lo[cut], hi[cut])
    return float(np.sum(parts)) if parts else 0.0, used


def integrate_haar_region(F: Callable, quad: LogDomainQuadrature, region: str, delta: float,
                          breaks: Optional[Sequence[Sequence[float]]] = None,
                          estimate_errors: bool = True) -> QuadratureResult:
    """Haar integral of F over {|1 - t| <= delta} ("near") or its complement ("far").

    Cells cut by the sphere |1 - t| = delta are split dyadically REGION_LEVELS
    times; the last level applies the indicator node by node.
    """
    if region not in ("near", "far"):
        raise ValueError("region must be 'near' or 'far'")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    value, n = _region_value(F, quad, region, delta, breaks)
    if not estimate_errors:
        return QuadratureResult(value, nodes_used=n)
    coarse = quad.coarsened()
    v_coarse, n1 = _region_value(F, coarse, region, delta, breaks)
    v_wide, n2 = _region_value(F, coarse.widened(), region, delta, breaks)
    return QuadratureResult(value, abs(v_wide - v_coarse), abs(value - v_coarse), n + n1 + n2)
