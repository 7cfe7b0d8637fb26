"""The Mellin convolution operator (T_w f)(s) = int K_w(t) f(st) dt / <t>.

In log coordinates the operator is a convolution.  For Fejer families the
substitution v = w log t removes w from the kernel entirely,

    (T_w f)(s) = int K(e^v) f(s e^{v / w}) dv,

so one fixed rule in v serves every w.  Known jumps and kinks c of f become
per-point breakpoints v* = w (log c - log s_i) and the panels are split there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import NonFiniteIntegrand
from .functions import TestFunction
from .haar_quad import LogDomainQuadrature, panel_rule
from .kernels import KernelFamily

V_NODES = {1: 128, 2: 48, 3: 48}
# relative kernel weight below which tensor corners are dropped
WEIGHT_CUTOFF = 1e-18
V_GRADING = 2.0
# short-support profiles do better with gently graded panels
_GRADING = {"gauss_weierstrass": 1.3}
# profiles with a cone point at the identity need finer tensor rules
_CONE_NODES = {"picard": {2: 128, 3: 64}}
_CHUNK = 1 << 21


@dataclass(frozen=True)
class OperatorEvaluation:
    """One operator T_w applied to one function."""

    w: float
    kernel: KernelFamily
    f: TestFunction
    quad: Optional[LogDomainQuadrature] = field(default=None)

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError("w must be positive")
        if self.kernel.dim != self.f.dim:
            raise ValueError(f"kernel is {self.kernel.dim}-D but f is {self.f.dim}-D")
        if self.quad is None:
            object.__setattr__(self, "quad", default_quadrature(self.kernel, self.w))
        elif self.quad.dim != self.f.dim:
            raise ValueError("quadrature dimension mismatch")

    @property
    def dim(self) -> int:
        return self.f.dim


def default_quadrature(kernel: KernelFamily, w: float, nodes_per_axis: int = 0) -> LogDomainQuadrature:
    """Rule in the integration variable: v for Fejer families, u = log t otherwise."""
    n = nodes_per_axis or V_NODES[kernel.dim]
    if not nodes_per_axis:
        n = _CONE_NODES.get(kernel.name, {}).get(kernel.dim, n)
    grading = _GRADING.get(kernel.name, V_GRADING)
    if kernel.structure == "fejer":
        return LogDomainQuadrature(kernel.dim, kernel.v_radius, n, grading=grading)
    q = kernel.quadrature(w, n)
    return LogDomainQuadrature(kernel.dim, q.half_width, n, grading=grading)


def default_s_grid(N: int = 1, n: int = 257, span: float = 5.0) -> list:
    """Per-axis log-uniform grids on [e^-span, e^span]."""
    return [np.exp(np.linspace(-span, span, n)) for _ in range(N)]


@lru_cache(maxsize=64)
def _base_edges(quad: LogDomainQuadrature) -> np.ndarray:
    return quad.panel_edges()


def _kernel_weights(op: OperatorEvaluation, V: np.ndarray) -> np.ndarray:
    if op.kernel.structure == "fejer":
        return op.kernel.log_profile(V)
    return op.kernel.log_kernel(op.w, V)


def _point_rules(op: OperatorEvaluation, S: np.ndarray, axis: int, vb: np.ndarray):
    """Per-point nodes/weights along one axis, panels split at the breakpoints vb (M, k)."""
    quad = op.quad
    base = _base_edges(quad)
    M = S.shape[0]
    if vb.shape[1] == 0:
        x, w = panel_rule(base, quad.rule, quad.order)
        return np.broadcast_to(x, (M, x.size)), np.broadcast_to(w, (M, w.size))
    edges = np.sort(np.concatenate((np.broadcast_to(base, (M, base.size)), vb), axis=1), axis=1)
    ref_x, ref_w = np.polynomial.legendre.leggauss(quad.order)
    lo, hi = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = (half[..., None] * ref_x + mid[..., None]).reshape(M, -1)
    w = (half[..., None] * ref_w).reshape(M, -1)
    return x, w


def _tensor_rows(rules):
    """Row-wise tensor product of per-point axis rules: (M, n, N) nodes, (M, n) weights."""
    M, N = rules[0][0].shape[0], len(rules)
    sizes = [x.shape[1] for x, _ in rules]
    X = np.empty((M, *sizes, N))
    W = np.ones((M, *sizes))
    for ax, (x, w) in enumerate(rules):
        shape = [M] + [1] * N
        shape[ax + 1] = sizes[ax]
        X[..., ax] = x.reshape(shape)
        W = W * w.reshape(shape)
    n = int(np.prod(sizes))
    return X.reshape(M, n, N), W.reshape(M, n)


def _shared(op: OperatorEvaluation, logS: np.ndarray) -> np.ndarray:
    """Points whose breakpoints all lie outside the rule: one node set for all."""
    rules = [panel_rule(_base_edges(op.quad), op.quad.rule, op.quad.order)] * op.dim
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    V = np.stack([g.ravel() for g in grids], axis=-1)
    Wq = np.prod(np.stack(np.meshgrid(*[r[1] for r in rules], indexing="ij"), 0), 0).ravel()
    KW = Wq * _kernel_weights(op, V)
    keep = np.abs(KW) > WEIGHT_CUTOFF * np.max(np.abs(KW))
    V, KW = V[keep], KW[keep]
    shift = op.kernel.scale(op.w) * V
    out = np.empty(logS.shape[0])
    step = max(1, _CHUNK // V.shape[0])
    for i in range(0, logS.shape[0], step):
        vals = op.f.eval_log(logS[i:i + step, None, :] + shift[None, :, :])
        _check_finite(vals)
        out[i:i + step] = vals @ KW
    return out


def _split(op: OperatorEvaluation, S: np.ndarray, vbs: list) -> np.ndarray:
    """Points sharing per-axis breakpoint counts; vbs[ax] has shape (M, k_ax)."""
    per_point = 1
    n_base = op.quad.panel_edges().size - 1
    for vb in vbs:
        per_point *= (n_base + vb.shape[1]) * op.quad.order
    scale = op.kernel.scale(op.w)
    out = np.empty(S.shape[0])
    step = max(1, _CHUNK // per_point)
    for i in range(0, S.shape[0], step):
        Si = S[i:i + step]
        rules = [_point_rules(op, Si, ax, vbs[ax][i:i + step]) for ax in range(op.dim)]
        V, Wq = _tensor_rows(rules)
        KW = Wq * _kernel_weights(op, V)
        vals = op.f.eval_log(np.log(Si)[:, None, :] + scale * V)
        _check_finite(vals)
        out[i:i + step] = np.einsum("ij,ij->i", vals, KW)
    return out


def apply_many(op: OperatorEvaluation, S) -> np.ndarray:
    """T_w f at the rows of S (shape (M, N)); returns shape (M,)."""
    S = np.asarray(S, dtype=float)
    if op.dim == 1 and (S.ndim == 1 or S.shape[-1] != 1):
        S = S.reshape(-1, 1)
    if S.ndim != 2 or S.shape[1] != op.dim:
        raise ValueError(f"expected points of shape (M, {op.dim})")
    if np.any(~(S > 0)) or np.any(~np.isfinite(S)):
        raise ValueError("points must lie in R^N_+")
    logS = np.log(S)
    breaks = op.f.breakpoints
    if not any(len(b) for b in breaks):
        return _shared(op, logS)
    # breakpoints in the integration variable, v* = (log c - log s) / scale
    R, scale = op.quad.half_width, op.kernel.scale(op.w)
    vb = [(np.log(np.asarray(b, dtype=float))[None, :] - logS[:, ax:ax + 1]) / scale
          for ax, b in enumerate(breaks)]
    inside = [(v > -R) & (v < R) for v in vb]
    counts = np.stack([m.sum(axis=1) for m in inside], axis=1)
    out = np.empty(S.shape[0])
    for key in np.unique(counts, axis=0):
        rows = np.flatnonzero(np.all(counts == key, axis=1))
        if not key.any():
            out[rows] = _shared(op, logS[rows])
            continue
        # in-range breakpoints first (stable), then keep the first k per row
        vbs = []
        for ax in range(op.dim):
            v, m = vb[ax][rows], inside[ax][rows]
            order = np.argsort(~m, axis=1, kind="stable")
            vbs.append(np.take_along_axis(v, order, axis=1)[:, :key[ax]])
        out[rows] = _split(op, S[rows], vbs)
    return out


def _check_finite(vals):
    if not np.all(np.isfinite(vals)):
        raise NonFiniteIntegrand("f is not finite on the shifted node set (f outside the domain)")


def apply(op: OperatorEvaluation, s) -> float:
    """(T_w f)(s) at a single point."""
    s = np.atleast_1d(np.asarray(s, dtype=float)).reshape(1, op.dim)
    return float(apply_many(op, s)[0])


def apply_on_grid(op: OperatorEvaluation, s_grid: Optional[Sequence] = None) -> np.ndarray:
    """T_w f on a tensor grid given as per-axis 1-D arrays; returns the table."""
    s_grid = s_grid if s_grid is not None else default_s_grid(op.dim)
    axes = [np.asarray(g, dtype=float) for g in s_grid]
    if len(axes) != op.dim:
        raise ValueError("one grid per axis required")
    mesh = np.meshgrid(*axes, indexing="ij")
    S = np.stack([m.ravel() for m in mesh], axis=-1)
    return apply_many(op, S).reshape(mesh[0].shape)


def operator_image(kernel: KernelFamily, w: float, f: TestFunction,
                   quad: Optional[LogDomainQuadrature] = None) -> TestFunction:
    """T_w f packaged as a TestFunction (continuous, so no jump set)."""
    op = OperatorEvaluation(float(w), kernel, f, quad)
    N = f.dim

    def func(x):
        x = np.asarray(x, dtype=float)
        return apply_many(op, x.reshape(-1, N)).reshape(x.shape[:-1])

    tags = frozenset({"bounded"}) if f.bounded else frozenset()
    return TestFunction(f"T[{kernel.name},{w:g}][{f.name}]", N, func, tags)
