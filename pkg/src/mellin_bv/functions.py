"""Closed-form test functions on R^N_+, homothetic translates and increments."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from . import _accel
from .errors import UnknownDimension
from .phi import PhiFunction

SINELOG_HALF_WIDTH = 2.0 * math.pi


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim <= 1 or x.shape[-1] != 1):
        x = x[..., None]
    return x


@dataclass(frozen=True)
class TestFunction:
    """f: R^N_+ -> R evaluated on arrays of shape (..., N).

    ``jumps`` holds, per axis, coordinates where f may jump (f is right
    continuous there); ``kinks`` those where f is continuous but not smooth.
    Quadrature splits panels at both.  For N = 1, ``critical(a, b)`` returns the ordered
    values of f at its monotonicity breaks inside [a, b] (None meaning the
    limit at 0+ or +inf, jumps contributing the left limit then the value);
    phi-variation is then exact via the sup over that short sequence.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    dim: int
    func: Callable = field(compare=False, repr=False)
    tags: frozenset = frozenset()
    jumps: tuple = ()
    critical: Optional[Callable] = field(default=None, compare=False, repr=False)
    lip_alpha: Optional[float] = None
    log_func: Optional[Callable] = field(default=None, compare=False, repr=False)
    kinks: tuple = ()

    def __post_init__(self):
        if not self.jumps:
            object.__setattr__(self, "jumps", ((),) * self.dim)
        if not self.kinks:
            object.__setattr__(self, "kinks", ((),) * self.dim)

    @property
    def breakpoints(self) -> tuple:
        """Per-axis union of jumps and kinks."""
        return _merge_jumps(self.jumps, self.kinks)

    def __call__(self, x):
        pts = _as_points(x, self.dim)
        out = np.asarray(self.func(pts), dtype=float)
        return float(out) if out.ndim == 0 else out

    eval = __call__

    def eval_log(self, U) -> np.ndarray:
        """f(exp U) for U of shape (..., N), skipping the exp when possible."""
        U = np.asarray(U, dtype=float)
        if self.log_func is not None:
            return np.asarray(self.log_func(U), dtype=float)
        return np.asarray(self.func(np.exp(U)), dtype=float)

    @property
    def bounded(self) -> bool:
        return "bounded" in self.tags

    def exact_variation(self, phi: PhiFunction, lam: float = 1.0,
                        interval: Optional[tuple] = None) -> Optional[float]:
        """Exact V^phi[lam f] on ``interval`` (global when None), if known."""
        if self.critical is None or phi.exponent is None:
            return None
        a, b = interval if interval is not None else (None, None)
        vals = lam * np.asarray(self.critical(a, b), dtype=float)
        return _accel.impl.sup(vals, phi.exponent)

    def scaled(self, lam: float) -> "TestFunction":
        lam = float(lam)
        base = self
        crit = lf = None
        if self.critical is not None:
            crit = lambda a, b: [lam * v for v in base.critical(a, b)]
        if self.log_func is not None:
            lf = lambda U: lam * base.log_func(U)
        return TestFunction(f"{lam:g}*{self.name}", self.dim, lambda x: lam * base.func(x),
                            self.tags, self.jumps, crit, self.lip_alpha, lf, self.kinks)

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return combine(self, other, 1.0, -1.0)

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return combine(self, other, 1.0, 1.0)


def _merge_jumps(*jsets):
    dim = len(jsets[0])
    return tuple(tuple(sorted(set().union(*[set(j[i]) for j in jsets]))) for i in range(dim))


def combine(f: TestFunction, g: TestFunction, a: float = 1.0, b: float = 1.0,
            name: Optional[str] = None) -> TestFunction:
    """a*f + b*g."""
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    tags = frozenset({"bounded"}) if f.bounded and g.bounded else frozenset()
    lf = None
    if f.log_func is not None and g.log_func is not None:
        lf = lambda U: a * f.log_func(U) + b * g.log_func(U)
    return TestFunction(name or f"({a:g}*{f.name} + {b:g}*{g.name})", f.dim,
                        lambda x: a * f.func(x) + b * g.func(x), tags,
                        _merge_jumps(f.jumps, g.jumps), log_func=lf,
                        kinks=_merge_jumps(f.kinks, g.kinks))


def _check_t(t, dim):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.shape != (dim,) or np.any(t <= 0):
        raise ValueError(f"t must be a point of R^{dim}_+")
    return t


def translate(f: TestFunction, t) -> TestFunction:
    """The homothetic translate s -> f(s t)."""
    t = _check_t(t, f.dim)
    jumps = tuple(tuple(sorted(c / t[i] for c in f.jumps[i])) for i in range(f.dim))
    kinks = tuple(tuple(sorted(c / t[i] for c in f.kinks[i])) for i in range(f.dim))
    crit = lf = None
    if f.critical is not None and f.dim == 1:
        base, t0 = f.critical, t[0]
        crit = lambda a, b: base(None if a is None else a * t0, None if b is None else b * t0)
    if f.log_func is not None:
        lt = np.log(t)
        lf = lambda U: f.log_func(U + lt)
    return TestFunction(f"tau[{f.name}]", f.dim, lambda x: f.func(x * t), f.tags, jumps,
                        crit, f.lip_alpha, lf, kinks)


def increment(f: TestFunction, t) -> TestFunction:
    """Delta_t f (x) = f(x t) - f(x)."""
    t = _check_t(t, f.dim)
    shifted = translate(f, t)
    tags = frozenset({"bounded"}) if f.bounded else frozenset()
    lf = None
    if f.log_func is not None:
        lt = np.log(t)
        lf = lambda U: f.log_func(U + lt) - f.log_func(U)
    return TestFunction(f"Delta[{f.name}]", f.dim, lambda x: f.func(x * t) - f.func(x), tags,
                        _merge_jumps(f.jumps, shifted.jumps), log_func=lf,
                        kinks=_merge_jumps(f.kinks, shifted.kinks))


def lift(f: TestFunction, dim: int, axis: int = 0) -> TestFunction:
    """A one-dimensional f viewed on R^dim_+ through coordinate ``axis``."""
    if f.dim != 1:
        raise ValueError("only one-dimensional functions can be lifted")
    jumps = tuple(f.jumps[0] if i == axis else () for i in range(dim))
    kinks = tuple(f.kinks[0] if i == axis else () for i in range(dim))
    lf = None if f.log_func is None else (lambda U: f.log_func(U[..., axis:axis + 1]))
    return TestFunction(f"{f.name}[x{axis + 1}]", dim, lambda x: f.func(x[..., axis:axis + 1]),
                        f.tags, jumps, log_func=lf, kinks=kinks)


class _Memo:
    def __init__(self, func, size):
        self.func = func
        self.size = size
        self.store = OrderedDict()

    def __call__(self, x):
        x = np.ascontiguousarray(x, dtype=float)
        key = (x.shape, x.tobytes())
        hit = self.store.get(key)
        if hit is not None:
            self.store.move_to_end(key)
            return hit
        out = np.asarray(self.func(x), dtype=float)
        out.setflags(write=False)
        self.store[key] = out
        if len(self.store) > self.size:
            self.store.popitem(last=False)
        return out


def cached(f: TestFunction, size: int = 256) -> TestFunction:
    """Memoize evaluations on identical point arrays (used across lambda scans)."""
    return replace(f, func=_Memo(f.func, size))


# ------------------------------------------------------------------ builtins

def bump(y):
    """C^1 bump (1 - y^2)^2 supported in [-1, 1], peak 1 at 0."""
    y = np.asarray(y, dtype=float)
    z = np.maximum(1.0 - y * y, 0.0)
    return z * z


def _prod_axes(fn, U):
    """prod_i fn(U[..., i]) without a reduction over a short trailing axis."""
    out = fn(U[..., 0])
    for i in range(1, U.shape[-1]):
        out = out * fn(U[..., i])
    return out


def _end(f1, x, limit):
    return limit if x is None else float(f1(np.array([[x]]))[0])


def step1d() -> TestFunction:
    func = lambda x: np.where(x[..., 0] >= 1.0, 1.0, 0.0)

    def critical(a, b):
        vals = [_end(func, a, 0.0)]
        if (a is None or a < 1.0) and (b is None or b >= 1.0):
            vals += [0.0, 1.0]
        vals.append(_end(func, b, 1.0))
        return vals

    return TestFunction("step1d", 1, func, frozenset({"bv_phi", "bounded"}), ((1.0,),), critical,
                        log_func=lambda U: np.where(U[..., 0] >= 0.0, 1.0, 0.0))


def clamplog() -> TestFunction:
    func = lambda x: np.clip(np.log(x[..., 0]), 0.0, 1.0)
    critical = lambda a, b: [_end(func, a, 0.0), _end(func, b, 1.0)]
    return TestFunction("clamplog", 1, func,
                        frozenset({"ac_phi", "bv_phi", "lip(1)", "bounded"}), critical=critical,
                        lip_alpha=1.0, log_func=lambda U: np.clip(U[..., 0], 0.0, 1.0),
                        kinks=((1.0, math.e),))


def logbump(N: int = 1) -> TestFunction:
    func = lambda x: np.prod(bump(np.log(x)), axis=-1)
    critical = None
    if N == 1:
        def critical(a, b):
            vals = [_end(func, a, 0.0)]
            if (a is None or a < 1.0) and (b is None or b > 1.0):
                vals.append(1.0)
            vals.append(_end(func, b, 0.0))
            return vals
    return TestFunction("logbump", N, func,
                        frozenset({"ac_phi", "bv_phi", "lip(1)", "bounded"}), critical=critical,
                        lip_alpha=1.0, log_func=lambda U: _prod_axes(bump, U),
                        kinks=((math.exp(-1.0), math.e),) * N)


def _sinelog_values(y):
    return np.sin(y) * bump(y / SINELOG_HALF_WIDTH)


@lru_cache(maxsize=None)
def _sinelog_extrema() -> tuple:
    """Log-coordinates of the interior extrema of sin(y) B(y / L)."""
    L = SINELOG_HALF_WIDTH
    y = np.linspace(-L, L, 40001)
    v = _sinelog_values(y)
    idx = _accel.numpy_impl.extrema(v)[1:-1]
    out = []
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    for i in idx:
        sign = 1.0 if v[i] >= v[i - 1] else -1.0
        lo, hi = y[i - 1], y[i + 1]
        for _ in range(80):
            m1, m2 = hi - gr * (hi - lo), lo + gr * (hi - lo)
            if sign * _sinelog_values(m1) >= sign * _sinelog_values(m2):
                hi = m2
            else:
                lo = m1
        out.append(0.5 * (lo + hi))
    return tuple(out)


def sinelog() -> TestFunction:
    func = lambda x: _sinelog_values(np.log(x[..., 0]))

    def critical(a, b):
        la = -math.inf if a is None else math.log(a)
        lb = math.inf if b is None else math.log(b)
        vals = [_end(func, a, 0.0)]
        vals += [float(_sinelog_values(y)) for y in _sinelog_extrema() if la < y < lb]
        vals.append(_end(func, b, 0.0))
        return vals

    return TestFunction("sinelog", 1, func, frozenset({"ac_phi", "bv_phi", "bounded"}),
                        critical=critical, log_func=lambda U: _sinelog_values(U[..., 0]),
                        kinks=((math.exp(-SINELOG_HALF_WIDTH), math.exp(SINELOG_HALF_WIDTH)),))


def prodstep(N: int = 2) -> TestFunction:
    func = lambda x: np.prod(np.where(x >= 1.0, 1.0, 0.0), axis=-1)
    return TestFunction("prodstep", N, func, frozenset({"bv_phi", "bounded"}),
                        tuple((1.0,) for _ in range(N)),
                        log_func=lambda U: _prod_axes(lambda u: np.where(u >= 0.0, 1.0, 0.0), U))


def const(N: int = 1, value: float = 1.0) -> TestFunction:
    func = lambda x: np.full(x.shape[:-1], value)
    critical = (lambda a, b: [value, value]) if N == 1 else None
    return TestFunction("const", N, func,
                        frozenset({"ac_phi", "bv_phi", "lip(1)", "bounded"}), critical=critical,
                        lip_alpha=1.0, log_func=lambda U: np.full(U.shape[:-1], value))


def builtin_registry(N: int = 1) -> list:
    if not 1 <= N <= 3:
        raise UnknownDimension(f"no builtin functions for N = {N}")
    if N == 1:
        return [step1d(), logbump(1), clamplog(), sinelog(), const(1)]
    return [logbump(N), prodstep(N), const(N)]


def get_function(name: str, N: int = 1) -> TestFunction:
    for f in builtin_registry(N):
        if f.name == name:
            return f
    raise KeyError(f"no builtin function {name!r} for N = {N}")
