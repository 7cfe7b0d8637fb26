"""Hot kernels for the phi-variation estimators.

Every kernel has a numba ``@njit`` implementation and a pure-numpy twin with
identical arithmetic.  The numba path is used when numba imports cleanly and
``MELLIN_BV_DISABLE_JIT`` is unset (or ``0``); both paths stay importable as
``numba_impl`` / ``numpy_impl`` so tests and the benchmark can compare them.

The exponent ``p`` encodes phi(u) = u**p (p == 1 is the classical case).
"""

import os
from types import SimpleNamespace

import numpy as np

# Below this length the sup is taken over every sub-partition of the samples
# (no extrema reduction), so results match the brute-force oracle bit for bit.
FULL_DP_MAX = 64
BRUTE_FORCE_MAX = 14


def _flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


JIT_DISABLED = _flag("MELLIN_BV_DISABLE_JIT")

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False


# ---------------------------------------------------------------- numpy path

def _np_phi(x, p):
    if p == 1.0:
        return x
    if p == 2.0:
        return x * x
    return x ** p


def _np_extrema(values):
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    if n <= 2:
        return np.arange(n, dtype=np.int64)
    # collapse plateaus, keeping the first index of each run of equal values
    keep = np.empty(n, dtype=bool)
    keep[0] = True
    keep[1:] = v[1:] != v[:-1]
    idx = np.flatnonzero(keep)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    if idx.shape[0] <= 2:
        return idx.astype(np.int64)
    d = np.diff(v[idx])
    turn = d[:-1] * d[1:] < 0.0
    inner = idx[1:-1][turn]
    return np.concatenate(([idx[0]], inner, [idx[-1]])).astype(np.int64)


def _np_dp_full(values, p):
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    if n < 2:
        return 0.0
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = np.max(best[:j] + _np_phi(np.abs(v[j] - v[:j]), p))
    return float(best[-1])


def _np_sup(values, p):
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] <= FULL_DP_MAX:
        return _np_dp_full(v, p)
    if p == 1.0:  # triangle inequality: the finest partition is optimal
        return _np_grid_sum(v, p)
    return _np_dp_full(v[_np_extrema(v)], p)


def _np_sup_rows(values, p):
    values = np.asarray(values, dtype=np.float64)
    return np.array([_np_sup(row, p) for row in values])


def _np_sup_segments(values, starts, stops, p):
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros((values.shape[0], len(starts)))
    for r in range(values.shape[0]):
        for k in range(len(starts)):
            out[r, k] = _np_sup(values[r, starts[k]:stops[k]], p)
    return out


def _np_brute_force(values, p):
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    if n < 2:
        return 0.0
    inner = n - 2
    best = 0.0
    for mask in range(1 << inner):
        total = 0.0
        prev = v[0]
        for k in range(inner):
            if mask >> k & 1:
                total += _np_phi(abs(v[k + 1] - prev), p)
                prev = v[k + 1]
        total += _np_phi(abs(v[n - 1] - prev), p)
        if total > best:
            best = total
    return float(best)


def _np_grid_sum(values, p):
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] < 2:
        return 0.0
    return float(np.sum(_np_phi(np.abs(np.diff(v)), p)))


numpy_impl = SimpleNamespace(
    extrema=_np_extrema,
    sup=_np_sup,
    sup_rows=_np_sup_rows,
    sup_segments=_np_sup_segments,
    brute_force=_np_brute_force,
    grid_sum=_np_grid_sum,
    dp_full=_np_dp_full,
)


# ---------------------------------------------------------------- numba path

if HAS_NUMBA:
    njit = numba.njit(cache=False, nogil=True)

    @njit
    def _nb_phi(x, p):
        if p == 1.0:
            return x
        if p == 2.0:
            return x * x
        return x ** p

    @njit
    def _nb_extrema(v):
        n = v.shape[0]
        out = np.empty(n, dtype=np.int64)
        if n <= 2:
            for i in range(n):
                out[i] = i
            return out[:n]
        # plateau-collapsed index list
        idx = np.empty(n, dtype=np.int64)
        m = 1
        idx[0] = 0
        for i in range(1, n):
            if v[i] != v[i - 1]:
                idx[m] = i
                m += 1
        if idx[m - 1] != n - 1:
            idx[m] = n - 1
            m += 1
        k = 0
        out[k] = idx[0]
        k += 1
        for i in range(1, m - 1):
            d0 = v[idx[i]] - v[idx[i - 1]]
            d1 = v[idx[i + 1]] - v[idx[i]]
            if d0 * d1 < 0.0:
                out[k] = idx[i]
                k += 1
        if m >= 2:
            out[k] = idx[m - 1]
            k += 1
        return out[:k]

    @njit
    def _nb_dp_full(v, p):
        n = v.shape[0]
        if n < 2:
            return 0.0
        best = np.zeros(n)
        for j in range(1, n):
            b = -1.0
            vj = v[j]
            for i in range(j):
                c = best[i] + _nb_phi(abs(vj - v[i]), p)
                if c > b:
                    b = c
            best[j] = b
        return best[n - 1]

    @njit
    def _nb_sup(v, p):
        if v.shape[0] <= FULL_DP_MAX:
            return _nb_dp_full(v, p)
        if p == 1.0:
            return _nb_grid_sum(v, p)
        return _nb_dp_full(v[_nb_extrema(v)], p)

    @njit
    def _nb_sup_rows(values, p):
        out = np.zeros(values.shape[0])
        for r in range(values.shape[0]):
            out[r] = _nb_sup(np.ascontiguousarray(values[r]), p)
        return out

    @njit
    def _nb_sup_segments(values, starts, stops, p):
        out = np.zeros((values.shape[0], starts.shape[0]))
        for r in range(values.shape[0]):
            for k in range(starts.shape[0]):
                seg = np.ascontiguousarray(values[r, starts[k]:stops[k]])
                out[r, k] = _nb_sup(seg, p)
        return out

    @njit
    def _nb_brute_force(v, p):
        n = v.shape[0]
        if n < 2:
            return 0.0
        inner = n - 2
        best = 0.0
        for mask in range(1 << inner):
            total = 0.0
            prev = v[0]
            for k in range(inner):
                if (mask >> k) & 1:
                    total += _nb_phi(abs(v[k + 1] - prev), p)
                    prev = v[k + 1]
            total += _nb_phi(abs(v[n - 1] - prev), p)
            if total > best:
                best = total
        return best

    @njit
    def _nb_grid_sum(v, p):
        total = 0.0
        for i in range(1, v.shape[0]):
            total += _nb_phi(abs(v[i] - v[i - 1]), p)
        return total

    def _wrap(fn):
        def call(values, *args):
            return fn(np.ascontiguousarray(values, dtype=np.float64), *args)
        call.__name__ = fn.__name__
        return call

    def _wrap_segments(values, starts, stops, p):
        return _nb_sup_segments(
            np.ascontiguousarray(values, dtype=np.float64),
            np.asarray(starts, dtype=np.int64),
            np.asarray(stops, dtype=np.int64),
            float(p),
        )

    numba_impl = SimpleNamespace(
        extrema=_wrap(_nb_extrema),
        sup=lambda values, p: float(_wrap(_nb_sup)(values, float(p))),
        sup_rows=lambda values, p: _wrap(_nb_sup_rows)(np.atleast_2d(values), float(p)),
        sup_segments=_wrap_segments,
        brute_force=lambda values, p: float(_wrap(_nb_brute_force)(values, float(p))),
        grid_sum=lambda values, p: float(_wrap(_nb_grid_sum)(values, float(p))),
        dp_full=lambda values, p: float(_wrap(_nb_dp_full)(values, float(p))),
    )
else:  # pragma: no cover
    numba_impl = None


USING_NUMBA = HAS_NUMBA and not JIT_DISABLED
impl = numba_impl if USING_NUMBA else numpy_impl


def backend_name():
    return "numba" if USING_NUMBA else "numpy"
