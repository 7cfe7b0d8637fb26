"""Kernel families {K_w} and numerical checks of their approximate-identity axioms."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .errors import SuspectedDivergence, UnknownDimension
from .haar_quad import LogDomainQuadrature, integrate_haar, integrate_haar_region, MAX_DIM
from .parallel import pmap
from .rates import RateReport, decay_report, decreasing_until_underflow

DEFAULT_DELTAS = (0.25, 0.5, 0.75)
FAR_MASS_CEILING = 1e-3


def _sq_norm(U):
    # explicit loop: reductions over a short trailing axis are slow in numpy
    out = U[..., 0] * U[..., 0]
    for i in range(1, U.shape[-1]):
        out = out + U[..., i] * U[..., i]
    return out


def _log_norm(U):
    return np.sqrt(_sq_norm(U))


def _neg_part(U):
    """(all(U < 0), sum(min(U, 0))) over the last axis."""
    inside = U[..., 0] < 0.0
    total = np.minimum(U[..., 0], 0.0)
    for i in range(1, U.shape[-1]):
        inside = inside & (U[..., i] < 0.0)
        total = total + np.minimum(U[..., i], 0.0)
    return inside, total


@dataclass(frozen=True)
class KernelFamily:
    """A family K_w evaluated in log coordinates, ``log_kernel(w, U) = K_w(exp U)``.

    Fejer-structured families also carry ``log_profile(U) = K(exp U)`` with
    K_w(t) = w^N K(t^w).
    """

    name: str
    dim: int
    log_kernel: Callable = field(compare=False)
    structure: str = "general"
    log_profile_fn: Optional[Callable] = field(default=None, compare=False)
    nonnegative: bool = True
    concentrates: bool = True
    v_radius: float = 40.0

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise UnknownDimension(f"dimension {self.dim} unsupported")

    def eval(self, w: float, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.dim == 1 and (t.ndim <= 1 or t.shape[-1] != 1):
            t = t[..., None]
        return self.log_kernel(float(w), np.log(t))

    def profile(self, t) -> np.ndarray:
        if self.log_profile_fn is None:
            raise TypeError(f"{self.name} has no Fejer profile")
        t = np.asarray(t, dtype=float)
        if self.dim == 1 and (t.ndim <= 1 or t.shape[-1] != 1):
            t = t[..., None]
        return self.log_profile_fn(np.log(t))

    def log_profile(self, U) -> np.ndarray:
        return self.log_profile_fn(U)

    def scale(self, w: float) -> float:
        """Log-coordinate width of K_w relative to its profile."""
        return 1.0 / w if self.structure == "fejer" else 1.0

    def quadrature(self, w: float, nodes_per_axis: int = 0) -> LogDomainQuadrature:
        if self.concentrates:
            return LogDomainQuadrature.for_bandwidth(self.dim, w, nodes_per_axis=nodes_per_axis)
        return LogDomainQuadrature(self.dim, 40.0, nodes_per_axis=nodes_per_axis)

    def haar_integrand(self, w: float, weight: Optional[Callable] = None, absolute: bool = False):
        """F(t) = K_w(t) (or |K_w(t)|) times an optional weight of log t."""
        def F(t):
            U = np.log(t)
            k = self.log_kernel(w, U)
            if absolute:
                k = np.abs(k)
            if weight is not None:
                k = k * weight(U)
            return k
        return F


def gauss_weierstrass(N: int = 1) -> KernelFamily:
    c = math.pi ** (-N / 2)

    def log_kernel(w, U):
        return w ** N * c * np.exp(-(w * w) * _sq_norm(U))

    def log_profile(U):
        return c * np.exp(-_sq_norm(U))

    return KernelFamily("gauss_weierstrass", N, log_kernel, "fejer", log_profile, v_radius=6.5)


def picard_constant(N: int) -> float:
    """Normalizer Gamma(N/2) / (2 pi^(N/2) Gamma(N)) of the Picard profile."""
    return math.gamma(N / 2) / (2.0 * math.pi ** (N / 2) * math.gamma(N))


def picard(N: int = 1) -> KernelFamily:
    c = picard_constant(N)

    def log_kernel(w, U):
        return w ** N * c * np.exp(-w * _log_norm(U))

    def log_profile(U):
        return c * np.exp(-_log_norm(U))

    return KernelFamily("picard", N, log_kernel, "fejer", log_profile, v_radius=40.0)


def moment_kernel(N: int = 1) -> KernelFamily:
    def log_kernel(w, U):
        inside, total = _neg_part(U)
        return np.where(inside, w ** N * np.exp(w * total), 0.0)

    def log_profile(U):
        inside, total = _neg_part(U)
        return np.where(inside, np.exp(total), 0.0)

    return KernelFamily("moment", N, log_kernel, "fejer", log_profile, v_radius=40.0)


def flat_kernel(N: int = 1) -> KernelFamily:
    """The Picard profile used for every w: normalized but never concentrating."""
    c = picard_constant(N)

    def log_kernel(w, U):
        return c * np.exp(-_log_norm(U))

    return KernelFamily("custom:flat", N, log_kernel, "general", concentrates=False)


BUILTIN_KERNELS = {
    "gauss_weierstrass": gauss_weierstrass,
    "picard": picard,
    "moment": moment_kernel,
}
CUSTOM_KERNELS: Dict[str, Callable[[int], KernelFamily]] = {"flat": flat_kernel}


def register_custom_kernel(name: str, factory: Callable[[int], KernelFamily]) -> None:
    """Make ``factory(N)`` available as ``get_kernel("custom:<name>", N)``."""
    CUSTOM_KERNELS[name.removeprefix("custom:")] = factory


def get_kernel(name: str, N: int = 1) -> KernelFamily:
    if name.startswith("custom:"):
        key = name.split(":", 1)[1]
        if key not in CUSTOM_KERNELS:
            raise KeyError(f"unknown custom kernel {key!r}")
        return CUSTOM_KERNELS[key](N)
    if name in ("gw", "gauss-weierstrass"):
        name = "gauss_weierstrass"
    if name not in BUILTIN_KERNELS:
        raise KeyError(f"unknown kernel {name!r}")
    return BUILTIN_KERNELS[name](N)


# ---------------------------------------------------------------- checks

def l1_norm(fam: KernelFamily, w: float, quad: Optional[LogDomainQuadrature] = None):
    quad = quad or fam.quadrature(w)
    return integrate_haar(fam.haar_integrand(w, absolute=True), quad)


def mass(fam: KernelFamily, w: float, quad: Optional[LogDomainQuadrature] = None):
    quad = quad or fam.quadrature(w)
    return integrate_haar(fam.haar_integrand(w), quad)


def region_quadrature(quad: LogDomainQuadrature, delta: float) -> LogDomainQuadrature:
    """Widen the box to twice the region boundary so that only genuine
    floating-point underflow, not truncation, can zero a far-region integral."""
    edge = 2.0 * max(-math.log1p(-delta), math.log1p(delta))
    if quad.half_width >= edge:
        return quad
    return LogDomainQuadrature(quad.dim, edge, quad.nodes_per_axis, quad.rule, quad.order,
                               quad.grading)


def far_mass(fam: KernelFamily, w: float, delta: float,
             quad: Optional[LogDomainQuadrature] = None) -> float:
    """Haar integral of |K_w| over |1 - t| > delta."""
    quad = region_quadrature(quad or fam.quadrature(w), delta)
    return integrate_haar_region(fam.haar_integrand(w, absolute=True), quad, "far", delta,
                                 estimate_errors=False).value


def near_log_moment(fam: KernelFamily, w: float, alpha: float, delta: float,
                    quad: Optional[LogDomainQuadrature] = None) -> float:
    """Haar integral of |K_w(t)| |log t|^alpha over |1 - t| <= delta."""
    quad = region_quadrature(quad or fam.quadrature(w), delta)
    F = fam.haar_integrand(w, weight=lambda U: _log_norm(U) ** alpha, absolute=True)
    return integrate_haar_region(F, quad, "near", delta, estimate_errors=False).value


def near_tau_integral(fam: KernelFamily, w: float, tau: Callable, delta: float,
                      quad: Optional[LogDomainQuadrature] = None) -> float:
    """Haar integral of |K_w(t)| tau(t) over |1 - t| <= delta, tau acting on t of shape (..., N)."""
    quad = region_quadrature(quad or fam.quadrature(w), delta)
    F = fam.haar_integrand(w, weight=lambda U: tau(np.exp(U)), absolute=True)
    return integrate_haar_region(F, quad, "near", delta, estimate_errors=False).value


@dataclass
class KernelAxiomReport:
    kernel: str
    dim: int
    l1_norms: dict
    normalization_defects: dict
    far_mass: dict
    bound_A: float
    k1_pass: bool
    k2_pass: bool
    k2_detail: dict

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel, "N": self.dim, "bound_A": self.bound_A,
            "l1_norms": {repr(w): v for w, v in self.l1_norms.items()},
            "normalization_defects": {repr(w): v for w, v in self.normalization_defects.items()},
            "far_mass": {f"{w!r},{d!r}": v for (w, d), v in self.far_mass.items()},
            "K1": self.k1_pass, "K2": self.k2_pass, "K2_detail": self.k2_detail,
        }


def check_axioms(fam: KernelFamily, w_list: Sequence[float],
                 delta_list: Sequence[float] = DEFAULT_DELTAS,
                 nodes_per_axis: int = 0, k1_tol: float = 1e-6) -> KernelAxiomReport:
    w_list = [float(w) for w in w_list]
    if not w_list or any(b <= a for a, b in zip(w_list, w_list[1:])):
        raise ValueError("w_list must be nonempty and increasing")
    if not all(0 < d < 1 for d in delta_list):
        raise ValueError("every delta must lie in (0, 1)")

    def one(w):
        quad = fam.quadrature(w, nodes_per_axis)
        l1 = l1_norm(fam, w, quad).value
        m = mass(fam, w, quad).value
        far = {d: far_mass(fam, w, d, quad) for d in delta_list}
        return l1, abs(m - 1.0), far

    rows = pmap(one, w_list)
    l1 = {w: r[0] for w, r in zip(w_list, rows)}
    defects = {w: r[1] for w, r in zip(w_list, rows)}
    far = {(w, d): r[2][d] for w, r in zip(w_list, rows) for d in delta_list}
    detail = {}
    for d in delta_list:
        seq = [far[(w, d)] for w in w_list]
        detail[repr(d)] = {
            "decreasing": decreasing_until_underflow(seq),
            "final": seq[-1],
            "pass": decreasing_until_underflow(seq) and seq[-1] < FAR_MASS_CEILING,
        }
    return KernelAxiomReport(
        fam.name, fam.dim, l1, defects, far, max(l1.values()),
        all(v < k1_tol for v in defects.values()),
        all(v["pass"] for v in detail.values()), detail,
    )


def absolute_moment(fam: KernelFamily, alpha: float,
                    quad: Optional[LogDomainQuadrature] = None) -> float:
    """m(K, alpha): Haar integral of |log t|^alpha |K(t)| for the Fejer profile K.

    Warns with ``SuspectedDivergence`` when doubling the box grows the value by
    more than 1%.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if fam.log_profile_fn is None:
        raise TypeError("absolute moments need a Fejer-structured family")
    quad = quad or LogDomainQuadrature(fam.dim, 40.0)

    def F(t):
        U = np.log(t)
        return _log_norm(U) ** alpha * np.abs(fam.log_profile(U))

    value = integrate_haar(F, quad, estimate_errors=False).value
    wide = integrate_haar(F, quad.widened(), estimate_errors=False).value
    if abs(wide - value) > 0.01 * abs(value):
        warnings.warn(f"m({fam.name}, {alpha}) grows from {value} to {wide} when R doubles",
                      SuspectedDivergence, stacklevel=2)
    return value


def _check_octaves(w_list):
    if max(w_list) / min(w_list) < 8:
        raise ValueError("w_list must span at least three octaves")


def check_alpha_singularity(fam: KernelFamily, alpha: float, w_list: Sequence[float],
                            delta_list: Sequence[float] = DEFAULT_DELTAS,
                            nodes_per_axis: int = 0) -> Dict[float, RateReport]:
    """Decay of far mass against w^-alpha, one report per delta."""
    w_list = [float(w) for w in w_list]
    _check_octaves(w_list)
    rows = pmap(lambda w: [far_mass(fam, w, d, fam.quadrature(w, nodes_per_axis))
                           for d in delta_list], w_list)
    return {d: decay_report(w_list, [r[i] for r in rows], alpha)
            for i, d in enumerate(delta_list)}


def check_near_moment_condition(fam: KernelFamily, alpha: float, w_list: Sequence[float],
                                delta_tilde: float = 0.5, nodes_per_axis: int = 0) -> RateReport:
    """Decay of the |log t|^alpha-weighted near-region integral against w^-alpha."""
    if not 0 < delta_tilde < 1:
        raise ValueError("delta_tilde must lie in (0, 1)")
    w_list = [float(w) for w in w_list]
    _check_octaves(w_list)
    vals = pmap(lambda w: near_log_moment(fam, w, alpha, delta_tilde,
                                          fam.quadrature(w, nodes_per_axis)), w_list)
    return decay_report(w_list, vals, alpha, allow_underflow=False)
