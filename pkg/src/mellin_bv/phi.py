"""Variation-generating functions phi and the scaling-constant search grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

CLASSICAL_FLAG = "not in Phi: u^-1 phi(u) == 1"


@dataclass(frozen=True)
class PhiFunction:
    """A convex phi with phi(0) = 0, evaluated elementwise.

    ``kind`` is ``"power"`` (u**p, p > 1), ``"classical"`` (u) or ``"custom"``.
    """

    name: str
    kind: str
    p: Optional[float] = None
    func: Optional[Callable] = field(default=None, compare=False)
    flags: tuple = ()

    def eval(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "classical":
            out = u.copy()
        elif self.kind == "power":
            out = u * u if self.p == 2.0 else u ** self.p
        else:
            out = np.asarray(self.func(u), dtype=float)
        return out if out.ndim else float(out)

    __call__ = eval

    @property
    def exponent(self) -> Optional[float]:
        """The power p for the jit kernels, or None for custom phi."""
        if self.kind == "classical":
            return 1.0
        if self.kind == "power":
            return float(self.p)
        return None

    @property
    def convex_by_construction(self) -> bool:
        return self.kind in ("classical", "power")

    def describe(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.kind == "power":
            d["p"] = self.p
        if self.flags:
            d["flags"] = list(self.flags)
        return d


def make_phi(kind: str, parameter: Optional[float] = None, *,
             func: Optional[Callable] = None, name: Optional[str] = None) -> PhiFunction:
    if kind == "power":
        if parameter is None:
            raise ValueError("power phi needs an exponent p")
        p = float(parameter)
        if not p > 1.0:
            raise ValueError(f"power phi requires p > 1, got {p}")
        return PhiFunction(name or f"power:{p:g}", "power", p=p)
    if kind == "classical":
        return PhiFunction(name or "classical", "classical", p=1.0, flags=(CLASSICAL_FLAG,))
    if kind == "custom":
        if func is None:
            raise ValueError("custom phi needs a callable")
        return PhiFunction(name or getattr(func, "__name__", "custom"), "custom", func=func)
    raise ValueError(f"unknown phi kind {kind!r}")


def parse_phi(spec) -> PhiFunction:
    """Build a phi from ``"power:2"``, ``"classical"`` or a config mapping."""
    if isinstance(spec, PhiFunction):
        return spec
    if isinstance(spec, dict):
        kind = spec.get("kind")
        return make_phi(kind, spec.get("p"))
    text = str(spec).strip()
    if text in ("classical", "identity"):
        return make_phi("classical")
    if text.startswith("power"):
        _, _, p = text.partition(":")
        return make_phi("power", float(p) if p else 2.0)
    raise ValueError(f"cannot parse phi spec {spec!r}")


@dataclass
class AxiomCheck:
    axiom: str
    passed: bool
    witness: Optional[tuple] = None
    note: str = ""


@dataclass
class ValidationReport:
    phi: str
    checks: list
    exempt: tuple = ()

    def __getitem__(self, axiom):
        for c in self.checks:
            if c.axiom == axiom:
                return c
        raise KeyError(axiom)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def default_grid(n: int = 64) -> np.ndarray:
    return np.logspace(-6, 3, n)


def validate_phi(phi: PhiFunction, grid: Optional[Sequence[float]] = None,
                 rtol: float = 1e-10) -> ValidationReport:
    """Check the Phi axioms numerically.  Never raises; failures carry a witness."""
    pts = default_grid() if grid is None else np.asarray(grid, dtype=float)
    checks = []

    f0 = float(phi.eval(0.0))
    checks.append(AxiomCheck("zero", f0 == 0.0, None if f0 == 0.0 else (0.0, f0)))

    vals = np.asarray(phi.eval(pts), dtype=float)
    bad = np.flatnonzero(~(vals > 0))
    checks.append(AxiomCheck("positive", bad.size == 0,
                             None if bad.size == 0 else (float(pts[bad[0]]), float(vals[bad[0]]))))

    # convexity on all pairs of {0} U grid, at three interior weights
    cpts = np.concatenate(([0.0], pts))
    u, v = np.meshgrid(cpts, cpts, indexing="ij")
    witness = None
    for theta in (0.25, 0.5, 0.75):
        mid = theta * u + (1 - theta) * v
        lhs = np.asarray(phi.eval(mid))
        rhs = theta * np.asarray(phi.eval(u)) + (1 - theta) * np.asarray(phi.eval(v))
        viol = lhs > rhs + rtol * np.maximum(np.abs(rhs), 1.0)
        if viol.any():
            i, j = np.argwhere(viol)[0]
            witness = (float(u[i, j]), float(v[i, j]), theta)
            break
    checks.append(AxiomCheck("convex", witness is None, witness))

    small = 10.0 ** -np.arange(1, 9)
    ratio = np.asarray(phi.eval(small)) / small
    nonincr = bool(np.all(np.diff(ratio) <= rtol * np.abs(ratio[:-1])))
    decays = nonincr and ratio[-1] < ratio[0]
    note = ""
    exempt = ()
    if phi.kind == "classical":
        note = "classical phi is admitted by exemption"
        exempt = ("decay",)
    checks.append(AxiomCheck("decay", decays,
                             None if decays else (float(small[-1]), float(ratio[-1])), note))
    return ValidationReport(phi.name, checks, exempt)


@dataclass(frozen=True)
class ScalingConstant:
    value: float
    role: str

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("scaling constants are positive")
        if self.role not in ("lambda", "mu", "zeta"):
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly decreasing positive candidates for an existential constant."""

    values: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size == 0 or np.any(v <= 0) or np.any(np.diff(v) >= 0):
            raise ValueError("LambdaGrid must be nonempty, positive, strictly decreasing")

    @classmethod
    def geometric(cls, kmax: int = 20, base: float = 2.0, kmin: int = 0) -> "LambdaGrid":
        return cls(tuple(float(base) ** -k for k in range(kmin, kmax + 1)))

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def search(self, predicate) -> Optional[float]:
        """Largest grid value satisfying ``predicate``, or None."""
        for lam in self.values:
            if predicate(lam):
                return lam
        return None
