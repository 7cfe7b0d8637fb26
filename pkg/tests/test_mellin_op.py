import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from mellin_bv.errors import NonFiniteIntegrand
from mellin_bv.functions import TestFunction, get_function, translate
from mellin_bv.kernels import get_kernel
from mellin_bv.mellin_op import (OperatorEvaluation, apply, apply_many, apply_on_grid,
                                 default_s_grid, operator_image)

KERNELS = ("gauss_weierstrass", "picard", "moment")


def _oracle(kernel, w, f, s):
    # direct adaptive quadrature in u = log t, split at the kink / jump locations
    g = lambda u: float(kernel.eval(w, np.array([[math.exp(u)]]))[0]) * f(s * math.exp(u))
    pts = sorted({0.0, -math.log(s), 1.0 - math.log(s)})
    edges = [-40.0 / w] + [p for p in pts if abs(p) < 40.0 / w] + [40.0 / w]
    return sum(integrate.quad(g, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
               for a, b in zip(edges, edges[1:]))


@pytest.mark.parametrize("kname", KERNELS)
@pytest.mark.parametrize("w", [2.0, 10.0])
def test_clamplog_against_adaptive_oracle(kname, w):
    f, kernel = get_function("clamplog"), get_kernel(kname, 1)
    s = np.array([0.7, 1.0, 1.3, 2.2, 3.5])
    got = apply_many(OperatorEvaluation(w, kernel, f), s[:, None])
    want = [_oracle(kernel, w, f, x) for x in s]
    np.testing.assert_allclose(got, want, atol=1e-9)


@pytest.mark.parametrize("kname", KERNELS)
def test_constants_are_reproduced(kname):
    for N in (1, 2):
        op = OperatorEvaluation(5.0, get_kernel(kname, N), get_function("const", N))
        S = np.exp(np.random.default_rng(N).normal(size=(7, N)))
        np.testing.assert_allclose(apply_many(op, S), 1.0, atol=1e-8)


@given(st.floats(0.25, 4.0), st.floats(0.3, 3.0))
def test_commutes_with_homothety(t, s):
    # T_w(tau_t f)(s) = (T_w f)(s t)
    f, kernel = get_function("step1d"), get_kernel("gauss_weierstrass", 1)
    lhs = apply(OperatorEvaluation(8.0, kernel, translate(f, t)), s)
    rhs = apply(OperatorEvaluation(8.0, kernel, f), s * t)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_separable_gw_in_two_dimensions():
    w = 6.0
    one = OperatorEvaluation(w, get_kernel("gauss_weierstrass", 1), get_function("logbump", 1))
    two = OperatorEvaluation(w, get_kernel("gauss_weierstrass", 2), get_function("logbump", 2))
    S = np.exp(np.array([[0.0, 0.0], [0.3, -0.5], [-0.9, 0.8]]))
    prod = apply_many(one, S[:, :1]) * apply_many(one, S[:, 1:])
    np.testing.assert_allclose(apply_many(two, S), prod, atol=1e-9)


def test_kinks_split_in_two_dimensions():
    # points near the bump's support edge exercise the per-point breakpoint path
    w = 3.0
    one = OperatorEvaluation(w, get_kernel("moment", 1), get_function("logbump", 1))
    two = OperatorEvaluation(w, get_kernel("moment", 2), get_function("logbump", 2))
    S = np.exp(np.array([[0.95, 0.2], [-1.02, 1.0], [3.0, 0.0], [0.5, 5.0]]))
    prod = apply_many(one, S[:, :1]) * apply_many(one, S[:, 1:])
    np.testing.assert_allclose(apply_many(two, S), prod, atol=1e-9)


def test_prodstep_is_product_of_erfc_forms():
    w = 4.0
    op = OperatorEvaluation(w, get_kernel("gauss_weierstrass", 2), get_function("prodstep", 2))
    S = np.array([[1.0, 1.0], [1.2, 0.9], [0.7, 2.0]])
    want = np.prod(0.5 * np.vectorize(math.erfc)(-w * np.log(S)), axis=1)
    np.testing.assert_allclose(apply_many(op, S), want, atol=1e-10)


def test_grid_and_image_helpers():
    op = OperatorEvaluation(4.0, get_kernel("picard", 1), get_function("logbump"))
    assert apply_on_grid(op).shape == (257,)
    assert apply_on_grid(op, [np.array([1.3])])[0] == pytest.approx(apply(op, 1.3), abs=1e-15)
    assert default_s_grid(2, 5, 1.0)[1][0] == pytest.approx(math.exp(-1.0))
    img = operator_image(get_kernel("picard", 1), 4.0, get_function("logbump"))
    assert img(1.3) == pytest.approx(apply(op, 1.3), abs=1e-14)


def test_validation_errors():
    with pytest.raises(ValueError):
        OperatorEvaluation(0.0, get_kernel("picard", 1), get_function("logbump"))
    with pytest.raises(ValueError):
        OperatorEvaluation(1.0, get_kernel("picard", 2), get_function("logbump"))
    bad = TestFunction("nan", 1, lambda x: np.full(x.shape[:-1], np.nan))
    with pytest.raises(NonFiniteIntegrand):
        apply(OperatorEvaluation(2.0, get_kernel("picard", 1), bad), 1.0)
