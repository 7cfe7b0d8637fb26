import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mellin_bv.errors import TooManyPoints
from mellin_bv.functions import TestFunction, get_function, lift
from mellin_bv.phi import make_phi
from mellin_bv.variation import (Box, BoxPartition, Partition1D, box_functional,
                                 brute_force_var1d, default_t_samples, modulus,
                                 section_functional, var1d, var1d_sup, var1d_sup_samples,
                                 var_box, var_global, var_upper)

POWER2 = make_phi("power", 2.0)
CLASSICAL = make_phi("classical")
values_14 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=14)


@given(values_14)
def test_sup_equals_brute_force(values):
    for phi in (POWER2, CLASSICAL):
        assert var1d_sup_samples(values, phi) == brute_force_var1d(values, phi)
    p15 = make_phi("power", 1.5)
    assert var1d_sup_samples(values, p15) == pytest.approx(
        brute_force_var1d(values, p15), rel=1e-12)


@given(values_14)
def test_custom_phi_dp_matches_power(values):
    cube = make_phi("custom", func=lambda u: u ** 3)
    assert var1d_sup_samples(values, cube) == pytest.approx(
        var1d_sup_samples(values, make_phi("power", 3.0)), rel=1e-12, abs=1e-300)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=40))
def test_classical_sup_is_total_variation(values):
    tv = float(np.sum(np.abs(np.diff(values))))
    assert var1d_sup_samples(values, CLASSICAL) == pytest.approx(tv, rel=1e-12, abs=1e-12)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=30), st.data())
def test_refinement_never_decreases_the_sup(values, data):
    keep = sorted(data.draw(st.sets(st.integers(0, len(values) - 1), min_size=2)))
    coarse = [values[i] for i in keep]
    assert var1d_sup_samples(coarse, POWER2) <= var1d_sup_samples(values, POWER2) + 1e-12


def test_brute_force_limit():
    with pytest.raises(TooManyPoints):
        brute_force_var1d(np.zeros(15), POWER2)


def test_var1d_on_a_partition():
    f = get_function("clamplog")
    part = Partition1D((0.5, 1.0, math.exp(0.5), math.e, 9.0))
    assert var1d(f, POWER2, part) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        Partition1D((1.0, 0.5))


@pytest.mark.parametrize("name", ["step1d", "logbump", "clamplog", "sinelog", "const"])
@pytest.mark.parametrize("phi", [POWER2, CLASSICAL], ids=["power2", "classical"])
def test_global_variation_matches_exact(name, phi):
    f = get_function(name)
    est = var_global(f, phi)
    assert est.lower_bound == pytest.approx(f.exact_variation(phi), abs=1e-8)
    assert est.lower_bound <= f.exact_variation(phi) + 1e-12


def test_lower_bound_of_wiener_variation_of_sine():
    # sin(log x) on [1, e^{2 pi}]: extrema 0, 1, -1, 0; the power-2 sup is 1 + 4 + 1
    est = var1d_sup(lambda x: np.sin(np.log(x)), POWER2, (1.0, math.exp(2 * math.pi)))
    assert est.lower_bound == pytest.approx(6.0, abs=1e-9)
    assert est.converged


@given(st.floats(0.05, 5.0))
def test_step_variation_is_phi_lambda(lam):
    est = var_global(get_function("step1d").scaled(lam), POWER2)
    assert est.lower_bound == pytest.approx(lam ** 2, rel=1e-12)


def test_jump_at_interval_end_is_closed():
    # [a, 1] contains the jump point, where the step already equals 1
    est = var1d_sup(get_function("step1d"), CLASSICAL, (0.5, 1.0))
    assert est.lower_bound == 1.0


def test_tonelli_sections_for_a_lifted_function():
    f = lift(get_function("clamplog"), 2, axis=0)
    box = Box((math.exp(-1), 1.0), (math.exp(2), math.exp(3)))
    assert section_functional(f, CLASSICAL, box, 0) == pytest.approx(3.0, rel=1e-12)
    assert section_functional(f, CLASSICAL, box, 1) == 0.0
    assert box_functional(f, CLASSICAL, box) == pytest.approx(3.0, rel=1e-12)


def test_tonelli_logbump_closed_form():
    # Phi_j = 2 int B(u)^p du, B = (1 - u^2)^2; int B = 16/15, int B^2 = 256/315
    f = get_function("logbump", 2)
    box = Box.symmetric(2, 2.0)
    for phi, integral in ((CLASSICAL, 16 / 15), (POWER2, 256 / 315)):
        for j in (0, 1):
            assert section_functional(f, phi, box, j) == pytest.approx(2 * integral, rel=1e-5)
    est = var_global(f, POWER2)
    assert est.lower_bound == pytest.approx(math.sqrt(2) * 2 * 256 / 315, rel=1e-5)
    assert est.breakdown == pytest.approx((2 * 256 / 315,) * 2, rel=1e-5)


def test_product_step_is_not_globally_bv():
    f = get_function("prodstep", 2)
    vals = [var_box(f, POWER2, Box.symmetric(2, M)).lower_bound for M in (1.0, 2.0, 4.0)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[1] / vals[0] == pytest.approx(2.0, rel=1e-6)


def test_history_is_monotone():
    est = var_box(get_function("logbump", 2), POWER2, Box.symmetric(2, 1.5))
    assert all(b >= a for a, b in zip(est.history, est.history[1:]))
    est1 = var1d_sup(get_function("sinelog"), POWER2, (0.01, 100.0))
    assert all(b >= a for a, b in zip(est1.history, est1.history[1:]))


def test_box_partition_tiles_the_box():
    box = Box((1.0, 1.0), (4.0, 9.0))
    parts = BoxPartition(box, ((2.0,), (3.0, 5.0))).boxes()
    assert len(parts) == 6
    assert sum(p.haar_measure() for p in parts) == pytest.approx(box.haar_measure())
    with pytest.raises(ValueError):
        BoxPartition(box, ((5.0,), ()))
    with pytest.raises(ValueError):
        Box((2.0,), (1.0,))


def test_upper_estimate_brackets_lower_bound():
    for f in (get_function("sinelog"), get_function("logbump")):
        lo = var_global(f, CLASSICAL).lower_bound
        hi = var_upper(f, CLASSICAL)
        assert lo <= hi + 1e-12
        assert hi == pytest.approx(f.exact_variation(CLASSICAL), rel=1e-9)


def test_modulus_of_step_and_clamplog():
    step = get_function("step1d")
    for d in (0.5, 0.01):
        assert modulus(step.scaled(0.5), POWER2, d) == pytest.approx(2 * 0.25)
    clamp = get_function("clamplog")
    # sup over t of V[clamp(u + log t) - clamp(u)] = 2 |log t| for |log t| <= 1
    assert modulus(clamp, CLASSICAL, 0.01) == pytest.approx(-2 * math.log(0.99), rel=1e-9)


def test_modulus_samples_validation():
    assert len(default_t_samples(2, 0.1)) == 3 * (4 + 4)
    with pytest.raises(ValueError):
        default_t_samples(1, 1.0)
    with pytest.raises(ValueError):
        modulus(get_function("clamplog"), POWER2, 0.1, t_samples=[1.5])


def test_variation_accepts_plain_callables():
    g = TestFunction("ramp", 1, lambda x: np.minimum(x[..., 0], 2.0))
    assert var1d_sup(g, CLASSICAL, (1.0, 3.0)).lower_bound == pytest.approx(1.0)
