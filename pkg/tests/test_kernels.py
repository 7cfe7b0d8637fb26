import math
import warnings

import numpy as np
import pytest

from mellin_bv.errors import SuspectedDivergence, UnknownDimension
from mellin_bv.kernels import (KernelFamily, absolute_moment, check_alpha_singularity,
                               check_axioms, check_near_moment_condition, far_mass, get_kernel,
                               l1_norm, mass, near_tau_integral, picard_constant,
                               register_custom_kernel)

LADDER = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_picard_constant_closed_form(N):
    # 1 / int_{R^N} e^{-|u|} du, with the sphere area 2 pi^{N/2} / Gamma(N/2)
    assert picard_constant(N) == pytest.approx(
        math.gamma(N / 2) / (2 * math.pi ** (N / 2) * math.gamma(N)), rel=1e-14)


@pytest.mark.parametrize("name", ["gauss_weierstrass", "picard", "moment"])
@pytest.mark.parametrize("w", [1.0, 3.0, 40.0])
def test_unit_mass_and_nonnegative(name, w):
    fam = get_kernel(name, 1)
    assert mass(fam, w).value == pytest.approx(1.0, abs=1e-9)
    assert l1_norm(fam, w).value == pytest.approx(1.0, abs=1e-9)
    t = np.exp(np.linspace(-3, 3, 101))[:, None]
    assert np.all(fam.eval(w, t) >= 0)


def test_fejer_scaling_identity():
    fam = get_kernel("picard", 2)
    t = np.exp(np.random.default_rng(0).normal(size=(20, 2)))
    w = 3.5
    np.testing.assert_allclose(fam.eval(w, t), w ** 2 * fam.profile(t ** w), rtol=1e-13)
    assert fam.scale(w) == pytest.approx(1 / w)


def test_gw_far_mass_matches_erfc():
    # far region {|1 - t| > d}: u < log(1 - d) or u > log(1 + d), u ~ N(0, 1 / (2 w^2))
    fam = get_kernel("gauss_weierstrass", 1)
    w, d = 4.0, 0.25
    exact = 0.5 * (math.erfc(-w * math.log(1 - d)) + math.erfc(w * math.log(1 + d)))
    assert far_mass(fam, w, d) == pytest.approx(exact, rel=1e-8)


def test_moment_kernel_far_mass_closed_form():
    # support t in (0, 1]: far part is t < 1 - d, mass (1 - d)^w
    fam = get_kernel("moment", 1)
    for w in (1.0, 5.0, 20.0):
        assert far_mass(fam, w, 0.5) == pytest.approx(0.5 ** w, rel=1e-9)


def test_axioms_report_pass_for_builtins():
    rep = check_axioms(get_kernel("moment", 1), LADDER)
    assert rep.k1_pass and rep.k2_pass
    assert rep.bound_A == pytest.approx(1.0, abs=1e-9)
    assert set(rep.to_dict()) >= {"K1", "K2", "bound_A"}


def test_flat_kernel_fails_concentration():
    rep = check_axioms(get_kernel("custom:flat", 1), LADDER)
    assert rep.k1_pass and not rep.k2_pass


def test_w_list_must_increase():
    with pytest.raises(ValueError):
        check_axioms(get_kernel("picard", 1), (4.0, 2.0))


def test_absolute_moments_closed_form():
    # m(P, a) = Gamma(a + 1); m(G, a) = Gamma((a + 1) / 2) / sqrt(pi)
    assert absolute_moment(get_kernel("picard", 1), 2.0) == pytest.approx(2.0, rel=1e-9)
    assert absolute_moment(get_kernel("gauss_weierstrass", 1), 1.0) == pytest.approx(
        1 / math.sqrt(math.pi), rel=1e-9)


def test_divergence_detector_fires():
    def heavy(N):
        log_profile = lambda U: 1.0 / (math.pi * (1.0 + U[..., 0] ** 2))
        return KernelFamily("custom:cauchy", N, lambda w, U: w * log_profile(w * U), "fejer",
                            log_profile)

    register_custom_kernel("custom:cauchy", heavy)
    with pytest.warns(SuspectedDivergence):
        absolute_moment(get_kernel("custom:cauchy", 1), 1.0)


@pytest.mark.parametrize("name", ["gauss_weierstrass", "picard", "moment"])
def test_alpha_singularity_and_near_condition(name):
    fam = get_kernel(name, 1)
    for rep in check_alpha_singularity(fam, 1.0, LADDER).values():
        assert rep.passed
    assert check_near_moment_condition(fam, 1.0, LADDER).passed


def test_singularity_needs_three_octaves():
    with pytest.raises(ValueError):
        check_alpha_singularity(get_kernel("picard", 1), 1.0, (2.0, 4.0, 8.0 - 1e-9))


def test_near_tau_integral_reduces_to_log_moment():
    # tau = |log t|: moment kernel near integral (1 - c^w) / w + c^w log c with c = 1/2
    fam = get_kernel("moment", 1)
    w = 6.0
    got = near_tau_integral(fam, w, lambda t: np.abs(np.log(t[..., 0])), 0.5)
    assert got == pytest.approx((1 - 0.5 ** w) / w + 0.5 ** w * math.log(0.5), rel=1e-9)


def test_registry_errors():
    with pytest.raises(KeyError):
        get_kernel("nope", 1)
    with pytest.raises(UnknownDimension):
        get_kernel("picard", 4)
