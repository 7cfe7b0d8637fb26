import dataclasses
import math

import numpy as np
import pytest

from mellin_bv.errors import IncompleteTable, PreconditionNotCertified
from mellin_bv.experiments import (ConvergenceRun, GeneralizedRateSpec, certify_generalized,
                                   certify_kernel, check_error_bound, check_non_augmenting,
                                   error_table, gw_step_image, log_power_tau, modulus_profile,
                                   run_convergence, run_counterexample, run_rate,
                                   run_rate_generalized)
from mellin_bv.functions import get_function
from mellin_bv.kernels import get_kernel
from mellin_bv.phi import LambdaGrid, make_phi

POWER2 = make_phi("power", 2.0)
CLASSICAL = make_phi("classical")
LADDER = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)


@pytest.mark.parametrize("w", [3.0, 10.0, 50.0])
def test_moment_kernel_error_closed_form(w):
    # clamplog under the moment kernel, x = log s: T_w f - f = -(1 - e^{-wx}) / w on [0, 1],
    # then relaxes monotonically to 0; two monotone pieces of height h = (1 - e^{-w}) / w
    f, k = get_function("clamplog"), get_kernel("moment", 1)
    h = (1.0 - math.exp(-w)) / w
    E1 = error_table(f, k, CLASSICAL, (w,), [1.0, 0.5])
    assert E1[(1.0, w)] == pytest.approx(2 * h, rel=1e-8)
    assert E1[(0.5, w)] == pytest.approx(h, rel=1e-8)
    E2 = error_table(f, k, POWER2, (w,), [1.0])
    assert E2[(1.0, w)] == pytest.approx(2 * h * h, rel=1e-8)


def test_box_truncation_only_lowers_the_estimate():
    # w = 1: beyond s = e^8 the error still has height about h e^{-7}
    f, k = get_function("clamplog"), get_kernel("moment", 1)
    h = 1.0 - math.exp(-1.0)
    got = error_table(f, k, CLASSICAL, (1.0,), [1.0])[(1.0, 1.0)]
    assert 2 * h - 2 * h * math.exp(-7.0) <= got <= 2 * h


def test_gw_step_image_is_erfc():
    img = gw_step_image(4.0)
    assert img(1.0) == 0.5
    assert img(math.exp(0.25)) == pytest.approx(0.5 * math.erfc(-1.0))


def test_error_table_rejects_non_finite():
    from mellin_bv.functions import TestFunction
    blow = TestFunction("blow", 1, lambda x: 1.0 / np.abs(np.log(x[..., 0])) ** 0.5)
    with pytest.raises(IncompleteTable, match="NonFiniteIntegrand"), np.errstate(divide="ignore"):
        error_table(blow, get_kernel("picard", 1), POWER2, (2.0,), [1.0])


def test_convergence_success_and_mode():
    run = ConvergenceRun(get_function("clamplog"), get_kernel("picard", 1), POWER2, LADDER)
    assert run.mode == "convergence"
    rep = run_convergence(run)
    assert rep.passed and rep.verdict == "SUCCESS"
    E = rep.summary["E_witness"]
    assert E[-1] < 0.1 * E[0] and E[-1] < 1e-2
    assert {r["lower_or_upper_flag"] for r in rep.rows} == {"lower"}


def test_convergence_fails_for_the_step():
    run = ConvergenceRun(get_function("step1d"), get_kernel("gauss_weierstrass", 1), POWER2,
                         (2.0, 8.0, 32.0, 128.0), LambdaGrid.geometric(4))
    assert run.mode == "counterexample mode"
    rep = run_convergence(run)
    assert not rep.passed and rep.summary["witness_mu"] is None


def test_counterexample_persists():
    rep = run_counterexample((1.0,), POWER2, (2.0, 16.0, 128.0))
    c = rep.summary["checks"]["1.0"]
    assert rep.verdict == "PERSISTS"
    assert c["min_lower_bound"] >= 0.9 * 0.25
    assert c["unit_interval_estimate"] == pytest.approx(0.25, rel=1e-6)


def test_rate_requires_certificate():
    f, k = get_function("clamplog"), get_kernel("moment", 1)
    with pytest.raises(PreconditionNotCertified):
        run_rate(f, k, CLASSICAL, 1.0, None, LADDER)
    cert = certify_kernel(get_kernel("picard", 1), 1.0, LADDER)
    with pytest.raises(PreconditionNotCertified):
        run_rate(f, k, CLASSICAL, 1.0, cert, LADDER)
    weak = certify_kernel(k, 0.5, LADDER)
    with pytest.raises(PreconditionNotCertified):
        run_rate(f, k, CLASSICAL, 1.0, weak, LADDER)


def test_rate_slope_and_trivial_case():
    k = get_kernel("moment", 1)
    cert = certify_kernel(k, 1.0, LADDER)
    rep = run_rate(get_function("clamplog"), k, CLASSICAL, 1.0, cert, LADDER)
    assert rep.passed and rep.slope == pytest.approx(-1.0, abs=0.01)
    triv = run_rate(get_function("const"), k, POWER2, 1.0, cert, LADDER)
    assert triv.passed and "trivial" in triv.note
    rough = dataclasses.replace(get_function("clamplog"), lip_alpha=0.5)
    with pytest.raises(PreconditionNotCertified, match="Lipschitz"):
        run_rate(rough, k, POWER2, 1.0, cert, LADDER)


def test_generalized_rate_reduces_to_alpha_one():
    k = get_kernel("picard", 1)
    spec = GeneralizedRateSpec(log_power_tau(1.0), lambda w: 1.0 / w, "log1")
    cert = certify_generalized(k, spec, LADDER)
    assert cert.passed and cert.informative
    rep = run_rate_generalized(get_function("clamplog"), k, spec, CLASSICAL, cert, LADDER)
    assert rep.passed and rep.target_alpha == pytest.approx(1.0)


LOG2 = GeneralizedRateSpec(log_power_tau(2.0), lambda w: w ** -2.0, "log2")
LATE = (8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0)


@pytest.mark.parametrize("name, second_moment", [("gauss_weierstrass", 0.5), ("picard", 2.0)])
def test_log2_near_integral_is_second_moment(name, second_moment):
    # for w large the truncation at |log t| <= 1/2 is invisible: int u^2 K_w = c / w^2
    cert = certify_generalized(get_kernel(name, 1), LOG2, LATE)
    w_top, val = LATE[-1], cert.near["values"][-1]
    assert val * w_top ** 2 == pytest.approx(second_moment, rel=1e-6)


def test_log2_rate_measured_outcomes():
    # E w^2 = 4.1, 5.9, 7.4, ..., 9.7 climbs towards ~10 on the default ladder, so the
    # first-half constant is too small; starting the ladder at w = 8 clears the transient
    f, k = get_function("logbump"), get_kernel("gauss_weierstrass", 1)
    rep = run_rate_generalized(f, k, LOG2, CLASSICAL, certify_generalized(k, LOG2, LADDER),
                               LADDER)
    assert not rep.passed and rep.slope == pytest.approx(-1.93, abs=0.01)
    late = run_rate_generalized(f, k, LOG2, CLASSICAL, certify_generalized(k, LOG2, LATE), LATE)
    assert late.passed
    picard = get_kernel("picard", 1)
    assert not certify_generalized(picard, LOG2, LADDER).passed
    assert certify_generalized(picard, LOG2, LATE).passed


def test_generalized_flags_non_informative_xi():
    k = get_kernel("picard", 1)
    spec = GeneralizedRateSpec(log_power_tau(1.0), lambda w: 1.0, "flat")
    cert = certify_generalized(k, spec, LADDER)
    rep = run_rate_generalized(get_function("clamplog"), k, spec, CLASSICAL, cert, LADDER)
    assert "non-informative" in rep.note


def test_generalized_spec_validation():
    with pytest.raises(ValueError):
        GeneralizedRateSpec(lambda t: np.ones(np.shape(t)[:-1]), lambda w: 1 / w).validate(1, LADDER)
    with pytest.raises(ValueError):
        GeneralizedRateSpec(log_power_tau(1.0), lambda w: w).validate(1, LADDER)


def test_inequality_checks_single_cases():
    f = get_function("sinelog")
    assert check_non_augmenting(f, get_kernel("picard", 1), (2.0, 16.0)).passed
    rep = check_error_bound(f, get_kernel("gauss_weierstrass", 1), POWER2)
    assert rep.passed and len(rep.summary["cells"]) == 27


def test_modulus_profile_vanishes_for_clamplog():
    prof = modulus_profile(get_function("clamplog"), POWER2, (0.5, 1e-3), (1.0,))
    big, small = prof[1.0]
    assert small < 0.05 * big
