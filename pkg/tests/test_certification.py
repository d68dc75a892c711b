import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unlearnkit import (CertificationBudget, CertificationError,
                        LipschitzConstants, LogisticModel, LossConfig,
                        MlpModel, ReplaceFeatures, ReplaceLabels,
                        build_perturbations, certify, effective_epsilon,
                        exp_noise_rate, first_order_update, gradient_residual,
                        logreg_lipschitz_constants, noise_scale_for_budget,
                        residual_bound_first, residual_bound_second,
                        second_order_update_exact, synth_blobs)

CONSTS = LipschitzConstants(gamma=0.25, gamma_z=1.5, gamma_dd=0.1, family="test")


def test_logreg_constants_frozen_values(fitted_logreg, small_binary):
    model, params, _ = fitted_logreg
    consts = logreg_lipschitz_constants(model, small_binary, params)
    assert consts.gamma == 0.25
    # 1/(6 sqrt 3), the peak of the third sigmoid derivative
    assert consts.gamma_dd == pytest.approx(0.09622504486493763, rel=1e-15)
    assert consts.gamma_z == pytest.approx(
        1.0 + np.linalg.norm(params.theta) / 4.0, rel=1e-15)


def test_constants_reject_intercept_and_large_norms(small_binary, fitted_logreg):
    _, params, _ = fitted_logreg
    with_b = LogisticModel(small_binary.dim, intercept=True)
    with pytest.raises(CertificationError, match="intercept"):
        logreg_lipschitz_constants(with_b, small_binary, params)
    plain = LogisticModel(small_binary.dim)
    inflated = small_binary.replace(x=small_binary.x * 3.0)
    with pytest.raises(CertificationError, match="rescale"):
        logreg_lipschitz_constants(plain, inflated, params)


def test_first_order_bound_formula():
    # (1 + tau (gamma n + lam)) * gamma_z * M * |Z|
    got = residual_bound_first(CONSTS, tau=0.01, n=100, magnitude=0.2,
                               zcount=5, lam=2.0)
    assert got == pytest.approx((1 + 0.01 * (0.25 * 100 + 2.0)) * 1.5 * 0.2 * 5)
    # default lam drops the regularizer from the factor
    plain = residual_bound_first(CONSTS, tau=0.01, n=100, magnitude=0.2, zcount=5)
    assert plain == pytest.approx((1 + 0.01 * 25.0) * 1.5 * 0.2 * 5)
    assert plain < got


def test_second_order_bound_formula():
    got = residual_bound_second(CONSTS, lam=2.0, magnitude=0.2, zcount=5)
    assert got == pytest.approx(1.5 ** 2 * 0.1 * 0.04 * 25 / 4.0)
    with pytest.raises(CertificationError, match="lam"):
        residual_bound_second(CONSTS, lam=0.0, magnitude=0.2, zcount=5)


@given(st.floats(1e-3, 10), st.floats(1e-6, 0.5), st.floats(0, 10))
@settings(max_examples=50, deadline=None)
def test_noise_scale_and_effective_epsilon_are_inverse(eps, delta, beta):
    sigma = noise_scale_for_budget(eps, delta, beta)
    if sigma > 0:
        assert effective_epsilon(sigma, delta, beta) == pytest.approx(eps, rel=1e-9)


def test_budget_constant_frozen_value():
    # c = sqrt(2 ln(1.5 / 0.02))
    budget = CertificationBudget(epsilon=0.1, delta=0.02, sigma=1.0)
    assert budget.c == pytest.approx(2.9385330059525656, rel=1e-15)
    assert budget.beta == pytest.approx(0.1 / 2.9385330059525656, rel=1e-12)


def test_noise_scale_frozen_examples():
    c = 2.9385330059525656
    assert noise_scale_for_budget(0.1, 0.02, 0.01) == pytest.approx(0.01 * c / 0.1)
    assert noise_scale_for_budget(0.1, 0.02, 0.1) == pytest.approx(0.1 * c / 0.1)


def test_for_target_beta_roundtrip():
    budget = CertificationBudget.for_target_beta(0.5, 0.05, beta=0.02)
    assert budget.beta == pytest.approx(0.02, rel=1e-12)


def test_exp_noise_rate():
    assert exp_noise_rate(0.4, 0.1) == pytest.approx(4.0)
    with pytest.raises(CertificationError):
        exp_noise_rate(0.0, 0.1)


def test_budget_validation():
    with pytest.raises(CertificationError, match="epsilon"):
        CertificationBudget(epsilon=0.0, delta=0.1, sigma=1.0)
    with pytest.raises(CertificationError, match="delta"):
        CertificationBudget(epsilon=1.0, delta=1.5, sigma=1.0)
    with pytest.raises(CertificationError, match="sigma"):
        CertificationBudget(epsilon=1.0, delta=0.1, sigma=-1.0)


def test_gradient_residual_zero_at_optimum(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    g, rnorm = gradient_residual(model, params, small_binary, lcfg)
    assert rnorm <= 1e-11
    assert g.shape == (model.param_count,)


def test_certify_residual_within_measured_bounds(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    pset = build_perturbations(
        small_binary,
        ReplaceFeatures(points=(0, 5, 9), features=(1, 2), values=0.0))
    corrected = pset.apply(small_binary)
    res = second_order_update_exact(model, params, pset, corrected, lcfg)
    budget = CertificationBudget(epsilon=1.0, delta=0.02, sigma=0.1)
    report = certify(model, res.new_params, corrected, budget, lcfg,
                     pset=pset, method="second")
    assert report.bound_second is not None
    assert report.residual_norm <= report.bound_second
    assert report.effective_epsilon == pytest.approx(
        report.residual_norm * budget.c / budget.sigma)
    assert report.method == "second"
    first = first_order_update(model, params, pset, tau=0.01)
    report1 = certify(model, first.new_params, corrected, budget, lcfg,
                      pset=pset, tau=0.01, method="first")
    assert report1.bound_first is not None
    assert report1.residual_norm <= report1.bound_first


def test_certify_label_only_has_no_magnitude_bounds(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    pset = build_perturbations(
        small_binary, ReplaceLabels(points=(0,), labels=(int(-small_binary.y[0]),)))
    budget = CertificationBudget(epsilon=1.0, delta=0.02, sigma=0.1)
    report = certify(model, params, pset.apply(small_binary), budget, lcfg,
                     pset=pset, tau=0.01)
    assert report.bound_first is None and report.bound_second is None
    assert any("label-only" in note for note in report.notes)


def test_certify_zero_noise_is_vacuous(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    budget = CertificationBudget(epsilon=1.0, delta=0.02, sigma=0.0)
    report = certify(model, params, small_binary, budget, lcfg)
    assert not report.certified
    assert math.isinf(report.effective_epsilon)
    assert report.to_json()["effective_epsilon"] is None


def test_certify_never_certifies_nonconvex():
    ds = synth_blobs(30, 4, 3, 4.0, seed=2)
    model = MlpModel(ds.dim, 4, 3)
    params = model.init_params(0)
    budget = CertificationBudget(epsilon=10.0, delta=0.1, sigma=100.0)
    report = certify(model, params, ds, budget, LossConfig(lam=0.1))
    assert not report.certified
    assert any("non-convex" in note for note in report.notes)


def test_sequential_steps_scale_the_bounds(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    pset = build_perturbations(
        small_binary,
        ReplaceFeatures(points=(0, 5), features=(1,), values=0.0))
    corrected = pset.apply(small_binary)
    budget = CertificationBudget(epsilon=1.0, delta=0.02, sigma=0.1)
    one = certify(model, params, corrected, budget, lcfg, pset=pset, tau=0.01)
    five = certify(model, params, corrected, budget, lcfg, pset=pset, tau=0.01,
                   t_steps=5)
    assert five.bound_first == pytest.approx(5 * one.bound_first)
    assert five.bound_second == pytest.approx(5 * one.bound_second)
    with pytest.raises(CertificationError, match="t_steps"):
        certify(model, params, corrected, budget, lcfg, t_steps=0)


def test_report_json_is_serializable(fitted_logreg, small_binary):
    import json
    model, params, lcfg = fitted_logreg
    budget = CertificationBudget(epsilon=1.0, delta=0.02, sigma=0.5)
    report = certify(model, params, small_binary, budget, lcfg)
    blob = json.dumps(report.to_json())
    assert "residual_norm" in blob
