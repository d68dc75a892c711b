import numpy as np
import pytest

from unlearnkit import (ConvergenceError, DivergenceError, LissaConfig,
                        LogisticModel, LossConfig, PerturbationError,
                        ReplaceFeatures, ReplaceLabels, RidgeModel,
                        TrainConfig, build_perturbations,
                        default_unlearning_rate, first_order_update,
                        gradient_difference, hessian_norm_estimate,
                        lissa_inverse_hvp, revoke_and_shrink,
                        second_order_update_exact, second_order_update_lissa,
                        sequential_unlearn, train_convex)
from unlearnkit.data import Dataset

from conftest import make_dataset


def flip_pset(ds, points=(0, 3, 7)):
    flipped = tuple(int(-ds.y[i]) for i in points)
    return build_perturbations(ds, ReplaceLabels(points=points, labels=flipped))


def test_gradient_difference_equals_corrected_gradient(fitted_logreg, small_binary):
    # at the optimum of D the full-objective gradient on D' collapses to G
    model, params, lcfg = fitted_logreg
    pset = flip_pset(small_binary)
    corrected = pset.apply(small_binary)
    g = gradient_difference(model, params, pset)
    full = model.grad(params.theta, corrected, lcfg)
    np.testing.assert_allclose(g, full, atol=1e-9)


def test_gradient_difference_cost_is_two_z(fitted_logreg, small_binary):
    model, params, _ = fitted_logreg
    pset = flip_pset(small_binary)
    model.counter.reset()
    gradient_difference(model, params, pset)
    assert model.counter.snapshot() == (2 * pset.size, 0)


def test_hessian_norm_estimate_matches_dense_spectrum():
    ds = make_dataset(n=25, d=5, seed=21)
    model = RidgeModel(ds.dim)
    lcfg = LossConfig(lam=0.5)
    theta = np.zeros(model.param_count)
    h = model.hessian_dense(theta, ds, lcfg)
    exact = np.linalg.norm(h, 2)
    est = hessian_norm_estimate(model, theta, ds, lcfg, steps=30)
    assert est == pytest.approx(exact, rel=1e-6)
    assert est <= exact * (1 + 1e-12)  # power iteration approaches from below


def test_default_rate_is_reciprocal_norm(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    tau = default_unlearning_rate(model, params, small_binary, lcfg, seed=4)
    est = hessian_norm_estimate(model, params.theta, small_binary, lcfg,
                                steps=10, seed=4)
    assert tau == pytest.approx(1.0 / est, rel=1e-12)


def test_first_order_is_exactly_minus_tau_g(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    pset = flip_pset(small_binary)
    g = gradient_difference(model, params, pset)
    res = first_order_update(model, params, pset, tau=0.05)
    np.testing.assert_allclose(res.delta, -0.05 * g, rtol=1e-12)
    np.testing.assert_allclose(res.new_params.theta, params.theta + res.delta)
    assert res.method == "first" and res.info["tau"] == 0.05
    assert res.gradient_count.grad_evals == 2 * pset.size
    assert res.gradient_count.hvp_evals == 0


def test_first_order_auto_tau_counts_calibration(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    pset = flip_pset(small_binary)
    res = first_order_update(model, params, pset, ds=small_binary, lcfg=lcfg)
    assert res.info["tau"] > 0
    assert res.gradient_count.hvp_evals == 10 * small_binary.n


def test_first_order_rejects_bad_tau(fitted_logreg, small_binary):
    model, params, _ = fitted_logreg
    pset = flip_pset(small_binary)
    with pytest.raises(ValueError, match="rate"):
        first_order_update(model, params, pset, tau=0.0)
    with pytest.raises(ValueError, match="calibration"):
        first_order_update(model, params, pset)


def test_empty_perturbation_rejected(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    empty = flip_pset(small_binary).subset(np.array([], dtype=np.int64))
    with pytest.raises(PerturbationError, match="empty"):
        first_order_update(model, params, empty, tau=0.1)
    with pytest.raises(PerturbationError, match="empty"):
        second_order_update_exact(model, params, empty, small_binary, lcfg)


def test_second_order_exact_on_quadratic_objective():
    # for a quadratic objective one Newton step lands on the new optimum
    ds = make_dataset(n=30, d=5, seed=4)
    lam = 0.8
    model = RidgeModel(ds.dim)
    lcfg = LossConfig(lam=lam)
    params = train_convex(model, ds, TrainConfig(tolerance=1e-12), lcfg)
    pset = build_perturbations(
        ds, ReplaceFeatures(points=(2, 11, 17), features=(0, 3), values=0.0))
    corrected = pset.apply(ds)
    res = second_order_update_exact(model, params, pset, corrected, lcfg)
    a = corrected.x.T @ corrected.x + lam * np.eye(ds.dim)
    expected = np.linalg.solve(a, corrected.x.T @ corrected.y)
    np.testing.assert_allclose(res.new_params.theta, expected, atol=1e-10)


def test_second_order_requires_positive_definite_hessian():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 6))
    ds = Dataset(x, np.array([-1, 1, 1]), (-1, 1))
    model = RidgeModel(ds.dim)
    params = model.init_params()
    pset = build_perturbations(ds, ReplaceFeatures(points=(0,), features=(1,), values=0.0))
    with pytest.raises(ConvergenceError, match="positive definite"):
        second_order_update_exact(model, params, pset, pset.apply(ds),
                                  LossConfig(lam=0.0))


def test_masked_second_order_solves_principal_submatrix(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    pset = flip_pset(small_binary)
    corrected = pset.apply(small_binary)
    mask = np.zeros(model.param_count, dtype=bool)
    mask[:3] = True
    res = second_order_update_exact(model, params, pset, corrected, lcfg, mask=mask)
    assert not res.delta[~mask].any()
    g = gradient_difference(model, params, pset, mask=mask)
    h = model.hessian_dense(params.theta, corrected, lcfg)
    idx = np.nonzero(mask)[0]
    expected = -np.linalg.solve(h[np.ix_(idx, idx)], g[idx])
    np.testing.assert_allclose(res.delta[idx], expected, rtol=1e-9)


def test_lissa_matches_dense_inverse(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    rng = np.random.default_rng(12)
    v = rng.normal(size=model.param_count)
    cfg = LissaConfig(depth=800, repetitions=2, batch=10 ** 6, damping=1e-6, seed=0)
    est, info = lissa_inverse_hvp(model, params.theta, small_binary, lcfg, v, cfg)
    h = model.hessian_dense(params.theta, small_binary, lcfg)
    exact = np.linalg.solve(h, v)
    rel = np.linalg.norm(est - exact) / np.linalg.norm(exact)
    assert rel < 1e-2
    assert info["scale"] > 0 and len(info["iterations"]) == 2


def test_lissa_update_tracks_exact_update(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    pset = flip_pset(small_binary)
    corrected = pset.apply(small_binary)
    exact = second_order_update_exact(model, params, pset, corrected, lcfg)
    cfg = LissaConfig(depth=800, repetitions=2, batch=10 ** 6, damping=1e-6, seed=0)
    stoch = second_order_update_lissa(model, params, pset, corrected, lcfg, cfg)
    rel = (np.linalg.norm(stoch.delta - exact.delta)
           / np.linalg.norm(exact.delta))
    assert rel < 5e-2
    assert stoch.method == "second_lissa"


def test_lissa_divergence_guard(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    v = np.ones(model.param_count)
    cfg = LissaConfig(depth=50, repetitions=1, scale=1e-6)
    with pytest.raises(DivergenceError, match="diverged"):
        lissa_inverse_hvp(model, params.theta, small_binary, lcfg, v, cfg)


def test_revoke_and_shrink_parameter_mapping():
    model = LogisticModel(6, intercept=True)
    rng = np.random.default_rng(3)
    params = model.init_params().with_theta(rng.normal(size=model.param_count))
    small, sparams = revoke_and_shrink(model, params, [1, 4])
    assert small.param_count == model.param_count - 2
    keep = [0, 2, 3, 5, 6]
    np.testing.assert_array_equal(sparams.theta, params.theta[keep])
    # predictions agree once revoked columns are zero-filled
    x = rng.normal(size=(10, 6))
    x_zeroed = x.copy()
    x_zeroed[:, [1, 4]] = 0.0
    np.testing.assert_array_equal(small.predict(sparams, x[:, [0, 2, 3, 5]]),
                                  model.predict(params, x_zeroed))


def test_revoke_and_shrink_validation():
    model = LogisticModel(4)
    params = model.init_params()
    same_model, same_params = revoke_and_shrink(model, params, [])
    assert same_model is model and same_params is params
    with pytest.raises(PerturbationError, match="duplicate"):
        revoke_and_shrink(model, params, [1, 1])
    with pytest.raises(PerturbationError, match="range"):
        revoke_and_shrink(model, params, [4])


def test_sequential_first_order_cost_independent_of_batches(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    pset = flip_pset(small_binary, points=(0, 3, 7, 9, 12, 15))
    runs = {}
    for batches in (1, 3):
        res = sequential_unlearn(model, params, small_binary, pset, batches,
                                 "first", lcfg, seed=0)
        runs[batches] = res
    a, b = runs[1].gradient_count, runs[3].gradient_count
    assert (a.grad_evals, a.hvp_evals) == (b.grad_evals, b.hvp_evals)
    assert a.grad_evals >= 2 * pset.size


def test_sequential_single_batch_equals_one_shot(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    pset = flip_pset(small_binary)
    corrected = pset.apply(small_binary)
    one_shot = second_order_update_exact(model, params, pset, corrected, lcfg)
    seq = sequential_unlearn(model, params, small_binary, pset, 1, "second",
                             lcfg, seed=0)
    np.testing.assert_allclose(seq.new_params.theta, one_shot.new_params.theta,
                               rtol=1e-10)


def test_sequential_validation(fitted_logreg, small_binary):
    model, params, lcfg = fitted_logreg
    pset = flip_pset(small_binary)
    with pytest.raises(PerturbationError, match="batches"):
        sequential_unlearn(model, params, small_binary, pset, pset.size + 1,
                           "first", lcfg)
    with pytest.raises(ValueError, match="method"):
        sequential_unlearn(model, params, small_binary, pset, 1, "third", lcfg)
