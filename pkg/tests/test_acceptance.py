"""End-to-end acceptance checks, one per advertised guarantee.

Each test prints a single PASS/FAIL line (visible with -s or -rA) so the
suite doubles as a checklist. The canary and poisoning runs train real
models, so this module is slower than the unit tests.
"""

import functools
import math
import statistics

import numpy as np
import pytest

from unlearnkit import (CanarySpec, CertificationBudget, CharContextModel,
                        Dataset, ExperimentConfig, LissaConfig, LogisticModel,
                        LossConfig, MlpModel, PerturbationSet, ReplaceFeatures,
                        ReplaceLabels, RidgeModel, TrainConfig,
                        build_perturbations, calibrate_tau_for_exposure,
                        canary_perturbation, default_corpus, exposure_report,
                        fine_tune, first_order_update, gradient_residual,
                        insert_canary, label_flip_instance, lissa_inverse_hvp,
                        logreg_lipschitz_constants, monte_carlo_all_affected,
                        noise_scale_for_budget, packaged_scenario_path,
                        packaged_scenarios, prob_all_affected,
                        revocation_instance, revoke_and_shrink,
                        run_experiment, scale_to_unit_ball,
                        second_order_update_exact, second_order_update_lissa,
                        sequential_unlearn, synth_classification,
                        train_convex, train_sgd, unlearn_canary)


def verdict(num, label):
    """Print one PASS/FAIL line per check, then let pytest handle the rest."""
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\nFAIL {num:>2}  {label}")
                raise
            print(f"\nPASS {num:>2}  {label}")
        return wrapper
    return deco


def fit_logreg(ds, lam, tolerance):
    model = LogisticModel(ds.dim, intercept=False)
    lcfg = LossConfig(lam=lam, kind=model.loss_kind)
    params = train_convex(model, ds, TrainConfig(tolerance=tolerance), lcfg)
    return model, params, lcfg


@verdict(1, "ridge second-order update matches the closed-form retrain")
def test_01_quadratic_exactness():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(40, 201))
        d = int(rng.integers(4, 21))
        ds = scale_to_unit_ball(synth_classification(n, d, 2.0, seed))
        model = RidgeModel(d, intercept=False)
        lcfg = LossConfig(lam=0.5, kind=model.loss_kind)
        params = train_convex(model, ds, TrainConfig(tolerance=1e-12), lcfg)
        points = rng.choice(n, size=int(rng.integers(3, 12)), replace=False)
        if seed % 2:
            spec = ReplaceLabels(points=tuple(int(i) for i in points),
                                 labels=tuple(int(-ds.y[i]) for i in points))
        else:
            feats = rng.choice(d, size=min(3, d), replace=False)
            spec = ReplaceFeatures(points=tuple(int(i) for i in points),
                                   features=tuple(int(j) for j in feats),
                                   values=round(rng.uniform(-0.2, 0.2), 3))
        pset = build_perturbations(ds, spec)
        corrected = pset.apply(ds)
        res = second_order_update_exact(model, params, pset, corrected, lcfg)
        x, y = corrected.x, corrected.y.astype(np.float64)
        closed = np.linalg.solve(x.T @ x + lcfg.lam * np.eye(d), x.T @ y)
        worst = max(worst, float(np.abs(res.new_params.theta - closed).max()))
    assert worst <= 1e-8, worst


@verdict(2, "zeroed-column unlearning + shrink equals training on dropped columns")
def test_02_revoke_equivalence():
    worst = 0.0
    for seed in range(5):
        train, _, spec = revocation_instance(seed)
        model, params, lcfg = fit_logreg(train, lam=1.0, tolerance=1e-12)
        pset = build_perturbations(train, spec)
        res = second_order_update_exact(model, params, pset,
                                        pset.apply(train), lcfg)
        small_model, small_params = revoke_and_shrink(model, res.new_params,
                                                      spec.features)
        keep = [j for j in range(train.dim) if j not in spec.features]
        dropped = Dataset(train.x[:, keep].copy(), train.y, train.label_domain)
        ref = train_convex(small_model, dropped, TrainConfig(tolerance=1e-12),
                           lcfg)
        worst = max(worst,
                    float(np.abs(small_params.theta - ref.theta).max()))
    assert worst <= 1e-4, worst


@pytest.fixture(scope="module")
def revocation_sweep():
    """Twenty seeded feature-revocation runs shared by the ordering and
    soundness checks."""
    rows = []
    for seed in range(20):
        train, _, spec = revocation_instance(seed, n=100, separation=2.0)
        model, params, lcfg = fit_logreg(train, lam=2.0, tolerance=1e-9)
        pset = build_perturbations(train, spec)
        corrected = pset.apply(train)
        first = first_order_update(model, params, pset, ds=train, lcfg=lcfg)
        second = second_order_update_exact(model, params, pset, corrected, lcfg)
        consts = logreg_lipschitz_constants(model, train, params)
        rows.append({
            "none": gradient_residual(model, params, corrected, lcfg)[1],
            "first": gradient_residual(model, first.new_params, corrected, lcfg)[1],
            "second": gradient_residual(model, second.new_params, corrected, lcfg)[1],
            "tau": first.info["tau"],
            "n": train.n,
            "magnitude": pset.magnitude_total,
            "zcount": pset.size,
            "lam": lcfg.lam,
            "consts": consts,
        })
    return rows


@verdict(3, "median residuals: second-order < first-order < no update, 2x apart")
def test_03_residual_ordering(revocation_sweep):
    med = {k: statistics.median(r[k] for r in revocation_sweep)
           for k in ("none", "first", "second")}
    assert med["second"] * 2.0 <= med["first"], med
    assert med["first"] * 2.0 <= med["none"], med


@verdict(4, "measured residuals never exceed the analytic bounds")
def test_04_bound_soundness(revocation_sweep):
    from unlearnkit import residual_bound_first, residual_bound_second
    for r in revocation_sweep:
        bf = residual_bound_first(r["consts"], r["tau"], r["n"],
                                  r["magnitude"], r["zcount"], lam=r["lam"])
        bs = residual_bound_second(r["consts"], r["lam"], r["magnitude"],
                                   r["zcount"])
        assert r["first"] <= bf, (r["first"], bf)
        assert r["second"] <= bs, (r["second"], bs)


@verdict(5, "noise calibration constants: c ~ 2.94, sigma ~ 0.294 / 2.94")
def test_05_noise_calibration():
    budget = CertificationBudget(epsilon=0.1, delta=0.02, sigma=1.0)
    assert abs(budget.c - 2.94) <= 0.05
    assert abs(noise_scale_for_budget(0.1, 0.02, 0.01) - 0.294) <= 0.005
    assert abs(noise_scale_for_budget(0.1, 0.02, 0.1) - 2.94) <= 0.05


@verdict(6, "shard coverage: p(20, 150) >= 0.99 and closed form matches Monte Carlo")
def test_06_shard_coverage():
    assert prob_all_affected(20, 150) >= 0.99
    trials = 100_000
    for s in (2, 5, 20, 50):
        for n in range(s, 10 * s + 1, max(1, s // 2)):
            p = prob_all_affected(s, n)
            p_mc = monte_carlo_all_affected(s, n, trials, seed=0)
            se = math.sqrt(p * (1.0 - p) / trials)
            if se == 0.0:
                assert p_mc == p, (s, n, p, p_mc)
            else:
                assert abs(p_mc - p) <= 3.0 * se, (s, n, p, p_mc, se)


@verdict(7, "stochastic inverse-HVP within 5% of the dense solve at defaults")
def test_07_lissa_fidelity():
    ds = scale_to_unit_ball(synth_classification(150, 30, 3.0, seed=3))
    model, params, lcfg = fit_logreg(ds, lam=2.0, tolerance=1e-10)
    v = np.random.default_rng(3).standard_normal(model.param_count)
    est, info = lissa_inverse_hvp(model, params.theta, ds, lcfg, v,
                                  LissaConfig())
    h = model.hessian_dense(params.theta, ds, lcfg)
    exact = np.linalg.solve(h, v)
    rel = float(np.linalg.norm(est - exact) / np.linalg.norm(exact))
    assert rel <= 0.05, (rel, info)


@verdict(8, "canary exposure: > 10 trained, < 2 after either update, fine-tune lags")
def test_08_canary_pipeline():
    from unlearnkit import DEFAULT_ALPHABET
    spec = CanarySpec(template="code {} opens the door ", secret="6174",
                      repetitions=50)
    assert spec.candidates == 10_000
    corpus = insert_canary(default_corpus(), spec, seed=7)
    model = CharContextModel(DEFAULT_ALPHABET, context_len=4)
    ds = model.windows(corpus)
    lcfg = LossConfig(lam=1.0, kind=model.loss_kind)
    params = train_convex(model, ds, TrainConfig(tolerance=1e-6), lcfg)
    before = exposure_report(model, params, spec)
    assert before.exposure > 10.0, before.exposure

    second = unlearn_canary(model, params, corpus, spec, "5926", "second", lcfg)
    assert second.after.exposure < 2.0, second.after.exposure

    first = calibrate_tau_for_exposure(model, params, corpus, spec, "5926",
                                       lcfg, target=2.0)
    assert first.after.exposure < 2.0, first.after.exposure

    _, corpus_new = canary_perturbation(model, corpus, spec, "5926")
    tuned = fine_tune(model, params, model.windows(corpus_new),
                      TrainConfig(epochs=1, seed=0), lcfg)
    ft_exposure = exposure_report(model, tuned, spec).exposure
    assert ft_exposure > second.after.exposure, ft_exposure
    assert ft_exposure > first.after.exposure, ft_exposure


@verdict(9, "label-flip cleanup recovers >= 50% of the retraining gap")
def test_09_label_flip_recovery():
    acc = {"poisoned": [], "clean": [], "first": [], "second": []}

    def accuracy(model, params, test):
        return float((model.predict(params, test.x) == test.y).mean())

    for seed in range(5):
        poisoned, test, spec = label_flip_instance(seed, n=300, separation=6.0)
        model = MlpModel(dim=poisoned.dim, hidden=16, classes=3)
        lcfg = LossConfig(lam=0.1, kind=model.loss_kind)
        tcfg = TrainConfig(epochs=150, learning_rate=0.05, seed=seed)
        params = train_sgd(model, poisoned, tcfg, lcfg)
        pset = build_perturbations(poisoned, spec)
        corrected = pset.apply(poisoned)
        mask = model.last_layer_mask()
        first = first_order_update(model, params, pset, ds=poisoned,
                                   lcfg=lcfg, mask=mask)
        second = second_order_update_lissa(model, params, pset, corrected,
                                           lcfg, cfg=LissaConfig(damping=0.01,
                                                                 seed=seed),
                                           mask=mask)
        retrained = train_sgd(model, corrected, tcfg, lcfg)
        acc["poisoned"].append(accuracy(model, params, test))
        acc["clean"].append(accuracy(model, retrained, test))
        acc["first"].append(accuracy(model, first.new_params, test))
        acc["second"].append(accuracy(model, second.new_params, test))

    mean = {k: statistics.mean(v) for k, v in acc.items()}
    gap = mean["clean"] - mean["poisoned"]
    assert gap > 0, mean
    for method in ("first", "second"):
        assert mean[method] > mean["poisoned"], (method, mean)
        recovery = (mean[method] - mean["poisoned"]) / gap
        assert recovery >= 0.5, (method, recovery, mean)


@verdict(10, "first-order costs |Z|+|Z~| gradients and beats retraining wall time")
def test_10_efficiency():
    for name in sorted(packaged_scenarios()):
        cfg = ExperimentConfig.from_json(packaged_scenario_path(name))
        if cfg.scenario == "shard_prob":
            continue
        report = run_experiment(cfg)
        firsts = [r for r in report.records if r["method"] == "first"]
        retrains = [r for r in report.records if r["method"] == "retrain"]
        assert firsts and retrains, name
        for r in firsts:
            assert "error" not in r, r
            assert r["grad_evals"] == 2 * r["zcount"], r
        wall_first = statistics.median(r["wall_time_s"] for r in firsts)
        wall_retrain = statistics.median(r["wall_time_s"] for r in retrains)
        assert wall_first < wall_retrain, (name, wall_first, wall_retrain)
        print(f"  {name}: retrain/first wall-time ratio "
              f"{wall_retrain / wall_first:.1f}x")


@verdict(11, "ten sequential updates match one-shot quality and gradient cost")
def test_11_sequential_updates():
    for seed in range(3):
        # 20 label flips leave a one-shot residual well above the noise
        # floor, so the sequential-vs-one-shot ordering is meaningful
        train = scale_to_unit_ball(synth_classification(120, 8, 2.0, seed))
        model, params, lcfg = fit_logreg(train, lam=1.0, tolerance=1e-10)
        rng = np.random.default_rng(seed)
        points = rng.choice(train.n, size=20, replace=False)
        spec = ReplaceLabels(points=tuple(int(i) for i in points),
                             labels=tuple(int(-train.y[i]) for i in points))
        pset = build_perturbations(train, spec)
        corrected = pset.apply(train)
        one = sequential_unlearn(model, params, train, pset, batches=1,
                                 method="second", lcfg=lcfg)
        ten = sequential_unlearn(model, params, train, pset, batches=10,
                                 method="second", lcfg=lcfg)
        r_one = gradient_residual(model, one.new_params, corrected, lcfg)[1]
        r_ten = gradient_residual(model, ten.new_params, corrected, lcfg)[1]
        assert r_ten <= r_one, (seed, r_ten, r_one)

        f_one = sequential_unlearn(model, params, train, pset, batches=1,
                                   method="first", lcfg=lcfg)
        f_ten = sequential_unlearn(model, params, train, pset, batches=10,
                                   method="first", lcfg=lcfg)
        assert (f_one.gradient_count.grad_evals
                == f_ten.gradient_count.grad_evals), seed
