"""Closed-form unlearning updates.

Both update families shift the trained parameters by a step computed from
the gradient difference

    G = sum_{z in Z-tilde} grad(z) - sum_{z in Z} grad(z)

evaluated at the trained parameters: the first-order update takes
delta = -tau * G; the second-order update takes delta = -H^{-1} G with H the
full-objective Hessian on the corrected dataset, solved either densely
(Cholesky) or through the stochastic truncated-Neumann estimator.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .data import Dataset, PerturbationSet
from .errors import ConvergenceError, DivergenceError, PerturbationError
from .models.base import GradientCounter, LossConfig, Model, ModelParams


@dataclass(frozen=True)
class UpdateResult:
    """Outcome of one unlearning step.

    `gradient_count` is the amount of gradient/HVP work performed by the
    update itself; `wall_time_s` is a monotonic-clock delta around the update
    computation only.
    """

    new_params: ModelParams
    delta: np.ndarray
    gradient_count: GradientCounter
    wall_time_s: float
    method: str
    info: dict = field(default_factory=dict)


def gradient_difference(model: Model, params: ModelParams,
                        pset: PerturbationSet,
                        mask: np.ndarray | None = None) -> np.ndarray:
    """G = grad-sum over replacements minus grad-sum over originals.

    Costs exactly |Z| + |Z-tilde| per-example gradient evaluations.
    """
    theta = params.theta
    g_new = model.grad_points_sum(theta, pset.x_new, pset.y_new)
    g_old = model.grad_points_sum(theta, pset.x_old, pset.y_old)
    g = g_new - g_old
    if mask is not None:
        g = np.where(mask, g, 0.0)
    return g


def hessian_norm_estimate(model: Model, theta: np.ndarray, ds: Dataset,
                          lcfg: LossConfig, steps: int = 10, seed: int = 0,
                          mask: np.ndarray | None = None) -> float:
    """Spectral-norm estimate of the objective Hessian by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=model.param_count)
    if mask is not None:
        v = np.where(mask, v, 0.0)
    v /= np.linalg.norm(v)
    norm = 0.0
    for _ in range(steps):
        w = model.hvp(theta, ds, lcfg, v)
        if mask is not None:
            w = np.where(mask, w, 0.0)
        norm = float(np.linalg.norm(w))
        if norm == 0.0 or not np.isfinite(norm):
            raise DivergenceError("power iteration produced a degenerate iterate")
        v = w / norm
    return norm


def default_unlearning_rate(model: Model, params: ModelParams, ds: Dataset,
                            lcfg: LossConfig, seed: int = 0,
                            mask: np.ndarray | None = None) -> float:
    """tau = 1 / (n * gamma_hat) with gamma_hat = ||H|| / n estimated by a
    10-step power iteration, i.e. the reciprocal of the Hessian-norm
    estimate."""
    return 1.0 / hessian_norm_estimate(model, params.theta, ds, lcfg,
                                       steps=10, seed=seed, mask=mask)


def first_order_update(model: Model, params: ModelParams, pset: PerturbationSet,
                       tau: float | None = None,
                       ds: Dataset | None = None,
                       lcfg: LossConfig | None = None,
                       mask: np.ndarray | None = None,
                       seed: int = 0) -> UpdateResult:
    """delta = -tau * G. When `tau` is omitted the default rate is
    calibrated from `ds` (which is then required)."""
    if pset.size == 0:
        raise PerturbationError("empty perturbation set")
    snap = model.counter.snapshot()
    t0 = time.perf_counter()
    if tau is None:
        if ds is None or lcfg is None:
            raise ValueError("tau calibration needs the dataset and loss config")
        tau = default_unlearning_rate(model, params, ds, lcfg, seed=seed, mask=mask)
    if tau <= 0:
        raise ValueError(f"unlearning rate must be > 0, got {tau}")
    g = gradient_difference(model, params, pset, mask=mask)
    delta = -tau * g
    elapsed = time.perf_counter() - t0
    return UpdateResult(params.with_theta(params.theta + delta), delta,
                        model.counter.delta_since(snap), elapsed,
                        "first", {"tau": tau})


def second_order_update_exact(model: Model, params: ModelParams,
                              pset: PerturbationSet, ds_corrected: Dataset,
                              lcfg: LossConfig,
                              mask: np.ndarray | None = None) -> UpdateResult:
    """delta = -H^{-1} G with a dense SPD solve of H on the corrected data.

    One step of iterative refinement keeps the relative solve residual at
    or below 1e-10; a larger residual raises ConvergenceError.
    """
    if pset.size == 0:
        raise PerturbationError("empty perturbation set")
    snap = model.counter.snapshot()
    t0 = time.perf_counter()
    g = gradient_difference(model, params, pset, mask=mask)
    h = model.hessian_dense(params.theta, ds_corrected, lcfg)
    if mask is not None:
        idx = np.nonzero(mask)[0]
        h_eff = h[np.ix_(idx, idx)]
        g_eff = g[idx]
    else:
        idx = None
        h_eff, g_eff = h, g
    try:
        factor = scipy.linalg.cho_factor(h_eff)
    except scipy.linalg.LinAlgError as exc:
        raise ConvergenceError(
            f"Hessian is not positive definite ({exc}); "
            "is the regularization strength zero?")
    x = scipy.linalg.cho_solve(factor, g_eff)
    x += scipy.linalg.cho_solve(factor, g_eff - h_eff @ x)
    gn = float(np.linalg.norm(g_eff))
    if gn > 0:
        rel = float(np.linalg.norm(h_eff @ x - g_eff)) / gn
        if rel > 1e-10:
            raise ConvergenceError(
                f"linear solve residual {rel:.2e} above 1e-10; "
                "the Hessian is too ill-conditioned")
    if idx is not None:
        step = np.zeros(model.param_count)
        step[idx] = x
    else:
        step = x
    delta = -step
    elapsed = time.perf_counter() - t0
    return UpdateResult(params.with_theta(params.theta + delta), delta,
                        model.counter.delta_since(snap), elapsed,
                        "second", {})


@dataclass(frozen=True)
class LissaConfig:
    """Stochastic inverse-HVP settings.

    The scaled Hessian H/scale must satisfy ||H/scale|| < 1 for the Neumann
    recursion to contract; `scale=None` auto-calibrates to twice a power-
    iteration norm estimate. `damping` shifts the spectrum away from zero,
    `depth` bounds the iterations per repetition, and repetitions are
    averaged.
    """

    depth: int = 200
    repetitions: int = 4
    batch: int = 1024
    damping: float = 1e-4
    scale: float | None = None
    patience: int = 20
    seed: int = 0
    divergence_factor: float = 1e6


def lissa_inverse_hvp(model: Model, theta: np.ndarray, ds: Dataset,
                      lcfg: LossConfig, v: np.ndarray, cfg: LissaConfig,
                      mask: np.ndarray | None = None) -> tuple[np.ndarray, dict]:
    """Estimate H^{-1} v on `ds` by averaged truncated Neumann recursions.

    Each repetition iterates u <- v + (1 - damping) u - (H_batch u) / scale
    with an unbiased minibatch HVP, stopping early once the per-iteration
    movement has not improved for `patience` steps. The averaged iterate
    estimates scale * (damping * scale * I + H)^{-1} v, so dividing by
    `scale` recovers H^{-1} v up to the damping shift.
    """
    n = ds.n
    batch = min(cfg.batch, n)
    scale = cfg.scale
    if scale is None:
        scale = 2.0 * hessian_norm_estimate(model, theta, ds, lcfg,
                                            steps=10, seed=cfg.seed, mask=mask)
    if scale <= 0:
        raise ValueError("scale must be > 0")
    rng = np.random.default_rng(cfg.seed)
    vnorm = float(np.linalg.norm(v))
    acc = np.zeros_like(v)
    iters_used = []
    for _ in range(cfg.repetitions):
        u = v.copy()
        best = np.inf
        stall = 0
        used = cfg.depth
        for j in range(cfg.depth):
            idx = rng.choice(n, size=batch, replace=False) if batch < n else np.arange(n)
            u_in = u if mask is None else np.where(mask, u, 0.0)
            hv = model.hvp_batch(theta, ds.x[idx], ds.y[idx], u_in, lcfg, n)
            if mask is not None:
                hv = np.where(mask, hv, 0.0)
            u_next = v + (1.0 - cfg.damping) * u - hv / scale
            move = float(np.linalg.norm(u_next - u))
            u = u_next
            unorm = float(np.linalg.norm(u))
            if not np.isfinite(unorm) or unorm > cfg.divergence_factor * max(vnorm, 1e-30):
                raise DivergenceError(
                    f"inverse-HVP iterate diverged at step {j + 1} "
                    f"(|u| = {unorm:.2e}); increase scale or damping")
            if move < best - 1e-16:
                best = move
                stall = 0
            else:
                stall += 1
                if stall >= cfg.patience:
                    used = j + 1
                    break
        acc += u
        iters_used.append(used)
    est = acc / (cfg.repetitions * scale)
    return est, {"scale": scale, "iterations": iters_used}


def second_order_update_lissa(model: Model, params: ModelParams,
                              pset: PerturbationSet, ds_corrected: Dataset,
                              lcfg: LossConfig, cfg: LissaConfig | None = None,
                              mask: np.ndarray | None = None) -> UpdateResult:
    """delta = -(estimated H^{-1} G) with the stochastic estimator on the
    corrected dataset."""
    if pset.size == 0:
        raise PerturbationError("empty perturbation set")
    cfg = cfg or LissaConfig()
    snap = model.counter.snapshot()
    t0 = time.perf_counter()
    g = gradient_difference(model, params, pset, mask=mask)
    est, info = lissa_inverse_hvp(model, params.theta, ds_corrected, lcfg, g,
                                  cfg, mask=mask)
    delta = -est
    elapsed = time.perf_counter() - t0
    return UpdateResult(params.with_theta(params.theta + delta), delta,
                        model.counter.delta_since(snap), elapsed,
                        "second_lissa", info)


def revoke_and_shrink(model: Model, params: ModelParams,
                      features) -> tuple[Model, ModelParams]:
    """Drop the parameters attached to revoked feature columns.

    For models linear in their input this is exactly the optimum of the
    zero-filled problem restricted to the surviving columns, so no further
    update is needed for the removed coordinates.
    """
    feats = np.asarray(features, dtype=np.int64)
    if feats.size == 0:
        return model, params
    if np.unique(feats).size != feats.size:
        raise PerturbationError("duplicate feature indices")
    if feats.min() < 0 or feats.max() >= model.dim:
        raise PerturbationError(
            f"feature index out of range [0, {model.dim})")
    dropped = model.dropped_param_indices(feats)
    keep = np.ones(model.param_count, dtype=bool)
    keep[dropped] = False
    new_model = model.shrink(feats)
    new_params = ModelParams(params.theta[keep].copy(), new_model.architecture)
    if new_model.param_count != new_params.p:
        raise PerturbationError(
            f"shrunk model expects p={new_model.param_count}, got {new_params.p}")
    return new_model, new_params


def sequential_unlearn(model: Model, params: ModelParams, ds: Dataset,
                       pset: PerturbationSet, batches: int, method: str,
                       lcfg: LossConfig, seed: int = 0,
                       tau: float | None = None,
                       lissa: LissaConfig | None = None,
                       mask: np.ndarray | None = None) -> UpdateResult:
    """Split the perturbation into `batches` seeded groups and apply the
    chosen update once per group, recomputing curvature on the partially
    corrected dataset each step.

    For the first-order method the unlearning rate is calibrated once up
    front, so the total per-example gradient count is independent of the
    number of batches.
    """
    if not 1 <= batches <= pset.size:
        raise PerturbationError(
            f"cannot split {pset.size} affected points into {batches} nonempty batches")
    if method not in ("first", "second", "second_lissa"):
        raise ValueError(f"unknown update method {method!r}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(pset.size)
    groups = np.array_split(order, batches)
    snap = model.counter.snapshot()
    t0 = time.perf_counter()
    if method == "first" and tau is None:
        tau = default_unlearning_rate(model, params, ds, lcfg, seed=seed, mask=mask)
    current = params
    current_ds = ds
    for step, group in enumerate(groups):
        sub = pset.subset(pset.affected[group])
        ds_next = sub.apply(current_ds, name_suffix="")
        if method == "first":
            res = first_order_update(model, current, sub, tau=tau, mask=mask)
        elif method == "second":
            res = second_order_update_exact(model, current, sub, ds_next, lcfg,
                                            mask=mask)
        else:
            step_cfg = replace(lissa or LissaConfig(),
                               seed=(lissa.seed if lissa else 0) + step)
            res = second_order_update_lissa(model, current, sub, ds_next, lcfg,
                                            cfg=step_cfg, mask=mask)
        current = res.new_params
        current_ds = ds_next
    elapsed = time.perf_counter() - t0
    return UpdateResult(current, current.theta - params.theta,
                        model.counter.delta_since(snap), elapsed,
                        f"sequential_{method}", {"batches": batches, "tau": tau})
