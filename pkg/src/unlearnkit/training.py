"""Deterministic training routines.

`train_convex` drives convex objectives to a gradient-norm tolerance with
damped Newton steps while a dense Hessian is affordable, falling back to
gradient descent with backtracking above the dense cap. `train_sgd` is the
seeded stochastic trainer used for the non-convex models and for the
fine-tuning baseline.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import Dataset
from .errors import ConvergenceError, DivergenceError
from .models.base import DENSE_HESSIAN_CAP, LossConfig, Model, ModelParams

_NOISE_KINDS = ("none", "gaussian", "exponential_l2")


@dataclass(frozen=True)
class NoiseSpec:
    """How to draw the linear noise term b of the objective.

    gaussian: i.i.d. N(0, sigma^2) coordinates.
    exponential_l2: density proportional to exp(-alpha * ||b||_2), drawn as
    a uniform direction with Gamma(p, alpha) radius.
    """

    kind: str = "none"
    sigma: float = 0.0
    alpha: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {_NOISE_KINDS}, got {self.kind!r}")
        if self.kind == "gaussian" and self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.kind == "exponential_l2" and self.alpha <= 0:
            raise ValueError("exponential_l2 needs alpha > 0")


def sample_noise(dim: int, spec: NoiseSpec) -> np.ndarray | None:
    """Draw b for the given recipe; None when no noise is requested."""
    if spec.kind == "none" or (spec.kind == "gaussian" and spec.sigma == 0.0):
        return None
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussian":
        return rng.normal(scale=spec.sigma, size=dim)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    radius = rng.gamma(shape=dim, scale=1.0 / spec.alpha)
    return radius * direction


@dataclass(frozen=True)
class TrainConfig:
    tolerance: float = 1e-8
    max_iters: int = 200
    seed: int = 0
    epochs: int = 1
    learning_rate: float | None = None


def _backtrack(model: Model, theta, ds, cfg, loss0, g, step):
    """Armijo backtracking on the given descent direction."""
    slope = float(g @ step)
    # below the float resolution of the summed loss the sufficient-decrease
    # test carries no signal; trust the step as-is
    noise = 8.0 * np.finfo(np.float64).eps * max(abs(loss0), 1.0)
    t = 1.0
    for _ in range(60):
        cand = theta - t * step
        if slope > 0 and 1e-4 * t * slope <= noise:
            return cand
        if model.loss(cand, ds, cfg) <= loss0 - 1e-4 * t * slope:
            return cand
        t *= 0.5
    raise ConvergenceError("line search failed to find a descent step")


def train_convex(model: Model, ds: Dataset, tcfg: TrainConfig,
                 lcfg: LossConfig, theta0: np.ndarray | None = None) -> ModelParams:
    """Minimize the regularized objective of a convex model.

    Runs damped Newton when the dense Hessian fits under the cap, plain
    gradient descent with backtracking otherwise. Raises ConvergenceError
    with the final gradient norm when the budget runs out.
    """
    if not model.convex:
        raise ValueError(f"{model.architecture} is not convex; use train_sgd")
    p = model.param_count
    theta = np.zeros(p) if theta0 is None else np.array(theta0, dtype=np.float64)
    use_newton = p <= DENSE_HESSIAN_CAP
    max_iters = tcfg.max_iters if use_newton else max(tcfg.max_iters, 20000)
    gnorm = math.inf
    lip = None
    for _ in range(max_iters):
        g = model.grad(theta, ds, lcfg)
        gnorm = float(np.linalg.norm(g))
        if not math.isfinite(gnorm):
            raise DivergenceError("non-finite gradient during training")
        if gnorm <= tcfg.tolerance:
            return ModelParams(theta, model.architecture)
        loss0 = model.loss(theta, ds, lcfg)
        if use_newton:
            h = model.hessian_dense(theta, ds, lcfg)
            try:
                c, low = scipy.linalg.cho_factor(h)
                step = scipy.linalg.cho_solve((c, low), g)
            except scipy.linalg.LinAlgError:
                step = g / max(gnorm, 1.0)
        else:
            if lip is None:
                lip = lcfg.lam + _curvature_guess(model, theta, ds, lcfg)
            step = g / lip
        theta = _backtrack(model, theta, ds, lcfg, loss0, g, step)
    raise ConvergenceError(
        f"no convergence after {max_iters} iterations; gradient norm {gnorm:.3e} "
        f"> tolerance {tcfg.tolerance:.1e}")


def _curvature_guess(model, theta, ds, lcfg):
    v = np.ones(model.param_count) / math.sqrt(model.param_count)
    return float(np.linalg.norm(model.hvp(theta, ds, lcfg, v)))


def train_sgd(model: Model, ds: Dataset, tcfg: TrainConfig, lcfg: LossConfig,
              theta0: np.ndarray | None = None) -> ModelParams:
    """Seeded single-sample SGD over `epochs` passes.

    Each visit steps along grad_point(z) + (lam * theta + b) / n so that one
    full epoch approximates the full objective gradient. Visit order is a
    fresh seeded permutation per epoch.
    """
    if tcfg.epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {tcfg.epochs}")
    lr = tcfg.learning_rate
    if lr is None:
        lr = 0.1 / ds.n
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    theta = (model.init_params(tcfg.seed).theta.copy() if theta0 is None
             else np.array(theta0, dtype=np.float64))
    rng = np.random.default_rng(tcfg.seed)
    n = ds.n
    for epoch in range(tcfg.epochs):
        for i in rng.permutation(n):
            g = model.grad_points_sum(theta, ds.x[i:i + 1], ds.y[i:i + 1])
            theta -= lr * (g + lcfg.reg_grad(theta) / n)
        check = model.loss(theta, ds, lcfg)
        if not math.isfinite(check):
            raise DivergenceError(
                f"non-finite loss after epoch {epoch + 1}; reduce the learning rate")
    return ModelParams(theta, model.architecture)
