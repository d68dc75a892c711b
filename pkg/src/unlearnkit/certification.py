"""Certified-removal accounting.

An unlearning step counts as certified when the gradient residual of the
corrected objective at the updated parameters stays below the budget
beta = sigma * epsilon / c with c = sqrt(2 ln(1.5 / delta)). The residual
bounds translate perturbation magnitude into worst-case residuals for the
two update families; they hold for convex losses with bounded derivatives
and unit-ball features.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, PerturbationSet
from .errors import CertificationError
from .models.base import LossConfig, Model, ModelParams
from .models.linear import LogisticModel


@dataclass(frozen=True)
class LipschitzConstants:
    """Per-sample smoothness constants of a loss family.

    gamma: Lipschitz constant of the parameter gradient (Hessian norm bound).
    gamma_z: Lipschitz constant of the gradient w.r.t. the data point.
    gamma_dd: Lipschitz constant of the per-sample Hessian in the data point.
    """

    gamma: float
    gamma_z: float
    gamma_dd: float
    family: str = ""


def logreg_lipschitz_constants(model: LogisticModel, ds: Dataset,
                               params: ModelParams) -> LipschitzConstants:
    """Exact constants for binary logistic loss on unit-ball features.

    gamma = 1/4 (max of s(1-s) * ||x||^2), gamma_z = 1 + ||theta||_2 / 4
    (gradient Jacobian in x is -y s I + s(1-s) x theta^T), and
    gamma_dd = 1 / (6 sqrt(3)) (max of |s''|). Intercept-augmented models
    are rejected because the implicit constant feature breaks the unit-ball
    premise these values rely on.
    """
    if not isinstance(model, LogisticModel):
        raise CertificationError(
            f"constants are derived for binary logistic loss, not {model.architecture}")
    if model.intercept:
        raise CertificationError(
            "constants assume raw unit-ball features; intercept models are not supported")
    norms = np.linalg.norm(ds.x, axis=1)
    top = float(norms.max())
    if top > 1.0 + 1e-9:
        raise CertificationError(
            f"feature norms must be <= 1 (max is {top:.6f}); rescale the data first")
    theta_norm = float(np.linalg.norm(params.theta))
    return LipschitzConstants(gamma=0.25,
                              gamma_z=1.0 + theta_norm / 4.0,
                              gamma_dd=1.0 / (6.0 * math.sqrt(3.0)),
                              family="logistic")


def residual_bound_first(consts: LipschitzConstants, tau: float, n: int,
                         magnitude: float, zcount: int,
                         lam: float = 0.0) -> float:
    """Worst-case residual of the tau-scaled gradient-difference update:
    (1 + tau * ||H||) * gamma_z * M * |Z| with ||H|| <= n * gamma + lam.

    `lam` defaults to 0, which reproduces the plain data-term factor
    (1 + tau * gamma * n); pass the actual regularization strength for the
    conservative variant.
    """
    if tau <= 0 or n < 1 or zcount < 0 or magnitude < 0:
        raise CertificationError("bound needs tau > 0, n >= 1, M >= 0, |Z| >= 0")
    return (1.0 + tau * (consts.gamma * n + lam)) * consts.gamma_z * magnitude * zcount


def residual_bound_second(consts: LipschitzConstants, lam: float,
                          magnitude: float, zcount: int) -> float:
    """Worst-case residual of the inverse-curvature update:
    gamma_z^2 * gamma_dd * M^2 * |Z|^2 / lam^2."""
    if lam <= 0:
        raise CertificationError("the second-order bound requires lam > 0")
    if zcount < 0 or magnitude < 0:
        raise CertificationError("bound needs M >= 0 and |Z| >= 0")
    return (consts.gamma_z ** 2 * consts.gamma_dd
            * magnitude ** 2 * zcount ** 2) / lam ** 2


def _budget_constant(delta: float) -> float:
    if not 0.0 < delta < 1.0:
        raise CertificationError(f"delta must lie in (0, 1), got {delta}")
    return math.sqrt(2.0 * math.log(1.5 / delta))


def noise_scale_for_budget(epsilon: float, delta: float, beta: float) -> float:
    """Gaussian noise scale sigma = beta * c / epsilon that certifies
    residuals up to beta under an (epsilon, delta) budget."""
    if epsilon <= 0:
        raise CertificationError(f"epsilon must be > 0, got {epsilon}")
    if beta < 0:
        raise CertificationError(f"beta must be >= 0, got {beta}")
    return beta * _budget_constant(delta) / epsilon


def effective_epsilon(sigma: float, delta: float, residual_norm: float) -> float:
    """The epsilon actually spent by a residual under noise scale sigma."""
    if sigma <= 0:
        raise CertificationError("effective epsilon needs sigma > 0")
    if residual_norm < 0:
        raise CertificationError("residual norm must be >= 0")
    return residual_norm * _budget_constant(delta) / sigma


def exp_noise_rate(epsilon: float, beta: float) -> float:
    """Rate alpha = epsilon / beta of the exponential L2 sampler for the
    epsilon-only certification route."""
    if epsilon <= 0 or beta <= 0:
        raise CertificationError("epsilon-only route needs epsilon > 0 and beta > 0")
    return epsilon / beta


@dataclass(frozen=True)
class CertificationBudget:
    """(epsilon, delta) privacy budget together with the deployed noise
    scale sigma; beta = sigma * epsilon / c is the residual allowance."""

    epsilon: float
    delta: float
    sigma: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise CertificationError(f"epsilon must be > 0, got {self.epsilon}")
        _budget_constant(self.delta)
        if self.sigma < 0:
            raise CertificationError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def c(self) -> float:
        return _budget_constant(self.delta)

    @property
    def beta(self) -> float:
        return self.sigma * self.epsilon / self.c

    @classmethod
    def for_target_beta(cls, epsilon: float, delta: float,
                        beta: float) -> "CertificationBudget":
        return cls(epsilon, delta, noise_scale_for_budget(epsilon, delta, beta))


def gradient_residual(model: Model, params: ModelParams, ds_corrected: Dataset,
                      lcfg: LossConfig) -> tuple[np.ndarray, float]:
    """Full gradient of the corrected objective at the updated parameters,
    and its L2 norm."""
    g = model.grad(params.theta, ds_corrected, lcfg)
    return g, float(np.linalg.norm(g))


@dataclass(frozen=True)
class ResidualReport:
    residual_norm: float
    beta: float
    certified: bool
    effective_epsilon: float
    epsilon: float
    delta: float
    sigma: float
    bound_first: float | None = None
    bound_second: float | None = None
    notes: tuple[str, ...] = ()
    method: str = ""

    def to_json(self) -> dict:
        eff = self.effective_epsilon
        return {
            "residual_norm": self.residual_norm,
            "beta": self.beta,
            "certified": self.certified,
            "effective_epsilon": eff if math.isfinite(eff) else None,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "sigma": self.sigma,
            "bound_first": self.bound_first,
            "bound_second": self.bound_second,
            "notes": list(self.notes),
            "method": self.method,
        }


def certify(model: Model, params: ModelParams, ds_corrected: Dataset,
            budget: CertificationBudget, lcfg: LossConfig,
            pset: PerturbationSet | None = None,
            consts: LipschitzConstants | None = None,
            tau: float | None = None, t_steps: int = 1,
            method: str = "") -> ResidualReport:
    """Measure the residual and compare it against the budget.

    Worst-case bounds are attached when the Lipschitz constants apply (or
    can be derived) and the perturbation carries a feature magnitude; a
    sequential schedule of `t_steps` batches multiplies the bounds.
    Non-convex models and zero noise are reported but never certified.
    """
    if t_steps < 1:
        raise CertificationError("t_steps must be >= 1")
    _, rnorm = gradient_residual(model, params, ds_corrected, lcfg)
    notes: list[str] = []
    if consts is None and isinstance(model, LogisticModel) and not model.intercept:
        try:
            consts = logreg_lipschitz_constants(model, ds_corrected, params)
        except CertificationError:
            consts = None
    bound_first = bound_second = None
    if consts is not None and pset is not None:
        if pset.magnitude_total == 0.0:
            notes.append("label-only perturbation: magnitude bounds not applicable")
        else:
            m, zc = pset.magnitude_total, pset.size
            if tau is not None:
                bound_first = t_steps * residual_bound_first(
                    consts, tau, ds_corrected.n, m, zc, lam=lcfg.lam)
            if lcfg.lam > 0:
                bound_second = t_steps * residual_bound_second(
                    consts, lcfg.lam, m, zc)
    certified = rnorm <= budget.beta
    if budget.sigma == 0.0:
        notes.append("no noise, certification vacuous")
        eff = math.inf
        certified = False
    else:
        eff = effective_epsilon(budget.sigma, budget.delta, rnorm)
    if not model.convex:
        notes.append("non-convex: guarantees not applicable")
        certified = False
    return ResidualReport(residual_norm=rnorm, beta=budget.beta,
                          certified=certified, effective_epsilon=eff,
                          epsilon=budget.epsilon, delta=budget.delta,
                          sigma=budget.sigma, bound_first=bound_first,
                          bound_second=bound_second, notes=tuple(notes),
                          method=method)
