"""Model contract shared by every learner in the package.

All training objectives have the form

    L_b(theta; D) = sum_i loss(z_i, theta) + (lam / 2) * ||theta||^2 + b @ theta

with an unscaled data sum, L2 regularization, and an optional linear noise
term b used for certified unlearning. Per-point gradients exclude the
regularizer and noise; full gradients, HVPs and dense Hessians include them.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset


@dataclass
class GradientCounter:
    """Running tally of per-example gradient and HVP work.

    A full-dataset gradient adds n to `grad_evals`; a Hessian-vector product
    over a batch adds the batch size to `hvp_evals`.
    """

    grad_evals: int = 0
    hvp_evals: int = 0

    def add_grads(self, k: int) -> None:
        self.grad_evals += int(k)

    def add_hvps(self, k: int) -> None:
        self.hvp_evals += int(k)

    def snapshot(self) -> tuple[int, int]:
        return (self.grad_evals, self.hvp_evals)

    def delta_since(self, snap: tuple[int, int]) -> "GradientCounter":
        return GradientCounter(self.grad_evals - snap[0], self.hvp_evals - snap[1])

    def reset(self) -> None:
        self.grad_evals = 0
        self.hvp_evals = 0


@dataclass(frozen=True)
class LossConfig:
    """Regularization strength, optional noise vector, and a loss tag."""

    lam: float = 1.0
    noise: np.ndarray | None = None
    kind: str = ""

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"regularization strength must be >= 0, got {self.lam}")
        if self.noise is not None:
            b = np.asarray(self.noise, dtype=np.float64)
            b.setflags(write=False)
            object.__setattr__(self, "noise", b)

    def reg_grad(self, theta: np.ndarray) -> np.ndarray:
        g = self.lam * theta
        if self.noise is not None:
            if self.noise.shape != theta.shape:
                raise ValueError(
                    f"noise vector has dim {self.noise.shape[0]}, "
                    f"parameters have dim {theta.shape[0]}")
            g = g + self.noise
        return g

    def reg_loss(self, theta: np.ndarray) -> float:
        v = 0.5 * self.lam * float(theta @ theta)
        if self.noise is not None:
            v += float(self.noise @ theta)
        return v


@dataclass(frozen=True)
class ModelParams:
    """Flat parameter vector plus the architecture tag it belongs to."""

    theta: np.ndarray
    architecture: str

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=np.float64)
        if t.ndim != 1:
            raise ValueError(f"parameters must be a flat vector, got shape {t.shape}")
        t.setflags(write=False)
        object.__setattr__(self, "theta", t)

    @property
    def p(self) -> int:
        return self.theta.shape[0]

    def with_theta(self, theta: np.ndarray) -> "ModelParams":
        return ModelParams(np.array(theta, dtype=np.float64), self.architecture)


DENSE_HESSIAN_CAP = 4000


class Model(ABC):
    """Loss, derivatives, and prediction for one architecture.

    Instances are immutable apart from `counter`, which tracks gradient and
    HVP work for efficiency reporting.
    """

    architecture: str = ""
    convex: bool = True
    loss_kind: str = ""

    def __init__(self):
        self.counter = GradientCounter()

    @property
    @abstractmethod
    def param_count(self) -> int:
        ...

    @abstractmethod
    def init_params(self, seed: int = 0) -> ModelParams:
        ...

    @abstractmethod
    def _point_loss_sum(self, theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
        ...

    @abstractmethod
    def _point_grad_sum(self, theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Sum of per-point loss gradients; no regularizer, no noise."""

    @abstractmethod
    def _point_hvp_sum(self, theta: np.ndarray, x: np.ndarray, y: np.ndarray,
                       v: np.ndarray) -> np.ndarray:
        """Sum of per-point Hessian-vector products; no regularizer."""

    @abstractmethod
    def predict(self, params: ModelParams, x: np.ndarray) -> np.ndarray:
        ...

    # --- contract methods with uniform counting -----------------------------

    def loss(self, theta: np.ndarray, ds: Dataset, cfg: LossConfig) -> float:
        self._check_dim(theta)
        return self._point_loss_sum(theta, ds.x, ds.y) + cfg.reg_loss(theta)

    def grad(self, theta: np.ndarray, ds: Dataset, cfg: LossConfig) -> np.ndarray:
        self._check_dim(theta)
        self.counter.add_grads(ds.n)
        return self._point_grad_sum(theta, ds.x, ds.y) + cfg.reg_grad(theta)

    def grad_point(self, theta: np.ndarray, x: np.ndarray, y: int) -> np.ndarray:
        self._check_dim(theta)
        self.counter.add_grads(1)
        return self._point_grad_sum(theta, x[None, :], np.asarray([y]))

    def grad_points_sum(self, theta: np.ndarray, x: np.ndarray,
                        y: np.ndarray) -> np.ndarray:
        self._check_dim(theta)
        self.counter.add_grads(x.shape[0])
        return self._point_grad_sum(theta, x, y)

    def hvp(self, theta: np.ndarray, ds: Dataset, cfg: LossConfig,
            v: np.ndarray) -> np.ndarray:
        self._check_dim(theta)
        self._check_dim(v)
        self.counter.add_hvps(ds.n)
        return self._point_hvp_sum(theta, ds.x, ds.y, v) + cfg.lam * v

    def hvp_batch(self, theta: np.ndarray, x: np.ndarray, y: np.ndarray,
                  v: np.ndarray, cfg: LossConfig, total_n: int) -> np.ndarray:
        """Unbiased estimate of the full-objective HVP from one batch:
        (n / B) * sum_batch hvp + lam * v."""
        self._check_dim(theta)
        b = x.shape[0]
        self.counter.add_hvps(b)
        return (total_n / b) * self._point_hvp_sum(theta, x, y, v) + cfg.lam * v

    def hessian_dense(self, theta: np.ndarray, ds: Dataset,
                      cfg: LossConfig) -> np.ndarray:
        p = self.param_count
        if p > DENSE_HESSIAN_CAP:
            raise ValueError(
                f"dense Hessian requested for p={p} > cap {DENSE_HESSIAN_CAP}")
        self._check_dim(theta)
        h = self._hessian_dense_data(theta, ds.x, ds.y)
        h[np.diag_indices_from(h)] += cfg.lam
        return h

    def _hessian_dense_data(self, theta: np.ndarray, x: np.ndarray,
                            y: np.ndarray) -> np.ndarray:
        """Default: build columns through HVPs. Subclasses override when a
        direct assembly is cheaper."""
        p = self.param_count
        h = np.empty((p, p))
        eye = np.eye(p)
        for j in range(p):
            h[:, j] = self._point_hvp_sum(theta, x, y, eye[j])
        return 0.5 * (h + h.T)

    def _check_dim(self, v: np.ndarray) -> None:
        if v.shape != (self.param_count,):
            raise ValueError(
                f"vector of dim {v.shape} does not match p={self.param_count}")
