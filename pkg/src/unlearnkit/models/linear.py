"""Convex linear models: binary logistic regression, ridge regression, and
multinomial (softmax) regression.

Feature vectors may be augmented with a constant 1 when `intercept` is set;
the intercept weight then occupies the last slot(s) of the parameter vector
and is regularized like every other coordinate.
"""

import numpy as np
from scipy.special import expit, softmax

from .base import Model, ModelParams


def _augment(x: np.ndarray, intercept: bool) -> np.ndarray:
    if not intercept:
        return x
    return np.hstack([x, np.ones((x.shape[0], 1))])


class LogisticModel(Model):
    """Binary logistic regression with labels in {-1, +1}."""

    architecture = "logreg"
    convex = True
    loss_kind = "logistic"

    def __init__(self, dim: int, intercept: bool = False):
        super().__init__()
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(dim)
        self.intercept = bool(intercept)

    @property
    def param_count(self) -> int:
        return self.dim + (1 if self.intercept else 0)

    def init_params(self, seed: int = 0) -> ModelParams:
        return ModelParams(np.zeros(self.param_count), self.architecture)

    def _margins(self, theta, x, y):
        xa = _augment(x, self.intercept)
        return xa, np.asarray(y, dtype=np.float64) * (xa @ theta)

    def _point_loss_sum(self, theta, x, y):
        _, z = self._margins(theta, x, y)
        return float(np.logaddexp(0.0, -z).sum())

    def _point_grad_sum(self, theta, x, y):
        xa, z = self._margins(theta, x, y)
        coeff = -np.asarray(y, dtype=np.float64) * expit(-z)
        return xa.T @ coeff

    def _point_hvp_sum(self, theta, x, y, v):
        xa = _augment(x, self.intercept)
        t = xa @ theta
        s = expit(t)
        w = s * (1.0 - s)
        return xa.T @ (w * (xa @ v))

    def _hessian_dense_data(self, theta, x, y):
        xa = _augment(x, self.intercept)
        t = xa @ theta
        s = expit(t)
        w = s * (1.0 - s)
        return xa.T @ (w[:, None] * xa)

    def predict(self, params: ModelParams, x: np.ndarray) -> np.ndarray:
        xa = _augment(np.atleast_2d(x), self.intercept)
        score = xa @ params.theta
        return np.where(score >= 0.0, 1, -1).astype(np.int64)

    def shrink(self, features) -> "LogisticModel":
        feats = np.asarray(features, dtype=np.int64)
        return LogisticModel(self.dim - feats.size, self.intercept)

    def dropped_param_indices(self, features) -> np.ndarray:
        return np.sort(np.asarray(features, dtype=np.int64))


class RidgeModel(Model):
    """Least-squares regression on integer labels, used as a quadratic
    test bed: the objective is exactly quadratic in theta."""

    architecture = "ridge"
    convex = True
    loss_kind = "squared"

    def __init__(self, dim: int, intercept: bool = False):
        super().__init__()
        self.dim = int(dim)
        self.intercept = bool(intercept)

    @property
    def param_count(self) -> int:
        return self.dim + (1 if self.intercept else 0)

    def init_params(self, seed: int = 0) -> ModelParams:
        return ModelParams(np.zeros(self.param_count), self.architecture)

    def _point_loss_sum(self, theta, x, y):
        xa = _augment(x, self.intercept)
        r = xa @ theta - np.asarray(y, dtype=np.float64)
        return 0.5 * float(r @ r)

    def _point_grad_sum(self, theta, x, y):
        xa = _augment(x, self.intercept)
        return xa.T @ (xa @ theta - np.asarray(y, dtype=np.float64))

    def _point_hvp_sum(self, theta, x, y, v):
        xa = _augment(x, self.intercept)
        return xa.T @ (xa @ v)

    def _hessian_dense_data(self, theta, x, y):
        xa = _augment(x, self.intercept)
        return xa.T @ xa

    def predict(self, params: ModelParams, x: np.ndarray) -> np.ndarray:
        xa = _augment(np.atleast_2d(x), self.intercept)
        score = xa @ params.theta
        return np.where(score >= 0.0, 1, -1).astype(np.int64)

    def shrink(self, features) -> "RidgeModel":
        feats = np.asarray(features, dtype=np.int64)
        return RidgeModel(self.dim - feats.size, self.intercept)

    def dropped_param_indices(self, features) -> np.ndarray:
        return np.sort(np.asarray(features, dtype=np.int64))


class SoftmaxModel(Model):
    """Multinomial logistic regression with labels 0..classes-1.

    Parameters are the row-major flattening of the (classes, dim_aug)
    weight matrix.
    """

    architecture = "softmax"
    convex = True
    loss_kind = "cross_entropy"

    def __init__(self, dim: int, classes: int, intercept: bool = True):
        super().__init__()
        if classes < 2:
            raise ValueError("need at least two classes")
        self.dim = int(dim)
        self.classes = int(classes)
        self.intercept = bool(intercept)

    @property
    def dim_aug(self) -> int:
        return self.dim + (1 if self.intercept else 0)

    @property
    def param_count(self) -> int:
        return self.classes * self.dim_aug

    def init_params(self, seed: int = 0) -> ModelParams:
        return ModelParams(np.zeros(self.param_count), self.architecture)

    def _weights(self, theta):
        return theta.reshape(self.classes, self.dim_aug)

    def _check_labels(self, y):
        y = np.asarray(y, dtype=np.int64)
        if y.size and (y.min() < 0 or y.max() >= self.classes):
            raise ValueError(f"label outside 0..{self.classes - 1}")
        return y

    def _logits(self, theta, x):
        xa = _augment(x, self.intercept)
        return xa, xa @ self._weights(theta).T

    def _point_loss_sum(self, theta, x, y):
        y = self._check_labels(y)
        _, logits = self._logits(theta, x)
        lse = np.logaddexp.reduce(logits, axis=1)
        return float((lse - logits[np.arange(len(y)), y]).sum())

    def _point_grad_sum(self, theta, x, y):
        y = self._check_labels(y)
        xa, logits = self._logits(theta, x)
        probs = softmax(logits, axis=1)
        probs[np.arange(len(y)), y] -= 1.0
        return (probs.T @ xa).ravel()

    def _point_hvp_sum(self, theta, x, y, v):
        xa, logits = self._logits(theta, x)
        probs = softmax(logits, axis=1)
        u = xa @ v.reshape(self.classes, self.dim_aug).T
        pu = probs * u
        w = pu - probs * pu.sum(axis=1, keepdims=True)
        return (w.T @ xa).ravel()

    def _hessian_dense_data(self, theta, x, y, chunk: int = 1024):
        xa, logits = self._logits(theta, x)
        probs = softmax(logits, axis=1)
        k, da = self.classes, self.dim_aug
        h = np.zeros((k * da, k * da))
        for c in range(k):
            blk = xa.T @ (probs[:, c][:, None] * xa)
            h[c * da:(c + 1) * da, c * da:(c + 1) * da] += blk
        for lo in range(0, xa.shape[0], chunk):
            pb = probs[lo:lo + chunk]
            xb = xa[lo:lo + chunk]
            b = (pb[:, :, None] * xb[:, None, :]).reshape(pb.shape[0], k * da)
            h -= b.T @ b
        return h

    def predict(self, params: ModelParams, x: np.ndarray) -> np.ndarray:
        _, logits = self._logits(params.theta, np.atleast_2d(x))
        return logits.argmax(axis=1).astype(np.int64)

    def probabilities(self, params: ModelParams, x: np.ndarray) -> np.ndarray:
        _, logits = self._logits(params.theta, np.atleast_2d(x))
        return softmax(logits, axis=1)

    def shrink(self, features) -> "SoftmaxModel":
        feats = np.asarray(features, dtype=np.int64)
        return SoftmaxModel(self.dim - feats.size, self.classes, self.intercept)

    def dropped_param_indices(self, features) -> np.ndarray:
        feats = np.asarray(features, dtype=np.int64)
        rows = np.arange(self.classes)[:, None] * self.dim_aug + feats[None, :]
        return np.sort(rows.ravel())
