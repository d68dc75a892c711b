"""Two-layer perceptron (tanh hidden layer, softmax output).

Gradients are exact closed-form backprop; Hessian-vector products use the
forward-over-reverse construction, so curvature is exact rather than a
finite-difference approximation. The model is non-convex: certification
routines treat it accordingly.
"""

import numpy as np
from scipy.special import softmax

from .base import Model, ModelParams


class MlpModel(Model):

    architecture = "mlp"
    convex = False
    loss_kind = "cross_entropy"

    def __init__(self, dim: int, hidden: int, classes: int):
        super().__init__()
        if min(dim, hidden, classes) < 1 or classes < 2:
            raise ValueError("bad layer sizes")
        self.dim = int(dim)
        self.hidden = int(hidden)
        self.classes = int(classes)

    @property
    def param_count(self) -> int:
        d, h, k = self.dim, self.hidden, self.classes
        return h * d + h + k * h + k

    def init_params(self, seed: int = 0) -> ModelParams:
        rng = np.random.default_rng(seed)
        d, h, k = self.dim, self.hidden, self.classes
        w1 = rng.normal(scale=1.0 / np.sqrt(d), size=(h, d))
        w2 = rng.normal(scale=1.0 / np.sqrt(h), size=(k, h))
        theta = np.concatenate([w1.ravel(), np.zeros(h), w2.ravel(), np.zeros(k)])
        return ModelParams(theta, self.architecture)

    def unpack(self, theta: np.ndarray):
        d, h, k = self.dim, self.hidden, self.classes
        i = 0
        w1 = theta[i:i + h * d].reshape(h, d); i += h * d
        b1 = theta[i:i + h]; i += h
        w2 = theta[i:i + k * h].reshape(k, h); i += k * h
        b2 = theta[i:i + k]
        return w1, b1, w2, b2

    def pack(self, w1, b1, w2, b2) -> np.ndarray:
        return np.concatenate([w1.ravel(), b1, w2.ravel(), b2])

    def last_layer_mask(self) -> np.ndarray:
        """Boolean mask selecting the output layer (w2, b2)."""
        d, h, k = self.dim, self.hidden, self.classes
        mask = np.zeros(self.param_count, dtype=bool)
        mask[h * d + h:] = True
        return mask

    def _forward(self, theta, x):
        w1, b1, w2, b2 = self.unpack(theta)
        z1 = x @ w1.T + b1
        a = np.tanh(z1)
        z2 = a @ w2.T + b2
        return w1, b1, w2, b2, a, z2

    def _check_labels(self, y):
        y = np.asarray(y, dtype=np.int64)
        if y.size and (y.min() < 0 or y.max() >= self.classes):
            raise ValueError(f"label outside 0..{self.classes - 1}")
        return y

    def _point_loss_sum(self, theta, x, y):
        y = self._check_labels(y)
        *_, z2 = self._forward(theta, x)
        lse = np.logaddexp.reduce(z2, axis=1)
        return float((lse - z2[np.arange(len(y)), y]).sum())

    def _point_grad_sum(self, theta, x, y):
        y = self._check_labels(y)
        _, _, w2, _, a, z2 = self._forward(theta, x)
        probs = softmax(z2, axis=1)
        dz2 = probs.copy()
        dz2[np.arange(len(y)), y] -= 1.0
        gw2 = dz2.T @ a
        gb2 = dz2.sum(axis=0)
        da = dz2 @ w2
        dz1 = da * (1.0 - a * a)
        gw1 = dz1.T @ x
        gb1 = dz1.sum(axis=0)
        return self.pack(gw1, gb1, gw2, gb2)

    def _point_hvp_sum(self, theta, x, y, v):
        y = self._check_labels(y)
        _, _, w2, _, a, z2 = self._forward(theta, x)
        v1, c1, v2, c2 = self.unpack(v)
        probs = softmax(z2, axis=1)
        dz2 = probs.copy()
        dz2[np.arange(len(y)), y] -= 1.0
        da = dz2 @ w2
        one_m_a2 = 1.0 - a * a

        rz1 = x @ v1.T + c1
        ra = one_m_a2 * rz1
        rz2 = a @ v2.T + ra @ w2.T + c2
        pr = probs * rz2
        rprobs = pr - probs * pr.sum(axis=1, keepdims=True)
        rdz2 = rprobs
        rgw2 = rdz2.T @ a + dz2.T @ ra
        rgb2 = rdz2.sum(axis=0)
        rda = dz2 @ v2 + rdz2 @ w2
        rdz1 = rda * one_m_a2 - 2.0 * da * a * ra
        rgw1 = rdz1.T @ x
        rgb1 = rdz1.sum(axis=0)
        return self.pack(rgw1, rgb1, rgw2, rgb2)

    def predict(self, params: ModelParams, x: np.ndarray) -> np.ndarray:
        *_, z2 = self._forward(params.theta, np.atleast_2d(x))
        return z2.argmax(axis=1).astype(np.int64)

    def shrink(self, features) -> "MlpModel":
        feats = np.asarray(features, dtype=np.int64)
        return MlpModel(self.dim - feats.size, self.hidden, self.classes)

    def dropped_param_indices(self, features) -> np.ndarray:
        feats = np.asarray(features, dtype=np.int64)
        cols = (np.arange(self.hidden)[:, None] * self.dim + feats[None, :])
        return np.sort(cols.ravel())
