"""Character-level context model: multinomial regression over a one-hot
encoding of the previous `context_len` symbols.

Training points are sliding windows of a corpus. Feature dimension is
context_len * |alphabet| (plus intercept weights per class); each window
predicts its next symbol. Log-perplexity is measured in bits.
"""

import numpy as np

from ..data import Dataset
from ..errors import DataError
from .linear import SoftmaxModel


def normalize_text(text: str, alphabet: str) -> str:
    """Lowercase, fold all whitespace runs to single spaces, and drop any
    character not in the alphabet."""
    allowed = set(alphabet)
    text = " ".join(text.lower().split())
    return "".join(ch for ch in text if ch in allowed)


class CharContextModel(SoftmaxModel):

    architecture = "char_ngram"

    def __init__(self, alphabet: str, context_len: int, intercept: bool = True):
        if len(set(alphabet)) != len(alphabet):
            raise ValueError("alphabet contains duplicate symbols")
        if context_len < 1:
            raise ValueError("context_len must be >= 1")
        self.alphabet = alphabet
        self.context_len = int(context_len)
        self._index = {ch: i for i, ch in enumerate(alphabet)}
        super().__init__(dim=context_len * len(alphabet), classes=len(alphabet),
                         intercept=intercept)

    def encode(self, text: str) -> np.ndarray:
        try:
            return np.array([self._index[ch] for ch in text], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"symbol {exc.args[0]!r} outside alphabet")

    def _window_indices(self, codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """All (context, target) pairs of a coded sequence."""
        c = self.context_len
        if codes.shape[0] <= c:
            raise DataError(
                f"sequence of length {codes.shape[0]} shorter than context+1 ({c + 1})")
        ctx = np.lib.stride_tricks.sliding_window_view(codes[:-1], c)
        return ctx, codes[c:]

    def one_hot(self, ctx: np.ndarray) -> np.ndarray:
        n, c = ctx.shape
        a = len(self.alphabet)
        x = np.zeros((n, c * a))
        offs = np.arange(c) * a
        x[np.arange(n)[:, None], offs[None, :] + ctx] = 1.0
        return x

    def windows(self, text: str, name: str = "corpus") -> Dataset:
        """Sliding-window dataset over the corpus text."""
        ctx, targets = self._window_indices(self.encode(text))
        return Dataset(self.one_hot(ctx), targets, tuple(range(len(self.alphabet))),
                       name=name)

    def _window_bits(self, theta: np.ndarray, ctx: np.ndarray,
                     targets: np.ndarray) -> np.ndarray:
        """-log2 P(target | context) for each window, without materializing
        one-hot features."""
        a = len(self.alphabet)
        w = theta.reshape(self.classes, self.dim_aug)
        logits = np.zeros((ctx.shape[0], self.classes))
        for pos in range(self.context_len):
            logits += w[:, pos * a + ctx[:, pos]].T
        if self.intercept:
            logits += w[:, -1]
        lse = np.logaddexp.reduce(logits, axis=1)
        nll = lse - logits[np.arange(len(targets)), targets]
        return nll / np.log(2.0)

    def log_perplexity(self, params, text: str) -> float:
        """Total bits -sum_t log2 P(s_t | preceding context) over all
        positions with a full context window."""
        ctx, targets = self._window_indices(self.encode(text))
        return float(self._window_bits(params.theta, ctx, targets).sum())

    def sequence_bits(self, params, texts: list[str]) -> np.ndarray:
        """Vectorized log-perplexity for equal-length sequences."""
        if not texts:
            return np.zeros(0)
        length = len(texts[0])
        if any(len(t) != length for t in texts):
            raise DataError("sequences must share one length")
        codes = self.encode("".join(texts)).reshape(len(texts), length)
        c = self.context_len
        if length <= c:
            raise DataError(f"sequence of length {length} shorter than context+1 ({c + 1})")
        ctx = np.lib.stride_tricks.sliding_window_view(codes[:, :-1], c, axis=1)
        ctx = ctx.reshape(-1, c)
        targets = codes[:, c:].ravel()
        bits = self._window_bits(params.theta, ctx, targets)
        return bits.reshape(len(texts), length - c).sum(axis=1)
