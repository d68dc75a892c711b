"""Canary memorization and its removal.

A canary is a templated sentence with a secret hole, repeated through the
corpus. Memorization is measured by exposure: log2 |Q| - log2 rank, where
the rank of the secret is counted among all |Q| = |alphabet|^L hole
fillings by ascending log-perplexity (strictly-lower scores precede, so
ties share the best rank). Exposure reaches log2 |Q| exactly when the
secret is the single most likely filling, the regime where greedy
extraction succeeds.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .data import PerturbationSet, _magnitudes
from .errors import ConvergenceError, DataError, PerturbationError
from .models.base import LossConfig, ModelParams
from .models.charlm import CharContextModel
from .unlearning import (LissaConfig, UpdateResult, default_unlearning_rate,
                         first_order_update, second_order_update_exact,
                         second_order_update_lissa)

_CHUNK = 100_000


@dataclass(frozen=True)
class CanarySpec:
    """Template with exactly one `{}` hole, the secret that fills it, and
    how often the filled sentence is planted.

    The template must carry its own surrounding spacing so that insertion
    grows the corpus by exactly repetitions * len(canary) characters.
    """

    template: str
    secret: str
    repetitions: int = 50
    hole_alphabet: str = "0123456789"
    max_candidates: int = 10 ** 7

    def __post_init__(self):
        if self.template.count("{}") != 1:
            raise DataError("template needs exactly one {} hole")
        if not self.secret:
            raise DataError("secret must be nonempty")
        if len(set(self.hole_alphabet)) != len(self.hole_alphabet) or not self.hole_alphabet:
            raise DataError("hole alphabet must be nonempty without duplicates")
        bad = set(self.secret) - set(self.hole_alphabet)
        if bad:
            raise DataError(f"secret symbols {sorted(bad)} outside the hole alphabet")
        if self.repetitions < 1:
            raise DataError("repetitions must be >= 1")

    @property
    def canary(self) -> str:
        return self.template.format(self.secret)

    @property
    def candidates(self) -> int:
        count = len(self.hole_alphabet) ** len(self.secret)
        if count > self.max_candidates:
            raise DataError(
                f"candidate set of size {count} exceeds the cap {self.max_candidates}")
        return count


def insert_canary(corpus: str, spec: CanarySpec, seed: int = 0) -> str:
    """Plant the filled canary `repetitions` times at seeded positions just
    after existing spaces. Output length is len(corpus) +
    repetitions * len(canary)."""
    canary = spec.canary
    positions = [i + 1 for i, ch in enumerate(corpus) if ch == " "]
    if len(positions) < spec.repetitions:
        raise DataError(
            f"corpus offers {len(positions)} insertion points, "
            f"need {spec.repetitions}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(positions), size=spec.repetitions, replace=False)
    out = corpus
    for i in sorted((positions[c] for c in chosen), reverse=True):
        out = out[:i] + canary + out[i:]
    return out


def _check_alphabets(model: CharContextModel, spec: CanarySpec) -> None:
    missing = set(spec.hole_alphabet) - set(model.alphabet)
    if missing:
        raise DataError(
            f"hole symbols {sorted(missing)} outside the model alphabet")


@dataclass(frozen=True)
class ExposureReport:
    secret: str
    log_perplexity: float
    rank: int
    candidates: int
    exposure: float
    extractable: bool
    notes: tuple[str, ...] = ()
    scores: np.ndarray | None = field(default=None, compare=False, repr=False)

    def to_json(self) -> dict:
        return {
            "secret": self.secret,
            "log_perplexity": self.log_perplexity,
            "rank": self.rank,
            "candidates": self.candidates,
            "exposure": self.exposure,
            "extractable": self.extractable,
            "notes": list(self.notes),
        }


def _candidate_scores(model: CharContextModel, params: ModelParams,
                      spec: CanarySpec):
    """Yield (strings, bits) for every hole filling, in chunks."""
    total = spec.candidates
    keep = total <= 10 ** 6
    it = itertools.product(spec.hole_alphabet, repeat=len(spec.secret))
    while True:
        block = list(itertools.islice(it, _CHUNK))
        if not block:
            return
        texts = [spec.template.format("".join(c)) for c in block]
        yield keep, model.sequence_bits(params, texts)


def exact_rank(model: CharContextModel, params: ModelParams,
               spec: CanarySpec) -> tuple[int, np.ndarray | None]:
    """Rank of the secret among all hole fillings (1 = best; strictly lower
    scores precede, ties share the rank). Returns the per-candidate scores
    too while the candidate set is small enough to keep."""
    _check_alphabets(model, spec)
    secret_bits = float(model.sequence_bits(params, [spec.canary])[0])
    lower = 0
    kept = []
    for keep, bits in _candidate_scores(model, params, spec):
        lower += int((bits < secret_bits).sum())
        if keep:
            kept.append(bits)
    scores = np.concatenate(kept) if kept else None
    return 1 + lower, scores


def rank_of_string(model: CharContextModel, params: ModelParams,
                   spec: CanarySpec, filling: str) -> tuple[int, float]:
    """Rank of an arbitrary same-length filling against the candidate set.
    The filling itself need not belong to the hole alphabet."""
    if len(filling) != len(spec.secret):
        raise DataError(
            f"filling length {len(filling)} != secret length {len(spec.secret)}")
    bits = float(model.sequence_bits(params, [spec.template.format(filling)])[0])
    lower = 0
    for _, block in _candidate_scores(model, params, spec):
        lower += int((block < bits).sum())
    return 1 + lower, bits


def exposure_report(model: CharContextModel, params: ModelParams,
                    spec: CanarySpec) -> ExposureReport:
    rank, scores = exact_rank(model, params, spec)
    total = spec.candidates
    exposure = math.log2(total) - math.log2(rank)
    notes = []
    if scores is not None:
        ties = int((scores == float(model.sequence_bits(params, [spec.canary])[0])).sum())
        if ties == total:
            notes.append("degenerate: all-tie")
    return ExposureReport(secret=spec.secret,
                          log_perplexity=float(
                              model.sequence_bits(params, [spec.canary])[0]),
                          rank=rank, candidates=total, exposure=exposure,
                          extractable=exposure >= math.log2(total),
                          notes=tuple(notes), scores=scores)


def canary_perturbation(model: CharContextModel, corpus: str, spec: CanarySpec,
                        replacement: str) -> tuple[PerturbationSet, str]:
    """Pair every training window touched by the secret with its
    replacement-text version.

    The replacement must have the secret's length so window positions stay
    aligned; the perturbation covers each window whose context-or-target
    span overlaps a changed corpus position.
    """
    if len(replacement) != len(spec.secret):
        raise PerturbationError(
            f"replacement length {len(replacement)} != secret length "
            f"{len(spec.secret)}")
    canary = spec.canary
    if canary not in corpus:
        raise PerturbationError("corpus does not contain the filled canary")
    corpus_new = corpus.replace(canary, spec.template.format(replacement))
    codes_old = model.encode(corpus)
    codes_new = model.encode(corpus_new)
    changed = np.nonzero(codes_old != codes_new)[0]
    if changed.size == 0:
        raise PerturbationError("replacement text equals the secret")
    c = model.context_len
    n_windows = codes_old.shape[0] - c
    mask = np.zeros(n_windows, dtype=bool)
    for pos in changed:
        lo = max(0, pos - c)
        hi = min(n_windows - 1, pos)
        if lo <= hi:
            mask[lo:hi + 1] = True
    affected = np.nonzero(mask)[0]
    ds_old = model.windows(corpus)
    ds_new = model.windows(corpus_new)
    x_old = ds_old.x[affected].copy()
    x_new = ds_new.x[affected].copy()
    per_dim = _magnitudes(x_old, x_new)
    pset = PerturbationSet(affected, x_old, ds_old.y[affected].copy(),
                           x_new, ds_new.y[affected].copy(),
                           per_dim, float(sum(per_dim.values())))
    return pset, corpus_new


@dataclass(frozen=True)
class CanaryRemoval:
    params_after: ModelParams
    before: ExposureReport
    after: ExposureReport
    replacement: str
    replacement_rank: int
    replacement_bits: float
    update: UpdateResult
    corpus_after: str


def calibrate_tau_for_exposure(model: CharContextModel, params: ModelParams,
                               corpus: str, spec: CanarySpec, replacement: str,
                               lcfg: LossConfig, target: float = 2.0,
                               grid_factor: float = 1.5,
                               max_steps: int = 30) -> "CanaryRemoval":
    """First-order removal at the smallest rate on a geometric grid that
    drives the secret's exposure below `target`.

    The grid starts at the curvature-based default rate and multiplies by
    `grid_factor` until the exposure test passes; larger rates trade model
    quality for removal strength, so the first passing rate is kept.
    """
    if target <= 0:
        raise ValueError(f"target exposure must be > 0, got {target}")
    if grid_factor <= 1.0:
        raise ValueError(f"grid factor must be > 1, got {grid_factor}")
    ds = model.windows(corpus)
    tau = default_unlearning_rate(model, params, ds, lcfg)
    for _ in range(max_steps):
        removal = unlearn_canary(model, params, corpus, spec, replacement,
                                 "first", lcfg, tau=tau)
        if removal.after.exposure < target:
            return removal
        tau *= grid_factor
    raise ConvergenceError(
        f"no rate on the {max_steps}-step grid reached exposure < {target}; "
        f"last tried {tau / grid_factor:.3e}")


def unlearn_canary(model: CharContextModel, params: ModelParams, corpus: str,
                   spec: CanarySpec, replacement: str, method: str,
                   lcfg: LossConfig, tau: float | None = None,
                   lissa: LissaConfig | None = None) -> CanaryRemoval:
    """Replace the secret with neutral text via one unlearning update and
    report exposure before and after, plus the exposure the replacement
    itself picked up."""
    _check_alphabets(model, spec)
    pset, corpus_new = canary_perturbation(model, corpus, spec, replacement)
    before = exposure_report(model, params, spec)
    if method == "first":
        ds = model.windows(corpus)
        res = first_order_update(model, params, pset, tau=tau, ds=ds, lcfg=lcfg)
    elif method == "second":
        res = second_order_update_exact(model, params, pset,
                                        model.windows(corpus_new), lcfg)
    elif method == "second_lissa":
        res = second_order_update_lissa(model, params, pset,
                                        model.windows(corpus_new), lcfg,
                                        cfg=lissa)
    else:
        raise ValueError(f"unknown update method {method!r}")
    after = exposure_report(model, res.new_params, spec)
    repl_rank, repl_bits = rank_of_string(model, res.new_params, spec, replacement)
    return CanaryRemoval(params_after=res.new_params, before=before,
                         after=after, replacement=replacement,
                         replacement_rank=repl_rank, replacement_bits=repl_bits,
                         update=res, corpus_after=corpus_new)
