"""Reference strategies the closed-form updates are compared against:
retraining from scratch, catch-up fine-tuning, sharded training with
per-shard retraining, and static differential-privacy noise."""

from dataclasses import dataclass

import numpy as np

from .data import Dataset, PerturbationSet
from .errors import DataError
from .models.base import LossConfig, Model, ModelParams
from .training import NoiseSpec, TrainConfig, sample_noise, train_convex, train_sgd


def retrain(model: Model, ds_corrected: Dataset, tcfg: TrainConfig,
            lcfg: LossConfig) -> ModelParams:
    """Train from scratch on the corrected dataset (exact removal)."""
    if model.convex:
        return train_convex(model, ds_corrected, tcfg, lcfg)
    return train_sgd(model, ds_corrected, tcfg, lcfg)


def fine_tune(model: Model, params: ModelParams, ds_corrected: Dataset,
              tcfg: TrainConfig, lcfg: LossConfig) -> ModelParams:
    """Continue stochastic training from the current parameters on the
    corrected data. The default schedule is one epoch at rate 0.1 / n."""
    return train_sgd(model, ds_corrected, tcfg, lcfg, theta0=params.theta)


@dataclass(frozen=True)
class SisaEnsemble:
    """Shard assignment plus one trained member per shard."""

    shards: int
    assignment: np.ndarray
    members: tuple[ModelParams, ...]
    shard_data: tuple[Dataset, ...]
    shard_rows: tuple[np.ndarray, ...]
    label_domain: tuple[int, ...]
    seed: int

    def __post_init__(self):
        self.assignment.setflags(write=False)


def sisa_train(model: Model, ds: Dataset, shards: int, tcfg: TrainConfig,
               lcfg: LossConfig, seed: int = 0) -> SisaEnsemble:
    """Assign points to shards uniformly i.i.d. under the seed and train one
    member per shard with the shared hyperparameters."""
    if shards < 1:
        raise DataError(f"need at least one shard, got {shards}")
    if shards > ds.n:
        raise DataError(f"more shards ({shards}) than points ({ds.n})")
    rng = np.random.default_rng(seed)
    assignment = rng.integers(0, shards, size=ds.n)
    members, shard_data, shard_rows = [], [], []
    for s in range(shards):
        rows = np.nonzero(assignment == s)[0]
        if rows.size == 0:
            raise DataError(
                f"shard {s} received no points under seed {seed}; use fewer shards")
        sub = ds.take(rows, name=f"{ds.name}/shard{s}")
        members.append(retrain(model, sub, tcfg, lcfg))
        shard_data.append(sub)
        shard_rows.append(rows)
    return SisaEnsemble(shards, assignment, tuple(members), tuple(shard_data),
                        tuple(shard_rows), ds.label_domain, seed)


def sisa_predict(model: Model, ensemble: SisaEnsemble,
                 x: np.ndarray) -> np.ndarray:
    """Majority vote over shard members; ties go to the lowest class id."""
    x = np.atleast_2d(x)
    domain = np.asarray(ensemble.label_domain)
    counts = np.zeros((x.shape[0], domain.size), dtype=np.int64)
    for member in ensemble.members:
        pred = model.predict(member, x)
        cols = np.searchsorted(domain, pred)
        counts[np.arange(x.shape[0]), cols] += 1
    return domain[counts.argmax(axis=1)]


def sisa_unlearn(model: Model, ensemble: SisaEnsemble, pset: PerturbationSet,
                 tcfg: TrainConfig, lcfg: LossConfig) -> tuple[SisaEnsemble, int]:
    """Retrain exactly the shards containing affected points.

    Returns the updated ensemble and the number of members retrained;
    untouched members are reused as-is.
    """
    touched = np.unique(ensemble.assignment[pset.affected])
    members = list(ensemble.members)
    shard_data = list(ensemble.shard_data)
    for s in touched:
        rows = ensemble.shard_rows[s]
        renumber = {int(g): i for i, g in enumerate(rows)}
        local = pset.subset(rows, renumber=renumber)
        corrected = local.apply(shard_data[s], name_suffix="")
        members[s] = retrain(model, corrected, tcfg, lcfg)
        shard_data[s] = corrected
    updated = SisaEnsemble(ensemble.shards, ensemble.assignment.copy(),
                           tuple(members), tuple(shard_data),
                           ensemble.shard_rows, ensemble.label_domain,
                           ensemble.seed)
    return updated, int(touched.size)


def dp_only(model: Model, ds: Dataset, sigma: float, tcfg: TrainConfig,
            lam: float, seed: int = 0) -> tuple[ModelParams, LossConfig]:
    """Train once under Gaussian objective noise and never update again.

    Returns the parameters and the noisy loss config so residuals of later
    perturbations can be measured against the same objective.
    """
    if sigma < 0:
        raise DataError(f"sigma must be >= 0, got {sigma}")
    noise = sample_noise(model.param_count,
                         NoiseSpec(kind="gaussian", sigma=sigma, seed=seed))
    lcfg = LossConfig(lam=lam, noise=noise, kind=model.loss_kind)
    params = retrain(model, ds, tcfg, lcfg)
    return params, lcfg
