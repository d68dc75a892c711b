"""Datasets and perturbation primitives.

A perturbation describes which training points change and how: feature
values replaced, whole feature columns revoked, or labels swapped. The
compiled form (:class:`PerturbationSet`) carries the original points Z,
their corrected versions Z-tilde, and the per-dimension change magnitudes
used by the certification bounds.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DataError, NothingToUnlearnError, PerturbationError


@dataclass(frozen=True)
class DataPoint:
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """Immutable (x, y) pairs with a fixed label domain.

    `x` is (n, d) float64, `y` is (n,) int64 with values drawn from
    `label_domain`. Arrays are marked read-only on construction.
    """

    x: np.ndarray
    y: np.ndarray
    label_domain: tuple[int, ...]
    name: str = "dataset"
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if x.ndim != 2:
            raise DataError(f"features must be 2-d, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise DataError(f"labels shape {y.shape} does not match {x.shape[0]} rows")
        if x.shape[0] < 1:
            raise DataError("dataset must contain at least one point")
        if not np.all(np.isfinite(x)):
            bad = np.argwhere(~np.isfinite(x))[0]
            raise DataError(f"non-finite feature at row {bad[0]}, column {bad[1]}")
        domain = tuple(sorted(set(int(v) for v in self.label_domain)))
        if len(domain) < 2:
            raise DataError("label domain needs at least two classes")
        if not np.all(np.isin(y, domain)):
            bad = int(np.argwhere(~np.isin(y, domain))[0][0])
            raise DataError(f"label {y[bad]} at row {bad} outside domain {domain}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "label_domain", domain)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.n

    def point(self, i: int) -> DataPoint:
        return DataPoint(self.x[i], int(self.y[i]))

    def replace(self, **kwargs) -> "Dataset":
        fields = {
            "x": self.x,
            "y": self.y,
            "label_domain": self.label_domain,
            "name": self.name,
            "meta": dict(self.meta),
        }
        fields.update(kwargs)
        return Dataset(**fields)

    def take(self, indices: np.ndarray, name: str | None = None) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.x[idx].copy(), self.y[idx].copy(), self.label_domain,
                       name or self.name, dict(self.meta))


def datasets_equal(a: Dataset, b: Dataset) -> bool:
    return (a.label_domain == b.label_domain
            and a.x.shape == b.x.shape
            and np.array_equal(a.x, b.x)
            and np.array_equal(a.y, b.y))


def load_csv(path: str | Path, label_column: str) -> Dataset:
    """Load a headered CSV into a Dataset.

    All non-label columns are parsed as float features. Errors name the
    offending row and column.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r} in header {header}")
        label_idx = header.index(label_column)
        feat_names = [h for i, h in enumerate(header) if i != label_idx]
        rows, labels = [], []
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: row {rownum} has {len(row)} cells, expected {len(header)}")
            feats = []
            for i, cell in enumerate(row):
                if i == label_idx:
                    try:
                        labels.append(int(float(cell)))
                    except ValueError:
                        raise DataError(f"{path}: row {rownum}, column {header[i]!r}: "
                                        f"bad label {cell!r}")
                else:
                    try:
                        feats.append(float(cell))
                    except ValueError:
                        raise DataError(f"{path}: row {rownum}, column {header[i]!r}: "
                                        f"bad value {cell!r}")
            rows.append(feats)
    if not rows:
        raise DataError(f"{path}: no data rows")
    x = np.array(rows, dtype=np.float64)
    y = np.array(labels, dtype=np.int64)
    domain = tuple(sorted(set(int(v) for v in y)))
    ds = Dataset(x, y, domain, name=path.stem)
    ds.meta["feature_names"] = feat_names
    return ds


def split(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle-split; the first part gets ceil(fraction * n) points."""
    if not 0.0 < fraction < 1.0:
        raise DataError(f"split fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n)
    k = math.ceil(fraction * ds.n)
    if k == ds.n:
        raise DataError(f"fraction {fraction} leaves the second split empty for n={ds.n}")
    return (ds.take(perm[:k], name=ds.name + "/a"),
            ds.take(perm[k:], name=ds.name + "/b"))


def synth_classification(n: int, d: int, separation: float, seed: int,
                         cluster_std: float = 1.0) -> Dataset:
    """Two spherical Gaussian clusters along a random unit direction.

    Cluster means sit at +/- (separation / 2) * u; labels are -1/+1.
    """
    if n < 2 or d < 1:
        raise DataError("need n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    u = rng.normal(size=d)
    u /= np.linalg.norm(u)
    y = rng.integers(0, 2, size=n) * 2 - 1
    # guard against an all-one-class draw
    if np.all(y == y[0]):
        y[rng.integers(0, n)] = -y[0]
    x = rng.normal(scale=cluster_std, size=(n, d)) + np.outer(y, (separation / 2.0) * u)
    return Dataset(x, y, (-1, 1), name=f"synth(n={n},d={d})")


def synth_blobs(n: int, d: int, classes: int, separation: float, seed: int,
                cluster_std: float = 1.0) -> Dataset:
    """`classes` Gaussian blobs with random orthogonal-ish mean directions."""
    if classes < 2:
        raise DataError("need at least two classes")
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(classes, d))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    means *= separation / 2.0
    y = rng.integers(0, classes, size=n)
    for c in range(classes):
        if not np.any(y == c):
            y[rng.integers(0, n)] = c
    x = rng.normal(scale=cluster_std, size=(n, d)) + means[y]
    return Dataset(x, y.astype(np.int64), tuple(range(classes)),
                   name=f"blobs(n={n},d={d},k={classes})")


def scale_to_unit_ball(ds: Dataset) -> Dataset:
    """Rescale features so the largest row norm is exactly 1. Idempotent."""
    norms = np.linalg.norm(ds.x, axis=1)
    m = float(norms.max())
    if m == 0.0:
        raise DataError("cannot scale an all-zero feature matrix")
    if abs(m - 1.0) <= 4 * np.finfo(np.float64).eps:
        return ds
    out = ds.replace(x=ds.x / m)
    out.meta["unit_ball_scale"] = m * ds.meta.get("unit_ball_scale", 1.0)
    return out


# --- perturbation specs -----------------------------------------------------

@dataclass(frozen=True)
class ReplaceFeatures:
    """Overwrite the listed feature columns of the listed points.

    `values` is either a scalar (broadcast) or a (len(points), len(features))
    nested list / array of per-point replacements.
    """
    points: tuple[int, ...]
    features: tuple[int, ...]
    values: Union[float, tuple]

    kind = "replace_features"


@dataclass(frozen=True)
class RevokeFeatures:
    """Zero the listed feature columns everywhere; affected points are those
    with a nonzero entry in any revoked column."""
    features: tuple[int, ...]

    kind = "revoke_features"


@dataclass(frozen=True)
class ReplaceLabels:
    """Swap the labels of the listed points; features stay untouched."""
    points: tuple[int, ...]
    labels: tuple[int, ...]

    kind = "replace_labels"


PerturbationSpec = Union[ReplaceFeatures, RevokeFeatures, ReplaceLabels]


def _check_unique(name: str, seq) -> tuple[int, ...]:
    out = tuple(int(v) for v in seq)
    if len(set(out)) != len(out):
        raise PerturbationError(f"duplicate {name} indices: {sorted(out)}")
    return out


def parse_perturbation_spec(obj: Union[str, dict]) -> PerturbationSpec:
    """Build a spec from its JSON form (string or already-parsed dict)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "kind" not in obj:
        raise PerturbationError("perturbation spec must be an object with a 'kind' key")
    kind = obj["kind"]
    try:
        if kind == "replace_features":
            values = obj["values"]
            if isinstance(values, list):
                values = tuple(tuple(float(v) for v in row) for row in values)
            else:
                values = float(values)
            return ReplaceFeatures(points=_check_unique("point", obj["points"]),
                                   features=_check_unique("feature", obj["features"]),
                                   values=values)
        if kind == "revoke_features":
            return RevokeFeatures(features=_check_unique("feature", obj["features"]))
        if kind == "replace_labels":
            return ReplaceLabels(points=_check_unique("point", obj["points"]),
                                 labels=tuple(int(v) for v in obj["labels"]))
    except KeyError as exc:
        raise PerturbationError(f"spec kind {kind!r} is missing key {exc}")
    raise PerturbationError(f"unknown perturbation kind {kind!r}")


def spec_to_json(spec: PerturbationSpec) -> dict:
    if isinstance(spec, ReplaceFeatures):
        values = spec.values
        if isinstance(values, tuple):
            values = [list(row) for row in values]
        return {"kind": spec.kind, "points": list(spec.points),
                "features": list(spec.features), "values": values}
    if isinstance(spec, RevokeFeatures):
        return {"kind": spec.kind, "features": list(spec.features)}
    if isinstance(spec, ReplaceLabels):
        return {"kind": spec.kind, "points": list(spec.points),
                "labels": list(spec.labels)}
    raise PerturbationError(f"not a perturbation spec: {spec!r}")


@dataclass(frozen=True)
class PerturbationSet:
    """Compiled perturbation: original points Z and replacements Z-tilde.

    `affected` holds row indices into the source dataset. `magnitude_per_dim`
    maps changed feature index j to m_j = max_i |x_new[i, j] - x_old[i, j]|;
    `magnitude_total` is their sum (0 for pure label changes).
    """

    affected: np.ndarray
    x_old: np.ndarray
    y_old: np.ndarray
    x_new: np.ndarray
    y_new: np.ndarray
    magnitude_per_dim: dict[int, float]
    magnitude_total: float

    def __post_init__(self):
        for arr in (self.affected, self.x_old, self.y_old, self.x_new, self.y_new):
            np.asarray(arr).setflags(write=False)

    @property
    def size(self) -> int:
        return int(self.affected.shape[0])

    def apply(self, ds: Dataset, name_suffix: str = "/corrected") -> Dataset:
        """Return the corrected dataset D' with affected rows replaced."""
        if self.size and int(self.affected.max()) >= ds.n:
            raise PerturbationError(
                f"affected index {int(self.affected.max())} out of range for n={ds.n}")
        x = ds.x.copy()
        y = ds.y.copy()
        x[self.affected] = self.x_new
        y[self.affected] = self.y_new
        return Dataset(x, y, ds.label_domain, ds.name + name_suffix, dict(ds.meta))

    def inverse(self) -> "PerturbationSet":
        """Swap originals and replacements; applying both is the identity."""
        return PerturbationSet(self.affected, self.x_new.copy(), self.y_new.copy(),
                               self.x_old.copy(), self.y_old.copy(),
                               dict(self.magnitude_per_dim), self.magnitude_total)

    def subset(self, keep: np.ndarray,
               renumber: dict[int, int] | None = None) -> "PerturbationSet":
        """Restrict to the affected indices listed in `keep`.

        `renumber` optionally remaps the surviving global indices (used when
        the subset lives in its own dataset, e.g. one shard).
        """
        keep = np.asarray(keep, dtype=np.int64)
        mask = np.isin(self.affected, keep)
        affected = self.affected[mask]
        if renumber is not None:
            affected = np.array([renumber[int(i)] for i in affected], dtype=np.int64)
        sub = PerturbationSet(affected, self.x_old[mask].copy(), self.y_old[mask].copy(),
                              self.x_new[mask].copy(), self.y_new[mask].copy(),
                              {}, 0.0)
        per_dim = _magnitudes(sub.x_old, sub.x_new)
        object.__setattr__(sub, "magnitude_per_dim", per_dim)
        object.__setattr__(sub, "magnitude_total", float(sum(per_dim.values())))
        return sub


def _magnitudes(x_old: np.ndarray, x_new: np.ndarray) -> dict[int, float]:
    if x_old.size == 0:
        return {}
    diff = np.abs(x_new - x_old).max(axis=0)
    return {int(j): float(diff[j]) for j in np.nonzero(diff)[0]}


def build_perturbations(ds: Dataset, spec: PerturbationSpec) -> PerturbationSet:
    """Compile a spec against a dataset into an explicit (Z, Z-tilde) pair."""
    if isinstance(spec, ReplaceFeatures):
        points = np.asarray(spec.points, dtype=np.int64)
        feats = np.asarray(spec.features, dtype=np.int64)
        _validate_indices(points, ds.n, "point")
        _validate_indices(feats, ds.dim, "feature")
        if points.size == 0:
            raise NothingToUnlearnError("replace_features with no target points")
        values = spec.values
        if isinstance(values, tuple):
            vals = np.asarray(values, dtype=np.float64)
            if vals.shape != (points.size, feats.size):
                raise PerturbationError(
                    f"values shape {vals.shape} != (points, features) "
                    f"({points.size}, {feats.size})")
        else:
            vals = np.full((points.size, feats.size), float(values))
        x_old = ds.x[points].copy()
        x_new = x_old.copy()
        x_new[:, feats] = vals
        y = ds.y[points].copy()
        per_dim = _magnitudes(x_old, x_new)
        return PerturbationSet(points, x_old, y, x_new, y.copy(),
                               per_dim, float(sum(per_dim.values())))

    if isinstance(spec, RevokeFeatures):
        feats = np.asarray(spec.features, dtype=np.int64)
        _validate_indices(feats, ds.dim, "feature")
        if feats.size == 0:
            raise PerturbationError("revoke_features needs at least one feature")
        affected = np.nonzero(np.any(ds.x[:, feats] != 0.0, axis=1))[0]
        if affected.size == 0:
            raise NothingToUnlearnError(
                f"features {list(map(int, feats))} are zero everywhere")
        x_old = ds.x[affected].copy()
        x_new = x_old.copy()
        x_new[:, feats] = 0.0
        y = ds.y[affected].copy()
        per_dim = _magnitudes(x_old, x_new)
        return PerturbationSet(affected, x_old, y, x_new, y.copy(),
                               per_dim, float(sum(per_dim.values())))

    if isinstance(spec, ReplaceLabels):
        points = np.asarray(spec.points, dtype=np.int64)
        _validate_indices(points, ds.n, "point")
        if points.size == 0:
            raise NothingToUnlearnError("replace_labels with no target points")
        labels = np.asarray(spec.labels, dtype=np.int64)
        if labels.shape != points.shape:
            raise PerturbationError(
                f"{labels.size} labels for {points.size} points")
        bad = ~np.isin(labels, ds.label_domain)
        if np.any(bad):
            raise PerturbationError(
                f"replacement label {int(labels[bad][0])} outside domain {ds.label_domain}")
        x = ds.x[points].copy()
        return PerturbationSet(points, x, ds.y[points].copy(), x.copy(), labels,
                               {}, 0.0)

    raise PerturbationError(f"unknown spec type {type(spec).__name__}")


def _validate_indices(idx: np.ndarray, bound: int, what: str) -> None:
    if idx.size != np.unique(idx).size:
        raise PerturbationError(f"duplicate {what} indices")
    if idx.size and (idx.min() < 0 or idx.max() >= bound):
        raise PerturbationError(
            f"{what} index out of range [0, {bound}): {int(idx.min())}..{int(idx.max())}")
