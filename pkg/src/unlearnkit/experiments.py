"""Experiment orchestration: seeded scenario instances, method sweeps, and
report emission (JSON/CSV plus plot-ready tables).

Scenarios:
  sensitive_features  planted sparse columns are revoked from a logistic model
  label_flips         poisoned labels are corrected on a small MLP
  canary              a memorized secret is removed from a character model
  shard_prob          exact vs Monte-Carlo all-shards-affected probabilities
"""

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .baselines import dp_only, fine_tune, retrain, sisa_predict, sisa_train, sisa_unlearn
from .certification import CertificationBudget, certify
from .data import (Dataset, RevokeFeatures, ReplaceLabels, build_perturbations,
                   scale_to_unit_ball, split, synth_blobs, synth_classification)
from .errors import UnlearnkitError
from .memorization import CanarySpec, exposure_report, insert_canary, unlearn_canary
from .models import (CharContextModel, LogisticModel, LossConfig, MlpModel,
                     Model, ModelParams, RidgeModel, SoftmaxModel, normalize_text)
from .sharding import monte_carlo_all_affected, prob_all_affected
from .training import NoiseSpec, TrainConfig, sample_noise, train_sgd
from .unlearning import (LissaConfig, first_order_update, second_order_update_exact,
                         second_order_update_lissa, sequential_unlearn)

DEFAULT_ALPHABET = "0123456789 .acdefghilmnoprstuw"

_SCENARIOS = ("sensitive_features", "label_flips", "canary", "shard_prob")


def default_corpus() -> str:
    text = resources.files("unlearnkit").joinpath("assets/corpus.txt").read_text()
    return normalize_text(text, DEFAULT_ALPHABET)


def packaged_scenarios() -> dict[str, Path]:
    """Name -> path of the experiment configs shipped with the package."""
    root = resources.files("unlearnkit").joinpath("assets/scenarios")
    return {p.name.removesuffix(".json"): Path(str(p))
            for p in root.iterdir() if p.name.endswith(".json")}


def packaged_scenario_path(name: str) -> Path:
    found = packaged_scenarios()
    if name not in found:
        raise UnlearnkitError(
            f"unknown packaged scenario {name!r}; available: {sorted(found)}")
    return found[name]


def derive_seed(*parts: int) -> int:
    """Stable small-int seed derived from a tuple of integers."""
    ss = np.random.SeedSequence([int(p) & 0x7FFFFFFF for p in parts])
    return int(ss.generate_state(1)[0])


# --- scenario instances ------------------------------------------------------

def revocation_instance(seed: int, n: int = 200, dense_dim: int = 12,
                        sparse_cols: int = 4, affected: int = 15,
                        magnitude: float = 0.1, separation: float = 3.0,
                        test_fraction: float = 0.25):
    """Binary classification data with planted label-correlated sparse
    columns, plus the perturbation revoking those columns.

    The dense block is scaled into the unit ball with headroom so feature
    norms stay <= 1 after planting; the total change magnitude M is at most
    `magnitude` and exactly `affected` training rows are touched.
    """
    rng = np.random.default_rng(seed)
    n_total = math.ceil(n / (1.0 - test_fraction))
    base = synth_classification(n_total, dense_dim, separation, seed)
    base = scale_to_unit_ball(base)
    dense = base.x * (1.0 - magnitude)
    x = np.hstack([dense, np.zeros((n_total, sparse_cols))])
    train_rows = np.arange(n)
    z = rng.choice(n, size=affected, replace=False)
    per_col = magnitude / sparse_cols
    cols = dense_dim + np.arange(sparse_cols)
    for k, col in enumerate(cols):
        owners = z[k::sparse_cols] if affected >= sparse_cols else z
        extra = z[rng.random(affected) < 0.3]
        rows = np.union1d(owners, extra)
        x[rows, col] = base.y[rows] * per_col * rng.uniform(0.5, 1.0, size=rows.size)
    ds = Dataset(x, base.y, base.label_domain, name=f"revocation(seed={seed})")
    train = ds.take(train_rows, name=ds.name + "/train")
    test = ds.take(np.arange(n, n_total), name=ds.name + "/test")
    return train, test, RevokeFeatures(features=tuple(int(c) for c in cols))


def label_flip_instance(seed: int, n: int = 600, dim: int = 8, classes: int = 3,
                        flip_fraction: float = 0.1, pair: tuple[int, int] = (0, 1),
                        separation: float = 4.0, test_fraction: float = 0.25):
    """Gaussian-blob data where a seeded fraction of two classes' training
    labels are swapped; the perturbation restores the true labels."""
    a, b = pair
    n_total = math.ceil(n / (1.0 - test_fraction))
    ds = synth_blobs(n_total, dim, classes, separation, seed)
    train = ds.take(np.arange(n), name=ds.name + "/train")
    test = ds.take(np.arange(n, n_total), name=ds.name + "/test")
    rng = np.random.default_rng(derive_seed(seed, 1))
    eligible = np.nonzero(np.isin(train.y, [a, b]))[0]
    k = max(1, round(flip_fraction * eligible.size))
    flip = rng.choice(eligible, size=k, replace=False)
    flipped = train.y.copy()
    flipped[flip] = np.where(flipped[flip] == a, b, a)
    poisoned = train.replace(y=flipped, name=train.name + "/poisoned")
    true_labels = tuple(int(v) for v in train.y[np.sort(flip)])
    spec = ReplaceLabels(points=tuple(int(i) for i in np.sort(flip)),
                         labels=true_labels)
    return poisoned, test, spec


# --- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    seed: int = 0
    repetitions: int = 20
    methods: tuple[str, ...] = ("none", "first", "second", "retrain")
    data: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    perturbation: dict = field(default_factory=dict)
    unlearning: dict = field(default_factory=dict)
    budget: dict | None = None
    sisa: dict = field(default_factory=dict)
    canary: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in _SCENARIOS:
            raise UnlearnkitError(
                f"unknown scenario {self.scenario!r}; expected one of {_SCENARIOS}")
        if self.repetitions < 1:
            raise UnlearnkitError("repetitions must be >= 1")
        object.__setattr__(self, "methods", tuple(self.methods))

    @classmethod
    def from_json(cls, obj: str | dict | Path) -> "ExperimentConfig":
        if isinstance(obj, Path):
            obj = obj.read_text()
        if isinstance(obj, str):
            obj = json.loads(obj)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise UnlearnkitError(f"unknown config keys: {sorted(extra)}")
        return cls(**obj)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


@dataclass
class ExperimentReport:
    config: dict
    records: list[dict]

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "records": self.records},
                          indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        obj = json.loads(text)
        return cls(config=obj["config"], records=obj["records"])


# --- tabular scenarios -------------------------------------------------------

def _build_model(cfg: ExperimentConfig, dim: int, classes: int) -> Model:
    kind = cfg.model.get("kind", "logreg")
    if kind == "logreg":
        return LogisticModel(dim, intercept=cfg.model.get("intercept", False))
    if kind == "ridge":
        return RidgeModel(dim, intercept=cfg.model.get("intercept", False))
    if kind == "softmax":
        return SoftmaxModel(dim, classes, intercept=cfg.model.get("intercept", True))
    if kind == "mlp":
        return MlpModel(dim, cfg.model.get("hidden", 16), classes)
    raise UnlearnkitError(f"unknown model kind {kind!r}")


def _train_cfg(cfg: ExperimentConfig, seed: int) -> TrainConfig:
    t = cfg.training
    return TrainConfig(tolerance=t.get("tolerance", 1e-8),
                       max_iters=t.get("max_iters", 200),
                       seed=seed,
                       epochs=t.get("epochs", 40),
                       learning_rate=t.get("learning_rate"))


def _loss_cfg(cfg: ExperimentConfig, model: Model, seed: int) -> LossConfig:
    lam = cfg.training.get("lam", 1.0)
    sigma = (cfg.budget or {}).get("sigma", 0.0)
    noise = None
    if sigma:
        noise = sample_noise(model.param_count,
                             NoiseSpec(kind="gaussian", sigma=sigma, seed=seed))
    return LossConfig(lam=lam, noise=noise, kind=model.loss_kind)


def _budget(cfg: ExperimentConfig) -> CertificationBudget | None:
    if not cfg.budget:
        return None
    b = cfg.budget
    return CertificationBudget(epsilon=b.get("epsilon", 1.0),
                               delta=b.get("delta", 0.02),
                               sigma=b.get("sigma", 0.0))


def _mask_for(model: Model, cfg: ExperimentConfig):
    name = cfg.unlearning.get("mask", "none")
    if name in (None, "none", ""):
        return None
    if name == "last_layer":
        if not isinstance(model, MlpModel):
            raise UnlearnkitError("last_layer mask needs an mlp model")
        return model.last_layer_mask()
    raise UnlearnkitError(f"unknown mask {name!r}")


def _test_metrics(model: Model, params: ModelParams, test: Dataset) -> tuple[float, float]:
    plain = LossConfig(lam=0.0, kind=model.loss_kind)
    loss = model.loss(params.theta, test, plain) / test.n
    acc = float((model.predict(params, test.x) == test.y).mean())
    return float(loss), acc


def _lissa_cfg(cfg: ExperimentConfig, seed: int) -> LissaConfig:
    raw = dict(cfg.unlearning.get("lissa", {}))
    raw.setdefault("seed", seed)
    return LissaConfig(**raw)


def run_tabular_rep(cfg: ExperimentConfig, rep: int) -> list[dict]:
    if cfg.scenario == "sensitive_features":
        p = cfg.perturbation
        train, test, spec = revocation_instance(
            derive_seed(cfg.seed, rep),
            n=cfg.data.get("n", 200), dense_dim=cfg.data.get("d", 12),
            sparse_cols=p.get("sparse_cols", 4), affected=p.get("affected", 15),
            magnitude=p.get("magnitude", 0.1),
            separation=cfg.data.get("separation", 3.0),
            test_fraction=cfg.data.get("test_fraction", 0.25))
        classes = 2
    else:
        p = cfg.perturbation
        train, test, spec = label_flip_instance(
            derive_seed(cfg.seed, rep),
            n=cfg.data.get("n", 600), dim=cfg.data.get("d", 8),
            classes=cfg.data.get("classes", 3),
            flip_fraction=p.get("flip_fraction", 0.1),
            pair=tuple(p.get("pair", (0, 1))),
            separation=cfg.data.get("separation", 4.0),
            test_fraction=cfg.data.get("test_fraction", 0.25))
        classes = cfg.data.get("classes", 3)

    model = _build_model(cfg, train.dim, classes)
    lcfg = _loss_cfg(cfg, model, derive_seed(cfg.seed, rep, 17))
    tcfg = _train_cfg(cfg, derive_seed(cfg.seed, rep, 29))
    params = retrain(model, train, tcfg, lcfg)
    pset = build_perturbations(train, spec)
    corrected = pset.apply(train)
    budget = _budget(cfg)
    mask = _mask_for(model, cfg)
    tau = cfg.unlearning.get("tau")
    batches = cfg.unlearning.get("batches", 1)

    snap = model.counter.snapshot()
    t0 = time.perf_counter()
    retrain_params = retrain(model, corrected, tcfg, lcfg)
    retrain_wall = time.perf_counter() - t0
    retrain_count = model.counter.delta_since(snap)
    retrain_loss, retrain_acc = _test_metrics(model, retrain_params, test)

    base = {"rep": rep, "scenario": cfg.scenario, "n": train.n,
            "p": model.param_count, "zcount": pset.size,
            "magnitude": pset.magnitude_total}
    records = []
    methods = list(cfg.methods)
    if "retrain" not in methods:
        methods.append("retrain")
    for method in methods:
        rec = dict(base)
        rec["method"] = method
        try:
            if method == "retrain":
                after, wall, count = retrain_params, retrain_wall, retrain_count
            elif method == "none":
                after, wall, count = params, 0.0, model.counter.delta_since(
                    model.counter.snapshot())
            elif method in ("first", "second", "second_lissa") and batches > 1:
                res = sequential_unlearn(
                    model, params, train, pset, batches, method, lcfg,
                    seed=derive_seed(cfg.seed, rep, 31), tau=tau,
                    lissa=_lissa_cfg(cfg, derive_seed(cfg.seed, rep, 37)),
                    mask=mask)
                after, wall, count = res.new_params, res.wall_time_s, res.gradient_count
            elif method == "first":
                res = first_order_update(model, params, pset, tau=tau, ds=train,
                                         lcfg=lcfg, mask=mask,
                                         seed=derive_seed(cfg.seed, rep, 41))
                after, wall, count = res.new_params, res.wall_time_s, res.gradient_count
                rec["tau"] = res.info["tau"]
            elif method == "second":
                res = second_order_update_exact(model, params, pset, corrected,
                                                lcfg, mask=mask)
                after, wall, count = res.new_params, res.wall_time_s, res.gradient_count
            elif method == "second_lissa":
                res = second_order_update_lissa(
                    model, params, pset, corrected, lcfg,
                    cfg=_lissa_cfg(cfg, derive_seed(cfg.seed, rep, 37)), mask=mask)
                after, wall, count = res.new_params, res.wall_time_s, res.gradient_count
            elif method == "fine_tune":
                snap = model.counter.snapshot()
                t0 = time.perf_counter()
                after = fine_tune(model, params, corrected,
                                  _train_cfg(cfg, derive_seed(cfg.seed, rep, 43)),
                                  lcfg)
                wall = time.perf_counter() - t0
                count = model.counter.delta_since(snap)
            elif method == "sisa":
                shards = cfg.sisa.get("shards", 5)
                ens = sisa_train(model, train, shards, tcfg, lcfg,
                                 seed=derive_seed(cfg.seed, rep, 47))
                snap = model.counter.snapshot()
                t0 = time.perf_counter()
                ens2, touched = sisa_unlearn(model, ens, pset, tcfg, lcfg)
                wall = time.perf_counter() - t0
                count = model.counter.delta_since(snap)
                acc = float((sisa_predict(model, ens2, test.x) == test.y).mean())
                rec.update({"wall_time_s": wall, "grad_evals": count.grad_evals,
                            "hvp_evals": count.hvp_evals, "test_accuracy": acc,
                            "shards": shards, "shards_retrained": touched,
                            "residual_norm": None, "test_loss": None,
                            "test_loss_delta_vs_retrain": None})
                records.append(rec)
                continue
            elif method == "dp":
                sigma = (cfg.budget or {}).get("sigma", 0.0)
                dp_params, dp_lcfg = dp_only(model, train, sigma, tcfg,
                                             cfg.training.get("lam", 1.0),
                                             seed=derive_seed(cfg.seed, rep, 53))
                after, wall = dp_params, 0.0
                count = model.counter.delta_since(model.counter.snapshot())
                lcfg_m = dp_lcfg
            else:
                raise UnlearnkitError(f"unknown method {method!r}")

            lcfg_m = lcfg if method != "dp" else lcfg_m
            g = model.grad(after.theta, corrected, lcfg_m)
            loss, acc = _test_metrics(model, after, test)
            rec.update({
                "residual_norm": float(np.linalg.norm(g)),
                "test_loss": loss,
                "test_accuracy": acc,
                "test_loss_delta_vs_retrain": loss - retrain_loss,
                "grad_evals": count.grad_evals,
                "hvp_evals": count.hvp_evals,
                "wall_time_s": wall,
            })
            if budget is not None and model.convex:
                rep_tau = rec.get("tau", tau)
                report = certify(model, after, corrected, budget, lcfg_m,
                                 pset=pset, tau=rep_tau, t_steps=batches,
                                 method=method)
                rec["certified"] = report.certified
                rec["effective_epsilon"] = (
                    None if not math.isfinite(report.effective_epsilon)
                    else report.effective_epsilon)
                rec["beta"] = report.beta
        except UnlearnkitError as exc:
            rec["error"] = f"{type(exc).__name__}: {exc}"
        records.append(rec)
    records.sort(key=lambda r: (r["rep"], r["method"]))
    return records


# --- canary scenario ---------------------------------------------------------

def run_canary_rep(cfg: ExperimentConfig, rep: int) -> list[dict]:
    c = cfg.canary
    alphabet = c.get("alphabet", DEFAULT_ALPHABET)
    context_len = c.get("context_len", 4)
    if c.get("corpus"):
        corpus = normalize_text(Path(c["corpus"]).read_text(), alphabet)
    else:
        corpus = normalize_text(default_corpus(), alphabet)
    spec = CanarySpec(template=c.get("template", "the secret code is {} now. "),
                      secret=c.get("secret", "6174"),
                      repetitions=c.get("repetitions", 50),
                      hole_alphabet=c.get("hole_alphabet", "0123456789"))
    replacement = c.get("replacement", "0000")
    model = CharContextModel(alphabet, context_len)
    seeded = insert_canary(corpus, spec, seed=derive_seed(cfg.seed, rep))
    ds = model.windows(seeded)
    lcfg = _loss_cfg(cfg, model, derive_seed(cfg.seed, rep, 17))
    tcfg = _train_cfg(cfg, derive_seed(cfg.seed, rep, 29))
    params = retrain(model, ds, tcfg, lcfg)
    before = exposure_report(model, params, spec)

    records = []
    base = {"rep": rep, "scenario": "canary", "n": ds.n, "p": model.param_count,
            "secret": spec.secret, "exposure_before": before.exposure,
            "rank_before": before.rank}
    for method in cfg.methods:
        rec = dict(base)
        rec["method"] = method
        try:
            if method in ("first", "second", "second_lissa"):
                removal = unlearn_canary(
                    model, params, seeded, spec, replacement, method, lcfg,
                    tau=cfg.unlearning.get("tau"),
                    lissa=_lissa_cfg(cfg, derive_seed(cfg.seed, rep, 37)))
                after, wall = removal.after, removal.update.wall_time_s
                count = removal.update.gradient_count
                rec["replacement_rank"] = removal.replacement_rank
                rec["zcount"] = int(count.grad_evals // 2)
            elif method in ("retrain", "fine_tune"):
                from .memorization import canary_perturbation
                pset, corpus_new = canary_perturbation(model, seeded, spec,
                                                       replacement)
                ds_new = model.windows(corpus_new)
                snap = model.counter.snapshot()
                t0 = time.perf_counter()
                if method == "retrain":
                    new_params = retrain(model, ds_new, tcfg, lcfg)
                else:
                    new_params = fine_tune(
                        model, params, ds_new,
                        _train_cfg(cfg, derive_seed(cfg.seed, rep, 43)), lcfg)
                wall = time.perf_counter() - t0
                count = model.counter.delta_since(snap)
                after = exposure_report(model, new_params, spec)
            else:
                raise UnlearnkitError(f"method {method!r} not available for canary")
            rec.update({"exposure_after": after.exposure, "rank_after": after.rank,
                        "grad_evals": count.grad_evals, "hvp_evals": count.hvp_evals,
                        "wall_time_s": wall})
        except UnlearnkitError as exc:
            rec["error"] = f"{type(exc).__name__}: {exc}"
        records.append(rec)
    return records


# --- shard sweep ---------------------------------------------------------------

def run_shard_sweep(cfg: ExperimentConfig) -> list[dict]:
    p = cfg.perturbation
    shard_counts = p.get("shards", [2, 5, 20, 50])
    trials = p.get("trials", 0)
    records = []
    for s in shard_counts:
        points = p.get("points") or list(range(s, 10 * s + 1, max(1, s // 2)))
        for n in points:
            rec = {"scenario": "shard_prob", "s": int(s), "n": int(n),
                   "p_exact": prob_all_affected(s, n)}
            if trials:
                rec["p_mc"] = monte_carlo_all_affected(
                    s, n, trials, seed=derive_seed(cfg.seed, s, n))
            records.append(rec)
    return records


# --- top level -----------------------------------------------------------------

def _rep_runner(args):
    cfg_dict, rep = args
    cfg = ExperimentConfig(**cfg_dict)
    if cfg.scenario == "canary":
        return run_canary_rep(cfg, rep)
    return run_tabular_rep(cfg, rep)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Execute every repetition of the configured scenario.

    Records appear ordered by repetition index regardless of `jobs`; seeds
    are derived per repetition, so parallel and sequential runs agree.
    """
    if cfg.scenario == "shard_prob":
        return ExperimentReport(cfg.to_dict(), run_shard_sweep(cfg))
    reps = range(cfg.repetitions)
    if jobs > 1:
        work = [(cfg.to_dict(), r) for r in reps]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_rep_runner, work))
    else:
        chunks = [_rep_runner((cfg.to_dict(), r)) for r in reps]
    records = [rec for chunk in chunks for rec in chunk]
    return ExperimentReport(cfg.to_dict(), records)


# --- emission --------------------------------------------------------------------

def emit_report(report: ExperimentReport, fmt: str = "json",
                path: str | Path | None = None) -> str:
    """Serialize a report canonically; identical reports yield identical
    bytes. CSV rows keep record order with a stable column union."""
    if fmt == "json":
        text = report.to_json()
    elif fmt == "csv":
        cols: list[str] = []
        for rec in report.records:
            for key in rec:
                if key not in cols:
                    cols.append(key)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=cols, restval="",
                                lineterminator="\n")
        writer.writeheader()
        for rec in report.records:
            writer.writerow({k: _cell(v) for k, v in rec.items()})
        text = buf.getvalue()
    else:
        raise UnlearnkitError(f"unknown report format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


_FIGURES = ("residual_bars", "loss_scatter", "shard_prob", "exposure_bars")


def emit_plotdata(report: ExperimentReport, figure: str) -> tuple[list[dict], list[str]]:
    """Rows + column names backing one figure."""
    if figure == "residual_bars":
        by_method: dict[str, list[float]] = {}
        for rec in report.records:
            r = rec.get("residual_norm")
            if r is not None and "error" not in rec:
                by_method.setdefault(rec["method"], []).append(r)
        rows = []
        for method, vals in by_method.items():
            arr = np.asarray(vals)
            rows.append({"method": method,
                         "median": float(np.median(arr)),
                         "q25": float(np.quantile(arr, 0.25)),
                         "q75": float(np.quantile(arr, 0.75)),
                         "count": arr.size})
        return rows, ["method", "median", "q25", "q75", "count"]
    if figure == "loss_scatter":
        retrain_loss = {rec["rep"]: rec["test_loss"] for rec in report.records
                        if rec.get("method") == "retrain"
                        and rec.get("test_loss") is not None}
        rows = [{"rep": rec["rep"], "method": rec["method"],
                 "test_loss": rec["test_loss"],
                 "retrain_test_loss": retrain_loss.get(rec["rep"])}
                for rec in report.records
                if rec.get("test_loss") is not None
                and rec.get("method") not in ("retrain",)
                and rec["rep"] in retrain_loss]
        return rows, ["rep", "method", "test_loss", "retrain_test_loss"]
    if figure == "shard_prob":
        rows = [rec for rec in report.records if rec.get("scenario") == "shard_prob"]
        cols = ["s", "n", "p_exact"] + (["p_mc"] if any("p_mc" in r for r in rows) else [])
        return [{k: r.get(k) for k in cols} for r in rows], cols
    if figure == "exposure_bars":
        by_method: dict[str, list[tuple[float, float]]] = {}
        for rec in report.records:
            if "error" not in rec and rec.get("exposure_after") is not None:
                by_method.setdefault(rec["method"], []).append(
                    (rec["exposure_before"], rec["exposure_after"]))
        rows = []
        for method, vals in by_method.items():
            arr = np.asarray(vals)
            rows.append({"method": method,
                         "exposure_before": float(np.median(arr[:, 0])),
                         "exposure_after": float(np.median(arr[:, 1])),
                         "count": arr.shape[0]})
        return rows, ["method", "exposure_before", "exposure_after", "count"]
    raise UnlearnkitError(f"unknown figure {figure!r}; expected one of {_FIGURES}")


def write_plot_csv(rows: list[dict], cols: list[str], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, restval="", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
