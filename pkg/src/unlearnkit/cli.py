"""Command-line front end.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.
`UNLEARN_SEED` overrides every seed option and config seed when set.
Subcommands print a JSON summary on stdout; report-style outputs also land
as files (CSV next to rendered PNG figures) when an output location is
given.
"""

import json
import math
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import figures
from .baselines import fine_tune, retrain, sisa_predict, sisa_train, sisa_unlearn
from .certification import (CertificationBudget, certify, gradient_residual,
                            logreg_lipschitz_constants)
from .data import (Dataset, build_perturbations, load_csv,
                   parse_perturbation_spec, scale_to_unit_ball,
                   synth_blobs, synth_classification)
from .errors import UnlearnkitError
from .experiments import (DEFAULT_ALPHABET, ExperimentConfig, default_corpus,
                          emit_plotdata, emit_report, packaged_scenario_path,
                          run_experiment, write_plot_csv)
from .memorization import (CanarySpec, canary_perturbation, exposure_report,
                           insert_canary, unlearn_canary)
from .models import (CharContextModel, LogisticModel, LossConfig, MlpModel,
                     ModelParams, RidgeModel, SoftmaxModel, normalize_text)
from .serialize import load_model, save_model
from .sharding import (min_points_for_threshold, monte_carlo_all_affected,
                       prob_all_affected)
from .training import NoiseSpec, TrainConfig, sample_noise, train_convex, train_sgd
from .unlearning import (LissaConfig, first_order_update,
                         second_order_update_exact, second_order_update_lissa,
                         sequential_unlearn)


def resolve_seed(seed: int) -> int:
    env = os.environ.get("UNLEARN_SEED")
    if env is None:
        return seed
    try:
        return int(env)
    except ValueError:
        raise UnlearnkitError(f"UNLEARN_SEED must be an integer, got {env!r}")


def _emit(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


def _load_data(path: str, label_column: str, unit_ball: bool) -> Dataset:
    ds = load_csv(path, label_column)
    return scale_to_unit_ball(ds) if unit_ball else ds


def _load_pset(ds: Dataset, perturb: str):
    spec = parse_perturbation_spec(Path(perturb).read_text())
    return build_perturbations(ds, spec)


@click.group()
def cli():
    """Closed-form unlearning of features and labels, with certification."""


@cli.command()
@click.option("--n", default=200, show_default=True)
@click.option("--d", default=10, show_default=True)
@click.option("--separation", default=3.0, show_default=True)
@click.option("--classes", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def synth(n, d, separation, classes, seed, out):
    """Generate a synthetic classification CSV."""
    seed = resolve_seed(seed)
    if classes == 2:
        ds = synth_classification(n, d, separation, seed)
    else:
        ds = synth_blobs(n, d, classes, separation, seed)
    header = [f"f{j}" for j in range(d)] + ["label"]
    lines = [",".join(header)]
    for i in range(ds.n):
        lines.append(",".join([repr(float(v)) for v in ds.x[i]] + [str(int(ds.y[i]))]))
    Path(out).write_text("\n".join(lines) + "\n")
    _emit({"out": out, "n": ds.n, "d": ds.dim, "labels": list(ds.label_domain)})


@cli.command()
@click.option("--data", required=True, type=click.Path(dir_okay=False))
@click.option("--label-column", default="label", show_default=True)
@click.option("--model", "arch", default="logreg", show_default=True,
              type=click.Choice(["logreg", "ridge", "softmax", "mlp"]))
@click.option("--hidden", default=16, show_default=True)
@click.option("--intercept/--no-intercept", default=None)
@click.option("--lam", default=1.0, show_default=True)
@click.option("--noise", "noise_kind", default="none", show_default=True,
              type=click.Choice(["none", "gaussian", "exponential_l2"]))
@click.option("--sigma", default=0.0, show_default=True)
@click.option("--alpha", default=0.0, show_default=True)
@click.option("--tolerance", default=1e-8, show_default=True)
@click.option("--max-iters", default=200, show_default=True)
@click.option("--epochs", default=40, show_default=True)
@click.option("--lr", default=None, type=float)
@click.option("--seed", default=0, show_default=True)
@click.option("--unit-ball/--no-unit-ball", default=True, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def train(data, label_column, arch, hidden, intercept, lam, noise_kind, sigma,
          alpha, tolerance, max_iters, epochs, lr, seed, unit_ball, out):
    """Train a model on a CSV dataset and save it as JSON."""
    seed = resolve_seed(seed)
    ds = _load_data(data, label_column, unit_ball)
    classes = len(ds.label_domain)
    if arch == "logreg":
        if ds.label_domain != (-1, 1):
            raise UnlearnkitError(
                f"logreg expects labels -1/+1, dataset has {ds.label_domain}")
        model = LogisticModel(ds.dim, intercept=bool(intercept))
    elif arch == "ridge":
        model = RidgeModel(ds.dim, intercept=bool(intercept))
    elif arch == "softmax":
        model = SoftmaxModel(ds.dim, classes,
                             intercept=True if intercept is None else intercept)
    else:
        model = MlpModel(ds.dim, hidden, classes)
    nspec = NoiseSpec(kind=noise_kind, sigma=sigma, alpha=alpha, seed=seed)
    lcfg = LossConfig(lam=lam, noise=sample_noise(model.param_count, nspec),
                      kind=model.loss_kind)
    tcfg = TrainConfig(tolerance=tolerance, max_iters=max_iters, seed=seed,
                       epochs=epochs, learning_rate=lr)
    t0 = time.perf_counter()
    params = (train_convex(model, ds, tcfg, lcfg) if model.convex
              else train_sgd(model, ds, tcfg, lcfg))
    wall = time.perf_counter() - t0
    save_model(out, model, params, lam, nspec)
    g = model.grad(params.theta, ds, lcfg)
    _emit({"architecture": arch, "p": params.p, "n": ds.n, "d": ds.dim,
           "loss": model.loss(params.theta, ds, lcfg),
           "grad_norm": float(np.linalg.norm(g)),
           "wall_time_s": wall, "out": out})


def _lissa_from_flags(depth, repetitions, batch, damping, scale, seed):
    return LissaConfig(depth=depth, repetitions=repetitions, batch=batch,
                       damping=damping, scale=scale, seed=seed)


@cli.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--data", required=True, type=click.Path(dir_okay=False))
@click.option("--label-column", default="label", show_default=True)
@click.option("--perturb", required=True, type=click.Path(dir_okay=False))
@click.option("--method", default="second", show_default=True,
              type=click.Choice(["first", "second", "second-lissa"]))
@click.option("--tau", default=None, type=float)
@click.option("--batches", default=1, show_default=True)
@click.option("--mask", default="none", show_default=True,
              type=click.Choice(["none", "last_layer"]))
@click.option("--lissa-depth", default=200, show_default=True)
@click.option("--lissa-repetitions", default=4, show_default=True)
@click.option("--lissa-batch", default=1024, show_default=True)
@click.option("--lissa-damping", default=1e-4, show_default=True)
@click.option("--lissa-scale", default=None, type=float)
@click.option("--seed", default=0, show_default=True)
@click.option("--unit-ball/--no-unit-ball", default=True, show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def unlearn(model_path, data, label_column, perturb, method, tau, batches, mask,
            lissa_depth, lissa_repetitions, lissa_batch, lissa_damping,
            lissa_scale, seed, unit_ball, out):
    """Apply one closed-form unlearning update to a saved model."""
    seed = resolve_seed(seed)
    model, params, lcfg, _ = load_model(model_path)
    ds = _load_data(data, label_column, unit_ball)
    if ds.dim != getattr(model, "dim", ds.dim):
        raise UnlearnkitError(
            f"dataset dimension {ds.dim} does not match model dim {model.dim}")
    pset = _load_pset(ds, perturb)
    corrected = pset.apply(ds)
    mask_vec = model.last_layer_mask() if mask == "last_layer" else None
    method_key = method.replace("-", "_")
    _, before = gradient_residual(model, params, corrected, lcfg)
    lissa = _lissa_from_flags(lissa_depth, lissa_repetitions, lissa_batch,
                              lissa_damping, lissa_scale, seed)
    if batches > 1:
        res = sequential_unlearn(model, params, ds, pset, batches, method_key,
                                 lcfg, seed=seed, tau=tau, lissa=lissa,
                                 mask=mask_vec)
    elif method_key == "first":
        res = first_order_update(model, params, pset, tau=tau, ds=ds, lcfg=lcfg,
                                 mask=mask_vec, seed=seed)
    elif method_key == "second":
        res = second_order_update_exact(model, params, pset, corrected, lcfg,
                                        mask=mask_vec)
    else:
        res = second_order_update_lissa(model, params, pset, corrected, lcfg,
                                        cfg=lissa, mask=mask_vec)
    _, after = gradient_residual(model, res.new_params, corrected, lcfg)
    if out:
        save_model(out, model, res.new_params, lcfg.lam)
    _emit({"method": res.method, "residual_before": before,
           "residual_after": after,
           "delta_norm": float(np.linalg.norm(res.delta)),
           "grad_evals": res.gradient_count.grad_evals,
           "hvp_evals": res.gradient_count.hvp_evals,
           "wall_time_s": res.wall_time_s,
           "zcount": pset.size, "magnitude": pset.magnitude_total,
           "tau": res.info.get("tau"), "out": out})


@cli.command("certify")
@click.option("--model", "model_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--data", required=True, type=click.Path(dir_okay=False))
@click.option("--label-column", default="label", show_default=True)
@click.option("--perturb", default=None, type=click.Path(dir_okay=False))
@click.option("--epsilon", default=1.0, show_default=True)
@click.option("--delta", default=0.02, show_default=True)
@click.option("--sigma", default=None, type=float,
              help="Budget noise scale; defaults to the model's recorded sigma.")
@click.option("--tau", default=None, type=float)
@click.option("--t-steps", default=1, show_default=True)
@click.option("--unit-ball/--no-unit-ball", default=True, show_default=True)
def certify_cmd(model_path, data, label_column, perturb, epsilon, delta, sigma,
                tau, t_steps, unit_ball):
    """Measure the gradient residual of a saved model against a budget."""
    model, params, lcfg, nspec = load_model(model_path)
    ds = _load_data(data, label_column, unit_ball)
    pset = _load_pset(ds, perturb) if perturb else None
    corrected = pset.apply(ds) if pset else ds
    if sigma is None:
        sigma = nspec.sigma if nspec.kind == "gaussian" else 0.0
    budget = CertificationBudget(epsilon=epsilon, delta=delta, sigma=sigma)
    report = certify(model, params, corrected, budget, lcfg, pset=pset,
                     tau=tau, t_steps=t_steps)
    _emit(report.to_json())


@cli.command()
@click.option("--method", required=True,
              type=click.Choice(["retrain", "fine-tune", "sisa", "dp"]))
@click.option("--model", "model_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--data", required=True, type=click.Path(dir_okay=False))
@click.option("--label-column", default="label", show_default=True)
@click.option("--perturb", required=True, type=click.Path(dir_okay=False))
@click.option("--shards", default=5, show_default=True)
@click.option("--sigma", default=0.1, show_default=True)
@click.option("--tolerance", default=1e-8, show_default=True)
@click.option("--epochs", default=1, show_default=True)
@click.option("--lr", default=None, type=float)
@click.option("--seed", default=0, show_default=True)
@click.option("--unit-ball/--no-unit-ball", default=True, show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def baseline(method, model_path, data, label_column, perturb, shards, sigma,
             tolerance, epochs, lr, seed, unit_ball, out):
    """Run a reference strategy on the same perturbation."""
    seed = resolve_seed(seed)
    model, params, lcfg, _ = load_model(model_path)
    ds = _load_data(data, label_column, unit_ball)
    pset = _load_pset(ds, perturb)
    corrected = pset.apply(ds)
    tcfg = TrainConfig(tolerance=tolerance, seed=seed, epochs=epochs,
                       learning_rate=lr)
    summary = {"method": method, "zcount": pset.size,
               "magnitude": pset.magnitude_total}
    snap = model.counter.snapshot()
    t0 = time.perf_counter()
    if method == "retrain":
        new_params = retrain(model, corrected, tcfg, lcfg)
    elif method == "fine-tune":
        new_params = fine_tune(model, params, corrected, tcfg, lcfg)
    elif method == "sisa":
        ens = sisa_train(model, ds, shards, tcfg, lcfg, seed=seed)
        snap = model.counter.snapshot()
        t0 = time.perf_counter()
        ens2, touched = sisa_unlearn(model, ens, pset, tcfg, lcfg)
        summary.update({"shards": shards, "shards_retrained": touched,
                        "train_accuracy": float(
                            (sisa_predict(model, ens2, corrected.x)
                             == corrected.y).mean())})
        new_params = None
    else:
        from .baselines import dp_only
        new_params, lcfg = dp_only(model, ds, sigma, tcfg, lcfg.lam, seed=seed)
        summary["sigma"] = sigma
    wall = time.perf_counter() - t0
    count = model.counter.delta_since(snap)
    summary.update({"wall_time_s": wall, "grad_evals": count.grad_evals,
                    "hvp_evals": count.hvp_evals})
    if new_params is not None:
        _, rnorm = gradient_residual(model, new_params, corrected, lcfg)
        summary["residual_norm"] = rnorm
        if out:
            save_model(out, model, new_params, lcfg.lam)
            summary["out"] = out
    _emit(summary)


@cli.command("shard-prob")
@click.option("--shards", "-s", default=None, type=int)
@click.option("--points", "-n", default=None, type=int)
@click.option("--threshold", default=None, type=float)
@click.option("--grid", default=None,
              help="Comma-separated shard counts; sweeps n from s to 10s each.")
@click.option("--trials", default=0, show_default=True,
              help="Add a Monte-Carlo estimate with this many trials.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="CSV destination for grid sweeps.")
@click.option("--fig", default=None, type=click.Path(dir_okay=False),
              help="PNG destination for the sweep figure.")
def shard_prob(shards, points, threshold, grid, trials, seed, out, fig):
    """Probability that a change set touches every shard."""
    seed = resolve_seed(seed)
    if grid:
        rows = []
        for s in (int(v) for v in grid.split(",")):
            for n in range(s, 10 * s + 1, max(1, s // 2)):
                rec = {"s": s, "n": n, "p_exact": prob_all_affected(s, n)}
                if trials:
                    rec["p_mc"] = monte_carlo_all_affected(s, n, trials,
                                                           seed=seed)
                rows.append(rec)
        cols = ["s", "n", "p_exact"] + (["p_mc"] if trials else [])
        if out:
            write_plot_csv(rows, cols, out)
        if fig:
            figures.render_shard_prob(rows, fig)
        _emit({"rows": len(rows), "out": out, "fig": fig})
        return
    if shards is None:
        raise click.UsageError("--shards is required without --grid")
    if threshold is not None:
        _emit({"s": shards, "threshold": threshold,
               "min_points": min_points_for_threshold(shards, threshold)})
        return
    if points is None:
        raise click.UsageError("--points or --threshold is required")
    result = {"s": shards, "n": points, "p": prob_all_affected(shards, points)}
    if trials:
        result["p_mc"] = monte_carlo_all_affected(shards, points, trials,
                                                  seed=seed)
    _emit(result)


@cli.command()
@click.option("--corpus", default=None, type=click.Path(dir_okay=False),
              help="Plain-text corpus; defaults to the bundled one.")
@click.option("--alphabet", default=DEFAULT_ALPHABET, show_default=False)
@click.option("--context", default=4, show_default=True)
@click.option("--template", default="the secret code is {} now. ", show_default=True)
@click.option("--secret", default="6174", show_default=True)
@click.option("--repetitions", default=50, show_default=True)
@click.option("--hole-alphabet", default="0123456789", show_default=True)
@click.option("--lam", default=2.0, show_default=True)
@click.option("--tolerance", default=1e-6, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--method", default="second", show_default=True,
              type=click.Choice(["none", "first", "second", "second-lissa",
                                 "fine-tune", "retrain"]))
@click.option("--replacement", multiple=True,
              help="Candidate replacement text(s); the lowest post-removal "
                   "exposure wins. Defaults to '0000'.")
@click.option("--tau", default=None, type=float)
@click.option("--out-dir", default=None, type=click.Path(file_okay=False))
def exposure(corpus, alphabet, context, template, secret, repetitions,
             hole_alphabet, lam, tolerance, seed, method, replacement, tau,
             out_dir):
    """Plant a canary, train the character model, and measure exposure
    before/after unlearning."""
    seed = resolve_seed(seed)
    text = Path(corpus).read_text() if corpus else default_corpus()
    text = normalize_text(text, alphabet)
    spec = CanarySpec(template=template, secret=secret, repetitions=repetitions,
                      hole_alphabet=hole_alphabet)
    model = CharContextModel(alphabet, context)
    seeded = insert_canary(text, spec, seed=seed)
    ds = model.windows(seeded)
    lcfg = LossConfig(lam=lam, kind=model.loss_kind)
    tcfg = TrainConfig(tolerance=tolerance, seed=seed)
    params = train_convex(model, ds, tcfg, lcfg)
    before = exposure_report(model, params, spec)
    result = {"secret": secret, "candidates": before.candidates,
              "exposure_before": before.exposure, "rank_before": before.rank,
              "method": method, "n": ds.n, "p": model.param_count}
    after = None
    chosen = None
    if method != "none":
        candidates = list(replacement) or ["0000"]
        best = None
        for cand in candidates:
            if method in ("first", "second", "second-lissa"):
                removal = unlearn_canary(model, params, seeded, spec, cand,
                                         method.replace("-", "_"), lcfg, tau=tau,
                                         lissa=LissaConfig(seed=seed))
                cand_after = removal.after
                extra = {"replacement_rank": removal.replacement_rank,
                         "wall_time_s": removal.update.wall_time_s,
                         "grad_evals": removal.update.gradient_count.grad_evals,
                         "hvp_evals": removal.update.gradient_count.hvp_evals}
            else:
                pset, corpus_new = canary_perturbation(model, seeded, spec, cand)
                ds_new = model.windows(corpus_new)
                t0 = time.perf_counter()
                if method == "retrain":
                    new_params = retrain(model, ds_new, tcfg, lcfg)
                else:
                    new_params = fine_tune(model, params, ds_new,
                                           TrainConfig(seed=seed, epochs=1), lcfg)
                cand_after = exposure_report(model, new_params, spec)
                extra = {"wall_time_s": time.perf_counter() - t0}
            if best is None or cand_after.exposure < best[1].exposure:
                best = (cand, cand_after, extra)
        chosen, after, extra = best
        result.update({"replacement": chosen, "replacements_tried": candidates,
                       "exposure_after": after.exposure,
                       "rank_after": after.rank,
                       "extractable_after": after.extractable, **extra})
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "exposure.json").write_text(
            json.dumps(result, indent=2, sort_keys=True) + "\n")
        if before.scores is not None:
            write_plot_csv([{"bits": float(b)} for b in np.sort(before.scores)],
                           ["bits"], out / "scores_before.csv")
            figures.render_score_hist(before.scores, before.log_perplexity,
                                      out / "hist_before.png")
        if after is not None and after.scores is not None:
            write_plot_csv([{"bits": float(b)} for b in np.sort(after.scores)],
                           ["bits"], out / "scores_after.csv")
            figures.render_score_hist(after.scores, after.log_perplexity,
                                      out / "hist_after.png")
        result["out_dir"] = str(out)
    _emit(result)


@cli.command()
@click.option("--config", required=True,
              help="Config JSON path, or the name of a packaged scenario.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--jobs", default=1, show_default=True)
def benchmark(config, out, jobs):
    """Run a full experiment config and write reports, plot CSVs, and
    figures into a directory."""
    path = Path(config)
    if not path.exists() and "/" not in config and not config.endswith(".json"):
        path = packaged_scenario_path(config)
    cfg = ExperimentConfig.from_json(path)
    env = os.environ.get("UNLEARN_SEED")
    if env is not None:
        cfg = ExperimentConfig(**{**cfg.to_dict(), "seed": int(env)})
    report = run_experiment(cfg, jobs=jobs)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_report(report, "json", out_dir / "report.json")
    emit_report(report, "csv", out_dir / "report.csv")
    rendered = []
    if cfg.scenario == "shard_prob":
        wanted = ["shard_prob"]
    elif cfg.scenario == "canary":
        wanted = ["exposure_bars"]
    else:
        wanted = ["residual_bars", "loss_scatter"]
    for name in wanted:
        rows, cols = emit_plotdata(report, name)
        if not rows:
            continue
        write_plot_csv(rows, cols, out_dir / f"{name}.csv")
        render = getattr(figures, f"render_{name}")
        render(rows, out_dir / f"{name}.png")
        rendered.append(name)
    _emit({"out": str(out_dir), "records": len(report.records),
           "figures": rendered})


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (UnlearnkitError, OSError, ValueError, ArithmeticError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
