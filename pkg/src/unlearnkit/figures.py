"""Matplotlib renderings of the plot tables emitted next to each report."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_residual_bars(rows: list[dict], path) -> None:
    """Median residual per method with interquartile whiskers, log scale."""
    methods = [r["method"] for r in rows]
    med = np.array([r["median"] for r in rows])
    lo = med - np.array([r["q25"] for r in rows])
    hi = np.array([r["q75"] for r in rows]) - med
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(methods, med, yerr=[lo, hi], capsize=4, color="#4878a8")
    ax.set_yscale("log")
    ax.set_ylabel("gradient residual norm")
    ax.set_title("Residual after unlearning")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_loss_scatter(rows: list[dict], path) -> None:
    """Per-repetition test loss of each method against full retraining."""
    fig, ax = plt.subplots(figsize=(5, 5))
    methods = sorted({r["method"] for r in rows})
    for method in methods:
        pts = [(r["retrain_test_loss"], r["test_loss"])
               for r in rows if r["method"] == method]
        if pts:
            xs, ys = zip(*pts)
            ax.scatter(xs, ys, s=18, alpha=0.7, label=method)
    lims = ax.get_xlim() + ax.get_ylim()
    lo, hi = min(lims), max(lims)
    ax.plot([lo, hi], [lo, hi], "k--", linewidth=0.8)
    ax.set_xlabel("retrain test loss")
    ax.set_ylabel("method test loss")
    ax.set_title("Test loss vs retraining")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_shard_prob(rows: list[dict], path) -> None:
    """Probability that every shard is affected, per shard count."""
    fig, ax = plt.subplots(figsize=(6, 4))
    shard_counts = sorted({r["s"] for r in rows})
    for s in shard_counts:
        sub = sorted((r for r in rows if r["s"] == s), key=lambda r: r["n"])
        ns = [r["n"] for r in sub]
        ax.plot(ns, [r["p_exact"] for r in sub], label=f"s={s}")
        if any("p_mc" in r and r["p_mc"] is not None for r in sub):
            ax.plot(ns, [r.get("p_mc") for r in sub], "o", markersize=3,
                    color=ax.lines[-1].get_color())
    ax.set_xlabel("changed points n")
    ax.set_ylabel("P(all shards affected)")
    ax.set_xscale("log")
    ax.set_title("Sharding coverage probability")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_score_hist(scores: np.ndarray, secret_bits: float, path,
                      bins: int = 80) -> None:
    """Distribution of candidate log-perplexities with the secret marked."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(scores, bins=bins, color="#7aa06e")
    ax.axvline(secret_bits, color="crimson", linewidth=1.2, label="secret")
    ax.set_xlabel("log-perplexity (bits)")
    ax.set_ylabel("candidates")
    ax.set_title("Hole-candidate score distribution")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_exposure_bars(rows: list[dict], path) -> None:
    """Median exposure before and after removal, per method."""
    methods = [r["method"] for r in rows]
    x = np.arange(len(methods))
    before = [r["exposure_before"] for r in rows]
    after = [r["exposure_after"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(x - 0.2, before, width=0.4, label="before", color="#a85454")
    ax.bar(x + 0.2, after, width=0.4, label="after", color="#4878a8")
    ax.set_xticks(x, methods)
    ax.set_ylabel("exposure (bits)")
    ax.set_title("Canary exposure per method")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
