"""Static SVG diagnostics: traces, autocorrelations, violins, heatmap."""

import matplotlib
matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.cluster.hierarchy import dendrogram


def _save(fig, path):
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return path


def trace_plot(series, path, title=""):
    fig, ax = plt.subplots(figsize=(7, 2.5))
    ax.plot(np.asarray(series), lw=0.7)
    ax.set_xlabel("stored sample")
    ax.set_title(title)
    return _save(fig, path)


def acf(series, max_lag=50):
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    denom = (x * x).sum()
    if denom == 0:
        return np.ones(min(max_lag, len(x) - 1) + 1)
    lags = range(min(max_lag, len(x) - 1) + 1)
    return np.array([(x[:len(x) - lag] * x[lag:]).sum() / denom
                     for lag in lags])


def acf_plot(series, path, title="", max_lag=50):
    rho = acf(series, max_lag)
    fig, ax = plt.subplots(figsize=(7, 2.5))
    ax.bar(np.arange(len(rho)), rho, width=0.6)
    ax.axhline(0, color="k", lw=0.5)
    ax.set_xlabel("lag")
    ax.set_ylabel("acf")
    ax.set_title(title)
    return _save(fig, path)


def violin_plot(samples, labels, path, title="", observed=None, log_scale=False):
    """Marginal posterior violins; optional observed values as red bars."""
    samples = [np.asarray(s, dtype=float) for s in samples]
    fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(labels)), 4))
    positions = np.arange(1, len(labels) + 1)
    if log_scale:
        ax.set_yscale("log")
        samples = [np.clip(s, 1e-300, None) for s in samples]
    ax.violinplot(samples, positions=positions, widths=0.8,
                  showmedians=True)
    if observed is not None:
        ax.plot(positions, observed, "_", color="red", markersize=12,
                markeredgewidth=1.6, label="observed")
        ax.legend(loc="best", frameon=False)
    ax.set_xticks(positions)
    ax.set_xticklabels(labels, rotation=90, fontsize=7)
    ax.set_title(title)
    return _save(fig, path)


def heatmap_with_dendrogram(dissim, path, title=""):
    """Co-clustering dissimilarity heatmap, leaves ordered by the tree."""
    dnd = dendrogram(dissim.linkage, no_plot=True)
    order = dnd["leaves"]
    d = dissim.values[np.ix_(order, order)]
    labels = [dissim.labels[i] for i in order]
    fig, (ax_top, ax_hm) = plt.subplots(
        2, 1, figsize=(9, 11),
        gridspec_kw={"height_ratios": [1, 4], "hspace": 0.02})
    dendrogram(dissim.linkage, ax=ax_top, no_labels=True,
               color_threshold=0.5)
    ax_top.set_xticks([])
    ax_top.set_yticks([0, 0.5, 1])
    im = ax_hm.imshow(d, cmap="Blues_r", vmin=0.0, vmax=1.0,
                      interpolation="nearest", aspect="auto")
    ax_hm.set_xticks(range(len(labels)))
    ax_hm.set_xticklabels(labels, rotation=90, fontsize=6)
    ax_hm.set_yticks(range(len(labels)))
    ax_hm.set_yticklabels(labels, fontsize=6)
    fig.colorbar(im, ax=ax_hm, shrink=0.7, label="dissimilarity")
    ax_top.set_title(title)
    return _save(fig, path)


def source_comparison_plot(summary_frame, path, baseline_frame=None,
                           title="attributed proportion per source"):
    """Median + CI per source, optionally next to a baseline's intervals."""
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = np.arange(len(summary_frame))
    med = summary_frame["median"].to_numpy(dtype=float)
    lo = summary_frame["ci_lower"].to_numpy(dtype=float)
    hi = summary_frame["ci_upper"].to_numpy(dtype=float)
    ax.errorbar(xs - 0.1, med, yerr=[med - lo, hi - med], fmt="o",
                capsize=3, label="model")
    if baseline_frame is not None:
        bmed = baseline_frame["median"].to_numpy(dtype=float)
        blo = baseline_frame["ci_lower"].to_numpy(dtype=float)
        bhi = baseline_frame["ci_upper"].to_numpy(dtype=float)
        ax.errorbar(xs + 0.1, bmed, yerr=[bmed - blo, bhi - bmed], fmt="s",
                    capsize=3, label="baseline")
        ax.legend(frameon=False)
    ax.set_xticks(xs)
    labels = summary_frame["source"] if "source" in summary_frame else xs
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_title(title)
    return _save(fig, path)
