"""Posterior extraction, summaries, co-clustering and correlations."""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.cluster.hierarchy import linkage

from .data import ValidationError

PARAM_DIMS = {
    "alpha": ("time", "location", "source"),
    "r": ("source", "time", "type"),
    "q": ("type",),
    "c": ("type",),
    "n_clusters": (),
    "lambda_i": ("type", "time", "location"),
    "lambda_j": ("source", "time", "location"),
    "lambda_j_prop": ("source", "time", "location"),
}

_DIM_TO_LABELKEY = {"type": "types", "source": "sources", "time": "times",
                    "location": "locations"}
_SELECTOR_TO_DIM = {"types": "type", "sources": "source", "times": "time",
                    "locations": "location"}


def _label_indices(requested, available, dim):
    idx = []
    for lab in requested:
        lab = str(lab)
        if lab not in available:
            raise ValidationError(
                f"unknown {dim} label {lab!r}; valid labels: {available}")
        idx.append(available.index(lab))
    return idx


def extract(chain, params=None, iterations=None, flatten=False, **selectors):
    """Pull posterior sample arrays out of a chain.

    Parameters
    ----------
    params : sequence of str, optional
        Parameter names (default: everything stored).
    iterations : slice or sequence of int, optional
        Stored-sample subset; an empty range yields empty arrays.
    selectors : types=, sources=, times=, locations=
        Label lists restricting the matching axes.
    flatten : bool
        Reshape each result to (samples, -1).

    Returns a dict mapping parameter name to array; axis order is the sample
    axis followed by ``PARAM_DIMS[param]``.
    """
    if params is None:
        params = list(PARAM_DIMS)
    elif isinstance(params, str):
        params = [params]
    unknown = [p for p in params if p not in PARAM_DIMS]
    if unknown:
        raise ValidationError(
            f"unknown parameter(s) {unknown}; valid: {list(PARAM_DIMS)}")
    for key in selectors:
        if key not in _SELECTOR_TO_DIM:
            raise ValidationError(
                f"unknown selector {key!r}; valid: {list(_SELECTOR_TO_DIM)}")
    out = {}
    for p in params:
        arr = chain.samples[p]
        if iterations is not None:
            arr = arr[iterations]
        for key, requested in selectors.items():
            if requested is None:
                continue
            if isinstance(requested, (str, int)):
                requested = [requested]
            dim = _SELECTOR_TO_DIM[key]
            if dim not in PARAM_DIMS[p]:
                continue
            axis = 1 + PARAM_DIMS[p].index(dim)
            labels = chain.meta[_DIM_TO_LABELKEY[dim]]
            arr = np.take(arr, _label_indices(requested, labels, dim), axis)
        out[p] = arr.reshape(arr.shape[0], -1) if flatten else arr
    return out


def percentile_interval(samples, alpha_ci):
    """Equal-tailed interval via linear-interpolation empirical quantiles."""
    lo, hi = np.quantile(samples, [alpha_ci / 2, 1 - alpha_ci / 2],
                         method="linear")
    return float(lo), float(hi)


def chen_shao_interval(samples, alpha_ci):
    """Shortest contiguous window of ceil((1-alpha)*S) sorted samples.

    Ties on width break to the earliest window, which makes the interval
    deterministic.
    """
    srt = np.sort(np.asarray(samples, dtype=float))
    S = len(srt)
    w = int(np.ceil((1.0 - alpha_ci) * S))
    w = min(max(w, 1), S)
    widths = srt[w - 1:] - srt[:S - w + 1]
    start = int(np.argmin(widths))
    return float(srt[start]), float(srt[start + w - 1])

_INTERVALS = {"percentile": percentile_interval,
              "chen-shao": chen_shao_interval}


def summarize(chain, alpha_ci=0.05, method="percentile", params=None,
              **selectors):
    """Medians and credible intervals as a long-format table.

    ``method`` is ``"percentile"`` (equal-tailed, linear-interpolation
    quantiles) or ``"chen-shao"`` (shortest contiguous window).  Returns a
    DataFrame with one row per scalar parameter slice.
    """
    if not 0 < alpha_ci < 1:
        raise ValidationError("alpha_ci must be in (0, 1)")
    if method not in _INTERVALS:
        raise ValidationError(
            f"interval method {method!r} is not implemented; "
            f"supported methods: {sorted(_INTERVALS)}")
    interval = _INTERVALS[method]
    if params is None:
        params = [p for p in PARAM_DIMS if p not in ("c",)]
    arrays = extract(chain, params=params, **selectors)
    rows = []
    for p, arr in arrays.items():
        dims = PARAM_DIMS[p]
        labels = [_selected_labels(chain, d, selectors) for d in dims]
        flat = arr.reshape(arr.shape[0], -1)
        for pos in range(flat.shape[1]):
            coord = np.unravel_index(pos, arr.shape[1:]) if dims else ()
            series = flat[:, pos]
            lo, hi = interval(series, alpha_ci)
            row = {"param": p}
            for d in ("type", "source", "time", "location"):
                row[d] = ""
            for d, c in zip(dims, coord):
                row[d] = labels[dims.index(d)][c]
            row.update(median=float(np.median(series)), ci_lower=lo,
                       ci_upper=hi, ci_level=1 - alpha_ci, method=method)
            rows.append(row)
    return pd.DataFrame(rows, columns=["param", "type", "source", "time",
                                       "location", "median", "ci_lower",
                                       "ci_upper", "ci_level", "method"])


def _selected_labels(chain, dim, selectors):
    labels = chain.meta[_DIM_TO_LABELKEY[dim]]
    for key, requested in selectors.items():
        if _SELECTOR_TO_DIM.get(key) == dim and requested is not None:
            if isinstance(requested, (str, int)):
                requested = [requested]
            return [str(v) for v in requested]
    return labels


@dataclass
class DissimilarityMatrix:
    """Pairwise type dissimilarity with its hierarchical clustering tree."""

    values: np.ndarray   # (n, n) in [0, 1], symmetric, zero diagonal
    labels: list
    linkage: np.ndarray  # scipy condensed linkage matrix

    def to_newick(self):
        """Render the dendrogram as a Newick tree with branch lengths."""
        n = len(self.labels)
        heights = {i: 0.0 for i in range(n)}
        reprs = {i: _quote_newick(self.labels[i]) for i in range(n)}
        for row_idx, (a, b, height, _) in enumerate(self.linkage):
            a, b = int(a), int(b)
            node = n + row_idx
            la = height - heights[a]
            lb = height - heights[b]
            reprs[node] = f"({reprs[a]}:{la:g},{reprs[b]}:{lb:g})"
            heights[node] = height
        return reprs[n + len(self.linkage) - 1] + ";"

    def to_frame(self):
        return pd.DataFrame(self.values, index=self.labels,
                            columns=self.labels)


def _quote_newick(label):
    return label if label.replace("_", "").isalnum() else f"'{label}'"


def co_clustering_dissimilarity(chain, linkage_method="average"):
    """Fraction of samples in which each pair of types is split apart.

    A pair co-clustered in every stored sample scores 0; never co-clustered
    scores 1.  The companion dendrogram agglomerates on this matrix
    (average linkage by default).
    """
    c = chain.samples["c"]  # (S, n)
    S, n = c.shape
    same = np.zeros((n, n), dtype=np.int64)
    for s in range(S):
        same += c[s][:, None] == c[s][None, :]
    d = 1.0 - same / S
    np.fill_diagonal(d, 0.0)
    d = (d + d.T) / 2.0
    condensed = d[np.triu_indices(n, k=1)]
    lk = linkage(condensed, method=linkage_method)
    return DissimilarityMatrix(values=d, labels=chain.meta["types"],
                               linkage=lk)


def pairwise_correlation(chain, pairs, param="lambda_j", time=None,
                         location=None):
    """Pearson correlations between posterior series of two sources.

    ``pairs`` is a list of (source_a, source_b) label pairs; ``time`` and
    ``location`` default to the sole period/location when unambiguous.
    """
    meta = chain.meta
    t = _resolve_single(meta["times"], time, "time")
    l = _resolve_single(meta["locations"], location, "location")
    arr = chain.samples[param][:, :, t, l]  # (S, m)
    if arr.shape[0] < 2:
        raise ValidationError("need at least 2 samples for a correlation")
    out = []
    for a, b in pairs:
        ia = _label_indices([a], meta["sources"], "source")[0]
        ib = _label_indices([b], meta["sources"], "source")[0]
        sa, sb = arr[:, ia], arr[:, ib]
        if sa.std() == 0 or sb.std() == 0:
            raise ValidationError(
                f"zero variance series for pair ({a}, {b}); "
                "correlation undefined")
        out.append(float(np.corrcoef(sa, sb)[0, 1]))
    return out


def _resolve_single(labels, value, dim):
    if value is None:
        if len(labels) != 1:
            raise ValidationError(f"multiple {dim}s present; pass {dim}=")
        return 0
    return _label_indices([value], labels, dim)[0]


def cluster_count_histogram(chain):
    """Map from active-cluster count to number of stored samples showing it."""
    counts = chain.samples["n_clusters"]
    sizes, freq = np.unique(counts, return_counts=True)
    return {int(s): int(f) for s, f in zip(sizes, freq)}
