"""Command-line interface.

Commands: fit, append, summary, extract, heatmap, dutch, simulate,
acceptance.  Options may come from a ``key = value`` config file
(``--config``); explicit flags win over config values.  Exit codes: 0
success, 1 model/numeric failure, 2 I/O or validation failure.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .data import Priors, ValidationError, preprocess
from .dutch import dutch_bootstrap
from .engine import (AttributionModel, Chain, EngineError, FitParams,
                     acceptance, append)
from .io import (ingest, write_chain_csvs, write_counts_csv,
                 write_prevalence_csv)
from .posterior import (co_clustering_dissimilarity, extract,
                        cluster_count_histogram, summarize)
from .synthgen import default_true_params, simulate

_CONFIG_KEYS = {
    "data": str, "prevalence": str, "out": str, "seed": int,
    "n_iter": int, "burn_in": int, "thin": int,
    "a_theta": float, "b_theta": float, "a_alpha": float, "a_r": float,
    "a_q": float, "fixed_r": bool, "alpha_ci": float, "method": str,
    "sweep_order": str, "chains": int,
}


def read_config(path):
    """Parse the ``key = value`` config grammar ('#' starts a comment)."""
    values = {}
    with open(path) as f:
        for line_num, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(
                    f"{path}:{line_num}: expected 'key = value'")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _CONFIG_KEYS:
                raise ValidationError(
                    f"{path}:{line_num}: unknown key {key!r}; valid keys: "
                    f"{sorted(_CONFIG_KEYS)}")
            caster = _CONFIG_KEYS[key]
            if caster is bool:
                if value.lower() not in ("true", "false"):
                    raise ValidationError(
                        f"{path}:{line_num}: {key} must be true or false")
                values[key] = value.lower() == "true"
            else:
                values[key] = caster(value)
    return values


def _merged(args, required=()):
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    merged = dict(cfg)
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    if "out" not in merged and os.environ.get("SOURCEATTRIB_OUTDIR"):
        merged["out"] = os.environ["SOURCEATTRIB_OUTDIR"]
    missing = [k for k in required if merged.get(k) is None]
    if missing:
        raise ValidationError(f"missing required option(s): {missing} "
                              "(pass flags or put them in --config)")
    return merged


def _priors_from(opts):
    return Priors(a_theta=opts.get("a_theta", 0.01),
                  b_theta=opts.get("b_theta", 1e-5),
                  a_alpha=opts.get("a_alpha", 1.0),
                  a_r=opts.get("a_r", 0.1),
                  a_q=opts.get("a_q", 0.1))


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        h.update(f.read())
    return h.hexdigest()


def _load_model(opts):
    data, prevalence = ingest(opts["data"], opts["prevalence"])
    data, removed = preprocess(data)
    model = AttributionModel(data, prevalence, priors=_priors_from(opts),
                             fixed_r=opts.get("fixed_r", False),
                             random_scan=opts.get("sweep_order") == "random")
    return model, removed


def cmd_fit(args):
    opts = _merged(args, required=("data", "prevalence", "out", "seed"))
    model, removed = _load_model(opts)
    if removed:
        print(f"preprocess: removed {len(removed)} type(s) with no source "
              f"counts: {', '.join(removed)}")
    os.makedirs(opts["out"], exist_ok=True)
    n_chains = opts.get("chains", 1)
    seeds = [opts["seed"] + c for c in range(n_chains)]
    chain_files = []

    def one(seed, tag):
        fp = FitParams(n_iter=opts.get("n_iter", 1000),
                       burn_in=opts.get("burn_in", 0),
                       thin=opts.get("thin", 1), seed=seed)
        chain = model.fit(fp)
        path = os.path.join(opts["out"], f"chain{tag}.bin")
        chain.save(path)
        return path, chain

    if n_chains == 1:
        path, chain = one(seeds[0], "")
        chain_files.append(path)
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=n_chains) as pool:
            futures = [pool.submit(one, seed, f"_{c + 1:02d}")
                       for c, seed in enumerate(seeds)]
            for fut in futures:
                path, chain = fut.result()
                chain_files.append(path)
    acc_path = os.path.join(opts["out"], "acceptance.csv")
    acceptance(chain).to_csv(acc_path, index=False)
    manifest = {
        "version": __version__,
        "seeds": seeds,
        "priors": model.priors.to_dict(),
        "fit_params": {"n_iter": opts.get("n_iter", 1000),
                       "burn_in": opts.get("burn_in", 0),
                       "thin": opts.get("thin", 1)},
        "fixed_r": model.fixed_r,
        "sweep_order": opts.get("sweep_order", "index"),
        "model_digest": model.digest,
        "inputs": {"data": {"path": opts["data"],
                            "sha256": _sha256(opts["data"])},
                   "prevalence": {"path": opts["prevalence"],
                                  "sha256": _sha256(opts["prevalence"])}},
        "removed_types": removed,
        "outputs": chain_files + [acc_path],
    }
    mpath = os.path.join(opts["out"], "manifest.json")
    with open(mpath, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    print(f"wrote {', '.join(chain_files)} and {acc_path}")
    return 0


def cmd_append(args):
    opts = _merged(args, required=("data", "prevalence"))
    chain = Chain.load(args.chain)
    data, prevalence = ingest(opts["data"], opts["prevalence"])
    data, _ = preprocess(data)
    priors = Priors(**chain.meta["priors"])
    model = AttributionModel(data, prevalence, priors=priors,
                             fixed_r=chain.meta["fixed_r"],
                             random_scan=chain.meta["random_scan"])
    longer = append(model, chain, args.extra)
    out = args.out or args.chain
    longer.save(out)
    print(f"appended {args.extra} samples -> {out} "
          f"({longer.n_samples} total)")
    return 0


def cmd_summary(args):
    chain = Chain.load(args.chain)
    opts = _merged(args)
    table = summarize(chain, alpha_ci=opts.get("alpha_ci", 0.05),
                      method=opts.get("method", "percentile"),
                      params=args.params)
    out = opts.get("out") or "summary.csv"
    if os.path.isdir(out):
        out = os.path.join(out, "summary.csv")
    table.to_csv(out, index=False, float_format="%.17g")
    print(f"wrote {out}")
    if args.plots_dir:
        _emit_plots(chain, table, args)
    return 0


def _emit_plots(chain, table, args):
    from . import plots
    os.makedirs(args.plots_dir, exist_ok=True)
    sel = {}
    for dim in ("types", "sources", "times", "locations"):
        v = getattr(args, dim, None)
        if v:
            sel[dim] = v
    arrays = extract(chain, params=args.params, **sel)
    for p, arr in arrays.items():
        flat = arr.reshape(arr.shape[0], -1)
        for col in range(min(flat.shape[1], args.max_plot_slices)):
            plots.trace_plot(flat[:, col],
                             os.path.join(args.plots_dir,
                                          f"trace_{p}_{col}.svg"),
                             title=f"{p}[{col}]")
            plots.acf_plot(flat[:, col],
                           os.path.join(args.plots_dir, f"acf_{p}_{col}.svg"),
                           title=f"{p}[{col}]")
    lam_i = chain.samples["lambda_i"]
    observed = None
    if args.data and args.prevalence:
        data, _ = ingest(args.data, args.prevalence)
        data, _ = preprocess(data)
        if data.types == chain.meta["types"]:
            observed = data.y.sum(axis=(1, 2))
    plots.violin_plot([lam_i[:, i].ravel() for i in range(lam_i.shape[1])],
                      chain.meta["types"],
                      os.path.join(args.plots_dir, "violin_lambda_i.svg"),
                      title="cases attributed per type", observed=observed)
    lam_j = chain.samples["lambda_j"]
    plots.violin_plot([lam_j[:, j].ravel() for j in range(lam_j.shape[1])],
                      chain.meta["sources"],
                      os.path.join(args.plots_dir, "violin_lambda_j.svg"),
                      title="cases attributed per source")
    if args.dutch_file:
        import pandas as pd
        hald = table[(table["param"] == "lambda_j")]
        base = pd.read_csv(args.dutch_file)
        plots.source_comparison_plot(
            hald, os.path.join(args.plots_dir, "source_comparison.svg"),
            baseline_frame=base)
    print(f"wrote plots to {args.plots_dir}")


def cmd_extract(args):
    chain = Chain.load(args.chain)
    sel = {dim: getattr(args, dim) for dim in
           ("types", "sources", "times", "locations") if getattr(args, dim)}
    out_dir = args.out or "."
    paths = write_chain_csvs(chain, out_dir, params=args.params, **sel)
    print(f"wrote {', '.join(paths)}")
    return 0


def cmd_heatmap(args):
    chain = Chain.load(args.chain)
    from . import plots
    dis = co_clustering_dissimilarity(chain, linkage_method=args.linkage)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    svg = os.path.join(out_dir, "heatmap.svg")
    plots.heatmap_with_dendrogram(dis, svg, title="type co-clustering")
    csv = os.path.join(out_dir, "dissimilarity.csv")
    dis.to_frame().to_csv(csv, float_format="%.17g")
    nwk = os.path.join(out_dir, "dendrogram.nwk")
    with open(nwk, "w") as f:
        f.write(dis.to_newick() + "\n")
    hist = cluster_count_histogram(chain)
    print(f"wrote {svg}, {csv}, {nwk}")
    print("cluster-count histogram:",
          ", ".join(f"{k}: {v}" for k, v in sorted(hist.items())))
    return 0


def cmd_dutch(args):
    opts = _merged(args, required=("data", "prevalence"))
    data, _ = ingest(opts["data"], opts["prevalence"])
    data, _ = preprocess(data)
    rng = np.random.default_rng(opts.get("seed"))
    result = dutch_bootstrap(data, n_bootstrap=args.bootstrap, rng=rng)
    frame = result.to_frame()
    frame.insert(0, "param", "lambda_j")
    frame.insert(1, "type", "")
    frame["time"] = ""
    frame["location"] = ""
    frame["ci_level"] = 0.95
    frame["method"] = "bootstrap-percentile"
    frame = frame[["param", "type", "source", "time", "location", "median",
                   "ci_lower", "ci_upper", "ci_level", "method"]]
    out = opts.get("out") or "dutch.csv"
    if os.path.isdir(out):
        out = os.path.join(out, "dutch.csv")
    frame.to_csv(out, index=False, float_format="%.17g")
    print(f"wrote {out}")
    return 0


def cmd_simulate(args):
    opts = _merged(args, required=("out", "seed"))
    rng = np.random.default_rng(opts["seed"])
    truth = default_true_params(
        n_types=args.n_types, n_sources=args.n_sources,
        times=[str(i + 1) for i in range(args.n_times)],
        locations=[chr(ord("A") + i) for i in range(args.n_locations)],
        n_clusters=args.n_clusters, rng=rng)
    totals = np.full((args.n_sources, args.n_times), args.total_samples,
                     dtype=np.int64)
    data, prevalence, truth = simulate(truth, totals, rng)
    os.makedirs(opts["out"], exist_ok=True)
    dpath = os.path.join(opts["out"], "data.csv")
    ppath = os.path.join(opts["out"], "prevalence.csv")
    tpath = os.path.join(opts["out"], "truth.csv")
    write_counts_csv(data, dpath)
    write_prevalence_csv(prevalence, ppath)
    truth.truth_frame().to_csv(tpath, index=False, float_format="%.17g")
    print(f"wrote {dpath}, {ppath}, {tpath}")
    return 0


def cmd_acceptance(args):
    chain = Chain.load(args.chain)
    table = acceptance(chain)
    out = args.out or "acceptance.csv"
    if os.path.isdir(out):
        out = os.path.join(out, "acceptance.csv")
    table.to_csv(out, index=False, float_format="%.17g")
    print(f"wrote {out}")
    return 0


def _add_common(p, *keys):
    if "config" in keys:
        p.add_argument("--config", help="key = value config file")
    if "data" in keys:
        p.add_argument("--data", help="long-format count CSV")
        p.add_argument("--prevalence", "--prev", dest="prevalence",
                       help="prevalence CSV (Value, Source, Time)")
    if "out" in keys:
        p.add_argument("--out", help="output path or directory "
                       "(default: $SOURCEATTRIB_OUTDIR)")
    if "seed" in keys:
        p.add_argument("--seed", type=int)
    if "selectors" in keys:
        for dim in ("types", "sources", "times", "locations"):
            p.add_argument(f"--{dim}", nargs="+")
        p.add_argument("--params", nargs="+")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sourceattrib",
        description="Bayesian source attribution for strain-typed "
                    "surveillance data")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the model and persist the chain")
    _add_common(p, "config", "data", "out", "seed")
    p.add_argument("--n-iter", dest="n_iter", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thin", type=int)
    for prior in ("a-theta", "b-theta", "a-alpha", "a-r", "a-q"):
        p.add_argument(f"--{prior}", dest=prior.replace("-", "_"), type=float)
    p.add_argument("--fixed-r", dest="fixed_r", action="store_const",
                   const=True, help="fix relative prevalences at their MLE")
    p.add_argument("--sweep-order", dest="sweep_order",
                   choices=("index", "random"))
    p.add_argument("--chains", type=int, help="independent seeded chains")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("append", help="extend a stored chain")
    _add_common(p, "config", "data")
    p.add_argument("--chain", required=True)
    p.add_argument("--extra", type=int, required=True,
                   help="additional stored samples")
    p.add_argument("--out", help="output chain file (default: in place)")
    p.set_defaults(func=cmd_append)

    p = sub.add_parser("summary", help="medians and credible intervals")
    _add_common(p, "config", "selectors", "data")
    p.add_argument("--chain", required=True)
    p.add_argument("--alpha-ci", dest="alpha_ci", type=float)
    p.add_argument("--method", choices=("percentile", "chen-shao", "SPIn"))
    p.add_argument("--out")
    p.add_argument("--plots-dir", dest="plots_dir",
                   help="also emit trace/acf/violin SVGs here")
    p.add_argument("--max-plot-slices", dest="max_plot_slices", type=int,
                   default=8)
    p.add_argument("--dutch-file", dest="dutch_file",
                   help="baseline summary CSV for the comparison plot")
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("extract", help="dump posterior samples as CSV")
    _add_common(p, "selectors")
    p.add_argument("--chain", required=True)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("heatmap",
                       help="co-clustering heatmap, dendrogram, matrix CSV")
    p.add_argument("--chain", required=True)
    p.add_argument("--out", help="output directory")
    p.add_argument("--linkage", default="average")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("dutch", help="baseline attribution with bootstrap CIs")
    _add_common(p, "config", "data", "out", "seed")
    p.add_argument("--bootstrap", "-B", type=int, default=1000)
    p.set_defaults(func=cmd_dutch)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    _add_common(p, "config", "out", "seed")
    p.add_argument("--n-types", type=int, default=30)
    p.add_argument("--n-sources", type=int, default=4)
    p.add_argument("--n-times", type=int, default=2)
    p.add_argument("--n-locations", type=int, default=2)
    p.add_argument("--n-clusters", type=int, default=3)
    p.add_argument("--total-samples", dest="total_samples", type=int,
                   default=300)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("acceptance", help="per-component acceptance rates")
    p.add_argument("--chain", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_acceptance)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "method", None) == "SPIn":
        print("error: SPIn intervals are not implemented; supported methods: "
              "percentile, chen-shao", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValidationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (EngineError, FloatingPointError) as e:
        print(f"model failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
