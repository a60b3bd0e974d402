"""Bayesian nonparametric source attribution for strain-typed surveillance.

Attributes sporadic human cases of a zoonosis to putative animal/food
sources by jointly modelling human case counts and source sampling counts,
with a Dirichlet process prior clustering the per-type effects.
"""

__version__ = "0.1.0"

from .data import (Priors, SourcePrevalence, SurveillanceData,
                   ValidationError, empirical_prevalence, preprocess)
from .dutch import DutchResult, dutch_attribute, dutch_bootstrap
from .engine import (AttributionModel, Chain, EngineError, FitParams,
                     acceptance, append, run)
from .io import ingest, read_counts_csv, read_prevalence_csv
from .model import (ClusterState, ModelState, lambda_i, lambda_ij, lambda_j,
                    lambda_j_prop, log_lik_human, log_lik_source)
from .posterior import (DissimilarityMatrix, chen_shao_interval,
                        cluster_count_histogram, co_clustering_dissimilarity,
                        extract, pairwise_correlation, percentile_interval,
                        summarize)
from .synthgen import TrueParams, default_true_params, simulate

__all__ = [
    "AttributionModel", "Chain", "ClusterState", "DissimilarityMatrix",
    "DutchResult", "EngineError", "FitParams", "ModelState", "Priors",
    "SourcePrevalence", "SurveillanceData", "TrueParams", "ValidationError",
    "acceptance", "append", "chen_shao_interval", "cluster_count_histogram",
    "co_clustering_dissimilarity", "default_true_params", "dutch_attribute",
    "dutch_bootstrap", "empirical_prevalence", "extract", "ingest",
    "lambda_i", "lambda_ij", "lambda_j", "lambda_j_prop", "log_lik_human",
    "log_lik_source", "pairwise_correlation", "percentile_interval",
    "preprocess", "read_counts_csv", "read_prevalence_csv", "run",
    "simulate", "summarize",
]
