"""Suppes-Bayes causal network inference from cross-sectional binary data.

The package has two halves that meet in the experiment harness:

* inference: prima facie filtering (temporal priority + probability raising)
  followed by regularized maximum-likelihood structure search;
* simulation: noisy-AND/OR/XOR progression models sampled forward to produce
  ground-truthed benchmark datasets.
"""

from sbcn._version import __version__
from sbcn.data import (
    CnfFormula,
    Cpt,
    Dag,
    Dataset,
    eval_cnf,
    lift_dataset,
    load_dataset,
    Network,
    save_dataset,
)
from sbcn.scoring import ScoreConfig, ScoredNetwork, fit_cpts, log_likelihood, penalty, score
from sbcn.search import SearchConfig, SearchTrace, exhaustive_search, hill_climb, infer_sbcn
from sbcn.suppes import ConditionTestConfig, PrimaFaciePoset, prima_facie, prima_facie_lifted

__all__ = [
    "CnfFormula",
    "ConditionTestConfig",
    "Cpt",
    "Dag",
    "Dataset",
    "Network",
    "PrimaFaciePoset",
    "ScoreConfig",
    "ScoredNetwork",
    "SearchConfig",
    "SearchTrace",
    "eval_cnf",
    "exhaustive_search",
    "fit_cpts",
    "hill_climb",
    "infer_sbcn",
    "lift_dataset",
    "load_dataset",
    "log_likelihood",
    "penalty",
    "prima_facie",
    "prima_facie_lifted",
    "save_dataset",
    "score",
]
