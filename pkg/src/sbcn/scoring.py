"""Decomposable log-likelihood scoring of candidate DAGs.

The objective maximized by structure search is log-likelihood minus a
regularization penalty.  Everything is written in natural logarithms and in
the maximization convention, so BIC contributes (ln m / 2) * k and AIC
contributes k, where k counts one Bernoulli parameter per parent
configuration per node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sbcn.data import Cpt, Dag, Dataset, Network
from sbcn.kernels import family_counts, family_log_likelihood

__all__ = [
    "REGULARIZERS",
    "ScoreConfig",
    "ScoredNetwork",
    "fit_cpts",
    "log_likelihood",
    "parameter_count",
    "penalty",
    "regularizer_weight",
    "score",
]

REGULARIZERS = ("none", "bic", "aic")

# A dense CPT has 2^k entries; refuse beyond this rather than exhaust memory.
_MAX_TABLE_PARENTS = 20


@dataclass(frozen=True)
class ScoreConfig:
    """Regularizer choice plus optional Laplace-style smoothing.

    The default pseudocount of 0 keeps maximum-likelihood estimates exactly
    at the relative frequencies; a positive pseudocount is only of interest
    for downstream prediction use.
    """

    regularizer: str = "bic"
    pseudocount: float = 0.0

    def __post_init__(self) -> None:
        if self.regularizer not in REGULARIZERS:
            raise ValueError(
                f"regularizer must be one of {REGULARIZERS}, got {self.regularizer!r}"
            )
        if self.pseudocount < 0.0:
            raise ValueError("pseudocount must be >= 0")


@dataclass(frozen=True)
class ScoredNetwork:
    """A fitted network together with the decomposed objective value."""

    network: Network
    log_likelihood: float
    penalty: float
    score: float


def fit_cpts(dataset: Dataset, dag: Dag, pseudocount: float = 0.0) -> tuple[Cpt, ...]:
    """Maximum-likelihood (optionally smoothed) CPTs for every node.

    P(v=1 | configuration) = (count(v=1, config) + pseudocount) /
    (count(config) + 2 * pseudocount).  Configurations with zero support and
    zero pseudocount get 0.5 by convention and are flagged in zero_support.
    """
    if dag.node_count != dataset.n_events:
        raise ValueError(
            f"dag has {dag.node_count} nodes, dataset has {dataset.n_events} events"
        )
    cpts = []
    for v in range(dag.node_count):
        parents = dag.parents(v)
        if len(parents) > _MAX_TABLE_PARENTS:
            raise ValueError(
                f"node {v} has {len(parents)} parents; dense CPTs support at "
                f"most {_MAX_TABLE_PARENTS}"
            )
        counts = family_counts(dataset.cells, parents, v)
        totals = counts.sum(axis=1)
        zero = totals == 0
        with np.errstate(invalid="ignore"):
            p_one = (counts[:, 1] + pseudocount) / (totals + 2.0 * pseudocount)
        # zero-support configurations carry no evidence: 0.5 by convention
        # (with a positive pseudocount the formula already lands there)
        p_one[zero] = 0.5
        cpts.append(Cpt(event=v, parents=parents, p_one=p_one, zero_support=zero))
    return tuple(cpts)


def log_likelihood(dataset: Dataset, dag: Dag, pseudocount: float = 0.0) -> float:
    """Maximized log-likelihood of the data under the DAG's factorization.

    Sum over nodes of the family term: each observed (value, configuration)
    cell contributes log of its fitted conditional.  Zero-probability hits,
    possible only with pseudocount 0 and foreign data, would yield -inf; when
    fitting and evaluating on the same data the result is always finite.
    """
    if dag.node_count != dataset.n_events:
        raise ValueError(
            f"dag has {dag.node_count} nodes, dataset has {dataset.n_events} events"
        )
    total = 0.0
    for v in range(dag.node_count):
        total += family_log_likelihood(dataset.cells, dag.parents(v), v, pseudocount)
    return total


def parameter_count(dag: Dag) -> int:
    """Free parameters of the induced model: sum over nodes of 2^|parents|."""
    return sum(1 << len(dag.parents(v)) for v in range(dag.node_count))


def regularizer_weight(regularizer: str, sample_count: int) -> float:
    """Penalty per free parameter under the given regularizer."""
    if regularizer == "none":
        return 0.0
    if regularizer == "aic":
        return 1.0
    if regularizer == "bic":
        return math.log(sample_count) / 2.0
    raise ValueError(f"regularizer must be one of {REGULARIZERS}, got {regularizer!r}")


def penalty(dag: Dag, sample_count: int, regularizer: str) -> float:
    """Complexity penalty subtracted from the log-likelihood."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    return regularizer_weight(regularizer, sample_count) * parameter_count(dag)


def score(dataset: Dataset, dag: Dag, config: "ScoreConfig | None" = None) -> ScoredNetwork:
    """Fit the DAG and return the regularized objective (LL minus penalty)."""
    config = config or ScoreConfig()
    ll = log_likelihood(dataset, dag, config.pseudocount)
    pen = penalty(dag, dataset.n_samples, config.regularizer)
    network = Network(
        dag=dag, cpts=fit_cpts(dataset, dag, config.pseudocount),
        event_names=dataset.event_names,
    )
    return ScoredNetwork(network=network, log_likelihood=ll, penalty=pen, score=ll - pen)
