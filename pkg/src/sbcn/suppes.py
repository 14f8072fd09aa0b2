"""Prima facie causation estimated from binary data.

An ordered pair (cause, effect) is prima facie admissible when the cause is
more frequent than the effect (temporal priority, a proxy for "earlier" in a
monotonic accumulation process) and the cause raises the effect's conditional
probability (probability raising, equivalent to positive dependence of the
pair).  Both conditions are strict inequalities decided on exact integer
counts, optionally stabilized by a nonparametric bootstrap over rows.

The resulting poset of admissible edges constrains structure search: since
every admitted edge points from a strictly more frequent column to a strictly
less frequent one, any subset of admitted edges is automatically acyclic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from sbcn.data import CnfFormula, Dag, Dataset, lift_dataset

__all__ = [
    "ConditionTestConfig",
    "PairDiagnostics",
    "PrimaFaciePoset",
    "prima_facie",
    "prima_facie_lifted",
    "probability_raising",
    "temporal_priority",
]


@dataclass(frozen=True)
class ConditionTestConfig:
    """How the two strict inequalities are decided on finite data.

    point_estimate evaluates them once on the full dataset.  bootstrap
    resamples the rows with replacement `replicates` times and requires each
    inequality to hold in at least `confidence_level` of the replicates.
    `resample=False` turns resampling off (every replicate sees the full
    data), which makes bootstrap with replicates=1 coincide with the point
    estimate.  The seed only matters when resampling.
    """

    mode: str = "point_estimate"
    replicates: int = 100
    confidence_level: float = 0.95
    resample: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("point_estimate", "bootstrap"):
            raise ValueError(f"unknown condition test mode {self.mode!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0.0 < self.confidence_level < 1.0:
            raise ValueError("confidence_level must lie strictly between 0 and 1")


@dataclass(frozen=True)
class PairDiagnostics:
    """Evidence recorded for one ordered nondegenerate pair (cause, effect)."""

    delta_marginal: float
    delta_raising: float
    temporal_priority: bool
    probability_raising: bool
    tp_support: float
    pr_support: float


@dataclass(frozen=True)
class PrimaFaciePoset:
    """Ordered pairs passing both Suppes conditions, plus per-pair evidence."""

    node_count: int
    allowed_edges: frozenset[tuple[int, int]]
    diagnostics: Mapping[tuple[int, int], PairDiagnostics] = field(default_factory=dict)
    degenerate_events: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        edges = frozenset((int(a), int(b)) for a, b in self.allowed_edges)
        object.__setattr__(self, "allowed_edges", edges)
        for a, b in edges:
            if not (0 <= a < self.node_count and 0 <= b < self.node_count) or a == b:
                raise ValueError(f"invalid edge ({a}, {b})")
            if (b, a) in edges:
                raise ValueError(f"antisymmetry violated: both ({a},{b}) and ({b},{a})")
        # acyclicity must hold for any subset of a strict marginal order;
        # verified outright so hand-built posets get the same guarantee
        Dag(node_count=self.node_count, edges=edges)

    def parent_candidates(self, node: int) -> tuple[int, ...]:
        return tuple(sorted(a for a, b in self.allowed_edges if b == node))

    def restrict(
        self,
        sources: "Sequence[int] | None" = None,
        targets: "Sequence[int] | None" = None,
    ) -> "PrimaFaciePoset":
        """Keep only edges whose endpoints fall in the given index sets."""
        source_set = None if sources is None else set(sources)
        target_set = None if targets is None else set(targets)
        kept = frozenset(
            (a, b)
            for a, b in self.allowed_edges
            if (source_set is None or a in source_set)
            and (target_set is None or b in target_set)
        )
        diagnostics = {
            pair: diag
            for pair, diag in self.diagnostics.items()
            if (source_set is None or pair[0] in source_set)
            and (target_set is None or pair[1] in target_set)
        }
        return PrimaFaciePoset(
            node_count=self.node_count,
            allowed_edges=kept,
            diagnostics=diagnostics,
            degenerate_events=self.degenerate_events,
        )


def _condition_matrices(ones: np.ndarray, pairs: np.ndarray, m: int):
    """Strict TP and PR indicator matrices from integer count summaries.

    PR is decided in the cross-multiplied joint form
    m * count(i and j) > count(i) * count(j), which is algebraically the same
    inequality as P(j | i) > P(j | not i) whenever both conditionals exist,
    and stays total when one side is undefined.
    """
    tp = ones[:, None] > ones[None, :]
    pr = m * pairs > ones[:, None] * ones[None, :]
    np.fill_diagonal(tp, False)
    np.fill_diagonal(pr, False)
    return tp, pr


def temporal_priority(dataset: Dataset) -> set[tuple[int, int]]:
    """All ordered pairs whose cause column is strictly more frequent."""
    ones = dataset.ones_count
    tp = ones[:, None] > ones[None, :]
    np.fill_diagonal(tp, False)
    return {(int(i), int(j)) for i, j in zip(*np.nonzero(tp))}


def probability_raising(dataset: Dataset) -> set[tuple[int, int]]:
    """All ordered nondegenerate pairs with positive statistical dependence."""
    ones = dataset.ones_count
    _, pr = _condition_matrices(ones, dataset.pair_count, dataset.n_samples)
    fine = np.ones(dataset.n_events, dtype=bool)
    fine[list(dataset.degenerate_events())] = False
    pr &= fine[:, None] & fine[None, :]
    return {(int(i), int(j)) for i, j in zip(*np.nonzero(pr))}


def _bootstrap_supports(dataset: Dataset, config: ConditionTestConfig):
    """Fraction of replicates in which each condition held, per ordered pair."""
    n = dataset.n_events
    m = dataset.n_samples
    rng = np.random.default_rng(config.seed)
    tp_hits = np.zeros((n, n), dtype=np.int64)
    pr_hits = np.zeros((n, n), dtype=np.int64)
    for _ in range(config.replicates):
        if config.resample:
            rows = dataset.cells[rng.integers(0, m, size=m)]
        else:
            rows = dataset.cells
        wide = rows.astype(np.int64)
        ones = wide.sum(axis=0)
        tp, pr = _condition_matrices(ones, wide.T @ wide, m)
        tp_hits += tp
        pr_hits += pr
    return tp_hits / config.replicates, pr_hits / config.replicates


def prima_facie(
    dataset: Dataset, config: "ConditionTestConfig | None" = None
) -> PrimaFaciePoset:
    """Temporal priority intersected with probability raising, per pair.

    Degenerate columns (marginal 0 or 1) never take part in an edge; they are
    reported in the poset instead.  In bootstrap mode the confidence level
    must exceed 0.5, otherwise both directions of a pair could pass and the
    antisymmetry guarantee would be lost.
    """
    config = config or ConditionTestConfig()
    m = dataset.n_samples
    n = dataset.n_events
    ones = dataset.ones_count
    tp_point, pr_point = _condition_matrices(ones, dataset.pair_count, m)
    if config.mode == "bootstrap":
        if config.resample and config.confidence_level <= 0.5:
            raise ValueError(
                "bootstrap confidence_level must exceed 0.5 to keep the poset "
                "antisymmetric"
            )
        tp_support, pr_support = _bootstrap_supports(dataset, config)
        tp_hold = tp_support >= config.confidence_level
        pr_hold = pr_support >= config.confidence_level
    else:
        tp_support = tp_point.astype(np.float64)
        pr_support = pr_point.astype(np.float64)
        tp_hold = tp_point
        pr_hold = pr_point

    degenerate = dataset.degenerate_events()
    fine = np.ones(n, dtype=bool)
    fine[list(degenerate)] = False

    marginals = ones / m
    diagnostics: dict[tuple[int, int], PairDiagnostics] = {}
    edges = set()
    for i in range(n):
        if not fine[i]:
            continue
        for j in range(n):
            if i == j or not fine[j]:
                continue
            given_cause = dataset.pair_count[i, j] / ones[i]
            given_other = (ones[j] - dataset.pair_count[i, j]) / (m - ones[i])
            tp_ok = bool(tp_hold[i, j])
            pr_ok = bool(pr_hold[i, j])
            diagnostics[(i, j)] = PairDiagnostics(
                delta_marginal=float(marginals[i] - marginals[j]),
                delta_raising=float(given_cause - given_other),
                temporal_priority=tp_ok,
                probability_raising=pr_ok,
                tp_support=float(tp_support[i, j]),
                pr_support=float(pr_support[i, j]),
            )
            if tp_ok and pr_ok:
                edges.add((i, j))
    return PrimaFaciePoset(
        node_count=n,
        allowed_edges=frozenset(edges),
        diagnostics=diagnostics,
        degenerate_events=degenerate,
    )


def prima_facie_lifted(
    dataset: Dataset,
    formulas: Sequence[CnfFormula],
    config: "ConditionTestConfig | None" = None,
) -> PrimaFaciePoset:
    """Prima facie conditions between formula columns and original events.

    The dataset is lifted with one Bernoulli column per formula; the returned
    poset lives on the lifted column space and keeps only formula -> event
    edges.  Formula columns that never (or always) fire are degenerate and
    are reported, never admitted.
    """
    lifted = lift_dataset(dataset, formulas)
    poset = prima_facie(lifted, config)
    formula_columns = range(dataset.n_events, lifted.n_events)
    return poset.restrict(sources=formula_columns, targets=range(dataset.n_events))
