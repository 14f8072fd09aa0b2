"""Structure search over the prima-facie-constrained edge space.

Hill climbing is best-improvement local search from the empty graph with
add/delete moves only; reversal is pointless because a reversed edge leaves
the admissible set.  Every admissible edge points from a strictly more
frequent column to a strictly less frequent one, so any reachable graph is
acyclic without explicit checks.  An exhaustive subset-enumeration oracle
covers small instances exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sbcn.data import Dag, Dataset
from sbcn.kernels import family_log_likelihood
from sbcn.scoring import ScoreConfig, ScoredNetwork, regularizer_weight, score
from sbcn.suppes import ConditionTestConfig, PrimaFaciePoset, prima_facie

__all__ = [
    "EXHAUSTIVE_EDGE_CAP",
    "FamilyScoreCache",
    "SearchConfig",
    "SearchStep",
    "SearchTrace",
    "exhaustive_search",
    "hill_climb",
    "infer_sbcn",
    "prima_facie_network",
]

EXHAUSTIVE_EDGE_CAP = 20

MODES = ("hill_climb", "exhaustive", "prima_facie_only")


@dataclass(frozen=True)
class SearchConfig:
    """Search mode plus the scoring objective it maximizes.

    The seed is recorded for provenance only: the default search is fully
    deterministic (best improvement, ties broken add-before-delete and then
    by lexicographic edge order).
    """

    score: ScoreConfig = ScoreConfig()
    max_parents: "int | None" = None
    mode: str = "hill_climb"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_parents is not None and self.max_parents < 1:
            raise ValueError("max_parents must be >= 1 when finite")


@dataclass(frozen=True)
class SearchStep:
    kind: str  # "add" or "delete"
    edge: tuple[int, int]
    score_before: float
    score_after: float


@dataclass(frozen=True)
class SearchTrace:
    """Accepted moves in order; every step strictly improves the score."""

    steps: tuple[SearchStep, ...]
    evaluations: int
    final_score: float


class FamilyScoreCache:
    """Memo of per-family log-likelihoods for one dataset.

    Keyed by (child, sorted parent tuple); the values depend only on the data
    and the pseudocount, so one cache can be shared by searches under
    different regularizers (the penalty is applied outside the cache).
    """

    def __init__(self, dataset: Dataset, pseudocount: float = 0.0):
        self.dataset = dataset
        self.pseudocount = float(pseudocount)
        self._values: dict[tuple[int, tuple[int, ...]], float] = {}

    def family_ll(self, child: int, parents: tuple[int, ...]) -> float:
        key = (child, parents)
        value = self._values.get(key)
        if value is None:
            value = family_log_likelihood(
                self.dataset.cells, parents, child, self.pseudocount
            )
            self._values[key] = value
        return value

    def __len__(self) -> int:
        return len(self._values)


def _check_poset(dataset: Dataset, poset: PrimaFaciePoset) -> None:
    if poset.node_count != dataset.n_events:
        raise ValueError(
            f"poset covers {poset.node_count} nodes, dataset has "
            f"{dataset.n_events} events"
        )


def hill_climb(
    dataset: Dataset,
    poset: PrimaFaciePoset,
    config: "SearchConfig | None" = None,
    cache: "FamilyScoreCache | None" = None,
) -> tuple[ScoredNetwork, SearchTrace]:
    """Greedy best-improvement search; returns the fitted result and trace."""
    config = config or SearchConfig()
    _check_poset(dataset, poset)
    cache = cache or FamilyScoreCache(dataset, config.score.pseudocount)
    weight = regularizer_weight(config.score.regularizer, dataset.n_samples)
    max_parents = config.max_parents

    def family_score(child: int, parents: tuple[int, ...]) -> float:
        return cache.family_ll(child, parents) - weight * (1 << len(parents))

    n = dataset.n_events
    allowed = sorted(poset.allowed_edges)
    parents: list[tuple[int, ...]] = [() for _ in range(n)]
    family: list[float] = [family_score(v, ()) for v in range(n)]
    current = sum(family)
    edges: set[tuple[int, int]] = set()
    steps: list[SearchStep] = []
    evaluations = 0

    while True:
        best_delta = 0.0
        best_key: "tuple[int, tuple[int, int]] | None" = None
        best_parents: tuple[int, ...] = ()
        for edge in allowed:
            source, child = edge
            if edge in edges:
                continue
            if max_parents is not None and len(parents[child]) >= max_parents:
                continue
            candidate = tuple(sorted(parents[child] + (source,)))
            delta = family_score(child, candidate) - family[child]
            evaluations += 1
            # ties: adds (rank 0) beat deletes, then lexicographic edge
            if delta > best_delta or (
                delta == best_delta and best_key is not None and (0, edge) < best_key
            ):
                best_delta = delta
                best_key = (0, edge)
                best_parents = candidate
        for edge in sorted(edges):
            source, child = edge
            candidate = tuple(p for p in parents[child] if p != source)
            delta = family_score(child, candidate) - family[child]
            evaluations += 1
            if delta > best_delta or (
                delta == best_delta and best_key is not None and (1, edge) < best_key
            ):
                best_delta = delta
                best_key = (1, edge)
                best_parents = candidate
        if best_key is None or best_delta <= 0.0:
            break
        rank, edge = best_key
        child = edge[1]
        if rank == 0:
            edges.add(edge)
        else:
            edges.discard(edge)
        parents[child] = best_parents
        family[child] = family_score(child, best_parents)
        steps.append(
            SearchStep(
                kind="add" if rank == 0 else "delete",
                edge=edge,
                score_before=current,
                score_after=current + best_delta,
            )
        )
        current += best_delta

    dag = Dag(node_count=n, edges=frozenset(edges))
    scored = score(dataset, dag, config.score)
    trace = SearchTrace(
        steps=tuple(steps), evaluations=evaluations, final_score=scored.score
    )
    return scored, trace


def exhaustive_search(
    dataset: Dataset,
    poset: PrimaFaciePoset,
    config: "SearchConfig | None" = None,
    cache: "FamilyScoreCache | None" = None,
) -> ScoredNetwork:
    """Score every admissible edge subset and return the exact optimum.

    Ties are broken toward fewer edges, then by lexicographic edge order.
    Refuses instances with more than EXHAUSTIVE_EDGE_CAP admissible edges.
    """
    config = config or SearchConfig()
    _check_poset(dataset, poset)
    edges = sorted(poset.allowed_edges)
    if len(edges) > EXHAUSTIVE_EDGE_CAP:
        raise ValueError(
            f"{len(edges)} admissible edges exceed the exhaustive cap of "
            f"{EXHAUSTIVE_EDGE_CAP} (2^{EXHAUSTIVE_EDGE_CAP} subsets)"
        )
    cache = cache or FamilyScoreCache(dataset, config.score.pseudocount)
    weight = regularizer_weight(config.score.regularizer, dataset.n_samples)
    max_parents = config.max_parents

    mask_count = 1 << len(edges)
    masks = np.arange(mask_count, dtype=np.int64)
    # group candidate edges by child: the family term of a child depends only
    # on the bits of its own in-edges
    by_child: dict[int, list[int]] = {}
    for position, (_, child) in enumerate(edges):
        by_child.setdefault(child, []).append(position)
    totals = np.zeros(mask_count, dtype=np.float64)
    for child, positions in sorted(by_child.items()):
        local = np.zeros(mask_count, dtype=np.int64)
        for bit, position in enumerate(positions):
            local |= ((masks >> position) & 1) << bit
        table = np.empty(1 << len(positions), dtype=np.float64)
        for subset in range(1 << len(positions)):
            chosen = tuple(
                sorted(edges[positions[b]][0] for b in range(len(positions)) if subset >> b & 1)
            )
            if max_parents is not None and len(chosen) > max_parents:
                table[subset] = -np.inf
            else:
                table[subset] = cache.family_ll(child, chosen) - weight * (1 << len(chosen))
        totals += table[local]

    best = float(np.max(totals))
    candidates = np.flatnonzero(totals == best)
    chosen_mask = min(
        (int(mask) for mask in candidates),
        key=lambda mask: (
            bin(mask).count("1"),
            tuple(edges[t] for t in range(len(edges)) if mask >> t & 1),
        ),
    )
    dag = Dag(
        node_count=dataset.n_events,
        edges=frozenset(edges[t] for t in range(len(edges)) if chosen_mask >> t & 1),
    )
    return score(dataset, dag, config.score)


def prima_facie_network(
    dataset: Dataset,
    poset: PrimaFaciePoset,
    score_config: "ScoreConfig | None" = None,
) -> ScoredNetwork:
    """Skip the search entirely: take every admissible edge as the network."""
    _check_poset(dataset, poset)
    dag = Dag(node_count=poset.node_count, edges=poset.allowed_edges)
    return score(dataset, dag, score_config or ScoreConfig(regularizer="none"))


def infer_sbcn(
    dataset: Dataset,
    condition_config: "ConditionTestConfig | None" = None,
    search_config: "SearchConfig | None" = None,
) -> ScoredNetwork:
    """Full pipeline: prima facie filtering, then the configured search.

    Every edge of the result satisfies both Suppes conditions on the input
    data, whatever the search mode.
    """
    search_config = search_config or SearchConfig()
    poset = prima_facie(dataset, condition_config)
    if search_config.mode == "exhaustive":
        return exhaustive_search(dataset, poset, search_config)
    if search_config.mode == "prima_facie_only":
        return prima_facie_network(dataset, poset, search_config.score)
    scored, _ = hill_climb(dataset, poset, search_config)
    return scored
