"""Random progression topologies and noisy forward sampling.

A progression model is a DAG where each parented node carries a noisy logic
gate: the node fires with probability `activation` when its gate condition
holds (AND: all parents 1, OR: at least one, XOR: exactly one) and with
probability `spontaneous` otherwise; parentless nodes are plain Bernoulli
sources.  Datasets sampled from such models, optionally corrupted by a
random-entry noise operator, are the benchmark inputs for inference.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from sbcn.data import CnfFormula, Dag, Dataset

__all__ = [
    "KINDS",
    "MpnModel",
    "NoiseSpec",
    "TopologyClass",
    "apply_noise",
    "make_xor_formulas",
    "random_structure",
    "sample_dataset",
    "validate_structure",
]

KINDS = (
    "tree",
    "forest",
    "dag_single_source_conj",
    "dag_multi_source_conj",
    "dag_single_source_disj",
    "dag_multi_source_disj",
    # xor variants are an extension beyond the six benchmark classes; they
    # exercise the lifted-inference path
    "dag_single_source_xor",
    "dag_multi_source_xor",
)

_KIND_LOGIC = {
    "tree": "and",
    "forest": "and",
    "dag_single_source_conj": "and",
    "dag_multi_source_conj": "and",
    "dag_single_source_disj": "or",
    "dag_multi_source_disj": "or",
    "dag_single_source_xor": "xor",
    "dag_multi_source_xor": "xor",
}

# the generator draws 1..3 parents per non-source node in dag classes
_DAG_MAX_PARENTS = 3


@dataclass(frozen=True)
class TopologyClass:
    """One benchmark topology family at a fixed node count."""

    kind: str
    node_count: int

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.node_count < 2:
            raise ValueError("node_count must be >= 2")
        if self.kind == "forest" and self.node_count < 6:
            raise ValueError(
                "forest draws 2..floor(n/3) roots, so it needs node_count >= 6"
            )
        if self.kind.startswith("dag_multi_source") and self.node_count < 3:
            raise ValueError("multi-source dags need node_count >= 3")

    @property
    def max_parents(self) -> int:
        return 1 if self.kind in ("tree", "forest") else _DAG_MAX_PARENTS


@dataclass(frozen=True)
class MpnModel:
    """Generative progression network: DAG, per-node gates, firing rates."""

    dag: Dag
    logic: "tuple[str | None, ...]"
    activation: float
    spontaneous: float
    source_marginal: float
    event_names: tuple[str, ...]
    allow_close_rates: bool = False

    def __post_init__(self) -> None:
        if len(self.logic) != self.dag.node_count:
            raise ValueError("one logic entry per node required")
        for v, gate in enumerate(self.logic):
            has_parents = bool(self.dag.parents(v))
            if has_parents and gate not in ("and", "or", "xor"):
                raise ValueError(f"node {v} has parents but gate {gate!r}")
            if not has_parents and gate is not None:
                raise ValueError(f"parentless node {v} must have gate None")
        if len(self.event_names) != self.dag.node_count:
            raise ValueError("one event name per node required")
        if not 0.0 <= self.spontaneous < self.activation <= 1.0:
            raise ValueError(
                "rates must satisfy 0 <= spontaneous < activation <= 1, got "
                f"spontaneous={self.spontaneous}, activation={self.activation}"
            )
        if not 0.0 <= self.source_marginal <= 1.0:
            raise ValueError("source_marginal must lie in [0, 1]")
        if self.activation - self.spontaneous < 0.5:
            if not self.allow_close_rates:
                raise ValueError(
                    "activation should dominate spontaneous firing by at least "
                    "0.5; pass allow_close_rates=True to override"
                )
            warnings.warn(
                "activation - spontaneous < 0.5: progression signal may be "
                "too weak to recover",
                stacklevel=2,
            )

    def xor_nodes(self) -> tuple[int, ...]:
        return tuple(v for v, gate in enumerate(self.logic) if gate == "xor")


@dataclass(frozen=True)
class NoiseSpec:
    """Random-entry observation noise.

    In "coin" mode each cell is independently replaced, with probability
    `level`, by a fair-coin draw (effective flip probability level/2); "flip"
    mode inverts the cell instead (effective flip probability = level).
    """

    level: float
    seed: int = 0
    mode: str = "coin"

    def __post_init__(self) -> None:
        if not 0.0 <= self.level <= 1.0:
            raise ValueError("noise level must lie in [0, 1]")
        if self.mode not in ("coin", "flip"):
            raise ValueError(f"noise mode must be coin or flip, got {self.mode!r}")


def random_structure(
    topology: TopologyClass,
    seed: int,
    activation: float = 0.9,
    spontaneous: float = 0.05,
    source_marginal: "float | None" = None,
) -> MpnModel:
    """Draw a random model of the given class; same seed, same structure.

    Nodes are laid out in a random topological order, so column position
    carries no information about causal depth.  Parent counts in dag classes
    are uniform on [1, min(3, #earlier nodes)].
    """
    rng = np.random.default_rng(seed)
    n = topology.node_count
    order = [int(v) for v in rng.permutation(n)]
    edges: set[tuple[int, int]] = set()

    if topology.kind == "tree":
        for position in range(1, n):
            parent_position = int(rng.integers(0, position))
            edges.add((order[parent_position], order[position]))
    elif topology.kind == "forest":
        roots = int(rng.integers(2, n // 3 + 1))
        members: list[list[int]] = [[order[r]] for r in range(roots)]
        for position in range(roots, n):
            component = int(rng.integers(0, roots))
            parent = members[component][int(rng.integers(0, len(members[component])))]
            edges.add((parent, order[position]))
            members[component].append(order[position])
    else:
        if topology.kind.startswith("dag_single_source"):
            sources = 1
        else:
            sources = int(rng.integers(2, max(2, n // 3) + 1))
        for position in range(sources, n):
            available = min(_DAG_MAX_PARENTS, position)
            count = int(rng.integers(1, available + 1))
            chosen = rng.choice(position, size=count, replace=False)
            for parent_position in sorted(int(q) for q in chosen):
                edges.add((order[parent_position], order[position]))

    dag = Dag(node_count=n, edges=frozenset(edges))
    gate = _KIND_LOGIC[topology.kind]
    logic = tuple(gate if dag.parents(v) else None for v in range(n))
    return MpnModel(
        dag=dag,
        logic=logic,
        activation=activation,
        spontaneous=spontaneous,
        source_marginal=activation if source_marginal is None else source_marginal,
        event_names=tuple(f"v{v + 1}" for v in range(n)),
    )


def validate_structure(model: MpnModel, topology: TopologyClass) -> None:
    """Assert the structural contract of the topology class; raises on breach."""
    dag = model.dag
    n = dag.node_count
    if n != topology.node_count:
        raise ValueError("node count mismatch")
    indegrees = [len(dag.parents(v)) for v in range(n)]
    roots = [v for v in range(n) if indegrees[v] == 0]
    expected_gate = _KIND_LOGIC[topology.kind]
    for v in range(n):
        if indegrees[v] and model.logic[v] != expected_gate:
            raise ValueError(f"node {v}: expected {expected_gate!r} gate")
    if topology.kind in ("tree", "forest"):
        if any(d > 1 for d in indegrees):
            raise ValueError("tree/forest nodes have at most one parent")
        if topology.kind == "tree" and len(roots) != 1:
            raise ValueError(f"tree must have exactly 1 root, found {len(roots)}")
        if topology.kind == "forest" and not 2 <= len(roots) <= n // 3:
            raise ValueError(f"forest must have 2..{n // 3} roots, found {len(roots)}")
        # in-degree <= 1 with no cycles makes each component a rooted tree
        if len(dag.edges) != n - len(roots):
            raise ValueError("component structure broken")
    else:
        single = topology.kind.startswith("dag_single_source")
        if single and len(roots) != 1:
            raise ValueError(f"expected a unique source, found {len(roots)}")
        if not single and len(roots) < 2:
            raise ValueError(f"expected >= 2 sources, found {len(roots)}")
        if any(indegrees[v] not in (1, 2, 3) for v in range(n) if v not in roots):
            raise ValueError("non-source in-degree must be 1..3")


def sample_dataset(model: MpnModel, sample_count: int, seed: int) -> Dataset:
    """Forward-sample the model in topological order; one row per sample."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    n = model.dag.node_count
    cells = np.zeros((sample_count, n), dtype=np.uint8)
    for v in model.dag.topological_order:
        draws = rng.random(sample_count)
        parents = model.dag.parents(v)
        if not parents:
            cells[:, v] = draws < model.source_marginal
            continue
        fired = cells[:, parents].sum(axis=1)
        gate = model.logic[v]
        if gate == "and":
            condition = fired == len(parents)
        elif gate == "or":
            condition = fired >= 1
        else:  # xor
            condition = fired == 1
        threshold = np.where(condition, model.activation, model.spontaneous)
        cells[:, v] = draws < threshold
    return Dataset(
        cells=cells,
        event_names=model.event_names,
        sample_ids=tuple(f"s{r + 1}" for r in range(sample_count)),
    )


def apply_noise(dataset: Dataset, spec: NoiseSpec) -> Dataset:
    """Corrupt cells independently at the configured rate; determinstic per seed."""
    if spec.level == 0.0:
        return dataset
    rng = np.random.default_rng(spec.seed)
    hit = rng.random(dataset.cells.shape) < spec.level
    if spec.mode == "coin":
        coin = rng.integers(0, 2, size=dataset.cells.shape, dtype=np.uint8)
        cells = np.where(hit, coin, dataset.cells)
    else:
        cells = np.where(hit, 1 - dataset.cells, dataset.cells)
    return Dataset(
        cells=cells.astype(np.uint8),
        event_names=dataset.event_names,
        sample_ids=dataset.sample_ids,
    )


def make_xor_formulas(model: MpnModel) -> tuple[CnfFormula, ...]:
    """Exactly-one-parent CNF for every XOR node, named after the child.

    Uses the standard pairwise encoding: one clause requiring some parent,
    plus one (not a, not b) clause per parent pair.
    """
    xor_nodes = model.xor_nodes()
    if not xor_nodes:
        raise ValueError("model has no XOR nodes")
    formulas = []
    for v in xor_nodes:
        parents = model.dag.parents(v)
        clauses: list[tuple[tuple[int, bool], ...]] = [
            tuple((p, False) for p in parents)
        ]
        for a_index, a in enumerate(parents):
            for b in parents[a_index + 1 :]:
                clauses.append(((a, True), (b, True)))
        formulas.append(
            CnfFormula(name=f"xor_{model.event_names[v]}", clauses=tuple(clauses))
        )
    return tuple(formulas)
