"""Reconstruction metrics, bootstrap edge confidence, and the benchmark grid.

The grid harness samples random progression models, corrupts the data, runs
every inference variant, and scores the result against the generating DAG
over all n*(n-1) ordered node pairs.  Output is plain delimited text: one
row per run plus per-cell mean/standard-deviation aggregates.  Cells are
cached on disk under a content-addressed key, so interrupted runs resume
and reruns with the same configuration reuse finished work.
"""

from __future__ import annotations

import hashlib
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from sbcn.data import Dag, Dataset, lift_dataset
from sbcn.generate import (
    KINDS,
    MpnModel,
    NoiseSpec,
    TopologyClass,
    apply_noise,
    make_xor_formulas,
    random_structure,
    sample_dataset,
    validate_structure,
)
from sbcn.scoring import ScoreConfig
from sbcn.search import (
    FamilyScoreCache,
    SearchConfig,
    hill_climb,
    infer_sbcn,
    prima_facie_network,
)
from sbcn.seeds import derive_seed
from sbcn.suppes import ConditionTestConfig, prima_facie

__all__ = [
    "AGGREGATE_FIELDS",
    "DEFAULT_CLASSES",
    "ROW_FIELDS",
    "VARIANTS",
    "Confusion",
    "EdgeConfidence",
    "ExperimentGrid",
    "GridResult",
    "Metrics",
    "bootstrap_confidence",
    "confusion",
    "metrics",
    "run_grid",
]

# the six benchmark families; xor classes are opt-in extras
DEFAULT_CLASSES = KINDS[:6]

VARIANTS = ("prima_facie_only", "likelihood_none", "bic", "aic")

_VARIANT_REGULARIZER = {"likelihood_none": "none", "bic": "bic", "aic": "aic"}

# bump when row semantics change; part of the cell cache key
_FORMAT_VERSION = 1

ROW_FIELDS = (
    "class",
    "n",
    "m",
    "noise",
    "structure_id",
    "repetition",
    "variant",
    "tp",
    "fp",
    "tn",
    "fn",
    "accuracy",
    "sensitivity",
    "specificity",
    "score",
    "runtime_ms",
)

AGGREGATE_FIELDS = (
    "class",
    "n",
    "m",
    "noise",
    "variant",
    "runs",
    "failures",
    "mean_accuracy",
    "sd_accuracy",
    "mean_sensitivity",
    "sd_sensitivity",
    "mean_specificity",
    "sd_specificity",
    "mean_edges",
    "sd_edges",
)


@dataclass(frozen=True)
class Confusion:
    """Ordered-pair confusion counts of an inferred DAG against the truth."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


class Metrics(NamedTuple):
    accuracy: float
    sensitivity: float
    specificity: float


def confusion(truth: Dag, inferred: Dag) -> Confusion:
    """Compare edge sets over all ordered pairs; direction matters."""
    if truth.node_count != inferred.node_count:
        raise ValueError(
            f"node counts differ: truth {truth.node_count}, "
            f"inferred {inferred.node_count}"
        )
    tp = len(truth.edges & inferred.edges)
    fp = len(inferred.edges - truth.edges)
    fn = len(truth.edges - inferred.edges)
    n = truth.node_count
    tn = n * (n - 1) - tp - fp - fn
    return Confusion(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics(c: Confusion) -> Metrics:
    """Accuracy, sensitivity, specificity; zero denominators yield NaN."""

    def ratio(numerator: int, denominator: int) -> float:
        return numerator / denominator if denominator else math.nan

    return Metrics(
        accuracy=ratio(c.tp + c.tn, c.total),
        sensitivity=ratio(c.tp, c.tp + c.fn),
        specificity=ratio(c.tn, c.fp + c.tn),
    )


@dataclass(frozen=True)
class ExperimentGrid:
    """Benchmark axes and generation parameters for one grid run.

    Defaults reproduce the desk-scale protocol: six topology classes,
    n in {10, 15}, m in {50, 100, 150, 200}, nine noise levels from 0 to
    0.2, with 20 structures per class and 5 noisy samplings each, scored
    under all four inference variants.
    """

    classes: tuple[str, ...] = DEFAULT_CLASSES
    node_counts: tuple[int, ...] = (10, 15)
    sample_counts: tuple[int, ...] = (50, 100, 150, 200)
    noise_levels: tuple[float, ...] = (
        0.0,
        0.025,
        0.05,
        0.075,
        0.1,
        0.125,
        0.15,
        0.175,
        0.2,
    )
    structures_per_class: int = 20
    repetitions: int = 5
    variants: tuple[str, ...] = VARIANTS
    master_seed: int = 0
    activation: float = 0.9
    spontaneous: float = 0.05
    noise_mode: str = "coin"
    pseudocount: float = 0.0

    def __post_init__(self) -> None:
        for name in ("classes", "node_counts", "sample_counts", "noise_levels", "variants"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        for kind in self.classes:
            if kind not in KINDS:
                raise ValueError(f"unknown topology class {kind!r}")
        for variant in self.variants:
            if variant not in VARIANTS:
                raise ValueError(f"unknown variant {variant!r}")
        if len(set(self.variants)) != len(self.variants):
            raise ValueError("variants must be unique")
        if self.structures_per_class < 1 or self.repetitions < 1:
            raise ValueError("structures_per_class and repetitions must be >= 1")
        for level in self.noise_levels:
            if not 0.0 <= level <= 1.0:
                raise ValueError("noise levels must lie in [0, 1]")

    @classmethod
    def full_scale(cls, **overrides) -> "ExperimentGrid":
        """Full-size protocol: 100 structures, 10 repetitions per structure."""
        overrides.setdefault("structures_per_class", 100)
        overrides.setdefault("repetitions", 10)
        return cls(**overrides)

    def cells(self) -> "list[tuple[str, int, int, float]]":
        return [
            (kind, n, m, noise)
            for kind in self.classes
            for n in self.node_counts
            for m in self.sample_counts
            for noise in self.noise_levels
        ]


@dataclass(frozen=True)
class GridResult:
    """Where a grid run wrote its tables and how much work it reused."""

    results_path: Path
    aggregates_path: Path
    errors_path: Path
    row_count: int
    error_count: int
    cells_total: int
    cells_computed: int
    cells_reused: int


def _cell_key(grid: ExperimentGrid, kind: str, n: int, m: int, noise: float) -> str:
    """Content address for one cell: any input that changes rows changes the key."""
    payload = "\x1f".join(
        str(part)
        for part in (
            _FORMAT_VERSION,
            grid.master_seed,
            kind,
            n,
            m,
            noise,
            grid.structures_per_class,
            grid.repetitions,
            ",".join(grid.variants),
            grid.activation,
            grid.spontaneous,
            grid.noise_mode,
            grid.pseudocount,
        )
    )
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
    return f"{kind}-n{n}-m{m}-noise{noise}-{digest}"


def _infer_variant(
    variant: str,
    dataset: Dataset,
    poset,
    cache: FamilyScoreCache,
    pseudocount: float,
):
    if variant == "prima_facie_only":
        return prima_facie_network(
            dataset, poset, ScoreConfig(regularizer="none", pseudocount=pseudocount)
        )
    config = SearchConfig(
        score=ScoreConfig(
            regularizer=_VARIANT_REGULARIZER[variant], pseudocount=pseudocount
        )
    )
    network, _ = hill_climb(dataset, poset, config, cache=cache)
    return network


def _xor_constituents(formulas) -> dict[int, tuple[int, ...]]:
    """Formula column offset -> the original variables it mentions."""
    out = {}
    for offset, formula in enumerate(formulas):
        seen = sorted({index for clause in formula.clauses for index, _ in clause})
        out[offset] = tuple(seen)
    return out


def _event_level_dag(
    inferred: Dag, node_count: int, constituents: "dict[int, tuple[int, ...]] | None"
) -> Dag:
    """Project an inferred DAG back onto the original events.

    Plain runs pass constituents=None (identity).  Lifted runs have only
    formula-to-event edges; each one stands for the bundle of edges from the
    formula's constituent variables to the target event.
    """
    if constituents is None:
        return inferred
    edges = set()
    for parent, child in inferred.edges:
        for variable in constituents[parent - node_count]:
            if variable != child:
                edges.add((variable, child))
    return Dag(node_count=node_count, edges=frozenset(edges))


def _run_one(
    grid: ExperimentGrid,
    model: MpnModel,
    kind: str,
    n: int,
    m: int,
    noise: float,
    structure_id: int,
    repetition: int,
) -> "list[tuple]":
    """All variant rows for one (structure, repetition) draw within a cell."""
    data_seed = derive_seed(grid.master_seed, "data", kind, n, m, structure_id, repetition)
    noise_seed = derive_seed(
        grid.master_seed, "noise", kind, n, m, structure_id, repetition, str(noise)
    )
    clean = sample_dataset(model, m, data_seed)
    noisy = apply_noise(clean, NoiseSpec(level=noise, seed=noise_seed, mode=grid.noise_mode))

    if model.xor_nodes():
        formulas = make_xor_formulas(model)
        search_data = lift_dataset(noisy, formulas)
        formula_columns = range(n, n + len(formulas))
        poset = prima_facie(search_data).restrict(
            sources=formula_columns, targets=range(n)
        )
        constituents = _xor_constituents(formulas)
    else:
        search_data = noisy
        poset = prima_facie(search_data)
        constituents = None

    cache = FamilyScoreCache(search_data, pseudocount=grid.pseudocount)
    rows = []
    for variant in grid.variants:
        started = time.perf_counter()
        scored = _infer_variant(variant, search_data, poset, cache, grid.pseudocount)
        event_dag = _event_level_dag(scored.network.dag, n, constituents)
        runtime_ms = (time.perf_counter() - started) * 1000.0
        c = confusion(model.dag, event_dag)
        mets = metrics(c)
        rows.append(
            (
                kind,
                n,
                m,
                noise,
                structure_id,
                repetition,
                variant,
                c.tp,
                c.fp,
                c.tn,
                c.fn,
                mets.accuracy,
                mets.sensitivity,
                mets.specificity,
                scored.score,
                runtime_ms,
            )
        )
    return rows


def _format_row(row: tuple) -> str:
    parts = []
    for value in row:
        parts.append(repr(value) if isinstance(value, float) else str(value))
    return "\t".join(parts)


_ERROR_PREFIX = "#error\t"


def _compute_cell(args: "tuple[ExperimentGrid, str, int, int, float]") -> "tuple[str, str]":
    """Worker: all rows of one cell, rendered as shard text.

    Error lines are embedded with a marker prefix so a shard stays a single
    resumable artifact; a failed run still emits a row with zeroed counts
    and NaN metrics, which downstream aggregation skips.
    """
    grid, kind, n, m, noise = args
    lines: list[str] = []
    for structure_id in range(grid.structures_per_class):
        structure_seed = derive_seed(grid.master_seed, "structure", kind, n, structure_id)
        model = random_structure(
            TopologyClass(kind=kind, node_count=n),
            structure_seed,
            activation=grid.activation,
            spontaneous=grid.spontaneous,
        )
        validate_structure(model, TopologyClass(kind=kind, node_count=n))
        for repetition in range(grid.repetitions):
            try:
                rows = _run_one(grid, model, kind, n, m, noise, structure_id, repetition)
            except Exception as exc:  # record and continue; the grid never aborts
                message = f"{type(exc).__name__}: {exc}".replace("\t", " ").replace("\n", " ")
                rows = []
                for variant in grid.variants:
                    head = (kind, n, m, noise, structure_id, repetition, variant)
                    lines.append(_ERROR_PREFIX + _format_row(head + (message,)))
                    rows.append(
                        head + (0, 0, 0, 0, math.nan, math.nan, math.nan, math.nan, 0.0)
                    )
            lines.extend(_format_row(row) for row in rows)
    return _cell_key(grid, kind, n, m, noise), "\n".join(lines) + "\n"


def _nan_mean(values: "list[float]") -> float:
    kept = [v for v in values if not math.isnan(v)]
    return math.fsum(kept) / len(kept) if kept else math.nan


def _nan_sd(values: "list[float]") -> float:
    kept = [v for v in values if not math.isnan(v)]
    if not kept:
        return math.nan
    mean = math.fsum(kept) / len(kept)
    return math.sqrt(math.fsum((v - mean) ** 2 for v in kept) / len(kept))


def _aggregate_lines(grid: ExperimentGrid, shard_lines: "list[str]") -> "list[str]":
    """Per-cell mean/sd rows recomputed purely from emitted row text."""
    groups: dict[tuple, list[tuple]] = {}
    for line in shard_lines:
        fields = line.split("\t")
        key = tuple(fields[:4]) + (fields[6],)
        tp, fp = int(fields[7]), int(fields[8])
        tn, fn = int(fields[9]), int(fields[10])
        failed = tp + fp + tn + fn == 0
        groups.setdefault(key, []).append(
            (
                failed,
                float(fields[11]),
                float(fields[12]),
                float(fields[13]),
                float(tp + fp),
            )
        )
    variant_order = {variant: i for i, variant in enumerate(grid.variants)}
    class_order = {kind: i for i, kind in enumerate(grid.classes)}

    def sort_key(key: tuple):
        kind, n, m, noise, variant = key
        return (class_order[kind], int(n), int(m), float(noise), variant_order[variant])

    lines = []
    for key in sorted(groups, key=sort_key):
        entries = groups[key]
        ok = [e for e in entries if not e[0]]
        accuracy = [e[1] for e in ok]
        sensitivity = [e[2] for e in ok]
        specificity = [e[3] for e in ok]
        edges = [e[4] for e in ok]
        stats = (
            len(ok),
            len(entries) - len(ok),
            _nan_mean(accuracy),
            _nan_sd(accuracy),
            _nan_mean(sensitivity),
            _nan_sd(sensitivity),
            _nan_mean(specificity),
            _nan_sd(specificity),
            _nan_mean(edges),
            _nan_sd(edges),
        )
        lines.append("\t".join(list(key) + [_format_row((v,)) for v in stats]))
    return lines


def run_grid(
    grid: ExperimentGrid,
    output_dir: "str | Path",
    jobs: int = 1,
    progress: "Callable[[int, int, str], None] | None" = None,
) -> GridResult:
    """Execute the grid, reusing any finished cell shards found in output_dir.

    Workers compute whole cells and hand text back to the parent, which is
    the only process that writes.  Tables are assembled in grid coordinate
    order, so the output is independent of job count and completion order.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    out = Path(output_dir)
    cell_dir = out / "cells"
    cell_dir.mkdir(parents=True, exist_ok=True)

    cells = grid.cells()
    keyed = [(cell, _cell_key(grid, *cell)) for cell in cells]
    pending = [cell for cell, key in keyed if not (cell_dir / f"{key}.tsv").exists()]
    done = len(cells) - len(pending)

    def write_shard(key: str, text: str) -> None:
        path = cell_dir / f"{key}.tsv"
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)

    work = [(grid,) + cell for cell in pending]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, text in pool.map(_compute_cell, work, chunksize=1):
                write_shard(key, text)
                done += 1
                if progress is not None:
                    progress(done, len(cells), key)
    else:
        for args in work:
            key, text = _compute_cell(args)
            write_shard(key, text)
            done += 1
            if progress is not None:
                progress(done, len(cells), key)

    row_lines: list[str] = []
    error_lines: list[str] = []
    for cell, key in keyed:
        text = (cell_dir / f"{key}.tsv").read_text(encoding="utf-8")
        for line in text.splitlines():
            if line.startswith(_ERROR_PREFIX):
                error_lines.append(line[len(_ERROR_PREFIX) :])
            elif line:
                row_lines.append(line)

    results_path = out / "results.tsv"
    aggregates_path = out / "aggregates.tsv"
    errors_path = out / "errors.tsv"
    results_path.write_text(
        "\t".join(ROW_FIELDS) + "\n" + "".join(line + "\n" for line in row_lines),
        encoding="utf-8",
    )
    aggregates_path.write_text(
        "\t".join(AGGREGATE_FIELDS)
        + "\n"
        + "".join(line + "\n" for line in _aggregate_lines(grid, row_lines)),
        encoding="utf-8",
    )
    error_header = "\t".join(ROW_FIELDS[:7] + ("error",))
    errors_path.write_text(
        error_header + "\n" + "".join(line + "\n" for line in error_lines),
        encoding="utf-8",
    )
    return GridResult(
        results_path=results_path,
        aggregates_path=aggregates_path,
        errors_path=errors_path,
        row_count=len(row_lines),
        error_count=len(error_lines),
        cells_total=len(cells),
        cells_computed=len(pending),
        cells_reused=len(cells) - len(pending),
    )


@dataclass(frozen=True)
class EdgeConfidence:
    """Fraction of bootstrap replicates that re-infer each ordered pair."""

    node_count: int
    event_names: tuple[str, ...]
    frequency: np.ndarray = field(repr=False)
    replicates: int

    def __post_init__(self) -> None:
        if self.frequency.shape != (self.node_count, self.node_count):
            raise ValueError("frequency must be a node_count x node_count matrix")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if float(self.frequency.min(initial=0.0)) < 0.0 or float(
            self.frequency.max(initial=0.0)
        ) > 1.0:
            raise ValueError("frequencies must lie in [0, 1]")
        self.frequency.setflags(write=False)

    def confidence(self, parent: int, child: int) -> float:
        return float(self.frequency[parent, child])

    def edges_at_least(self, threshold: float) -> "tuple[tuple[int, int], ...]":
        pairs = np.argwhere(self.frequency >= threshold)
        return tuple(
            (int(i), int(j)) for i, j in pairs if i != j
        )


def _bootstrap_replicate(args) -> "tuple[tuple[int, int], ...]":
    dataset, condition_config, search_config, replicate_seed = args
    rng = np.random.default_rng(replicate_seed)
    rows = rng.integers(0, dataset.n_samples, dataset.n_samples)
    resample = Dataset(
        cells=dataset.cells[rows],
        event_names=dataset.event_names,
        sample_ids=tuple(f"b{r + 1}" for r in range(dataset.n_samples)),
    )
    scored = infer_sbcn(resample, condition_config, search_config)
    return tuple(sorted(scored.network.dag.edges))


def bootstrap_confidence(
    dataset: Dataset,
    condition_config: "ConditionTestConfig | None" = None,
    search_config: "SearchConfig | None" = None,
    replicates: int = 100,
    seed: int = 0,
    jobs: int = 1,
) -> EdgeConfidence:
    """Re-infer on row resamples and tally how often each edge survives."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    work = [
        (dataset, condition_config, search_config, derive_seed(seed, "replicate", r))
        for r in range(replicates)
    ]
    tallies = np.zeros((dataset.n_events, dataset.n_events), dtype=np.int64)
    if jobs > 1 and replicates > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            edge_sets = list(pool.map(_bootstrap_replicate, work, chunksize=8))
    else:
        edge_sets = [_bootstrap_replicate(args) for args in work]
    for edges in edge_sets:
        for parent, child in edges:
            tallies[parent, child] += 1
    return EdgeConfidence(
        node_count=dataset.n_events,
        event_names=dataset.event_names,
        frequency=tallies / float(replicates),
        replicates=replicates,
    )
