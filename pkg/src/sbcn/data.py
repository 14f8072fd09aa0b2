"""Binary cross-sectional datasets, DAGs, CPTs and CNF formulas.

Columns are Bernoulli events observed once per sample, with no timestamps;
every probability estimate downstream is a plain relative frequency over
rows.  All types here are immutable after construction and safe to share
across worker processes.
"""

from __future__ import annotations

import heapq
import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "CnfFormula",
    "Cpt",
    "Dag",
    "DataError",
    "Dataset",
    "Network",
    "ParseError",
    "SchemaError",
    "UndefinedConditionalError",
    "conditional",
    "eval_cnf",
    "format_formula",
    "joint",
    "lift_dataset",
    "load_dataset",
    "load_formulas",
    "marginal",
    "parse_formula",
    "save_dataset",
]


class DataError(ValueError):
    """Base class for dataset and formula construction failures."""


class ParseError(DataError):
    """A cell or token that cannot be interpreted, with its location."""


class SchemaError(DataError):
    """Structurally invalid input: bad header, ragged rows, name clashes."""


class UndefinedConditionalError(DataError):
    """Conditioning event has empty support."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sample-by-event binary matrix with named rows and columns.

    Column order is the canonical variable order used everywhere downstream.
    """

    cells: np.ndarray
    event_names: tuple[str, ...]
    sample_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if cells.ndim != 2:
            raise SchemaError("cells must be a two-dimensional matrix")
        m, n = cells.shape
        if m < 1:
            raise SchemaError("dataset needs at least one sample row (m >= 1)")
        if n < 1:
            raise SchemaError("dataset needs at least one event column (n >= 1)")
        if cells.max() > 1:
            raise ParseError("cells must contain only 0 or 1")
        names = tuple(self.event_names)
        if len(names) != n:
            raise SchemaError(f"{len(names)} event names for {n} columns")
        seen: set[str] = set()
        for name in names:
            if not name:
                raise SchemaError("empty event name")
            if name in seen:
                raise SchemaError(f"duplicate event name {name!r}")
            seen.add(name)
        ids = tuple(self.sample_ids)
        if len(ids) != m:
            raise SchemaError(f"{len(ids)} sample ids for {m} rows")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "event_names", names)
        object.__setattr__(self, "sample_ids", ids)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Dataset)
            and self.event_names == other.event_names
            and self.sample_ids == other.sample_ids
            and np.array_equal(self.cells, other.cells)
        )

    @property
    def n_samples(self) -> int:
        return self.cells.shape[0]

    @property
    def n_events(self) -> int:
        return self.cells.shape[1]

    @cached_property
    def ones_count(self) -> np.ndarray:
        """Per-column count of 1 cells (read-only int64 vector)."""
        counts = self.cells.sum(axis=0, dtype=np.int64)
        counts.setflags(write=False)
        return counts

    @cached_property
    def pair_count(self) -> np.ndarray:
        """n x n co-occurrence counts: entry (i, j) = rows with both 1."""
        wide = self.cells.astype(np.int64)
        pairs = wide.T @ wide
        pairs.setflags(write=False)
        return pairs

    def event_index(self, event: "int | str") -> int:
        if isinstance(event, str):
            try:
                return self.event_names.index(event)
            except ValueError:
                raise SchemaError(f"unknown event name {event!r}") from None
        index = int(event)
        if not 0 <= index < self.n_events:
            raise IndexError(f"event index {index} out of range [0, {self.n_events})")
        return index

    def degenerate_events(self) -> tuple[int, ...]:
        """Columns with marginal 0 or 1; excluded from causal claims downstream."""
        counts = self.ones_count
        m = self.n_samples
        return tuple(int(v) for v in np.flatnonzero((counts == 0) | (counts == m)))


def marginal(dataset: Dataset, event: "int | str") -> float:
    """Relative frequency of the event being 1."""
    v = dataset.event_index(event)
    return float(dataset.ones_count[v]) / dataset.n_samples


def joint(dataset: Dataset, first: "int | str", second: "int | str") -> float:
    """Relative frequency of both events being 1 in the same row."""
    i = dataset.event_index(first)
    j = dataset.event_index(second)
    if i == j:
        raise ValueError("joint requires two distinct events")
    return float(dataset.pair_count[i, j]) / dataset.n_samples


def conditional(
    dataset: Dataset, effect: "int | str", cause: "int | str", cause_value: int = 1
) -> float:
    """P(effect = 1 | cause = cause_value), raising when the condition is empty."""
    e = dataset.event_index(effect)
    c = dataset.event_index(cause)
    if e == c:
        raise ValueError("conditional requires two distinct events")
    if cause_value not in (0, 1):
        raise ValueError(f"cause_value must be 0 or 1, got {cause_value!r}")
    cause_count = int(dataset.ones_count[c])
    support = cause_count if cause_value == 1 else dataset.n_samples - cause_count
    if support == 0:
        raise UndefinedConditionalError(
            f"conditioning event (column {c} == {cause_value}) has empty support"
        )
    if cause_value == 1:
        hits = int(dataset.pair_count[e, c])
    else:
        hits = int(dataset.ones_count[e]) - int(dataset.pair_count[e, c])
    return hits / support


# ---------------------------------------------------------------------------
# delimited text I/O

def _detect_delimiter(header: str) -> str:
    return "\t" if "\t" in header else ","


def load_dataset(source) -> Dataset:
    """Parse a delimited text dataset (path, file object, or text).

    First row is a header: a sample-id column label followed by event names.
    The delimiter (comma or tab) is auto-detected from the header.  Data rows
    hold the sample id and then strictly "0"/"1" cells.
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, (str, Path)) and "\n" not in str(source):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    lines = text.splitlines()
    rows = [(number, line) for number, line in enumerate(lines, start=1) if line.strip()]
    if not rows:
        raise SchemaError("empty input: missing header row")
    _, header = rows[0]
    delimiter = _detect_delimiter(header)
    fields = [f.strip() for f in header.split(delimiter)]
    if len(fields) < 2:
        raise SchemaError("header must name a sample-id column and at least one event")
    event_names = tuple(fields[1:])
    if len(rows) == 1:
        raise SchemaError("no data rows (m >= 1 required)")
    n = len(event_names)
    sample_ids: list[str] = []
    cells = np.empty((len(rows) - 1, n), dtype=np.uint8)
    for r, (line_number, line) in enumerate(rows[1:], start=1):
        parts = line.split(delimiter)
        if len(parts) != n + 1:
            raise SchemaError(
                f"row {r} (line {line_number}): expected {n + 1} fields, found {len(parts)}"
            )
        sample_ids.append(parts[0].strip())
        for c, token in enumerate(parts[1:]):
            token = token.strip()
            if token == "0":
                cells[r - 1, c] = 0
            elif token == "1":
                cells[r - 1, c] = 1
            else:
                raise ParseError(
                    f"row {r} (line {line_number}), column {event_names[c]!r}: "
                    f"expected 0 or 1, found {token!r}"
                )
    return Dataset(cells=cells, event_names=event_names, sample_ids=tuple(sample_ids))


def save_dataset(dataset: Dataset, target, delimiter: str = ",") -> None:
    """Write a dataset in the delimited text format accepted by load_dataset."""
    if delimiter not in (",", "\t"):
        raise ValueError("delimiter must be a comma or a tab")
    out = io.StringIO()
    out.write(delimiter.join(("sample",) + dataset.event_names) + "\n")
    for row_id, row in zip(dataset.sample_ids, dataset.cells):
        out.write(delimiter.join((row_id,) + tuple("1" if v else "0" for v in row)) + "\n")
    text = out.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# DAGs and CPTs

@dataclass(frozen=True, eq=True)
class Dag:
    """Directed acyclic graph over node indices 0..node_count-1."""

    node_count: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "edges", frozenset((int(a), int(b)) for a, b in self.edges)
        )
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")
        for a, b in self.edges:
            if not (0 <= a < self.node_count and 0 <= b < self.node_count):
                raise ValueError(f"edge ({a}, {b}) out of range")
            if a == b:
                raise ValueError(f"self-loop on node {a}")
        self.topological_order  # raises on cycles

    @cached_property
    def _parent_map(self) -> tuple[tuple[int, ...], ...]:
        parents: list[list[int]] = [[] for _ in range(self.node_count)]
        for a, b in self.edges:
            parents[b].append(a)
        return tuple(tuple(sorted(p)) for p in parents)

    def parents(self, node: int) -> tuple[int, ...]:
        return self._parent_map[node]

    def children(self, node: int) -> tuple[int, ...]:
        return tuple(sorted(b for a, b in self.edges if a == node))

    @cached_property
    def topological_order(self) -> tuple[int, ...]:
        """Kahn's algorithm, smallest-index-first for determinism."""
        indegree = [0] * self.node_count
        out: list[list[int]] = [[] for _ in range(self.node_count)]
        for a, b in self.edges:
            indegree[b] += 1
            out[a].append(b)
        ready = [v for v in range(self.node_count) if indegree[v] == 0]
        heapq.heapify(ready)
        order: list[int] = []
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for w in out[v]:
                indegree[w] -= 1
                if indegree[w] == 0:
                    heapq.heappush(ready, w)
        if len(order) != self.node_count:
            raise ValueError("graph contains a directed cycle")
        return tuple(order)

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


@dataclass(frozen=True, eq=False)
class Cpt:
    """Conditional probability table of one node.

    Configuration indices address the parents in ascending node order: bit t
    of the index is the observed value of parents[t].
    """

    event: int
    parents: tuple[int, ...]
    p_one: np.ndarray
    zero_support: np.ndarray

    def __post_init__(self) -> None:
        parents = tuple(int(p) for p in self.parents)
        if list(parents) != sorted(set(parents)):
            raise ValueError("parents must be strictly increasing")
        p_one = np.ascontiguousarray(self.p_one, dtype=np.float64)
        zero = np.ascontiguousarray(self.zero_support, dtype=bool)
        expected = 1 << len(parents)
        if p_one.shape != (expected,) or zero.shape != (expected,):
            raise ValueError(
                f"table must have one entry per parent configuration ({expected})"
            )
        if np.any((p_one < 0.0) | (p_one > 1.0)):
            raise ValueError("probabilities must lie in [0, 1]")
        p_one.setflags(write=False)
        zero.setflags(write=False)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "p_one", p_one)
        object.__setattr__(self, "zero_support", zero)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Cpt)
            and self.event == other.event
            and self.parents == other.parents
            and np.array_equal(self.p_one, other.p_one)
            and np.array_equal(self.zero_support, other.zero_support)
        )


@dataclass(frozen=True, eq=False)
class Network:
    """A DAG plus one fitted CPT per node, sharing the dataset's event names."""

    dag: Dag
    cpts: tuple[Cpt, ...]
    event_names: tuple[str, ...]

    def __post_init__(self) -> None:
        n = self.dag.node_count
        if len(self.cpts) != n:
            raise ValueError(f"{len(self.cpts)} CPTs for {n} nodes")
        if len(self.event_names) != n:
            raise ValueError(f"{len(self.event_names)} event names for {n} nodes")
        for v, cpt in enumerate(self.cpts):
            if cpt.event != v:
                raise ValueError(f"CPT at position {v} describes node {cpt.event}")
            if cpt.parents != self.dag.parents(v):
                raise ValueError(f"CPT of node {v} disagrees with the DAG parent set")

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Network)
            and self.dag == other.dag
            and self.event_names == other.event_names
            and self.cpts == other.cpts
        )


# ---------------------------------------------------------------------------
# CNF formulas and dataset lifting

Literal = tuple[int, bool]  # (event index, negated flag)


@dataclass(frozen=True)
class CnfFormula:
    """Named conjunction of disjunctive clauses over event indices."""

    name: str
    clauses: tuple[tuple[Literal, ...], ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("formula needs a name")
        clauses = tuple(
            tuple((int(index), bool(negated)) for index, negated in clause)
            for clause in self.clauses
        )
        if not clauses:
            raise ValueError("formula needs at least one clause")
        for clause in clauses:
            if not clause:
                raise ValueError("clause needs at least one literal")
            if len(set(clause)) != len(clause):
                raise ValueError("duplicate literal within a clause")
            for index, _ in clause:
                if index < 0:
                    raise ValueError(f"literal index {index} out of range")
        object.__setattr__(self, "clauses", clauses)

    def max_index(self) -> int:
        return max(index for clause in self.clauses for index, _ in clause)


def eval_cnf(formula: CnfFormula, row: Sequence[int]) -> int:
    """Standard CNF semantics: 1 iff every clause has a satisfied literal."""
    values = np.asarray(row).ravel()
    if formula.max_index() >= values.shape[0]:
        raise IndexError(
            f"formula {formula.name!r} references column {formula.max_index()}, "
            f"row has {values.shape[0]}"
        )
    for clause in formula.clauses:
        if not any(bool(values[i]) != neg for i, neg in clause):
            return 0
    return 1


def _eval_cnf_column(formula: CnfFormula, cells: np.ndarray) -> np.ndarray:
    """Vectorized eval_cnf over every row of a cell matrix."""
    result = np.ones(cells.shape[0], dtype=bool)
    for clause in formula.clauses:
        clause_hit = np.zeros(cells.shape[0], dtype=bool)
        for index, negated in clause:
            column = cells[:, index].astype(bool)
            clause_hit |= ~column if negated else column
        result &= clause_hit
    return result.astype(np.uint8)


def lift_dataset(dataset: Dataset, formulas: Sequence[CnfFormula]) -> Dataset:
    """Append one Bernoulli column per formula, named after the formula."""
    if not formulas:
        return dataset
    taken = set(dataset.event_names)
    for formula in formulas:
        if formula.name in taken:
            raise SchemaError(f"formula name {formula.name!r} collides with an event")
        taken.add(formula.name)
        if formula.max_index() >= dataset.n_events:
            raise IndexError(
                f"formula {formula.name!r} references column {formula.max_index()}, "
                f"dataset has {dataset.n_events}"
            )
    new_columns = [_eval_cnf_column(f, dataset.cells) for f in formulas]
    cells = np.column_stack([dataset.cells] + new_columns)
    names = dataset.event_names + tuple(f.name for f in formulas)
    return Dataset(cells=cells, event_names=names, sample_ids=dataset.sample_ids)


# ---------------------------------------------------------------------------
# formula text syntax: name = clause & clause; clause = (lit | lit); lit = [!]event

_SPECIALS = set("()&|!=")


def _tokenize_formula(text: str) -> list[tuple[str, int]]:
    tokens: list[tuple[str, int]] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _SPECIALS:
            tokens.append((ch, i))
            i += 1
            continue
        start = i
        while i < len(text) and not text[i].isspace() and text[i] not in _SPECIALS:
            i += 1
        tokens.append((text[start:i], start))
    return tokens


class _FormulaParser:
    def __init__(self, text: str, event_names: Sequence[str]):
        self.text = text
        self.tokens = _tokenize_formula(text)
        self.pos = 0
        self.index_of = {name: i for i, name in enumerate(event_names)}

    def error(self, message: str) -> ParseError:
        at = self.tokens[self.pos][1] if self.pos < len(self.tokens) else len(self.text)
        return ParseError(f"formula {self.text!r}, offset {at}: {message}")

    def peek(self) -> str | None:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        token = self.peek()
        if token is None:
            raise self.error("unexpected end of formula")
        self.pos += 1
        return token

    def literal(self) -> Literal:
        negated = False
        if self.peek() == "!":
            self.take()
            negated = True
        token = self.take()
        if token in _SPECIALS:
            raise self.error(f"expected an event name, found {token!r}")
        if token not in self.index_of:
            raise self.error(f"unknown event name {token!r}")
        return (self.index_of[token], negated)

    def clause(self) -> tuple[Literal, ...]:
        if self.peek() == "(":
            self.take()
            literals = [self.literal()]
            while self.peek() == "|":
                self.take()
                literals.append(self.literal())
            if self.peek() != ")":
                raise self.error("expected ')' or '|'")
            self.take()
            return tuple(literals)
        return (self.literal(),)

    def formula(self, name: str) -> CnfFormula:
        clauses = [self.clause()]
        while self.peek() == "&":
            self.take()
            clauses.append(self.clause())
        if self.peek() is not None:
            raise self.error(f"unexpected token {self.peek()!r}")
        return CnfFormula(name=name, clauses=tuple(clauses))


def parse_formula(line: str, event_names: Sequence[str]) -> CnfFormula:
    """Parse one "name = cnf-expression" line against known event names."""
    if "=" not in line:
        raise ParseError(f"formula line {line!r} is missing 'name = expression'")
    name, _, expression = line.partition("=")
    name = name.strip()
    if not name or any(ch in _SPECIALS or ch.isspace() for ch in name):
        raise ParseError(f"invalid formula name {name!r}")
    parser = _FormulaParser(expression.strip(), event_names)
    return parser.formula(name)


def load_formulas(source, event_names: Sequence[str]) -> tuple[CnfFormula, ...]:
    """Read a formula file: one named CNF per line, '#' comments allowed."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")
    formulas = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        formulas.append(parse_formula(stripped, event_names))
    return tuple(formulas)


def format_formula(formula: CnfFormula, event_names: Sequence[str]) -> str:
    """Render a formula in the text syntax accepted by parse_formula."""
    parts = []
    for clause in formula.clauses:
        literals = " | ".join(
            ("!" if negated else "") + event_names[index] for index, negated in clause
        )
        parts.append(f"({literals})" if len(clause) > 1 else literals)
    return f"{formula.name} = " + " & ".join(parts)
