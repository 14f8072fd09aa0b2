"""Temporal priority, probability raising, and the admissible-edge poset."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbcn.data import Dataset, parse_formula
from sbcn.suppes import (
    ConditionTestConfig,
    PrimaFaciePoset,
    prima_facie,
    prima_facie_lifted,
    probability_raising,
    temporal_priority,
)

import _oracles


def _dataset(cells) -> Dataset:
    arr = np.array(cells, dtype=np.uint8)
    return Dataset(
        cells=arr,
        event_names=tuple(f"e{j}" for j in range(arr.shape[1])),
        sample_ids=tuple(f"s{i}" for i in range(arr.shape[0])),
    )


def test_toy_poset_frozen(toy_dataset):
    poset = prima_facie(toy_dataset)
    assert poset.allowed_edges == {(0, 1)}
    assert poset.node_count == 2
    assert poset.degenerate_events == ()
    diag = poset.diagnostics[(0, 1)]
    assert diag.temporal_priority and diag.probability_raising
    assert diag.delta_marginal == pytest.approx(0.25)
    # P(v1 | v0=1) - P(v1 | v0=0) = 2/3 - 0
    assert diag.delta_raising == pytest.approx(2 / 3)
    # the reverse pair fails temporal priority
    reverse = poset.diagnostics[(1, 0)]
    assert not reverse.temporal_priority


def test_identical_columns_admit_nothing():
    ds = _dataset([(1, 1), (0, 0), (1, 1), (0, 0)])
    poset = prima_facie(ds)
    # equal marginals fail the strict ordering in both directions
    assert poset.allowed_edges == frozenset()
    assert poset.diagnostics[(0, 1)].probability_raising
    assert not poset.diagnostics[(0, 1)].temporal_priority


def test_degenerate_columns_excluded():
    ds = _dataset([(1, 1, 0), (1, 0, 0), (1, 1, 0), (1, 0, 1)])
    poset = prima_facie(ds)
    assert poset.degenerate_events == (0,)
    assert all(0 not in pair for pair in poset.allowed_edges)
    assert all(0 not in pair for pair in poset.diagnostics)
    # degenerate cause still shows up in the raw TP relation
    assert (0, 1) in temporal_priority(ds)
    assert (0, 1) not in probability_raising(ds)


def test_independent_columns_no_raising():
    # perfectly balanced independent pair: joint = product exactly
    ds = _dataset([(1, 1), (1, 0), (0, 1), (0, 0)])
    assert probability_raising(ds) == set()
    assert prima_facie(ds).allowed_edges == frozenset()


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 5),
    st.integers(2, 16),
    st.randoms(use_true_random=False),
)
def test_poset_matches_oracle_and_is_antisymmetric(n, m, rng):
    cells = [tuple(rng.randint(0, 1) for _ in range(n)) for _ in range(m)]
    ds = _dataset(cells)
    poset = prima_facie(ds)
    assert poset.allowed_edges == frozenset(_oracles.prima_facie_edges(cells))
    for a, b in poset.allowed_edges:
        assert (b, a) not in poset.allowed_edges
        # admitted cause is strictly more frequent
        assert ds.ones_count[a] > ds.ones_count[b]


def test_poset_rejects_symmetric_pairs():
    with pytest.raises(ValueError, match="antisymmetry"):
        PrimaFaciePoset(node_count=2, allowed_edges=frozenset({(0, 1), (1, 0)}))


def test_poset_rejects_bad_edges():
    with pytest.raises(ValueError, match="invalid edge"):
        PrimaFaciePoset(node_count=2, allowed_edges=frozenset({(0, 4)}))


def test_parent_candidates_and_restrict(chain_dataset):
    poset = prima_facie(chain_dataset)
    assert (0, 1) in poset.allowed_edges
    assert poset.parent_candidates(2) == tuple(
        sorted(a for a, b in poset.allowed_edges if b == 2)
    )
    only_to_2 = poset.restrict(targets=[2])
    assert all(b == 2 for _, b in only_to_2.allowed_edges)
    assert all(pair[1] == 2 for pair in only_to_2.diagnostics)
    nothing = poset.restrict(sources=[], targets=[2])
    assert nothing.allowed_edges == frozenset()


# ---------------------------------------------------------------------------
# bootstrap mode


def test_bootstrap_without_resampling_equals_point_estimate(chain_dataset):
    point = prima_facie(chain_dataset)
    boot = prima_facie(
        chain_dataset,
        ConditionTestConfig(mode="bootstrap", replicates=3, resample=False,
                            confidence_level=0.95),
    )
    assert boot.allowed_edges == point.allowed_edges


def test_bootstrap_is_seed_deterministic(chain_dataset):
    cfg = ConditionTestConfig(mode="bootstrap", replicates=25, seed=5)
    a = prima_facie(chain_dataset, cfg)
    b = prima_facie(chain_dataset, cfg)
    assert a.allowed_edges == b.allowed_edges
    assert a.diagnostics[(0, 1)].tp_support == b.diagnostics[(0, 1)].tp_support


def test_bootstrap_supports_are_fractions(chain_dataset):
    cfg = ConditionTestConfig(mode="bootstrap", replicates=40, seed=1)
    poset = prima_facie(chain_dataset, cfg)
    for diag in poset.diagnostics.values():
        assert 0.0 <= diag.tp_support <= 1.0
        assert 0.0 <= diag.pr_support <= 1.0


def test_bootstrap_prunes_marginal_pairs():
    # two nearly tied columns: resampling flips the strict ordering often,
    # so a high confidence requirement should drop the edge
    rng = np.random.default_rng(0)
    m = 60
    a = (rng.random(m) < 0.52).astype(np.uint8)
    b = a.copy()
    flip = rng.random(m) < 0.06
    b[flip] = 1 - b[flip]
    ds = _dataset(np.column_stack([a, b]))
    point = prima_facie(ds)
    boot = prima_facie(
        ds, ConditionTestConfig(mode="bootstrap", replicates=200, seed=2,
                                confidence_level=0.99)
    )
    assert boot.allowed_edges <= point.allowed_edges


def test_bootstrap_low_confidence_rejected(chain_dataset):
    cfg = ConditionTestConfig(mode="bootstrap", confidence_level=0.4)
    with pytest.raises(ValueError, match="exceed 0.5"):
        prima_facie(chain_dataset, cfg)


def test_condition_config_validation():
    with pytest.raises(ValueError, match="unknown condition test mode"):
        ConditionTestConfig(mode="jackknife")
    with pytest.raises(ValueError, match="replicates"):
        ConditionTestConfig(replicates=0)
    with pytest.raises(ValueError, match="confidence_level"):
        ConditionTestConfig(confidence_level=1.0)


# ---------------------------------------------------------------------------
# lifted posets


def test_lifted_poset_edges_point_from_formulas(chain_dataset):
    f = parse_formula("a_and_b = a & b", chain_dataset.event_names)
    poset = prima_facie_lifted(chain_dataset, [f])
    assert poset.node_count == 4
    for src, dst in poset.allowed_edges:
        assert src == 3 and dst < 3
    # the conjunction column is rarer than a and b but P(c | a&b) is high
    assert (3, 2) in poset.allowed_edges


def test_lifted_poset_degenerate_formula():
    ds = _dataset([(1, 0), (0, 1), (1, 0), (0, 1)])
    f = parse_formula("never = e0 & e1", ds.event_names)
    poset = prima_facie_lifted(ds, [f])
    assert 2 in poset.degenerate_events
    assert poset.allowed_edges == frozenset()
