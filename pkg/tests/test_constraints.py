"""Unit tests for independence systems and the q-parameter estimate."""

import math

import pytest

from taskalloc.constraints import (
    BudgetConstraint,
    CompositeConstraint,
    ConflictFreeConstraint,
    PartitionConstraint,
    estimate_q,
    verify_q_property,
)
from taskalloc.core import ContractViolation, GroundElement, make_policy


class TestPartitionConstraint:
    def test_accepts_one_target_per_agent(self):
        c = PartitionConstraint(2, 3)
        assert c.is_independent(make_policy([(1, 2), (2, 2)]))

    def test_rejects_double_assignment(self):
        c = PartitionConstraint(2, 3)
        assert not c.is_independent(make_policy([(1, 1), (1, 2)]))

    def test_hereditary(self):
        c = PartitionConstraint(3, 3)
        full = make_policy([(1, 1), (2, 2), (3, 3)])
        assert c.is_independent(full)
        for el in full:
            assert c.is_independent(full - {el})

    def test_empty_is_independent(self):
        assert PartitionConstraint(2, 2).is_independent(frozenset())


class TestConflictFreeConstraint:
    def test_rejects_shared_target(self):
        c = ConflictFreeConstraint(3, 2)
        assert not c.is_independent(make_policy([(1, 1), (2, 1)]))

    def test_accepts_distinct_targets(self):
        c = ConflictFreeConstraint(3, 3)
        assert c.is_independent(make_policy([(1, 1), (2, 3)]))


class TestBudgetConstraint:
    def test_within_budget(self):
        c = BudgetConstraint([1.0, 1.0], [[0.6, 0.6], [0.6, 0.6]])
        assert c.is_independent(make_policy([(1, 1)]))

    def test_over_budget(self):
        c = BudgetConstraint([1.0], [[0.6, 0.6]])
        assert not c.is_independent(make_policy([(1, 1), (1, 2)]))

    def test_rejects_nonpositive_costs(self):
        with pytest.raises(ContractViolation):
            BudgetConstraint([1.0], [[0.0]])

    def test_rejects_negative_budget(self):
        with pytest.raises(ContractViolation):
            BudgetConstraint([-0.5], [[1.0]])


class TestCompositeConstraint:
    def test_conjunction(self):
        c = CompositeConstraint([
            PartitionConstraint(2, 2),
            ConflictFreeConstraint(2, 2),
        ])
        assert c.is_independent(make_policy([(1, 1), (2, 2)]))
        assert not c.is_independent(make_policy([(1, 1), (2, 1)]))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ContractViolation):
            CompositeConstraint([
                PartitionConstraint(2, 2), PartitionConstraint(3, 2),
            ])

    def test_empty_parts_rejected(self):
        with pytest.raises(ContractViolation):
            CompositeConstraint([])


class TestEstimateQ:
    def test_uniform_costs(self):
        assert estimate_q([[1.0, 1.0], [1.0, 1.0]]).q == 2

    def test_ratio_and_witnesses(self):
        est = estimate_q([[0.5, 2.0], [1.0, 1.5]])
        assert est.q == math.ceil(1.0 + 2.0 / 0.5)
        assert est.argmax == (1, 2) and est.argmin == (1, 1)

    def test_rejects_zero_cost(self):
        with pytest.raises(ContractViolation):
            estimate_q([[1.0, 0.0]])

    def test_rejects_empty_table(self):
        with pytest.raises(ContractViolation):
            estimate_q([])


class TestVerifyQProperty:
    def test_partition_alone_is_matroid(self):
        system = PartitionConstraint(2, 3)
        ground = [GroundElement(i, j) for i in (1, 2) for j in (1, 2, 3)]
        result = verify_q_property(system, ground, q_claim=1.0)
        assert result.passes and result.worst_ratio == 1.0

    def test_budget_system_respects_q(self):
        costs = [[0.5, 1.4], [0.9, 1.2]]
        budgets = [1.5, 1.5]
        system = CompositeConstraint([
            PartitionConstraint(2, 2),
            ConflictFreeConstraint(2, 2),
            BudgetConstraint(budgets, costs),
        ])
        ground = [GroundElement(i, j) for i in (1, 2) for j in (1, 2)]
        result = verify_q_property(system, ground, q_claim=estimate_q(costs).q)
        assert result.passes

    def test_failing_claim_reports_witness(self):
        # Budget 1.0 admits one expensive or two cheap pairs for agent 1,
        # giving a basis-size ratio of 2 on the right subset.
        costs = [[0.5, 0.5, 1.0]]
        system = BudgetConstraint([1.0], costs)
        ground = [GroundElement(1, j) for j in (1, 2, 3)]
        result = verify_q_property(system, ground, q_claim=1.0)
        assert not result.passes
        assert result.worst_ratio == 2.0
        assert result.witness is not None
