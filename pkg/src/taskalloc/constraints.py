"""Hereditary feasibility constraints on allocation policies.

The allocation problem is constrained by a hereditary independence system:
the empty policy is feasible and removing pairs never breaks feasibility.
The concrete systems here are the one-target-per-agent rule, the per-agent
cost budget, and their conjunction, whose worst-case basis-size ratio is
bounded by q = ceil(1 + max cost / min cost).
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

from .core import ContractViolation, GroundElement, Policy, SizeLimitExceeded


class IndependenceSystem(abc.ABC):
    """Predicate over policies: hereditary and containing the empty set."""

    n_agents: int
    n_targets: int

    @abc.abstractmethod
    def is_independent(self, policy: Policy) -> bool:
        ...

    def check_bounds(self, policy: Policy) -> None:
        for el in policy:
            if not (1 <= el.agent <= self.n_agents and 1 <= el.target <= self.n_targets):
                raise ContractViolation(f"element {el} outside ground dimensions")


class PartitionConstraint(IndependenceSystem):
    """Each agent holds at most one target."""

    def __init__(self, n_agents: int, n_targets: int):
        self.n_agents = n_agents
        self.n_targets = n_targets

    def is_independent(self, policy: Policy) -> bool:
        self.check_bounds(policy)
        agents = [el.agent for el in policy]
        return len(agents) == len(set(agents))


class ConflictFreeConstraint(IndependenceSystem):
    """Each target is held by at most one agent (conflict-free allocation)."""

    def __init__(self, n_agents: int, n_targets: int):
        self.n_agents = n_agents
        self.n_targets = n_targets

    def is_independent(self, policy: Policy) -> bool:
        self.check_bounds(policy)
        targets = [el.target for el in policy]
        return len(targets) == len(set(targets))


class BudgetConstraint(IndependenceSystem):
    """Per-agent sum of pair costs must stay within the agent's budget."""

    def __init__(self, budgets: Sequence[float], costs: Sequence[Sequence[float]]):
        self.budgets = [float(b) for b in budgets]
        self.costs = [[float(c) for c in row] for row in costs]
        self.n_agents = len(self.budgets)
        self.n_targets = len(self.costs[0]) if self.costs else 0
        if len(self.costs) != self.n_agents:
            raise ContractViolation("cost table rows must match budget count")
        if any(b < 0 for b in self.budgets):
            raise ContractViolation("budgets must be nonnegative")
        if any(c <= 0 for row in self.costs for c in row):
            raise ContractViolation("pair costs must be strictly positive")

    def pair_cost(self, agent: int, target: int) -> float:
        return self.costs[agent - 1][target - 1]

    def is_independent(self, policy: Policy) -> bool:
        self.check_bounds(policy)
        spent = [0.0] * self.n_agents
        for el in policy:
            spent[el.agent - 1] += self.pair_cost(el.agent, el.target)
        return all(spent[i] <= self.budgets[i] for i in range(self.n_agents))


class CompositeConstraint(IndependenceSystem):
    """Conjunction of independence systems over the same ground set.

    Acceptance is order-independent; the evaluation order of the parts is
    irrelevant to the result.
    """

    def __init__(self, parts: Iterable[IndependenceSystem]):
        self.parts = list(parts)
        if not self.parts:
            raise ContractViolation("composite needs at least one constraint")
        self.n_agents = self.parts[0].n_agents
        self.n_targets = self.parts[0].n_targets
        for p in self.parts:
            if (p.n_agents, p.n_targets) != (self.n_agents, self.n_targets):
                raise ContractViolation("constraint ground dimensions disagree")

    def is_independent(self, policy: Policy) -> bool:
        return all(p.is_independent(policy) for p in self.parts)


@dataclass(frozen=True)
class QEstimate:
    """Exchange-ratio parameter of the budget + partition system."""

    q: int
    c_max: float
    c_min: float
    argmax: Tuple[int, int]
    argmin: Tuple[int, int]


def estimate_q(costs: Sequence[Sequence[float]]) -> QEstimate:
    """q = ceil(1 + max cost / min cost) with the witnessing extreme pairs."""
    c_max = -math.inf
    c_min = math.inf
    argmax = argmin = (0, 0)
    for i, row in enumerate(costs, start=1):
        for j, c in enumerate(row, start=1):
            if c <= 0:
                raise ContractViolation(f"cost for pair ({i}, {j}) must be positive")
            if c > c_max:
                c_max, argmax = c, (i, j)
            if c < c_min:
                c_min, argmin = c, (i, j)
    if not math.isfinite(c_max):
        raise ContractViolation("cost table is empty")
    q = math.ceil(1.0 + c_max / c_min)
    return QEstimate(q=q, c_max=c_max, c_min=c_min, argmax=argmax, argmin=argmin)


@dataclass(frozen=True)
class QVerification:
    passes: bool
    worst_ratio: float
    witness: Optional[Tuple[Policy, Policy, Policy]]


def _maximal_independent_subsets(system: IndependenceSystem,
                                 ground: Sequence[GroundElement]) -> list[Policy]:
    """All maximal independent subsets of the given ground subset."""
    bases: list[Policy] = []
    seen: set[Policy] = set()

    def extend(current: Policy, candidates: Sequence[GroundElement]) -> None:
        grew = False
        for k, el in enumerate(candidates):
            nxt = current | {el}
            if system.is_independent(nxt):
                grew = True
                extend(nxt, candidates[k + 1:])
        if not grew:
            # Maximality must be checked against the whole ground subset, not
            # just the remaining candidates of this branch.
            if current in seen:
                return
            if all(
                el in current or not system.is_independent(current | {el})
                for el in ground
            ):
                seen.add(current)
                bases.append(current)

    extend(frozenset(), list(ground))
    return bases


def verify_q_property(system: IndependenceSystem,
                      ground: Iterable[GroundElement],
                      q_claim: float,
                      cap: int = 10) -> QVerification:
    """Exhaustively check the basis-size ratio bound on a small ground set.

    For every subset of the ground set, enumerates its maximal independent
    subsets and checks that no two differ in size by more than a factor of
    ``q_claim``.  Returns the worst witnessing (subset, largest, smallest).
    """
    elements = sorted(set(ground))
    if len(elements) > cap:
        raise SizeLimitExceeded(
            f"ground set of {len(elements)} elements exceeds enumeration cap {cap}"
        )
    worst = 0.0
    witness = None
    n = len(elements)
    for mask in range(1, 1 << n):
        subset = [elements[k] for k in range(n) if mask >> k & 1]
        bases = _maximal_independent_subsets(system, subset)
        sizes = [(len(b), b) for b in bases]
        if not sizes:
            continue
        hi = max(sizes, key=lambda s: s[0])
        lo = min(sizes, key=lambda s: s[0])
        if lo[0] == 0:
            ratio = math.inf if hi[0] > 0 else 1.0
        else:
            ratio = hi[0] / lo[0]
        if ratio > worst:
            worst = ratio
            witness = (frozenset(subset), hi[1], lo[1])
    if witness is None:
        worst = 1.0
    return QVerification(passes=worst <= q_claim, worst_ratio=worst, witness=witness)
