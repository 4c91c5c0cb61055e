"""Allocation solvers: the distributed bundles protocol and its baselines.

The main solver is a synchronous three-phase protocol.  Each agent keeps
three length-N vectors: ``w`` (its view of which target each agent holds,
0 = none), ``b`` (the marginal-utility bid backing each claim) and ``f``
(which agents are finalized).  Per round every unfinalized agent greedily
claims the available target of maximum marginal gain (phase I), agents
exchange self-entries with neighbors and resolve claims on the same target
in favor of the highest bid (phase II), and the world state advances
(phase III).  Once an agent's ``f`` self-entry is set it never changes.

Baselines: a centralized sequential greedy, a brute-force exact search, and
a simplified flooding auction.  The auction baseline is NOT a faithful
reimplementation of published consensus-auction algorithms: agents bid
their best standalone (non-marginal) utility, winners are determined by
max-bid flooding until tables stabilize, and the set of taken targets is
shared globally once fixed.  It exists as a communication-heavy comparison
point, nothing more.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .constraints import IndependenceSystem
from .core import (
    ContractViolation,
    GroundElement,
    Policy,
    SizeLimitExceeded,
    UtilityOracle,
    marginal_gain,
)


class ConfigurationError(ValueError):
    """Solver inputs disagree on ground dimensions or limits."""


EXACT_SEARCH_CAP = 10 ** 7


@dataclass
class BundleState:
    """One agent's local view of the allocation (w), bids (b), finals (f).

    Plain lists, not arrays: the vectors are tiny (length N) and every
    round touches them entry by entry, where list indexing is cheapest.
    """

    w: list  # int, entries in 0..M, 0 = unassigned
    b: list  # float, nonnegative bids
    f: list  # int, 1 = finalized

    @classmethod
    def empty(cls, n_agents: int) -> "BundleState":
        return cls(w=[0] * n_agents, b=[0.0] * n_agents, f=[0] * n_agents)

    def copy(self) -> "BundleState":
        return BundleState(list(self.w), list(self.b), list(self.f))


@dataclass
class AgentRuntime:
    """Protocol-facing state of one agent."""

    id: int  # 1-based
    bundle: BundleState
    remaining_budget: float = math.inf
    mode: str = "idle"  # idle -> maneuvering -> observing


@dataclass
class DecisionGroup:
    """Agents of one communication component that finalized in one round."""

    agents: tuple[int, ...]
    targets: tuple[int, ...]
    sum_deltas: float
    increment: float  # utility gain of adding exactly this group


@dataclass
class RoundRecord:
    """Per-round trace entry emitted by a protocol run."""

    round: int
    policy: Policy
    newly_finalized: tuple[tuple[int, int, float], ...]  # (agent, target, delta)
    groups: tuple[DecisionGroup, ...]
    increment: float
    utility: float
    messages: int
    cumulative_messages: int
    cumulative_cost: float
    bundles: Optional[tuple[tuple[list, list, list], ...]] = None


@dataclass
class SolverResult:
    policy: Policy
    utility: float
    per_agent_cost: np.ndarray
    rounds: int
    messages: int
    trace: list[RoundRecord] = field(default_factory=list)
    phase_times: dict = field(default_factory=dict)  # seconds per phase


class AllocationScenario:
    """World the solvers operate in.

    Static instances freeze everything; the satellite scenario advances
    real dynamics in phase III.  Costs exposed here are the frozen
    estimates used for budget feasibility during allocation.
    """

    n_agents: int
    n_targets: int
    continue_after_allocation = False

    def oracle(self) -> UtilityOracle:
        raise NotImplementedError

    def pair_cost(self, agent: int, target: int) -> float:
        raise NotImplementedError

    def pair_cost_row(self, agent: int) -> list[float]:
        """All pair costs of one agent, indexable by target - 1.  Scenarios
        with batch structure override this; the default falls back to
        per-pair queries."""
        return [self.pair_cost(agent, j) for j in range(1, self.n_targets + 1)]

    def remaining_budget(self, agent: int) -> float:
        return math.inf

    def adjacency(self) -> np.ndarray:
        raise NotImplementedError

    def reachable(self, agent: int, target: int, round_index: int) -> bool:
        return True

    def lock_due(self, target: int, round_index: int) -> bool:
        """Whether an agent holding this target must finalize now."""
        return False

    def advance(self, assignments: dict[int, int], round_index: int) -> None:
        """Advance world dynamics one step (no-op for static worlds)."""

    def agent_costs(self, policy: Policy) -> np.ndarray:
        costs = np.zeros(self.n_agents)
        for el in policy:
            costs[el.agent - 1] += self.pair_cost(el.agent, el.target)
        return costs

    def default_horizon(self) -> int:
        return 2 * self.n_agents + 2


class StaticScenario(AllocationScenario):
    """Frozen positions: fixed oracle, cost table, and communication graph."""

    def __init__(self, oracle: UtilityOracle,
                 costs: Optional[Sequence[Sequence[float]]] = None,
                 budgets: Optional[Sequence[float]] = None,
                 adjacency: Optional[np.ndarray] = None):
        self.n_agents = oracle.n_agents
        self.n_targets = oracle.n_targets
        self._oracle = oracle
        self._costs = None if costs is None else np.asarray(costs, dtype=float)
        self._budgets = None if budgets is None else np.asarray(budgets, dtype=float)
        if adjacency is None:
            adjacency = np.ones((self.n_agents, self.n_agents)) - np.eye(self.n_agents)
        self._adjacency = np.asarray(adjacency, dtype=float)

    def oracle(self) -> UtilityOracle:
        return self._oracle

    def pair_cost(self, agent: int, target: int) -> float:
        if self._costs is None:
            return 0.0
        return float(self._costs[agent - 1, target - 1])

    def pair_cost_row(self, agent: int) -> list[float]:
        if self._costs is None:
            return [0.0] * self.n_targets
        return self._costs[agent - 1].tolist()

    def remaining_budget(self, agent: int) -> float:
        if self._budgets is None:
            return math.inf
        return float(self._budgets[agent - 1])

    def adjacency(self) -> np.ndarray:
        return self._adjacency


# ---------------------------------------------------------------------------
# Phase I: greedy assignment
# ---------------------------------------------------------------------------

def local_view_policy(bundle: BundleState, self_id: int) -> Policy:
    """Allocation as perceived by one agent, excluding its own claim."""
    return frozenset(
        GroundElement(i + 1, int(j))
        for i, j in enumerate(bundle.w)
        if j != 0 and i + 1 != self_id
    )


def available_targets(scenario: AllocationScenario, agent: AgentRuntime,
                      round_index: int) -> list[int]:
    """Targets an agent may still bid on: unclaimed in its view, affordable,
    and with a still-reachable rendezvous deadline."""
    bundle = agent.bundle
    claimed = {int(j) for i, j in enumerate(bundle.w) if j != 0 and i + 1 != agent.id}
    costs = scenario.pair_cost_row(agent.id)
    out = []
    for j in range(1, scenario.n_targets + 1):
        if j in claimed:
            continue
        if costs[j - 1] > agent.remaining_budget:
            continue
        if not scenario.reachable(agent.id, j, round_index):
            continue
        out.append(j)
    return out


def dgba_assignment_phase(agent: AgentRuntime, oracle: UtilityOracle,
                          available: Sequence[int]) -> bool:
    """Greedy claim of the best available target; updates the agent's own
    bundle entries in place.

    Finalized agents and agents with nothing available are left untouched.
    Returns True if the agent placed (or kept) a claim, False if it had no
    option; the run loop finalizes optionless agents with an empty claim.
    """
    k = agent.id - 1
    bundle = agent.bundle
    if bundle.f[k]:
        return True
    if not available:
        bundle.w[k] = 0
        bundle.b[k] = 0.0
        return False
    policy = local_view_policy(bundle, agent.id)
    gains = oracle.marginal_gains_for_agent(policy, agent.id, available)
    # Ties break toward the lowest target id; iterate ascending with strict >.
    best_j, best_gain = 0, -1.0
    for j in available:
        g = gains[j]
        if g > best_gain:
            best_j, best_gain = j, g
    bundle.w[k] = best_j
    bundle.b[k] = best_gain
    return True


# ---------------------------------------------------------------------------
# Phase II: communication and conflict resolution
# ---------------------------------------------------------------------------

def dgba_communication_phase(bundles: Sequence[BundleState],
                             adjacency: np.ndarray) -> tuple[list[BundleState], int]:
    """One synchronous exchange-and-resolve step over all agents.

    Reads a frozen snapshot of every bundle and returns fresh bundles, so
    the result is independent of agent ordering.  Each agent copies the
    self-entries of its neighbors, then resolves the conflict set of agents
    claiming its own target: the highest bid wins (ties to the lowest agent
    id), losers are reset in the local view.  A claim on a target that some
    agent's view shows as already finalized is withdrawn rather than
    contested: finalized allocations are immutable.

    Resolution runs whether or not the agent has neighbors: an uncontested
    claim (in particular, a claim by an isolated agent) is a singleton
    conflict set that the claimant wins, so conflicts are resolved per
    connected component.  One message is one bundle triple sent over one
    edge in one direction.
    """
    adjacency = np.asarray(adjacency)
    n = len(bundles)
    if adjacency.shape != (n, n):
        raise ConfigurationError("adjacency shape does not match agent count")
    if not np.array_equal(adjacency, adjacency.T):
        raise ContractViolation("communication graph must be symmetric")
    if np.any(np.diag(adjacency) != 0):
        raise ContractViolation("communication graph must have a zero diagonal")

    # Snapshot of every agent's self-entries, broadcast during the exchange.
    self_w = [b.w[k] for k, b in enumerate(bundles)]
    self_b = [b.b[k] for k, b in enumerate(bundles)]
    self_f = [b.f[k] for k, b in enumerate(bundles)]
    adj_rows = adjacency.tolist()

    messages = 0
    out: list[BundleState] = []
    for i in range(n):
        row = adj_rows[i]
        new = bundles[i].copy()
        for j in range(n):
            if row[j] > 0:
                new.w[j] = self_w[j]
                new.b[j] = self_b[j]
                new.f[j] = self_f[j]
                messages += 1
        my_target = new.w[i]
        if not new.f[i] and my_target != 0:
            holders = [k for k in range(n) if new.w[k] == my_target]
            if any(new.f[k] for k in holders if k != i):
                # Yield to an already-finalized holder.
                new.w[i] = 0
                new.b[i] = 0.0
            else:
                conflict = [k for k in holders if not new.f[k]]
                winner = min(conflict, key=lambda k: (-new.b[k], k))
                new.f[winner] = 1
                for k in conflict:
                    if k != winner:
                        new.w[k] = 0
                        new.b[k] = 0.0
        out.append(new)
    return out, messages


def graph_components(adjacency: np.ndarray) -> list[int]:
    """Connected-component label per agent (labels are arbitrary ints)."""
    n = len(adjacency)
    labels = [-1] * n
    current = 0
    for start in range(n):
        if labels[start] != -1:
            continue
        stack = [start]
        labels[start] = current
        while stack:
            u = stack.pop()
            for v in range(n):
                if adjacency[u][v] > 0 and labels[v] == -1:
                    labels[v] = current
                    stack.append(v)
        current += 1
    return labels


# ---------------------------------------------------------------------------
# The full protocol run
# ---------------------------------------------------------------------------

def _finalized_policy(agents: Sequence[AgentRuntime]) -> Policy:
    return frozenset(
        GroundElement(a.id, int(a.bundle.w[a.id - 1]))
        for a in agents
        if a.bundle.f[a.id - 1] and a.bundle.w[a.id - 1] != 0
    )


def _round_groups(oracle: UtilityOracle, before: Policy,
                  newly: list[tuple[int, int, float]],
                  components: list[int]) -> tuple[DecisionGroup, ...]:
    groups: dict[int, list[tuple[int, int, float]]] = {}
    for agent, target, delta in newly:
        groups.setdefault(components[agent - 1], []).append((agent, target, delta))
    out = []
    for members in groups.values():
        added = frozenset(GroundElement(a, t) for a, t, _ in members)
        inc = oracle.evaluate(before | added) - oracle.evaluate(before)
        out.append(DecisionGroup(
            agents=tuple(a for a, _, _ in members),
            targets=tuple(t for _, t, _ in members),
            sum_deltas=sum(d for _, _, d in members),
            increment=inc,
        ))
    return tuple(out)


def dgba_run(scenario: AllocationScenario,
             oracle: Optional[UtilityOracle] = None,
             constraints: Optional[IndependenceSystem] = None,
             horizon: Optional[int] = None,
             record_bundles: bool = False) -> SolverResult:
    """Run the distributed bundles protocol to completion.

    Phases run in lockstep each round: assignment, communication, then
    implementation (world dynamics, deadline locks, fresh adjacency).  The
    protocol part stops once every agent is finalized; the world keeps
    advancing afterwards only for scenarios that say so (so the satellite
    simulation can play out its observations and report a full utility
    series).

    When no explicit oracle is given, the scenario's oracle is re-sampled at
    the start of every round and that frozen snapshot is used for the whole
    round (bids, trace deltas and the utility series), so the per-round
    increment identities hold even while the world moves underneath.
    """
    fixed_oracle = oracle
    oracle = fixed_oracle if fixed_oracle is not None else scenario.oracle()
    if constraints is not None and (
        constraints.n_agents != scenario.n_agents
        or constraints.n_targets != scenario.n_targets
    ):
        raise ConfigurationError("constraint dimensions do not match scenario")
    if (oracle.n_agents, oracle.n_targets) != (scenario.n_agents, scenario.n_targets):
        raise ConfigurationError("oracle dimensions do not match scenario")
    if horizon is None:
        horizon = scenario.default_horizon()
    if horizon < 1:
        raise ConfigurationError("horizon must be at least 1")

    n = scenario.n_agents
    agents = [
        AgentRuntime(id=i + 1, bundle=BundleState.empty(n),
                     remaining_budget=scenario.remaining_budget(i + 1))
        for i in range(n)
    ]
    trace: list[RoundRecord] = []
    total_messages = 0
    protocol_rounds = 0
    policy = frozenset()
    phase_times = {"assignment": 0.0, "communication": 0.0, "implementation": 0.0}

    for t in range(horizon):
        if fixed_oracle is None:
            oracle = scenario.oracle()
        adjacency = scenario.adjacency()
        components = graph_components(adjacency)
        before = policy
        finalized_before = {a.id for a in agents if a.bundle.f[a.id - 1]}
        round_messages = 0

        all_done = all(a.bundle.f[a.id - 1] for a in agents)
        if not all_done:
            protocol_rounds += 1
            # Phase I (finalized agents skip the candidate scan entirely)
            clock = time.perf_counter()
            for agent in agents:
                if agent.bundle.f[agent.id - 1]:
                    continue
                avail = available_targets(scenario, agent, t)
                has_option = dgba_assignment_phase(agent, oracle, avail)
                if not has_option:
                    agent.bundle.f[agent.id - 1] = 1  # nothing affordable: done
            phase_times["assignment"] += time.perf_counter() - clock
            # Phase II
            clock = time.perf_counter()
            bundles, round_messages = dgba_communication_phase(
                [a.bundle for a in agents], adjacency
            )
            for agent, bundle in zip(agents, bundles):
                agent.bundle = bundle
            total_messages += round_messages
            phase_times["communication"] += time.perf_counter() - clock

        # Phase III: deadline locks, then world dynamics.
        clock = time.perf_counter()
        for agent in agents:
            k = agent.id - 1
            j = int(agent.bundle.w[k])
            if not agent.bundle.f[k] and j != 0 and scenario.lock_due(j, t):
                agent.bundle.f[k] = 1
        assignments = {
            a.id: int(a.bundle.w[a.id - 1])
            for a in agents
            if a.bundle.w[a.id - 1] != 0
        }
        scenario.advance(assignments, t)
        phase_times["implementation"] += time.perf_counter() - clock

        policy = _finalized_policy(agents)
        newly = []
        for agent in agents:
            k = agent.id - 1
            if agent.bundle.f[k] and agent.id not in finalized_before:
                j = int(agent.bundle.w[k])
                if j != 0:
                    delta = marginal_gain(oracle, before, GroundElement(agent.id, j))
                    newly.append((agent.id, j, delta))
        groups = _round_groups(oracle, before, newly, components)
        utility = oracle.evaluate(policy)
        trace.append(RoundRecord(
            round=t,
            policy=policy,
            newly_finalized=tuple(newly),
            groups=groups,
            increment=utility - oracle.evaluate(before),
            utility=utility,
            messages=round_messages,
            cumulative_messages=total_messages,
            cumulative_cost=float(np.sum(scenario.agent_costs(policy))),
            bundles=tuple(
                (a.bundle.w.copy(), a.bundle.b.copy(), a.bundle.f.copy())
                for a in agents
            ) if record_bundles else None,
        ))

        if all(a.bundle.f[a.id - 1] for a in agents):
            if not scenario.continue_after_allocation:
                break

    if constraints is not None and not constraints.is_independent(policy):
        raise ContractViolation("protocol produced an infeasible policy")
    return SolverResult(
        policy=policy,
        utility=oracle.evaluate(policy),
        per_agent_cost=scenario.agent_costs(policy),
        rounds=protocol_rounds,
        messages=total_messages,
        trace=trace,
        phase_times=phase_times,
    )


# ---------------------------------------------------------------------------
# Baselines and exact search
# ---------------------------------------------------------------------------

def sequential_greedy(oracle: UtilityOracle,
                      constraints: IndependenceSystem,
                      ground: Optional[Iterable[GroundElement]] = None) -> SolverResult:
    """Centralized greedy: repeatedly add the feasible pair of globally
    maximum marginal gain until no feasible pair improves the utility.
    Ties break lexicographically on (agent, target)."""
    if ground is None:
        ground = oracle.ground_set()
    candidates = sorted(set(ground))
    policy: Policy = frozenset()
    while True:
        best_el, best_gain = None, 0.0
        for el in candidates:
            if el in policy:
                continue
            if not constraints.is_independent(policy | {el}):
                continue
            g = marginal_gain(oracle, policy, el)
            if g > best_gain:
                best_el, best_gain = el, g
        if best_el is None:
            break
        policy = policy | {best_el}
    return SolverResult(
        policy=policy,
        utility=oracle.evaluate(policy),
        per_agent_cost=np.zeros(oracle.n_agents),
        rounds=len(policy),
        messages=0,
    )


def exact_oracle(oracle: UtilityOracle,
                 constraints: IndependenceSystem,
                 n_agents: Optional[int] = None,
                 n_targets: Optional[int] = None) -> SolverResult:
    """Brute-force optimum over every agent-to-target-or-none mapping.

    Deterministic: mappings are scanned in lexicographic order and only a
    strictly better utility replaces the incumbent.
    """
    n = n_agents if n_agents is not None else oracle.n_agents
    m = n_targets if n_targets is not None else oracle.n_targets
    if (m + 1) ** n > EXACT_SEARCH_CAP:
        raise SizeLimitExceeded(
            f"({m} + 1) ** {n} mappings exceed the exact-search cap"
        )
    best_policy: Policy = frozenset()
    best_utility = 0.0
    assignment = [0] * n
    while True:
        policy = frozenset(
            GroundElement(i + 1, assignment[i])
            for i in range(n)
            if assignment[i] != 0
        )
        if constraints.is_independent(policy):
            u = oracle.evaluate(policy)
            if u > best_utility:
                best_policy, best_utility = policy, u
        # Lexicographic increment over base-(m + 1) digits.
        k = n - 1
        while k >= 0 and assignment[k] == m:
            assignment[k] = 0
            k -= 1
        if k < 0:
            break
        assignment[k] += 1
    return SolverResult(
        policy=best_policy,
        utility=best_utility,
        per_agent_cost=np.zeros(n),
        rounds=0,
        messages=0,
    )


def auction_baseline(scenario: AllocationScenario,
                     oracle: Optional[UtilityOracle] = None,
                     constraints: Optional[IndependenceSystem] = None,
                     horizon: Optional[int] = None) -> SolverResult:
    """Simplified flooding auction used as a communication-cost yardstick.

    Per round, every unassigned agent bids its best standalone utility (the
    target's value times the pair's success probability, ignoring what the
    current allocation already covers), bids and the set of already-won
    targets are flooded over the current graph until every agent's local
    tables stabilize, and each target's top bidder within a component is
    fixed.  Knowledge of won targets spreads only through the flooding, so
    disconnected components can duplicate targets, exactly like the bundle
    protocol.  ``rounds`` counts flooding sweeps, so it grows with graph
    diameter.
    """
    fixed_oracle = oracle
    oracle = fixed_oracle if fixed_oracle is not None else scenario.oracle()
    if horizon is None:
        horizon = scenario.default_horizon()
    n, m = scenario.n_agents, scenario.n_targets
    fixed_target = [0] * (n + 1)
    done = [False] * (n + 1)
    known_taken: list[set[int]] = [set() for _ in range(n + 1)]
    total_messages = 0
    flood_sweeps = 0
    trace: list[RoundRecord] = []
    phase_times = {"bidding": 0.0, "flooding": 0.0, "implementation": 0.0}

    def policy_now() -> Policy:
        return frozenset(
            GroundElement(i, fixed_target[i])
            for i in range(1, n + 1)
            if fixed_target[i] != 0
        )

    for t in range(horizon):
        if fixed_oracle is None:
            oracle = scenario.oracle()
        adjacency = scenario.adjacency()
        round_messages = 0
        before = policy_now()
        newly: list[tuple[int, int, float]] = []
        components = graph_components(adjacency)

        if not all(done[1:]):
            # Bidding: standalone utility, not marginal.
            clock = time.perf_counter()
            bids = {}
            for i in range(1, n + 1):
                if done[i]:
                    continue
                costs = scenario.pair_cost_row(i)
                best_j, best_bid = 0, 0.0
                for j in range(1, m + 1):
                    if j in known_taken[i]:
                        continue
                    if costs[j - 1] > scenario.remaining_budget(i):
                        continue
                    if not scenario.reachable(i, j, t):
                        continue
                    v = oracle.evaluate_target(j, frozenset({GroundElement(i, j)}))
                    if v > best_bid:
                        best_j, best_bid = j, v
                if best_j == 0:
                    done[i] = True
                else:
                    bids[i] = (best_j, best_bid)

            phase_times["bidding"] += time.perf_counter() - clock
            # Flooding consensus on per-target best bids and won targets.
            clock = time.perf_counter()
            table = {}
            for i in range(1, n + 1):
                mine = {}
                if i in bids:
                    j, v = bids[i]
                    mine[j] = (v, i)
                table[i] = mine
            n_edges = int(np.sum(np.asarray(adjacency) > 0))
            while True:
                flood_sweeps += 1
                round_messages += n_edges
                changed = False
                snapshot = {i: dict(table[i]) for i in table}
                taken_snapshot = [set(s) for s in known_taken]
                for i in range(1, n + 1):
                    for k in range(1, n + 1):
                        if adjacency[i - 1][k - 1] > 0:
                            for j, (v, who) in snapshot[k].items():
                                cur = table[i].get(j)
                                if cur is None or (v, -who) > (cur[0], -cur[1]):
                                    table[i][j] = (v, who)
                                    changed = True
                            if not taken_snapshot[k] <= known_taken[i]:
                                known_taken[i] |= taken_snapshot[k]
                                changed = True
                if not changed:
                    break

            # Winner per target: the agent its own table names as top bidder.
            for i, (j, _v) in bids.items():
                top = table[i].get(j)
                if j not in known_taken[i] and top is not None and top[1] == i:
                    fixed_target[i] = j
                    done[i] = True
                    known_taken[i].add(j)
                    delta = marginal_gain(oracle, before, GroundElement(i, j))
                    newly.append((i, j, delta))
            total_messages += round_messages
            phase_times["flooding"] += time.perf_counter() - clock

        clock = time.perf_counter()
        assignments = {
            i: fixed_target[i] for i in range(1, n + 1) if fixed_target[i] != 0
        }
        scenario.advance(assignments, t)
        phase_times["implementation"] += time.perf_counter() - clock
        after = policy_now()
        utility = oracle.evaluate(after)
        trace.append(RoundRecord(
            round=t,
            policy=after,
            newly_finalized=tuple(newly),
            groups=_round_groups(oracle, before, newly, components),
            increment=utility - oracle.evaluate(before),
            utility=utility,
            messages=round_messages,
            cumulative_messages=total_messages,
            cumulative_cost=float(np.sum(scenario.agent_costs(after))),
        ))
        if all(done[1:]) and not scenario.continue_after_allocation:
            break

    final = policy_now()
    return SolverResult(
        policy=final,
        utility=oracle.evaluate(final),
        per_agent_cost=scenario.agent_costs(final),
        rounds=flood_sweeps,
        messages=total_messages,
        trace=trace,
        phase_times=phase_times,
    )


# ---------------------------------------------------------------------------
# Trace property checks
# ---------------------------------------------------------------------------

@dataclass
class TraceCheck:
    ok: bool
    failures: list[str]


def check_allocation_trace(trace: Sequence[RoundRecord], final_policy: Policy,
                           tol: float = 1e-9) -> TraceCheck:
    """Verify the decision-set properties of a protocol trace.

    Checks that (1) no agent finalizes twice, (2) the finalized agents are
    exactly those holding a pair in the final policy, and (3) per round and
    per communication component, the utility gained by the component's new
    assignments equals the sum of their recorded marginal gains.  The
    increment identities are checked whenever the new assignments involved
    have distinct targets; simultaneous same-target claims by agents that
    cannot see each other's claims (possible beyond one hop on sparse
    graphs) overlap and the sum overcounts.  On a complete graph targets
    are always distinct, giving the full global property.
    """
    failures: list[str] = []
    seen: set[int] = set()
    for rec in trace:
        for agent, _j, _d in rec.newly_finalized:
            if agent in seen:
                failures.append(f"round {rec.round}: agent {agent} finalized twice")
            seen.add(agent)
        for g in rec.groups:
            if len(set(g.targets)) != len(g.targets):
                continue
            if abs(g.increment - g.sum_deltas) > tol:
                failures.append(
                    f"round {rec.round}: component increment {g.increment!r} != "
                    f"sum of gains {g.sum_deltas!r} for agents {g.agents}"
                )
        targets = [j for _a, j, _d in rec.newly_finalized]
        if len(targets) == len(set(targets)):
            total = sum(g.sum_deltas for g in rec.groups)
            if abs(rec.increment - total) > tol:
                failures.append(
                    f"round {rec.round}: round increment {rec.increment!r} != "
                    f"sum of gains {total!r}"
                )
    assigned = {el.agent for el in final_policy}
    if seen != assigned:
        failures.append(
            f"finalized agents {sorted(seen)} != assigned agents {sorted(assigned)}"
        )
    return TraceCheck(ok=not failures, failures=failures)
