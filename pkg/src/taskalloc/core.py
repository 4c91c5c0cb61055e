"""Submodular utility primitives: marginal gains, elemental curvature, bounds.

The allocation problem works over the ground set of (agent, target) pairs.
Utilities are set functions over allocation policies (sets of pairs) that are
normalized, non-decreasing and submodular, and decompose as a sum of
per-target terms.  Everything in this module is a pure function of its
arguments; oracles must be reentrant.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from itertools import combinations
from typing import FrozenSet, Iterable, NamedTuple, Optional, Tuple


class ContractViolation(ValueError):
    """A caller broke an operation precondition."""


class SizeLimitExceeded(ValueError):
    """An exhaustive enumeration was requested on a ground set above its cap."""


class DegenerateOracleError(ValueError):
    """Curvature estimation found no pair with a usable denominator."""


class GroundElement(NamedTuple):
    """One (agent, target) pair of the ground set.  Ids are 1-based."""

    agent: int
    target: int


# An allocation policy is a set of ground elements; frozenset gives us the
# required set semantics (unordered, no duplicates) and hashability.
Policy = FrozenSet[GroundElement]

EMPTY_POLICY: Policy = frozenset()


def make_policy(pairs: Iterable[Tuple[int, int]]) -> Policy:
    return frozenset(GroundElement(a, t) for a, t in pairs)


class UtilityOracle(abc.ABC):
    """Normalized, non-decreasing, submodular utility over agent-target pairs.

    The total utility decomposes per target: evaluate(P) is the sum of
    evaluate_target(j, P) over all targets j.  evaluate(empty) must be 0.
    """

    n_agents: int
    n_targets: int

    @abc.abstractmethod
    def evaluate_target(self, target: int, policy: Policy) -> float:
        """Utility contributed by one target under the given policy."""

    def evaluate(self, policy: Policy) -> float:
        self.check_bounds(policy)
        return sum(
            self.evaluate_target(j, policy) for j in range(1, self.n_targets + 1)
        )

    def check_bounds(self, policy: Policy) -> None:
        for el in policy:
            if not (1 <= el.agent <= self.n_agents and 1 <= el.target <= self.n_targets):
                raise ContractViolation(
                    f"element {el} outside ground set "
                    f"({self.n_agents} agents x {self.n_targets} targets)"
                )

    def ground_set(self) -> list[GroundElement]:
        return [
            GroundElement(i, j)
            for i in range(1, self.n_agents + 1)
            for j in range(1, self.n_targets + 1)
        ]

    def marginal_gains_for_agent(self, policy: Policy, agent: int,
                                 targets: Iterable[int]) -> dict[int, float]:
        """Marginal gain of (agent, j) for each candidate target j.

        Subclasses with per-target structure override this with an O(1)
        per-target evaluation; the default recomputes the per-target utility.
        """
        gains = {}
        for j in targets:
            gains[j] = marginal_gain(self, policy, GroundElement(agent, j))
        return gains


def marginal_gain(oracle: UtilityOracle, policy: Policy,
                  element: GroundElement) -> float:
    """Utility increase from adding one element to a policy.

    Only the element's target term can change, so the difference is taken on
    that single term.  Tiny negative values from float cancellation are
    clamped to zero.
    """
    if element in policy:
        raise ContractViolation(f"element {element} already in policy")
    j = element.target
    gain = oracle.evaluate_target(j, policy | {element}) - oracle.evaluate_target(j, policy)
    return max(0.0, gain)


@dataclass(frozen=True)
class CurvatureReport:
    """Result of exhaustive elemental-curvature estimation."""

    kappa_e: float
    witness: Optional[Tuple[Policy, GroundElement, GroundElement]]
    skipped_pairs: int
    exhaustive: bool = True


def estimate_elemental_curvature(oracle: UtilityOracle,
                                 ground: Iterable[GroundElement],
                                 epsilon: float = 1e-9,
                                 cap: int = 12) -> CurvatureReport:
    """Exhaustive elemental curvature of an oracle over a small ground set.

    Maximizes gain(pi | P + {pi'}) / gain(pi | P) over all subsets P of the
    ground set and all distinct pi, pi' outside P.  Pairs whose denominator
    falls below ``epsilon`` are skipped and counted: the ratio is undefined
    there and the maximum over well-defined ratios is what gets reported.
    The result is clamped to [0, 1]; since 1 is the largest attainable value
    for a submodular oracle, the scan stops early once a ratio reaches it.
    """
    elements = sorted(set(ground))
    if epsilon <= 0:
        raise ContractViolation("epsilon must be positive")
    if len(elements) > cap:
        raise SizeLimitExceeded(
            f"ground set of {len(elements)} elements exceeds enumeration cap {cap}"
        )
    best = -1.0
    witness = None
    skipped = 0
    n = len(elements)
    for mask in range(1 << n):
        subset = frozenset(elements[k] for k in range(n) if mask >> k & 1)
        outside = [e for e in elements if e not in subset]
        for pi, pi_prime in combinations(outside, 2):
            for a, b in ((pi, pi_prime), (pi_prime, pi)):
                denom = marginal_gain(oracle, subset, a)
                if denom < epsilon:
                    skipped += 1
                    continue
                numer = marginal_gain(oracle, subset | {b}, a)
                ratio = numer / denom
                if ratio > best:
                    best = ratio
                    witness = (subset, a, b)
                if best >= 1.0:
                    return CurvatureReport(1.0, witness, skipped)
    if best < 0.0:
        raise DegenerateOracleError(
            "every curvature ratio had a near-zero denominator"
        )
    return CurvatureReport(min(max(best, 0.0), 1.0), witness, skipped)


def xi_factor(m: int, kappa_e: float) -> float:
    """Curvature attenuation factor used by the greedy performance bounds.

    Equals (1 - kappa^m) / (m * (1 - kappa)) for kappa < 1 and 1 at kappa = 1.
    Computed through the equivalent mean of the geometric partial sums, which
    is exact, stable as kappa approaches 1, and makes the kappa = 1 case the
    natural limit rather than a special branch.
    """
    if m < 1:
        raise ContractViolation("m must be a positive integer")
    if not 0.0 <= kappa_e <= 1.0:
        raise ContractViolation("kappa_e must lie in [0, 1]")
    return sum(kappa_e ** t for t in range(m)) / m


@dataclass(frozen=True)
class BoundCertificate:
    """Achieved-to-optimal ratio checked against the three provable bounds."""

    ratio: float
    half_bound_holds: bool
    curvature_bound_holds: bool
    q_system_bound_holds: bool
    half_threshold: float
    curvature_threshold: float
    q_system_threshold: float
    kappa_e: float
    q: float
    xi_argument: int


def bound_certificate(achieved: float, optimal: float, kappa_e: float,
                      q: float, n_agents: int, tol: float = 1e-9) -> BoundCertificate:
    """Certify an achieved utility against the greedy approximation bounds.

    The third threshold evaluates the attenuation factor at
    ceil((1 - 1/q) * N), the conservative integer choice since the factor is
    non-increasing in its argument.
    """
    if achieved < 0:
        raise ContractViolation("achieved utility must be nonnegative")
    if optimal <= 0:
        if achieved > 0:
            raise ContractViolation("achieved > 0 with optimal = 0 is inconsistent")
        # Empty instance: everything is trivially optimal.
        return BoundCertificate(1.0, True, True, True, 0.5,
                                1.0 / (1.0 + kappa_e), 0.5, kappa_e, q, 1)
    if q < 1:
        raise ContractViolation("q must be at least 1")
    ratio = achieved / optimal
    xi_arg = max(1, math.ceil((1.0 - 1.0 / q) * n_agents))
    t_half = 0.5
    t_curv = 1.0 / (1.0 + kappa_e)
    t_qsys = 1.0 / (1.0 + kappa_e * xi_factor(xi_arg, kappa_e))
    return BoundCertificate(
        ratio=ratio,
        half_bound_holds=ratio >= t_half - tol,
        curvature_bound_holds=ratio >= t_curv - tol,
        q_system_bound_holds=ratio >= t_qsys - tol,
        half_threshold=t_half,
        curvature_threshold=t_curv,
        q_system_threshold=t_qsys,
        kappa_e=kappa_e,
        q=q,
        xi_argument=xi_arg,
    )


class TableOracle(UtilityOracle):
    """Probability-of-success utility from a fixed success-probability table.

    Target j contributes value[j] * (1 - prod over assigned agents i of
    (1 - prob[i][j])).  This is the coverage-style objective the satellite
    scenario instantiates from live positions; here the table is frozen,
    which is what the static bound-verification instances need.
    """

    def __init__(self, values, probs):
        # values: length-M, probs: N x M, both indexable from 0.
        self.values = [float(v) for v in values]
        self.probs = [[float(p) for p in row] for row in probs]
        self.n_agents = len(self.probs)
        self.n_targets = len(self.values)
        for row in self.probs:
            if len(row) != self.n_targets:
                raise ContractViolation("probability table is ragged")
            for p in row:
                if not 0.0 <= p <= 1.0:
                    raise ContractViolation("success probabilities must lie in [0, 1]")

    def evaluate_target(self, target: int, policy: Policy) -> float:
        miss = 1.0
        for el in policy:
            if el.target == target:
                miss *= 1.0 - self.probs[el.agent - 1][target - 1]
        return self.values[target - 1] * (1.0 - miss)

    def marginal_gains_for_agent(self, policy, agent, targets):
        miss = [1.0] * (self.n_targets + 1)
        for el in policy:
            miss[el.target] *= 1.0 - self.probs[el.agent - 1][el.target - 1]
        return {
            j: self.values[j - 1] * miss[j] * self.probs[agent - 1][j - 1]
            for j in targets
        }


class ModularOracle(UtilityOracle):
    """Additive utility: each pair contributes a fixed weight, no interaction."""

    def __init__(self, weights):
        # weights: dict mapping GroundElement -> value, or N x M table.
        if isinstance(weights, dict):
            self.weights = {GroundElement(*k): float(v) for k, v in weights.items()}
            self.n_agents = max(el.agent for el in self.weights)
            self.n_targets = max(el.target for el in self.weights)
        else:
            self.weights = {
                GroundElement(i + 1, j + 1): float(w)
                for i, row in enumerate(weights)
                for j, w in enumerate(row)
            }
            self.n_agents = len(weights)
            self.n_targets = len(weights[0])

    def evaluate_target(self, target: int, policy: Policy) -> float:
        return sum(
            self.weights.get(el, 0.0) for el in policy if el.target == target
        )
