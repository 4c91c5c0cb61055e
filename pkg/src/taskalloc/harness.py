"""Monte Carlo experiment harness: paired solver runs, bound verification,
scaling measurement, and artifact output.

Every random draw is seeded by a counter-based split of the master seed
(master, size index, draw index), so draws are reproducible individually
and their execution order is irrelevant.  Within a draw all solvers run on
deep copies of the identical sampled instance and score against the same
utility oracle frozen at the initial positions, which keeps the comparison
paired and the recorded utility series non-decreasing for the bundle
protocol.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .constraints import (
    BudgetConstraint,
    CompositeConstraint,
    ConflictFreeConstraint,
    PartitionConstraint,
    estimate_q,
)
from .core import (
    BoundCertificate,
    DegenerateOracleError,
    TableOracle,
    bound_certificate,
    estimate_elemental_curvature,
)
from .scenario import SatelliteScenario, ScenarioConfig, sample_scenario
from .solvers import (
    EXACT_SEARCH_CAP,
    AgentRuntime,
    BundleState,
    StaticScenario,
    auction_baseline,
    available_targets,
    dgba_assignment_phase,
    dgba_communication_phase,
    dgba_run,
    exact_oracle,
    sequential_greedy,
)


class ConfigError(ValueError):
    """The experiment configuration is malformed."""


KNOWN_SOLVERS = ("dgba", "auction", "greedy", "exact")

# Aliases accepted in config files for scenario parameters whose natural
# symbol is not a valid field name.
_SCENARIO_ALIASES = {"lambda": "decay", "phi": "comm_factor"}

# Exhaustive curvature estimation is only attempted up to this many ground
# elements (2^n subsets are scanned).
CURVATURE_GROUND_CAP = 16


@dataclass
class ExperimentConfig:
    """Everything a reproducible experiment run needs."""

    seed: int = 42
    draws: int = 10
    sizes: list = field(default_factory=lambda: [(5, 5)])
    solvers: list = field(default_factory=lambda: ["dgba", "auction"])
    horizon: Optional[int] = None
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)

    def __post_init__(self):
        if self.draws < 1:
            raise ConfigError("draws must be at least 1")
        if not self.sizes:
            raise ConfigError("at least one (agents, targets) size is required")
        self.sizes = [tuple(int(v) for v in s) for s in self.sizes]
        for n, m in self.sizes:
            if n < 1 or m < 1:
                raise ConfigError(f"invalid size ({n}, {m})")
        if not self.solvers:
            raise ConfigError("at least one solver is required")
        for s in self.solvers:
            if s not in KNOWN_SOLVERS:
                raise ConfigError(
                    f"unknown solver {s!r}; choose from {KNOWN_SOLVERS}"
                )
        for n, m in self.sizes:
            if "exact" in self.solvers and (m + 1) ** n > EXACT_SEARCH_CAP:
                raise ConfigError(
                    f"size ({n}, {m}) exceeds the exact-search cap"
                )

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration root must be a mapping")
        raw = dict(raw)
        scen_raw = raw.pop("scenario", {}) or {}
        if not isinstance(scen_raw, dict):
            raise ConfigError("'scenario' must be a mapping")
        scen_kwargs = {}
        valid = {f.name for f in fields(ScenarioConfig)}
        for key, value in scen_raw.items():
            name = _SCENARIO_ALIASES.get(key, key)
            if name not in valid:
                raise ConfigError(f"unknown scenario key {key!r}")
            if name.endswith("_range"):
                value = tuple(float(v) for v in value)
            scen_kwargs[name] = value
        top_valid = {f.name for f in fields(cls)} - {"scenario"}
        kwargs = {}
        for key, value in raw.items():
            if key not in top_valid:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = value
        try:
            scenario = ScenarioConfig(**scen_kwargs)
            return cls(scenario=scenario, **kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sizes"] = [list(s) for s in self.sizes]
        scen = out["scenario"]
        for key in list(scen):
            if isinstance(scen[key], tuple):
                scen[key] = list(scen[key])
        return out


@dataclass
class RunMetrics:
    """Everything recorded about one solver on one draw."""

    solver: str
    draw: int
    n_agents: int
    n_targets: int
    utility: list          # per-step utility series
    messages: list         # per-step message counts
    cumulative_cost: list  # per-step total accrued cost
    per_agent_cost: list
    final_utility: float
    total_messages: int
    rounds: int
    wall_time_s: float
    phase_times: dict
    certificate: Optional[BoundCertificate] = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    metrics: list
    errors: list  # dicts: solver, size, draw, message
    aggregates: dict
    overrides: list = field(default_factory=list)  # raw key=value strings


def _draw_rng(master_seed: int, size_index: int, draw: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, size_index, draw])


def _static_constraints(base: SatelliteScenario):
    n, m = base.n_agents, base.n_targets
    costs = [base.pair_cost_row(i) for i in range(1, n + 1)]
    budgets = [base.remaining_budget(i) for i in range(1, n + 1)]
    return CompositeConstraint([
        PartitionConstraint(n, m),
        ConflictFreeConstraint(n, m),
        BudgetConstraint(budgets, costs),
    ]), costs


def _run_one(name: str, base: SatelliteScenario, oracle: TableOracle,
             horizon: Optional[int]):
    """Run one solver on a fresh copy of the instance; returns the solver
    result plus the wall time of the call."""
    if name == "dgba":
        world = copy.deepcopy(base)
        start = time.perf_counter()
        result = dgba_run(world, oracle=oracle, horizon=horizon)
        return result, time.perf_counter() - start
    if name == "auction":
        world = copy.deepcopy(base)
        start = time.perf_counter()
        result = auction_baseline(world, oracle=oracle, horizon=horizon)
        return result, time.perf_counter() - start
    constraints, _costs = _static_constraints(base)
    start = time.perf_counter()
    if name == "greedy":
        result = sequential_greedy(oracle, constraints)
    elif name == "exact":
        result = exact_oracle(oracle, constraints)
    else:
        raise ConfigError(f"unknown solver {name!r}")
    return result, time.perf_counter() - start


def _metrics_from(name: str, draw: int, base: SatelliteScenario,
                  result, wall: float) -> RunMetrics:
    series_u = [rec.utility for rec in result.trace]
    series_m = [rec.messages for rec in result.trace]
    series_c = [rec.cumulative_cost for rec in result.trace]
    return RunMetrics(
        solver=name,
        draw=draw,
        n_agents=base.n_agents,
        n_targets=base.n_targets,
        utility=series_u,
        messages=series_m,
        cumulative_cost=series_c,
        per_agent_cost=[float(c) for c in result.per_agent_cost],
        final_utility=result.utility,
        total_messages=result.messages,
        rounds=result.rounds,
        wall_time_s=wall,
        phase_times=dict(result.phase_times),
    )


def _certify(base: SatelliteScenario, oracle: TableOracle,
             dgba_utility: float, exact_utility: float) -> Optional[BoundCertificate]:
    n, m = base.n_agents, base.n_targets
    if n * m > CURVATURE_GROUND_CAP:
        return None
    try:
        kappa = estimate_elemental_curvature(
            oracle, oracle.ground_set(), cap=CURVATURE_GROUND_CAP
        ).kappa_e
    except DegenerateOracleError:
        # No well-defined curvature ratio on this ground set; certify
        # against the most conservative value.
        kappa = 1.0
    costs = [base.pair_cost_row(i) for i in range(1, n + 1)]
    q = estimate_q(costs).q
    return bound_certificate(dgba_utility, exact_utility, kappa, q, n)


def _warm_up() -> None:
    """Exercise both solver code paths once so first-call interpreter and
    array-library setup does not land in the first timed draw."""
    rng = np.random.default_rng(0)
    tiny = sample_scenario(ScenarioConfig(n_agents=2, n_targets=2), rng)
    dgba_run(copy.deepcopy(tiny), oracle=tiny.oracle())
    auction_baseline(copy.deepcopy(tiny), oracle=tiny.oracle())


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every configured solver on identical instances, draw by draw.

    A solver failure on one draw is recorded and skipped; the experiment
    fails outright only if every single run failed.
    """
    _warm_up()
    metrics: list[RunMetrics] = []
    errors: list[dict] = []
    for size_index, (n, m) in enumerate(config.sizes):
        for draw in range(config.draws):
            rng = _draw_rng(config.seed, size_index, draw)
            scen_cfg = copy.deepcopy(config.scenario)
            scen_cfg.n_agents, scen_cfg.n_targets = n, m
            base = sample_scenario(scen_cfg, rng)
            oracle = base.oracle()
            draw_results: dict[str, RunMetrics] = {}
            for name in config.solvers:
                try:
                    result, wall = _run_one(name, base, oracle, config.horizon)
                    draw_results[name] = _metrics_from(name, draw, base, result, wall)
                except Exception as exc:  # recorded, not fatal
                    errors.append({
                        "solver": name,
                        "size": [n, m],
                        "draw": draw,
                        "message": f"{type(exc).__name__}: {exc}",
                    })
            if "dgba" in draw_results and "exact" in draw_results:
                draw_results["dgba"].certificate = _certify(
                    base, oracle,
                    draw_results["dgba"].final_utility,
                    draw_results["exact"].final_utility,
                )
            metrics.extend(draw_results[name] for name in config.solvers
                           if name in draw_results)
    if not metrics:
        raise RuntimeError(
            "every solver run failed: " + "; ".join(e["message"] for e in errors)
        )
    return ExperimentResult(
        config=config,
        metrics=metrics,
        errors=errors,
        aggregates=_aggregate(config, metrics),
    )


def _aggregate(config: ExperimentConfig, metrics: Sequence[RunMetrics]) -> dict:
    out = {}
    for n, m in config.sizes:
        for name in config.solvers:
            runs = [r for r in metrics
                    if r.solver == name and (r.n_agents, r.n_targets) == (n, m)]
            if not runs:
                continue
            finals = np.array([r.final_utility for r in runs])
            msgs = np.array([r.total_messages for r in runs])
            costs = np.array([sum(r.per_agent_cost) for r in runs])
            walls = np.array([r.wall_time_s for r in runs])
            out[f"{name}/N{n}M{m}"] = {
                "runs": len(runs),
                "mean_final_utility": float(finals.mean()),
                "std_final_utility": float(finals.std()),
                "mean_total_messages": float(msgs.mean()),
                "std_total_messages": float(msgs.std()),
                "mean_total_cost": float(costs.mean()),
                "mean_wall_time_s": float(walls.mean()),
                "mean_rounds": float(np.mean([r.rounds for r in runs])),
                "certificates_checked": sum(
                    1 for r in runs if r.certificate is not None
                ),
                "certificates_passed": sum(
                    1 for r in runs
                    if r.certificate is not None
                    and r.certificate.half_bound_holds
                    and r.certificate.curvature_bound_holds
                    and r.certificate.q_system_bound_holds
                ),
            }
    return out


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    """Shortest round-tripping decimal form; identical bits give identical
    text, which makes equal-seed runs byte-identical."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_outputs(result: ExperimentResult, out_dir: str) -> dict:
    """Write summary.json, series.csv and sizes.csv; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "summary": os.path.join(out_dir, "summary.json"),
        "series": os.path.join(out_dir, "series.csv"),
        "sizes": os.path.join(out_dir, "sizes.csv"),
    }

    summary = {
        "seed": result.config.seed,
        "config": result.config.to_dict(),
        "overrides": list(result.overrides),
        "aggregates": result.aggregates,
        "errors": result.errors,
    }
    with open(paths["summary"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(paths["series"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["solver", "draw", "step", "utility", "messages", "cumulative_cost"]
        )
        for run in result.metrics:
            for step in range(len(run.utility)):
                writer.writerow([
                    run.solver, run.draw, step,
                    _fmt(run.utility[step]),
                    run.messages[step],
                    _fmt(run.cumulative_cost[step]),
                ])

    with open(paths["sizes"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["solver", "N", "M", "mean_total_cost", "mean_wall_time_s"])
        for n, m in result.config.sizes:
            for name in result.config.solvers:
                agg = result.aggregates.get(f"{name}/N{n}M{m}")
                if agg is None:
                    continue
                writer.writerow([
                    name, n, m,
                    _fmt(agg["mean_total_cost"]),
                    _fmt(agg["mean_wall_time_s"]),
                ])
    return paths


# ---------------------------------------------------------------------------
# Randomized bound verification
# ---------------------------------------------------------------------------

@dataclass
class BoundInstance:
    """One randomized small instance for exhaustive bound checking."""

    seed: int
    n_agents: int
    n_targets: int
    oracle: TableOracle
    costs: list
    budgets: list
    constraints: CompositeConstraint


def random_bound_instance(seed: int, max_size: int = 4) -> BoundInstance:
    """Small random coverage instance with a complete communication graph.

    Success probabilities are distance-derived and bounded away from zero,
    budgets are drawn so they exclude some expensive pairs without starving
    any agent systematically.  The constraint system is the conflict-free
    matching with per-agent budgets that the allocation problem poses; the
    brute-force optimum is taken over the same system.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_size + 1))
    m = int(rng.integers(1, max_size + 1))
    probs = np.exp(-0.8 * rng.uniform(0.2, 2.0, size=(n, m)))
    values = rng.uniform(2.0, 2.5, size=m)
    costs = rng.uniform(0.5, 1.5, size=(n, m))
    budgets = rng.uniform(0.6, 1.5, size=n)
    oracle = TableOracle(values, probs)
    constraints = CompositeConstraint([
        PartitionConstraint(n, m),
        ConflictFreeConstraint(n, m),
        BudgetConstraint(budgets, costs),
    ])
    return BoundInstance(
        seed=seed,
        n_agents=n,
        n_targets=m,
        oracle=oracle,
        costs=costs.tolist(),
        budgets=budgets.tolist(),
        constraints=constraints,
    )


@dataclass
class BoundSuiteReport:
    instances: int
    half_passes: int
    curvature_passes: int
    q_system_passes: int
    worst_ratio: float
    violations: list  # dicts with seed and thresholds

    @property
    def all_pass(self) -> bool:
        return not self.violations


def run_bound_instance(inst: BoundInstance) -> BoundCertificate:
    """DGBA versus the brute-force optimum on one instance, certified
    against all three performance bounds."""
    scen = StaticScenario(inst.oracle, costs=inst.costs, budgets=inst.budgets)
    achieved = dgba_run(scen, constraints=inst.constraints).utility
    optimal = exact_oracle(inst.oracle, inst.constraints).utility
    try:
        kappa = estimate_elemental_curvature(
            inst.oracle, inst.oracle.ground_set(), cap=CURVATURE_GROUND_CAP
        ).kappa_e
    except DegenerateOracleError:
        kappa = 1.0
    q = estimate_q(inst.costs).q
    return bound_certificate(achieved, optimal, kappa, q, inst.n_agents)


def verify_bound_suite(n_instances: int = 100, master_seed: int = 0) -> BoundSuiteReport:
    """Randomized suite checking the three greedy performance bounds with
    the exact optimum on every instance."""
    half = curv = qsys = 0
    worst = math.inf
    violations = []
    for k in range(n_instances):
        seed = master_seed * 1_000_003 + k
        cert = run_bound_instance(random_bound_instance(seed))
        half += cert.half_bound_holds
        curv += cert.curvature_bound_holds
        qsys += cert.q_system_bound_holds
        worst = min(worst, cert.ratio)
        if not (cert.half_bound_holds and cert.curvature_bound_holds
                and cert.q_system_bound_holds):
            violations.append({
                "seed": seed,
                "ratio": cert.ratio,
                "half_threshold": cert.half_threshold,
                "curvature_threshold": cert.curvature_threshold,
                "q_system_threshold": cert.q_system_threshold,
            })
    return BoundSuiteReport(
        instances=n_instances,
        half_passes=half,
        curvature_passes=curv,
        q_system_passes=qsys,
        worst_ratio=worst,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# Per-round scaling measurement
# ---------------------------------------------------------------------------

SCALING_GRID = tuple((n, m) for n in (5, 10, 20, 40) for m in (5, 10, 20, 40))


@dataclass
class ScalingReport:
    sizes: list           # (n, m) pairs
    mean_round_s: list    # mean per-round time per size
    coefficients: list    # [a, b, c] of a + b*N^2 + c*N*M
    r_squared: float


def _time_one_round(oracle: TableOracle, adjacency: np.ndarray,
                    rounds: int) -> float:
    """Mean wall time of one assignment-plus-communication round, measured
    on fresh bundles so every repetition does the same work."""
    scen = StaticScenario(oracle, adjacency=adjacency)
    n = oracle.n_agents
    total = 0.0
    for _ in range(rounds):
        agents = [AgentRuntime(id=i + 1, bundle=BundleState.empty(n))
                  for i in range(n)]
        start = time.perf_counter()
        for agent in agents:
            avail = available_targets(scen, agent, 0)
            dgba_assignment_phase(agent, oracle, avail)
        dgba_communication_phase([a.bundle for a in agents], adjacency)
        total += time.perf_counter() - start
    return total / rounds


def measure_scaling(sizes: Sequence = SCALING_GRID, rounds: int = 50,
                    seed: int = 0) -> ScalingReport:
    """Fit the mean per-round protocol time to a + b*N^2 + c*N*M."""
    rng = np.random.default_rng(seed)
    means = []
    for n, m in sizes:
        probs = rng.uniform(0.1, 0.9, size=(n, m))
        values = rng.uniform(2.0, 2.5, size=m)
        oracle = TableOracle(values, probs)
        adjacency = np.ones((n, n)) - np.eye(n)
        _time_one_round(oracle, adjacency, rounds=3)  # warm-up
        means.append(_time_one_round(oracle, adjacency, rounds))
    if len(sizes) <= 3:
        # Too few measurements to fit three coefficients meaningfully.
        return ScalingReport(
            sizes=[tuple(s) for s in sizes],
            mean_round_s=means,
            coefficients=[],
            r_squared=math.nan,
        )
    design = np.array([[1.0, n * n, n * m] for n, m in sizes])
    y = np.array(means)
    coeffs, *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coeffs
    ss_res = float(residuals @ residuals)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingReport(
        sizes=[tuple(s) for s in sizes],
        mean_round_s=means,
        coefficients=[float(c) for c in coeffs],
        r_squared=r2,
    )
