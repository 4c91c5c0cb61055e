"""Tests for the satellite scenario: dynamics, controllers, costs, graph."""

import math

import numpy as np
import pytest

from taskalloc.core import ContractViolation, make_policy
from taskalloc.scenario import (
    AgentBody,
    ScenarioConfig,
    TargetBody,
    build_comm_graph,
    estimate_pair_cost,
    loiter_cost,
    minimum_effort_cost,
    observation_utility,
    predict_target,
    rendezvous_control,
    rendezvous_point,
    sample_scenario,
    step_agent,
    step_dynamics,
    survival_probability,
)


def make_target(position, velocity=(0, 0, 0), drag=0.0, end_time=12.0,
                obs_duration=2.0, obs_radius=1.0):
    return TargetBody(
        position=np.asarray(position, float),
        velocity=np.asarray(velocity, float),
        info_value=2.0,
        decay=0.8,
        end_time=end_time,
        obs_duration=obs_duration,
        obs_radius=obs_radius,
        drag_coeff=drag,
    )


class TestSurvivalProbability:
    def test_one_at_zero_distance(self):
        assert survival_probability([1, 2, 3], [1, 2, 3], 0.8) == 1.0

    def test_distance_one(self):
        got = survival_probability([0, 0, 0], [1, 0, 0], 0.8)
        assert got == pytest.approx(math.exp(-0.8), abs=1e-15)

    def test_strictly_decreasing_in_distance(self):
        p1 = survival_probability([0, 0, 0], [1, 0, 0], 0.8)
        p2 = survival_probability([0, 0, 0], [2, 0, 0], 0.8)
        assert p2 < p1

    def test_rejects_nonpositive_decay(self):
        with pytest.raises(ContractViolation):
            survival_probability([0, 0, 0], [1, 0, 0], 0.0)


class TestObservationUtility:
    AGENTS = [np.zeros(3), np.array([1.0, 0, 0])]
    TARGETS = [np.array([1.0, 0, 0]), np.array([3.0, 0, 0])]
    VALUES = [2.0, 1.5]
    DECAYS = [0.8, 0.8]

    def test_empty_policy_is_zero(self):
        total, per = observation_utility(
            frozenset(), self.AGENTS, self.TARGETS, self.VALUES, self.DECAYS)
        assert total == 0.0 and per == [0.0, 0.0]

    def test_total_is_sum_of_per_target(self):
        pol = make_policy([(1, 1), (2, 2)])
        total, per = observation_utility(
            pol, self.AGENTS, self.TARGETS, self.VALUES, self.DECAYS)
        assert total == pytest.approx(sum(per), abs=1e-15)

    def test_second_observer_raises_coverage(self):
        one = make_policy([(1, 1)])
        both = make_policy([(1, 1), (2, 1)])
        t1, _ = observation_utility(one, self.AGENTS, self.TARGETS,
                                    self.VALUES, self.DECAYS)
        t2, _ = observation_utility(both, self.AGENTS, self.TARGETS,
                                    self.VALUES, self.DECAYS)
        assert t2 > t1


class TestDynamics:
    def test_step_agent_exact_for_constant_accel(self):
        p0, v0 = np.array([1.0, 0, 0]), np.array([0.0, 2.0, 0])
        u = np.array([0.5, -1.0, 0.25])
        dt = 0.37
        p, v = step_agent(p0, v0, u, dt)
        assert p == pytest.approx(p0 + v0 * dt + 0.5 * u * dt ** 2, abs=1e-12)
        assert v == pytest.approx(v0 + u * dt, abs=1e-12)

    def test_predict_target_matches_integration(self):
        tgt = make_target([0, 0, 0], velocity=[1.0, -0.5, 0.2], drag=0.3)
        horizon = 2.0
        pos, vel = predict_target(tgt, horizon)
        # Integrate the same drag dynamics numerically.
        p, v = tgt.position.copy(), tgt.velocity.copy()
        dt = horizon / 4000
        for _ in range(4000):
            p = p + v * dt + 0.5 * (-0.3 * v) * dt ** 2
            v = v * (1 - 0.3 * dt + 0.5 * (0.3 * dt) ** 2)
        assert pos == pytest.approx(p, abs=1e-4)
        assert vel == pytest.approx(v, abs=1e-4)

    def test_fuel_exhausted_agent_coasts(self):
        agent = AgentBody(position=np.zeros(3), velocity=np.zeros(3),
                          comm_factor=0.3, fuel=1e-9)
        tgt = make_target([5, 0, 0])
        out_agents, _, increments = step_dynamics(
            [agent], [tgt], [np.array([10.0, 0, 0])], dt=0.1)
        assert increments == [0.0]
        assert np.allclose(out_agents[0].position, 0.0)

    def test_rejects_nonpositive_dt(self):
        agent = AgentBody(position=np.zeros(3), velocity=np.zeros(3),
                          comm_factor=0.3, fuel=1.0)
        with pytest.raises(ContractViolation):
            step_dynamics([agent], [], [np.zeros(3)], dt=0.0)


class TestRendezvousController:
    def test_terminal_error_static_target(self):
        tgt = make_target([4.0, 3.0, 1.0], end_time=12.0, obs_duration=2.0)
        p = np.array([0.0, 0.0, 0.0])
        v = np.zeros(3)
        t_final = tgt.final_time
        r_hat, v_hat = rendezvous_point(p, tgt, 0.0)
        dt = t_final / 2000
        t = 0.0
        for _ in range(2000):
            u = rendezvous_control(p, v, r_hat, v_hat, t, t_final)
            p, v = step_agent(p, v, u, dt)
            t += dt
        travel = np.linalg.norm(r_hat - np.zeros(3))
        assert np.linalg.norm(p - r_hat) / travel < 1e-3
        assert np.linalg.norm(v - v_hat) < 1e-3

    def test_terminal_error_moving_dragged_target(self):
        tgt = make_target([4.0, 3.0, 1.0], velocity=[0.2, -0.1, 0.05],
                          drag=0.05, end_time=12.0, obs_duration=2.0)
        p = np.array([0.0, 0.0, 0.0])
        v = np.array([0.1, 0.0, -0.1])
        t_final = tgt.final_time
        r_hat, v_hat = rendezvous_point(p, tgt, 0.0)
        dt = t_final / 2000
        t = 0.0
        for _ in range(2000):
            u = rendezvous_control(p, v, r_hat, v_hat, t, t_final)
            p, v = step_agent(p, v, u, dt)
            t += dt
        travel = np.linalg.norm(r_hat - np.zeros(3))
        assert np.linalg.norm(p - r_hat) / travel < 1e-3

    def test_aim_point_on_observation_circle(self):
        tgt = make_target([4.0, 0.0, 0.0], obs_radius=1.2)
        r_hat, _ = rendezvous_point(np.zeros(3), tgt, 0.0)
        assert np.linalg.norm(r_hat - tgt.position) == pytest.approx(1.2)


class TestPairCosts:
    def test_rest_to_rest_matches_analytic(self):
        p0 = np.zeros(3)
        point = np.array([3.0, -2.0, 1.0])
        horizon = 7.0
        analytic = 6.0 * float(point @ point) / horizon ** 3
        got = minimum_effort_cost(p0, np.zeros(3), point, np.zeros(3), horizon)
        assert got == pytest.approx(analytic, rel=1e-12)

    def test_simulated_cost_matches_closed_form_within_one_percent(self):
        tgt = make_target([4.0, 3.0, 0.0], end_time=12.0, obs_duration=2.0)
        agent = AgentBody(position=np.zeros(3), velocity=np.zeros(3),
                          comm_factor=0.3, fuel=math.inf)
        t_e = tgt.end_time
        pc = estimate_pair_cost(agent, tgt, time_now=0.0, dt=t_e / 2000)
        r_hat, _ = rendezvous_point(agent.position, tgt, 0.0)
        dp = r_hat - agent.position
        analytic = 6.0 * float(dp @ dp) / tgt.final_time ** 3
        assert pc.feasible
        assert pc.maneuver == pytest.approx(analytic, rel=0.01)

    def test_expired_deadline_is_infeasible(self):
        tgt = make_target([1.0, 0, 0], end_time=2.0, obs_duration=1.9)
        agent = AgentBody(position=np.zeros(3), velocity=np.zeros(3),
                          comm_factor=0.3, fuel=math.inf)
        pc = estimate_pair_cost(agent, tgt, time_now=0.5, dt=0.01)
        assert not pc.feasible and pc.total == math.inf

    def test_loiter_cost_formula(self):
        assert loiter_cost(0.5, 1.0, 2.0) == pytest.approx(
            0.5 * (0.5 ** 2 / 1.0) ** 2 * 2.0)


class TestCommGraph:
    def test_within_range_linked(self):
        a = AgentBody(np.zeros(3), np.zeros(3), comm_factor=0.5, fuel=1.0)
        b = AgentBody(np.array([1.0, 0, 0]), np.zeros(3),
                      comm_factor=0.5, fuel=1.0)
        adj = build_comm_graph([a, b], domain_diameter=4.0)
        assert adj[0, 1] == adj[1, 0] == 1.0

    def test_min_factor_rule(self):
        # The weaker radio decides: factor 0.1 * diameter 4 = 0.4 < distance.
        a = AgentBody(np.zeros(3), np.zeros(3), comm_factor=0.9, fuel=1.0)
        b = AgentBody(np.array([1.0, 0, 0]), np.zeros(3),
                      comm_factor=0.1, fuel=1.0)
        adj = build_comm_graph([a, b], domain_diameter=4.0)
        assert adj[0, 1] == 0.0

    def test_zero_diagonal(self):
        a = AgentBody(np.zeros(3), np.zeros(3), comm_factor=0.5, fuel=1.0)
        adj = build_comm_graph([a, a], domain_diameter=4.0)
        assert np.all(np.diag(adj) == 0)


class TestSampledScenario:
    def test_reproducible_from_seed(self):
        cfg = ScenarioConfig(n_agents=3, n_targets=3)
        s1 = sample_scenario(cfg, np.random.default_rng(11))
        s2 = sample_scenario(cfg, np.random.default_rng(11))
        for a1, a2 in zip(s1.agents, s2.agents):
            assert np.array_equal(a1.position, a2.position)
        assert s1.pair_cost(1, 1) == s2.pair_cost(1, 1)

    def test_oracle_tracks_positions(self):
        cfg = ScenarioConfig(n_agents=2, n_targets=2)
        scen = sample_scenario(cfg, np.random.default_rng(4))
        before = scen.oracle().evaluate(make_policy([(1, 1)]))
        scen.advance({1: 1}, 0)
        after = scen.oracle().evaluate(make_policy([(1, 1)]))
        assert before != after  # the world moved

    def test_budget_set_from_median_pair_cost(self):
        cfg = ScenarioConfig(n_agents=3, n_targets=3, fuel_median_factor=10.0)
        scen = sample_scenario(cfg, np.random.default_rng(8))
        estimates = [scen.pair_cost(i, j)
                     for i in (1, 2, 3) for j in (1, 2, 3)]
        assert scen.agents[0].fuel == pytest.approx(
            10.0 * float(np.median(estimates)))

    def test_lock_due_inside_final_window(self):
        cfg = ScenarioConfig(n_agents=2, n_targets=2)
        scen = sample_scenario(cfg, np.random.default_rng(4))
        tgt = scen.targets[0]
        # Advance time to just inside the lock window.
        scen._round = int((tgt.final_time - 0.5 * tgt.obs_duration) / scen.dt)
        assert scen.lock_due(1, scen._round)

    def test_cost_row_matches_closed_form(self):
        cfg = ScenarioConfig(n_agents=2, n_targets=3)
        scen = sample_scenario(cfg, np.random.default_rng(21))
        row = scen.pair_cost_row(1)
        body = scen.agents[0]
        for j, tgt in enumerate(scen.targets, start=1):
            r_hat, v_hat = rendezvous_point(body.position, tgt, 0.0)
            expected = minimum_effort_cost(
                body.position, body.velocity, r_hat, v_hat, tgt.final_time
            ) + loiter_cost(cfg.orbit_speed, tgt.obs_radius, tgt.obs_duration)
            assert row[j - 1] == pytest.approx(expected, rel=1e-9)
