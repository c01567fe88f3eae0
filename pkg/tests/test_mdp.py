import json
import math

import numpy as np
import pytest

from oracles import OracleMdp, brute_force_states
from vnfsim.errors import InadmissibleActionError, NonConvergenceError, ScenarioTooLargeError
from vnfsim.mdp import (
    MdpModel,
    MdpState,
    SolvedPolicy,
    admissible_actions,
    bellman_residual,
    build_model,
    departure_split,
    enumerate_states,
    initial_policy,
    policy_evaluation,
    policy_improvement,
    policy_iteration,
    total_event_rate,
    transitions,
)
from vnfsim.model import REJECT, VOID, Event, EventKind, Scenario

A, D = EventKind.ARRIVAL, EventKind.DEPARTURE


def test_tiny_enumeration(tiny):
    states = enumerate_states(tiny)
    assert states == [
        MdpState(((0,),), Event(A, 0)),
        MdpState(((1,),), Event(A, 0)),
        MdpState(((1,),), Event(D, 0)),
        MdpState(((2,),), Event(A, 0)),
        MdpState(((2,),), Event(D, 0)),
    ]


def test_zero_capacity_enumeration():
    sc = Scenario.from_lists([(0, 0), (0, 0)], [(1, 1, 1, 1), (2, 2, 1, 1), (1, 5, 2, 2)])
    states = enumerate_states(sc)
    assert len(states) == 3
    assert all(s.event.kind == A for s in states)


def test_table1_enumeration_matches_brute_force(table1):
    states = enumerate_states(table1)
    oracle = brute_force_states(table1)
    assert [(s.alloc, int(s.event.kind), s.event.vnf_type) for s in states] == oracle
    assert len(states) == 174


def test_state_cap(table1, monkeypatch):
    with pytest.raises(ScenarioTooLargeError):
        enumerate_states(table1, state_cap=100)
    monkeypatch.setenv("VNFSIM_STATE_CAP", "50")
    with pytest.raises(ScenarioTooLargeError):
        enumerate_states(table1)


def test_total_event_rate(fig2, table1):
    M = ((1, 0), (0, 1))
    assert total_event_rate(M, fig2) == pytest.approx(7.25, abs=0, rel=1e-15)
    assert total_event_rate(fig2.empty_alloc(), fig2) == 6
    assert total_event_rate(table1.empty_alloc(), table1) == 5


def test_arrival_transition_after_placement(fig2):
    s0 = MdpState(((0, 0), (0, 1)), Event(A, 0))
    dist = dict(transitions(s0, 0, fig2))
    post = ((1, 0), (0, 1))
    assert dist[MdpState(post, Event(A, 0))] == pytest.approx(2 / 7.25, rel=1e-15)
    assert dist[MdpState(post, Event(A, 0))] == pytest.approx(0.27586, abs=1e-5)
    assert dist[MdpState(post, Event(A, 1))] == pytest.approx(4 / 7.25, rel=1e-15)
    assert dist[MdpState(post, Event(D, 0))] == pytest.approx(0.25 / 7.25, rel=1e-15)
    assert dist[MdpState(post, Event(D, 1))] == pytest.approx(1 / 7.25, rel=1e-15)
    assert math.fsum(dist.values()) == pytest.approx(1, abs=1e-12)


def test_reject_keeps_allocation(fig2):
    s0 = MdpState(((0, 0), (0, 1)), Event(A, 0))
    assert {n.alloc for n, _ in transitions(s0, REJECT, fig2)} == {s0.alloc}


def test_departure_split_is_half(fig2):
    M = ((0, 1), (0, 1))
    assert departure_split(M, fig2, 1) == {0: 0.5, 1: 0.5}
    s = MdpState(M, Event(D, 1))
    dist = transitions(s, VOID, fig2)
    from_ec1 = sum(p for n, p in dist if n.alloc == ((0, 0), (0, 1)))
    assert from_ec1 == pytest.approx(0.5, abs=1e-15)


def test_inadmissible_actions(fig2):
    arrival = MdpState(((0, 1), (0, 0)), Event(A, 1))
    with pytest.raises(InadmissibleActionError):
        transitions(arrival, 0, fig2)  # EC1 has 1 free core, type 2 needs 3
    with pytest.raises(InadmissibleActionError):
        transitions(arrival, VOID, fig2)
    with pytest.raises(InadmissibleActionError):
        transitions(MdpState(((0, 1), (0, 0)), Event(D, 1)), REJECT, fig2)
    assert admissible_actions(arrival, fig2) == (REJECT, 1)


def test_transitions_match_exact_oracle(table1):
    model = build_model(table1)
    oracle = OracleMdp(table1)
    assert len(oracle.states) == model.n_states
    for s in range(model.n_states):
        assert list(model.actions[s]) == oracle.actions[s]
        for a, (idx, probs) in model.succ[s].items():
            row = np.zeros(model.n_states)
            row[list(idx)] = probs
            np.testing.assert_allclose(row, oracle.P[s, a], atol=1e-14)


def test_closure_and_normalisation(table1):
    model = build_model(table1)
    for s, row in enumerate(model.succ):
        for a, (idx, probs) in row.items():
            assert all(p > 0 for p in probs)
            assert abs(math.fsum(probs) - 1) <= 1e-12
            assert all(0 <= j < model.n_states for j in idx)


def test_all_reject_policy_has_zero_value(table1):
    model = build_model(table1)
    policy = [REJECT if acts[0] == REJECT else VOID for acts in model.actions]
    assert policy_evaluation(model, policy, 0.9, 1e-8) == [0.0] * model.n_states


def test_single_state_self_loop():
    model = MdpModel(None, ["s"], {"s": 0}, [(0,)], [{0: ((0,), (1.0,))}])
    V = policy_evaluation(model, [0], 0.5, 1e-10)
    assert V[0] == pytest.approx(2, abs=1e-9)


def test_policy_evaluation_matches_linear_solve(tiny):
    model = build_model(tiny)
    oracle = OracleMdp(tiny)
    policy = [acts[-1] for acts in model.actions]  # place whenever possible
    theta = 1e-9
    V = policy_evaluation(model, policy, 0.9, theta)
    exact = oracle.policy_values(policy, 0.9)
    np.testing.assert_allclose(V, exact, atol=10 * theta)


def test_policy_evaluation_non_convergence(tiny):
    model = build_model(tiny)
    with pytest.raises(NonConvergenceError):
        policy_evaluation(model, [a[-1] for a in model.actions], 0.99, 1e-12, max_sweeps=3)
    with pytest.raises(ValueError):
        policy_evaluation(model, initial_policy(model), 1.0, 1e-6)


def test_improvement_from_zero_values(table1):
    model = build_model(table1)
    policy, stable = policy_improvement(model, [0.0] * model.n_states, 0.99, initial_policy(model))
    assert not stable
    for s, acts in enumerate(model.actions):
        if acts == (VOID,):
            assert policy[s] == VOID
        elif len(acts) > 1:
            assert policy[s] == acts[1]
        else:
            assert policy[s] == REJECT


def test_improvement_of_optimal_values_is_stable(tiny):
    oracle = OracleMdp(tiny)
    V = oracle.value_iteration(0.9)
    model = build_model(tiny)
    policy = oracle.greedy(V, 0.9)
    new, stable = policy_improvement(model, list(V), 0.9, policy)
    assert stable and new == policy


def test_zero_capacity_policy_rejects_everything():
    sc = Scenario.from_lists([(0, 0)], [(1, 1, 1, 1), (1, 2, 2, 1)])
    res = policy_iteration(sc)
    assert res.policy == [REJECT, REJECT]
    assert res.values == [0.0, 0.0]


@pytest.mark.parametrize("sc", [
    Scenario.from_lists([(2, 100)], [(1, 10, 1.0, 0.5)]),
    Scenario.from_lists([(2, 100), (3, 100)], [(1, 10, 1.0, 0.5)]),
    Scenario.from_lists([(4, 400)], [(1, 300, 3, 1), (3, 50, 2, 0.5)]),
])
def test_pi_matches_value_iteration(sc):
    res = policy_iteration(sc, gamma=0.95, theta=1e-10)
    oracle = OracleMdp(sc)
    V = oracle.value_iteration(0.95)
    assert res.policy == oracle.greedy(V, 0.95)
    np.testing.assert_allclose(res.values, V, atol=1e-6)


def test_table1_bellman_residual_and_monotone_improvement(table1):
    res = policy_iteration(table1, keep_history=True)
    assert bellman_residual(res.model, res.values, res.gamma) <= 10 * res.theta
    for prev, nxt in zip(res.value_history, res.value_history[1:]):
        assert all(b >= a - 10 * res.theta for a, b in zip(prev, nxt))


def test_solved_policy_json_roundtrip(table1):
    solved = policy_iteration(table1).solved()
    data = json.loads(json.dumps(solved.to_json()))
    back = SolvedPolicy.from_json(data)
    assert back.states == solved.states
    assert back.actions == solved.actions
    assert back.values == solved.values
    assert data["states"][0] == [0, 0, 0, 0, 1, 0]
    assert set(data["actions"]) <= {"reject", "void", "ec1", "ec2"}
