"""Solve the default two-EC scenario exactly and look at what the optimal policy does.

Run: python3 demos/01_policy_iteration.py
"""
from vnfsim import load_preset
from vnfsim.mdp import bellman_residual, policy_iteration
from vnfsim.model import REJECT, EventKind, feasible_ecs

cfg = load_preset("table1")
sc = cfg.scenario
res = policy_iteration(sc, cfg.pi["gamma"], cfg.pi["theta"])
model = res.model
print(f"{model.n_states} states, converged after {res.iterations} improvement steps")
print(f"Bellman residual {bellman_residual(model, res.values, res.gamma):.2e}")

# Arrivals the optimal policy turns away even though some EC could host them.
print("\nproactive rejections (alloc rows are per-EC counts of each type):")
for state, a in zip(model.states, res.policy):
    ev = state.event
    if ev.kind == EventKind.ARRIVAL and a == REJECT and feasible_ecs(state.alloc, sc, ev.vnf_type):
        print(f"  alloc={state.alloc} arriving type {ev.vnf_type + 1}")

empty = model.index[model.states[0]]
print(f"\nvalue of the empty network: {res.values[empty]:.3f}")
