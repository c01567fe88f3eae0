"""Policy iteration, Q-learning and best fit on the same 20 evaluation traces.

Run: python3 demos/03_compare_algorithms.py
"""
from vnfsim import load_preset
from vnfsim.harness import compare_algorithms, evaluate_algorithms, evaluation_traces

cfg = load_preset("table1")
rows = evaluate_algorithms(cfg, evaluation_traces(cfg), agent_seeds=[0, 1, 2])
summary, deltas = compare_algorithms(rows)
for s in summary:
    print(f"{s['algorithm']:>8}  rejection {s['mean']:.4f} +- {s['std']:.4f}  ({s['n']} episodes)")
d = deltas[0]
print(f"\nQ-learning is {d['ql_minus_pi']:.4f} above the optimum, best fit {d['bestfit_minus_ql']:.4f} above Q-learning")
