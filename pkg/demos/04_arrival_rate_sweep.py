"""Scale all arrival rates and watch the rejection ratio grow for every algorithm.

Run: python3 demos/04_arrival_rate_sweep.py [out_dir]
"""
import sys

from vnfsim.harness import ExperimentConfig, run_experiment

out = sys.argv[1] if len(sys.argv) > 1 else None
result = run_experiment(ExperimentConfig.from_preset("arrival_rate", out=out))
for p in result.params:
    f = p["factor"]
    means = "  ".join(f"{alg}={result.mean(alg, f):.3f}" for alg in ("pi", "ql", "bestfit"))
    print(f"factor {f:<4} lambda={p['lambda']}  {means}")
if out:
    print(f"CSV files written to {out}")
