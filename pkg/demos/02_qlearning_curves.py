"""Train Q-learning agents with different step sizes and exploration decay and
compare how quickly the per-episode reward settles.

Run: python3 demos/02_qlearning_curves.py        (about a minute)
"""
import numpy as np

from vnfsim.harness import ExperimentConfig, run_experiment

for preset in ("alpha_gamma", "eps_decay"):
    result = run_experiment(ExperimentConfig.from_preset(preset))
    print(f"\n{preset}")
    for label, curve in result.curves.items():
        head, tail = np.mean(curve[:25]), np.mean(curve[-25:])
        print(f"  {label:<20} first 25: {head:.3f}   last 25: {tail:.3f}   episodes: {len(curve)}")
