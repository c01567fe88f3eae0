"""Online VNF placement on edge nodes.

Three ways to decide where an arriving VNF request goes: an exact policy from
policy iteration on the finite MDP, a tabular Q-learning agent, and a weighted
best-fit heuristic, all replayed on the same seeded Poisson traces.
"""
from .bestfit import BestFit
from .config import ScenarioConfig, load_config, load_preset
from .harness import ExperimentConfig, compare_algorithms, evaluate_algorithms, run_experiment
from .mdp import MdpState, SolvedPolicy, build_model, enumerate_states, policy_iteration
from .model import REJECT, VOID, EcNode, Event, EventKind, Scenario, Topology, VnfType
from .qlearning import AgentConfig, EpsilonSchedule, QTable, epsilon_at
from .simulator import EpisodeResult, run_episode
from .traces import Trace, generate_file_set, generate_trace

__version__ = "0.1.0"
