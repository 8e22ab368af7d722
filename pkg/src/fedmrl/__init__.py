"""Deterministic federated-learning simulator.

Adaptive per-client proximal terms from a cooperative Q-learning controller,
a fairness penalty in every client objective, SOM/similarity-weighted server
aggregation, and FedAvg/FedProx/FedNova baselines, all on small dense
classifiers with a built-in autodiff core.
"""

__version__ = "0.1.0"

from .orchestrator import ExperimentConfig, RunResult, run_experiment

__all__ = ["ExperimentConfig", "RunResult", "run_experiment", "__version__"]
