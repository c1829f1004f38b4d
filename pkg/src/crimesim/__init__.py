"""Deterministic agent-based urban crime simulation platform.

Core pieces: a discretized city environment with static features, a
sampled population of citizens, criminals, and police, EPR mobility,
pluggable crime-decision engines (rule baselines, scripted fixtures,
LLM-backed), a counterfactual scenario layer, distribution metrics, and
a CLI plus HTTP run service.
"""

__version__ = "0.1.0"
