"""Absorbing-frequency centrality (AFC) for stochastic networks."""
from .core import AfcProfile, NumericalError, afc, canonical_kernel, post_initial_afc, simulate_afc, visits
from .graph import BaseTopology, GraphSummary, WorkingGraph, betweenness, local_center, local_topk
from .kernel import AmcKernel, ExactLaw, estimate_kernel, exact_kernel
from .realization import Mode, RealizationModel, realize

__all__ = [
    "AfcProfile", "AmcKernel", "BaseTopology", "ExactLaw", "GraphSummary", "Mode", "NumericalError",
    "RealizationModel", "WorkingGraph", "afc", "betweenness", "canonical_kernel", "estimate_kernel",
    "exact_kernel", "local_center", "local_topk", "post_initial_afc", "realize", "simulate_afc", "visits",
]
