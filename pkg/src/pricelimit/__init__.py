"""Price-limit cascades on stock-investor networks."""

__version__ = "0.1.0"

from .contagion import CascadeResult, CascadeState, run_all_single_shocks, run_cascade
from .critical import (
    CriticalAlpha,
    SweepResult,
    average_cascade_steps,
    driving_node_probability,
    find_alpha_c,
    max_alpha_ci_histogram,
    neighbor_alpha_c,
    neighbor_alpha_c_simplified,
    sweep,
)
from .metrics import average_nestedness, branching, k_core_index, knn_degree, nestedness, stock_metrics
from .network import BipartiteNetwork, StockGraph, group_by_mapping, load_holdings, stock_projection
from .randomize import partial_rewire, randomization_experiment
from .waves import FailureEvent, Wave, detect_waves, kcore_trajectory, max_pd_timeline
