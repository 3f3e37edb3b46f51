"""Interacting diffusions on sparse W-random graphs.

Functional core (``graph``, ``dynamics``, ``measures``, ``norms``, ``mckv``,
``approx``) with thin scikit-learn style estimators on top.
"""

from ._validation import NumericalFailure
from .approx import (MollifiedInteraction, bump, cutoff_apply, exit_tail_bound, mollify, rapp_bound,
                     run_approx_system)
from .dynamics import CoupledDiffusion, TrajectoryPair, integrate_coupled, integrate_single
from .graph import GraphSample, WRandomGraph, sample_w_graph
from .measures import (EmpiricalMeasure, coupling_delta, dbl_lower_bound, gronwall_wasserstein_bound,
                       wasserstein_1d)
from .mckv import DensityFlow, McKeanVlasovSolver, compare_to_empirical, solve_mckv
from .model import FourierMeasure, InteractionModel, free_diffusion, get_model, kuramoto, spatial_kuramoto
from .norms import bennett_log_tail, norm_inf_to_one_exact, norm_inf_to_one_lower, norm_inf_to_one_upper

__version__ = "0.1.0"

__all__ = [
    "CoupledDiffusion", "DensityFlow", "EmpiricalMeasure", "FourierMeasure", "GraphSample",
    "InteractionModel", "McKeanVlasovSolver", "MollifiedInteraction", "NumericalFailure", "TrajectoryPair",
    "WRandomGraph", "bennett_log_tail", "bump", "compare_to_empirical", "coupling_delta", "cutoff_apply",
    "dbl_lower_bound", "exit_tail_bound", "free_diffusion", "get_model", "gronwall_wasserstein_bound",
    "integrate_coupled", "integrate_single", "kuramoto", "mollify", "norm_inf_to_one_exact",
    "norm_inf_to_one_lower", "norm_inf_to_one_upper", "rapp_bound", "run_approx_system", "sample_w_graph",
    "solve_mckv", "spatial_kuramoto", "wasserstein_1d",
]
