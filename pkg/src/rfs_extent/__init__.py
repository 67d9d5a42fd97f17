"""Extended-target multi-target tracking with labelled random finite sets.

GGIW (gamma Gaussian inverse-Wishart) single-target densities inside GLMB
and LMB filters, plus scenario simulation and OSPA scoring.
"""
from .assignment import AssignCostMatrix, InfeasibleAssignment, hungarian, k_shortest_paths, murty
from .ggiw import (
    GGIWMixture,
    GGIWParams,
    MotionModel,
    constant_velocity_model,
    extent_point_estimate,
    predict_ggiw,
    reduce_mixture,
    singer_model,
    update_ggiw,
)
from .glmb import BirthTemplate, FilterConfig, GLMBFilter, predict_glmb, step_glmb, update_glmb
from .labelled import Estimate, GLMBDensity, Hypothesis, Label, LMBDensity, LMBTrack, glmb_to_lmb, lmb_to_glmb
from .likelihood import ClutterModel, Partition, brute_force_likelihood, set_partitions
from .lmb import LMBFilter, predict_lmb, step_lmb, update_lmb
from .metrics import aggregate, extended_base_distance, ospa
from .partitioning import PartitionConfig, birth_candidates, cluster_tracks, feasible_partitions
from .simulation import ScenarioSpec, TargetSpec, builtin_scenario, generate

__version__ = "0.1.0"
