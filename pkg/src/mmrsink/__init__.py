"""Minmax-regret sink location on dynamic flow paths with parametric weights."""
from .evac import SinkLocation, aggregate_time, aggregate_time_at, completion_time_to_v1, theta_L, theta_R
from .network import InstanceError, LinearFn, ParametricPathNetwork, from_dict, load, random_instance, validate
from .parametric import NumericBreakdown, compute_F, compute_opt, phi_at_vertex, z_breakpoint_envelope
from .pwpoly import Interval, PiecewisePoly, QuadFn, lower_envelope, maximize_on, minimize_on, pw_add, upper_envelope
from .regret import RegretModel, RegretPiece, SolveResult, g_of_x, minimize_mr_on_edge, mr_at_vertex, regret_pieces, solve

__version__ = "0.1.0"

__all__ = [
    "Interval",
    "InstanceError",
    "LinearFn",
    "NumericBreakdown",
    "ParametricPathNetwork",
    "PiecewisePoly",
    "QuadFn",
    "RegretModel",
    "RegretPiece",
    "SinkLocation",
    "SolveResult",
    "aggregate_time",
    "aggregate_time_at",
    "completion_time_to_v1",
    "compute_F",
    "compute_opt",
    "from_dict",
    "g_of_x",
    "load",
    "lower_envelope",
    "maximize_on",
    "minimize_mr_on_edge",
    "minimize_on",
    "mr_at_vertex",
    "phi_at_vertex",
    "pw_add",
    "random_instance",
    "regret_pieces",
    "solve",
    "theta_L",
    "theta_R",
    "upper_envelope",
    "validate",
    "z_breakpoint_envelope",
]
