"""Gradient flows of convex functionals on Hadamard spaces, their limit slopes and destabilising rays."""

from .destabilizer import (FlowCase, SharpnessReport, escape_test, extract_ray, sharpness_report,
                           uniqueness_probe)
from .errors import DomainError, InputError, NumericalError
from .flow import (FlowTrajectory, bind_check, energy_identity_residual, evi_residual, flow,
                   limit_slope, mayer_flow, sandwich_check)
from .functional import ConvexFunctional, prox, slope, value
from .geodesic import EuclideanSpace, GeodesicSpace, cat0_defect, comparison_triangle, distance, interpolate
from .rays import Ray, chordal_distance, moment_weight_gap, radial_value, ray_geodesic, ray_norm
from .registry import Instance, list_instances, resolve

__version__ = "0.1.0"
