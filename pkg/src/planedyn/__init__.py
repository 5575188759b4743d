"""Lyapunov metrics, stable/unstable leaves and translation structure for
expansive homeomorphisms of the plane."""
from .errors import *  # noqa: F401,F403
from .geometry import Point, Polyline, crossing_points, separates
from .maps import PlaneMap, conjugate, identity, linear_hyperbolic, shear, translation
from .metrics import LyapunovMetric, PathFamily

__version__ = "0.1.0"
