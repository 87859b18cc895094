# -*- coding: utf-8 -*-
"""
constants module provides the numerical defaults shared across the package
"""

# Module imports
from math import pi as _pi

# Mesh Constants
"""
Minimum element diameter allowed after adaptive refinement. Units: *domain units*
"""
H_MIN = 1.0e-3

"""
Maximum number of vertices a generated or refined mesh may contain before a
``ResourceLimitError`` is raised.
"""
MAX_VERTICES = 2_000_000

"""
Mesh generator quality constant. The maximum element diameter of a generated
mesh is bounded by ``MESH_DIAMETER_FACTOR * target_h``.
"""
MESH_DIAMETER_FACTOR = 2.0

"""
Default fraction of elements selected by gradient marking.
"""
MARK_FRACTION = 0.1

"""
Number of accepted optimizer steps between two mesh adaptations.
"""
N_ADAPT = 30

# Phase Field Constants
"""
Normalization of the Ginzburg-Landau energy for the convex potential
W(s) = s(1-s). Equal to 1/(2*int_0^1 sqrt(W)) = 4/pi.
"""
GAMMA_CONVEX = 4.0/_pi

"""
Normalization of the Ginzburg-Landau energy for the double-well potential
W(s) = s^2(1-s)^2. Equal to 1/(2*int_0^1 sqrt(W)) = 3.
"""
GAMMA_DOUBLE_WELL = 3.0

# Default Problem Setup
"""
Default radius of the computational disk.
"""
DOMAIN_RADIUS = 1.0

"""
Default width of the boundary band where the phase field is pinned to 1.
"""
D0_BAND = 0.1

"""
Default number of boundary measurements (sources).
"""
N_MEAS = 4

"""
Default ring radius of the source centers.
"""
SOURCE_RING_RADIUS = 0.8

"""
Default width of the Gaussian sources.
"""
SOURCE_WIDTH = 0.2

"""
Default relative noise level.
"""
NOISE_LEVEL = 0.01

"""
Name of the random bit generator recorded in measurement metadata.
"""
RNG_ALGORITHM = 'PCG64'

# Continuation Defaults
"""
Initial interface width of the continuation schedule.
"""
EPSILON0 = 0.1

"""
Initial fictitious conductivity of the continuation schedule.
"""
DELTA0 = 1.0e-2

"""
Reduction factors of epsilon and delta between continuation phases.
"""
EPSILON_FACTOR = 4.0
DELTA_FACTOR = 10.0

N_PHASES = 3

"""
Default regularization weight alpha.
"""
ALPHA = 1.0e-5

# Exit Codes
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4
