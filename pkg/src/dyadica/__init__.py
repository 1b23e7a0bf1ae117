"""Certified dyadic-cube measurements of indicator-function smoothness.

The package measures, for a fixed menu of planar domains (cubes, disks,
power-law and logarithmic spirals, the Koch snowflake, graph domains),
the quantities that control the smoothness of the domain's indicator
function: Haar coefficient tables, sequence-space norms, finite-difference
masses, boundary-collar measures and Whitney decompositions.  Every area
is produced as a certified interval from an adaptive quadtree, scaling
exponents are fitted per dyadic level, and a built-in closed-form oracle
supplies the expected membership verdict for comparison.
"""

from .geometry import (
    AngularWindow,
    AxisBox,
    AxisCube,
    Ball,
    DepthExceeded,
    Domain,
    EMPTY,
    FULL,
    MIXED,
    HoelderCusp,
    LipschitzGraph,
    Snowflake,
    SpiralLog,
    SpiralPower,
    classify_cell,
    contains,
    parse_domain,
    snowflake_polygon,
    spiral_window,
)

__version__ = "0.1.0"
