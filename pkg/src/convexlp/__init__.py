"""Numerical experiments on L_p-Brunn-Minkowski inequalities for intrinsic volumes.

Smooth convex bodies are handled through their support functions sampled on
quadrature grids of the sphere, with analytic derivatives; non-smooth bodies
through exact planar formulas, Wulff shapes and segment products.
"""

from .bodies import (
    Ball,
    Body,
    Ellipsoid,
    Harmonic,
    PMean,
    Polygon2D,
    SegmentProduct,
    cube,
    load_body,
    lp_combination,
    save_body,
    segment_product,
    support,
    wulff_shape_2d,
    wulff_shape_3d,
)
from .harmonics import HarmonicExpansion
from .sphere import SphereGrid, build_grid, hessian_operator, laplacian, spherical_gradient

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "Body",
    "Ellipsoid",
    "Harmonic",
    "HarmonicExpansion",
    "PMean",
    "Polygon2D",
    "SegmentProduct",
    "SphereGrid",
    "build_grid",
    "cube",
    "hessian_operator",
    "laplacian",
    "load_body",
    "lp_combination",
    "save_body",
    "segment_product",
    "spherical_gradient",
    "support",
    "wulff_shape_2d",
    "wulff_shape_3d",
]
