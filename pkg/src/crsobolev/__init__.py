"""Crouzeix-Raviart and Raviart-Thomas tools for anisotropic simplicial meshes.

The package checks exact discrete identities to rounding level and measures
the constants of the discrete Sobolev inequality over semi-regular families.
"""

from .errors import (
    DegenerateElementError,
    GeometryError,
    InadmissibleExponentsError,
    IndexRangeError,
    MeshError,
    MeshFormatError,
    NonconformingMeshError,
    SingularSystemError,
    UndefinedRatioError,
)
from .geometry import ElementGeometry, decompose, decompose_2d, decompose_3d, directional_seminorm, semi_regularity
from .mesh import FaceSet, SimplicialMesh, build_faces, face_height, format_mesh, measures, parse_mesh
from .meshgen import gen_family
from .norms import (
    FaceWeights,
    broken_seminorm,
    build_face_weights,
    ibp_residual,
    jump_product_residual,
    jump_seminorm,
    lq_norm,
    trace_ratio,
    vh_norm,
)
from .poisson import assemble_poisson, solve_poisson
from .projections import cell_mean, face_mean, projection_error_ratio
from .quadrature import QuadRule, face_rule, simplex_rule
from .rt import commuting_residual, rt_error_ratio, rt_interpolate, rt_stability_ratio
from .sobolev import SweepReport, sobolev_constant_l2, sobolev_constant_lq_lp, sweep_family
from .spaces import DofMap, FeFunction, apply_cr_dof, build_dofs, eval_cr_basis, eval_rt_basis, piola_push

__version__ = "0.1.0"

__all__ = [
    "DegenerateElementError",
    "DofMap",
    "ElementGeometry",
    "FaceSet",
    "FaceWeights",
    "FeFunction",
    "GeometryError",
    "InadmissibleExponentsError",
    "IndexRangeError",
    "MeshError",
    "MeshFormatError",
    "NonconformingMeshError",
    "QuadRule",
    "SimplicialMesh",
    "SingularSystemError",
    "SweepReport",
    "UndefinedRatioError",
    "apply_cr_dof",
    "assemble_poisson",
    "broken_seminorm",
    "build_dofs",
    "build_face_weights",
    "build_faces",
    "cell_mean",
    "commuting_residual",
    "decompose",
    "decompose_2d",
    "decompose_3d",
    "directional_seminorm",
    "eval_cr_basis",
    "eval_rt_basis",
    "face_height",
    "face_mean",
    "face_rule",
    "format_mesh",
    "gen_family",
    "ibp_residual",
    "jump_product_residual",
    "jump_seminorm",
    "lq_norm",
    "measures",
    "parse_mesh",
    "piola_push",
    "projection_error_ratio",
    "rt_error_ratio",
    "rt_interpolate",
    "rt_stability_ratio",
    "semi_regularity",
    "simplex_rule",
    "sobolev_constant_l2",
    "sobolev_constant_lq_lp",
    "solve_poisson",
    "sweep_family",
    "trace_ratio",
    "vh_norm",
]
