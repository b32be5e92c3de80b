"""Raviart-Thomas interpolation, the commuting property and ratio harnesses."""

from __future__ import annotations

import numpy as np

from .errors import UndefinedRatioError
from .geometry import COND2_3D_TYPE2, directional_seminorm
from .mesh import simplex_volume
from .norms import lq_norm, w1p_norm
from .projections import cell_means
from .quadrature import push_forward, simplex_rule
from .spaces import FeFunction, apply_rt_dof, build_dofs, face_quadrature, face_traces

DEFAULT_DEGREE = 8


def rt_interpolate(mesh, v, degree=DEFAULT_DEGREE, dofmap=None):
    """Global RT0 interpolant: the dof of face ``F`` is ``int_F v . n_F``.

    Each face flux is computed once from the face, so both neighbours see
    the same value.
    """
    dm = build_dofs(mesh, "RT0") if dofmap is None else dofmap
    x, w, _ = face_quadrature(mesh, degree)
    vals = np.asarray(v(x.reshape(-1, mesh.dim))).reshape(x.shape)
    flux = np.einsum("fn,fnd,fd->f", w, vals, mesh.faces.normals)
    return FeFunction(dm, flux)


def flux_reproduction(iv, degree=2):
    """Largest relative gap between face dofs and the fluxes of the traces.

    Both owners of every interior face are integrated separately, so this
    also measures single-valuedness of the normal component.
    """
    mesh = iv.mesh
    x, w, lam = face_quadrature(mesh, degree)
    tr = face_traces(iv, lam)
    n = mesh.faces.normals
    scale = max(float(np.max(np.abs(iv.coeffs))), np.finfo(float).tiny)
    worst = 0.0
    for s in (0, 1):
        ok = ~np.isnan(tr[:, s, 0, 0])
        flux = np.einsum("fn,fnd,fd->f", w[ok], tr[ok, s], n[ok])
        worst = max(worst, float(np.max(np.abs(flux - iv.coeffs[ok]), initial=0.0)))
    return worst / scale


def local_interpolant(points, v, degree=DEFAULT_DEGREE):
    """Local interpolant on one simplex as a callable of physical points.

    Uses outward fluxes, so ``I_T v = sum_i flux_i (x - p_i) / (d |T|)``.
    """
    P = np.asarray(points, dtype=float)
    d = P.shape[1]
    flux = np.array([apply_rt_dof(P, i, v, degree) for i in range(d + 1)])
    vol = float(simplex_volume(P))

    def iv(x):
        x = np.atleast_2d(x)
        return (flux.sum() * x - flux @ P) / (d * vol)

    iv.fluxes = flux
    return iv


def commuting_residual(mesh, v, div_v, degree=DEFAULT_DEGREE):
    """``max_T |div I_T v - mean_T div v|``.

    The divergence of the interpolant is the net outward flux over ``|T|``.
    """
    iv = rt_interpolate(mesh, v, degree)
    return float(np.max(np.abs(iv.divergence() - cell_means(div_v, mesh, degree))))


def rt_stability_ratio(mesh, v, jac_v, p, degree=DEFAULT_DEGREE):
    """``||I_h v||_{L^p} / ||v||_{W^{1,p}}``."""
    den = w1p_norm(mesh, v, jac_v, p, degree)
    if den == 0:
        raise UndefinedRatioError("v vanishes")
    return lq_norm(rt_interpolate(mesh, v, degree), p, degree=degree) / den


def _lp_element(f, points, p, degree):
    x, w = push_forward(simplex_rule(points.shape[1], degree), points)
    vals = np.asarray(f(x))
    if vals.ndim > 1:
        vals = np.linalg.norm(vals.reshape(len(x), -1), axis=1)
    return float(np.dot(w, np.abs(vals) ** p)) ** (1.0 / p)


def rt_error_ratio(points, geo, v, jac_v, div_v, p, degree=DEFAULT_DEGREE):
    """Local interpolation error over its anisotropic bound.

    Triangles and Type i tetrahedra use
    ``gamma * sum_i h_i ||dv/dr_i||_{L^p} + h_T ||div v||_{L^p}``;
    Type ii elements use ``gamma * h_T * |v|_{W^{1,p}}``.
    """
    P = np.asarray(points, dtype=float)
    iv = local_interpolant(P, v, degree)
    num = _lp_element(lambda x: iv(x) - v(x), P, p, degree)
    scale = _lp_element(v, P, p, degree)
    if num <= 1e-13 * scale:
        return 0.0
    if geo.cond == COND2_3D_TYPE2:
        den = geo.gamma * geo.h_T * _lp_element(jac_v, P, p, degree)
    else:
        dirs = directional_seminorm(P, geo, jac_v, p, degree)
        den = geo.gamma * float(np.dot(geo.h, dirs)) + geo.h_T * _lp_element(div_v, P, p, degree)
    if den == 0:
        raise UndefinedRatioError("derivatives of v vanish")
    return num / den
