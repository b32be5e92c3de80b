"""Mean-value projections onto elements and faces and the anisotropic projection-error ratio."""

from __future__ import annotations

import numpy as np

from .errors import InadmissibleExponentsError, UndefinedRatioError
from .geometry import directional_seminorm
from .mesh import face_measure, simplex_volume
from .quadrature import face_rule, push_forward, simplex_rule
from .spaces import FeFunction

DEFAULT_DEGREE = 8


def cell_mean(f, points, degree=DEFAULT_DEGREE):
    """``(1/|T|) int_T f`` for a callable ``f`` on the simplex ``points``."""
    P = np.asarray(points, dtype=float)
    x, w = push_forward(simplex_rule(P.shape[1], degree), P)
    return float(np.dot(w, f(x)) / simplex_volume(P))


def cell_means(f, mesh=None, degree=DEFAULT_DEGREE):
    """Elementwise means ``(m,)`` (a P0 field).

    ``f`` is a scalar :class:`FeFunction` (exact, from vertex values) or a
    callable together with ``mesh``.
    """
    if isinstance(f, FeFunction):
        return f.nodal_values().mean(axis=1)
    x, w = push_forward(simplex_rule(mesh.dim, degree), mesh.points)
    vals = np.asarray(f(x.reshape(-1, mesh.dim))).reshape(w.shape)
    return (w * vals).sum(axis=1) / mesh.volumes


def face_mean(g, face_points, degree=DEFAULT_DEGREE):
    """``(1/|F|) int_F g`` for a callable ``g`` on the face with vertices ``face_points``."""
    F = np.asarray(face_points, dtype=float)
    x, w = push_forward(face_rule(F.shape[1], degree), F)
    return float(np.dot(w, g(x)) / face_measure(F))


def admissible(d, p, q):
    """Sobolev embedding condition ``1 - d/p >= -d/q`` for ``W^{1,p}`` into ``L^q``."""
    return 1.0 - d / p >= -d / q - 1e-15


def lq_element(f, points, q, degree=DEFAULT_DEGREE):
    P = np.asarray(points, dtype=float)
    x, w = push_forward(simplex_rule(P.shape[1], degree), P)
    return float(np.dot(w, np.abs(f(x)) ** q)) ** (1.0 / q)


def projection_error_ratio(points, geo, v, grad_v, p, q, degree=DEFAULT_DEGREE):
    """``||Pi v - v||_{L^q(T)} / (|T|^{1/q-1/p} sum_i h_i ||dv/dr_i||_{L^p(T)})``.

    Returns 0 when the numerator vanishes (constants) before looking at the
    denominator; raises :class:`UndefinedRatioError` if only the denominator does.
    """
    P = np.asarray(points, dtype=float)
    d = P.shape[1]
    if not admissible(d, p, q):
        raise InadmissibleExponentsError(f"W^(1,{p}) does not embed in L^{q} in dimension {d}")
    mean = cell_mean(v, P, degree)
    num = lq_element(lambda x: v(x) - mean, P, q, degree)
    scale = lq_element(v, P, q, degree)
    if num <= 64 * np.finfo(float).eps * scale:
        return 0.0
    dirs = directional_seminorm(P, geo, grad_v, p, degree)
    den = float(simplex_volume(P)) ** (1.0 / q - 1.0 / p) * float(np.dot(geo.h, dirs))
    if den == 0:
        raise UndefinedRatioError("directional derivatives vanish")
    return num / den
