"""Finite element spaces on simplicial meshes.

Scalar spaces (DCCR, CR, CR0, DC1, P0) are all piecewise affine, so every
scalar function is reduced internally to its values at the element
vertices, shape ``(m, d+1)``.  Evaluation at a barycentric point ``lam`` is
then ``lam @ nodal``.  The CR basis on an element is ``theta_i = 1 - d*lam_i``
and its dof is the mean over the face opposite vertex ``i``.

RT0 uses ``theta_i(x) = sign_i (x - p_i) / (d |T|)`` whose outward flux
through face ``i`` is ``sign_i`` and whose flux through every other face is
zero.  The sign is +1 on the element that owns the global face normal.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from math import factorial

import numpy as np
import scipy.sparse as sp

from .mesh import exact_det, exact_rows, face_measure, local_face_vertices, simplex_volume
from .quadrature import face_rule, push_forward

SPACES = ("DCCR", "CR", "CR0", "RT0", "P0", "DC1")
SCALAR_SPACES = ("DCCR", "CR", "CR0", "P0", "DC1")


# ---------------------------------------------------------------- local tools


def barycentric_gradients(points):
    """Gradients of the barycentric coordinates, shape ``(..., d+1, d)``."""
    P = np.asarray(points, dtype=float)
    E = P[..., 1:, :] - P[..., :1, :]
    G = np.linalg.inv(np.swapaxes(E, -1, -2))  # rows: grad lam_1 .. lam_d
    g0 = -G.sum(axis=-2, keepdims=True)
    return np.concatenate([g0, G], axis=-2)


def to_barycentric(points, x):
    """Barycentric coordinates of physical points ``x`` (n, d) in the simplex ``points``."""
    P = np.asarray(points, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.linalg.solve((P[1:] - P[0]).T, (x - P[0]).T).T
    return np.hstack([1 - xi.sum(axis=1, keepdims=True), xi])


def _embed_face_bary(d, i, fb):
    """Lift face barycentrics ``fb`` (n, d) of local face ``i`` to cell barycentrics."""
    lam = np.zeros((len(fb), d + 1), dtype=fb.dtype)
    lam[:, local_face_vertices(d)[i]] = fb
    return lam


class LocalFunction:
    """A function on one simplex that can also be evaluated from barycentrics.

    Face dof functionals use :meth:`at_bary` when available, which avoids the
    round trip through physical coordinates on very flat elements.
    """

    def __init__(self, points, bary_fn):
        self.points = np.asarray(points, dtype=float)
        self._bary_fn = bary_fn

    def at_bary(self, lam):
        return self._bary_fn(np.asarray(lam))

    def __call__(self, x):
        return self.at_bary(to_barycentric(self.points, x))


def cr_basis(points, i):
    """Local CR basis function ``1 - d*lam_i`` as a :class:`LocalFunction`."""
    d = len(points) - 1
    return LocalFunction(points, lambda lam: 1.0 - d * lam[:, i])


def eval_cr_basis(points, i, x):
    """``theta_i(x) = 1 - d*lam_i(x)``; ``x`` may lie outside the element."""
    x = np.asarray(x, dtype=float)
    val = cr_basis(points, i)(x.reshape(-1, x.shape[-1]))
    return float(val[0]) if x.ndim == 1 else val


def _face_points(points, i, degree):
    d = len(points) - 1
    rule = face_rule(d, degree)
    lam = _embed_face_bary(d, i, rule.bary)
    fpts = np.asarray(points, dtype=float)[local_face_vertices(d)[i]]
    return lam, lam @ np.asarray(points, dtype=float), rule.weights * factorial(d - 1), float(face_measure(fpts))


def apply_cr_dof(points, i, q, degree=8):
    """Mean of ``q`` over the face opposite vertex ``i``.

    ``q`` is a callable of physical points ``(n, d)``, or a
    :class:`LocalFunction` of this element (evaluated from barycentrics).
    """
    lam, x, w, _ = _face_points(points, i, degree)
    vals = q.at_bary(lam) if isinstance(q, LocalFunction) else np.asarray(q(x), dtype=float)
    return float(np.dot(w, vals))


def _to_ld(fr):
    """Round a Fraction to long double with a two-term float split."""
    hi = float(fr)
    return np.longdouble(hi) + np.longdouble(float(fr - Fraction(hi)))


def _area_vector_ld(points, i):
    """``(d-1)! |F_i| n_i`` with ``n_i`` outward, rounded from exact arithmetic.

    Thin faces make the normal ill-conditioned; exact rational products keep
    the error at one rounding per component.
    """
    X = exact_rows(points)
    d = len(X) - 1
    f = [X[k] for k in local_face_vertices(d)[i]]
    a = [u - v for u, v in zip(f[1], f[0])]
    if d == 2:
        n = [a[1], -a[0]]
    else:
        b = [u - v for u, v in zip(f[2], f[0])]
        n = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    if sum(nc * (u - v) for nc, u, v in zip(n, X[i], f[0])) > 0:
        n = [-nc for nc in n]
    return np.array([_to_ld(nc) for nc in n])


def rt_basis(points, i, sign=1.0):
    """Local RT0 basis function as a :class:`LocalFunction`.

    Barycentric evaluation runs in extended precision: ``x - p_i`` is formed
    as ``sum_k lam_k (p_k - p_i)`` so no cancellation against ``p_i`` occurs,
    and ``d |T|`` comes from an exact determinant.
    """
    P = np.asarray(points, dtype=float)
    d = P.shape[1]
    E = P.astype(np.longdouble) - np.longdouble(1) * P[i]
    X = exact_rows(P)
    det = exact_det([[u - v for u, v in zip(X[k], X[0])] for k in range(1, d + 1)])
    dvol = _to_ld(abs(det) * d / factorial(d))  # d |T|

    def fn(lam):
        return np.asarray(lam, dtype=np.longdouble) @ E * (sign / dvol)

    return LocalFunction(P, fn)


def eval_rt_basis(points, i, x, sign=1.0):
    """``sign * (x - p_i) / (d |T|)`` at physical points ``x``."""
    P = np.asarray(points, dtype=float)
    d = P.shape[1]
    vol = float(simplex_volume(P))
    return sign * (np.asarray(x, dtype=float) - P[i]) / (d * vol)


def apply_rt_dof(points, j, v, degree=8):
    """Outward flux of ``v`` through the face opposite vertex ``j``."""
    lam, x, w, _ = _face_points(points, j, degree)
    N = _area_vector_ld(points, j)  # |F| n scaled by (d-1)!, matching sum(w) = 1/(d-1)!
    if isinstance(v, LocalFunction):
        vals = np.asarray(v.at_bary(lam), dtype=np.longdouble)
    else:
        vals = np.asarray(v(x), dtype=np.longdouble)
    return float(np.dot(w / factorial(len(N) - 1), vals @ N))


def piola_push(geo, v_hat):
    """Contravariant Piola transform of a reference field through ``geo``.

    ``v(x) = A v_hat(Phi^{-1}(x)) / det A`` with ``A = A_T A_tilde A_hat``,
    applied as the reference-to-tilde step followed by the orthogonal step.
    """
    A_ref = geo.A_ref
    det_ref = float(np.linalg.det(A_ref))
    det_rot = float(np.linalg.det(geo.A_rot))

    def v(x):
        xhat = geo.phi_inv(np.atleast_2d(x))
        vt = np.atleast_2d(v_hat(xhat)) @ A_ref.T / det_ref  # tilde element
        return vt @ geo.A_rot.T / det_rot

    return v


# ---------------------------------------------------------------- global maps


@dataclass(frozen=True, eq=False)
class DofMap:
    """Element-to-dof table of a space on a mesh.

    ``cell_dofs[e, i]`` is the global dof of local basis function ``i`` of
    element ``e``, or ``-1`` if constrained to zero (CR0 boundary faces).
    ``signs`` is ``+-1`` per local dof (RT0) or all ones.  ``face_dofs[f]``
    maps faces to dofs for face-based spaces.
    """

    space: str
    mesh: object
    n_dofs: int
    cell_dofs: np.ndarray
    signs: np.ndarray
    face_dofs: np.ndarray | None = None
    constrained: np.ndarray | None = None

    @property
    def faces(self):
        return self.mesh.faces

    @property
    def is_scalar(self):
        return self.space in SCALAR_SPACES

    def function(self, coeffs=None):
        return FeFunction(self, np.zeros(self.n_dofs) if coeffs is None else coeffs)

    @cached_property
    def nodal_matrix(self):
        """Sparse map from coefficients to element vertex values ``(m*(d+1), n)``.

        Scalar spaces only.  Row ``e*(d+1)+k`` gives the value at vertex ``k``
        of element ``e``.
        """
        if not self.is_scalar:
            raise ValueError("nodal values are defined for scalar spaces only")
        mesh = self.mesh
        m, d = mesh.n_elements, mesh.dim
        nl = d + 1
        rows, cols, vals = [], [], []
        if self.space in ("DCCR", "CR", "CR0"):
            # value at vertex k: sum_i c_i (1 - d*delta_ik)
            B = np.ones((nl, nl)) - d * np.eye(nl)
            for i in range(nl):
                dof = self.cell_dofs[:, i]
                keep = dof >= 0
                for k in range(nl):
                    rows.append(np.flatnonzero(keep) * nl + k)
                    cols.append(dof[keep])
                    vals.append(np.full(keep.sum(), B[k, i]))
        elif self.space == "DC1":
            rows.append(np.arange(m * nl))
            cols.append(self.cell_dofs.reshape(-1))
            vals.append(np.ones(m * nl))
        else:  # P0
            rows.append(np.arange(m * nl))
            cols.append(np.repeat(self.cell_dofs[:, 0], nl))
            vals.append(np.ones(m * nl))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m * nl, self.n_dofs)
        )


def build_dofs(mesh, space, faces=None):
    """Build the :class:`DofMap` of ``space`` on ``mesh``."""
    space = space.upper()
    if space not in SPACES:
        raise ValueError(f"unknown space {space!r}; expected one of {SPACES}")
    faces = mesh.faces if faces is None else faces
    m, d = mesh.n_elements, mesh.dim
    ones = np.ones((m, d + 1))
    if space in ("DCCR", "DC1"):
        cd = np.arange(m * (d + 1)).reshape(m, d + 1)
        return DofMap(space, mesh, m * (d + 1), cd, ones)
    if space == "P0":
        return DofMap(space, mesh, m, np.arange(m)[:, None], np.ones((m, 1)))
    ef = faces.element_faces
    if space == "CR":
        return DofMap(space, mesh, faces.n_faces, ef.copy(), ones, face_dofs=np.arange(faces.n_faces))
    if space == "CR0":
        interior = faces.interior
        fd = -np.ones(faces.n_faces, dtype=np.intp)
        fd[interior] = np.arange(interior.sum())
        return DofMap(
            space, mesh, int(interior.sum()), fd[ef], ones, face_dofs=fd,
            constrained=np.flatnonzero(~interior),
        )
    # RT0
    return DofMap(space, mesh, faces.n_faces, ef.copy(), faces.element_signs(), face_dofs=np.arange(faces.n_faces))


class FeFunction:
    """Coefficient vector attached to a :class:`DofMap`."""

    def __init__(self, dofmap, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (dofmap.n_dofs,):
            raise ValueError(f"expected {dofmap.n_dofs} coefficients, got shape {coeffs.shape}")
        self.dofmap = dofmap
        self.coeffs = coeffs

    @property
    def space(self):
        return self.dofmap.space

    @property
    def mesh(self):
        return self.dofmap.mesh

    def __mul__(self, a):
        return FeFunction(self.dofmap, self.coeffs * a)

    __rmul__ = __mul__

    def __add__(self, other):
        if other.dofmap is not self.dofmap:
            raise ValueError("functions live on different dof maps")
        return FeFunction(self.dofmap, self.coeffs + other.coeffs)

    def local_coeffs(self):
        """``(m, nloc)`` signed local coefficients; constrained dofs read as 0."""
        cd = self.dofmap.cell_dofs
        c = np.where(cd >= 0, self.coeffs[np.maximum(cd, 0)], 0.0) if self.coeffs.size else np.zeros(cd.shape)
        return c * self.dofmap.signs

    def nodal_values(self):
        """Values at element vertices ``(m, d+1)`` (scalar spaces)."""
        m, d = self.mesh.n_elements, self.mesh.dim
        return (self.dofmap.nodal_matrix @ self.coeffs).reshape(m, d + 1)

    def gradients(self):
        """Elementwise constant gradient ``(m, d)`` (scalar spaces)."""
        return np.einsum("mk,mkd->md", self.nodal_values(), self.mesh.barycentric_gradients)

    def eval_bary(self, lam):
        """Values at barycentric points ``lam`` (n, d+1) in every element.

        Returns ``(m, n)`` for scalar spaces, ``(m, n, d)`` for RT0.
        """
        lam = np.asarray(lam, dtype=float)
        if self.dofmap.is_scalar:
            return self.nodal_values() @ lam.T
        a = self.local_coeffs()  # (m, d+1)
        P = self.mesh.points
        d = self.mesh.dim
        x = np.einsum("nk,mkd->mnd", lam, P)
        # sum_i a_i (x - p_i) / (d|T|)
        s = a.sum(axis=1)
        ap = np.einsum("mi,mid->md", a, P)
        return (s[:, None, None] * x - ap[:, None, :]) / (d * self.mesh.volumes)[:, None, None]

    def __call__(self, x, elements):
        """Evaluate at physical points ``x`` (n, d) lying in ``elements`` (n,)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        elements = np.asarray(elements, dtype=np.intp)
        P = self.mesh.points[elements]
        E = P[:, 1:] - P[:, :1]
        xi = np.linalg.solve(np.swapaxes(E, 1, 2), (x - P[:, 0])[..., None])[..., 0]
        lam = np.hstack([1 - xi.sum(axis=1, keepdims=True), xi])
        if self.dofmap.is_scalar:
            return np.einsum("nk,nk->n", lam, self.nodal_values()[elements])
        a = self.local_coeffs()[elements]
        d = self.mesh.dim
        return (a.sum(axis=1)[:, None] * x - np.einsum("ni,nid->nd", a, P)) / (d * self.mesh.volumes[elements])[:, None]

    def divergence(self):
        """Elementwise constant divergence ``(m,)`` (RT0)."""
        if self.dofmap.is_scalar:
            raise ValueError("divergence is defined for RT0 only")
        return self.local_coeffs().sum(axis=1) / self.mesh.volumes

    def face_means(self):
        """Face means of the traces from each owner, ``(nf, 2)``; NaN where absent.

        Scalar spaces only; the mean over the face opposite vertex ``i`` of an
        affine function is the average of the other ``d`` vertex values.
        """
        faces = self.mesh.faces
        d = self.mesh.dim
        nod = self.nodal_values()
        loc_mean = (nod.sum(axis=1, keepdims=True) - nod) / d  # (m, d+1)
        out = np.full((faces.n_faces, 2), np.nan)
        for s in (0, 1):
            e, i = faces.owners[:, s], faces.local[:, s]
            ok = e >= 0
            out[ok, s] = loc_mean[e[ok], i[ok]]
        return out


def face_owner_bary(mesh, rule):
    """Barycentrics of a face rule in each owner, ``(nf, 2, n, d+1)``.

    The face rule is laid on the sorted global vertex tuple of every face,
    so both owners see the same physical points.  Missing owners get zeros.
    """
    faces = mesh.faces
    d = mesh.dim
    nf = faces.n_faces
    out = np.zeros((nf, 2, len(rule), d + 1))
    for s in (0, 1):
        e = faces.owners[:, s]
        ok = np.flatnonzero(e >= 0)
        elv = mesh.elements[e[ok]]  # (k, d+1)
        # position of each sorted face vertex inside the owner's vertex list
        pos = np.argmax(elv[:, None, :] == faces.faces[ok][:, :, None], axis=2)  # (k, d)
        lam = np.zeros((len(ok), len(rule), d + 1))
        rows = np.arange(len(ok))[:, None, None]
        qs = np.arange(len(rule))[None, :, None]
        lam[rows, qs, pos[:, None, :]] = rule.bary[None, :, :]
        out[ok, s] = lam
    return out


def face_quadrature(mesh, degree):
    """Physical face points ``(nf, n, d)``, weights ``(nf, n)`` and owner barycentrics."""
    faces = mesh.faces
    rule = face_rule(mesh.dim, degree)
    x, w = push_forward(rule, mesh.vertices[faces.faces])
    return x, w, face_owner_bary(mesh, rule)


def face_traces(fun, lam_owner):
    """Traces of ``fun`` on both sides of every face, ``(nf, 2, n[, d])``.

    ``lam_owner`` comes from :func:`face_owner_bary`; absent sides are NaN.
    """
    mesh = fun.mesh
    faces = mesh.faces
    vec = not fun.dofmap.is_scalar
    shape = lam_owner.shape[:3] + ((mesh.dim,) if vec else ())
    out = np.full(shape, np.nan)
    d = mesh.dim
    if vec:
        a = fun.local_coeffs()
        P = mesh.points
    else:
        nod = fun.nodal_values()
    for s in (0, 1):
        e = faces.owners[:, s]
        ok = np.flatnonzero(e >= 0)
        lam = lam_owner[ok, s]
        if vec:
            ee = e[ok]
            x = np.einsum("fnk,fkd->fnd", lam, P[ee])
            num = a[ee].sum(axis=1)[:, None, None] * x - np.einsum("fi,fid->fd", a[ee], P[ee])[:, None, :]
            out[ok, s] = num / (d * mesh.volumes[ee])[:, None, None]
        else:
            out[ok, s] = np.einsum("fnk,fk->fn", lam, nod[e[ok]])
    return out


def interpolate_scalar(dofmap, f, degree=8):
    """Coefficients of the natural interpolant of a callable ``f``.

    CR-type spaces use face means, DC1 uses vertex values, P0 cell means.
    """
    mesh = dofmap.mesh
    space = dofmap.space
    if space == "DC1":
        vals = f(mesh.points.reshape(-1, mesh.dim))
        return FeFunction(dofmap, np.asarray(vals, dtype=float))
    if space == "P0":
        from .quadrature import simplex_rule

        x, w = push_forward(simplex_rule(mesh.dim, degree), mesh.points)
        vals = np.asarray(f(x.reshape(-1, mesh.dim))).reshape(w.shape)
        return FeFunction(dofmap, (w * vals).sum(axis=1) / mesh.volumes)
    x, w, _ = face_quadrature(mesh, degree)
    vals = np.asarray(f(x.reshape(-1, mesh.dim))).reshape(w.shape)
    means = (w * vals).sum(axis=1) / mesh.faces.measures
    c = np.zeros(dofmap.n_dofs)
    if space == "DCCR":
        c = means[mesh.faces.element_faces].reshape(-1)
    else:
        ok = dofmap.face_dofs >= 0
        c[dofmap.face_dofs[ok]] = means[ok]
    return FeFunction(dofmap, c)
