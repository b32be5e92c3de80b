"""Weights, penalties, discrete norms and the exact identities they satisfy.

Conventions on a face ``F`` with owners ``(T+, T-)`` and normal ``n_F``
pointing from ``T+`` to ``T-``:

* jump ``[[phi]] = phi+ - phi-``; on the boundary ``[[phi]] = phi``;
* ``{{v}}_w = w+ v+ + w- v-`` and the skew average ``{{phi}}_wbar = w- phi+ + w+ phi-``;
  on the boundary both reduce to the single trace.

``|phi|_{p,J}^p = sum_F kappa_F |F| |mean_F [[phi]]|^p`` and
``|phi|_{p,V_h}^p = sum_T ||grad phi||_{L^p(T)}^p + |phi|_{p,J}^p``.
Vector-valued integrands use the pointwise Euclidean norm; gradients of
vector fields use the Frobenius norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import factorial
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import UndefinedRatioError
from .mesh import face_heights, face_measure, local_face_vertices, simplex_volume
from .quadrature import face_rule, push_forward, simplex_rule
from .spaces import FeFunction, face_quadrature, face_traces

# ------------------------------------------------------------------ weights


@dataclass(frozen=True, eq=False)
class FaceWeights:
    """Per-face averaging weights and penalty for an exponent ``p``.

    ``omega[:, 0]`` belongs to ``T+`` and ``omega[:, 1]`` to ``T-``; boundary
    faces carry ``(1, 0)``.  ``ell`` holds ``l_{T,F}`` per owner (NaN if absent).
    """

    p: float
    p_dual: float
    omega: np.ndarray
    kappa: np.ndarray
    ell: np.ndarray

    @property
    def n_faces(self):
        return len(self.kappa)


def build_face_weights(mesh, p):
    """Weights ``omega`` and penalties ``kappa_{p,F}`` from the face heights."""
    p = float(p)
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    faces = mesh.faces
    ell_el = face_heights(mesh)
    nf = faces.n_faces
    ell = np.full((nf, 2), np.nan)
    for s in (0, 1):
        e, i = faces.owners[:, s], faces.local[:, s]
        ok = e >= 0
        ell[ok, s] = ell_el[e[ok], i[ok]]
    a = (p - 1.0) / p
    inner = faces.interior
    pw = ell**a
    tot = pw[:, 0] + np.where(inner, pw[:, 1], 0.0)
    omega = np.zeros((nf, 2))
    omega[inner] = pw[inner] / tot[inner, None]
    omega[~inner, 0] = 1.0
    kappa = np.where(inner, tot ** (-p), ell[:, 0] ** (1.0 - p))
    p_dual = np.inf if p == 1 else p / (p - 1.0)
    return FaceWeights(p, p_dual, omega, kappa, ell)


# ------------------------------------------------------------------ operators


def local_nodal_basis(space, d):
    """Vertex values of the local basis functions, ``(d+1, nloc)``."""
    if space in ("DCCR", "CR", "CR0"):
        return np.ones((d + 1, d + 1)) - d * np.eye(d + 1)
    if space == "DC1":
        return np.eye(d + 1)
    if space == "P0":
        return np.ones((d + 1, 1))
    raise ValueError(f"{space} is not a scalar space")


class Operators:
    """Sparse linear maps from coefficients of a scalar space.

    * ``values``: values at the points of a degree-``degree`` cell rule,
      rows ordered element-major, with weights ``weights``;
    * ``grad``: elementwise gradients, rows ``e*d + j``;
    * ``jump``: face means of the jump, one row per face.
    """

    def __init__(self, dofmap, degree=2):
        if not dofmap.is_scalar:
            raise ValueError("operators are built for scalar spaces")
        self.dofmap = dofmap
        self.degree = degree
        mesh = dofmap.mesh
        self.mesh = mesh
        self.rule = simplex_rule(mesh.dim, degree)

    @cached_property
    def values(self):
        m = self.mesh.n_elements
        return (sp.kron(sp.identity(m, format="csr"), sp.csr_matrix(self.rule.bary)) @ self.dofmap.nodal_matrix).tocsr()

    @cached_property
    def weights(self):
        _, w = push_forward(self.rule, self.mesh.points)
        return w.reshape(-1)

    @cached_property
    def grad(self):
        mesh = self.mesh
        G = mesh.barycentric_gradients  # (m, d+1, d)
        return (_block_diag(np.swapaxes(G, 1, 2)) @ self.dofmap.nodal_matrix).tocsr()

    @cached_property
    def jump(self):
        mesh = self.mesh
        faces = mesh.faces
        d = mesh.dim
        nl = d + 1
        fm = (np.ones((nl, nl)) - np.eye(nl)) / d  # face-i mean from vertex values
        nod = self.dofmap.nodal_matrix
        rows, cols, vals = [], [], []
        for s, sign in ((0, 1.0), (1, -1.0)):
            e, i = faces.owners[:, s], faces.local[:, s]
            ok = np.flatnonzero(e >= 0)
            for k in range(nl):
                rows.append(ok)
                cols.append(e[ok] * nl + k)
                vals.append(sign * fm[i[ok], k])
        S = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(faces.n_faces, mesh.n_elements * nl),
        )
        return (S @ nod).tocsr()

    @cached_property
    def mass(self):
        E = self.values
        return (E.T @ sp.diags(self.weights) @ E).tocsr()

    @cached_property
    def stiffness(self):
        G = self.grad
        vol = np.repeat(self.mesh.volumes, self.mesh.dim)
        return (G.T @ sp.diags(vol) @ G).tocsr()

    def jump_gram(self, weights):
        J = self.jump
        return (J.T @ sp.diags(weights.kappa * self.mesh.faces.measures) @ J).tocsr()

    def vh_gram(self, weights):
        """Gram matrix of ``|.|_{2,V_h}^2``; requires ``weights.p == 2``."""
        if weights.p != 2:
            raise ValueError("the V_h Gram matrix is defined for p = 2 weights")
        A = self.stiffness + self.jump_gram(weights)
        return ((A + A.T) * 0.5).tocsr()


def _block_diag(blocks):
    """Block diagonal CSR matrix from a stack ``(m, r, c)``."""
    m, r, c = blocks.shape
    rows = np.repeat(np.arange(m * r).reshape(m, r, 1), c, axis=2)
    cols = np.repeat((np.arange(m) * c)[:, None, None] + np.arange(c)[None, None, :], r, axis=1)
    return sp.csr_matrix((blocks.reshape(-1), (rows.reshape(-1), cols.reshape(-1))), shape=(m * r, m * c))


def operators(dofmap, degree=2):
    """Cached :class:`Operators` per ``(dofmap, degree)``."""
    cache = dofmap.__dict__.setdefault("_ops", {})
    if degree not in cache:
        cache[degree] = Operators(dofmap, degree)
    return cache[degree]


# ------------------------------------------------------------------ norms


def _default_degree(q):
    if float(q).is_integer() and int(q) % 2 == 0 and q <= 20:
        return int(q)
    return 8


def lq_norm(f, q, mesh=None, degree=None):
    """``(sum_T int_T |f|^q)^{1/q}``.

    ``f`` is a :class:`FeFunction` or a callable (then ``mesh`` is needed).
    The default degree is exact for even integer ``q`` on piecewise affine
    functions and 8 otherwise.
    """
    q = float(q)
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    deg = _default_degree(q) if degree is None else degree
    if isinstance(f, FeFunction):
        mesh = f.mesh
        rule = simplex_rule(mesh.dim, deg)
        vals = f.eval_bary(rule.bary)  # (m, n[, d])
        _, w = push_forward(rule, mesh.points)
    else:
        if mesh is None:
            raise ValueError("a mesh is required for callables")
        x, w = push_forward(simplex_rule(mesh.dim, deg), mesh.points)
        vals = np.asarray(f(x.reshape(-1, mesh.dim)))
        vals = vals.reshape(w.shape + vals.shape[1:])
    if vals.ndim == w.ndim + 1:
        vals = np.linalg.norm(vals, axis=-1)
    return float(np.sum(w * np.abs(vals) ** q)) ** (1.0 / q)


def broken_seminorm(phi, p):
    """``(sum_T ||grad phi||_{L^p(T)}^p)^{1/p}`` for scalar piecewise affine ``phi``."""
    g = np.linalg.norm(phi.gradients(), axis=1)
    return float(np.sum(phi.mesh.volumes * g**p)) ** (1.0 / p)


def mean_jumps(phi):
    """``mean_F [[phi]]`` per face (the trace mean on boundary faces)."""
    fm = phi.face_means()
    return np.where(np.isnan(fm[:, 1]), fm[:, 0], fm[:, 0] - fm[:, 1])


def jump_seminorm(phi, weights):
    """``|phi|_{p,J}`` with the exponent stored in ``weights``."""
    j = mean_jumps(phi)
    return float(np.sum(weights.kappa * phi.mesh.faces.measures * np.abs(j) ** weights.p)) ** (1.0 / weights.p)


def vh_norm(phi, weights):
    p = weights.p
    return (broken_seminorm(phi, p) ** p + jump_seminorm(phi, weights) ** p) ** (1.0 / p)


def w1p_norm(mesh, v, jac, p, degree=8):
    """``(||v||_{L^p}^p + ||grad v||_{L^p}^p)^{1/p}`` for a callable field and its derivative."""
    x, w = push_forward(simplex_rule(mesh.dim, degree), mesh.points)
    xf = x.reshape(-1, mesh.dim)
    val = np.asarray(v(xf)).reshape(len(xf), -1)
    der = np.asarray(jac(xf)).reshape(len(xf), -1)
    wf = w.reshape(-1)
    a = np.sum(wf * np.linalg.norm(val, axis=1) ** p)
    b = np.sum(wf * np.linalg.norm(der, axis=1) ** p)
    return float(a + b) ** (1.0 / p)


# ------------------------------------------------------------------ identities


def jump_product_residual(v_plus, phi_plus, n, omega=(1.0, 0.0), v_minus=None, phi_minus=None):
    """Pointwise residual of the jump product identity on one face.

    ``[[(v phi).n]] - ({{v}}_w . n [[phi]] + [[v.n]] {{phi}}_wbar)``, maximised
    over the given trace samples.  ``v_*`` have shape ``(n, d)``, ``phi_*``
    shape ``(n,)``.  Omit the minus traces for a boundary face.
    """
    vp = np.atleast_2d(v_plus)
    pp = np.atleast_1d(phi_plus)
    n = np.asarray(n, dtype=float)
    if v_minus is None:
        vm = np.zeros_like(vp)
        pm = np.zeros_like(pp)
        wp, wm = 1.0, 0.0
    else:
        vm = np.atleast_2d(v_minus)
        pm = np.atleast_1d(phi_minus)
        wp, wm = omega
    lhs = (vp @ n) * pp - (vm @ n) * pm
    avg_v = (wp * vp + wm * vm) @ n
    avg_phi = wm * pp + wp * pm
    rhs = avg_v * (pp - pm) + (vp @ n - vm @ n) * avg_phi
    return float(np.max(np.abs(lhs - rhs)))


def trace_ratio(points, i, v, grad_v, p, degree=8):
    """``||v||_{L^p(F_i)}`` over the trace-inequality right-hand side on ``T``.

    The right-hand side is
    ``l_{T,F}^{-1/p} (||v||_{L^p(T)} + h_T^{1/p} ||v||_{L^p(T)}^{1-1/p} |v|_{W^{1,p}(T)}^{1/p})``.
    """
    P = np.asarray(points, dtype=float)
    d = P.shape[1]
    F = P[local_face_vertices(d)[i]]
    vol = float(simplex_volume(P))
    ell = factorial(d) * vol / float(face_measure(F))
    xf, wf = push_forward(face_rule(d, degree), F)
    lhs = float(np.dot(wf, np.abs(v(xf)) ** p)) ** (1.0 / p)
    xt, wt = push_forward(simplex_rule(d, degree), P)
    lp = float(np.dot(wt, np.abs(v(xt)) ** p)) ** (1.0 / p)
    semi = float(np.dot(wt, np.linalg.norm(grad_v(xt), axis=1) ** p)) ** (1.0 / p)
    h_T = max(np.linalg.norm(P[a] - P[b]) for a in range(d + 1) for b in range(a + 1, d + 1))
    rhs = ell ** (-1.0 / p) * (lp + h_T ** (1.0 / p) * lp ** (1.0 - 1.0 / p) * semi ** (1.0 / p))
    if rhs == 0:
        raise UndefinedRatioError("v vanishes on T")
    return lhs / rhs


class IbpCheck(NamedTuple):
    volume: float
    face: float
    residual: float
    scale: float


def ibp_residual(tau, psi, weights, degree=2):
    """Discrete integration by parts for ``tau`` in RT0 and scalar ``psi``.

    ``int (tau . grad psi + div tau psi) - sum_interior int_F {{tau}}_w . n mean[[psi]]
    - sum_boundary int_F tau . n mean(psi)``.  ``scale`` is the sum of the
    absolute values of the individual contributions.
    """
    mesh = tau.mesh
    rule = simplex_rule(mesh.dim, degree)
    _, w = push_forward(rule, mesh.points)
    tv = tau.eval_bary(rule.bary)  # (m, n, d)
    pv = psi.eval_bary(rule.bary)  # (m, n)
    g = psi.gradients()
    dv = tau.divergence()
    vol_terms = np.einsum("mn,mnd,md->m", w, tv, g) + np.einsum("mn,m,mn->m", w, dv, pv)
    x, wf, lam = face_quadrature(mesh, degree)
    tr = face_traces(tau, lam)  # (nf, 2, n, d)
    n = mesh.faces.normals
    om = weights.omega
    avg = om[:, 0, None] * np.einsum("fnd,fd->fn", tr[:, 0], n)
    inner = mesh.faces.interior
    avg[inner] += om[inner, 1, None] * np.einsum("fnd,fd->fn", tr[inner, 1], n[inner])
    face_terms = (wf * avg).sum(axis=1) * mean_jumps(psi)
    V, S = float(vol_terms.sum()), float(face_terms.sum())
    scale = float(np.abs(vol_terms).sum() + np.abs(face_terms).sum())
    return IbpCheck(V, S, abs(V - S), scale)


def ibp_matrices(mesh, weights, space="DC1"):
    """Residual and scale matrices of the discrete IBP over all basis pairs.

    Entry ``(a, b)`` of ``R`` is the residual for the RT0 basis function of
    face ``a`` against basis function ``b`` of ``space``; ``scale`` sums the
    absolute contributions.  Both are sparse ``(n_faces, n_dofs)``.
    """
    from .spaces import build_dofs

    dm = build_dofs(mesh, space)
    faces = mesh.faces
    d = mesh.dim
    nl = d + 1
    P = mesh.points
    vol = mesh.volumes
    B = local_nodal_basis(dm.space, d)  # (d+1, nloc)
    nloc = B.shape[1]
    gb = np.einsum("mkd,kb->mbd", mesh.barycentric_gradients, B)  # basis gradients
    cent = P.mean(axis=1)
    sig = faces.element_signs()
    ef = faces.element_faces
    rdof = np.broadcast_to(ef[:, :, None], (len(P), nl, nloc))
    cdof = np.broadcast_to(dm.cell_dofs[:, None, :], (len(P), nl, nloc))
    # int_T theta_i . grad phi_b = (c - p_i) . g_b / d ;  int_T div theta_i phi_b = mean(phi_b)
    t1 = np.einsum("mid,mbd->mib", cent[:, None, :] - P, gb) / d
    t2 = np.broadcast_to(B.mean(axis=0)[None, None, :], t1.shape)
    vt = sig[:, :, None] * (t1 + t2)
    va = sig[:, :, None] * (np.abs(t1) + np.abs(t2))

    # face side: on face G, RT local function i of owner s contributes
    # omega_s * mean(theta_i . n_G) * |G| times mean jump of each psi basis
    fmean = (np.ones((nl, nl)) - np.eye(nl)) / d  # face-j mean of vertex k
    rows, cols, vals, avals = [], [], [], []
    for s in (0, 1):
        e = faces.owners[:, s]
        ok = np.flatnonzero(e >= 0)
        ee, jj = e[ok], faces.local[ok, s]
        cG = np.einsum("fk,fkd->fd", fmean[jj], P[ee])  # face centroid
        nG = faces.normals[ok]
        for i in range(nl):
            tn = sig[ee, i] * np.einsum("fd,fd->f", cG - P[ee, i], nG) / (d * vol[ee])
            coef = weights.omega[ok, s] * tn * faces.measures[ok]
            for s2, sgn in ((0, 1.0), (1, -1.0)):
                e2 = faces.owners[ok, s2]
                ok2 = e2 >= 0
                j2 = faces.local[ok, s2]
                for b in range(nloc):
                    mj = sgn * fmean[j2[ok2]] @ B[:, b]
                    rows.append(ef[ee[ok2], i])
                    cols.append(dm.cell_dofs[e2[ok2], b])
                    vals.append(-coef[ok2] * mj)
                    avals.append(np.abs(coef[ok2] * mj))
    rows.append(rdof.reshape(-1))
    cols.append(cdof.reshape(-1))
    vals.append(vt.reshape(-1))
    avals.append(va.reshape(-1))
    r, c = np.concatenate(rows), np.concatenate(cols)
    keep = c >= 0
    shape = (faces.n_faces, dm.n_dofs)
    R = sp.csr_matrix((np.concatenate(vals)[keep], (r[keep], c[keep])), shape=shape)
    S = sp.csr_matrix((np.concatenate(avals)[keep], (r[keep], c[keep])), shape=shape)
    return R, S


def ibp_scaled_residual(mesh, weights, space="DC1"):
    """``max_ab |R_ab| / max_b' S_ab'`` over all basis pairs.

    Each residual is measured against the largest contribution of the same
    RT0 basis function, since many individual contributions are exact zeros
    that only carry rounding noise.
    """
    R, S = ibp_matrices(mesh, weights, space)
    rmax = np.asarray(abs(R).max(axis=1).todense()).ravel()
    smax = np.asarray(S.max(axis=1).todense()).ravel()
    ok = smax > 0
    return float(np.max(rmax[ok] / smax[ok], initial=0.0))


def face_coupling_constant(mesh, weights, w, jac_w, degree=8):
    """Sharp constant ``C`` in ``|sum_F int_F {{w}}_w . n mean[[psi]]| <= C |psi|_{p,J} ||w||_{W^{1,p'}}``.

    The supremum over discontinuous CR functions is attained in closed form:
    mean jumps are free per face, so the sup is the dual norm
    ``(sum_F (|c_F| (kappa_F |F|)^{-1/p})^{p'})^{1/p'}`` with
    ``c_F = int_F {{w}}_w . n_F``.
    """
    p, pd = weights.p, weights.p_dual
    x, wf, _ = face_quadrature(mesh, degree)
    vals = np.asarray(w(x.reshape(-1, mesh.dim))).reshape(x.shape)
    c = np.einsum("fn,fnd,fd->f", wf, vals, mesh.faces.normals)  # w is continuous: {{w}} = w
    dual = np.sum((np.abs(c) * (weights.kappa * mesh.faces.measures) ** (-1.0 / p)) ** pd) ** (1.0 / pd)
    nw = w1p_norm(mesh, w, jac_w, pd, degree)
    if nw == 0:
        raise UndefinedRatioError("w vanishes")
    return float(dual / nw)
