"""Two-step affine decomposition of simplices and the semi-regularity parameter.

Every element ``T`` is written as ``Phi(x_hat) = A_T @ A_tilde @ A_hat @ x_hat + b_T``
where ``A_hat = diag(h_1, ..., h_d)`` carries the edge scales, ``A_tilde`` is a
unit-column shear and ``A_T`` is orthogonal (rotation or mirror).  The vertex
labelling ``p_1, ..., p_{d+1}`` follows the longest-edge rule in 2D and the
shortest-edge rule in 3D; the 3D elements split into two types depending on
whether ``p_3`` and ``p_4`` sit on the same side of the mid-plane of
``p_1 p_2``.

``gamma = H_T / h_T = prod(h_i) / |T|`` is the flatness measure.  It stays
bounded for needles of any aspect ratio and blows up for slivers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .errors import GeometryError
from .mesh import exact_signed_det, exact_volume, face_measure, local_face_vertices, simplex_volume
from .quadrature import push_forward, simplex_rule

COND1_2D = "COND1_2D"
COND2_3D_TYPE1 = "COND2_3D_TYPE1"
COND2_3D_TYPE2 = "COND2_3D_TYPE2"

#: Reference vertices per condition tag (rows are p_hat_1 .. p_hat_{d+1}).
REFERENCE_VERTICES = {
    COND1_2D: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    COND2_3D_TYPE1: np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]),
    COND2_3D_TYPE2: np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 0, 1]]),
}


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    """Decomposition record of one element.

    ``perm[k]`` is the local (input-order) index of the vertex labelled
    ``p_{k+1}``.  ``ell[i]`` is ``l_{T,F}`` for the local face opposite
    input vertex ``i``.  ``r`` holds the directions ``r_1 .. r_d`` as rows.
    """

    cond: str
    perm: tuple
    points: np.ndarray
    h: np.ndarray
    h_T: float
    H_T: float
    gamma: float
    volume: float
    A_hat: np.ndarray
    A_tilde: np.ndarray
    A_rot: np.ndarray
    b: np.ndarray
    r: np.ndarray
    ell: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return len(self.h)

    @property
    def A(self):
        """Full linear part ``A_T @ A_tilde @ A_hat``."""
        return self.A_rot @ self.A_tilde @ self.A_hat

    @property
    def A_ref(self):
        """``A_tilde @ A_hat``: the map from the reference element to the tilde element."""
        return self.A_tilde @ self.A_hat

    @property
    def reference_vertices(self):
        return REFERENCE_VERTICES[self.cond]

    def phi(self, xhat):
        """Map reference points ``(n, d)`` to physical points."""
        return np.asarray(xhat) @ self.A.T + self.b

    def phi_inv(self, x):
        return np.linalg.solve(self.A, (np.asarray(x) - self.b).T).T


def _edge_key(ids, i, j):
    a, b = ids[i], ids[j]
    return (a, b) if a <= b else (b, a)


def _len2(P, i, j):
    return sum((P[i][k] - P[j][k]) ** 2 for k in range(len(P[i])))


def _unit(v):
    return v / np.linalg.norm(v)


def _labels_2d(P, ids):
    """Return (p1, p2, p3) local indices per the longest-edge rule."""
    edges = [(0, 1), (0, 2), (1, 2)]
    i, j = min(edges, key=lambda e: (-_len2(P, *e), _edge_key(ids, *e)))
    k = 3 - i - j
    # p1 is opposite the longest edge; p2 ends the longer of the other two
    a, b = min(((i, j), (j, i)), key=lambda ab: (-_len2(P, k, ab[0]), _edge_key(ids, k, ab[0])))
    return k, a, b


def _labels_3d(P, ids):
    """Return ((p1, p2, p3, p4), cond) local indices per the shortest-edge rule."""
    edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    lmin = min(edges, key=lambda e: (_len2(P, *e), _edge_key(ids, *e)))
    adj = [e for e in edges if e != lmin and (set(e) & set(lmin))]
    lmax = min(adj, key=lambda e: (-_len2(P, *e), _edge_key(ids, *e)))
    x = (set(lmin) & set(lmax)).pop()  # shared endpoint of L_min and L_max
    other = (set(lmax) - {x}).pop()
    c = (set(lmin) - {x}).pop()
    e = ({0, 1, 2, 3} - {x, other, c}).pop()
    Px = np.asarray(P[x], dtype=np.longdouble)
    Po = np.asarray(P[other], dtype=np.longdouble)
    mid = (Px + Po) / 2
    axis = Px - Po
    side_c = float(np.dot(np.asarray(P[c], dtype=np.longdouble) - mid, axis))
    side_e = float(np.dot(np.asarray(P[e], dtype=np.longdouble) - mid, axis))
    if side_c < 0:
        # c is never farther from x than from `other` because L_min is minimal
        raise GeometryError(
            "classification failed: endpoint of the shortest edge lies in the far half-space; "
            f"squared edge lengths {[_len2(P, *ed) for ed in edges]}"
        )
    if side_c == 0 and side_e != 0:
        # c is equidistant from both ends, so it does not share e's open
        # half-space; attach it to the end away from e
        return ((x, other, c, e) if side_e > 0 else (other, x, c, e)), COND2_3D_TYPE2
    # otherwise points exactly on the mid-plane are assigned to p1's half-space
    if side_e >= 0:
        return (x, other, c, e), COND2_3D_TYPE1
    return (other, x, c, e), COND2_3D_TYPE2


def labels(points, ids=None):
    """Vertex labelling only: ``(perm, cond, h)`` without building matrices.

    Cheap path used by :func:`semi_regularity` on large meshes.
    """
    P = [tuple(map(float, p)) for p in points]
    d = len(P) - 1
    ids = tuple(range(d + 1)) if ids is None else tuple(int(i) for i in ids)
    if d == 2:
        perm = _labels_2d(P, ids)
        h = (math.dist(P[perm[0]], P[perm[1]]), math.dist(P[perm[0]], P[perm[2]]))
        return perm, COND1_2D, h
    if d == 3:
        perm, cond = _labels_3d(P, ids)
        p1, p2, p3, p4 = perm
        h2 = math.dist(P[p1], P[p3]) if cond == COND2_3D_TYPE1 else math.dist(P[p2], P[p3])
        h = (math.dist(P[p1], P[p2]), h2, math.dist(P[p1], P[p4]))
        return perm, cond, h
    raise ValueError(f"unsupported dimension {d}")


def _diameter(P):
    n = len(P)
    return max(math.dist(P[i], P[j]) for i in range(n) for j in range(i + 1, n))


def _ells(points):
    d = points.shape[1]
    vol = float(simplex_volume(points))
    lf = local_face_vertices(d)
    return np.array([factorial(d) * vol / float(face_measure(points[f])) for f in lf])


def decompose_2d(points, ids=None):
    """Decompose a triangle given as a ``(3, 2)`` array of vertices.

    ``ids`` are global vertex indices used only for tie-breaking.
    """
    P = np.asarray(points, dtype=float)
    if P.shape != (3, 2):
        raise ValueError(f"expected (3, 2) points, got {P.shape}")
    vol = exact_volume(P)
    if not vol > 0:
        raise GeometryError("degenerate triangle")
    perm, cond, (h1, h2) = labels(P, ids)
    p1, p2, p3 = (P[k] for k in perm)
    e1 = (p2 - p1) / h1
    e2 = np.array([-e1[1], e1[0]])
    u = p3 - p1
    # twice the signed area, exactly, fixes both t and the mirror; sharing it
    # with |T| keeps gamma * t = 2 to rounding
    cross = float(exact_signed_det(P[list(perm)]))
    if cross < 0:
        e2 = -e2
    s = float(np.dot(u, e1)) / h2
    t = abs(cross) / (h1 * h2)
    h_T = math.dist(p2, p3)
    A_hat = np.diag([h1, h2])
    A_tilde = np.array([[1.0, s], [0.0, t]])
    A_rot = np.column_stack([e1, e2])
    gamma = h1 * h2 / vol
    r = np.array([e1, u / h2])
    return ElementGeometry(
        cond=cond, perm=tuple(perm), points=P, h=np.array([h1, h2]), h_T=h_T,
        H_T=gamma * h_T, gamma=gamma, volume=vol, A_hat=A_hat, A_tilde=A_tilde,
        A_rot=A_rot, b=p1.copy(), r=r, ell=_ells(P), params={"s": s, "t": t},
    )


def decompose_3d(points, ids=None):
    """Decompose a tetrahedron given as a ``(4, 3)`` array of vertices."""
    P = np.asarray(points, dtype=float)
    if P.shape != (4, 3):
        raise ValueError(f"expected (4, 3) points, got {P.shape}")
    vol = exact_volume(P)
    if not vol > 0:
        raise GeometryError("degenerate tetrahedron")
    perm, cond, (h1, h2, h3) = labels(P, ids)
    p1, p2, p3, p4 = (P[k] for k in perm)
    e1 = (p2 - p1) / h1
    u3 = p3 - p1
    u4 = p4 - p1
    # Gram-Schmidt twice keeps the frame orthonormal for nearly flat faces
    e2 = u3.copy()
    for _ in range(2):
        e2 = _unit(e2 - np.dot(e2, e1) * e1)
    e3 = np.cross(e1, e2)
    if np.dot(u4, e3) < 0:
        e3 = -e3
    # twice the area of p1 p2 p3, in extended precision
    L = np.asarray(P, dtype=np.longdouble)
    q1, q2, q3 = (L[k] for k in perm[:3])
    a, b = q2 - q1, q3 - q1
    tri2 = float(np.sqrt(np.sum(np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]) ** 2)))
    if cond == COND2_3D_TYPE1:
        s1 = float(np.dot(u3, e1)) / h2
        r2 = u3 / h2
    else:
        s1 = float(np.dot(p3 - p2, p1 - p2)) / (h1 * h2)
        r2 = (p3 - p2) / h2
    t1 = tri2 / (h1 * h2)
    t2 = factorial(3) * vol / (h1 * h2 * h3 * t1)
    s21 = float(np.dot(u4, e1)) / h3
    s22 = float(np.dot(u4, e2)) / h3
    sign = 1.0 if cond == COND2_3D_TYPE1 else -1.0
    A_tilde = np.array([[1.0, sign * s1, s21], [0.0, t1, s22], [0.0, 0.0, t2]])
    A_hat = np.diag([h1, h2, h3])
    A_rot = np.column_stack([e1, e2, e3])
    gamma = h1 * h2 * h3 / vol
    h_T = _diameter(P)
    r = np.array([e1, r2, u4 / h3])
    params = {"s1": s1, "t1": t1, "s21": s21, "s22": s22, "t2": t2}
    return ElementGeometry(
        cond=cond, perm=tuple(perm), points=P, h=np.array([h1, h2, h3]), h_T=h_T,
        H_T=gamma * h_T, gamma=gamma, volume=vol, A_hat=A_hat, A_tilde=A_tilde,
        A_rot=A_rot, b=p1.copy(), r=r, ell=_ells(P), params=params,
    )


def decompose(points, ids=None):
    """Dispatch to :func:`decompose_2d` or :func:`decompose_3d`."""
    d = np.shape(points)[-1]
    return decompose_2d(points, ids) if d == 2 else decompose_3d(points, ids)


def mesh_geometry(mesh):
    """Decompose every element of ``mesh`` (element order)."""
    return [decompose(mesh.points[e], mesh.elements[e]) for e in range(mesh.n_elements)]


def semi_regularity(mesh):
    """Per-element ``gamma_T = H_T / h_T`` and its maximum over the mesh."""
    gam = np.empty(mesh.n_elements)
    vols = mesh.volumes
    for e in range(mesh.n_elements):
        _, _, h = labels(mesh.points[e], mesh.elements[e])
        gam[e] = math.prod(h) / vols[e]
    return gam, float(gam.max())


def opnorm2(M):
    """Spectral norm and 2-norm condition number ``(||M||, ||M|| ||M^-1||)``.

    2x2 matrices use the closed form; larger ones go through the SVD.
    """
    M = np.asarray(M, dtype=float)
    if M.shape == (2, 2):
        a, b = M[:, 0] @ M[:, 0], M[:, 0] @ M[:, 1]
        c = M[:, 1] @ M[:, 1]
        lam = 0.5 * (a + c) + math.hypot(0.5 * (a - c), b)
        smax = math.sqrt(lam)
        smin = abs(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]) / smax
        return smax, smax / smin
    sv = np.linalg.svd(M, compute_uv=False)
    return float(sv[0]), float(sv[0] / sv[-1])


def decomposition_bounds(geo):
    """Evaluate the matrix bounds of the decomposition.

    Returns a dict with the measured quantities and their bounds:
    ``norm_tilde`` vs ``sqrt(2)`` / ``2``; ``cond_tilde`` vs ``gamma`` /
    ``(2/3) gamma``; ``det_ref`` vs ``d! |T|``; ``norm_hat`` vs ``h_T``;
    ``rot_norm``/``rot_inv_norm`` (both 1) and the vertex reproduction error.
    """
    d = geo.dim
    n_t, c_t = opnorm2(geo.A_tilde)
    sv_rot = np.linalg.svd(geo.A_rot, compute_uv=False)
    ref = geo.reference_vertices
    phys = geo.points[list(geo.perm)]
    repro = float(np.max(np.linalg.norm(geo.phi(ref) - phys, axis=1)))
    return {
        "norm_tilde": n_t,
        "norm_tilde_bound": math.sqrt(2) if d == 2 else 2.0,
        "cond_tilde": c_t,
        "cond_tilde_bound": geo.gamma if d == 2 else 2.0 / 3.0 * geo.gamma,
        "det_ref": abs(float(np.linalg.det(geo.A_ref))),
        "det_ref_expected": factorial(d) * geo.volume,
        "norm_hat": float(np.max(geo.h)),
        "h_T": geo.h_T,
        "rot_norm": float(sv_rot[0]),
        "rot_inv_norm": float(1.0 / sv_rot[-1]),
        "vertex_error": repro,
    }


def directional_seminorm(points, geo, grad_v, p=2, quad_degree=8):
    """``||dv/dr_i||_{L^p(T)}`` for i = 1..d.

    ``grad_v(x)`` returns ``(n, d)`` for a scalar field or ``(n, k, d)``
    (Jacobian rows per component) for a vector field; in the vector case
    the pointwise Euclidean norm of ``dv/dr_i`` is integrated.
    """
    x, w = push_forward(simplex_rule(geo.dim, quad_degree), points)
    g = np.asarray(grad_v(x), dtype=float)
    out = np.empty(geo.dim)
    for i, r in enumerate(geo.r):
        dv = g @ r
        mag = np.abs(dv) if dv.ndim == 1 else np.linalg.norm(dv, axis=-1)
        out[i] = float(np.sum(w * mag**p)) ** (1.0 / p)
    return out
