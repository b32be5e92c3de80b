"""Conforming simplicial meshes in two and three dimensions.

A mesh is a pair ``(vertices, elements)``.  Faces are derived once and
stored in a :class:`FaceSet`; the local face ``i`` of an element is the
face opposite its ``i``-th vertex.  Interior faces carry an ordered owner
pair ``(T+, T-)`` where ``T+`` is the element with the larger index, and
the stored face normal points from ``T+`` into ``T-``.  Boundary faces
have a single owner and an outward normal.

Mesh text format::

    # comment
    dim 2
    vertices 4
    0 0
    1 0
    1 1
    0 1
    elements 2
    0 1 2
    0 2 3
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from math import factorial

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateElementError,
    IndexRangeError,
    MeshFormatError,
    NonconformingMeshError,
)

#: Elements with measure below this are rejected; anisotropy alone never is.
DEGENERACY_THRESHOLD = 1e-300


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def signed_det(edges):
    """Determinant of stacked 2x2 / 3x3 edge matrices in extended precision.

    Thin simplices make ``det`` cancel catastrophically; evaluating the
    cofactor expansion in ``longdouble`` keeps the relative error near
    ``1e-19 * aspect`` instead of ``1e-16 * aspect``.
    """
    e = np.asarray(edges, dtype=np.longdouble)
    d = e.shape[-1]
    if d == 2:
        det = e[..., 0, 0] * e[..., 1, 1] - e[..., 0, 1] * e[..., 1, 0]
    elif d == 3:
        det = (
            e[..., 0, 0] * (e[..., 1, 1] * e[..., 2, 2] - e[..., 1, 2] * e[..., 2, 1])
            - e[..., 0, 1] * (e[..., 1, 0] * e[..., 2, 2] - e[..., 1, 2] * e[..., 2, 0])
            + e[..., 0, 2] * (e[..., 1, 0] * e[..., 2, 1] - e[..., 1, 1] * e[..., 2, 0])
        )
    else:
        raise ValueError(f"unsupported dimension {d}")
    return det


def simplex_volume(points):
    """Measure of a d-simplex (or a stack of them), ``|det E| / d!``.

    ``points`` has shape ``(..., d+1, d)``.  A single simplex goes through
    the exact determinant; stacks use extended precision.
    """
    points = np.asarray(points, dtype=float)
    d = points.shape[-1]
    if points.ndim == 2:
        return np.float64(exact_volume(points))
    edges = points[..., 1:, :].astype(np.longdouble) - points[..., :1, :]
    return (np.abs(signed_det(edges)) / factorial(d)).astype(float)


def exact_rows(points):
    """Vertex coordinates as exact ``Fraction`` rows."""
    return [[Fraction(float(c)) for c in p] for p in np.asarray(points, dtype=float)]


def exact_det(rows):
    """Determinant of a 2x2 or 3x3 matrix of Fractions."""
    if len(rows) == 2:
        (a, b), (c, e) = rows
        return a * e - b * c
    (a, b, c), (d, e, f), (g, h, k) = rows
    return a * (e * k - f * h) - b * (d * k - f * g) + c * (d * h - e * g)


def exact_signed_det(points):
    """``det(p_1 - p_0, ..., p_d - p_0)`` of one simplex, exactly."""
    X = exact_rows(points)
    return exact_det([[u - v for u, v in zip(X[k], X[0])] for k in range(1, len(X))])


def exact_volume(points):
    """Measure of one simplex from the exact determinant, rounded once."""
    d = np.shape(points)[-1]
    return float(abs(exact_signed_det(points)) / factorial(d))


def face_measure(points):
    """Measure of a (d-1)-simplex embedded in R^d, ``points`` of shape ``(..., d, d)``.

    Uses the square root of the Gram determinant.  For d = 3 the Gram
    determinant is evaluated through the cross product (Lagrange's
    identity), which avoids cancellation on thin faces.
    """
    points = np.asarray(points, dtype=float)
    d = points.shape[-1]
    if d == 2:
        return np.linalg.norm(points[..., 1, :] - points[..., 0, :], axis=-1)
    if d == 3:
        c = np.cross(points[..., 1, :] - points[..., 0, :], points[..., 2, :] - points[..., 0, :])
        return 0.5 * np.linalg.norm(c, axis=-1)
    raise ValueError(f"unsupported dimension {d}")


def _face_normal(points, opposite):
    """Unit normal of faces ``points (..., d, d)`` pointing away from ``opposite``."""
    d = points.shape[-1]
    if d == 2:
        t = points[..., 1, :] - points[..., 0, :]
        n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
    else:
        n = np.cross(points[..., 1, :] - points[..., 0, :], points[..., 2, :] - points[..., 0, :])
    n = n / np.linalg.norm(n, axis=-1, keepdims=True)
    side = np.einsum("...i,...i->...", opposite - points[..., 0, :], n)
    return np.where((side > 0)[..., None], -n, n)


class SimplicialMesh:
    """Vertices plus element connectivity, validated on construction.

    Parameters
    ----------
    vertices : array_like, shape (n, d)
    elements : array_like of int, shape (m, d+1)
        Vertex indices per element, zero based.  The row order is the
        element index used for the ``T+``/``T-`` face convention.
    """

    def __init__(self, vertices, elements):
        vertices = np.asarray(vertices, dtype=float)
        elements = np.asarray(elements)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise MeshFormatError(f"vertices must have shape (n, 2) or (n, 3), got {vertices.shape}")
        d = vertices.shape[1]
        if elements.ndim != 2 or elements.shape[1] != d + 1:
            raise MeshFormatError(f"elements must have shape (m, {d + 1}), got {elements.shape}")
        if elements.size and not np.issubdtype(elements.dtype, np.integer):
            if not np.all(elements == np.round(elements)):
                raise MeshFormatError("element vertex indices must be integers")
        elements = elements.astype(np.intp)
        n = len(vertices)
        bad = (elements < 0) | (elements >= n)
        if bad.any():
            e, k = np.argwhere(bad)[0]
            raise IndexRangeError(
                f"element {e} references vertex {elements[e, k]} but the mesh has {n} vertices"
            )
        srt = np.sort(elements, axis=1)
        rep = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
        if rep.any():
            raise DegenerateElementError(f"element {np.flatnonzero(rep)[0]} repeats a vertex")
        self.dim = d
        self.vertices = _readonly(vertices)
        self.elements = _readonly(elements)
        vol = simplex_volume(self.vertices[self.elements])
        small = vol < DEGENERACY_THRESHOLD
        if small.any():
            raise DegenerateElementError(f"element {np.flatnonzero(small)[0]} has zero measure")
        self.volumes = _readonly(vol)

    def __repr__(self):
        return f"SimplicialMesh(dim={self.dim}, n_vertices={self.n_vertices}, n_elements={self.n_elements})"

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.elements)

    @cached_property
    def points(self):
        """Element vertex coordinates, shape ``(m, d+1, d)``."""
        return _readonly(self.vertices[self.elements])

    @cached_property
    def diameters(self):
        """``h_T``: the longest edge of each element."""
        p = self.points
        d = self.dim
        h = np.zeros(self.n_elements)
        for i in range(d + 1):
            for j in range(i + 1, d + 1):
                h = np.maximum(h, np.linalg.norm(p[:, i] - p[:, j], axis=1))
        return _readonly(h)

    @property
    def h(self):
        return float(self.diameters.max())

    @cached_property
    def barycentric_gradients(self):
        """``(m, d+1, d)`` gradients of the barycentric coordinates."""
        from .spaces import barycentric_gradients

        return _readonly(barycentric_gradients(self.points))

    @cached_property
    def faces(self):
        """The :class:`FaceSet` of this mesh (built on first access)."""
        return build_faces(self)

    def total_volume(self):
        return float(np.sum(self.volumes))


@dataclass(frozen=True, eq=False)
class FaceSet:
    """Face topology and geometry of a mesh.

    Attributes
    ----------
    faces : (nf, d) int
        Sorted vertex-index tuple of each face; faces are stored in
        lexicographic order of these tuples.
    owners : (nf, 2) int
        ``(T+, T-)`` for interior faces; ``(T, -1)`` on the boundary.
    local : (nf, 2) int
        Local face index of the face inside each owner (``-1`` if absent).
    normals : (nf, d)
        Unit normal, outward from ``owners[:, 0]``.
    measures : (nf,)
        ``|F|_{d-1}``.
    element_faces : (m, d+1) int
        Global face index of local face ``i`` of every element.
    """

    faces: np.ndarray
    owners: np.ndarray
    local: np.ndarray
    normals: np.ndarray
    measures: np.ndarray
    element_faces: np.ndarray

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def boundary(self):
        return self.owners[:, 1] < 0

    @property
    def interior(self):
        return self.owners[:, 1] >= 0

    def element_normals(self):
        """Outward unit normal of every local face, shape ``(m, d+1, d)``."""
        sign = np.where(
            self.owners[self.element_faces, 0] == np.arange(len(self.element_faces))[:, None], 1.0, -1.0
        )
        return self.normals[self.element_faces] * sign[..., None]

    def element_signs(self):
        """+1 where the element is ``T+`` (or the boundary owner), -1 where it is ``T-``."""
        m = len(self.element_faces)
        return np.where(self.owners[self.element_faces, 0] == np.arange(m)[:, None], 1.0, -1.0)


def local_face_vertices(d):
    """Local vertex indices of each local face: face ``i`` omits vertex ``i``."""
    return np.array([[k for k in range(d + 1) if k != i] for i in range(d + 1)], dtype=np.intp)


def build_faces(mesh):
    """Enumerate the faces of ``mesh`` and orient them.

    Raises
    ------
    NonconformingMeshError
        If a face is shared by more than two elements.
    """
    d = mesh.dim
    m = mesh.n_elements
    lf = local_face_vertices(d)
    incid = mesh.elements[:, lf]  # (m, d+1, d)
    keys = np.sort(incid.reshape(-1, d), axis=1)
    faces, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        f = int(np.flatnonzero(counts > 2)[0])
        raise NonconformingMeshError(f"face {tuple(faces[f])} is shared by {counts[f]} elements")
    nf = len(faces)
    elem = np.repeat(np.arange(m), d + 1)
    loc = np.tile(np.arange(d + 1), m)
    # sort incidences by (face, element) so the larger element index comes second
    order = np.lexsort((elem, inverse))
    f_sorted = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = f_sorted[1:] != f_sorted[:-1]
    owners = -np.ones((nf, 2), dtype=np.intp)
    local = -np.ones((nf, 2), dtype=np.intp)
    lo_elem = elem[order][first]
    lo_loc = loc[order][first]
    last = np.ones(len(order), dtype=bool)
    last[:-1] = f_sorted[1:] != f_sorted[:-1]
    hi_elem = elem[order][last]
    hi_loc = loc[order][last]
    shared = counts == 2
    owners[:, 0] = hi_elem
    local[:, 0] = hi_loc
    owners[shared, 1] = lo_elem[shared]
    local[shared, 1] = lo_loc[shared]

    pts = mesh.points
    own = owners[:, 0]
    fpts = pts[own[:, None], lf[local[:, 0]]]  # (nf, d, d)
    opposite = pts[own, local[:, 0]]
    normals = _face_normal(fpts, opposite)
    meas = face_measure(fpts)
    element_faces = inverse.reshape(m, d + 1)
    return FaceSet(
        faces=_readonly(faces.astype(np.intp)),
        owners=_readonly(owners),
        local=_readonly(local),
        normals=_readonly(normals),
        measures=_readonly(meas),
        element_faces=_readonly(element_faces.astype(np.intp)),
    )


def check_conformity(mesh, faces=None, tol=1e-10):
    """Reject hanging nodes.

    A vertex lying on a boundary face (relative to the face set) without
    being one of its vertices means two elements meet along a partial
    face.  Raises :class:`NonconformingMeshError`; returns ``None``.
    """
    faces = mesh.faces if faces is None else faces
    bnd = np.flatnonzero(faces.boundary)
    if len(bnd) == 0:
        return
    X = mesh.vertices
    fv = faces.faces[bnd]
    fp = X[fv]  # (nb, d, d)
    centre = fp.mean(axis=1)
    radius = np.linalg.norm(fp - centre[:, None, :], axis=2).max(axis=1)
    tree = cKDTree(X)
    hits = tree.query_ball_point(centre, radius * (1 + 1e-9))
    for k, cand in enumerate(hits):
        if len(cand) <= mesh.dim:
            continue
        own = set(fv[k].tolist())
        a = fp[k, 0]
        E = (fp[k, 1:] - a).T  # (d, d-1)
        scale = radius[k]
        for v in cand:
            if v in own:
                continue
            mu, *_ = np.linalg.lstsq(E, X[v] - a, rcond=None)
            dist = np.linalg.norm(E @ mu - (X[v] - a))
            if dist <= tol * scale and mu.min() >= -tol and mu.sum() <= 1 + tol:
                raise NonconformingMeshError(
                    f"vertex {v} lies on face {tuple(fv[k])} without being one of its vertices"
                )


def measures(mesh):
    """Return ``(element measures, face measures)``."""
    return mesh.volumes, mesh.faces.measures


def face_height(points, i):
    """``l_{T,F} = d! |T| / |F|`` for local face ``i`` of the simplex ``points``.

    In 2D this is the distance from the opposite vertex to the face; in 3D
    it is twice that distance (see :func:`vertex_face_distance`).
    """
    points = np.asarray(points, dtype=float)
    d = points.shape[-1]
    if not 0 <= i <= d:
        raise IndexError(f"local face index {i} out of range for a {d}-simplex")
    lf = local_face_vertices(d)[i]
    return factorial(d) * float(simplex_volume(points)) / float(face_measure(points[lf]))


def vertex_face_distance(points, i):
    """Euclidean distance from vertex ``i`` to the hyperplane of the opposite face."""
    points = np.asarray(points, dtype=float)
    d = points.shape[-1]
    lf = local_face_vertices(d)[i]
    n = _face_normal(points[lf], points[i])
    return float(abs(np.dot(points[i] - points[lf[0]], n)))


def face_heights(mesh):
    """``l_{T,F}`` for every element and local face, shape ``(m, d+1)``."""
    d = mesh.dim
    fs = mesh.faces
    return factorial(d) * mesh.volumes[:, None] / fs.measures[fs.element_faces]


def parse_mesh(text):
    """Parse the line-oriented mesh format and return a validated mesh."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line.split()))
    it = iter(lines)

    def header(name):
        try:
            lineno, tok = next(it)
        except StopIteration:
            raise MeshFormatError(f"missing '{name}' header") from None
        if len(tok) != 2 or tok[0] != name:
            raise MeshFormatError(f"line {lineno}: expected '{name} <int>', got {' '.join(tok)!r}")
        try:
            val = int(tok[1])
        except ValueError:
            raise MeshFormatError(f"line {lineno}: '{tok[1]}' is not an integer") from None
        if val < 0:
            raise MeshFormatError(f"line {lineno}: negative count")
        return val

    def rows(count, width, conv, what):
        out = []
        for _ in range(count):
            try:
                lineno, tok = next(it)
            except StopIteration:
                raise MeshFormatError(f"expected {count} {what} lines, file ended early") from None
            if len(tok) != width:
                raise MeshFormatError(f"line {lineno}: expected {width} values, got {len(tok)}")
            try:
                out.append([conv(t) for t in tok])
            except ValueError:
                raise MeshFormatError(f"line {lineno}: cannot parse {what} entry") from None
        return out

    d = header("dim")
    if d not in (2, 3):
        raise MeshFormatError(f"dim must be 2 or 3, got {d}")
    nv = header("vertices")
    verts = rows(nv, d, float, "vertex")
    ne = header("elements")
    elems = rows(ne, d + 1, int, "element")
    extra = next(it, None)
    if extra is not None:
        raise MeshFormatError(f"line {extra[0]}: unexpected trailing content")
    mesh = SimplicialMesh(np.array(verts, dtype=float).reshape(nv, d), np.array(elems, dtype=np.intp).reshape(ne, d + 1))
    check_conformity(mesh)
    return mesh


def format_mesh(mesh):
    """Serialise ``mesh`` in the text format read by :func:`parse_mesh`."""
    out = [f"dim {mesh.dim}", f"vertices {mesh.n_vertices}"]
    out += [" ".join(f"{c:.17g}" for c in v) for v in mesh.vertices]
    out.append(f"elements {mesh.n_elements}")
    out += [" ".join(str(int(k)) for k in e) for e in mesh.elements]
    return "\n".join(out) + "\n"
