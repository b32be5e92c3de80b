from collections import Counter
from itertools import combinations
from math import sqrt

import numpy as np
import pytest

from conftest import REF2, REF3
from crsobolev.errors import DegenerateElementError, IndexRangeError, MeshFormatError, NonconformingMeshError
from crsobolev.mesh import SimplicialMesh, face_height, face_measure, format_mesh, parse_mesh, simplex_volume
from crsobolev.meshgen import unit_cube

SQUARE = """dim 2
vertices 4
0 0
1 0
0 1
1 1
elements 2
0 1 3
0 3 2
"""


def brute_force_faces(elements):
    """Count every (d-1)-subsimplex by hashing sorted vertex tuples."""
    d = elements.shape[1] - 1
    c = Counter(tuple(sorted(s)) for e in elements for s in combinations(e.tolist(), d))
    return len(c), sum(1 for v in c.values() if v == 2)


def test_parse_square():
    mesh = parse_mesh(SQUARE)
    assert (mesh.n_vertices, mesh.n_elements, mesh.dim) == (4, 2, 2)
    assert mesh.faces.n_faces == 5
    assert mesh.faces.interior.sum() == 1 and mesh.faces.boundary.sum() == 4
    assert mesh.total_volume() == pytest.approx(1.0, abs=1e-15)


def test_roundtrip(square):
    again = parse_mesh(format_mesh(square))
    assert np.array_equal(again.vertices, square.vertices)
    assert np.array_equal(again.elements, square.elements)


def test_single_triangle_faces():
    mesh = SimplicialMesh(REF2, np.array([[0, 1, 2]]))
    assert mesh.faces.n_faces == 3 and mesh.faces.interior.sum() == 0


def test_kuhn_cube_faces():
    mesh = unit_cube(1, 1, 1)
    assert mesh.n_elements == 6
    n, inner = brute_force_faces(mesh.elements)
    assert (n, inner) == (18, 6)
    assert mesh.faces.n_faces == n and mesh.faces.interior.sum() == inner
    assert mesh.total_volume() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("n", [2, 3])
def test_faces_match_oracle_on_grids(n):
    mesh = unit_cube(n, n, n)
    nf, inner = brute_force_faces(mesh.elements)
    assert mesh.faces.n_faces == nf and mesh.faces.interior.sum() == inner


def test_normals_point_from_plus_to_minus():
    mesh = unit_cube(2, 1, 1)
    f = mesh.faces
    cent = mesh.points.mean(axis=1)
    ok = f.interior
    dirn = cent[f.owners[ok, 1]] - cent[f.owners[ok, 0]]
    assert np.all(np.einsum("fd,fd->f", dirn, f.normals[ok]) > 0)
    assert np.allclose(np.linalg.norm(f.normals, axis=1), 1.0)


def test_index_out_of_range():
    with pytest.raises(IndexRangeError):
        parse_mesh(SQUARE.replace("0 3 2", "0 99 2"))


@pytest.mark.parametrize(
    "text",
    ["dims 2\n", "dim 2\nvertices 2\n0 0\n", "dim 2\nvertices x\n", "dim 4\n", SQUARE + "extra\n",
     SQUARE.replace("1 1\n", "1 1 1\n")],
)
def test_malformed(text):
    with pytest.raises(MeshFormatError):
        parse_mesh(text)


def test_degenerate():
    text = "dim 2\nvertices 3\n0 0\n1 0\n2 0\nelements 1\n0 1 2\n"
    with pytest.raises(DegenerateElementError):
        parse_mesh(text)


def test_hanging_node():
    # big triangle on the left, two small ones on the right sharing the
    # midpoint of its vertical edge
    text = """dim 2
vertices 5
0 0
1 0
1 1
1 0.5
2 0.5
elements 3
0 1 2
1 4 3
3 4 2
"""
    with pytest.raises(NonconformingMeshError):
        parse_mesh(text)


def test_face_shared_by_three():
    text = "dim 2\nvertices 5\n0 0\n1 0\n0 1\n0 -1\n1 1\nelements 3\n0 1 2\n0 3 1\n0 1 4\n"
    with pytest.raises(NonconformingMeshError):
        parse_mesh(text)


def test_errors_are_distinct():
    kinds = {MeshFormatError, IndexRangeError, DegenerateElementError, NonconformingMeshError}
    assert len(kinds) == 4
    for k in kinds:
        assert issubclass(k, ValueError)


def test_measures():
    assert float(simplex_volume(REF2)) == pytest.approx(0.5, abs=1e-16)
    assert float(simplex_volume(REF3)) == pytest.approx(1 / 6, abs=1e-16)
    assert float(face_measure(REF2[1:])) == pytest.approx(sqrt(2), abs=1e-15)
    assert float(face_measure(REF3[1:])) == pytest.approx(sqrt(3) / 2, abs=1e-15)


def test_face_heights():
    assert face_height(REF2, 0) == pytest.approx(1 / sqrt(2), rel=1e-15)
    assert face_height(REF2, 2) == pytest.approx(1.0, rel=1e-15)
    assert face_height(REF3, 0) == pytest.approx(2 / sqrt(3), rel=1e-15)


def test_height_is_distance_in_2d(rng):
    from conftest import random_simplex
    from crsobolev.mesh import vertex_face_distance

    for _ in range(50):
        P = random_simplex(rng, 2, 1e3)
        for i in range(3):
            assert face_height(P, i) == pytest.approx(vertex_face_distance(P, i), rel=1e-12)


def test_height_is_twice_distance_in_3d():
    from crsobolev.mesh import vertex_face_distance

    for i in range(4):
        assert face_height(REF3, i) == pytest.approx(2 * vertex_face_distance(REF3, i), rel=1e-12)
