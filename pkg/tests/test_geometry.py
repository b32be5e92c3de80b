from math import factorial, sqrt

import numpy as np
import pytest

from conftest import REF2, REF3, random_simplex
from crsobolev.errors import GeometryError, MeshError
from crsobolev.geometry import (
    COND1_2D,
    COND2_3D_TYPE1,
    COND2_3D_TYPE2,
    decompose,
    directional_seminorm,
    decomposition_bounds,
    semi_regularity,
)
from crsobolev.mesh import simplex_volume
from crsobolev.meshgen import gen_family, sliver, unit_square


def svd_norm_cond(M):
    s = np.linalg.svd(M, compute_uv=False)
    return s[0], s[0] / s[-1]


def check_invariants(P, geo):
    d = P.shape[1]
    b = decomposition_bounds(geo)
    vol = float(simplex_volume(P))
    assert abs(np.linalg.det(geo.A_ref)) == pytest.approx(factorial(d) * vol, rel=1e-10)
    n, c = svd_norm_cond(geo.A_tilde)
    assert n <= (sqrt(2) if d == 2 else 2.0) + 1e-10
    assert c <= (1.0 if d == 2 else 2 / 3) * geo.H_T / geo.h_T + 1e-8
    assert b["vertex_error"] <= 1e-10 * geo.h_T
    assert np.allclose(geo.A_rot.T @ geo.A_rot, np.eye(d), atol=1e-12)
    assert np.allclose(np.linalg.norm(geo.r, axis=1), 1.0, atol=1e-14)
    # h_i r_i reproduces the defining edge vectors
    p = P[list(geo.perm)]
    assert np.allclose(geo.h[0] * geo.r[0], p[1] - p[0], atol=1e-12 * geo.h_T)
    return b


def test_reference_triangle():
    g = decompose(REF2)
    assert g.cond == COND1_2D
    assert g.h == pytest.approx([1.0, 1.0])
    assert g.h_T == pytest.approx(sqrt(2))
    assert g.H_T == pytest.approx(2 * sqrt(2))
    assert g.gamma == pytest.approx(2.0)
    assert g.params["s"] == pytest.approx(0.0, abs=1e-15) and g.params["t"] == pytest.approx(1.0)
    check_invariants(REF2, g)


def test_needle():
    eps = 1e-4
    P = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, eps]])
    g = decompose(P)
    assert g.perm[0] == 0
    assert g.h == pytest.approx([1.0, eps], rel=1e-14)
    assert g.volume == pytest.approx(eps / 2, rel=1e-14)
    assert g.gamma == pytest.approx(2.0, rel=1e-12)
    check_invariants(P, g)


def test_equilateral():
    P = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, sqrt(3) / 2]])
    g = decompose(P)
    assert g.gamma == pytest.approx(4 / sqrt(3), rel=1e-14)
    check_invariants(P, g)


def test_2d_ordering(rng):
    for _ in range(200):
        P = random_simplex(rng, 2, 1e4)
        g = decompose(P)
        assert g.h[1] <= g.h[0] + 1e-15 * g.h_T
        assert 0.5 * g.h_T < g.h[0] <= g.h_T * (1 + 1e-15)
        check_invariants(P, g)


def test_reference_tetrahedra():
    g = decompose(REF3)
    assert g.cond == COND2_3D_TYPE1
    assert decomposition_bounds(g)["vertex_error"] <= 1e-12
    t2 = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 0, 1]])
    g2 = decompose(t2)
    assert g2.cond == COND2_3D_TYPE2
    check_invariants(t2, g2)


def test_type1_and_type2_both_occur(rng):
    seen = set()
    for _ in range(300):
        P = random_simplex(rng, 3, 1e3)
        g = decompose(P)
        seen.add(g.cond)
        check_invariants(P, g)
        edges = [np.linalg.norm(P[i] - P[j]) for i in range(4) for j in range(i + 1, 4)]
        assert g.h[1] == pytest.approx(min(edges), rel=1e-12)
    assert seen == {COND2_3D_TYPE1, COND2_3D_TYPE2}


@pytest.mark.parametrize("eps", [1.0, 1e-2, 1e-4])
def test_flat_kuhn_tetrahedron(eps):
    P = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, eps]])
    g = decompose(P)
    n, _ = svd_norm_cond(g.A_tilde)
    assert n <= 2 + 1e-10
    assert np.isfinite(g.gamma)
    check_invariants(P, g)


def test_sliver_gamma_unbounded():
    gam = [decompose(sliver(e).points[0]).gamma for e in [0.1, 1e-2, 1e-3, 1e-4]]
    assert all(b > 5 * a for a, b in zip(gam, gam[1:]))


def test_degenerate():
    with pytest.raises((GeometryError, MeshError)):
        decompose(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))


def test_semi_regularity():
    gam, gmax = semi_regularity(unit_square(4, 4))
    assert np.allclose(gam, 2.0) and gmax == pytest.approx(2.0)
    for mem in gen_family("needle_2d([0.1, 0.01, 0.001, 0.0001])"):
        assert mem.gamma_max == pytest.approx(2.0, rel=1e-10)


def test_directional_seminorm_x():
    g = decompose(REF2)
    out = directional_seminorm(REF2, g, lambda x: np.tile([1.0, 0.0], (len(x), 1)))
    assert out[0] == pytest.approx(1 / sqrt(2), rel=1e-14)
    zero = directional_seminorm(REF2, g, lambda x: np.zeros((len(x), 2)))
    assert np.all(zero == 0)


def test_directional_seminorm_fd_oracle():
    eps = 1e-3
    P = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, eps]])
    g = decompose(P)
    v = lambda x: x[:, 0] * x[:, 1]
    grad = lambda x: np.stack([x[:, 1], x[:, 0]], axis=1)
    got = directional_seminorm(P, g, grad, p=2)
    from crsobolev.quadrature import push_forward, simplex_rule

    x, w = push_forward(simplex_rule(2, 8), P)
    for i, r in enumerate(g.r):
        step = 1e-6 * g.h[i]
        fd = (v(x + step * r) - v(x - step * r)) / (2 * step)
        assert got[i] == pytest.approx(np.sqrt(np.dot(w, fd**2)), rel=1e-8)
