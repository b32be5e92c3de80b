import numpy as np
import pytest

from conftest import REF2, REF3, random_simplex
from crsobolev.geometry import decompose
from crsobolev.meshgen import aniso_grid_2d, kuhn_3d
from crsobolev.spaces import (
    apply_cr_dof,
    apply_rt_dof,
    build_dofs,
    cr_basis,
    eval_cr_basis,
    eval_rt_basis,
    interpolate_scalar,
    piola_push,
    rt_basis,
)


def test_cr_basis_values():
    c = np.array([[1 / 3, 1 / 3]])
    assert eval_cr_basis(REF2, 1, c)[0] == pytest.approx(1 / 3)
    # vertex p_i gives 1 - d, the opposite face midpoint gives 1
    assert eval_cr_basis(REF2, 1, REF2[[1]])[0] == pytest.approx(-1.0)
    assert eval_cr_basis(REF2, 1, np.array([[0.0, 0.5]]))[0] == pytest.approx(1.0)
    assert eval_cr_basis(REF3, 0, REF3[[0]])[0] == pytest.approx(-2.0)


def test_cr_dof_of_x():
    assert apply_cr_dof(REF2, 0, lambda x: x[:, 0]) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("d", [2, 3])
def test_duality_random(rng, d):
    worst_cr = worst_rt = 0.0
    for _ in range(50):
        P = random_simplex(rng, d, 1e6)
        for j in range(d + 1):
            cr = cr_basis(P, j)
            rt = rt_basis(P, j)
            for i in range(d + 1):
                worst_cr = max(worst_cr, abs(apply_cr_dof(P, i, cr) - (i == j)))
                worst_rt = max(worst_rt, abs(apply_rt_dof(P, i, rt) - (i == j)))
    assert worst_cr <= 1e-12 and worst_rt <= 1e-12


def test_rt_basis_physical_agrees():
    P = np.array([[0.2, 0.1], [1.3, 0.4], [0.5, 1.7]])
    x = np.array([[0.6, 0.7], [0.4, 0.3]])
    from crsobolev.spaces import to_barycentric

    lam = to_barycentric(P, x)
    for i in range(3):
        assert np.allclose(np.asarray(rt_basis(P, i).at_bary(lam), dtype=float), eval_rt_basis(P, i, x), atol=1e-15)


@pytest.mark.parametrize("P", [REF2, np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 0, 1]]), REF3 * [3.0, 0.01, 0.5]])
def test_piola_preserves_fluxes(P):
    geo = decompose(P)
    d = P.shape[1]
    ref = geo.reference_vertices
    vhat = lambda xh: np.stack([xh[:, 0] ** 2 + 1.0, *(xh[:, k] * xh[:, 0] for k in range(1, d))], axis=1)
    v = piola_push(geo, vhat)
    sgn = np.sign(np.linalg.det(geo.A))
    phys = P[list(geo.perm)]
    for i in range(d + 1):
        assert apply_rt_dof(phys, i, v) == pytest.approx(sgn * apply_rt_dof(ref, i, vhat), rel=1e-12, abs=1e-13)
    # div v = div vhat / det A, checked by central differences at the centroid
    xc = phys.mean(axis=0, keepdims=True)
    xh = geo.phi_inv(xc)
    step = 1e-5 * geo.h_T

    def div(f, x0, s):
        return sum((f(x0 + s * e)[0, k] - f(x0 - s * e)[0, k]) / (2 * s) for k, e in enumerate(np.eye(d)))

    assert div(v, xc, step) == pytest.approx(div(vhat, xh, 1e-5) / np.linalg.det(geo.A), rel=1e-6)


def test_piola_zero():
    geo = decompose(REF2 * [2.0, 0.5])
    v = piola_push(geo, lambda xh: np.zeros_like(xh))
    assert np.all(v(np.array([[0.3, 0.1]])) == 0)


def test_dof_counts(square):
    counts = {s: build_dofs(square, s).n_dofs for s in ("DCCR", "CR", "CR0", "RT0", "P0", "DC1")}
    assert counts == {"DCCR": 6, "CR": 5, "CR0": 1, "RT0": 5, "P0": 2, "DC1": 6}
    cr0 = build_dofs(square, "CR0")
    assert len(cr0.constrained) == 4


def test_cr_is_continuous_at_face_midpoints():
    mesh = aniso_grid_2d(3, [7])[0].mesh
    f = lambda x: np.sin(3 * x[:, 0]) + x[:, 1] ** 2
    for space in ("CR", "CR0"):
        u = interpolate_scalar(build_dofs(mesh, space), f)
        fm = u.face_means()
        inner = mesh.faces.interior
        assert np.allclose(fm[inner, 0], fm[inner, 1], atol=1e-13)
        if space == "CR0":
            assert np.allclose(fm[~inner, 0], 0.0, atol=1e-14)


def test_rt_normal_continuity_3d():
    mesh = kuhn_3d(2, 2, [5])[0].mesh
    dm = build_dofs(mesh, "RT0")
    u = dm.function(np.random.default_rng(1).standard_normal(dm.n_dofs))
    from crsobolev.spaces import face_quadrature, face_traces

    _, _, lam = face_quadrature(mesh, 2)
    tr = face_traces(u, lam)
    inner = mesh.faces.interior
    n = mesh.faces.normals[inner]
    a = np.einsum("fnd,fd->fn", tr[inner, 0], n)
    b = np.einsum("fnd,fd->fn", tr[inner, 1], n)
    assert np.allclose(a, b, atol=1e-11 * np.abs(a).max())


def test_bad_space(square):
    with pytest.raises(ValueError):
        build_dofs(square, "P2")
