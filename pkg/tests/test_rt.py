import numpy as np
import pytest

from conftest import REF2, REF3
from crsobolev import fields
from crsobolev.errors import UndefinedRatioError
from crsobolev.geometry import decompose
from crsobolev.meshgen import aniso_grid_2d, gen_family, kuhn_3d, unit_square
from crsobolev.mesh import SimplicialMesh
from crsobolev.rt import (
    commuting_residual,
    flux_reproduction,
    local_interpolant,
    rt_error_ratio,
    rt_interpolate,
    rt_stability_ratio,
)

X2 = fields.VectorField(
    "x2_0",
    lambda x: np.stack([x[:, 0] ** 2, 0 * x[:, 0]], axis=1),
    lambda x: np.stack([np.stack([2 * x[:, 0], 0 * x[:, 0]], 1), np.zeros((len(x), 2))], 1),
    lambda x: 2 * x[:, 0],
)


def test_x2_fluxes():
    iv = local_interpolant(REF2, X2)
    # faces opposite vertices 0, 1, 2: hypotenuse, x = 0 leg, y = 0 leg
    assert iv.fluxes == pytest.approx([1 / 3, 0.0, 0.0], abs=1e-15)


def test_x2_commuting_single():
    mesh = SimplicialMesh(REF2, np.array([[0, 1, 2]]))
    iv = rt_interpolate(mesh, X2)
    assert iv.divergence()[0] == pytest.approx(2 / 3, abs=1e-12)
    assert commuting_residual(mesh, X2, X2.div) <= 1e-12


def test_constant_reproduced():
    v = fields.vector("const_x")
    iv = local_interpolant(REF2 * [3.0, 0.01], v)
    x = np.array([[0.1, 0.001], [2.0, 0.002]])
    assert np.allclose(iv(x), [[1.0, 0.0], [1.0, 0.0]], atol=1e-12)
    mesh = unit_square(3, 3)
    assert commuting_residual(mesh, v, v.div) <= 1e-14


def test_rt0_field_reproduced(rng):
    # a global RT0 field: a + b x
    a, b = rng.standard_normal(3), rng.standard_normal()
    v = lambda x: a + b * x
    mesh = kuhn_3d(2, 2, [3])[0].mesh
    iv = rt_interpolate(mesh, v)
    x = mesh.points.mean(axis=1)
    got = iv(x, np.arange(mesh.n_elements))
    assert np.allclose(got, v(x), atol=1e-12)
    assert flux_reproduction(iv) <= 1e-12


def test_dof_system_oracle(rng):
    # solve the local dof system from scratch and compare coefficients
    P = REF3 * [1.0, 0.1, 0.01] + 0.3
    coef = rng.standard_normal(4)
    v = lambda x: coef[:3] + coef[3] * x
    iv = local_interpolant(P, v)
    x = rng.uniform(size=(5, 3)) * 0.01 + 0.3
    assert np.allclose(iv(x), v(x), atol=1e-12)


@pytest.mark.parametrize("mesh", [aniso_grid_2d(4, [4])[0].mesh, aniso_grid_2d(4, [40])[0].mesh, kuhn_3d(2, 2, [20])[0].mesh])
def test_commuting_polynomial(mesh, rng):
    for _ in range(3):
        v = fields.random_polynomial_field(mesh.dim, 3, rng)
        divmax = np.abs(v.div(mesh.points.reshape(-1, mesh.dim))).max()
        assert commuting_residual(mesh, v, v.div) <= 1e-10 * divmax


def test_stability_constant_is_one():
    v = fields.vector("const_x")
    assert rt_stability_ratio(unit_square(3, 2), v, v.jac, 2) == pytest.approx(1.0, rel=1e-12)


def test_stability_zero_undefined():
    v = fields.VectorField("z", lambda x: np.zeros_like(x), lambda x: np.zeros(x.shape + (x.shape[1],)), lambda x: 0 * x[:, 0])
    with pytest.raises(UndefinedRatioError):
        rt_stability_ratio(unit_square(2, 2), v, v.jac, 2)


def test_error_ratio_rt0_is_zero():
    v = fields.vector("const_x")
    assert rt_error_ratio(REF2, decompose(REF2), v, v.jac, v.div, 2) == 0.0


def test_error_ratio_x2_finite():
    r = rt_error_ratio(REF2, decompose(REF2), X2, X2.jac, X2.div, 2)
    assert 0 < r < 10


def test_needle_sweeps():
    v = fields.vector("sin_y_cos_x")
    w = fields.vector("sinxy_exp")
    stab, err = [], []
    for mem in gen_family("needle_2d([0.1, 0.01, 0.001, 0.0001])"):
        stab.append(rt_stability_ratio(mem.mesh, v, v.jac, 2))
        P = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, mem.param]])
        err.append(rt_error_ratio(P, decompose(P), w, w.jac, w.div, 2))
    assert max(stab) / min(stab) <= 3
    assert max(err) / min(err) <= 3
