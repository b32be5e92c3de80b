import numpy as np
import pytest

from crsobolev import fields
from crsobolev.errors import SingularSystemError
from crsobolev.meshgen import gen_family, unit_square
from crsobolev.norms import build_face_weights
from crsobolev.poisson import assemble_poisson, solve_poisson
from crsobolev.sobolev import sobolev_constant_l2

ONE = fields.scalar("one")


def test_zero_load():
    u, rec = solve_poisson(assemble_poisson(unit_square(4, 4), "CR0", fields.scalar("zero")))
    assert np.all(u.coeffs == 0)
    assert rec.energy == 0 and rec.energy_over_f == 0 and rec.l2_over_energy == 0


@pytest.mark.parametrize("space", ["CR0", "DCCR"])
def test_energy_identity_and_poincare(space):
    mesh = unit_square(8, 8)
    u, rec = solve_poisson(assemble_poisson(mesh, space, fields.scalar("sin_cos")))
    assert rec.energy_identity_gap <= 1e-10
    assert rec.residual <= 1e-10
    cp = sobolev_constant_l2(mesh, space).constant
    assert rec.u_l2 <= cp * rec.energy + 1e-9


def test_self_convergence():
    coarse = solve_poisson(assemble_poisson(unit_square(16, 16), "CR0", ONE))[1].u_l2
    fine = solve_poisson(assemble_poisson(unit_square(128, 128), "CR0", ONE))[1].u_l2
    assert coarse == pytest.approx(fine, rel=0.02)


@pytest.mark.parametrize("space", ["CR0", "DCCR"])
def test_needle_stability(space):
    q = [solve_poisson(assemble_poisson(m.mesh, space, ONE))[1].energy_over_f
         for m in gen_family("needle_2d([1, 0.1, 0.01, 0.001])")]
    assert max(q) / min(q) <= 2


def test_singular():
    mesh = unit_square(2, 2)
    W = build_face_weights(mesh, 2)
    W.kappa[:] = 0.0
    with pytest.raises(SingularSystemError):
        solve_poisson(assemble_poisson(mesh, "DCCR", ONE, weights=W))


def test_bad_space():
    with pytest.raises(ValueError):
        assemble_poisson(unit_square(2, 2), "CR", ONE)


def test_cr0_single_entry(square):
    s = assemble_poisson(square, "CR0", ONE)
    assert s.matrix.shape == (1, 1)
    assert s.matrix[0, 0] == pytest.approx(8.0, rel=1e-14)  # ||grad theta_F||^2


def test_dccr_constant_energy(square):
    s = assemble_poisson(square, "DCCR", ONE)
    W = build_face_weights(square, 2)
    c = np.ones(s.matrix.shape[0])
    bnd = square.faces.boundary
    assert c @ (s.matrix @ c) == pytest.approx(np.sum(W.kappa[bnd] * square.faces.measures[bnd]), rel=1e-14)


@pytest.mark.parametrize("space", ["CR0", "DCCR"])
def test_symmetric(space, rng):
    mesh = gen_family("aniso_grid_2d(5, [37])")[0].mesh
    A = assemble_poisson(mesh, space, ONE).matrix
    assert abs(A - A.T).max() <= 1e-13 * abs(A).max()


NEEDLE = [(e, s) for e in (1.0, 0.1, 0.01, 0.001) for s in ("CR0", "DCCR")]


@pytest.mark.parametrize(
    "eps,space",
    [pytest.param(*c, marks=pytest.mark.xfail(strict=True, reason="below float64 representability: "
                                               "||A|| eps ||u|| / ||b|| is 4e-9 here"))
     if c == (0.001, "DCCR") else c for c in NEEDLE],
)
def test_residual_contract(eps, space):
    mesh = gen_family(f"needle_2d([{eps}])")[0].mesh
    _, rec = solve_poisson(assemble_poisson(mesh, space, ONE))
    assert rec.residual <= 1e-10


@pytest.mark.parametrize("eps,space", NEEDLE)
def test_residual_at_rounding_floor(eps, space):
    import scipy.sparse.linalg as spla

    mesh = gen_family(f"needle_2d([{eps}])")[0].mesh
    s = assemble_poisson(mesh, space, ONE)
    u, rec = solve_poisson(s)
    floor = spla.norm(s.matrix, 1) * np.finfo(float).eps * np.linalg.norm(u.coeffs, 1) / np.linalg.norm(s.load)
    assert rec.residual <= floor
    assert rec.backward_error <= 1e-15
