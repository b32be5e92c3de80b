"""Penalised CR discretisation of ``-Delta u = f`` with homogeneous Dirichlet data.

``a_h(u, v) = sum_T int grad u . grad v + sum_F kappa_F |F| mean[[u]] mean[[v]]``
with ``kappa_F`` the ``p = 2`` penalty.  CR0 imposes the boundary condition
strongly (the jump terms vanish); DCCR imposes it through the boundary
penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import SingularSystemError
from .norms import build_face_weights, lq_norm, operators
from .spaces import build_dofs

POISSON_SPACES = ("CR0", "DCCR")


@dataclass(eq=False)
class PoissonSystem:
    matrix: object
    load: np.ndarray
    dofmap: object
    weights: object
    f: object
    f_l2: float

    def energy_norm(self, u):
        c = u.coeffs if hasattr(u, "coeffs") else np.asarray(u)
        return math.sqrt(max(float(c @ (self.matrix @ c)), 0.0))


@dataclass
class StabilityRecord:
    energy: float
    f_l2: float
    u_l2: float
    energy_over_f: float
    l2_over_energy: float
    residual: float
    backward_error: float
    energy_identity_gap: float


def assemble_poisson(mesh, space, f, weights=None, degree=6):
    """Matrix of ``a_h`` and load ``int f v`` (quadrature of degree ``degree``)."""
    space = space.upper()
    if space not in POISSON_SPACES:
        raise ValueError(f"space must be one of {POISSON_SPACES}")
    dm = build_dofs(mesh, space)
    weights = build_face_weights(mesh, 2.0) if weights is None else weights
    A = operators(dm, 2).vh_gram(weights)
    ops = operators(dm, degree)
    pts = np.einsum("nk,mkd->mnd", ops.rule.bary, mesh.points).reshape(-1, mesh.dim)
    fv = np.asarray(f(pts), dtype=float)
    load = ops.values.T @ (ops.weights * fv)
    f_l2 = float(np.sqrt(np.sum(ops.weights * fv**2)))
    return PoissonSystem(A, load, dm, weights, f, f_l2)


def solve_poisson(system, refine=5):
    """Solve by sparse LU and report the stability quantities.

    ``residual`` is ``||b - A u|| / ||b||`` evaluated in extended precision;
    ``backward_error`` is the 1-norm ``||b - A u|| / (||A|| ||u|| + ||b||)``.

    ``energy_over_f = |u_h|_E / ||f||`` and ``l2_over_energy = ||u_h|| / |u_h|_E``
    (both 0 for the zero solution).
    """
    A, b = system.matrix, system.load
    dm = system.dofmap
    if dm.n_dofs == 0:
        raise SingularSystemError("no degrees of freedom")
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise SingularSystemError(f"Poisson matrix for {dm.space} is singular: {exc}") from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("solver breakdown: non-finite solution")
    # refinement with residuals in extended precision; anisotropy makes the
    # float64 residual itself too inaccurate to certify
    A_ld, b_ld = A.astype(np.longdouble), b.astype(np.longdouble)
    nb = float(np.linalg.norm(b))
    for _ in range(refine):
        r = b_ld - A_ld @ x.astype(np.longdouble)
        if nb == 0 or float(np.linalg.norm(r)) <= 1e-14 * nb:
            break
        x = x + lu.solve(r.astype(float))
    r = b_ld - A_ld @ x.astype(np.longdouble)
    residual = float(np.linalg.norm(r)) / nb if nb > 0 else float(np.linalg.norm(r))
    scale = spla.norm(A, 2 if A.shape[0] < 3 else 1) * float(np.linalg.norm(x, 1)) + float(np.linalg.norm(b, 1))
    backward = float(np.linalg.norm(r.astype(float), 1) / scale) if scale > 0 else 0.0
    u = dm.function(x)
    energy = math.sqrt(max(float(x.astype(np.longdouble) @ (A_ld @ x.astype(np.longdouble))), 0.0))
    u_l2 = lq_norm(u, 2)
    work = float(b_ld @ x.astype(np.longdouble))
    gap = abs(energy**2 - work) / energy**2 if energy > 0 else 0.0
    rec = StabilityRecord(
        energy=energy,
        f_l2=system.f_l2,
        u_l2=u_l2,
        energy_over_f=energy / system.f_l2 if system.f_l2 > 0 else 0.0,
        l2_over_energy=u_l2 / energy if energy > 0 else 0.0,
        residual=residual,
        backward_error=backward,
        energy_identity_gap=gap,
    )
    return u, rec
