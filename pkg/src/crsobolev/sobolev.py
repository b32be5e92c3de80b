"""Discrete Sobolev constants ``sup ||phi||_{L^q} / |phi|_{p,V_h}`` and family sweeps.

For ``q = p = 2`` the supremum is the square root of the largest eigenvalue
of ``M x = lam A x`` with ``M`` the mass matrix and ``A`` the Gram matrix of
``|.|_{2,V_h}^2``.  It is found with Lanczos on ``A^{-1} M`` using a sparse
LU factorisation of ``A``.  For other exponents a preconditioned ascent
returns a certified lower bound (the best quotient it found).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import InadmissibleExponentsError, SingularSystemError
from .meshgen import gen_family
from .norms import build_face_weights, lq_norm, operators
from .projections import admissible
from .spaces import build_dofs

SOBOLEV_SPACES = ("DCCR", "CR", "CR0")
SMALL = 8  # below this many dofs ARPACK cannot run; solve densely


@dataclass
class SobolevResult:
    constant: float
    eigenvalue: float
    extremal: object
    residual: float
    iterations: int
    method: str


def _factor(A, space):
    try:
        return spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise SingularSystemError(f"the V_h Gram matrix of {space} is singular: {exc}") from exc


def _check_definite(A, lu, space, tol=1e-12):
    """Raise if ``lam_min(A) < tol * lam_max(A)``."""
    n = A.shape[0]
    if n <= SMALL:
        ev = np.linalg.eigvalsh(A.toarray())
        lo, hi = ev[0], ev[-1]
    else:
        op = spla.LinearOperator(A.shape, matvec=lu.solve, dtype=float)
        lo = 1.0 / spla.eigsh(op, k=1, which="LA", return_eigenvectors=False, tol=1e-6)[0]
        # Gershgorin bound first; the Lanczos estimate only when it is inconclusive
        hi = float(abs(A).sum(axis=1).max())
        if not lo > tol * hi:
            hi = spla.eigsh(A, k=1, which="LA", return_eigenvectors=False, tol=1e-6)[0]
    if not lo > tol * hi:
        raise SingularSystemError(
            f"the V_h Gram matrix of {A.shape[0]} {space} dofs is numerically singular "
            f"(lambda_min={lo:.3e}, lambda_max={hi:.3e})"
        )
    return lo, hi


def gram_pair(dofmap, weights=None):
    """``(M, A)``: mass matrix and ``|.|_{2,V_h}^2`` Gram matrix."""
    if weights is None:
        weights = build_face_weights(dofmap.mesh, 2.0)
    ops = operators(dofmap, 2)
    return ops.mass, ops.vh_gram(weights)


def sobolev_constant_l2(mesh, space, weights=None, method="sparse", tol=1e-9, max_refine=200):
    """``sup ||phi||_{L^2} / |phi|_{2,V_h}`` over ``space`` on ``mesh``.

    ``method="sparse"`` (default) runs shift-free Lanczos in the
    ``A``-inner product; ``method="dense"`` solves the full generalised
    eigenproblem and is meant as an independent check on small meshes.
    The eigen-residual ``||Mx - lam Ax|| / ||Mx||`` is driven below ``tol``
    with extra inverse-iteration sweeps when needed.
    """
    space = space.upper()
    if space not in SOBOLEV_SPACES:
        raise ValueError(f"space must be one of {SOBOLEV_SPACES}")
    dm = build_dofs(mesh, space)
    if dm.n_dofs == 0:
        raise SingularSystemError(f"{space} has no degrees of freedom on this mesh")
    M, A = gram_pair(dm, weights)
    n = dm.n_dofs
    if method == "dense" or n <= SMALL:
        ev = np.linalg.eigvalsh(A.toarray())
        if not ev[0] > 1e-12 * ev[-1]:
            raise SingularSystemError(
                f"the V_h Gram matrix of {n} {space} dofs is numerically singular "
                f"(lambda_min={ev[0]:.3e}, lambda_max={ev[-1]:.3e})"
            )
        try:
            lam, vec = sla.eigh(M.toarray(), A.toarray(), subset_by_index=[n - 1, n - 1])
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"the V_h Gram matrix of {space} is not positive definite") from exc
        lam, x, its, meth = float(lam[0]), vec[:, 0], 0, "dense"
    elif method == "sparse":
        lu = _factor(A, space)
        _check_definite(A, lu, space)
        Ainv = spla.LinearOperator(A.shape, matvec=lu.solve, dtype=float)
        lam_, vec = spla.eigsh(M, k=1, M=A, Minv=Ainv, which="LA", tol=1e-12)
        lam, x, its, meth = float(lam_[0]), vec[:, 0], 0, "lanczos"
        res = np.linalg.norm(M @ x - lam * (A @ x)) / np.linalg.norm(M @ x)
        while res > tol and its < max_refine:
            y = lu.solve(M @ x)
            x = y / math.sqrt(y @ (A @ y))
            lam = float(x @ (M @ x))
            res = np.linalg.norm(M @ x - lam * (A @ x)) / np.linalg.norm(M @ x)
            its += 1
    else:
        raise ValueError(f"unknown method {method!r}")
    res = float(np.linalg.norm(M @ x - lam * (A @ x)) / np.linalg.norm(M @ x))
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return SobolevResult(math.sqrt(lam), lam, dm.function(x), res, its, meth)


# ------------------------------------------------------------------ general exponents


def check_exponents(d, q, p):
    """Validate ``(q, p)`` for the discrete inequality."""
    if not (1 < p < np.inf and 1 < q < np.inf):
        raise InadmissibleExponentsError("p and q must lie in (1, inf)")
    if q > p:
        raise InadmissibleExponentsError(
            f"q={q} > p={p}: the inequality is only established for q <= p without extra regularity"
        )
    if not admissible(d, p, q):
        raise InadmissibleExponentsError(f"W^(1,{p}) does not embed in L^{q} in dimension {d}")


class QuotientObjective:
    """``R(x) = ||phi_x||_{L^q} / |phi_x|_{p,V_h}`` with analytic gradients of ``log R``."""

    def __init__(self, dofmap, q, p, weights=None, degree=None):
        self.q, self.p = float(q), float(p)
        self.weights = build_face_weights(dofmap.mesh, p) if weights is None else weights
        deg = degree if degree is not None else (int(q) if float(q).is_integer() and q % 2 == 0 else 8)
        ops = operators(dofmap, max(deg, 2))
        self.E, self.w = ops.values, ops.weights
        ops2 = operators(dofmap, 2)
        self.G = ops2.grad
        self.J = ops2.jump
        self.d = dofmap.mesh.dim
        self.vol = dofmap.mesh.volumes
        self.kf = self.weights.kappa * dofmap.mesh.faces.measures

    def norms(self, x):
        u = self.E @ x
        nq = float(np.sum(self.w * np.abs(u) ** self.q)) ** (1 / self.q)
        g = (self.G @ x).reshape(-1, self.d)
        gn = np.linalg.norm(g, axis=1)
        j = self.J @ x
        np_ = float(np.sum(self.vol * gn**self.p) + np.sum(self.kf * np.abs(j) ** self.p)) ** (1 / self.p)
        return nq, np_

    def value(self, x):
        nq, np_ = self.norms(x)
        return nq / np_

    def log_grad(self, x):
        """``(R(x), grad log R(x))``."""
        q, p = self.q, self.p
        u = self.E @ x
        nq_q = float(np.sum(self.w * np.abs(u) ** q))
        gq = self.E.T @ (self.w * np.abs(u) ** (q - 2) * u) / nq_q if nq_q > 0 else np.zeros_like(x)
        g = (self.G @ x).reshape(-1, self.d)
        gn = np.linalg.norm(g, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(gn > 0, gn ** (p - 2), 0.0)
        j = self.J @ x
        aj = np.abs(j)
        with np.errstate(divide="ignore", invalid="ignore"):
            jf = np.where(aj > 0, aj ** (p - 2), 0.0)
        np_p = float(np.sum(self.vol * gn**p) + np.sum(self.kf * aj**p))
        gp = (self.G.T @ ((self.vol * fac)[:, None] * g).reshape(-1) + self.J.T @ (self.kf * jf * j)) / np_p
        return (nq_q ** (1 / q)) / (np_p ** (1 / p)), gq - gp


@dataclass
class AscentResult:
    constant: float
    extremal: object
    iterations: int
    restarts: int
    history: list = field(default_factory=list)


def sobolev_constant_lq_lp(mesh, space, q, p, weights=None, restarts=8, seed=0, max_iter=500, rtol=1e-8, x0=None):
    """Lower bound for ``sup ||phi||_{L^q} / |phi|_{p,V_h}`` by preconditioned ascent.

    The search direction is the gradient of ``log R`` preconditioned by the
    ``p = 2`` Gram matrix.  A backtracking line search halves the step from
    ``|x|/|d|`` and only accepts increases, so every restart is monotone.
    A restart stops once the relative gain over the last 5 steps is below
    ``rtol``.  ``x0`` adds a user-provided start to the random ones.
    """
    space = space.upper()
    if space not in SOBOLEV_SPACES:
        raise ValueError(f"space must be one of {SOBOLEV_SPACES}")
    check_exponents(mesh.dim, q, p)
    dm = build_dofs(mesh, space)
    obj = QuotientObjective(dm, q, p, weights)
    _, A = gram_pair(dm)
    lu = _factor(A, space)
    rng = np.random.default_rng(seed)
    starts = [rng.standard_normal(dm.n_dofs) for _ in range(restarts)]
    if x0 is not None:
        starts.insert(0, np.asarray(x0, dtype=float))
    best, best_x, total, history = -np.inf, None, 0, []
    for x in starts:
        r, gr = obj.log_grad(x)
        trace = [r]
        for _ in range(max_iter):
            d = lu.solve(gr)
            dn = np.linalg.norm(d)
            if dn == 0:
                break
            step = np.linalg.norm(x) / dn
            accepted = False
            while step * dn > 1e-14 * np.linalg.norm(x):
                xn = x + step * d
                rn = obj.value(xn)
                if rn > r:
                    accepted = True
                    break
                step *= 0.5
            total += 1
            if not accepted:
                break
            x = xn / np.linalg.norm(xn)
            r, gr = obj.log_grad(x)
            trace.append(r)
            if len(trace) > 5 and (trace[-1] - trace[-6]) <= rtol * trace[-1]:
                break
        history.append(trace)
        if r > best:
            best, best_x = r, x
    return AscentResult(float(best), dm.function(best_x), total, len(starts), history)


# ------------------------------------------------------------------ sweeps


@dataclass
class SweepRow:
    family: str
    param: str
    h: float
    max_aspect: float
    max_gamma: float
    space: str
    q: float
    p: float
    constant: float
    iterations: int
    residual: float


@dataclass
class SweepReport:
    rows: list

    @property
    def constants(self):
        return np.array([r.constant for r in self.rows])

    @property
    def spread(self):
        """``max / min`` of the constants."""
        c = self.constants
        return float(c.max() / c.min())

    def to_csv(self):
        buf = io.StringIO()
        names = list(SweepRow.__dataclass_fields__)
        wr = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        wr.writeheader()
        for r in self.rows:
            wr.writerow(asdict(r))
        return buf.getvalue()


def sweep_family(spec, q, p, space, members=None, **kwargs):
    """Sobolev constants for every member of a family.

    ``q = p = 2`` uses the eigensolver; other exponents the ascent.
    """
    members = gen_family(spec) if members is None else members
    rows = []
    for mem in members:
        if q == 2 and p == 2:
            res = sobolev_constant_l2(mem.mesh, space, **kwargs)
            c, its, resid = res.constant, res.iterations, res.residual
        else:
            res = sobolev_constant_lq_lp(mem.mesh, space, q, p, **kwargs)
            c, its, resid = res.constant, res.iterations, float("nan")
        rows.append(
            SweepRow(mem.family, str(mem.param), mem.h, mem.aspect, mem.gamma_max, space.upper(), q, p, c, its, resid)
        )
    return SweepReport(rows)


def p0_dual_ratio(mesh, q, p, element=0):
    """``||psi||_{L^{p'}} / ||psi||_{L^{q'}}`` for the indicator ``psi`` of one element."""
    dm = build_dofs(mesh, "P0")
    c = np.zeros(dm.n_dofs)
    c[element] = 1.0
    psi = dm.function(c)
    pd, qd = p / (p - 1.0), q / (q - 1.0)
    return lq_norm(psi, pd, degree=0) / lq_norm(psi, qd, degree=0)


def negative_control(ns, q, p):
    """Log-log slope of the P0 dual-norm ratio against ``h`` on uniform squares.

    Returns ``(slope, hs, ratios)``; the expected slope is ``d (1/q - 1/p)``.
    """
    from .meshgen import unit_square

    hs, ratios = [], []
    for n in ns:
        mesh = unit_square(n, n)
        hs.append(mesh.h)
        ratios.append(p0_dual_ratio(mesh, q, p))
    slope = float(np.polyfit(np.log(hs), np.log(ratios), 1)[0])
    return slope, np.array(hs), np.array(ratios)
