"""Collapsed-coordinate (Duffy) quadrature on simplices.

Rules are built from Gauss-Jacobi nodes on the unit interval, so all
weights are positive and the total-degree exactness is arbitrary.
Points are returned in barycentric coordinates; pushing a rule to a
physical simplex is a matter of ``x = lam @ vertices`` and scaling the
weights by ``|T| / |T_ref|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 30


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Quadrature rule on a reference k-simplex.

    ``bary`` has shape ``(n, k+1)``; ``weights`` sum to ``1/k!``.
    ``domain`` is ``"simplex-d"`` for a cell rule or ``"face-of-simplex-d"``
    for a rule on the (d-1)-dimensional face of a d-simplex.
    """

    domain: str
    bary: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def points(self):
        """Cartesian coordinates on the reference simplex (drop the first barycentric)."""
        return self.bary[:, 1:]

    @property
    def dim(self):
        return self.bary.shape[1] - 1

    def __len__(self):
        return len(self.weights)


def _gauss_jacobi01(n, alpha):
    """n-point rule on [0, 1] for weight (1 - t)^alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1) / 2, w / 2 ** (alpha + 1)


@lru_cache(maxsize=None)
def _collapsed(k, degree):
    if k == 0:
        return np.ones((1, 1)), np.ones(1)
    n = degree // 2 + 1
    if k == 1:
        t, w = _gauss_jacobi01(n, 0.0)
        pts = t[:, None]
        wts = w
    elif k == 2:
        a, wa = _gauss_jacobi01(n, 1.0)
        b, wb = _gauss_jacobi01(n, 0.0)
        A, B = np.meshgrid(a, b, indexing="ij")
        pts = np.stack([A, B * (1 - A)], axis=-1).reshape(-1, 2)
        wts = np.outer(wa, wb).reshape(-1)
    elif k == 3:
        a, wa = _gauss_jacobi01(n, 2.0)
        b, wb = _gauss_jacobi01(n, 1.0)
        c, wc = _gauss_jacobi01(n, 0.0)
        A, B, C = np.meshgrid(a, b, c, indexing="ij")
        pts = np.stack([A, B * (1 - A), C * (1 - A) * (1 - B)], axis=-1).reshape(-1, 3)
        wts = np.einsum("i,j,k->ijk", wa, wb, wc).reshape(-1)
    else:
        raise ValueError(f"unsupported simplex dimension {k}")
    bary = np.hstack([1 - pts.sum(axis=1, keepdims=True), pts])
    # the sum-to-one correction is where rounding would otherwise accumulate
    wts = wts * (1.0 / factorial(k)) / wts.sum()
    bary.setflags(write=False)
    wts.setflags(write=False)
    return bary, wts


def _check_degree(degree):
    if not isinstance(degree, (int, np.integer)) or degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree!r} (0..{MAX_DEGREE})")


def simplex_rule(d, degree):
    """Rule on the reference d-simplex exact for total degree ``degree``."""
    if d not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {d}")
    _check_degree(degree)
    bary, wts = _collapsed(d, int(degree))
    return QuadRule(f"simplex-{d}", bary, wts, int(degree))


def face_rule(d, degree):
    """Rule on the reference (d-1)-simplex used for faces of a d-simplex."""
    if d not in (2, 3):
        raise ValueError(f"unsupported dimension {d}")
    _check_degree(degree)
    bary, wts = _collapsed(d - 1, int(degree))
    return QuadRule(f"face-of-simplex-{d}", bary, wts, int(degree))


def monomial_integral(exponents):
    """Exact integral of ``prod x_i^a_i`` over the reference simplex.

    ``prod a_i! / (k + sum a_i)!`` with k the number of coordinates.
    """
    exponents = [int(a) for a in exponents]
    k = len(exponents)
    num = 1
    for a in exponents:
        num *= factorial(a)
    return num / factorial(k + sum(exponents))


def push_forward(rule, vertices):
    """Physical points and weights of ``rule`` on the simplex ``vertices``.

    ``vertices`` is ``(k+1, d)`` or a stack ``(m, k+1, d)``; returns
    ``(x, w)`` of shapes ``(..., n, d)`` and ``(..., n)``.  The weight scale
    is the measure ratio, computed by the caller-independent formula
    (determinant for cells, Gram determinant for faces).
    """
    from .mesh import face_measure, simplex_volume

    vertices = np.asarray(vertices, dtype=float)
    x = np.einsum("qk,...kd->...qd", rule.bary, vertices)
    k = rule.dim
    d = vertices.shape[-1]
    if k == d:
        meas = simplex_volume(vertices)
    elif k == d - 1:
        meas = face_measure(vertices)
    else:
        raise ValueError("rule dimension does not match the simplex")
    w = np.multiply.outer(np.asarray(meas) * factorial(k), rule.weights)
    return x, w
