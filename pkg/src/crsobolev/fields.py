"""Built-in smooth test fields with analytic derivatives.

Scalar fields expose ``value`` and ``grad``; vector fields expose ``value``,
``jac`` (rows are component gradients) and ``div``.  All take points of
shape ``(n, d)``; the 2D formulas read only the first two coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ScalarField:
    name: str
    value: Callable
    grad: Callable

    def __call__(self, x):
        return self.value(np.atleast_2d(x))


@dataclass(frozen=True)
class VectorField:
    name: str
    value: Callable
    jac: Callable
    div: Callable

    def __call__(self, x):
        return self.value(np.atleast_2d(x))


def _stack(*cols):
    return np.stack(cols, axis=-1)


def _zeros(x):
    return np.zeros(len(x))


def _grad2(x, gx, gy):
    g = np.zeros_like(x, dtype=float)
    g[:, 0], g[:, 1] = gx, gy
    return g


SCALARS = {
    "zero": ScalarField("zero", _zeros, lambda x: np.zeros_like(x, dtype=float)),
    "one": ScalarField("one", lambda x: np.ones(len(x)), lambda x: np.zeros_like(x, dtype=float)),
    "x": ScalarField("x", lambda x: x[:, 0].copy(), lambda x: _grad2(x, 1.0, 0.0)),
    "xy": ScalarField("xy", lambda x: x[:, 0] * x[:, 1], lambda x: _grad2(x, x[:, 1], x[:, 0])),
    "sin_cos": ScalarField(
        "sin_cos",
        lambda x: np.sin(x[:, 0]) * np.cos(x[:, 1]),
        lambda x: _grad2(x, np.cos(x[:, 0]) * np.cos(x[:, 1]), -np.sin(x[:, 0]) * np.sin(x[:, 1])),
    ),
    "sin_sum": ScalarField(
        "sin_sum",
        lambda x: np.sin(x[:, 0] + x[:, 1]),
        lambda x: _grad2(x, np.cos(x[:, 0] + x[:, 1]), np.cos(x[:, 0] + x[:, 1])),
    ),
    "bubble": ScalarField(
        "bubble",
        lambda x: x[:, 0] * (1 - x[:, 0]) * x[:, 1] * (1 - x[:, 1]),
        lambda x: _grad2(
            x,
            (1 - 2 * x[:, 0]) * x[:, 1] * (1 - x[:, 1]),
            x[:, 0] * (1 - x[:, 0]) * (1 - 2 * x[:, 1]),
        ),
    ),
}


def _jac2(a, b, c, e):
    return np.stack([np.stack([a, b], axis=-1), np.stack([c, e], axis=-1)], axis=-2)


VECTORS = {
    "const_x": VectorField(
        "const_x",
        lambda x: _stack(np.ones(len(x)), np.zeros(len(x))),
        lambda x: np.zeros((len(x), 2, 2)),
        _zeros,
    ),
    "x2": VectorField(
        "x2",
        lambda x: _stack(x[:, 0] ** 2, np.zeros(len(x))),
        lambda x: _jac2(2 * x[:, 0], 0 * x[:, 0], 0 * x[:, 0], 0 * x[:, 0]),
        lambda x: 2 * x[:, 0],
    ),
    "sin_y_cos_x": VectorField(
        "sin_y_cos_x",
        lambda x: _stack(np.sin(x[:, 1]), np.cos(x[:, 0])),
        lambda x: _jac2(0 * x[:, 0], np.cos(x[:, 1]), -np.sin(x[:, 0]), 0 * x[:, 0]),
        _zeros,
    ),
    "sinxy_exp": VectorField(
        "sinxy_exp",
        lambda x: _stack(np.sin(x[:, 0] * x[:, 1]), np.exp(x[:, 0])),
        lambda x: _jac2(
            x[:, 1] * np.cos(x[:, 0] * x[:, 1]), x[:, 0] * np.cos(x[:, 0] * x[:, 1]), np.exp(x[:, 0]), 0 * x[:, 0]
        ),
        lambda x: x[:, 1] * np.cos(x[:, 0] * x[:, 1]),
    ),
}


def polynomial_field(coeffs):
    """Vector field with polynomial components in 2D or 3D.

    ``coeffs`` is a list (one per component) of dicts mapping exponent
    tuples to coefficients, e.g. ``[{(2, 0): 1.0}, {}]`` for ``(x^2, 0)``.
    """
    comps = [{tuple(int(a) for a in k): float(v) for k, v in c.items()} for c in coeffs]
    d = len(comps)

    def mono(x, e):
        out = np.ones(len(x))
        for k, a in enumerate(e):
            if a:
                out = out * x[:, k] ** a
        return out

    def dmono(x, e, j):
        if e[j] == 0:
            return np.zeros(len(x))
        e2 = list(e)
        e2[j] -= 1
        return e[j] * mono(x, e2)

    def value(x):
        return np.stack([sum((c * mono(x, e) for e, c in comp.items()), np.zeros(len(x))) for comp in comps], axis=-1)

    def jac(x):
        rows = [
            np.stack([sum((c * dmono(x, e, j) for e, c in comp.items()), np.zeros(len(x))) for j in range(d)], axis=-1)
            for comp in comps
        ]
        return np.stack(rows, axis=-2)

    def div(x):
        return np.einsum("nii->n", jac(x))

    return VectorField("polynomial", value, jac, div)


def random_polynomial_field(d, degree, rng):
    """Polynomial vector field with standard normal coefficients up to total ``degree``."""
    from itertools import product

    exps = [e for e in product(range(degree + 1), repeat=d) if sum(e) <= degree]
    return polynomial_field([{e: rng.standard_normal() for e in exps} for _ in range(d)])


def scalar(name):
    try:
        return SCALARS[name]
    except KeyError:
        raise ValueError(f"unknown scalar field {name!r}; available: {sorted(SCALARS)}") from None


def vector(name):
    try:
        return VECTORS[name]
    except KeyError:
        raise ValueError(f"unknown vector field {name!r}; available: {sorted(VECTORS)}") from None
