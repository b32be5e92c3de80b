"""Parameterised mesh families for the sweeps.

A family spec is a string such as ``"needle_2d([1, 0.1, 0.01])"`` or
``"kuhn_3d(2, 2, [2, 20])"``; arguments are Python literals.  Every
generator returns a list of :class:`FamilyMember`.
"""

from __future__ import annotations

import ast
import itertools
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import semi_regularity
from .mesh import SimplicialMesh, check_conformity


@dataclass(eq=False)
class FamilyMember:
    """One mesh of a family with its parameter and analytic aspect ratio."""

    family: str
    param: object
    mesh: SimplicialMesh
    aspect: float

    @cached_property
    def gamma(self):
        """Per-element ``H_T/h_T``."""
        return semi_regularity(self.mesh)[0]

    @property
    def gamma_max(self):
        return float(self.gamma.max())

    @property
    def h(self):
        return self.mesh.h


def _grid_2d(x, y):
    nx, ny = len(x) - 1, len(y) - 1
    X, Y = np.meshgrid(x, y, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    v00, v10 = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    v01, v11 = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    tris = np.concatenate([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])
    return verts, tris


def unit_square(nx, ny):
    """``[0,1]^2`` with ``nx x ny`` cells, each cut into two right triangles."""
    return SimplicialMesh(*_grid_2d(np.linspace(0, 1, nx + 1), np.linspace(0, 1, ny + 1)))


def aniso_grid_2d(nx, ny_list):
    ny_list = [ny_list] if np.isscalar(ny_list) else ny_list
    return [
        FamilyMember("aniso_grid_2d", (nx, ny), unit_square(nx, ny), max(nx, ny) / min(nx, ny)) for ny in ny_list
    ]


def needle_2d(eps_list, n=2):
    """Unit square with ``n`` columns and ``round(n/eps)`` rows: cells of aspect ``1/eps``."""
    eps_list = [eps_list] if np.isscalar(eps_list) else eps_list
    out = []
    for eps in eps_list:
        if not 0 < eps <= 1:
            raise ValueError(f"needle parameter must lie in (0, 1], got {eps}")
        ny = max(1, int(round(n / eps)))
        out.append(FamilyMember("needle_2d", eps, unit_square(n, ny), ny / n))
    return out


_KUHN = [list(p) for p in itertools.permutations(range(3))]


def unit_cube(nx, ny, nz):
    """``[0,1]^3`` with ``nx x ny x nz`` boxes, each cut into six Kuhn tetrahedra."""
    x, y, z = (np.linspace(0, 1, n + 1) for n in (nx, ny, nz))
    Z, Y, X = np.meshgrid(z, y, x, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    idx = np.arange(len(verts)).reshape(nz + 1, ny + 1, nx + 1)
    base = idx[:-1, :-1, :-1].ravel()
    step = np.array([1, nx + 1, (nx + 1) * (ny + 1)])
    tets = []
    for perm in _KUHN:
        a = base
        b = a + step[perm[0]]
        c = b + step[perm[1]]
        e = c + step[perm[2]]
        tets.append(np.column_stack([a, b, c, e]))
    return SimplicialMesh(verts, np.concatenate(tets))


def kuhn_3d(nx, ny, nz):
    """Kuhn cubes; list arguments are zipped, scalars broadcast."""
    args = [a if isinstance(a, (list, tuple)) else [a] for a in (nx, ny, nz)]
    n = max(len(a) for a in args)
    args = [a * n if len(a) == 1 else a for a in args]
    if any(len(a) != n for a in args):
        raise ValueError("kuhn_3d list arguments must have equal length")
    return [
        FamilyMember("kuhn_3d", (a, b, c), unit_cube(a, b, c), max(a, b, c) / min(a, b, c))
        for a, b, c in zip(*args)
    ]


def sliver(eps):
    return SimplicialMesh(
        np.array([[0.0, 0, 0], [1, 0, 0], [0.5, eps, eps**2], [0.5, -eps, eps**2]]), np.array([[0, 1, 2, 3]])
    )


def sliver_3d(eps_list):
    """Single slivers whose flatness grows without bound as ``eps -> 0``."""
    eps_list = [eps_list] if np.isscalar(eps_list) else eps_list
    return [FamilyMember("sliver_3d", eps, sliver(eps), 1.0 / (2 * eps)) for eps in eps_list]


def lshape(n):
    """``(-1,1)^2`` minus ``[0,1) x (-1,0]`` on a ``2n x 2n`` grid."""
    t = np.linspace(-1, 1, 2 * n + 1)
    verts, tris = _grid_2d(t, t)
    cent = verts[tris].mean(axis=1)
    tris = tris[~((cent[:, 0] > 0) & (cent[:, 1] < 0))]
    used, inv = np.unique(tris, return_inverse=True)
    return SimplicialMesh(verts[used], inv.reshape(tris.shape))


def lshape_2d(n):
    ns = [n] if np.isscalar(n) else n
    return [FamilyMember("lshape_2d", k, lshape(k), 1.0) for k in ns]


FAMILIES = {
    "aniso_grid_2d": aniso_grid_2d,
    "needle_2d": needle_2d,
    "kuhn_3d": kuhn_3d,
    "sliver_3d": sliver_3d,
    "lshape_2d": lshape_2d,
}

_SPEC = re.compile(r"^\s*([a-z_0-9]+)\s*\((.*)\)\s*$", re.S)


def parse_family(spec):
    """Split ``"name(args)"`` into the name and a tuple of literal arguments."""
    m = _SPEC.match(spec)
    if not m or m.group(1) not in FAMILIES:
        raise ValueError(f"invalid family spec {spec!r}; expected one of {sorted(FAMILIES)} as name(args)")
    try:
        args = ast.literal_eval(f"({m.group(2)},)") if m.group(2).strip() else ()
    except (ValueError, SyntaxError) as exc:
        raise ValueError(f"invalid arguments in family spec {spec!r}") from exc
    return m.group(1), args


def gen_family(spec, check=True):
    """Generate a family from a spec string or ``(name, args)`` pair."""
    name, args = parse_family(spec) if isinstance(spec, str) else spec
    try:
        members = FAMILIES[name](*args)
    except TypeError as exc:
        raise ValueError(f"invalid arguments for {name}: {exc}") from exc
    if check:
        for mem in members:
            check_conformity(mem.mesh)
    return members
