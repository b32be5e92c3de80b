"""Command line interface: ``crsobolev <command> ...``.

Every command writes CSV to ``--out`` (or stdout) except ``gen-mesh``,
which writes mesh files, and ``identity-check``, which prints one line per
identity.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import fields
from .geometry import decompose, decomposition_bounds
from .mesh import format_mesh, parse_mesh
from .meshgen import gen_family, needle_2d
from .norms import build_face_weights, ibp_scaled_residual, jump_product_residual
from .poisson import assemble_poisson, solve_poisson
from .projections import projection_error_ratio
from .rt import commuting_residual, flux_reproduction, rt_error_ratio, rt_interpolate, rt_stability_ratio
from .sobolev import sweep_family

DEFAULT_EPS = "1,0.1,0.01,0.001,0.0001"


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _emit(rows, header, out):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    _write(buf.getvalue(), out)


def _write(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def needle_triangle(eps):
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, eps]])


def cmd_gen_mesh(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, mem in enumerate(gen_family(args.family)):
        path = out / f"{mem.family}_{k:02d}.mesh"
        path.write_text(f"# {mem.family} param={mem.param}\n" + format_mesh(mem.mesh))
        print(f"{path}\t{mem.mesh.n_elements} elements\tmax_gamma={mem.gamma_max:.6g}")


def cmd_geometry_report(args):
    mesh = parse_mesh(Path(args.mesh).read_text())
    d = mesh.dim
    rows = []
    for e in range(mesh.n_elements):
        geo = decompose(mesh.points[e], mesh.elements[e])
        b = decomposition_bounds(geo)
        det_ok = abs(b["det_ref"] / b["det_ref_expected"] - 1) <= 1e-10
        norm_ok = (
            b["norm_tilde"] <= b["norm_tilde_bound"] + 1e-10
            and b["cond_tilde"] <= b["cond_tilde_bound"] + 1e-8
            and b["vertex_error"] <= 1e-10 * geo.h_T
            and b["norm_hat"] <= geo.h_T
        )
        rows.append(
            [e, geo.cond, *(f"{h:.17g}" for h in geo.h), f"{geo.h_T:.17g}", f"{geo.H_T:.17g}",
             f"{geo.gamma:.17g}", "pass" if det_ok else "fail", "pass" if norm_ok else "fail"]
        )
    header = ["element_id", "cond_tag", *(f"h_{i + 1}" for i in range(d)), "h_T", "H_T", "gamma", "det_check", "norm_checks"]
    _emit(rows, header, args.out)


def cmd_projection_sweep(args):
    v = fields.scalar(args.field)
    rows = []
    for eps in _floats(args.eps):
        P = needle_triangle(eps)
        r = projection_error_ratio(P, decompose(P), v, v.grad, args.p, args.q)
        rows.append([eps, 1.0 / eps, f"{r:.17g}"])
    _emit(rows, ["epsilon", "aspect", "ratio"], args.out)


def cmd_rt_sweep(args):
    v = fields.vector(args.field)
    rows = []
    for mem in needle_2d(_floats(args.eps), n=args.columns):
        P = needle_triangle(mem.param)
        stab = rt_stability_ratio(mem.mesh, v, v.jac, args.p)
        err = rt_error_ratio(P, decompose(P), v, v.jac, v.div, args.p)
        rows.append([mem.param, f"{mem.gamma_max:.17g}", f"{stab:.17g}", f"{err:.17g}"])
    _emit(rows, ["epsilon", "gamma_max", "stability_ratio", "error_ratio"], args.out)


def cmd_identity_check(args):
    rng = np.random.default_rng(args.seed)
    worst = {"ibp": 0.0, "commuting": 0.0, "flux": 0.0}
    for mem in gen_family(args.family):
        mesh = mem.mesh
        W = build_face_weights(mesh, args.p)
        worst["ibp"] = max(worst["ibp"], ibp_scaled_residual(mesh, W, "DC1"))
        v = fields.random_polynomial_field(mesh.dim, 3, rng)
        divmax = float(np.max(np.abs(v.div(mesh.points.reshape(-1, mesh.dim))))) or 1.0
        worst["commuting"] = max(worst["commuting"], commuting_residual(mesh, v, v.div) / divmax)
        worst["flux"] = max(worst["flux"], flux_reproduction(rt_interpolate(mesh, v)))
    jp = 0.0
    for _ in range(args.samples):
        d = int(rng.integers(2, 4))
        n = rng.standard_normal(d)
        n /= np.linalg.norm(n)
        om = rng.uniform()
        jp = max(jp, jump_product_residual(rng.standard_normal((4, d)), rng.standard_normal(4), n, (om, 1 - om),
                                           rng.standard_normal((4, d)), rng.standard_normal(4)))
    print(f"ibp_residual_scaled\t{worst['ibp']:.3e}")
    print(f"commuting_residual_scaled\t{worst['commuting']:.3e}")
    print(f"flux_reproduction_rel\t{worst['flux']:.3e}")
    print(f"jump_product_residual\t{jp:.3e}")


def cmd_sobolev_sweep(args):
    rep = sweep_family(args.family, args.q, args.p, args.space)
    _write(rep.to_csv(), args.out)


def cmd_poisson(args):
    mesh = parse_mesh(Path(args.mesh).read_text())
    f = fields.scalar(args.f)
    _, rec = solve_poisson(assemble_poisson(mesh, args.space, f))
    d = rec.__dict__
    _emit([[f"{d[k]:.17g}" for k in d]], list(d), args.out)


def build_parser():
    ap = argparse.ArgumentParser(prog="crsobolev", description="Discrete Sobolev and interpolation experiments on anisotropic simplicial meshes.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-mesh", help="write the meshes of a family")
    g.add_argument("--family", required=True, help='e.g. "needle_2d([1, 0.1])"')
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen_mesh)

    g = sub.add_parser("geometry-report", help="per-element decomposition report")
    g.add_argument("--mesh", required=True)
    g.add_argument("--out")
    g.set_defaults(func=cmd_geometry_report)

    g = sub.add_parser("projection-sweep", help="projection-error ratio on needle triangles")
    g.add_argument("--eps", default=DEFAULT_EPS)
    g.add_argument("--p", type=float, default=2.0)
    g.add_argument("--q", type=float, default=2.0)
    g.add_argument("--field", default="sin_cos", choices=sorted(fields.SCALARS))
    g.add_argument("--out")
    g.set_defaults(func=cmd_projection_sweep)

    g = sub.add_parser("rt-sweep", help="RT stability and error ratios over the needle family")
    g.add_argument("--eps", default=DEFAULT_EPS)
    g.add_argument("--p", type=float, default=2.0)
    g.add_argument("--field", default="sinxy_exp", choices=sorted(fields.VECTORS))
    g.add_argument("--columns", type=int, default=2)
    g.add_argument("--out")
    g.set_defaults(func=cmd_rt_sweep)

    g = sub.add_parser("identity-check", help="maximum residuals of the exact identities")
    g.add_argument("--family", default="aniso_grid_2d(4, [4, 40, 400])")
    g.add_argument("--p", type=float, default=2.0)
    g.add_argument("--samples", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_identity_check)

    g = sub.add_parser("sobolev-sweep", help="discrete Sobolev constants over a family")
    g.add_argument("--family", required=True)
    g.add_argument("--q", type=float, default=2.0)
    g.add_argument("--p", type=float, default=2.0)
    g.add_argument("--space", default="CR0", type=str.upper, choices=["CR0", "CR", "DCCR"])
    g.add_argument("--out")
    g.set_defaults(func=cmd_sobolev_sweep)

    g = sub.add_parser("poisson", help="solve the penalised CR Poisson problem")
    g.add_argument("--mesh", required=True)
    g.add_argument("--space", default="CR0", type=str.upper, choices=["CR0", "DCCR"])
    g.add_argument("--f", default="one", choices=sorted(fields.SCALARS))
    g.add_argument("--out")
    g.set_defaults(func=cmd_poisson)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # downstream reader closed early, e.g. `| head`
        sys.stdout = open(os.devnull, "w")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
