import csv
import io

from crsobolev.cli import main
from crsobolev.mesh import parse_mesh


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_gen_mesh_and_geometry_report(tmp_path, capsys):
    assert main(["gen-mesh", "--family", "needle_2d([1, 0.01])", "--out", str(tmp_path / "m")]) == 0
    files = sorted((tmp_path / "m").glob("*.mesh"))
    assert len(files) == 2
    mesh = parse_mesh(files[1].read_text())
    out = tmp_path / "geo.csv"
    assert main(["geometry-report", "--mesh", str(files[1]), "--out", str(out)]) == 0
    r = rows(out)
    assert len(r) == mesh.n_elements
    assert all(x["det_check"] == "pass" and x["norm_checks"] == "pass" for x in r)
    assert {x["cond_tag"] for x in r} == {"COND1_2D"}


def test_3d_geometry_report(tmp_path):
    main(["gen-mesh", "--family", "kuhn_3d(1, 1, [10])", "--out", str(tmp_path)])
    out = tmp_path / "g.csv"
    main(["geometry-report", "--mesh", str(next(tmp_path.glob("*.mesh"))), "--out", str(out)])
    r = rows(out)
    assert len(r) == 60 and all(x["det_check"] == "pass" for x in r)
    assert "h_3" in r[0]


def test_sweeps(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["projection-sweep", "--out", str(out)]) == 0
    ratios = [float(x["ratio"]) for x in rows(out)]
    assert len(ratios) == 5 and max(ratios) / min(ratios) <= 3
    assert main(["rt-sweep", "--eps", "1,0.01", "--out", str(out)]) == 0
    assert len(rows(out)) == 2
    assert main(["sobolev-sweep", "--family", "needle_2d([1, 0.1])", "--space", "cr0", "--out", str(out)]) == 0
    r = rows(out)
    assert [x["space"] for x in r] == ["CR0", "CR0"]


def test_identity_check(capsys):
    assert main(["identity-check", "--family", "aniso_grid_2d(2, [2, 20])", "--samples", "50"]) == 0
    lines = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert float(lines["ibp_residual_scaled"]) <= 1e-11
    assert float(lines["jump_product_residual"]) <= 1e-13


def test_poisson(tmp_path):
    main(["gen-mesh", "--family", "aniso_grid_2d(4, [4])", "--out", str(tmp_path)])
    out = tmp_path / "u.csv"
    assert main(["poisson", "--mesh", str(next(tmp_path.glob("*.mesh"))), "--out", str(out)]) == 0
    (r,) = rows(out)
    assert float(r["energy_identity_gap"]) <= 1e-10


def test_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.mesh"
    bad.write_text("dim 2\nvertices 1\n0 0\nelements 1\n0 1 2\n")
    assert main(["geometry-report", "--mesh", str(bad)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["sobolev-sweep", "--family", "needle_2d([1])", "--q", "4", "--p", "2"]) == 2
