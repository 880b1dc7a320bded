"""Tests of the structural diagnostics: patch areas, coercivity probe,
interpolation profile, and the discrete extension operator."""
import dataclasses

import numpy as np
import pytest
import scipy.sparse

from cutnitsche.assembly import assemble_vnorm_gram, build_system
from cutnitsche.cutcell import classify
from cutnitsche.diagnostics import (build_extension, coercivity_probe,
                                    discrete_extension,
                                    interpolation_error_profile,
                                    patch_area_ratio, run_diagnostics)
from cutnitsche.harness import RunConfig, make_problem
from cutnitsche.levelset import LevelSet, make_circle
from cutnitsche.mesh import build_mesh
from cutnitsche.problems import example_circle, patch_problem
from cutnitsche.space import build_spaces, interpolate_pair


# ---------------------------------------------------------------------------
# patch areas

def test_patch_ratio_uncut_mesh():
    # interface far away: every element is whole, best patch area is
    # h^2/2 against h_T^2 = 2 h^2
    mesh = build_mesh(2)
    all_minus = LevelSet(phi=lambda x: 1.0 - (x[..., 0] - 10.0) ** 2 - x[..., 1] ** 2)
    topo = classify(mesh, all_minus)
    res = patch_area_ratio(mesh, topo, "minus")
    assert np.isclose(res.ratio, 0.25, atol=1e-12)
    assert 0 <= res.node < mesh.n_nodes

    empty = patch_area_ratio(mesh, topo, "plus")
    assert empty.ratio == float("inf")
    assert empty.node == -1


def test_patch_ratio_circle(circle_classified):
    mesh, topo = circle_classified(2)
    for side in ("minus", "plus"):
        res = patch_area_ratio(mesh, topo, side)
        assert np.isclose(res.ratio, 0.25, atol=1e-12)
        assert topo.node_sign[res.node] * (-1 if side == "minus" else 1) >= 0


# ---------------------------------------------------------------------------
# coercivity probe

def test_coercivity_probe_diagonal_pencils():
    a = scipy.sparse.diags([2.0, 2.0, 2.0]).tocsr()
    gram = scipy.sparse.identity(3, format="csr")
    assert np.isclose(coercivity_probe(a, gram, dense=True), 2.0)
    assert np.isclose(coercivity_probe(a, gram, dense=False), 2.0)

    a2 = scipy.sparse.diags([1.0, 5.0]).tocsr()
    g2 = scipy.sparse.diags([2.0, 1.0]).tocsr()
    assert np.isclose(coercivity_probe(a2, g2, dense=True), 0.5)


def test_sampled_probe_overestimates_dense():
    a = scipy.sparse.diags(np.arange(1.0, 31.0)).tocsr()
    gram = scipy.sparse.identity(30, format="csr")
    exact = coercivity_probe(a, gram, dense=True)
    sampled = coercivity_probe(a, gram, n_samples=50, dense=False)
    assert np.isclose(exact, 1.0)
    assert sampled >= exact - 1e-12


def test_system_coercivity_level_one():
    config = RunConfig(example="1", level=1)
    mesh = build_mesh(1)
    ls, spec = make_problem(config)
    topo = classify(mesh, ls)
    layout = build_spaces(mesh, topo)
    system = build_system(mesh, topo, layout, spec)
    gram = assemble_vnorm_gram(mesh, topo, layout, spec)
    free = layout.free_dofs
    q = coercivity_probe(system.matrix, gram[free][:, free], dense=True)
    assert 0.0 < q <= 1.0 + 1e-9
    assert np.isclose(q, 0.9999976, atol=1e-5)


# ---------------------------------------------------------------------------
# interpolation profile

def test_interpolation_profile_circle():
    ls, spec = example_circle(1.0, 1e4)
    table = interpolation_error_profile(ls, spec, levels=(1, 2))
    assert table.columns == ("level", "h", "vanorm", "scale", "ratio")
    ratios = [row[4] for row in table.rows]
    assert np.allclose(ratios, [0.8746, 0.8012], rtol=2e-3)
    assert all(row[3] > 0.0 for row in table.rows)


def test_interpolation_profile_linear_solution():
    # zero Hessian: the scale vanishes and the interpolation error is
    # solver-level noise
    ls, spec = patch_problem()
    table = interpolation_error_profile(ls, spec, levels=(2,))
    level, h, vanorm, scale, ratio = table.rows[0]
    assert scale == 0.0
    assert ratio == 0.0
    assert vanorm < 1e-9


def test_interpolation_profile_needs_second_derivatives():
    ls, spec = example_circle(1.0, 1e4)
    bare = dataclasses.replace(spec, hess_minus=None)
    with pytest.raises(ValueError, match="second derivatives"):
        interpolation_error_profile(ls, bare, levels=(1,))


# ---------------------------------------------------------------------------
# discrete extension

@pytest.fixture(scope="module")
def plus_inclusion():
    mesh = build_mesh(2)
    ls = make_circle(inclusion_side="plus")
    topo = classify(mesh, ls)
    layout = build_spaces(mesh, topo)
    return mesh, ls, topo, layout


def test_extension_matrix_structure(plus_inclusion):
    mesh, ls, topo, layout = plus_inclusion
    op = build_extension(mesh, topo, ls, layout)
    assert op.matrix.shape == (mesh.n_nodes, layout.n_plus)

    keep = layout.node_dof_plus >= 0
    dist = np.abs(ls.value(mesh.nodes))
    for z in np.flatnonzero(keep):
        row = op.matrix.getrow(z)
        assert row.nnz == 1
        assert row.data[0] == 1.0
        assert row.indices[0] == layout.node_dof_plus[z]
    # beyond the tube the extension is identically zero
    for z in np.flatnonzero(~keep & (dist > 0.1)):
        assert op.matrix.getrow(z).nnz == 0
    # inside the tube each row is a damped average: weights in [0, 1]
    sums = np.asarray(op.matrix.sum(axis=1)).ravel()
    cand = ~keep & (dist <= 0.1)
    assert np.all(sums[cand] >= -1e-12)
    assert np.all(sums[cand] <= 1.0 + 1e-12)


def test_extension_of_plus_field(plus_inclusion):
    mesh, ls, topo, layout = plus_inclusion

    def f(x):
        return 1.0 + x[..., 0] + 2.0 * x[..., 1]

    field = interpolate_pair(layout, f, f)
    w, ratio = discrete_extension(field, mesh, topo, ls)
    assert w.shape == (mesh.n_nodes,)
    keep = layout.node_dof_plus >= 0
    assert np.allclose(w[keep], f(mesh.nodes[keep]), atol=1e-12)
    assert 0.0 < ratio < 5.0

    zero = interpolate_pair(layout, lambda x: 0.0 * x[..., 0],
                            lambda x: 0.0 * x[..., 0])
    w0, r0 = discrete_extension(zero, mesh, topo, ls)
    assert np.all(w0 == 0.0)
    assert r0 == 0.0


# ---------------------------------------------------------------------------
# combined report

def _blocks(report):
    out = {}
    for chunk in report.strip("\n").split("\n\n"):
        lines = chunk.splitlines()
        name = lines[0].lstrip("# ")
        header = lines[1].split(",")
        rows = [line.split(",") for line in lines[2:]]
        out[name] = (header, rows)
    return out


def test_run_diagnostics_report():
    report = run_diagnostics(RunConfig(example="1"),
                             patch_levels=(1, 2),
                             coercivity_levels=(1,),
                             interpolation_levels=(1, 2),
                             extension_levels=(2,))
    blocks = _blocks(report)
    assert set(blocks) == {"patch_area_ratio", "coercivity", "interpolation",
                           "discrete_extension", "h1_plus_vs_physical"}

    header, rows = blocks["patch_area_ratio"]
    assert header == ["level", "side", "min_ratio", "argmin_node"]
    assert len(rows) == 4
    assert all(float(r[2]) > 0.1 for r in rows)
    level2 = [float(r[2]) for r in rows if r[0] == "2"]
    assert np.allclose(level2, 0.25, atol=1e-9)

    header, rows = blocks["coercivity"]
    assert rows[0][:3] == ["1", "143", "dense"]
    assert np.isclose(float(rows[0][3]), 0.9999976, atol=1e-5)

    header, rows = blocks["interpolation"]
    ratios = [float(r[4]) for r in rows]
    assert np.allclose(ratios, [0.8746, 0.8012], rtol=2e-3)

    header, rows = blocks["discrete_extension"]
    assert rows[0][:2] == ["2", "20"]
    assert np.isclose(float(rows[0][2]), 1.1733, rtol=2e-3)

    header, rows = blocks["h1_plus_vs_physical"]
    assert 0.0 < float(rows[0][2]) < 10.0


def test_run_diagnostics_rejects_flower():
    with pytest.raises(ValueError, match="circle"):
        run_diagnostics(RunConfig(example="2"))
