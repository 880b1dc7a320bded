"""Doubled P1 spaces: DOF layout, interpolation, point evaluation."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from cutnitsche.cutcell import classify
from cutnitsche.levelset import LevelSet
from cutnitsche.mesh import build_mesh
from cutnitsche.space import (FieldPair, build_spaces, evaluate, interpolate,
                              interpolate_pair)


def test_cut_nodes_carry_two_dofs(circle_layout):
    mesh, topo, layout = circle_layout(2)
    cut_nodes = np.unique(mesh.elements[topo.cut_ids])
    assert np.all(layout.node_dof_minus[cut_nodes] >= 0)
    assert np.all(layout.node_dof_plus[cut_nodes] >= 0)
    assert layout.n_total == layout.n_minus + layout.n_plus
    assert layout.n_free == layout.n_total - layout.dirichlet.sum()


def test_minus_space_supported_near_inclusion(circle_layout):
    mesh, topo, layout = circle_layout(2)
    covered = np.zeros(mesh.n_nodes, dtype=bool)
    covered[mesh.elements[topo.elements_minus()].ravel()] = True
    assert np.array_equal(layout.node_dof_minus >= 0, covered)
    # the inclusion stays away from the outer boundary
    assert np.all(layout.node_dof_minus[mesh.boundary_node] == -1)


def test_dirichlet_on_outer_side_only(circle_layout):
    mesh, topo, layout = circle_layout(2)
    assert layout.outer_side() == "plus"
    bdofs = layout.node_dof_plus[mesh.boundary_node] + layout.n_minus
    assert np.all(layout.dirichlet[bdofs])
    assert layout.dirichlet.sum() == mesh.boundary_node.sum()
    assert np.array_equal(np.flatnonzero(~layout.dirichlet), layout.free_dofs)


def test_uncut_space_is_single_sided():
    mesh = build_mesh(1)
    ls = LevelSet(phi=lambda x: (x[..., 0] - 10.0) ** 2 + x[..., 1] ** 2 - 1.0)
    layout = build_spaces(mesh, classify(mesh, ls))
    assert layout.n_minus == 0
    assert layout.n_plus == mesh.n_nodes
    assert layout.n_free == mesh.n_nodes - mesh.boundary_node.sum()


def test_interpolate_reproduces_data(circle_layout):
    mesh, topo, layout = circle_layout(1)
    const = interpolate(layout, "plus", lambda x: np.full(x.shape[:-1], 3.5))
    assert np.all(const == 3.5)
    f = lambda x: x[..., 0] + 2.0 * x[..., 1]
    field = interpolate_pair(layout, f, f)
    np.testing.assert_allclose(field.minus,
                               f(mesh.nodes[layout.dof_node_minus]), atol=1e-15)
    # interpolation of a linear has the exact gradient everywhere
    for p in ([0.6, 0.1], [-0.6, 0.3], [0.5, -0.52]):
        val, grad = evaluate(field, "plus", np.asarray(p))
        np.testing.assert_allclose(grad, [1.0, 2.0], atol=1e-12)
        np.testing.assert_allclose(val, p[0] + 2.0 * p[1], atol=1e-12)


def test_evaluate_minus_inside_inclusion(circle_layout):
    _, _, layout = circle_layout(1)
    f = lambda x: x[..., 0] ** 2
    field = interpolate_pair(layout, f, f)
    val, _ = evaluate(field, "minus", np.array([0.05, 0.0]))
    assert abs(val) < 0.05  # P1 interpolant of x^2 near the origin is small
    with pytest.raises(ValueError):
        evaluate(field, "minus", np.array([0.9, 0.9]))
    with pytest.raises(ValueError):
        evaluate(field, "plus", np.array([1.5, 0.0]))


@given(st.integers(min_value=0, max_value=10_000))
def test_projection_identity(seed):
    mesh = build_mesh(1)
    ls = LevelSet(phi=lambda x: (x[..., 0] - 10.0) ** 2 + x[..., 1] ** 2 - 1.0)
    layout = build_spaces(mesh, classify(mesh, ls))
    rng = np.random.default_rng(seed)
    field = FieldPair(layout, np.zeros(0), rng.standard_normal(layout.n_plus))
    # evaluating at the nodes recovers the coefficients exactly
    for node in rng.integers(0, mesh.n_nodes, size=5):
        val, _ = evaluate(field, "plus", mesh.nodes[node])
        assert np.isclose(val, field.plus[layout.node_dof_plus[node]], atol=1e-12)


def test_field_continuity_across_edges(circle_layout):
    mesh, _, layout = circle_layout(1)
    rng = np.random.default_rng(7)
    field = FieldPair(layout, rng.standard_normal(layout.n_minus),
                      rng.standard_normal(layout.n_plus))
    bound = np.abs(field.plus).max() / mesh.h  # crude Lipschitz constant
    eps = 1e-9
    for p in ([0.51, 0.2], [-0.3, 0.62], [0.0, -0.52]):
        p = np.asarray(p)
        va, _ = evaluate(field, "plus", p - eps)
        vb, _ = evaluate(field, "plus", p + eps)
        assert abs(va - vb) <= 10.0 * bound * eps


def test_field_pair_round_trip(circle_layout):
    _, _, layout = circle_layout(1)
    rng = np.random.default_rng(11)
    vec = rng.standard_normal(layout.n_total)
    field = FieldPair.from_global(layout, vec)
    np.testing.assert_array_equal(field.to_global(), vec)
    with pytest.raises(ValueError):
        FieldPair.from_global(layout, vec[:-1])
    nv = field.node_values("minus")
    has = layout.node_dof_minus >= 0
    assert np.all(np.isnan(nv[~has]))
    assert not np.any(np.isnan(nv[has]))
