"""Doubled piecewise-linear spaces on the overlapping cut meshes.

Each side (minus/plus) owns a continuous P1 space on the union of its
elements; nodes of cut elements therefore carry two degrees of freedom.
Global DOFs are the minus block followed by the plus block.  Dirichlet
nodes are the boundary nodes of the side whose subdomain reaches the
outer boundary; they are eliminated from the solved system.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cutcell import CutTopology
from .mesh import Mesh

__all__ = ["SpaceLayout", "FieldPair", "build_spaces", "interpolate", "evaluate"]


@dataclass(frozen=True)
class SpaceLayout:
    mesh: Mesh
    topo: CutTopology
    node_dof_minus: np.ndarray   # (n_nodes,) dof id or -1
    node_dof_plus: np.ndarray
    dof_node_minus: np.ndarray   # (n_minus,) node id per dof
    dof_node_plus: np.ndarray
    in_minus: np.ndarray         # bool per element
    in_plus: np.ndarray
    dirichlet: np.ndarray        # bool over the global dof vector
    free_dofs: np.ndarray
    full_to_free: np.ndarray     # (n_total,) position among free dofs or -1

    @property
    def n_minus(self) -> int:
        return self.dof_node_minus.shape[0]

    @property
    def n_plus(self) -> int:
        return self.dof_node_plus.shape[0]

    @property
    def n_total(self) -> int:
        return self.n_minus + self.n_plus

    @property
    def n_free(self) -> int:
        return self.free_dofs.shape[0]

    def node_dof(self, side: str) -> np.ndarray:
        return self.node_dof_minus if side == "minus" else self.node_dof_plus

    def global_dofs(self, side: str, nodes) -> np.ndarray:
        """Global dof ids for the given nodes on one side (-1 if absent)."""
        if side == "minus":
            return self.node_dof_minus[nodes]
        d = self.node_dof_plus[nodes]
        return np.where(d >= 0, d + self.n_minus, -1)

    def outer_side(self) -> str:
        return "plus" if self.topo.levelset.inclusion_side == "minus" else "minus"


@dataclass
class FieldPair:
    """Coefficient vectors of a discrete two-sided field."""

    layout: SpaceLayout
    minus: np.ndarray
    plus: np.ndarray

    @classmethod
    def zeros(cls, layout: SpaceLayout) -> "FieldPair":
        return cls(layout, np.zeros(layout.n_minus), np.zeros(layout.n_plus))

    @classmethod
    def from_global(cls, layout: SpaceLayout, vec: np.ndarray) -> "FieldPair":
        if vec.shape != (layout.n_total,):
            raise ValueError(f"expected global vector of length {layout.n_total}")
        return cls(layout, vec[: layout.n_minus].copy(), vec[layout.n_minus:].copy())

    def to_global(self) -> np.ndarray:
        return np.concatenate([self.minus, self.plus])

    def side(self, side: str) -> np.ndarray:
        return self.minus if side == "minus" else self.plus

    def node_values(self, side: str) -> np.ndarray:
        """Per-node values with NaN at nodes not carrying the side."""
        dofs = self.layout.node_dof(side)
        out = np.full(self.layout.mesh.n_nodes, np.nan)
        has = dofs >= 0
        out[has] = self.side(side)[dofs[has]]
        return out


def build_spaces(mesh: Mesh, topo: CutTopology) -> SpaceLayout:
    """DOF layout of the doubled space for a classified mesh."""
    in_minus = topo.elem_side <= 0
    in_plus = topo.elem_side >= 0
    node_minus = np.zeros(mesh.n_nodes, dtype=bool)
    node_minus[mesh.elements[in_minus].ravel()] = True
    node_plus = np.zeros(mesh.n_nodes, dtype=bool)
    node_plus[mesh.elements[in_plus].ravel()] = True

    dof_node_minus = np.flatnonzero(node_minus)
    dof_node_plus = np.flatnonzero(node_plus)
    node_dof_minus = np.full(mesh.n_nodes, -1, dtype=np.int64)
    node_dof_minus[dof_node_minus] = np.arange(dof_node_minus.shape[0])
    node_dof_plus = np.full(mesh.n_nodes, -1, dtype=np.int64)
    node_dof_plus[dof_node_plus] = np.arange(dof_node_plus.shape[0])

    n_minus = dof_node_minus.shape[0]
    n_total = n_minus + dof_node_plus.shape[0]
    dirichlet = np.zeros(n_total, dtype=bool)
    outer = "plus" if topo.levelset.inclusion_side == "minus" else "minus"
    if outer == "minus":
        bmask = mesh.boundary_node[dof_node_minus]
        dirichlet[:n_minus][bmask] = True
    else:
        bmask = mesh.boundary_node[dof_node_plus]
        dirichlet[n_minus:][bmask] = True

    free_dofs = np.flatnonzero(~dirichlet)
    full_to_free = np.full(n_total, -1, dtype=np.int64)
    full_to_free[free_dofs] = np.arange(free_dofs.shape[0])

    return SpaceLayout(
        mesh=mesh,
        topo=topo,
        node_dof_minus=node_dof_minus,
        node_dof_plus=node_dof_plus,
        dof_node_minus=dof_node_minus,
        dof_node_plus=dof_node_plus,
        in_minus=in_minus,
        in_plus=in_plus,
        dirichlet=dirichlet,
        free_dofs=free_dofs,
        full_to_free=full_to_free,
    )


def interpolate(layout: SpaceLayout, side: str, f) -> np.ndarray:
    """Nodal interpolation of a callable onto one side's space."""
    nodes = layout.mesh.nodes[layout.dof_node_minus if side == "minus" else layout.dof_node_plus]
    return np.asarray(f(nodes), dtype=float)


def interpolate_pair(layout: SpaceLayout, f_minus, f_plus) -> FieldPair:
    return FieldPair(
        layout,
        interpolate(layout, "minus", f_minus),
        interpolate(layout, "plus", f_plus),
    )


def _barycentric(coords, x):
    d1 = coords[1] - coords[0]
    d2 = coords[2] - coords[0]
    det = d1[0] * d2[1] - d1[1] * d2[0]
    r = x - coords[0]
    l1 = (r[0] * d2[1] - r[1] * d2[0]) / det
    l2 = (d1[0] * r[1] - d1[1] * r[0]) / det
    return np.array([1.0 - l1 - l2, l1, l2])


def evaluate(field: FieldPair, side: str, x, tol: float = 1e-12):
    """Value and gradient of one side's field at a point.

    The point must lie in an element carrying the requested side;
    otherwise a ValueError is raised.
    """
    layout = field.layout
    mesh = layout.mesh
    in_side = layout.in_minus if side == "minus" else layout.in_plus
    x = np.asarray(x, dtype=float)
    if not (-1.0 - tol <= x[0] <= 1.0 + tol and -1.0 - tol <= x[1] <= 1.0 + tol):
        raise ValueError(f"point {x.tolist()} lies outside the computational domain")
    coeffs = field.side(side)
    dofmap = layout.node_dof(side)
    for ring in (0, 1):
        for t in mesh.candidate_elements(x, ring):
            if not in_side[t]:
                continue
            conn = mesh.elements[t]
            lam = _barycentric(mesh.nodes[conn], x)
            if np.all(lam >= -tol / mesh.h):
                dofs = dofmap[conn]
                vals = coeffs[dofs]
                value = float(lam @ vals)
                grad = vals @ mesh.grads[t]
                return value, grad
    raise ValueError(f"point {x.tolist()} lies outside the {side}-side mesh")
