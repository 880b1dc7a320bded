"""Uniform background triangulations of the square (-1, 1)^2.

The mesh is never fitted to an interface: it is a structured grid of
``n x n`` square cells, each split into two triangles along the
lower-left to upper-right diagonal.  Refinement levels follow
``h = 2**-(level + 3/2)`` with ``n = ceil(2 / h)`` cells per side, so the
actual grid spacing ``2 / n`` is at most the nominal one.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

MIN_LEVEL = 1
MAX_LEVEL = 8

__all__ = ["Mesh", "build_mesh", "node_patch", "dump_mesh"]


@dataclass(frozen=True)
class Mesh:
    """Triangulation data with precomputed P1 geometry.

    Nodes lie on an ``(n+1) x (n+1)`` grid in row-major order (x fastest).
    Cell ``(ix, iy)`` owns elements ``2*(iy*n + ix)`` (lower-right triangle)
    and ``2*(iy*n + ix) + 1`` (upper-left triangle); both are oriented
    counter-clockwise.
    """

    level: int
    n_cells: int
    h: float                  # actual grid spacing, 2 / n_cells
    h_nominal: float          # 2**-(level + 3/2)
    nodes: np.ndarray         # (n_nodes, 2)
    elements: np.ndarray      # (n_elems, 3) node ids, CCW
    edges: np.ndarray         # (n_edges, 2) node ids, smaller first
    edge_elems: np.ndarray    # (n_edges, 2) element ids, -1 on boundary
    edge_lengths: np.ndarray  # (n_edges,)
    boundary_node: np.ndarray  # (n_nodes,) bool
    areas: np.ndarray         # (n_elems,)
    grads: np.ndarray         # (n_elems, 3, 2) gradients of the P1 basis
    node_elem_ptr: np.ndarray  # CSR offsets for node -> element adjacency
    node_elem_ids: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elems(self) -> int:
        return self.elements.shape[0]

    @property
    def h_elem(self) -> float:
        """Element diameter (longest edge); uniform over the mesh."""
        return self.h * np.sqrt(2.0)

    def element_coords(self, elems=None) -> np.ndarray:
        if elems is None:
            return self.nodes[self.elements]
        return self.nodes[self.elements[elems]]

    def locate_cell(self, x) -> tuple[int, int]:
        """Grid cell containing ``x``, clamped to the grid."""
        n = self.n_cells
        ix = min(max(int((x[0] + 1.0) / self.h), 0), n - 1)
        iy = min(max(int((x[1] + 1.0) / self.h), 0), n - 1)
        return ix, iy

    def candidate_elements(self, x, ring: int = 0) -> list[int]:
        """Elements whose cell is within ``ring`` cells of the one holding x."""
        n = self.n_cells
        ix, iy = self.locate_cell(x)
        out = []
        for jy in range(max(iy - ring, 0), min(iy + ring, n - 1) + 1):
            for jx in range(max(ix - ring, 0), min(ix + ring, n - 1) + 1):
                base = 2 * (jy * n + jx)
                out.extend((base, base + 1))
        return out


def build_mesh(level: int) -> Mesh:
    """Build the uniform criss-aligned triangulation for a refinement level."""
    if not isinstance(level, (int, np.integer)):
        raise ValueError(f"level must be an integer, got {level!r}")
    if not MIN_LEVEL <= level <= MAX_LEVEL:
        raise ValueError(f"level must be in [{MIN_LEVEL}, {MAX_LEVEL}], got {level}")
    h_nominal = 2.0 ** -(level + 1.5)
    n = ceil(2.0 / h_nominal)
    h = 2.0 / n

    ii = np.arange(n + 1)
    xs = -1.0 + ii * h
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(ix, iy):
        return iy * (n + 1) + ix

    cx, cy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    cx = cx.ravel()
    cy = cy.ravel()
    v00 = nid(cx, cy)
    v10 = nid(cx + 1, cy)
    v01 = nid(cx, cy + 1)
    v11 = nid(cx + 1, cy + 1)
    # diagonal runs v00 -> v11 in every cell
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    elements = np.empty((2 * n * n, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper

    coords = nodes[elements]
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    twice_area = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    areas = 0.5 * twice_area
    # grad(lambda_i) = perp(p_{i+2} - p_{i+1}) / (2A), perp(v) = (-vy, vx)
    grads = np.empty((elements.shape[0], 3, 2))
    for i in range(3):
        e = coords[:, (i + 2) % 3] - coords[:, (i + 1) % 3]
        grads[:, i, 0] = -e[:, 1] / twice_area
        grads[:, i, 1] = e[:, 0] / twice_area

    edges, edge_elems = _edge_adjacency(elements)
    edge_vec = nodes[edges[:, 1]] - nodes[edges[:, 0]]
    edge_lengths = np.hypot(edge_vec[:, 0], edge_vec[:, 1])

    gx = np.tile(ii, n + 1)
    gy = np.repeat(ii, n + 1)
    boundary_node = (gx == 0) | (gx == n) | (gy == 0) | (gy == n)

    node_elem_ptr, node_elem_ids = _node_adjacency(elements, nodes.shape[0])

    return Mesh(
        level=level,
        n_cells=n,
        h=h,
        h_nominal=h_nominal,
        nodes=nodes,
        elements=elements,
        edges=edges,
        edge_elems=edge_elems,
        edge_lengths=edge_lengths,
        boundary_node=boundary_node,
        areas=areas,
        grads=grads,
        node_elem_ptr=node_elem_ptr,
        node_elem_ids=node_elem_ids,
    )


def _edge_adjacency(elements: np.ndarray):
    ne = elements.shape[0]
    locals_ = np.stack(
        [elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]], axis=1
    ).reshape(-1, 2)
    locals_sorted = np.sort(locals_, axis=1)
    edges, inverse = np.unique(locals_sorted, axis=0, return_inverse=True)
    edge_elems = np.full((edges.shape[0], 2), -1, dtype=np.int64)
    owner = np.repeat(np.arange(ne), 3)
    # fill the two slots deterministically: lower element id first
    order = np.argsort(owner, kind="stable")
    for k in order:
        e = inverse[k]
        if edge_elems[e, 0] < 0:
            edge_elems[e, 0] = owner[k]
        else:
            edge_elems[e, 1] = owner[k]
    return edges, edge_elems


def _node_adjacency(elements: np.ndarray, n_nodes: int):
    flat = elements.ravel()
    owner = np.repeat(np.arange(elements.shape[0]), 3)
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n_nodes)
    ptr = np.concatenate([[0], np.cumsum(counts)])
    return ptr.astype(np.int64), owner[order].astype(np.int64)


def node_patch(mesh: Mesh, node: int) -> np.ndarray:
    """Ids of the elements sharing a node."""
    if not 0 <= node < mesh.n_nodes:
        raise IndexError(f"node {node} out of range [0, {mesh.n_nodes})")
    lo, hi = mesh.node_elem_ptr[node], mesh.node_elem_ptr[node + 1]
    return mesh.node_elem_ids[lo:hi]


def dump_mesh(mesh: Mesh, path) -> None:
    """Plain-text dump: one 'v x y' line per node, one 't i j k' per element."""
    with open(path, "w") as fh:
        for x, y in mesh.nodes:
            fh.write(f"v {x:.17g} {y:.17g}\n")
        for i, j, k in mesh.elements:
            fh.write(f"t {i} {j} {k}\n")
