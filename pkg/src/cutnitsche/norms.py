"""Error measures against a manufactured solution.

All integrals reuse the cut quadrature of the topology, so the
reported quantities are consistent with the assembled forms: L2 and
flux errors over the physical subdomains, sup-norm samples at
quadrature points and vertices, and the stabilised energy norms
including interface and ghost jump terms.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .assembly import barycentric_many
from .cutcell import CutTopology
from .mesh import Mesh
from .problems import ProblemSpec
from .space import FieldPair, SpaceLayout

__all__ = ["ErrorReport", "error_report", "eoc"]


@dataclass(frozen=True)
class ErrorReport:
    level: int
    h: float
    e0: float        # ||u - u_h||_{L2}
    einf: float      # sampled sup norm of u - u_h
    eflux: float     # ||rho grad(u - u_h)||_{L2}
    efluxinf: float  # sampled sup norm of rho grad(u - u_h)
    esqrt: float     # ||sqrt(rho) grad(u - u_h)||_{L2}
    vnorm: float     # energy norm incl. interface and ghost jumps
    vanorm: float    # energy norm augmented with the interface flux term
    e0_minus: float
    e0_plus: float
    eflux_minus: float
    eflux_plus: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def error_report(mesh: Mesh, topo: CutTopology, layout: SpaceLayout,
                 spec: ProblemSpec, u_h: FieldPair, level: int | None = None) -> ErrorReport:
    if not spec.has_exact():
        raise ValueError("error_report requires exact solution and gradient on both sides")

    e0_sq = {}
    eflux_sq = {}
    esqrt_sq = 0.0
    einf = 0.0
    efluxinf = 0.0
    for side in ("minus", "plus"):
        rho = spec.rho(side)
        sq = topo.quad_minus if side == "minus" else topo.quad_plus
        coeffs = u_h.side(side)
        dofmap = layout.node_dof(side)
        conn = mesh.elements[sq.elems]
        lam = barycentric_many(mesh.nodes[conn], sq.points)
        vals_h = np.einsum("ki,ki->k", lam, coeffs[dofmap[conn]])
        vals = np.asarray(spec.exact(side)(sq.points), dtype=float)
        diff = vals - vals_h
        e0_sq[side] = float(np.sum(sq.weights * diff * diff))

        grad_h = np.einsum("ki,kid->kd", coeffs[dofmap[conn]], mesh.grads[sq.elems])
        grad = np.asarray(spec.grad(side)(sq.points), dtype=float)
        gdiff_sq = np.sum((grad - grad_h) ** 2, axis=1)
        eflux_sq[side] = float(rho * rho * np.sum(sq.weights * gdiff_sq))
        esqrt_sq += float(rho * np.sum(sq.weights * gdiff_sq))

        einf = max(einf, float(np.max(np.abs(diff), initial=0.0)))
        efluxinf = max(efluxinf, float(rho * np.sqrt(np.max(gdiff_sq, initial=0.0))))

        # vertex samples restricted to the closed physical side
        want = -1 if side == "minus" else 1
        in_side = layout.in_minus if side == "minus" else layout.in_plus
        elems = np.flatnonzero(in_side)
        conn_e = mesh.elements[elems]
        vmask = topo.node_sign[conn_e] * want >= 0
        if np.any(vmask):
            coords = mesh.nodes[conn_e]
            uex = np.asarray(spec.exact(side)(coords), dtype=float)
            uh = coeffs[dofmap[conn_e]]
            einf = max(einf, float(np.max(np.abs(uex - uh)[vmask])))
            gex = np.asarray(spec.grad(side)(coords), dtype=float)
            gh = np.einsum("ki,kid->kd", coeffs[dofmap[conn_e]], mesh.grads[elems])
            gd = np.sqrt(np.sum((gex - gh[:, None, :]) ** 2, axis=2))
            efluxinf = max(efluxinf, float(rho * np.max(gd[vmask])))

    pen_sq = 0.0
    flux_sq = 0.0
    ghost_sq = _ghost_error_sq(mesh, topo, layout, spec, u_h)
    if topo.n_cut:
        iq = topo.iface
        conn = mesh.elements[iq.elems]
        lam = barycentric_many(mesh.nodes[conn], iq.points)
        jump_h = (np.einsum("ki,ki->k", lam, u_h.plus[layout.node_dof_plus[conn]])
                  - np.einsum("ki,ki->k", lam, u_h.minus[layout.node_dof_minus[conn]]))
        alpha = (np.asarray(spec.jump_value(iq.points), dtype=float)
                 if spec.jump_value is not None else 0.0)
        jd = alpha - jump_h
        h_t = mesh.h_elem
        pen_sq = float(spec.rho_minus / h_t * np.sum(iq.weights * jd * jd))

        gh_minus = np.einsum("ki,kid->kd", u_h.minus[layout.node_dof_minus[conn]],
                             mesh.grads[iq.elems])
        gex = np.asarray(spec.grad_minus(iq.points), dtype=float)
        fd = np.sum((gex - gh_minus) * iq.normals, axis=1)
        flux_sq = float(spec.rho_minus * h_t * np.sum(iq.weights * fd * fd))

    vnorm_sq = esqrt_sq + pen_sq + ghost_sq
    return ErrorReport(
        level=level if level is not None else mesh.level,
        h=mesh.h,
        e0=float(np.sqrt(e0_sq["minus"] + e0_sq["plus"])),
        einf=einf,
        eflux=float(np.sqrt(eflux_sq["minus"] + eflux_sq["plus"])),
        efluxinf=efluxinf,
        esqrt=float(np.sqrt(esqrt_sq)),
        vnorm=float(np.sqrt(vnorm_sq)),
        vanorm=float(np.sqrt(vnorm_sq + flux_sq)),
        e0_minus=float(np.sqrt(e0_sq["minus"])),
        e0_plus=float(np.sqrt(e0_sq["plus"])),
        eflux_minus=float(np.sqrt(eflux_sq["minus"])),
        eflux_plus=float(np.sqrt(eflux_sq["plus"])),
    )


def _ghost_error_sq(mesh, topo, layout, spec, u_h) -> float:
    """Ghost jump terms of the energy norm; the exact solution is smooth

    on each side, so only the discrete field contributes.
    """
    total = 0.0
    for side, edges in (("minus", topo.ghost_minus), ("plus", topo.ghost_plus)):
        if not edges.size:
            continue
        coeffs = u_h.side(side)
        dofmap = layout.node_dof(side)
        e1 = mesh.edge_elems[edges, 0]
        e2 = mesh.edge_elems[edges, 1]
        ev = mesh.nodes[mesh.edges[edges, 1]] - mesh.nodes[mesh.edges[edges, 0]]
        elen = np.hypot(ev[:, 0], ev[:, 1])
        ne = np.column_stack([-ev[:, 1], ev[:, 0]]) / elen[:, None]
        g1 = np.einsum("ki,kid->kd", coeffs[dofmap[mesh.elements[e1]]], mesh.grads[e1])
        g2 = np.einsum("ki,kid->kd", coeffs[dofmap[mesh.elements[e2]]], mesh.grads[e2])
        jmp = np.sum((g1 - g2) * ne, axis=1)
        total += float(spec.rho(side) * np.sum(elen ** 2 * jmp ** 2))
    return total


def eoc(errors, hs) -> np.ndarray:
    """Estimated orders of convergence between consecutive refinement levels.

    Entry k compares level k+1 against level k; undefined ratios
    (zero or nonfinite errors) yield NaN markers.
    """
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if errors.shape != hs.shape or errors.ndim != 1:
        raise ValueError("errors and hs must be 1d sequences of equal length")
    if errors.shape[0] < 2:
        return np.zeros(0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(errors[1:] / errors[:-1]) / np.log(hs[1:] / hs[:-1])
    bad = ~np.isfinite(errors[1:]) | ~np.isfinite(errors[:-1]) | (errors[1:] <= 0.0) | (errors[:-1] <= 0.0)
    out[bad] = np.nan
    return out
