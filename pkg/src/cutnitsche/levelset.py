"""Level-set descriptions of the interface.

An interface is the zero set of a scalar function phi, negative inside
the enclosed region.  ``inclusion_side`` records which physical
subdomain (minus or plus) the enclosed region plays, so the same phi
serves both orientations of an example.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "LevelSet",
    "make_circle",
    "make_flower",
    "edge_root",
    "reflect",
    "CoarseMeshError",
    "GeometryError",
]

DOMAIN_DIAMETER = 2.0 * np.sqrt(2.0)
FD_STEP = 1e-6 * DOMAIN_DIAMETER

ROOT_PHI_TOL = 1e-13
ROOT_WIDTH_TOL = 1e-14
MULTI_ROOT_SAMPLES = 32


class GeometryError(RuntimeError):
    """Interface geometry inconsistent with the cut model."""


class CoarseMeshError(GeometryError):
    """Mesh too coarse to resolve the interface (multi-root edge)."""


@dataclass(frozen=True)
class LevelSet:
    """Implicit curve with optional analytic gradient.

    ``phi`` and ``grad`` accept arrays of shape (..., 2) and return
    (...)-shaped values resp. (..., 2)-shaped gradients.  ``simple``
    states that the zero set is a simple closed curve resolved by any
    admissible mesh; when False, classification downgrades multi-root
    and non-convergence errors to flagged elements instead of raising.
    """

    phi: Callable
    grad: Callable | None = None
    inclusion_side: str = "minus"
    simple: bool = True
    name: str = "levelset"

    def __post_init__(self):
        if self.inclusion_side not in ("minus", "plus"):
            raise ValueError(f"inclusion_side must be 'minus' or 'plus', got {self.inclusion_side!r}")

    def value(self, x):
        return self.phi(np.asarray(x, dtype=float))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return self.grad(x)
        g = np.empty(x.shape)
        for k in (0, 1):
            xp = x.copy()
            xm = x.copy()
            xp[..., k] += FD_STEP
            xm[..., k] -= FD_STEP
            g[..., k] = (self.phi(xp) - self.phi(xm)) / (2.0 * FD_STEP)
        return g

    def normal_minus(self, x):
        """Unit normal pointing from the physical minus into the plus side."""
        g = np.asarray(self.gradient(x), dtype=float)
        if self.inclusion_side == "plus":
            g = -g
        norm = np.sqrt(np.sum(g * g, axis=-1, keepdims=True))
        return g / np.maximum(norm, 1e-300)

    def side_sign(self, x):
        """phi with its sign flipped so that negative always means minus side."""
        v = self.value(x)
        return v if self.inclusion_side == "minus" else -v


def make_circle(radius: float = 1.0 / 3.0, inclusion_side: str = "minus") -> LevelSet:
    """Circle of given radius centred at the origin."""
    if not 0.0 < radius < 1.0:
        raise ValueError(f"radius must lie in (0, 1), got {radius}")

    def phi(x):
        return np.hypot(x[..., 0], x[..., 1]) - radius

    def grad(x):
        r = np.hypot(x[..., 0], x[..., 1])
        return x / np.maximum(r, 1e-300)[..., None]

    return LevelSet(phi=phi, grad=grad, inclusion_side=inclusion_side,
                    simple=True, name=f"circle[r={radius:g}]")


FLOWER_BASE = 1.0 / 18.0
FLOWER_AMPLITUDE = 0.2
FLOWER_LOBES = 5


def make_flower(inclusion_side: str = "minus") -> LevelSet:
    """Five-lobed flower: radius 1/18 + 0.2*sin(5*theta).

    The radius changes sign, so the zero set is five petals pinched at
    the origin rather than a simple closed curve; the level set is
    marked non-simple and classification flags elements near the
    pinch points instead of failing.
    """

    def phi(x):
        r = np.hypot(x[..., 0], x[..., 1])
        th = np.arctan2(x[..., 1], x[..., 0])
        return r - (FLOWER_BASE + FLOWER_AMPLITUDE * np.sin(FLOWER_LOBES * th))

    def grad(x):
        xx = x[..., 0]
        yy = x[..., 1]
        r = np.maximum(np.hypot(xx, yy), 1e-300)
        th = np.arctan2(yy, xx)
        c = FLOWER_AMPLITUDE * FLOWER_LOBES * np.cos(FLOWER_LOBES * th)
        # grad theta = (-y, x) / r^2
        gx = xx / r + c * yy / (r * r)
        gy = yy / r - c * xx / (r * r)
        return np.stack([gx, gy], axis=-1)

    return LevelSet(phi=phi, grad=grad, inclusion_side=inclusion_side,
                    simple=False, name="flower")


def edge_root(ls: LevelSet, a, b):
    """Single interface crossing on the segment a-b, or None.

    Bisection on phi restricted to the segment, run to interval width
    <= 1e-14 and |phi| <= 1e-13.  The segment is first sampled at 32
    interior points; more than one sign change raises CoarseMeshError.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    fa = float(ls.value(a))
    fb = float(ls.value(b))
    if fa == 0.0:
        return a.copy()
    if fb == 0.0:
        return b.copy()

    ts = np.linspace(0.0, 1.0, MULTI_ROOT_SAMPLES + 2)
    pts = a[None, :] + ts[:, None] * (b - a)[None, :]
    vals = ls.value(pts)
    signs = np.sign(vals)
    changes = int(np.sum(signs[1:] * signs[:-1] < 0))
    if changes > 1:
        raise CoarseMeshError(
            f"h too coarse for this interface: {changes} sign changes on edge "
            f"{a.tolist()} -> {b.tolist()}"
        )
    if fa * fb > 0.0:
        return None

    return _bisect(lambda t: float(ls.value(a + t * (b - a))), 0.0, 1.0, fa, fb, a, b)


def _bisect(f, ta, tb, fa, fb, a, b):
    scale = float(np.hypot(*(b - a)))
    width_tol = ROOT_WIDTH_TOL / max(scale, 1e-300)
    for _ in range(200):
        tm = 0.5 * (ta + tb)
        fm = f(tm)
        if fm == 0.0 or (abs(fm) <= ROOT_PHI_TOL and (tb - ta) * scale <= ROOT_WIDTH_TOL):
            return a + tm * (b - a)
        if fa * fm < 0.0:
            tb, fb = tm, fm
        else:
            ta, fa = tm, fm
        if tb - ta <= width_tol and tb - ta <= np.finfo(float).eps:
            break
    tm = 0.5 * (ta + tb)
    fm = f(tm)
    if abs(fm) <= ROOT_PHI_TOL:
        return a + tm * (b - a)
    raise GeometryError(
        f"bisection did not converge on edge {a.tolist()} -> {b.tolist()}: "
        f"bracket width {(tb - ta) * scale:.3e}, |phi| = {abs(fm):.3e}"
    )


def reflect(ls: LevelSet, x, tube: float = 0.1, tol: float = 1e-12, max_iter: int = 50):
    """Reflection of x across the interface via closest-point projection.

    Only valid inside a tube of the given phi-distance around the
    interface; raises GeometryError outside it or on non-convergence.
    """
    x = np.asarray(x, dtype=float)
    d0 = float(abs(ls.value(x)))
    if d0 > tube:
        raise GeometryError(f"point {x.tolist()} outside the reflection tube (|phi| = {d0:.3e} > {tube})")
    y = x.copy()
    for _ in range(max_iter):
        d = float(ls.value(y))
        if abs(d) <= tol:
            return 2.0 * y - x
        g = np.asarray(ls.gradient(y), dtype=float)
        g2 = float(g @ g)
        if g2 < 1e-300:
            raise GeometryError(f"vanishing level-set gradient while projecting {x.tolist()}")
        y = y - (d / g2) * g
    raise GeometryError(f"projection of {x.tolist()} did not converge in {max_iter} iterations")


def reflect_many(ls: LevelSet, xs, tube: float = 0.1, tol: float = 1e-12, max_iter: int = 50):
    """Vectorized reflection of a batch of points."""
    xs = np.asarray(xs, dtype=float)
    d0 = np.abs(ls.value(xs))
    if np.any(d0 > tube):
        bad = xs[np.argmax(d0 > tube)]
        raise GeometryError(f"point {bad.tolist()} outside the reflection tube")
    ys = xs.copy()
    active = np.ones(xs.shape[0], dtype=bool)
    for _ in range(max_iter):
        d = ls.value(ys[active])
        done = np.abs(d) <= tol
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not np.any(active):
            break
        g = np.asarray(ls.gradient(ys[active]), dtype=float)
        g2 = np.sum(g * g, axis=-1)
        if np.any(g2 < 1e-300):
            raise GeometryError("vanishing level-set gradient during batch projection")
        d = ls.value(ys[active])
        ys[active] -= (d / g2)[:, None] * g
    if np.any(active):
        bad = xs[np.argmax(active)]
        raise GeometryError(f"projection of {bad.tolist()} did not converge in {max_iter} iterations")
    return 2.0 * ys - xs
