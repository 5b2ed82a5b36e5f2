"""LP modes of a weakly guiding step-index fiber."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import jn_zeros, jv, kve

from .optics import ClippingError, ComplexField


class NotGuidedError(ValueError):
    pass


@dataclass(frozen=True)
class FiberSpec:
    core_radius: float = 25e-6
    numerical_aperture: float = 0.2
    wavelength: float = 808e-9
    # magnification applied when rendering fields on the device grid
    render_scale: float = 10.0

    def __post_init__(self):
        for name in ("core_radius", "numerical_aperture", "wavelength", "render_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def v_number(spec):
    return 2 * np.pi * spec.core_radius * spec.numerical_aperture / spec.wavelength


def characteristic(u, V, l):
    """``u J_{l+1}(u)/J_l(u) - w K_{l+1}(w)/K_l(w)`` with ``w = sqrt(V^2 - u^2)``."""
    w = np.sqrt(V * V - u * u)
    # kve scaling cancels in the K ratio
    return u * jv(l + 1, u) / jv(l, u) - w * kve(l + 1, w) / kve(l, w)


def _brackets(V, l):
    # the J ratio has poles at the zeros of J_l; one candidate root per gap
    nz = int(V / np.pi) + 3
    zeros = jn_zeros(l, nz) if l >= 0 else np.array([])
    edges = [0.0] + [z for z in zeros if z < V] + [V]
    return list(zip(edges[:-1], edges[1:]))


@lru_cache(maxsize=256)
def guided_roots(V, l):
    """All LP_l roots ``u`` in (0, V), increasing."""
    roots = []
    for a, b in _brackets(V, l):
        span = b - a
        lo = a + 1e-12 * max(1.0, span) if a > 0 else 1e-9 * V
        hi = b - 1e-12 * max(1.0, span)
        if hi <= lo:
            continue
        g_lo, g_hi = characteristic(lo, V, l), characteristic(hi, V, l)
        if not (np.isfinite(g_lo) and np.isfinite(g_hi)) or g_lo * g_hi > 0:
            continue
        u = brentq(characteristic, lo, hi, args=(V, l), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        roots.append(u)
    return tuple(roots)


def solve_lp(spec, l, m):
    """Transverse parameters ``(u, w)`` of LP_lm (``m`` counts from 1)."""
    if l < 0 or m < 1:
        raise ValueError("need l >= 0 and m >= 1")
    V = v_number(spec)
    roots = guided_roots(float(V), int(l))
    if m > len(roots):
        raise NotGuidedError(f"LP{l}{m} is not guided at V={V:.4f} ({len(roots)} LP{l}x modes)")
    u = roots[m - 1]
    return u, float(np.sqrt(V * V - u * u))


def radial_profile(r_over_a, l, u, w):
    """Core/cladding radial profile, unity at the core boundary."""
    r = np.asarray(r_over_a, dtype=np.float64)
    inside = r < 1.0
    out = np.empty_like(r)
    out[inside] = jv(l, u * r[inside]) / jv(l, u)
    ro = r[~inside]
    out[~inside] = kve(l, w * ro) / kve(l, w) * np.exp(-w * (ro - 1.0))
    return out


def lp_field(spec, l, m, orientation="cos", grid=None, center=(0.0, 0.0)):
    """Normalized real LP_lm field rendered at ``render_scale`` magnification."""
    if grid is None:
        raise ValueError("a grid is required")
    if orientation not in ("cos", "sin"):
        raise ValueError("orientation must be 'cos' or 'sin'")
    u, w = solve_lp(spec, l, m)
    a = spec.render_scale * spec.core_radius
    cx, cy = center
    xmin, xmax, ymin, ymax = grid.extent
    if cx - a < xmin or cx + a > xmax or cy - a < ymin or cy + a > ymax:
        raise ClippingError(f"rendered core radius {a:g} m does not fit the grid")
    X, Y = grid.coords()
    r = np.hypot(X - cx, Y - cy) / a
    phi = np.arctan2(Y - cy, X - cx)
    ang = np.cos(l * phi) if orientation == "cos" or l == 0 else np.sin(l * phi)
    amp = radial_profile(r, l, u, w) * ang
    return ComplexField(grid, amp).normalized()
