"""Smooth compactly supported extension of data known on (-1, 1).

Outside the data window the extension is a multi-term reflection about the
last data node, ``E(e + t) = sum_j a_j u(e - b_j t)``, whose weights match the
value and the first three derivatives at the edge, multiplied by a smooth
plateau window that is 1 next to the edge and vanishes ``width`` away from it.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalFailure
from .grid import GridFunction, interpolate

# reflection factors b_j and matching weights a_j: sum_j a_j (-b_j)^p = 1, p = 0..3
REFLECT_FACTORS = np.array([0.5, 1.0, 1.5, 2.0])
REFLECT_WEIGHTS = np.linalg.solve(np.vander(-REFLECT_FACTORS, 4, increasing=True).T, np.ones(4))


def _f(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    with np.errstate(over="ignore"):  # 1/t overflows for subnormal t; exp(-inf) = 0 is right
        out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """``f(t) / (f(t) + f(1 - t))`` with ``f(t) = exp(-1/t)`` for ``t > 0``."""
    t = np.asarray(t, dtype=float)
    a, b = _f(t), _f(1.0 - t)
    out = a / (a + b)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PlateauSpec:
    """Window equal to 1 on ``|x - center| <= width/2`` and 0 beyond ``width``.

    ``orientation`` (+1 or -1) records which edge of the data window the
    plateau sits on; it does not change the window's shape.
    """

    center: float
    width: float = 0.5
    orientation: int = 1

    def __post_init__(self):
        if not self.width > 0:
            raise InputError("invalid-width", f"plateau width must be positive, got {self.width}")
        if self.orientation not in (1, -1):
            raise InputError("invalid-orientation", "orientation must be +1 or -1")


def plateau(x, spec):
    d = np.abs(np.asarray(x, dtype=float) - spec.center)
    return smooth_step(2.0 * (spec.width - d) / spec.width)


def build_extension(u_inside, full, width=0.5):
    """Extend ``u_inside`` (data on (-1, 1)) to a compactly supported ``g`` on ``full``.

    ``g`` equals the data at every node of ``full`` between the first and last
    data node, and vanishes outside ``[e_left - width, e_right + width]``.
    """
    gi = u_inside.grid
    lo, hi = gi.a, gi.b
    if not (full.a <= lo and hi <= full.b):
        raise InputError("grid-mismatch", f"full grid [{full.a}, {full.b}] does not contain "
                         f"the data window [{lo}, {hi}]")
    if max(REFLECT_FACTORS) * width > hi - lo:
        raise InputError("invalid-width", f"width {width} too large for a data window of "
                         f"length {hi - lo}")
    x = full.nodes
    tol = 1e-12 * full.length
    g = np.zeros(full.N)

    inside = (x >= lo - tol) & (x <= hi + tol)
    g[inside] = interpolate(u_inside, np.clip(x[inside], lo, hi))

    for edge, sign in ((hi, 1.0), (lo, -1.0)):
        t = sign * (x - edge)
        sel = (t > tol) & (t < width)
        if not np.any(sel):
            continue
        ts = t[sel]
        refl = sum(a * interpolate(u_inside, edge - sign * b * ts)
                   for a, b in zip(REFLECT_WEIGHTS, REFLECT_FACTORS))
        win = plateau(x[sel], PlateauSpec(edge, width, int(sign)))
        g[sel] = win * refl
    return GridFunction(full, g)


def compute_h(u, g, window=(-1.0, 1.0), tol=1e-10):
    """Residual ``u - g``; it must vanish at the nodes inside ``window``."""
    if u.grid != g.grid:
        raise InputError("grid-mismatch", f"{u.grid} vs {g.grid}")
    h = u.values - g.values
    x = u.grid.nodes
    inside = (x > window[0]) & (x < window[1])
    if np.any(inside) and np.max(np.abs(h[inside])) > tol:
        raise NumericalFailure("residual-inside",
                               f"max |u - g| on the window is {np.max(np.abs(h[inside])):.3e}")
    h[inside] = 0.0
    return GridFunction(u.grid, h)
