"""Dimensionless half-cell with a delta-function barrier.

Wells of widths ``a`` and ``c`` (``d = a + c``, ``s = a - c``) separated
by a delta barrier of strength ``Omega``. Everything is a function of
``kd``, ``s/d`` and ``Omega d``; the off-diagonal velocity is rescaled to
``kd``, which moves no zero or pole of the log-derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .tmatrix import WMatrix

# default search window (units of pi) and scan step for gap edges
GAP_WINDOW = (0.5, 1.0)
SCAN_STEP = 1e-3


@dataclass(frozen=True)
class DeltaSpec:
    omega_d: float
    s_over_d: float = 0.0

    def __post_init__(self):
        if not self.omega_d >= 0:
            raise ValueError(f"barrier strength must be >= 0, got {self.omega_d}")
        if not -1 < self.s_over_d < 1:
            raise ValueError(f"asymmetry s/d must lie in (-1, 1), got {self.s_over_d}")

    def flipped(self) -> "DeltaSpec":
        return DeltaSpec(self.omega_d, -self.s_over_d)


class GapEdges(NamedTuple):
    """Nodes of ``g`` and of ``u'`` bounding the split-band gap (kd units)."""

    g_node: float
    up_node: float

    @property
    def lower(self) -> float:
        return min(self.g_node, self.up_node)

    @property
    def upper(self) -> float:
        return max(self.g_node, self.up_node)

    @property
    def width(self) -> float:
        return abs(self.up_node - self.g_node)


def delta_half_cell(kd: float, spec: DeltaSpec) -> WMatrix:
    """``W_R = W_c W_delta W_a`` in closed form."""
    if not kd > 0:
        raise ValueError(f"kd must be positive, got {kd}")
    ks = kd * spec.s_over_d
    r = spec.omega_d / kd
    ckd, skd = math.cos(kd), math.sin(kd)
    cks, sks = math.cos(ks), math.sin(ks)
    g = ckd + r * (skd - sks)
    up = ckd + r * (skd + sks)
    u = (skd - r * (ckd - cks)) / kd
    gp = -kd * (skd - r * (ckd + cks))
    return WMatrix(g, u, gp, up)


def delta_half_cell_array(kd: np.ndarray, spec: DeltaSpec) -> tuple[np.ndarray, ...]:
    """Vectorised entries ``(g, u, gp, up)`` on a ``kd`` grid."""
    kd = np.asarray(kd, dtype=float)
    if np.any(kd <= 0):
        raise ValueError("kd must be positive")
    ks = kd * spec.s_over_d
    r = spec.omega_d / kd
    g = np.cos(kd) + r * (np.sin(kd) - np.sin(ks))
    up = np.cos(kd) + r * (np.sin(kd) + np.sin(ks))
    u = (np.sin(kd) - r * (np.cos(kd) - np.cos(ks))) / kd
    gp = -kd * (np.sin(kd) - r * (np.cos(kd) + np.cos(ks)))
    return g, u, gp, up


def _half_trace(kd: float, spec: DeltaSpec) -> float:
    return delta_half_cell(kd, spec).half_trace


def delta_bragg_point(spec: DeltaSpec, bracket: tuple[float, float]) -> float:
    """``kd`` where the half-cell trace vanishes (``phi_h = pi/2``)."""
    lo, hi = bracket
    f_lo, f_hi = _half_trace(lo, spec), _half_trace(hi, spec)
    if f_lo * f_hi > 0:
        raise ValueError(f"half-cell trace does not change sign on [{lo}, {hi}]")
    return brentq(_half_trace, lo, hi, args=(spec,), xtol=1e-14, rtol=1e-14)


def _nodes(fn, lo: float, hi: float, step: float) -> list[float]:
    n = max(2, int(math.ceil((hi - lo) / step)) + 1)
    grid = np.linspace(lo, hi, n)
    vals = np.array([fn(x) for x in grid])
    roots = []
    for i in range(n - 1):
        if vals[i] == 0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(fn, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-14))
    return roots


def delta_gap_edges(spec: DeltaSpec, bracket: tuple[float, float] | None = None) -> GapEdges:
    """Locate the split-band gap around the Bragg point.

    The node of ``g`` and the node of ``u'`` nearest the Bragg point are
    the gap edges; for ``s > 0`` the ``g`` node is the lower one.
    """
    if spec.s_over_d == 0:
        raise ValueError("a symmetric half-cell has no split-band gap")
    if bracket is None:
        bracket = (GAP_WINDOW[0] * math.pi, GAP_WINDOW[1] * math.pi)
    lo, hi = bracket
    step = SCAN_STEP * math.pi
    bragg = delta_bragg_point(spec, bracket)
    g_nodes = _nodes(lambda k: delta_half_cell(k, spec).g, lo, hi, step)
    up_nodes = _nodes(lambda k: delta_half_cell(k, spec).up, lo, hi, step)
    if not g_nodes or not up_nodes:
        raise ValueError(f"no node of g or u' in [{lo}, {hi}]")
    g_node = min(g_nodes, key=lambda k: abs(k - bragg))
    up_node = min(up_nodes, key=lambda k: abs(k - bragg))
    return GapEdges(g_node, up_node)


def delta_outer_edge(spec: DeltaSpec, bracket: tuple[float, float]) -> float:
    """Upper edge of the lowest band, where ``cos phi`` returns to +1.

    There ``u g' = 0``, so this is the first node of ``u`` or ``g'``.
    """
    lo, hi = bracket
    step = SCAN_STEP * math.pi
    roots = _nodes(lambda k: delta_half_cell(k, spec).u, lo, hi, step)
    roots += _nodes(lambda k: delta_half_cell(k, spec).gp, lo, hi, step)
    if not roots:
        raise ValueError(f"no outer band edge in [{lo}, {hi}]")
    return min(roots)
