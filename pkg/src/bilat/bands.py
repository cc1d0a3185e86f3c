"""Band structure of a biperiodic array from its half-cell matrix.

Everything here is a function of ``W_R = [[g, u], [g', u']]`` of one
half-cell. The double cell ``W_R W_L`` has ``cos phi = g u' + u g'``; its
allowed bands are where ``0 <= g u' <= 1``.

Zones are labelled by the signs of ``(u', u, g', g)``:

    FZ0  + + + +      AZ0  + + - +      FZ1  + + - -      AZ1  - + - -
    FZ2  - + + -      AZ2  - - + -      FZ3  + - + -      AZ3  + - + +

The remaining sign patterns (AZ3, and gaps entered with the roles of
``g`` and ``u'`` exchanged, as happens for the mirror-image half-cell) are
classified by continuing the cycle and reported with ``extrapolated=True``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq

from .device import HalfCellSpec
from .tmatrix import WMatrix, half_cell_w

# entries smaller than this fraction of the largest are treated as zero
DEAD_BAND = 1e-12
# log-derivative pole threshold relative to the matrix scale
POLE_EPS = 1e-13
# root tolerance for band edges, meV
EDGE_XTOL = 1e-9


class ZoneError(ValueError):
    """The sign pattern of ``W_R`` does not identify a Kard zone."""

    def __init__(self, message: str, signs: tuple[int, int, int, int]):
        super().__init__(message)
        self.signs = signs


class BandEdgeError(ZoneError):
    """An element of ``W_R`` sits on zero: the energy is a band edge."""


class Zone(enum.Enum):
    FZ0 = (0, False)
    AZ0 = (0, True)
    FZ1 = (1, False)
    AZ1 = (1, True)
    FZ2 = (2, False)
    AZ2 = (2, True)
    FZ3 = (3, False)
    AZ3 = (3, True)

    @property
    def index(self) -> int:
        return self.value[0]

    @property
    def allowed(self) -> bool:
        return self.value[1]

    @property
    def label(self) -> str:
        return self.name


# signs of (u', u, g', g) for the zones listed in the reference table
TABLE_ZONES = {
    (1, 1, 1, 1): Zone.FZ0,
    (1, 1, -1, 1): Zone.AZ0,
    (1, 1, -1, -1): Zone.FZ1,
    (-1, 1, -1, -1): Zone.AZ1,
    (-1, 1, 1, -1): Zone.FZ2,
    (-1, -1, 1, -1): Zone.AZ2,
    (1, -1, 1, -1): Zone.FZ3,
}
# Remaining patterns continue the cycle: AZ3 puts beta in the fourth
# quadrant; the others are the same gaps entered with the roles of g and u'
# (or u and g') exchanged, as for the mirror-image half-cell.
EXTRAPOLATED_ZONES = {
    (1, -1, 1, 1): Zone.AZ3,
    (-1, 1, -1, 1): Zone.FZ1,
    (-1, -1, 1, 1): Zone.FZ3,
    (-1, -1, -1, -1): Zone.FZ2,
    (1, -1, -1, 1): Zone.FZ0,
}


def _sign(x: float) -> int:
    return 1 if x > 0 else -1


def zone_signs(w_r: WMatrix) -> tuple[int, int, int, int]:
    return tuple(_sign(x) for x in (w_r.up, w_r.u, w_r.gp, w_r.g))


def classify_zone(w_r: WMatrix, strict: bool = False) -> tuple[Zone, bool]:
    """Zone from the four signs, plus whether the pattern was extrapolated.

    Raises :class:`BandEdgeError` when an element sits in the dead band
    around zero. With ``strict`` only the table patterns are accepted.
    """
    entries = (w_r.up, w_r.u, w_r.gp, w_r.g)
    signs = zone_signs(w_r)
    tol = DEAD_BAND * w_r.scale
    if any(abs(x) <= tol for x in entries):
        raise BandEdgeError("matrix element on zero (band edge)", signs)
    if signs in TABLE_ZONES:
        return TABLE_ZONES[signs], False
    if not strict and signs in EXTRAPOLATED_ZONES:
        return EXTRAPOLATED_ZONES[signs], True
    raise ZoneError(f"unclassified zone, signs (u', u, g', g) = {signs}", signs)


class LogDerivs(NamedTuple):
    gamma: float
    lam: float
    g_pole: bool
    u_pole: bool


def _ratio(num: float, den: float, pole: bool) -> float:
    if pole:
        return math.copysign(math.inf, num) if num != 0 else math.nan
    return num / den


def log_derivatives(w_r: WMatrix) -> LogDerivs:
    """``gamma = g'/g`` and ``lambda = u'/u`` with pole flags."""
    tol = POLE_EPS * w_r.scale
    g_pole = abs(w_r.g) < tol
    u_pole = abs(w_r.u) < tol
    return LogDerivs(_ratio(w_r.gp, w_r.g, g_pole), _ratio(w_r.up, w_r.u, u_pole), g_pole, u_pole)


def tan2_half_phi(w_r: WMatrix) -> float:
    """``tan^2(phi/2) = -gamma/lambda``; positive exactly in allowed bands."""
    return -(w_r.gp * w_r.u) / (w_r.g * w_r.up)


def bloch_cos_phi(w_r: WMatrix) -> tuple[float, float]:
    """``(cos phi_h, cos phi)`` of the half-cell and the double cell."""
    return w_r.half_trace, w_r.g * w_r.up + w_r.u * w_r.gp


def z_squared(w_r: WMatrix) -> tuple[float, float]:
    """Double-cell velocity squared for both half-cell orders.

    ``Z^2 = -gamma lambda = -g'u'/(g u)`` belongs to the order W_R W_L;
    exchanging the half-cells swaps ``g`` and ``u'`` and gives
    ``Z~^2 = -g'g/(u'u)``. Poles come out as signed infinities.
    """
    g, u, gp, up = w_r.g, w_r.u, w_r.gp, w_r.up
    tol = POLE_EPS * w_r.scale
    z2 = -(gp * up) / (g * u) if abs(g * u) > tol * tol else math.copysign(math.inf, -(gp * up))
    z2t = -(gp * g) / (up * u) if abs(up * u) > tol * tol else math.copysign(math.inf, -(gp * g))
    return z2, z2t


@dataclass(frozen=True)
class KardParams:
    """Three-parameter form of a half-cell matrix.

    In allowed zones ``beta``, ``z``, ``eta`` and ``mu`` are the real
    Kard parameters with ``beta`` in the quadrant of the zone. In forbidden
    zones the same fields hold the barred quantities ``beta_bar``,
    ``z_bar``, ``eta_bar`` and ``xi`` (``mu = xi + i pi/2``); the real part
    of the complex ``beta`` is ``zone.index * pi/2``.
    """

    zone: Zone
    alpha: float
    beta: float
    z: float
    eta: float
    mu: float
    nu: float
    extrapolated: bool = False
    signs: tuple[int, int, int, int] = (0, 0, 0, 0)

    @property
    def allowed(self) -> bool:
        return self.zone.allowed

    @property
    def beta_bar(self) -> float:
        if self.allowed:
            raise AttributeError("beta_bar is defined in forbidden zones only")
        return self.beta

    @property
    def xi(self) -> float:
        if self.allowed:
            raise AttributeError("xi is defined in forbidden zones only")
        return self.mu


def kard_eta(nu: float, z: float) -> float:
    """``sinh eta = (nu/z - z/nu) / 2``."""
    return math.asinh(0.5 * (nu / z - z / nu))


def kard_decompose(w_r: WMatrix, nu: float, strict: bool = False) -> KardParams:
    """Split ``W_R`` into ``(alpha, beta, z)`` and derive ``eta`` and ``mu``.

    ``nu`` is the lead velocity. Raises :class:`ZoneError` when the signs
    fit no known zone and :class:`BandEdgeError` exactly on an edge.
    """
    if not nu > 0:
        raise ValueError(f"lead velocity must be positive, got {nu}")
    zone, extrapolated = classify_zone(w_r, strict=strict)
    g, u, gp, up = w_r.g, w_r.u, w_r.gp, w_r.up
    alpha = 0.5 * math.log(abs(up / g))
    z = math.sqrt(abs(gp / u))
    eta = kard_eta(nu, z)
    if zone.allowed:
        cos_b = math.copysign(math.sqrt(g * up), g)
        sin_b = math.copysign(math.sqrt(-u * gp), u)
        beta = math.atan2(sin_b, cos_b)
        if beta < 0:
            beta += 2 * math.pi
    elif zone.index % 2 == 0:
        beta = math.asinh(math.sqrt(u * gp))
    else:
        beta = math.asinh(math.sqrt(-g * up))
    return KardParams(zone, alpha, beta, z, eta, eta - alpha, nu, extrapolated, zone_signs(w_r))


def kard_reconstruct(kp: KardParams) -> WMatrix:
    """Rebuild ``W_R`` from its Kard parameters (inverse of the decomposition)."""
    ea, ema = math.exp(kp.alpha), math.exp(-kp.alpha)
    z = kp.z
    if kp.allowed:
        c, s = math.cos(kp.beta), math.sin(kp.beta)
        return WMatrix(ema * c, s / z, -z * s, ea * c)
    ch, sh = math.cosh(kp.beta), math.sinh(kp.beta)
    if kp.zone.index % 2 == 0:
        mags = (ea * ch, sh / z, z * sh, ema * ch)
    else:
        mags = (ea * sh, ch / z, z * ch, ema * sh)
    s_up, s_u, s_gp, s_g = kp.signs
    return WMatrix(s_g * mags[3], s_u * mags[1], s_gp * mags[2], s_up * mags[0])


class DoubleCellKard(NamedTuple):
    """Double-cell impedance ``mu`` (``xi`` in gaps), velocity ``Z`` and ``cos phi``."""

    mu: float
    Z: float
    cos_phi: float
    forbidden: bool
    residual: float


def double_cell_kard(kp: KardParams, nu: Optional[float] = None) -> DoubleCellKard:
    """Double-cell quantities from the half-cell Kard form.

    ``mu`` is computed both as ``ln(nu/Z)`` with ``Z = z e^alpha`` and as
    ``eta - alpha``; ``residual`` is their difference. In forbidden zones
    the real part ``xi`` is returned with ``forbidden=True``.
    """
    nu = kp.nu if nu is None else nu
    Z = kp.z * math.exp(kp.alpha)
    mu_direct = math.log(nu / Z)
    mu_dual = kp.eta - kp.alpha
    if kp.allowed:
        cos_phi = math.cos(2 * kp.beta)
    elif kp.zone.index % 2 == 0:
        cos_phi = math.cosh(2 * kp.beta)
    else:
        cos_phi = -math.cosh(2 * kp.beta)
    return DoubleCellKard(mu_direct, Z, cos_phi, not kp.allowed, abs(mu_direct - mu_dual))


def cos_phi_odd(kp: KardParams, n: int) -> float:
    """Half trace of ``2n + 1`` half-cells: ``cosh(alpha) cos((2n+1) beta)``."""
    if not kp.allowed:
        raise ZoneError("closed form holds in allowed zones only", (0, 0, 0, 0))
    return math.cosh(kp.alpha) * math.cos((2 * n + 1) * kp.beta)


# -- band edges ---------------------------------------------------------------

class EdgeKind(enum.Enum):
    LOWER_OUTER = "LowerOuter"
    GAP_LOWER = "GapLower"
    GAP_UPPER = "GapUpper"
    UPPER_OUTER = "UpperOuter"


class EdgeFunction(enum.Enum):
    NODE_OF_G = "NodeOfG"
    NODE_OF_UPRIME = "NodeOfUprime"
    COS_PHI_UNITY = "CosPhiUnity"


class BandEdge(NamedTuple):
    energy: float
    kind: EdgeKind
    which_function: EdgeFunction


def _root(fn: Callable[[float], float], lo: float, hi: float) -> float:
    return brentq(fn, lo, hi, xtol=EDGE_XTOL, rtol=4 * np.finfo(float).eps)


def _symmetric(w: WMatrix) -> bool:
    return abs(w.g - w.up) <= DEAD_BAND * w.scale


def find_band_edges(spec: HalfCellSpec, e_range: tuple[float, float],
                    resolution: float = 0.01) -> list[BandEdge]:
    """Scan ``cos phi`` of the double cell and bisect every band edge.

    Edges where ``cos phi = -1`` are nodes of ``g`` or ``u'`` and bound a
    split-band gap; edges at ``cos phi = +1`` are nodes of ``u g'``.
    """
    lo, hi = e_range
    if not hi > lo:
        raise ValueError("empty energy range")
    n = max(2, int(math.ceil((hi - lo) / resolution)) + 1)
    grid = np.linspace(lo, hi, n)
    mats = [half_cell_w(spec, float(e)) for e in grid]

    def entry(name):
        return lambda e: getattr(half_cell_w(spec, e), name)

    edges: list[BandEdge] = []
    for i in range(n - 1):
        w0, w1 = mats[i], mats[i + 1]
        c0, c1 = bloch_cos_phi(w0)[1], bloch_cos_phi(w1)[1]
        a0, a1 = abs(c0) <= 1, abs(c1) <= 1
        if a0 == a1:
            if not a0 and c0 * c1 < 0:
                warnings.warn(f"band between {grid[i]:.6f} and {grid[i + 1]:.6f} meV "
                              "is narrower than the scan resolution", RuntimeWarning)
            elif a0 and w0.g * w1.g < 0 and w0.up * w1.up < 0 and not (
                    _symmetric(w0) and _symmetric(w1)):
                # both gap-edge functions crossed zero: a gap was stepped over
                warnings.warn(f"gap between {grid[i]:.6f} and {grid[i + 1]:.6f} meV "
                              "is narrower than the scan resolution", RuntimeWarning)
            continue
        e0, e1 = float(grid[i]), float(grid[i + 1])
        outside = c1 if a0 else c0
        entering = not a0
        if outside < -1:
            flips = [name for name in ("g", "up") if getattr(w0, name) * getattr(w1, name) <= 0]
            if len(flips) != 1:
                warnings.warn(f"unresolved gap edges between {e0:.6f} and {e1:.6f} meV",
                              RuntimeWarning)
            if flips:
                name = flips[0]
                energy = _root(entry(name), e0, e1)
            else:
                name = "g"
                energy = _root(lambda e: bloch_cos_phi(half_cell_w(spec, e))[1] + 1, e0, e1)
            func = EdgeFunction.NODE_OF_G if name == "g" else EdgeFunction.NODE_OF_UPRIME
            kind = EdgeKind.GAP_UPPER if entering else EdgeKind.GAP_LOWER
        else:
            flips = [name for name in ("u", "gp") if getattr(w0, name) * getattr(w1, name) <= 0]
            if len(flips) == 1:
                energy = _root(entry(flips[0]), e0, e1)
            else:
                energy = _root(lambda e: bloch_cos_phi(half_cell_w(spec, e))[1] - 1, e0, e1)
            func = EdgeFunction.COS_PHI_UNITY
            kind = EdgeKind.LOWER_OUTER if entering else EdgeKind.UPPER_OUTER
        edges.append(BandEdge(energy, kind, func))

    for first, second in zip(edges, edges[1:]):
        if second.energy - first.energy < 2 * (grid[1] - grid[0]):
            warnings.warn(f"band edges at {first.energy:.6f} and {second.energy:.6f} meV are "
                          "closer than twice the scan resolution", RuntimeWarning)
    return edges


def allowed_intervals(edges: list[BandEdge], e_range: tuple[float, float],
                      starts_allowed: bool = False) -> list[tuple[float, float]]:
    """Allowed energy intervals implied by an ordered edge list."""
    bands = []
    start = e_range[0] if starts_allowed else None
    for edge in edges:
        if edge.kind in (EdgeKind.LOWER_OUTER, EdgeKind.GAP_UPPER):
            start = edge.energy
        elif start is not None:
            bands.append((start, edge.energy))
            start = None
    if start is not None:
        bands.append((start, e_range[1]))
    return bands


class SplitBand(NamedTuple):
    lower: tuple[float, float]
    gap: tuple[float, float]
    upper: tuple[float, float]

    @property
    def gap_width(self) -> float:
        return self.gap[1] - self.gap[0]


def split_band(spec: HalfCellSpec, e_range: tuple[float, float],
               resolution: float = 0.01) -> SplitBand:
    """Lower band, gap and upper band of the first split band in range.

    For a symmetric half-cell the two halves touch at the Bragg energy
    (the node of ``g``) and the gap has zero width.
    """
    edges = find_band_edges(spec, e_range, resolution)
    outer_lo = next(e for e in edges if e.kind is EdgeKind.LOWER_OUTER)
    after = [e for e in edges if e.energy > outer_lo.energy]
    gap_lo = next((e for e in after if e.kind is EdgeKind.GAP_LOWER), None)
    gap_hi = next((e for e in after if e.kind is EdgeKind.GAP_UPPER), None)
    if gap_lo is None or gap_hi is None:
        top = next(e for e in after if e.kind is EdgeKind.UPPER_OUTER)
        # touching bands: the gap closes at the node of g
        bragg = _root(lambda e: half_cell_w(spec, e).half_trace, outer_lo.energy, top.energy)
        return SplitBand((outer_lo.energy, bragg), (bragg, bragg), (bragg, top.energy))
    top = next(e for e in after if e.kind is EdgeKind.UPPER_OUTER and e.energy > gap_hi.energy)
    return SplitBand((outer_lo.energy, gap_lo.energy), (gap_lo.energy, gap_hi.energy),
                     (gap_hi.energy, top.energy))


def bragg_energy(spec: HalfCellSpec, bracket: tuple[float, float]) -> float:
    """Energy where the half-cell trace vanishes."""
    return _root(lambda e: half_cell_w(spec, e).half_trace, *bracket)


def fixed_points(mu: float, cos_phi: float, zone: Zone) -> tuple[complex, complex]:
    """Fixed points of the double-cell Moebius map in the unit-disc picture.

    In allowed zones they are ``tanh(mu/2)`` and its inverse on the real
    axis; in forbidden zones ``mu = xi + i pi/2`` puts them on the unit
    circle as a conjugate pair. ``cos_phi`` is only checked for
    consistency with the zone.
    """
    if zone.allowed:
        if abs(cos_phi) > 1 + 1e-9:
            raise ValueError("allowed zone requires |cos phi| <= 1")
        t = math.tanh(mu / 2) if math.isfinite(mu) else math.copysign(1.0, mu)
        return complex(t, 0.0), complex(1 / t if t != 0 else math.inf, 0.0)
    if abs(cos_phi) < 1 - 1e-9:
        raise ValueError("forbidden zone requires |cos phi| >= 1")
    if math.isinf(mu):
        t = complex(math.copysign(1.0, mu), 0.0)
    else:
        t = complex(math.tanh(mu), 1 / math.cosh(mu))
    return t, t.conjugate()
