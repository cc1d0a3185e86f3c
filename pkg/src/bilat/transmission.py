"""Transmission of finite biperiodic arrays: closed forms, bounds, searches.

``N`` counts half-cells laid out L R L R ... from the left. Even ``N = 2n``
gives ``n`` reflection-symmetric double cells; odd ``N = 2n + 1`` adds one
more ``L`` on the right. The direct layer product is always the reference;
the Kard closed forms are cross-checks.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, fields
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .bands import (
    BandEdgeError,
    KardParams,
    ZoneError,
    bloch_cos_phi,
    kard_decompose,
    kard_eta,
)
from .device import Device, HalfCellSpec, Ordering, build_biperiodic
from .tmatrix import (
    WMatrix,
    device_w,
    exterior_velocity,
    half_cell_w,
    reverse_half_cell,
    transmission_from_m,
    w_to_m,
)

ROOT_XTOL = 1e-12   # meV
PHASE_TOL = 1e-4    # rad
SCAN_POINTS = 20_000


def _cosh2(x: float) -> float:
    c = math.cosh(x)
    return c * c


def _sinh2(x: float) -> float:
    s = math.sinh(x)
    return s * s


def transmission_even(kp: KardParams, nu: Optional[float] = None, n_double: int = 1) -> float:
    """``[1 + sinh^2(mu) sin^2(2 n beta)]^-1`` for ``n`` double cells."""
    if n_double < 1:
        raise ValueError("need at least one double cell")
    if not kp.allowed:
        return transmission_forbidden(kp, 2 * n_double).T
    mu = kp.mu if nu is None else _mu_for_lead(kp, nu)
    return 1.0 / (1.0 + _sinh2(mu) * math.sin(2 * n_double * kp.beta) ** 2)


def _mu_for_lead(kp: KardParams, nu: float) -> float:
    """``mu`` re-evaluated for a different lead velocity."""
    return kard_eta(nu, kp.z) - kp.alpha


def transmission_odd(kp: KardParams, nu: Optional[float] = None, n: int = 0) -> float:
    """``N = 2n + 1``: ``1/T = cosh^2(alpha) cos^2(N beta) + cosh^2(eta) sin^2(N beta)``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    big_n = 2 * n + 1
    if not kp.allowed:
        return transmission_forbidden(kp, big_n).T
    eta = kp.eta if nu is None else kard_eta(nu, kp.z)
    nb = big_n * kp.beta
    return 1.0 / (_cosh2(kp.alpha) * math.cos(nb) ** 2 + _cosh2(eta) * math.sin(nb) ** 2)


class ForbiddenTransmission(NamedTuple):
    T: float
    upper_bound: float


def transmission_forbidden(kp: KardParams, n_half: int) -> ForbiddenTransmission:
    """Transmission of ``n_half`` half-cells inside a forbidden zone.

    Odd ``N`` in even-indexed zones: ``1/T = cosh^2 a + [cosh^2 a + sinh^2 eb] sinh^2 N bb``,
    bounded by ``1/cosh^2 alpha``; odd-indexed zones exchange the roles of
    ``alpha`` and ``eta_bar``. Even ``N`` (symmetric arrays):
    ``1/T = 1 + cosh^2(xi) sinh^2(N beta_bar)``, bounded by one.
    """
    if kp.allowed:
        raise ZoneError(f"{kp.zone.label} is an allowed zone", (0, 0, 0, 0))
    if n_half < 1:
        raise ValueError("need at least one half-cell")
    s2 = _sinh2(n_half * kp.beta)
    if n_half % 2 == 0:
        inv = 1.0 + _cosh2(kp.mu) * s2
        return ForbiddenTransmission(1.0 / inv, 1.0)
    if kp.zone.index % 2 == 0:
        inv = _cosh2(kp.alpha) + (_cosh2(kp.alpha) + _sinh2(kp.eta)) * s2
        return ForbiddenTransmission(1.0 / inv, 1.0 / _cosh2(kp.alpha))
    inv = _cosh2(kp.eta) + (_sinh2(kp.alpha) + _cosh2(kp.eta)) * s2
    return ForbiddenTransmission(1.0 / inv, 1.0 / _cosh2(kp.eta))


class Envelope(NamedTuple):
    upper: float
    lower: float
    eta_dominates: bool

    @property
    def crossed(self) -> bool:
        return self.upper == self.lower


def envelopes(kp: KardParams, n_half: Optional[int] = None) -> Envelope:
    """N-independent bounds on ``|t_N|^2``.

    Odd arrays (the default) sit between ``1/cosh^2 alpha`` and
    ``1/cosh^2 eta``; which one is the upper bound depends on whether
    ``|eta| > |alpha|``. Even arrays lie between ``1/cosh^2 mu`` and one.
    In forbidden zones the lower bound is zero.
    """
    odd = n_half is None or n_half % 2 == 1
    eta_dom = abs(kp.eta) > abs(kp.alpha)
    if not kp.allowed:
        if not odd:
            return Envelope(1.0, 0.0, eta_dom)
        bound = 1.0 / _cosh2(kp.alpha if kp.zone.index % 2 == 0 else kp.eta)
        return Envelope(bound, 0.0, eta_dom)
    if not odd:
        return Envelope(1.0, 1.0 / _cosh2(kp.mu), eta_dom)
    ta, te = 1.0 / _cosh2(kp.alpha), 1.0 / _cosh2(kp.eta)
    return Envelope(max(ta, te), min(ta, te), eta_dom)


def closed_form_transmission(kp: KardParams, n_half: int) -> float:
    """Kard closed form for any half-cell count and zone."""
    if not kp.allowed:
        return transmission_forbidden(kp, n_half).T
    if n_half % 2 == 0:
        return transmission_even(kp, n_double=n_half // 2)
    return transmission_odd(kp, n=(n_half - 1) // 2)


# -- direct products ------------------------------------------------------------

def array_w(w_r: WMatrix, n_half: int) -> WMatrix:
    """Product of ``n_half`` half-cells in the order L R L R ... (left to right)."""
    w_l = reverse_half_cell(w_r)
    total = WMatrix.identity()
    for i in range(n_half):
        total = (w_l if i % 2 == 0 else w_r) @ total
    return total


def lead_velocity(spec: HalfCellSpec, energy: float) -> float:
    return exterior_velocity(energy, spec.well_mass)


def kard_at(spec: HalfCellSpec, energy: float, ordering: Ordering = Ordering.WIDE_FIRST) -> KardParams:
    cell = spec.oriented(ordering)
    return kard_decompose(half_cell_w(cell, energy), lead_velocity(cell, energy))


def mu_of_energy(spec: HalfCellSpec, energy: float, ordering: Ordering = Ordering.WIDE_FIRST) -> float:
    """Double-cell impedance; ``-inf``/``+inf`` on band edges."""
    try:
        return kard_at(spec, energy, ordering).mu
    except BandEdgeError:
        return -math.inf


def impedance_from_array(w_total: WMatrix, nu: float) -> float:
    """``ln(nu/Z_N)`` with ``Z_N^2 = -W21/W12`` of a symmetric array product."""
    return 0.5 * math.log(nu * nu * w_total.u / -w_total.gp)


# -- transparent states and resonances ---------------------------------------------

def _scan_sign_change(fn: Callable[[float], float], lo: float, hi: float,
                      points: int) -> list[tuple[float, float]]:
    grid = np.linspace(lo, hi, points)
    vals = [fn(float(e)) for e in grid]
    out = []
    for i in range(points - 1):
        a, b = vals[i], vals[i + 1]
        if math.isfinite(a) and math.isfinite(b) and a * b < 0:
            out.append((float(grid[i]), float(grid[i + 1])))
    return out


def find_transparent(spec: HalfCellSpec, band: tuple[float, float],
                     ordering: Ordering = Ordering.WIDE_FIRST,
                     nu_of_e: Optional[Callable[[float], float]] = None,
                     n_half: Optional[int] = None,
                     points: int = 2000) -> Optional[float]:
    """Energy inside ``band`` where the impedance ``mu`` vanishes.

    With ``n_half`` (even) the root is taken on the impedance of the full
    ``n_half``-cell product instead of the half-cell Kard form, which makes
    the N-independence a checkable statement. Returns ``None`` when ``mu``
    keeps its sign across the band.
    """
    lo, hi = band
    cell = spec.oriented(ordering)
    nu_of_e = nu_of_e or (lambda e: lead_velocity(cell, e))
    # stay off the edges where mu diverges
    pad = 1e-9 * max(1.0, hi - lo)
    lo, hi = lo + pad, hi - pad
    zones = set()
    for e in np.linspace(lo, hi, 9):
        try:
            zones.add(kard_decompose(half_cell_w(cell, float(e)), nu_of_e(float(e))).zone)
        except BandEdgeError:
            continue
        except ZoneError as exc:
            raise ValueError(f"band {band} leaves the classified zones") from exc
    if len(zones) != 1 or not next(iter(zones)).allowed:
        raise ValueError(f"band {band} straddles a zone boundary: {sorted(z.label for z in zones)}")

    def mu_kard(e: float) -> float:
        try:
            return kard_decompose(half_cell_w(cell, e), nu_of_e(e)).mu
        except BandEdgeError:
            return math.nan

    brackets = _scan_sign_change(mu_kard, lo, hi, points)
    if not brackets:
        return None
    a, b = brackets[0]
    if n_half is None:
        return brentq(mu_kard, a, b, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)
    if n_half % 2:
        raise ValueError("array impedance is defined for even half-cell counts")

    def mu_array(e: float) -> float:
        return impedance_from_array(array_w(half_cell_w(cell, e), n_half), nu_of_e(e))

    # widen the bracket slightly so the product root is bracketed too
    width = b - a
    a2, b2 = max(lo, a - width), min(hi, b + width)
    return brentq(mu_array, a2, b2, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)


def find_crossings(spec: HalfCellSpec, band: tuple[float, float],
                   ordering: Ordering = Ordering.WIDE_FIRST,
                   points: int = 2000) -> list[float]:
    """Energies in ``band`` where ``|eta| = |alpha|``.

    For odd arrays the two bounds ``1/cosh^2 alpha`` and ``1/cosh^2 eta``
    swap there, which is the odd-N counterpart of the transparent state.
    Both ``mu = eta - alpha`` and ``eta + alpha`` roots are returned, so
    the result does not depend on the ordering.
    """
    lo, hi = band
    cell = spec.oriented(ordering)
    pad = 1e-9 * max(1.0, hi - lo)
    lo, hi = lo + pad, hi - pad

    def f(e: float) -> float:
        try:
            kp = kard_decompose(half_cell_w(cell, e), lead_velocity(cell, e))
        except ZoneError:
            return math.nan
        return kp.eta * kp.eta - kp.alpha * kp.alpha

    return [brentq(f, a, b, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)
            for a, b in _scan_sign_change(f, lo, hi, points)]


class Rule(enum.Enum):
    INTEGER_PI = "IntegerPi"
    HALF_INTEGER = "HalfInteger"
    TRANSPARENT = "Transparent"
    UNCLASSIFIED = "Unclassified"


class Resonance(NamedTuple):
    """A local maximum of ``T_N``.

    ``phase`` and ``residual`` are taken at the maximum itself. The phase
    rules hold exactly where ``T_N`` meets its upper bound, which for odd
    ``N`` is slightly displaced from the maximum because the bounds move
    with energy; that point is ``touch_energy`` and the rule is read there.
    """

    energy: float
    T: float
    phase: float          # N * beta at the maximum
    rule: Rule
    residual: float       # distance of ``phase`` from the rule's lattice, rad
    touch_energy: float
    touch_residual: float


@dataclass
class ResonanceReport:
    n_half: int
    band: tuple[float, float]
    ordering: Ordering
    resonances: list[Resonance]
    transparent_energy: Optional[float]
    crossings: list[float] = dc_field(default_factory=list)

    @property
    def energies(self) -> list[float]:
        return [r.energy for r in self.resonances]

    def with_rule(self, rule: Rule) -> list[Resonance]:
        return [r for r in self.resonances if r.rule is rule]


def transmission_array(spec: HalfCellSpec, n_half: int, energy: float,
                       ordering: Ordering = Ordering.WIDE_FIRST) -> float:
    """Direct-product transmission of ``n_half`` half-cells."""
    cell = spec.oriented(ordering)
    w = array_w(half_cell_w(cell, energy), n_half)
    return transmission_from_m(w_to_m(w, lead_velocity(cell, energy)))


def _lattice_residuals(phase: float) -> tuple[float, float]:
    r_int = abs(phase - round(phase / math.pi) * math.pi)
    r_half = abs(phase - (math.floor(phase / math.pi) + 0.5) * math.pi)
    return r_int, r_half


def _classify_phase(phase: float, tol: float) -> tuple[Rule, float]:
    r_int, r_half = _lattice_residuals(phase)
    if r_int <= r_half:
        return (Rule.INTEGER_PI if r_int < tol else Rule.UNCLASSIFIED), r_int
    return (Rule.HALF_INTEGER if r_half < tol else Rule.UNCLASSIFIED), r_half


def _touch_ratio(spec: HalfCellSpec, n_half: int, energy: float, ordering: Ordering) -> float:
    """``T_N`` over its active upper bound (1 where the bound is met)."""
    try:
        kp = kard_at(spec, energy, ordering)
    except ZoneError:
        return math.nan
    return transmission_array(spec, n_half, energy, ordering) / envelopes(kp, n_half).upper


def _touch_point(spec: HalfCellSpec, n_half: int, lo: float, hi: float,
                 ordering: Ordering, samples: int = 200) -> float:
    grid = np.linspace(lo, hi, samples)
    r = np.array([_touch_ratio(spec, n_half, float(e), ordering) for e in grid])
    if np.all(np.isnan(r)):
        return math.nan
    i = int(np.nanargmax(r))
    a, b = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, samples - 1)])
    res = minimize_scalar(lambda e: -_touch_ratio(spec, n_half, e, ordering),
                          bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def find_resonances(spec: HalfCellSpec, n_half: int, band: tuple[float, float],
                    ordering: Ordering = Ordering.WIDE_FIRST,
                    points: int = SCAN_POINTS, phase_tol: float = PHASE_TOL) -> ResonanceReport:
    """Local maxima of the direct-product transmission inside ``band``.

    Maxima are found on a grid and refined by a bounded scalar search.
    Each one is labelled by the phase rule ``N beta = p pi`` or
    ``N beta = (m + 1/2) pi`` that holds where ``T_N`` meets its upper
    bound within the same lobe, or as transparent when that lobe holds
    the ``mu = 0`` point (even N) or a bound crossing (odd N).
    """
    if n_half < 2:
        raise ValueError("need at least two half-cells")
    lo, hi = band
    pad = 1e-9 * max(1.0, hi - lo)
    grid = np.linspace(lo + pad, hi - pad, points)
    t = np.array([transmission_array(spec, n_half, float(e), ordering) for e in grid])
    transparent = find_transparent(spec, band, ordering)
    crossings = find_crossings(spec, band, ordering) if n_half % 2 else []
    special = crossings if n_half % 2 else ([transparent] if transparent is not None else [])
    minima = [0] + [i for i in range(1, points - 1) if t[i] <= t[i - 1] and t[i] < t[i + 1]] + [points - 1]
    out = []
    for i in range(1, points - 1):
        if not (t[i] >= t[i - 1] and t[i] > t[i + 1]):
            continue
        res = minimize_scalar(lambda e: -transmission_array(spec, n_half, e, ordering),
                              bounds=(float(grid[i - 1]), float(grid[i + 1])), method="bounded",
                              options={"xatol": 1e-10})
        energy = float(res.x)
        phase = n_half * kard_at(spec, energy, ordering).beta
        # the lobe between the neighbouring minima of T
        k = np.searchsorted(minima, i)
        lobe = (float(grid[minima[k - 1]]), float(grid[minima[k]]))
        touch = _touch_point(spec, n_half, *lobe, ordering)
        touch_phase = n_half * kard_at(spec, touch, ordering).beta
        rule, touch_resid = _classify_phase(touch_phase, phase_tol)
        r_int, r_half = _lattice_residuals(phase)
        resid = {Rule.INTEGER_PI: r_int, Rule.HALF_INTEGER: r_half}.get(rule, min(r_int, r_half))
        if rule is Rule.UNCLASSIFIED and any(lobe[0] <= e <= lobe[1] for e in special):
            rule = Rule.TRANSPARENT
        out.append(Resonance(energy, -float(res.fun), phase, rule, resid, touch, touch_resid))
    return ResonanceReport(n_half, band, ordering, out, transparent, crossings)


# -- sweeps ---------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    energy: float
    zone: str
    cos_phi_h: float
    cos_phi: float
    alpha: float
    eta: float
    mu_or_xi: float
    T_N: float
    env_min: float
    env_max: float
    T_closed: float
    discrepancy: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return [getattr(self, name) for name in self.columns()]


def _record(device: Device, cell: Optional[HalfCellSpec], energy: float) -> SweepRecord:
    nu = exterior_velocity(energy, device.exterior_mass, device.exterior_potential)
    t_direct = transmission_from_m(w_to_m(device_w(device, energy), nu))
    nan = math.nan
    if cell is None:
        return SweepRecord(energy, "unknown", nan, nan, nan, nan, nan, t_direct, nan, nan, nan, nan)
    w_r = half_cell_w(cell, energy)
    cos_h, cos_phi = bloch_cos_phi(w_r)
    n_half = device.n_half_cells
    try:
        kp = kard_decompose(w_r, nu)
    except BandEdgeError:
        # mu diverges on an edge; sentinel rather than an exception
        return SweepRecord(energy, "edge", cos_h, cos_phi, nan, nan, -math.inf, t_direct,
                           nan, nan, nan, nan)
    except ZoneError:
        return SweepRecord(energy, "unknown", cos_h, cos_phi, nan, nan, nan, t_direct,
                           nan, nan, nan, nan)
    env = envelopes(kp, n_half)
    t_closed = closed_form_transmission(kp, n_half)
    return SweepRecord(energy, kp.zone.label, cos_h, cos_phi, kp.alpha, kp.eta, kp.mu,
                       t_direct, env.lower, env.upper, t_closed, abs(t_closed - t_direct))


def _sweep_chunk(args):
    device, cell, energies = args
    return [_record(device, cell, e) for e in energies]


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("BILAT_THREADS", "1")))
    except ValueError:
        return 1


def sweep(target: Union[Device, HalfCellSpec], energies: Sequence[float],
          n_half: Optional[int] = None, ordering: Ordering = Ordering.WIDE_FIRST,
          workers: Optional[int] = None) -> list[SweepRecord]:
    """One record per energy; output order follows the grid.

    ``target`` is a device or a half-cell (then ``n_half`` and
    ``ordering`` build the array). Energies at or below the lead band
    bottom carry no propagating channel and are skipped.
    """
    energies = [float(e) for e in energies]
    if any(b <= a for a, b in zip(energies, energies[1:])):
        raise ValueError("energy grid must be strictly increasing")
    if isinstance(target, HalfCellSpec):
        if n_half is None:
            raise ValueError("n_half is required when sweeping a half-cell")
        device = build_biperiodic(target, n_half, ordering)
    else:
        device = target
    cell = device.leading_half_cell() if device.is_biperiodic else None
    energies = [e for e in energies if e > device.exterior_potential]
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(energies) < 256:
        return [_record(device, cell, e) for e in energies]
    chunks = np.array_split(np.asarray(energies), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_sweep_chunk, [(device, cell, list(map(float, c))) for c in chunks])
    return [rec for part in parts for rec in part]
