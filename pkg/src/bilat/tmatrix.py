"""Real W and complex M transfer matrices.

The W matrix acts on the spinor ``(psi, psi')`` where the prime is the
derivative divided by the effective mass,

    psi' = (hbar / m m*) dpsi/dx,

which is continuous across heterointerfaces (BenDaniel-Duke matching), so
layers compose by plain multiplication with no interface matrices.
Velocities are measured in units of ``hbar / (m_e nm)``: a plane wave of
wavenumber ``q`` (1/nm) in a material of mass ``m*`` has velocity
``q / m*``. Only ratios of velocities enter observables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .device import HBAR2_2M, Device, HalfCellSpec, Layer

# |E - V| below this (meV) uses the zero-wavenumber limit
_FLAT_BAND = 1e-9
# closed-form Chebyshev powers only when |cos phi| <= 1 - this
_CHEB_MARGIN = 1e-12


@dataclass(frozen=True, slots=True)
class WMatrix:
    """``[[g, u], [gp, up]]``; ``gp`` and ``up`` are scaled derivatives."""

    g: float
    u: float
    gp: float
    up: float

    def __matmul__(self, other: "WMatrix") -> "WMatrix":
        return WMatrix(
            self.g * other.g + self.u * other.gp,
            self.g * other.u + self.u * other.up,
            self.gp * other.g + self.up * other.gp,
            self.gp * other.u + self.up * other.up,
        )

    @property
    def det(self) -> float:
        return self.g * self.up - self.u * self.gp

    @property
    def half_trace(self) -> float:
        return 0.5 * (self.g + self.up)

    @property
    def scale(self) -> float:
        return max(abs(self.g), abs(self.u), abs(self.gp), abs(self.up))

    def inverse(self) -> "WMatrix":
        # exact for det = 1
        return WMatrix(self.up, -self.u, -self.gp, self.g)

    def to_array(self) -> np.ndarray:
        return np.array([[self.g, self.u], [self.gp, self.up]])

    @classmethod
    def from_array(cls, a) -> "WMatrix":
        return cls(float(a[0][0]), float(a[0][1]), float(a[1][0]), float(a[1][1]))

    @classmethod
    def identity(cls) -> "WMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True, slots=True)
class MMatrix:
    """Transfer matrix between flux-normalised plane-wave amplitudes.

    ``(a_L, b_L) = M (a_R, b_R)``; ``nu`` is the lead velocity used to
    build it.
    """

    m11: complex
    m12: complex
    m21: complex
    m22: complex
    nu: float

    def __matmul__(self, other: "MMatrix") -> "MMatrix":
        return MMatrix(
            self.m11 * other.m11 + self.m12 * other.m21,
            self.m11 * other.m12 + self.m12 * other.m22,
            self.m21 * other.m11 + self.m22 * other.m21,
            self.m21 * other.m12 + self.m22 * other.m22,
            self.nu,
        )

    @property
    def det(self) -> complex:
        return self.m11 * self.m22 - self.m12 * self.m21

    def to_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])


def wavenumber_sq(energy: float, potential: float, mass: float) -> float:
    """Signed ``q^2`` (1/nm^2); negative below the band edge."""
    return (energy - potential) * mass / HBAR2_2M


def exterior_velocity(energy: float, mass: float, potential: float = 0.0) -> float:
    """Lead velocity ``k / m*``; zero or NaN below the lead band bottom is caller error."""
    if energy <= potential:
        raise ValueError(f"no propagating lead channel at E = {energy} meV (lead bottom {potential} meV)")
    return math.sqrt(wavenumber_sq(energy, potential, mass)) / mass


def layer_w(layer: Layer, energy: float) -> WMatrix:
    """Exact W matrix of one constant-potential layer."""
    w = layer.width
    m = layer.mass
    diff = energy - layer.potential
    if w == 0:
        return WMatrix.identity()
    if abs(diff) < _FLAT_BAND:
        return WMatrix(1.0, m * w, 0.0, 1.0)
    if diff > 0:
        q = math.sqrt(diff * m / HBAR2_2M)
        v = q / m
        c, s = math.cos(q * w), math.sin(q * w)
        return WMatrix(c, s / v, -v * s, c)
    kappa = math.sqrt(-diff * m / HBAR2_2M)
    v = kappa / m
    c, s = math.cosh(kappa * w), math.sinh(kappa * w)
    return WMatrix(c, s / v, v * s, c)


def compose(ws: Sequence[WMatrix]) -> WMatrix:
    """Product for segments listed left to right in space (``W_k ... W_1``)."""
    if len(ws) == 0:
        raise ValueError("cannot compose an empty list of transfer matrices")
    total = ws[0]
    for w in ws[1:]:
        total = w @ total
    return total


def device_w(device: Device, energy: float) -> WMatrix:
    return compose([layer_w(layer, energy) for layer in device.layers])


def half_cell_w(spec: HalfCellSpec, energy: float) -> WMatrix:
    """``W_R``: the half-cell traversed a, b, c from x = 0 to d."""
    return compose([layer_w(layer, energy) for layer in spec.layers()])


def reverse_half_cell(w: WMatrix) -> WMatrix:
    """``W_L`` from ``W_R``: the mirror-image half-cell swaps ``g`` and ``u'``."""
    return WMatrix(w.up, w.u, w.gp, w.g)


def double_cell_w(w_r: WMatrix) -> WMatrix:
    """Symmetric double cell ``W_R W_L``."""
    g, u, gp, up = w_r.g, w_r.u, w_r.gp, w_r.up
    diag = g * up + gp * u
    return WMatrix(diag, 2 * u * g, 2 * up * gp, diag)


def _power_binary(w: WMatrix, n: int) -> WMatrix:
    result = WMatrix.identity()
    base = w
    while n:
        if n & 1:
            result = base @ result
        base = base @ base
        n >>= 1
    return result


def w_power_cheb(w: WMatrix, n: int) -> WMatrix:
    """``W**n`` through the Chebyshev identity for unimodular matrices.

    Falls back to binary powering outside the allowed band and near its
    edges, where ``sin(phi)`` in the denominator loses precision.
    """
    if n < 0:
        raise ValueError("negative powers are not supported")
    if n == 0:
        return WMatrix.identity()
    if n == 1:
        return w
    x = w.half_trace
    if abs(x) > 1 - _CHEB_MARGIN:
        return _power_binary(w, n)
    phi = math.acos(x)
    sin_phi = math.sqrt((1 - x) * (1 + x))
    a = math.sin(n * phi) / sin_phi
    b = math.sin((n - 1) * phi) / sin_phi
    return WMatrix(a * w.g - b, a * w.u, a * w.gp, a * w.up - b)


def w_to_m(w: WMatrix, nu: float) -> MMatrix:
    """``M = L^-1 W^-1 L`` for equal lead velocities ``nu`` on both sides."""
    if not nu > 0:
        raise ValueError(f"lead velocity must be positive, got {nu}")
    s = w.g + w.up
    d = w.g - w.up
    odd = nu * w.u - w.gp / nu
    even = nu * w.u + w.gp / nu
    return MMatrix(
        complex(0.5 * s, -0.5 * odd),
        complex(-0.5 * d, 0.5 * even),
        complex(-0.5 * d, -0.5 * even),
        complex(0.5 * s, 0.5 * odd),
        nu,
    )


def transmission_from_m(m: MMatrix) -> float:
    """``|t|^2 = 1 / |M11|^2``."""
    mag2 = m.m11.real ** 2 + m.m11.imag ** 2
    if mag2 == 0:
        raise ZeroDivisionError("M11 vanished; matrix is not a valid transfer matrix")
    return 1.0 / mag2


def transmission_direct(device: Device, energy: float) -> float:
    """Ground-truth transmission from the full layer product."""
    nu = exterior_velocity(energy, device.exterior_mass, device.exterior_potential)
    return transmission_from_m(w_to_m(device_w(device, energy), nu))


def l_matrix(nu: float) -> np.ndarray:
    """Plane-wave to spinor basis change for lead velocity ``nu``."""
    r = math.sqrt(nu)
    return np.array([[1 / r, 1 / r], [1j * r, -1j * r]])
