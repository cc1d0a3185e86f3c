"""Brute-force reference for the transfer matrices.

The device is sampled on a uniform node-centred grid of slice width
``h``; each slice carries the slice-averaged mass and potential and is
propagated exactly as a constant-coefficient segment. Averaging smears
every interface over one slice, so the error is second order in ``h``
and does not vanish even when interfaces fall on slice boundaries. Nothing
here calls :mod:`bilat.tmatrix` beyond the :class:`WMatrix` container.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .device import HBAR2_2M, Device
from .tmatrix import WMatrix

MATCHING = ("bdd", "psi_prime")


@dataclass(frozen=True)
class OracleConfig:
    """Slice width (nm) and whether to Richardson-extrapolate ``h, h/2``."""

    slice_width: float = 1e-3
    richardson: bool = False

    def __post_init__(self):
        if not self.slice_width > 0:
            raise ValueError(f"slice width must be positive, got {self.slice_width}")


def _profile(device: Device) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Interface positions and the piecewise mass / potential values."""
    widths = np.array([layer.width for layer in device.layers])
    edges = np.concatenate([[0.0], np.cumsum(widths)])
    mass = np.array([layer.mass for layer in device.layers])
    pot = np.array([layer.potential for layer in device.layers])
    return edges, mass, pot


def _slice_averages(edges, values, lo, hi) -> np.ndarray:
    """Average of a piecewise-constant function over each ``[lo_j, hi_j]``."""
    # integral of the step function via its cumulative piecewise-linear form
    cum = np.concatenate([[0.0], np.cumsum(values * np.diff(edges))])

    def integral(x):
        return np.interp(x, edges, cum)

    return (integral(hi) - integral(lo)) / (hi - lo)


def _slice_matrices(m: np.ndarray, v: np.ndarray, h: np.ndarray, energy: float,
                    matching: str) -> np.ndarray:
    """Stack of exact 2x2 propagators for constant-coefficient slices."""
    k2 = (energy - v) * m / HBAR2_2M          # signed q^2
    q = np.sqrt(np.abs(k2))
    x = q * h
    small = x < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(k2 >= 0, np.cos(x), np.cosh(x))
        sx = np.where(k2 >= 0, np.sin(x), np.sinh(x))
        s_over_q = np.where(small, h, sx / np.where(q == 0, 1.0, q))
    # generator for (psi, psi'): [[0, m], [(V - E) m / (m HBAR2_2M), 0]]
    if matching == "bdd":
        a12 = m
        a21 = -k2 / m
    else:
        # ordinary derivative: [[0, 1], [-q^2, 0]]
        a12 = np.ones_like(m)
        a21 = -k2
    out = np.empty((len(m), 2, 2))
    out[:, 0, 0] = c
    out[:, 1, 1] = c
    out[:, 0, 1] = s_over_q * a12
    out[:, 1, 0] = s_over_q * a21
    return out


def _ordered_product(mats: np.ndarray) -> np.ndarray:
    """``M_n ... M_1`` by pairwise reduction (keeps rounding growth ~log n)."""
    while len(mats) > 1:
        if len(mats) % 2:
            tail = mats[-1:]
            mats = mats[:-1]
        else:
            tail = None
        mats = np.matmul(mats[1::2], mats[0::2])
        if tail is not None:
            mats = np.concatenate([mats, tail])
    return mats[0]


def _integrate(device: Device, energy: float, h: float, matching: str) -> np.ndarray:
    edges, mass, pot = _profile(device)
    length = edges[-1]
    n = max(1, int(round(length / h)))
    step = length / n
    nodes = np.arange(n + 1) * step
    lo = np.clip(nodes - step / 2, 0.0, length)
    hi = np.clip(nodes + step / 2, 0.0, length)
    m = _slice_averages(edges, mass, lo, hi)
    v = _slice_averages(edges, pot, lo, hi)
    mats = _slice_matrices(m, v, hi - lo, energy, matching)
    total = _ordered_product(mats)
    if matching == "psi_prime":
        # convert (psi, dpsi/dx) back to (psi, dpsi/dx / m) at the ends
        m_in, m_out = mass[0], mass[-1]
        total = np.diag([1.0, 1.0 / m_out]) @ total @ np.diag([1.0, m_in])
    return total


def integrate_w(device: Device, energy: float, config: OracleConfig = OracleConfig(),
                matching: str = "bdd") -> WMatrix:
    """Reference ``W`` for ``device`` at ``energy`` (meV).

    ``matching="psi_prime"`` carries the ordinary derivative across
    interfaces instead of ``psi'/m``; it disagrees with the exact product
    whenever the masses differ, which is what it is for.
    """
    if matching not in MATCHING:
        raise ValueError(f"matching must be one of {MATCHING}, got {matching!r}")
    h = config.slice_width
    w = _integrate(device, energy, h, matching)
    if config.richardson:
        w_half = _integrate(device, energy, h / 2, matching)
        w = (4 * w_half - w) / 3
    return WMatrix.from_array(w)


def _free(kd: float, x: float) -> np.ndarray:
    return np.array([[math.cos(kd * x), math.sin(kd * x) / kd],
                     [-kd * math.sin(kd * x), math.cos(kd * x)]])


def delta_limit_w(omega_d: float, width_over_d: float, kd: float) -> WMatrix:
    """Finite square barrier standing in for the delta factor.

    Dimensionless, lengths in units of ``d``: the barrier has width ``w``
    and height ``2 Omega d / w`` (units of ``1/d^2``), so its area is that
    of the delta. The free propagation over the barrier's own footprint is
    divided out, so ``Omega = 0`` gives the identity at any width and the
    result tends to ``[[1, 0], [2 Omega d, 1]]`` linearly in ``w``.
    """
    w = width_over_d
    if not w > 0:
        raise ValueError(f"barrier width must be positive, got {w}")
    if not kd > 0:
        raise ValueError(f"kd must be positive, got {kd}")
    kappa2 = 2 * omega_d / w - kd * kd
    if kappa2 > 0:
        kap = math.sqrt(kappa2)
        barrier = np.array([[math.cosh(kap * w), math.sinh(kap * w) / kap],
                            [kap * math.sinh(kap * w), math.cosh(kap * w)]])
    elif kappa2 < 0:
        q = math.sqrt(-kappa2)
        barrier = np.array([[math.cos(q * w), math.sin(q * w) / q],
                            [-q * math.sin(q * w), math.cos(q * w)]])
    else:
        barrier = np.array([[1.0, w], [0.0, 1.0]])
    back = _free(kd, -w / 2)
    return WMatrix.from_array(back @ barrier @ back)


def delta_limit_half_cell(omega_d: float, s_over_d: float, kd: float,
                          width_over_d: float) -> WMatrix:
    """``W_c F W_a`` with ``F`` from :func:`delta_limit_w`."""
    a = 0.5 * (1 + s_over_d)
    c = 0.5 * (1 - s_over_d)
    f = delta_limit_w(omega_d, width_over_d, kd).to_array()
    return WMatrix.from_array(_free(kd, c) @ f @ _free(kd, a))


def compare(a: WMatrix, b: WMatrix) -> float:
    """Largest absolute difference between matching entries."""
    return max(abs(a.g - b.g), abs(a.u - b.u), abs(a.gp - b.gp), abs(a.up - b.up))


def convergence_table(device: Device, energy: float, exact: WMatrix,
                      widths: Sequence[float], richardson: bool = False) -> list[tuple[float, float]]:
    """``(h, max |W_oracle - W_exact|)`` for each slice width."""
    return [(h, compare(integrate_w(device, energy, OracleConfig(h, richardson)), exact))
            for h in widths]
