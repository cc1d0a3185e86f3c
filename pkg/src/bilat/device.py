"""Layered potentials, biperiodic generators and device config files.

Units throughout the package: energies in meV, lengths in nm, effective
masses relative to the free electron mass.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

# hbar^2 / (2 m_e) in meV nm^2
HBAR2_2M = 38.0998

# Nominal GaAs / AlGaAs constant masses used for the reference device.
GAAS_MASS = 0.074
ALGAAS_MASS = 0.080


@dataclass(frozen=True)
class PhysicalConstants:
    hbar2_over_2m: float = HBAR2_2M


CONSTANTS = PhysicalConstants()


class ConfigError(ValueError):
    """Raised for malformed or physically invalid device descriptions."""


class Ordering(enum.Enum):
    WIDE_FIRST = "wide_first"
    NARROW_FIRST = "narrow_first"

    def flipped(self) -> "Ordering":
        if self is Ordering.WIDE_FIRST:
            return Ordering.NARROW_FIRST
        return Ordering.WIDE_FIRST

    @classmethod
    def parse(cls, text: str) -> "Ordering":
        key = text.strip().lower().replace("-", "_")
        aliases = {"wide": "wide_first", "narrow": "narrow_first", "w": "wide_first", "n": "narrow_first"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown ordering {text!r}; expected wide_first or narrow_first") from None


@dataclass(frozen=True)
class Layer:
    """A region of constant potential and constant effective mass."""

    width: float
    potential: float
    mass: float

    def __post_init__(self):
        if not math.isfinite(self.width) or self.width < 0:
            raise ConfigError(f"layer width must be finite and >= 0, got {self.width}")
        if not math.isfinite(self.mass) or self.mass <= 0:
            raise ConfigError(f"layer mass must be > 0, got {self.mass}")
        if not math.isfinite(self.potential):
            raise ConfigError(f"layer potential must be finite, got {self.potential}")

    def same_material(self, other: "Layer") -> bool:
        return self.potential == other.potential and self.mass == other.mass


@dataclass(frozen=True)
class HalfCellSpec:
    """Well segment ``a``, barrier ``b``, well segment ``c``.

    ``2a`` is the well that sits at the centre of the double cell (the
    "wide" well of the reference device), ``2c`` the one shared between
    neighbouring double cells.
    """

    a: float
    b: float
    c: float
    barrier_height: float
    well_mass: float = GAAS_MASS
    barrier_mass: float = ALGAAS_MASS

    def __post_init__(self):
        for name in ("a", "b", "c"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"half-cell {name} must be >= 0, got {value}")
        if self.d <= 0:
            raise ConfigError("half-cell width a + b + c must be positive")
        if self.well_mass <= 0 or self.barrier_mass <= 0:
            raise ConfigError("effective masses must be positive")
        if not math.isfinite(self.barrier_height):
            raise ConfigError("barrier height must be finite")

    @property
    def d(self) -> float:
        return self.a + self.b + self.c

    @property
    def s(self) -> float:
        return self.a - self.c

    def mirrored(self) -> "HalfCellSpec":
        """The same half-cell with ``a`` and ``c`` exchanged."""
        return replace(self, a=self.c, c=self.a)

    def oriented(self, ordering: Ordering) -> "HalfCellSpec":
        """Half-cell whose ``2a`` well comes first for the given ordering."""
        return self if ordering is Ordering.WIDE_FIRST else self.mirrored()

    def layers(self) -> tuple[Layer, Layer, Layer]:
        """The ``a``, ``b``, ``c`` layers in the order x = 0 -> d."""
        return (
            Layer(self.a, 0.0, self.well_mass),
            Layer(self.b, self.barrier_height, self.barrier_mass),
            Layer(self.c, 0.0, self.well_mass),
        )

    @classmethod
    def from_wells(cls, wide: float, narrow: float, barrier: float, height: float,
                   well_mass: float = GAAS_MASS, barrier_mass: float = ALGAAS_MASS) -> "HalfCellSpec":
        return cls(wide / 2, barrier, narrow / 2, height, well_mass, barrier_mass)


@dataclass(frozen=True)
class Device:
    """An ordered stack of layers between two semi-infinite leads.

    Devices made by :func:`build_biperiodic` remember the generating
    half-cell, its count and ordering so that closed-form results can be
    attached to them; explicit layer stacks leave those fields ``None``.
    """

    layers: tuple[Layer, ...]
    exterior_mass: float
    exterior_potential: float = 0.0
    n_half_cells: Optional[int] = None
    ordering: Optional[Ordering] = None
    half_cell: Optional[HalfCellSpec] = field(default=None, compare=True)

    def __post_init__(self):
        if len(self.layers) == 0:
            raise ConfigError("device has no layers")
        if self.exterior_mass <= 0:
            raise ConfigError("exterior mass must be positive")

    @property
    def total_width(self) -> float:
        return math.fsum(layer.width for layer in self.layers)

    @property
    def is_biperiodic(self) -> bool:
        return self.half_cell is not None and self.n_half_cells is not None

    def leading_half_cell(self) -> HalfCellSpec:
        """Half-cell ``W_R`` such that the device reads L R L R ... from the left."""
        if not self.is_biperiodic:
            raise ValueError("device was not generated from a half-cell")
        return self.half_cell.oriented(self.ordering)


def _merge(layers: Sequence[Layer]) -> tuple[Layer, ...]:
    merged: list[Layer] = []
    for layer in layers:
        if layer.width == 0:
            continue
        if merged and merged[-1].same_material(layer):
            prev = merged[-1]
            merged[-1] = Layer(prev.width + layer.width, prev.potential, prev.mass)
        else:
            merged.append(layer)
    return tuple(merged)


def build_biperiodic(spec: HalfCellSpec, n_half_cells: int,
                     ordering: Ordering = Ordering.WIDE_FIRST) -> Device:
    """Alternate mirror-imaged half-cells L R L R ... from left to right.

    ``L`` is the half-cell read from ``x = -d`` to ``0`` (layers c, b, a)
    and ``R`` its mirror image (a, b, c), so the first interior well is
    ``2a`` for ``WIDE_FIRST``. The outer well segments stay in the stack
    (they are made of lead material) to keep the total width ``N d``.
    """
    if int(n_half_cells) != n_half_cells or n_half_cells < 1:
        raise ConfigError(f"need at least one half-cell, got {n_half_cells}")
    n_half_cells = int(n_half_cells)
    cell = spec.oriented(ordering)
    right = cell.layers()
    left = right[::-1]
    seq: list[Layer] = []
    for i in range(n_half_cells):
        seq.extend(left if i % 2 == 0 else right)
    return Device(
        layers=_merge(seq),
        exterior_mass=spec.well_mass,
        exterior_potential=0.0,
        n_half_cells=n_half_cells,
        ordering=ordering,
        half_cell=spec,
    )


def reverse_device(device: Device) -> Device:
    """Mirror the device in space.

    Odd-N biperiodic arrays turn into the opposite ordering. Even-N arrays
    are palindromes and map onto themselves, so their ordering is kept.
    """
    layers = device.layers[::-1]
    ordering = device.ordering
    if device.is_biperiodic and device.n_half_cells % 2 == 1:
        ordering = ordering.flipped()
    return replace(device, layers=layers, ordering=ordering)


# -- config files -----------------------------------------------------------

_BIPERIODIC_KEYS = {
    "well_wide_nm", "well_narrow_nm", "barrier_nm", "barrier_meV",
    "well_mass", "barrier_mass", "half_cells", "order",
}
_LAYER_KEYS = {"width_nm", "potential_meV", "mass"}


def _number(obj: dict, key: str, where: str) -> float:
    try:
        value = obj[key]
    except KeyError:
        raise ConfigError(f"{where}: missing key {key!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: {key!r} must be a number, got {value!r}")
    return float(value)


def parse_device(config_text: str) -> Device:
    """Parse a JSON device description into a validated :class:`Device`."""
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("device config must be a JSON object")

    has_layers = "layers" in doc
    has_gen = "biperiodic" in doc
    if has_layers and has_gen:
        raise ConfigError("give either 'layers' or 'biperiodic', not both")
    if not has_layers and not has_gen:
        raise ConfigError("device config needs a 'layers' list or a 'biperiodic' block")

    if has_gen:
        gen = doc["biperiodic"]
        if not isinstance(gen, dict):
            raise ConfigError("'biperiodic' must be an object")
        unknown = set(gen) - _BIPERIODIC_KEYS
        if unknown:
            raise ConfigError(f"biperiodic: unknown keys {sorted(unknown)}")
        where = "biperiodic"
        half_cells = gen.get("half_cells")
        if isinstance(half_cells, bool) or not isinstance(half_cells, int):
            raise ConfigError(f"{where}: 'half_cells' must be an integer")
        spec = HalfCellSpec.from_wells(
            wide=_number(gen, "well_wide_nm", where),
            narrow=_number(gen, "well_narrow_nm", where),
            barrier=_number(gen, "barrier_nm", where),
            height=_number(gen, "barrier_meV", where),
            well_mass=_number(gen, "well_mass", where) if "well_mass" in gen else GAAS_MASS,
            barrier_mass=_number(gen, "barrier_mass", where) if "barrier_mass" in gen else ALGAAS_MASS,
        )
        ordering = Ordering.parse(gen.get("order", "wide_first"))
        return build_biperiodic(spec, half_cells, ordering)

    raw = doc["layers"]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("'layers' must be a non-empty list")
    layers = []
    for i, item in enumerate(raw):
        where = f"layers[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{where}: expected an object")
        unknown = set(item) - _LAYER_KEYS
        if unknown:
            raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
        layers.append(Layer(_number(item, "width_nm", where),
                            _number(item, "potential_meV", where),
                            _number(item, "mass", where)))
    ext_mass = _number(doc, "exterior_mass", "device") if "exterior_mass" in doc else layers[0].mass
    ext_pot = _number(doc, "exterior_potential_meV", "device") if "exterior_potential_meV" in doc else 0.0
    return Device(tuple(layers), exterior_mass=ext_mass, exterior_potential=ext_pot)


def serialize_device(device: Device) -> str:
    """Inverse of :func:`parse_device`; floats are written with ``repr``."""
    if device.is_biperiodic:
        spec = device.half_cell
        doc = {"biperiodic": {
            "well_wide_nm": 2 * spec.a,
            "well_narrow_nm": 2 * spec.c,
            "barrier_nm": spec.b,
            "barrier_meV": spec.barrier_height,
            "well_mass": spec.well_mass,
            "barrier_mass": spec.barrier_mass,
            "half_cells": device.n_half_cells,
            "order": device.ordering.value,
        }}
    else:
        doc = {
            "layers": [{"width_nm": l.width, "potential_meV": l.potential, "mass": l.mass}
                       for l in device.layers],
            "exterior_mass": device.exterior_mass,
            "exterior_potential_meV": device.exterior_potential,
        }
    # json uses float.__repr__, which round-trips exactly
    return json.dumps(doc, indent=2) + "\n"


def reference_half_cell(**overrides) -> HalfCellSpec:
    """GaAs/AlGaAs half-cell of the three-double-cell reference device."""
    spec = HalfCellSpec.from_wells(wide=4.3, narrow=3.8, barrier=3.8, height=288.09)
    return replace(spec, **overrides) if overrides else spec
