"""Transfer-matrix tools for biperiodic semiconductor superlattices."""

from .bands import (
    BandEdge,
    BandEdgeError,
    KardParams,
    SplitBand,
    Zone,
    ZoneError,
    classify_zone,
    double_cell_kard,
    find_band_edges,
    kard_decompose,
    kard_reconstruct,
    split_band,
)
from .deltamodel import DeltaSpec, delta_bragg_point, delta_gap_edges, delta_half_cell
from .device import (
    ConfigError,
    Device,
    HalfCellSpec,
    Layer,
    Ordering,
    build_biperiodic,
    reference_half_cell,
    parse_device,
    reverse_device,
    serialize_device,
)
from .oracle import OracleConfig, compare, delta_limit_w, integrate_w
from .tmatrix import MMatrix, WMatrix, compose, half_cell_w, layer_w, transmission_direct, w_to_m
from .transmission import (
    Resonance,
    Rule,
    SweepRecord,
    closed_form_transmission,
    envelopes,
    find_crossings,
    find_resonances,
    find_transparent,
    sweep,
)

__version__ = "0.1.0"
