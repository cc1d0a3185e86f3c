import math
import warnings

import pytest
from hypothesis import given, strategies as st

from bilat.bands import (
    BandEdgeError,
    EdgeFunction,
    EdgeKind,
    Zone,
    ZoneError,
    bloch_cos_phi,
    classify_zone,
    cos_phi_odd,
    double_cell_kard,
    find_band_edges,
    fixed_points,
    kard_decompose,
    kard_reconstruct,
    log_derivatives,
    split_band,
    tan2_half_phi,
    z_squared,
)
from bilat.deltamodel import DeltaSpec, delta_gap_edges, delta_half_cell
from bilat.device import HalfCellSpec, Layer, Ordering, reference_half_cell
from bilat.tmatrix import WMatrix, compose, exterior_velocity, half_cell_w, layer_w, reverse_half_cell
from bilat.transmission import array_w, kard_at, lead_velocity

# frozen band edges of the reference device (constant masses); each was
# checked against the sliced oracle, |cos phi| = 1 to 1e-9
EDGES = (91.54780122311958, 96.8308205304731, 110.60032966896149, 118.59344957816596)
SMALL_GAP = (102.04466432033543, 104.79505004978665)
SYM_BRAGG = 103.40753427568686

ref_energies = st.floats(0.5, 305.0)


def kard(spec, e, ordering=Ordering.WIDE_FIRST):
    return kard_at(spec, e, ordering)


def wclose(a, b, tol):
    return max(abs(x - y) for x, y in zip(a.to_array().ravel(), b.to_array().ravel())) < tol


def test_constant_potential_log_derivs():
    m, d, e = 0.07, 6.0, 40.0
    w = layer_w(Layer(d, 0.0, m), e)
    q = math.sqrt(e * m / 38.0998)
    v = q / m
    ld = log_derivatives(w)
    assert ld.gamma == pytest.approx(-v * math.tan(q * d), rel=1e-12)
    assert ld.lam == pytest.approx(v / math.tan(q * d), rel=1e-12)
    z2, _ = z_squared(w)
    assert math.sqrt(z2) == pytest.approx(v, rel=1e-12)


def test_free_half_cell_cos_phi():
    d, m, e = 5.0, 0.07, 30.0
    w = layer_w(Layer(d, 0.0, m), e)
    kd = math.sqrt(e * m / 38.0998) * d
    ch, c = bloch_cos_phi(w)
    assert ch == pytest.approx(math.cos(kd), abs=1e-14)
    assert c == pytest.approx(math.cos(2 * kd), abs=1e-13)


def test_bragg_undershoot_and_touch(ref_cell, symmetric):
    from bilat.bands import bragg_energy
    e = bragg_energy(ref_cell, (97, 110))
    w = half_cell_w(ref_cell, e)
    ch, c = bloch_cos_phi(w)
    assert abs(ch) < 1e-9
    assert c == pytest.approx(2 * w.g * w.up - 1, abs=1e-9) and c < -1
    ws = half_cell_w(symmetric, SYM_BRAGG)
    assert bloch_cos_phi(ws)[1] == pytest.approx(-1, abs=1e-9)
    assert bloch_cos_phi(half_cell_w(symmetric, SYM_BRAGG - 0.5))[1] > -1
    assert bloch_cos_phi(half_cell_w(symmetric, SYM_BRAGG + 0.5))[1] > -1


def test_z_squared_swap():
    spec = DeltaSpec(1.403 * math.pi, 0.1)
    for kd in (0.3, 1.1, 2.2, 2.9):
        z2, z2t = z_squared(delta_half_cell(kd, spec))
        f2, f2t = z_squared(delta_half_cell(kd, spec.flipped()))
        assert f2 == pytest.approx(z2t, rel=1e-12) and f2t == pytest.approx(z2, rel=1e-12)


def test_z_squared_diverges_at_gap_edges():
    spec = DeltaSpec(1.403 * math.pi, 0.1)
    edges = delta_gap_edges(spec)
    assert abs(z_squared(delta_half_cell(edges.g_node, spec))[0]) > 1e8
    assert abs(z_squared(delta_half_cell(edges.up_node, spec))[1]) > 1e8


@given(ref_energies)
def test_tan2_half_phi_sign(e):
    w = half_cell_w(reference_half_cell(), e)
    c = bloch_cos_phi(w)[1]
    if abs(abs(c) - 1) < 1e-9:
        return
    assert (tan2_half_phi(w) > 0) == (abs(c) < 1)


def test_zone_sequence(ref_cell):
    for ordering in Ordering:
        seq = []
        e = 0.5
        while e <= 305.0:
            try:
                zone, _ = classify_zone(half_cell_w(ref_cell.oriented(ordering), e))
            except BandEdgeError:
                e += 0.05
                continue
            if not seq or seq[-1] is not zone:
                seq.append(zone)
            e += 0.05
        assert seq == [Zone.FZ0, Zone.AZ0, Zone.FZ1, Zone.AZ1, Zone.FZ2, Zone.AZ2]


def test_table_zones_not_flagged(ref_cell):
    for e in (50.0, 95.0, 105.0, 115.0, 200.0):
        assert not kard(ref_cell, e).extrapolated


def test_unclassified_pattern_strict():
    with pytest.raises(ZoneError) as info:
        classify_zone(WMatrix(1.0, -1.0, 1.0, 0.0 + 2.0), strict=True)
    assert len(info.value.signs) == 4


def test_dead_band_is_edge():
    with pytest.raises(BandEdgeError):
        classify_zone(WMatrix(0.0, 1.0, -1.0, 0.5))


def test_symmetric_alpha_zero(symmetric):
    for e in (95.0, 101.0, 112.0):
        assert kard(symmetric, e).alpha == pytest.approx(0.0, abs=1e-12)


def test_free_half_cell_kard():
    spec = HalfCellSpec(3.0, 0.0, 3.0, 0.0, 0.07, 0.07)
    e = 20.0
    kp = kard_decompose(half_cell_w(spec, e), lead_velocity(spec, e))
    kd = math.sqrt(e * 0.07 / 38.0998) * spec.d
    assert kp.zone is Zone.AZ0
    assert kp.beta == pytest.approx(kd, rel=1e-12)
    assert kp.z == pytest.approx(kp.nu, rel=1e-12)
    assert abs(kp.eta) < 1e-12 and abs(kp.mu) < 1e-12


def test_reconstruct_at_95(ref_cell):
    w = half_cell_w(ref_cell, 95.0)
    kp = kard(ref_cell, 95.0)
    assert kp.zone is Zone.AZ0
    assert wclose(kard_reconstruct(kp), w, 1e-9)


def test_reconstruct_in_gap(ref_cell):
    kp = kard(ref_cell, 105.0)
    assert kp.zone is Zone.FZ1
    assert wclose(kard_reconstruct(kp), half_cell_w(ref_cell, 105.0), 1e-9)


@given(ref_energies, st.sampled_from(list(Ordering)))
def test_round_trip_every_zone(e, ordering):
    spec = reference_half_cell()
    try:
        kp = kard(spec, e, ordering)
    except BandEdgeError:
        return
    w = half_cell_w(spec.oriented(ordering), e)
    assert wclose(kard_reconstruct(kp), w, 1e-9 * max(1.0, w.scale))


@given(ref_energies)
def test_mu_dual_formula(e):
    try:
        kp = kard(reference_half_cell(), e)
    except BandEdgeError:
        return
    assert double_cell_kard(kp).residual < 1e-9


def test_double_cell_cos_phi(ref_cell):
    for e in (95.0, 105.0, 115.0, 60.0):
        kp = kard(ref_cell, e)
        dk = double_cell_kard(kp)
        assert dk.cos_phi == pytest.approx(bloch_cos_phi(half_cell_w(ref_cell, e))[1], abs=1e-9)
        assert dk.forbidden == (not kp.allowed)


def test_mu_sign_flip_between_orderings(ref_cell):
    for e in (95.0, 112.0):
        wf = kard(ref_cell, e, Ordering.WIDE_FIRST)
        nf = kard(ref_cell, e, Ordering.NARROW_FIRST)
        assert nf.alpha == pytest.approx(-wf.alpha, abs=1e-12)
        assert nf.eta == pytest.approx(wf.eta, abs=1e-12)


@given(st.floats(0.5, 305.0), st.integers(0, 3))
def test_odd_trace_identity(e, n):
    spec = reference_half_cell()
    try:
        kp = kard(spec, e)
    except BandEdgeError:
        return
    if not kp.allowed:
        return
    direct = array_w(half_cell_w(spec, e), 2 * n + 1).half_trace
    assert cos_phi_odd(kp, n) == pytest.approx(direct, abs=1e-9)


def test_odd_trace_symmetric_n1(symmetric):
    kp = kard(symmetric, 96.0)
    w = half_cell_w(symmetric, 96.0)
    wl = reverse_half_cell(w)
    assert cos_phi_odd(kp, 1) == pytest.approx(math.cos(3 * kp.beta), abs=1e-12)
    assert cos_phi_odd(kp, 1) == pytest.approx(compose([wl, w, wl]).half_trace, abs=1e-9)


def test_find_band_edges(ref_cell):
    edges = find_band_edges(ref_cell, (80.0, 130.0))
    assert [e.kind for e in edges] == [EdgeKind.LOWER_OUTER, EdgeKind.GAP_LOWER,
                                       EdgeKind.GAP_UPPER, EdgeKind.UPPER_OUTER]
    assert [e.energy for e in edges] == pytest.approx(EDGES, abs=1e-6)
    assert edges[1].which_function is EdgeFunction.NODE_OF_G
    assert edges[2].which_function is EdgeFunction.NODE_OF_UPRIME
    for edge in edges:
        assert abs(abs(bloch_cos_phi(half_cell_w(ref_cell, edge.energy))[1]) - 1) < 1e-8


def test_band_edges_orderings_agree(ref_cell):
    wf = [e.energy for e in find_band_edges(ref_cell, (80.0, 130.0))]
    nf = find_band_edges(ref_cell.mirrored(), (80.0, 130.0))
    assert [e.energy for e in nf] == pytest.approx(wf, abs=1e-8)
    # mirroring swaps which function carries the gap-edge node
    assert nf[1].which_function is EdgeFunction.NODE_OF_UPRIME


def test_split_band_small_and_symmetric(symmetric):
    small = split_band(HalfCellSpec.from_wells(4.1, 4.0, 3.8, 288.09), (80.0, 130.0))
    assert small.gap == pytest.approx(SMALL_GAP, abs=1e-6)
    sym = split_band(symmetric, (80.0, 130.0))
    assert sym.gap_width < 1e-9
    assert sym.gap[0] == pytest.approx(SYM_BRAGG, abs=1e-6)


def test_coarse_resolution_warns(ref_cell):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        find_band_edges(HalfCellSpec.from_wells(4.06, 4.05, 3.8, 288.09), (80.0, 130.0), resolution=2.0)
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


def test_fixed_points():
    a, b = fixed_points(0.0, 0.3, Zone.AZ0)
    assert a == 0
    a, b = fixed_points(math.inf, 1.0, Zone.AZ0)
    assert a == 1
    a, b = fixed_points(-0.4, -1.5, Zone.FZ1)
    assert abs(a) == pytest.approx(1.0) and b == a.conjugate()
    with pytest.raises(ValueError):
        fixed_points(0.1, 2.0, Zone.AZ0)
