import math

import numpy as np
import pytest

from hybrid_node.geometry import (
    GAAS_DESIGN,
    GAP_DESIGN,
    HOLE_HEADER,
    DEFAULT_COUPLERS,
    Coupler,
    NanobeamDesign,
    generate_ring_layout,
    generate_taper,
    layout_from_json,
    layout_to_json,
    taper_spacings,
    write_hole_csv,
)


def test_degenerate_taper():
    d = NanobeamDesign(400, 380, 59, 128, 171, 184, n_cavity_holes=2, n_mirror_pairs=0)
    holes = generate_taper(d)
    assert holes.x.tolist() == [-85.5, 85.5]


def test_gap_spacings():
    a = taper_spacings(GAP_DESIGN)
    assert a.size == 10 + 20
    assert a[0] == 171.0
    assert a[9] == 184.0 and a[-1] == 184.0


def test_parabolic_taper():
    a = taper_spacings(GAP_DESIGN)[:10]
    assert np.all(np.diff(a) >= 0)
    second = np.diff(a, 2)
    assert np.allclose(second, 13.0 * 2 / 81, rtol=0, atol=1e-9)


@pytest.mark.parametrize("design", [GAP_DESIGN, GAAS_DESIGN])
def test_mirror_symmetry_and_order(design):
    x = generate_taper(design).x
    assert np.all(np.diff(x) > 0)
    assert np.array_equal(-x[::-1], x)


@pytest.mark.parametrize("design", [GAP_DESIGN, GAAS_DESIGN])
def test_total_length(design):
    N = design.n_cavity_holes // 2
    taper = [design.a_cav + (design.a_mirr - design.a_cav) * (k / (N - 1)) ** 2 for k in range(1, N)]
    expected = design.a_cav + 2 * math.fsum(taper) + 2 * design.n_mirror_pairs * design.a_mirr
    holes = generate_taper(design)
    assert len(holes) == 2 * (N + design.n_mirror_pairs)
    assert holes.length == pytest.approx(expected, rel=1e-12)


def test_gaas_preset():
    d = GAAS_DESIGN
    assert (d.w_y, d.w_z, d.h_x, d.h_y, d.a_cav, d.a_mirr) == (350, 220, 70, 136, 162, 180)


def test_gap_preset():
    d = GAP_DESIGN
    assert (d.w_y, d.w_z, d.h_x, d.h_y, d.a_cav, d.a_mirr) == (400, 380, 59, 128, 171, 184)


@pytest.mark.parametrize("kw", [
    dict(a_cav=190),
    dict(h_y=500),
    dict(n_cavity_holes=7),
    dict(n_mirror_pairs=-1),
    dict(h_x=171),
])
def test_design_invariants(kw):
    base = dict(w_y=400, w_z=380, h_x=59, h_y=128, a_cav=171, a_mirr=184)
    base.update(kw)
    with pytest.raises(ValueError):
        NanobeamDesign(**base)


def test_exponent_knob():
    d = NanobeamDesign(400, 380, 59, 128, 171, 184, taper_exponent=1.0)
    assert np.allclose(np.diff(taper_spacings(d)[:10], 2), 0, atol=1e-9)


def test_hole_csv(tmp_path):
    p = write_hole_csv(generate_taper(GAP_DESIGN), tmp_path / "holes.csv")
    lines = p.read_text().splitlines()
    assert lines[0] == ",".join(HOLE_HEADER)
    assert len(lines) == 61


def test_default_couplers():
    layout = generate_ring_layout(25.0, (500, 640), DEFAULT_COUPLERS)
    assert [cp.gap for cp in layout.couplers] == [210.0, 10.0]


def test_bare_ring():
    layout = generate_ring_layout(25.0, (500, 640))
    assert layout.couplers == ()
    assert '"couplers": []' in layout_to_json(layout)


def test_json_round_trip():
    layout = generate_ring_layout(25.0, (500, 640),
                                  [dict(w_y=500, w_z=640, gap=210, label="a"), Coupler(300, 380, 10)])
    text = layout_to_json(layout)
    assert layout_from_json(text) == layout
    assert layout_to_json(layout_from_json(text)) == text


def test_negative_gap():
    with pytest.raises(ValueError, match="gap"):
        generate_ring_layout(25.0, (500, 640), [dict(w_y=300, w_z=380, gap=-5)])


def test_bad_radius():
    with pytest.raises(ValueError):
        generate_ring_layout(0.0, (500, 640))
