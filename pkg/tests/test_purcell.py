import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import epsilon_0, hbar

from hybrid_node.purcell import (
    SIV0,
    EmitterModel,
    FieldMap,
    OutOfGridError,
    box_mode,
    collection_bandwidth_tradeoff,
    decay_rate,
    evanescent_mode,
    extract_dipole,
    field_at,
    gaussian_mode,
    local_field_factor,
    normalize_single_photon,
    purcell_factor,
    read_field_map,
    ring_linewidth,
    textbook_purcell,
    write_field_map,
)

from oracles import textbook_purcell as closed_form
from oracles import vacuum_dipole

TWO_PI = 2 * math.pi
N_DIA = 2.4


def macroscopic(em):
    return replace(em, local_field_correction=False)


def test_siv_dipole():
    assert extract_dipole(SIV0) == pytest.approx(6.027e-29, rel=5e-3)


def test_vacuum_limit():
    em = EmitterModel(TWO_PI * 88e6, 946.0, host_index=1.0)
    assert local_field_factor(1.0) == 1.0
    assert extract_dipole(em) == pytest.approx(vacuum_dipole(em.gamma0, em.omega), rel=1e-12)


def test_beta_scaling():
    half = replace(SIV0, beta=0.5)
    assert extract_dipole(half) == pytest.approx(extract_dipole(SIV0) / math.sqrt(2), rel=1e-12)


@given(g=st.floats(1e6, 1e10), n=st.floats(1.0, 4.0), beta=st.floats(0.01, 1.0))
def test_dipole_round_trip(g, n, beta):
    em = EmitterModel(g, 946.0, host_index=n, beta=beta)
    assert decay_rate(em, extract_dipole(em)) == pytest.approx(g, rel=1e-12)


@pytest.mark.parametrize("kw", [dict(gamma0=0.0), dict(beta=0.0), dict(beta=1.5), dict(host_index=0.5),
                                dict(orientation=(0, 0, 0))])
def test_emitter_validation(kw):
    base = dict(gamma0=1e9, wavelength=946.0)
    base.update(kw)
    with pytest.raises(ValueError):
        EmitterModel(**base)


def test_orientation_normalised():
    em = EmitterModel(1e9, 946.0, orientation=(3, 4, 0))
    assert em.orientation == pytest.approx((0.6, 0.8, 0.0))


# -- normalisation ----------------------------------------------------------


def test_box_mode_amplitude():
    fm = normalize_single_photon(box_mode((500, 400, 300), (25, 20, 15), N_DIA**2, 1e4, 946.0))
    V = 500 * 400 * 300 * 1e-27
    expected = math.sqrt(hbar * fm.omega / (2 * epsilon_0 * N_DIA**2 * V))
    assert np.abs(fm.E[1]) == pytest.approx(expected, rel=1e-12)


def test_normalisation_energy():
    fm = gaussian_mode((80, 60, 50), (21, 19, 17), (12, 12, 12), 5.76, 1e4, 946.0)
    n = normalize_single_photon(fm)
    quad = epsilon_0 * np.sum(n.eps * np.sum(np.abs(n.E) ** 2, axis=0)) * 12e-9 ** 3
    assert quad == pytest.approx(hbar * n.omega / 2, rel=1e-9)


def test_normalisation_input_scale():
    fm = gaussian_mode((80, 60, 50), (11, 11, 11), (15, 15, 15), 5.76, 1e4, 946.0)
    a = normalize_single_photon(fm)
    b = normalize_single_photon(fm.scaled(2.0))
    assert np.array_equal(a.E, b.E)


def test_zero_field_rejected():
    fm = box_mode((100, 100, 100), (5, 5, 5), 1.0, 1e3, 946.0).scaled(0.0)
    with pytest.raises(ValueError, match="no energy"):
        normalize_single_photon(fm)


def test_field_map_validation():
    E = np.zeros((3, 2, 2, 2))
    with pytest.raises(ValueError, match="permittivity"):
        FieldMap(E, np.full((2, 2, 2), 0.5), (1, 1, 1), 1e3, 946.0)
    with pytest.raises(ValueError, match="spacings"):
        FieldMap(E, np.ones((2, 2, 2)), (1, 0, 1), 1e3, 946.0)
    with pytest.raises(ValueError, match="shape"):
        FieldMap(np.zeros((2, 2, 2, 2)), np.ones((2, 2, 2)), (1, 1, 1), 1e3, 946.0)


# -- Purcell factor ---------------------------------------------------------


def test_box_mode_textbook_oracle():
    Q = 3.0e4
    fm = box_mode((600, 500, 400), (36, 30, 24), N_DIA**2, Q, 946.0)
    em = macroscopic(replace(SIV0, wavelength=946.0))
    P = purcell_factor(fm, em, (0, 0, 0))
    V = 600 * 500 * 400 * 1e-27
    assert P == pytest.approx(closed_form(946e-9, N_DIA, Q, V), rel=0.01)
    assert textbook_purcell(946.0, N_DIA, Q, V) == pytest.approx(closed_form(946e-9, N_DIA, Q, V), rel=1e-12)
    assert fm.mode_volume() == pytest.approx(V, rel=1e-12)


def test_local_field_factor_enters_rate():
    fm = box_mode((600, 500, 400), (36, 30, 24), N_DIA**2, 3e4, 946.0)
    ratio = purcell_factor(fm, SIV0, (0, 0, 0)) / purcell_factor(fm, macroscopic(SIV0), (0, 0, 0))
    # Gamma0 is fixed, so the corrected (smaller) dipole lowers g^2 by L^2
    assert ratio == pytest.approx(local_field_factor(N_DIA) ** -2, rel=1e-12)


def test_orthogonal_dipole():
    fm = box_mode((300, 300, 300), (20, 20, 20), N_DIA**2, 1e4, 946.0, polarization="y")
    em = replace(SIV0, orientation=(1, 0, 0))
    assert purcell_factor(fm, em, (0, 0, 0)) == 0.0


def test_linear_in_q():
    fm = box_mode((300, 300, 300), (20, 20, 20), N_DIA**2, 1e4, 946.0)
    p1 = purcell_factor(fm, SIV0, (10, -5, 3))
    p3 = purcell_factor(replace(fm, Q=3e4), SIV0, (10, -5, 3))
    assert p3 == pytest.approx(3 * p1, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(amp=st.floats(1e-6, 1e6), phase=st.floats(0, 2 * math.pi))
def test_global_phase_and_amplitude(amp, phase):
    fm = gaussian_mode((60, 50, 40), (15, 15, 15), (12, 12, 12), 5.76, 1e4, 946.0)
    ref = purcell_factor(fm, SIV0, (7.0, -3.0, 5.0))
    assert purcell_factor(fm.scaled(amp * np.exp(1j * phase)), SIV0, (7.0, -3.0, 5.0)) == pytest.approx(ref, rel=1e-9)


def test_fraction_of_maximum():
    spacing = (15.0, 15.0, 10.0)
    depth = 3 * spacing[2]
    ell = 2 * depth / math.log(1 / 0.096)
    fm = evanescent_mode((80.0, 60.0), ell, (15, 15, 21), spacing, 1e4, 946.0, 3.13**2, N_DIA**2)
    p_max = purcell_factor(fm, SIV0, (0, 0, 0))
    p = purcell_factor(fm, SIV0, (0, 0, -depth))
    E = fm.E[1]
    assert abs(E[7, 7, 10 - 3]) ** 2 / np.max(np.abs(E) ** 2) == pytest.approx(0.096, rel=1e-12)
    assert p / p_max == pytest.approx(0.096, rel=1e-6)


def test_trilinear_is_exact_for_linear_fields():
    fm = box_mode((100, 100, 100), (10, 10, 10), 1.0, 1e3, 946.0)
    x, y, z = (fm.origin[k] + fm.spacing[k] * np.arange(10) for k in range(3))
    Xg, Yg, Zg = np.meshgrid(x, y, z, indexing="ij")
    lin = FieldMap(np.stack([Xg + 2 * Yg, 3 * Zg + 0j, Xg - Zg]), fm.eps, fm.spacing, 1e3, 946.0, fm.origin)
    p = (3.3, -12.7, 20.1)
    assert field_at(lin, p) == pytest.approx([p[0] + 2 * p[1], 3 * p[2], p[0] - p[2]], rel=1e-12)


def test_out_of_grid():
    fm = box_mode((100, 100, 100), (10, 10, 10), 1.0, 1e3, 946.0)
    with pytest.raises(OutOfGridError, match="outside"):
        purcell_factor(fm, SIV0, (0, 0, 80))


def test_coarse_grid_warns():
    fm = box_mode((600, 600, 600), (10, 10, 10), N_DIA**2, 1e3, 946.0)
    with pytest.warns(UserWarning, match="coarser"):
        purcell_factor(fm, SIV0, (0, 0, 0))
    fine = box_mode((600, 600, 600), (40, 40, 40), N_DIA**2, 1e3, 946.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        purcell_factor(fine, SIV0, (0, 0, 0))


# -- file formats -----------------------------------------------------------


@pytest.mark.parametrize("suffix", [".csv", ".npz"])
def test_field_map_round_trip(tmp_path, suffix):
    fm = evanescent_mode((40.0, 30.0), 25.0, (5, 4, 6), (11.0, 12.0, 9.5), 2.5e4, 946.0, 9.8, 5.76)
    fm = fm.scaled(np.exp(0.3j))
    back = read_field_map(write_field_map(fm, tmp_path / ("map" + suffix)))
    assert np.array_equal(back.E, fm.E)
    assert np.array_equal(back.eps, fm.eps)
    assert (back.spacing, back.origin, back.Q, back.wavelength) == (fm.spacing, fm.origin, fm.Q, fm.wavelength)


def test_csv_layout(tmp_path):
    fm = box_mode((30, 30, 30), (2, 2, 2), 1.0, 1e3, 946.0)
    lines = write_field_map(fm, tmp_path / "m.csv").read_text().splitlines()
    body = [l for l in lines if not l.startswith("#")]
    assert body[0] == "nx,ny,nz,dx_nm,dy_nm,dz_nm"
    assert body[2] == "ix,iy,iz,eps_r,Re(Ex),Im(Ex),Re(Ey),Im(Ey),Re(Ez),Im(Ez)"
    assert len(body) == 3 + 8


def test_csv_missing_metadata(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("nx,ny,nz,dx_nm,dy_nm,dz_nm\n1,1,1,1,1,1\n")
    with pytest.raises(ValueError, match="metadata"):
        read_field_map(p)


# -- tradeoff ---------------------------------------------------------------


def test_tradeoff_endpoints():
    t = collection_bandwidth_tradeoff(SIV0, [0.0, 10.0], 8.4e9)
    assert t.collection[0] == 0.0
    assert t.linewidth[0] == pytest.approx(88e6, rel=1e-12)
    assert t.collection[1] == pytest.approx(10 / 11, rel=1e-12)
    assert t.threshold == pytest.approx(8.4e9 / 88e6 - 1, rel=1e-12)
    assert t.threshold == pytest.approx(94, abs=1)


def test_ring_linewidth_threshold():
    lw = ring_linewidth(946.6, 3.78e4)
    assert lw == pytest.approx(8.4e9, rel=0.01)
    t = collection_bandwidth_tradeoff(SIV0, np.linspace(0, 200, 201), lw)
    assert 90 <= t.threshold <= 100
    assert np.all(t.within_bandwidth == (t.purcell <= t.threshold))


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50))
def test_collection_monotone_bounded(ps):
    ps = sorted(ps)
    t = collection_bandwidth_tradeoff(SIV0, ps, 8.4e9)
    assert np.all(np.diff(t.collection) >= 0)
    assert np.all(t.collection < 1)


def test_negative_purcell_rejected():
    with pytest.raises(ValueError):
        collection_bandwidth_tradeoff(SIV0, [-1.0], 8.4e9)
