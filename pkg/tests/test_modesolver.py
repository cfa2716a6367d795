import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.constants import c

from hybrid_node.materials import Material, refractive_index
from hybrid_node.modesolver import (
    DISPERSION_HEADER,
    MATCHING_HEADER,
    CrossSection,
    DispersionScan,
    MatchingScan,
    ModeSolverError,
    StencilError,
    effective_area,
    group_index,
    group_index_matching_scan,
    gvd_parameter,
    mode_dispersion,
    solve_mode,
    write_dispersion_csv,
    write_matching_csv,
    zero_crossings,
)
from hybrid_node.resonator import fit_dispersion_model

from oracles import slab_neff, walled_slab_neff

SLAB_W = 2000.0
CONST_CORE = Material.constant("n3", 3.0)
CONST_SUB = Material.constant("n2", 2.0)


@pytest.fixture(scope="module")
def ring_xs():
    return CrossSection(500, 640)


@pytest.fixture(scope="module")
def ring_modes(ring_xs):
    return {lam: solve_mode(ring_xs, lam) for lam in (946.0, 1550.0)}


def slab_reference(lam, pol, h=20.0):
    xs = CrossSection(SLAB_W, 640, grid_spacing=h, window_y=SLAB_W)
    n = slab_neff(refractive_index("GaP", lam), refractive_index("Diamond", lam), 1.0, 640.0, lam, pol)
    return xs, walled_slab_neff(n, lam, SLAB_W, xs.shape[0])


@pytest.mark.parametrize("lam, pol", [(946.0, "TE"), (1250.0, "TE"), (1550.0, "TE"), (946.0, "TM"), (1550.0, "TM")])
def test_slab_oracle(lam, pol):
    xs, ref = slab_reference(lam, pol)
    assert abs(solve_mode(xs, lam, pol).n_eff - ref) < 1e-3


def test_air_clad_square_symmetry():
    xs = CrossSection(400, 400, substrate="Air", substrate_depth=1500)
    F = solve_mode(xs, 1300.0).field
    scale = np.abs(F).max()
    assert np.abs(F - F[::-1, :]).max() < 1e-6 * scale
    assert np.abs(F - F[:, ::-1]).max() < 1e-6 * scale


@pytest.mark.parametrize("w_y, w_z", [(380, 300), (300, 380)])
def test_narrow_coupler_cut_off_at_1550(w_y, w_z):
    m = solve_mode(CrossSection(w_y, w_z, grid_spacing=15), 1550.0)
    assert not m.is_guided
    assert m.n_eff <= m.n_substrate + 1e-4


@pytest.mark.parametrize("lam", [946.0, 1550.0])
def test_guided_mode_properties(ring_modes, lam):
    m = ring_modes[lam]
    assert m.is_guided
    assert m.n_substrate < m.n_eff < m.n_core
    assert np.all(np.isfinite(m.field))
    assert m.boundary_ratio() < 1e-3
    assert m.dominant_fraction >= 0.6
    assert m.residual < 1e-9


def test_effective_area_table_values(ring_modes):
    assert effective_area(ring_modes[946.0]) == pytest.approx(0.196, rel=0.2)
    assert effective_area(ring_modes[1550.0]) == pytest.approx(0.292, rel=0.2)


@pytest.mark.parametrize("scale", [1e-3, 1e3])
def test_effective_area_homogeneous(ring_modes, scale):
    m = ring_modes[946.0]
    assert effective_area(m, field_scale=scale) == pytest.approx(effective_area(m), rel=1e-12)


def test_effective_area_uniform_core_field(ring_modes):
    m = ring_modes[946.0]
    core = m.ring_region
    assert set(np.unique(core)) == {0.0, 1.0}  # core edges fall on cell faces
    uniform = replace(m, field=core.copy(), longitudinal=None)
    assert effective_area(uniform) == pytest.approx(0.5 * 0.64, rel=1e-12)


def test_effective_area_errors(ring_modes):
    m = ring_modes[946.0]
    with pytest.raises(ValueError, match="empty"):
        effective_area(m, ring_region=np.zeros_like(m.eps))
    with pytest.raises(ValueError, match="match"):
        effective_area(m, ring_region=np.ones((3, 3)))
    with pytest.raises(ValueError, match="guided"):
        effective_area(replace(m, is_guided=False))


def test_gvd_sign_at_946(ring_xs):
    assert gvd_parameter(ring_xs, 946.0) < 0


def test_constant_index_geometric_dispersion():
    md = mode_dispersion(CrossSection(500, 640, CONST_CORE, CONST_SUB), 1300.0)
    assert md.n_g >= md.mode.n_eff


def test_constant_index_slab_dispersion_smooth():
    xs = CrossSection(SLAB_W, 640, CONST_CORE, CONST_SUB, window_y=SLAB_W)
    D = np.array([gvd_parameter(xs, lam) for lam in (1200.0, 1300.0, 1400.0)])
    assert np.all(np.abs(D) < 500)
    assert abs(D[1] - 0.5 * (D[0] + D[2])) < 0.05 * np.abs(D).max()


def test_group_index_grid_convergence(ring_xs):
    assert abs(group_index(ring_xs.refined(2), 946.0) - group_index(ring_xs, 946.0)) < 1e-3


def test_neff_three_level_convergence():
    # material interfaces lie on cell faces at every level
    xs = CrossSection(800, 800, grid_spacing=40, substrate_depth=2400)
    n = [solve_mode(xs.refined(f), 946.0).n_eff for f in (1, 2, 4)]
    steps = np.diff(n)
    assert np.all(steps < 0) or np.all(steps > 0)
    assert abs(steps[-1]) < 5e-4
    assert abs(steps[-1]) < abs(steps[0])


def test_fig4c_ordering():
    n_g = [group_index(CrossSection(wy, wz), 946.0) for wy, wz in ((450, 540), (500, 640), (600, 740))]
    assert n_g[0] > n_g[1] > n_g[2]


def test_stencil_error_at_cut_off():
    with pytest.raises(StencilError, match="cut off"):
        group_index(CrossSection(300, 380, grid_spacing=15), 1550.0)


def test_solver_error_reports_residual():
    with pytest.raises(ModeSolverError) as err:
        solve_mode(CrossSection(500, 640, grid_spacing=25), 946.0, maxiter=1, n_modes=3)
    assert hasattr(err.value, "residual")


def test_preconditions():
    with pytest.raises(ValueError, match="20 points"):
        solve_mode(CrossSection(300, 380, grid_spacing=20), 1550.0)
    with pytest.raises(ValueError, match="polarization"):
        solve_mode(CrossSection(500, 640), 946.0, "TEM")
    with pytest.raises(ValueError, match="margin"):
        CrossSection(500, 640, margin=1000)
    with pytest.raises(ValueError):
        CrossSection(-1, 640)


def test_window_is_whole_cells():
    xs = CrossSection(300, 380, grid_spacing=15)
    wy, wz = xs.window
    assert wy / 15 == int(wy / 15) and wz / 15 == int(wz / 15)
    assert wy >= 300 + 3000 and wz >= 380 + 1500 + xs.substrate_depth


def test_substrate_fills_lower_half(ring_xs):
    _, f_sub = ring_xs.fill_fractions()
    _, z = ring_xs.coordinates()
    assert np.all(f_sub[:, z < 0] == 1) and np.all(f_sub[:, z > 0] == 0)
    assert ring_xs.substrate_depth >= 0.5 * ring_xs.window_z - 1e-9


positive = st.floats(1e-6, 10.0)


@given(st.lists(positive, min_size=1, max_size=15), st.lists(positive, min_size=1, max_size=15))
def test_single_sign_change(neg, pos):
    y = np.concatenate([-np.sort(neg)[::-1], np.sort(pos)])
    y = np.maximum.accumulate(y)  # monotone non-decreasing, one sign change
    x = np.arange(y.size, dtype=float)
    root = zero_crossings(x, y)
    assert len(root) == 1
    assert len(neg) - 1 <= root[0] <= len(neg)


def test_zero_crossings_contract():
    assert zero_crossings([0, 1, 2, 3], [1.0, -1.0, -2.0, 2.0]) == [0.5, 2.5]
    assert zero_crossings([0, 1, 2], [1.0, float("nan"), -1.0]) == []
    assert zero_crossings([0, 1], [0.0, 1.0]) == [0.0]


def test_scan_invariants():
    with pytest.raises(ValueError, match="unequal"):
        DispersionScan([1, 2], [1], [1, 2], [1, 2], [1, 2])
    with pytest.raises(ValueError, match="increasing"):
        DispersionScan([2, 1], [1, 1], [1, 1], [1, 1], [1, 1])


def test_matching_scan_flags_cut_off():
    scan = group_index_matching_scan([380], [300], grid_spacing=15)
    row = scan.rows[0]
    assert row[-1] == 1
    assert math.isnan(row[6])
    assert scan.crossings[380.0] == []


def test_csv_headers(tmp_path):
    scan = DispersionScan([900, 1000], [3.1, 3.0], [3.6, 3.5], [-100, 50], [0.2, 0.3])
    lines = write_dispersion_csv(scan, tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "lambda_nm,n_eff,n_g,D_ps_nm_km,A_eff_um2" == ",".join(DISPERSION_HEADER)
    assert lines[1] == "900,3.1,3.6,-100,0.2"
    ms = MatchingScan([(500.0, 640.0, 3.0, 2.6, 3.58, 3.57, 0.01, 0), (300.0, 380.0, 2.9, 2.3, 3.6, float("nan"), float("nan"), 1)])
    lines = write_matching_csv(ms, tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "w_y_nm,w_z_nm,n_eff_946,n_eff_1550,n_g_946,n_g_1550,delta_n_g,cutoff_flag" == ",".join(MATCHING_HEADER)
    assert lines[2].endswith("nan,nan,1")


class _Scan:
    def __init__(self, lam, neff):
        self.wavelengths = lam
        self.n_eff = neff


def test_dispersion_fit_from_solver(ring_xs):
    lam = np.linspace(916.0, 976.0, 7)
    scan = _Scan(lam, [solve_mode(ring_xs, l).n_eff for l in lam])
    model = fit_dispersion_model(scan, 25.0, 946.6)
    assert model.fsr == pytest.approx(531e9, rel=0.1)
    assert abs(model.omega0 - 2 * math.pi * c / 946.6e-9) < model.D1
