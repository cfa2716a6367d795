import math
from fractions import Fraction
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.constants import c, pi

from hybrid_node.fwm import PumpConfig, Signal, steady_state_linear
from hybrid_node.resonator import (
    Band,
    ConfigurationError,
    DispersionFitError,
    DispersionModel,
    MU_VALIDITY,
    ResonatorConfig,
    combine_coupling_q,
    coupling_ratio,
    fit_dispersion_model,
    idler_detuning,
    kerr_shifted_detuning,
    loaded_q,
    mode_resonance,
    nonlinear_parameter,
    resonance_frequency,
    round_trip_loss,
)

from oracles import idler_detuning_mhz

TWO_PI = 2 * pi
MHZ = TWO_PI * 1e6


def matched(cfg):
    """Copy of ``cfg`` whose 1550 band shares the 946 band's D1..D3."""
    d = cfg.band946.dispersion
    d2 = replace(cfg.band1550.dispersion, D1=d.D1, D2=d.D2, D3=d.D3)
    return replace(cfg, band1550=replace(cfg.band1550, dispersion=d2))


def test_resonance_identity(table1):
    m = table1.band946.dispersion
    assert resonance_frequency(m, 0) == m.omega0


def test_resonance_mu1(table1):
    m = table1.band946.dispersion
    expected = m.omega0 + TWO_PI * (531e9 - 61e6 - 0.964e6 / 6)
    assert resonance_frequency(m, 1) == pytest.approx(expected, rel=1e-15)
    assert abs(0.964e6 / 6 - 0.1607e6) < 1e2


def test_resonance_parity(table1):
    m = table1.band946.dispersion
    up = resonance_frequency(m, 2) - m.omega0
    down = resonance_frequency(m, -2) - m.omega0
    assert (up - down) / 2 == pytest.approx(2 * m.D1 + 8 * m.D3 / 6, rel=1e-12)
    assert (up + down) / 2 == pytest.approx(2 * m.D2, rel=1e-6)


def test_third_difference_is_D3(table1):
    m = table1.band1550.dispersion
    for start in (-20, 0, 7):
        w = [resonance_frequency(m, start + k) - m.omega0 for k in range(4)]
        third = w[3] - 3 * w[2] + 3 * w[1] - w[0]
        assert third == pytest.approx(m.D3, rel=1e-3)


def test_resonance_is_exact_polynomial(table1):
    """Float evaluation agrees with exact rational arithmetic, whose third
    difference is D3 with no error at all."""
    m = table1.band1550.dispersion
    exact = [Fraction(m.omega0) + Fraction(m.D1) * k + Fraction(m.D2) * k * k / 2 + Fraction(m.D3) * k**3 / 6
             for k in range(-3, 5)]
    for k, e in zip(range(-3, 5), exact):
        assert resonance_frequency(m, k) == pytest.approx(float(e), rel=1e-15)
    third = exact[3] - 3 * exact[2] + 3 * exact[1] - exact[0]
    assert float(third) == pytest.approx(m.D3, rel=1e-12)
    # offset-free float difference: limited only by cancellation against D1 mu
    zero = replace(m, omega0=0.0)
    w = [resonance_frequency(zero, k) for k in range(4)]
    bound = 8 * np.spacing(abs(w[3]))
    assert abs(w[3] - 3 * w[2] + 3 * w[1] - w[0] - m.D3) <= bound


def test_resonance_vectorised(table1):
    m = table1.band946.dispersion
    mu = np.arange(-3, 4)
    out = resonance_frequency(m, mu)
    assert out.shape == (7,)
    assert out[3] == m.omega0


def test_resonance_validity_warning(table1):
    with pytest.warns(UserWarning, match="validity"):
        resonance_frequency(table1.band946.dispersion, MU_VALIDITY + 1)


def test_dispersion_model_needs_positive_fsr():
    with pytest.raises(ConfigurationError):
        DispersionModel(omega0=1e15, D1=0.0)


@pytest.mark.parametrize("branch, target", [("i+", 41.244), ("i-", -85.444)])
def test_idler_detuning_table1(table1, branch, target):
    got = idler_detuning(table1.band946.dispersion, table1.band1550.dispersion, 1, branch) / MHZ
    hand = idler_detuning_mhz(("531000", "-122", "-0.964"), ("531000", "-44.2", "13.1"), 1, branch)
    assert float(hand) == pytest.approx(target, abs=1e-12)
    assert got == pytest.approx(float(hand), rel=1e-9)


def test_idler_detuning_matched(table1):
    a = table1.band946.dispersion
    for mu in range(1, 20):
        for branch in ("i+", "i-"):
            d = idler_detuning(a, replace(table1.band1550.dispersion, D1=a.D1, D2=a.D2, D3=a.D3), mu, branch)
            if branch == "i+":
                assert d == 0.0
            else:
                assert d == pytest.approx(a.D2 * mu**2, rel=1e-12)


@given(mu=st.integers(1, 50))
def test_idler_branch_sum(table1, mu):
    a, b = table1.band946.dispersion, table1.band1550.dispersion
    total = idler_detuning(a, b, mu, "i+") + idler_detuning(a, b, mu, "i-")
    assert total == pytest.approx(b.D2 * mu**2, rel=1e-12)


def test_idler_detuning_rejects_bad_input(table1):
    a, b = table1.band946.dispersion, table1.band1550.dispersion
    with pytest.raises(ValueError):
        idler_detuning(a, b, 0, "i+")
    with pytest.raises(ValueError):
        idler_detuning(a, b, 1, "i")


@given(st.floats(1e2, 1e9), st.floats(1e2, 1e9), st.floats(1e2, 1e9))
def test_q_algebra(q_i, q1, q2):
    q_c = combine_coupling_q(q1, q2)
    q_l = loaded_q(q_i, q_c)
    assert q_l < min(q_i, q1, q2)
    assert 1 / q_l == pytest.approx(1 / q_i + 1 / q1 + 1 / q2, rel=1e-12)


def test_coupler_combination():
    assert float(f"{combine_coupling_q(7.64e4, 3.52e8):.3g}") == 7.64e4
    assert float(f"{combine_coupling_q(7.71e4, 2.70e7):.3g}") == 7.69e4
    assert combine_coupling_q(1.23e5, math.inf) == 1.23e5
    with pytest.raises(ConfigurationError):
        combine_coupling_q(0.0, 1e5)


def test_round_trip_time(table1):
    assert table1.round_trip_time == pytest.approx(1 / 531e9, rel=1e-12)
    assert table1.length == pytest.approx(TWO_PI * 25e-6)


def test_alpha(table1):
    assert table1.band946.Q_L == pytest.approx(3.78e4, rel=2e-3)
    assert round_trip_loss(table1, "946") == pytest.approx(0.0496, rel=0.01)
    w = TWO_PI * c / 946.6e-9
    assert round_trip_loss(table1, "946") == pytest.approx(w / 531e9 / (2 * table1.band946.Q_L), rel=1e-12)


def test_alpha_limits(table1):
    a = round_trip_loss(table1, "946")
    doubled = table1.with_quality(2 * 7.5e4, 2 * 7.64e4)
    assert round_trip_loss(doubled, "946") == pytest.approx(
        a * table1.band946.Q_L / doubled.band946.Q_L, rel=1e-12)
    assert round_trip_loss(doubled, "946") == pytest.approx(a / 2, rel=3e-3)
    lossless = table1.with_quality(1e300, 1e300)
    assert round_trip_loss(lossless, "946") < 1e-290


def test_alpha_per_resonance(table1):
    a0 = round_trip_loss(table1, "946", 0)
    a5 = round_trip_loss(table1, "946", 5)
    ratio = resonance_frequency(table1.band946.dispersion, 5) / table1.band946.omega
    assert a5 / a0 == pytest.approx(ratio, rel=1e-12)


def test_theta(table1):
    assert coupling_ratio(table1, "946") == pytest.approx(0.0490, rel=0.01)
    # hand arithmetic; a rounded figure of 0.0296 is within 1 %
    w2 = TWO_PI * c / 1547.8e-9
    assert coupling_ratio(table1, "1550") == pytest.approx(w2 / 531e9 / 7.69e4, rel=1e-12)
    assert coupling_ratio(table1, "1550") == pytest.approx(0.0296, rel=0.01)
    assert coupling_ratio(table1.with_quality(7.5e4, 1e300), "946") < 1e-290


def test_theta_individual_couplers(table1):
    band = replace(table1.band946, Q_C1=7.64e4, Q_C2=3.52e8)
    cfg = replace(table1, band946=band)
    t1 = coupling_ratio(cfg, "946", 1)
    t2 = coupling_ratio(cfg, "946", 2)
    assert t1 + t2 == pytest.approx(coupling_ratio(cfg, "946"), rel=1e-12)
    with pytest.raises(ValueError):
        coupling_ratio(cfg, "946", 3)


def test_gamma(table1):
    assert table1.gamma("946") == pytest.approx(288, rel=0.01)
    assert table1.gamma("1550") == pytest.approx(153, rel=0.01)
    g = nonlinear_parameter(1e-17, 1e15, 0.2)
    assert nonlinear_parameter(1e-17, 1e15, 0.4) == pytest.approx(g / 2, rel=1e-15)


def test_round_trip_mismatch_rejected(table1):
    d = replace(table1.band1550.dispersion, D1=table1.band1550.dispersion.D1 * 1.02)
    with pytest.raises(ConfigurationError, match="round-trip"):
        replace(table1, band1550=replace(table1.band1550, dispersion=d))


def test_band_validation(table1):
    with pytest.raises(ConfigurationError, match="Q_C1"):
        replace(table1.band946, Q_C1=0.0)
    with pytest.raises(ConfigurationError, match="A_eff"):
        replace(table1.band946, A_eff=0.0)


def test_kerr_detuning_cold(table1):
    w = mode_resonance(table1, "s", 1)
    assert kerr_shifted_detuning(table1, "s", w, (0.0, 0.0)) == 0.0


def test_kerr_detuning_half_linewidth(table1):
    """A laser half a linewidth to the red sees dphi = alpha, the half-power point
    of the cold-cavity Lorentzian."""
    w_res = mode_resonance(table1, "s", 0)
    t_r = table1.round_trip_time
    hwhm = w_res / (2 * table1.band946.Q_L)
    dphi = kerr_shifted_detuning(table1, "s", w_res - hwhm, (0.0, 0.0), mu=0)
    assert dphi == pytest.approx(round_trip_loss(table1, "946", 0), rel=1e-9)

    # linear response of the weak-field solver at mu = 1 (band alpha applies)
    w1 = mode_resonance(table1, "s", 1)
    hw1 = table1.band946.omega / (2 * table1.band946.Q_L)
    zero = PumpConfig(0.0)
    on = abs(steady_state_linear(table1, zero, Signal(1e-3, w1)).E_s) ** 2
    off = abs(steady_state_linear(table1, zero, Signal(1e-3, w1 - hw1)).E_s) ** 2
    assert off / on == pytest.approx(0.5, rel=1e-9)
    assert t_r > 0


def test_kerr_detuning_sign(table1):
    w = mode_resonance(table1, "i+", 1)
    cold = kerr_shifted_detuning(table1, "i+", w, (0.0, 0.0))
    hot = kerr_shifted_detuning(table1, "i+", w, (0.3, 0.2))
    assert hot < cold
    assert cold - hot == pytest.approx(2 * table1.gamma("1550") * table1.length * 0.5, rel=1e-12)
    with pytest.raises(ValueError):
        kerr_shifted_detuning(table1, "s", w, (-1.0, 0.0))


class _Scan:
    def __init__(self, lam, neff):
        self.wavelengths = lam
        self.n_eff = neff


def test_fit_linear_dispersion():
    R = 25.0
    n_g = 3.6
    lam = np.linspace(900.0, 1000.0, 9)
    w = TWO_PI * c / (lam * 1e-9)
    beta = 4.0e6 + n_g * w / c
    model = fit_dispersion_model(_Scan(lam, c * beta / w), R, 946.6)
    assert model.D1 == pytest.approx(c / n_g / (R * 1e-6), rel=1e-9)
    assert abs(model.D2) < 1e-6 * model.D1
    assert abs(model.D3) < 1e-6 * model.D1
    assert abs(model.omega0 - TWO_PI * c / 946.6e-9) < model.D1


def test_fit_errors():
    lam = np.linspace(900.0, 1000.0, 9)
    with pytest.raises(DispersionFitError, match="bracket"):
        fit_dispersion_model(_Scan(lam, np.full(9, 3.0)), 25.0, 1200.0)
    with pytest.raises(DispersionFitError, match="5 wavelengths"):
        fit_dispersion_model(_Scan(lam[:4], np.full(4, 3.0)), 25.0, 946.0)
    bad = 3.0 - 0.01 * lam  # beta falls faster than 1/lambda would allow
    with pytest.raises(DispersionFitError, match="monotone"):
        fit_dispersion_model(_Scan(lam, bad * 0 + 3.0 * (lam / 900.0) ** 2), 25.0, 946.0)


def test_matched_helper(table1):
    cfg = matched(table1)
    assert idler_detuning(cfg.band946.dispersion, cfg.band1550.dispersion, 3, "i+") == 0.0
