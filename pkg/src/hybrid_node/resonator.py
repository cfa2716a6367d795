"""
Ring-resonator bookkeeping for the two-band frequency converter.

Resonances in each band follow the cubic mode-number expansion

    w_mu = w_0 + D1 mu + D2 mu^2 / 2 + D3 mu^3 / 6

where ``mu`` counts resonances away from the band's own central mode.  The
946 nm band hosts pump 1, the signal and the auxiliary signal; the 1550 nm
band hosts pump 2 and both idlers.

Units: angular frequencies in rad/s, radius in um, mode areas in um^2,
nonlinear index in m^2/W.  Round-trip quantities (loss ``alpha``, coupling
``theta``, detuning phases) are dimensionless per round trip.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Literal, Optional, Tuple

import numpy as np
from scipy.constants import c, pi

__all__ = [
    "BAND_946",
    "BAND_1550",
    "ConfigurationError",
    "DispersionFitError",
    "DispersionModel",
    "Band",
    "ResonatorConfig",
    "MU_VALIDITY",
    "resonance_frequency",
    "idler_detuning",
    "round_trip_loss",
    "coupling_ratio",
    "combine_coupling_q",
    "loaded_q",
    "kerr_shifted_detuning",
    "nonlinear_parameter",
    "fit_dispersion_model",
    "mode_resonance",
]

BAND_946 = "946"
BAND_1550 = "1550"

# cubic expansion is only trusted this far from the central resonance
MU_VALIDITY = 50

Mode = Literal["s", "s'", "i+", "i-"]


class ConfigurationError(ValueError):
    """Inconsistent resonator parameters."""


class DispersionFitError(ValueError):
    """The propagation-constant scan cannot be turned into a resonance expansion."""


@dataclass(frozen=True)
class DispersionModel:
    """Central resonance ``omega0`` and Taylor coefficients, all in rad/s."""

    omega0: float
    D1: float
    D2: float = 0.0
    D3: float = 0.0

    def __post_init__(self):
        if not self.D1 > 0:
            raise ConfigurationError(f"D1 must be positive (free spectral range), got {self.D1}")

    @property
    def fsr(self) -> float:
        """Free spectral range in Hz."""
        return self.D1 / (2 * pi)

    @property
    def center_wavelength(self) -> float:
        """Central resonance wavelength in nm."""
        return 2 * pi * c / self.omega0 * 1e9

    def resonance(self, mu):
        return resonance_frequency(self, mu)


def resonance_frequency(model: DispersionModel, mu):
    """Cold-cavity resonance ``mu`` modes away from the central one (rad/s).

    Works elementwise on integer arrays.  A warning is emitted beyond
    ``|mu| > MU_VALIDITY`` where the cubic expansion stops being meaningful.
    """
    mu_arr = np.asarray(mu)
    if np.any(np.abs(mu_arr) > MU_VALIDITY):
        warnings.warn(
            f"|mu| > {MU_VALIDITY}: cubic resonance expansion used outside its validity window",
            stacklevel=2,
        )
    m = mu_arr.astype(float)
    out = model.omega0 + model.D1 * m + 0.5 * model.D2 * m**2 + model.D3 * m**3 / 6.0
    return float(out) if out.ndim == 0 else out


def idler_detuning(m946: DispersionModel, m1550: DispersionModel, mu, branch: str):
    """Offset of an idler from its nearest 1550-band resonance (rad/s).

    ``branch`` is ``"i+"`` or ``"i-"``; ``mu`` is the positive pump-signal
    separation in the 946 band.  The sign convention is resonance minus idler
    frequency, for pumps sitting on their central resonances.
    """
    m = np.asarray(mu, dtype=float)
    if np.any(m < 1):
        raise ValueError("mu must be a positive integer")
    if branch == "i+":
        s = 1.0
    elif branch == "i-":
        s = -1.0
    else:
        raise ValueError(f"branch must be 'i+' or 'i-', got {branch!r}")
    out = (
        s * (m1550.D1 - m946.D1) * m
        + 0.5 * (m1550.D2 - s * m946.D2) * m**2
        + s * (m1550.D3 - m946.D3) * m**3 / 6.0
    )
    return float(out) if out.ndim == 0 else out


def combine_coupling_q(q1: float, q2: float) -> float:
    """Effective coupling Q of two couplers acting in parallel (reciprocal sum)."""
    if q1 <= 0 or q2 <= 0:
        raise ConfigurationError("coupling quality factors must be positive")
    # an absent coupler leaves the other one untouched (no round-off)
    if math.isinf(q2):
        return float(q1)
    if math.isinf(q1):
        return float(q2)
    return 1.0 / (1.0 / q1 + 1.0 / q2)


def loaded_q(q_i: float, q_c: float) -> float:
    return combine_coupling_q(q_i, q_c)


def nonlinear_parameter(n2: float, omega: float, A_eff: float) -> float:
    """gamma = n2 * omega / (c * A_eff) in 1/(W m); ``A_eff`` in um^2."""
    return n2 * omega / (c * A_eff * 1e-12)


@dataclass(frozen=True)
class Band:
    """Per-band resonator parameters.

    Parameters
    ----------
    dispersion : DispersionModel
    Q_i : float
        Intrinsic quality factor.
    Q_C1, Q_C2 : float
        Coupling quality factors of the 946 nm coupler (1) and the 1550 nm
        coupler (2) evaluated in this band.  ``math.inf`` removes a coupler.
    n2 : float
        Kerr coefficient, m^2/W.
    A_eff : float
        Effective mode area, um^2.
    """

    dispersion: DispersionModel
    Q_i: float
    Q_C1: float
    Q_C2: float = math.inf
    n2: float = 0.0
    A_eff: float = 1.0

    def __post_init__(self):
        for name in ("Q_i", "Q_C1", "Q_C2"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.A_eff > 0:
            raise ConfigurationError(f"A_eff must be positive, got {self.A_eff}")
        if self.n2 < 0:
            raise ConfigurationError(f"n2 must be non-negative, got {self.n2}")

    @property
    def omega(self) -> float:
        return self.dispersion.omega0

    @property
    def Q_C(self) -> float:
        return combine_coupling_q(self.Q_C1, self.Q_C2)

    @property
    def Q_L(self) -> float:
        return loaded_q(self.Q_i, self.Q_C)

    @property
    def gamma(self) -> float:
        return nonlinear_parameter(self.n2, self.omega, self.A_eff)

    def with_quality(self, Q_i: float, Q_C: float) -> "Band":
        """Copy with a single effective coupler of quality ``Q_C``."""
        return replace(self, Q_i=Q_i, Q_C1=Q_C, Q_C2=math.inf)


@dataclass(frozen=True)
class ResonatorConfig:
    """Ring radius plus the 946 nm and 1550 nm band descriptions.

    The round-trip time is taken from the 946 band's D1; the two bands must
    agree on it to within 1 %.
    """

    radius: float
    band946: Band
    band1550: Band

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError(f"radius must be positive, got {self.radius}")
        t1 = 2 * pi / self.band946.dispersion.D1
        t2 = 2 * pi / self.band1550.dispersion.D1
        if abs(t1 - t2) > 0.01 * t1:
            raise ConfigurationError(
                f"round-trip times of the two bands disagree: {t1:.4e} s vs {t2:.4e} s"
            )

    def band(self, name: str) -> Band:
        if name in (BAND_946, "p1", 946):
            return self.band946
        if name in (BAND_1550, "p2", 1550):
            return self.band1550
        raise KeyError(f"unknown band {name!r}")

    @property
    def length(self) -> float:
        """Round-trip length in m."""
        return 2 * pi * self.radius * 1e-6

    @property
    def round_trip_time(self) -> float:
        return 2 * pi / self.band946.dispersion.D1

    def gamma(self, band: str) -> float:
        return self.band(band).gamma

    def alpha(self, band: str) -> float:
        return round_trip_loss(self, band)

    def theta(self, band: str) -> float:
        return coupling_ratio(self, band)

    def with_quality(self, Q_i: float, Q_C: float) -> "ResonatorConfig":
        """Both bands set to the same intrinsic and effective coupling Q."""
        return replace(
            self,
            band946=self.band946.with_quality(Q_i, Q_C),
            band1550=self.band1550.with_quality(Q_i, Q_C),
        )


def round_trip_loss(config: ResonatorConfig, band: str, resonance_index: int = 0) -> float:
    """alpha = w_m t_R / (2 Q_L) for resonance ``resonance_index`` of ``band``."""
    b = config.band(band)
    w = resonance_frequency(b.dispersion, resonance_index)
    return w * config.round_trip_time / (2.0 * b.Q_L)


def coupling_ratio(config: ResonatorConfig, band: str, coupler: Optional[int] = None) -> float:
    """Power coupling ratio per round trip, theta = w t_R / Q_C.

    ``coupler=None`` uses the band's effective coupling Q (both couplers);
    ``1`` or ``2`` selects a single coupler.
    """
    b = config.band(band)
    if coupler is None:
        q = b.Q_C
    elif coupler == 1:
        q = b.Q_C1
    elif coupler == 2:
        q = b.Q_C2
    else:
        raise ValueError(f"coupler must be 1, 2 or None, got {coupler!r}")
    return b.omega * config.round_trip_time / q


_MODE_BAND = {"s": (BAND_946, 1), "s'": (BAND_946, -1), "i+": (BAND_1550, 1), "i-": (BAND_1550, -1)}


def mode_resonance(config: ResonatorConfig, mode: str, mu: int = 1) -> float:
    """Cold resonance hosting ``mode`` for pump-signal separation ``mu``."""
    try:
        band, sign = _MODE_BAND[mode]
    except KeyError:
        raise ValueError(f"mode must be one of {sorted(_MODE_BAND)}, got {mode!r}") from None
    return resonance_frequency(config.band(band).dispersion, sign * mu)


def kerr_shifted_detuning(
    config: ResonatorConfig,
    mode: str,
    laser_frequency: float,
    pump_powers_intracavity: Tuple[float, float],
    mu: int = 1,
) -> float:
    """Effective round-trip detuning phase of a weak mode.

    dphi = (w_res - w_laser) t_R - 2 gamma L (|E_p1|^2 + |E_p2|^2) with gamma
    of the mode's own band.  Positive values mean the laser sits on the red
    side of the (Kerr-shifted) resonance.
    """
    p1, p2 = pump_powers_intracavity
    if p1 < 0 or p2 < 0:
        raise ValueError("intracavity pump powers must be non-negative")
    w_res = mode_resonance(config, mode, mu)
    band = _MODE_BAND[mode][0]
    t_r = config.round_trip_time
    return (w_res - laser_frequency) * t_r - 2.0 * config.gamma(band) * config.length * (p1 + p2)


def fit_dispersion_model(mode_scan, radius: float, center_wavelength: float) -> DispersionModel:
    """Resonance expansion from an effective-index scan.

    Parameters
    ----------
    mode_scan
        Anything with ``wavelengths`` (nm) and ``n_eff`` sequences, e.g. a
        :class:`~hybrid_node.modesolver.DispersionScan`.
    radius : float
        Ring radius in um.
    center_wavelength : float
        Wavelength (nm) near which the central resonance is chosen.

    The central resonance is the azimuthal order m = round(beta R) at the
    requested wavelength, and w(beta) is differentiated at beta = m / R
    through a local polynomial fit; D_n is the n-th derivative times R^-n.
    """
    lam = np.asarray(mode_scan.wavelengths, dtype=float)
    neff = np.asarray(mode_scan.n_eff, dtype=float)
    if lam.size < 5:
        raise DispersionFitError("need at least 5 wavelengths for a cubic expansion")
    if not (lam.min() < center_wavelength < lam.max()):
        raise DispersionFitError(
            f"scan [{lam.min():g}, {lam.max():g}] nm does not bracket {center_wavelength:g} nm"
        )
    order = np.argsort(lam)
    lam, neff = lam[order], neff[order]
    beta = 2 * pi * neff / (lam * 1e-9)
    if not np.all(np.diff(beta) < 0):
        raise DispersionFitError("propagation constant is not strictly monotone in wavelength")
    omega = 2 * pi * c / (lam * 1e-9)
    R = radius * 1e-6

    # fit omega(beta) in scaled variables; ordering in beta ascending
    b = beta[::-1]
    w = omega[::-1]
    b_mid, b_scale = b.mean(), (b.max() - b.min()) / 2
    w_mid, w_scale = w.mean(), (w.max() - w.min()) / 2
    deg = int(min(b.size - 1, 6))
    poly = np.polynomial.Polynomial.fit((b - b_mid) / b_scale, (w - w_mid) / w_scale, deg,
                                        domain=[-1, 1], window=[-1, 1])

    # central azimuthal order from the interpolated beta at the centre
    w_c = 2 * pi * c / (center_wavelength * 1e-9)
    beta_c = np.interp(w_c, w, b)
    m0 = round(beta_c * R)
    beta0 = m0 / R
    if not (b.min() <= beta0 <= b.max()):
        raise DispersionFitError("central resonance falls outside the scanned range")
    x0 = (beta0 - b_mid) / b_scale
    derivs = []
    p = poly
    for n in range(1, 4):
        p = p.deriv()
        derivs.append(p(x0) * w_scale / b_scale**n)
    omega0 = poly(x0) * w_scale + w_mid
    return DispersionModel(
        omega0=float(omega0),
        D1=float(derivs[0] / R),
        D2=float(derivs[1] / R**2),
        D3=float(derivs[2] / R**3),
    )
