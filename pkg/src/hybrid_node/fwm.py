"""
Coupled-mode model of four-wave-mixing Bragg scattering in a two-band ring.

Two strong pumps (p1 in the 946 nm band, p2 in the 1550 nm band) are held
fixed.  Four weak fields are solved for: the signal ``s`` on resonance
``+mu`` of the 946 band, the auxiliary signal ``s'`` at 2 w_p1 - w_s on
resonance ``-mu``, and the idlers ``i+``/``i-`` at w_p2 +/- (w_s - w_p1) on
resonances ``+mu``/``-mu`` of the 1550 band.  With ``t`` in units of the
round-trip time t_R::

    dE_s/dt  = -(a1 + i dphi_s)  E_s  + i g1 L E1^2 E_s'*
               + 2i g1 L E1 (E2 E_i-* + E2* E_i+) + i sqrt(theta1 P_s)
    dE_s'/dt = -(a1 + i dphi_s') E_s' + i g1 L E1^2 E_s*
               + 2i g1 L E1 (E2 E_i+* + E2* E_i-)
    dE_i+/dt = -(a2 + i dphi_i+) E_i+ + i g2 L E2^2 E_i-*
               + 2i g2 L E2 (E1 E_s'* + E1* E_s)
    dE_i-/dt = -(a2 + i dphi_i-) E_i- + i g2 L E2^2 E_i+*
               + 2i g2 L E2 (E1 E_s* + E1* E_s')

|E|^2 is circulating power in W.  The system is linear in the weak fields
once (E_s, E_s'*, E_i+, E_i-*) are stacked, so the steady state is a 4x4
complex solve; :func:`steady_state_timestep` integrates the equations above
directly and serves as an independent check.

Pumps default to sitting on their own Kerr-shifted resonances: the
intracavity power is theta P / alpha^2 and the pump frequency is pulled red
by self- plus cross-phase modulation, g L (|E_self|^2 + 2 |E_other|^2) / t_R.
Every weak-mode frequency is derived from these pump frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.constants import c, hbar, pi

from .resonator import (
    BAND_1550,
    BAND_946,
    ResonatorConfig,
    coupling_ratio,
    mode_resonance,
)

__all__ = [
    "PumpConfig",
    "PumpState",
    "Signal",
    "CMEState",
    "ConversionResult",
    "SolverError",
    "ConvergenceTimeout",
    "MODES",
    "pump_intracavity_fields",
    "pump_state",
    "signal_frequency",
    "normalized_detuning",
    "steady_state_linear",
    "steady_state_timestep",
    "conversion_efficiency",
    "convert",
    "photon_flux_balance",
    "cme_rhs",
    "efficiency_curve",
    "optimize_signal_detuning",
    "sweep_signal_detuning",
    "sweep_mu",
    "sweep_q_power",
    "to_db",
    "is_stable",
    "solve_pump_kerr",
    "kerr_center",
    "random_case",
]

MODES = ("s", "s'", "i+", "i-")


class SolverError(RuntimeError):
    """Steady-state system is singular or otherwise unsolvable."""


class ConvergenceTimeout(SolverError):
    """Time integration did not settle within the allotted time."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class PumpConfig:
    """Pump powers at the waveguide input.

    ``detuning1``/``detuning2`` (rad/s) are resonance-minus-laser offsets from
    each pump's Kerr-shifted resonance; positive means red of resonance.
    """

    P_total: float
    split_fraction: float = 0.5
    detuning1: float = 0.0
    detuning2: float = 0.0

    def __post_init__(self):
        if self.P_total < 0:
            raise ValueError(f"P_total must be >= 0, got {self.P_total}")
        if not 0.0 <= self.split_fraction <= 1.0:
            raise ValueError(f"split_fraction must lie in [0, 1], got {self.split_fraction}")

    @property
    def P1(self) -> float:
        return self.P_total * self.split_fraction

    @property
    def P2(self) -> float:
        return self.P_total * (1.0 - self.split_fraction)


@dataclass(frozen=True)
class PumpState:
    """Fixed pump amplitudes (sqrt W) and laser frequencies (rad/s)."""

    E_p1: complex
    E_p2: complex
    omega_p1: float
    omega_p2: float

    @property
    def powers(self) -> Tuple[float, float]:
        return abs(self.E_p1) ** 2, abs(self.E_p2) ** 2


@dataclass(frozen=True)
class Signal:
    """Weak continuous-wave input: power ``P_s`` (W) at ``omega_s`` (rad/s)."""

    P_s: float
    omega_s: float
    mu: int = 1

    def __post_init__(self):
        if self.P_s < 0:
            raise ValueError("signal power must be non-negative")
        if int(self.mu) != self.mu or self.mu < 1:
            raise ValueError(f"mu must be a positive integer, got {self.mu}")


@dataclass(frozen=True)
class CMEState:
    """Intracavity weak fields plus everything needed to interpret them."""

    E_s: complex
    E_sp: complex
    E_ip: complex
    E_im: complex
    pumps: PumpState
    signal: Signal
    omega: Dict[str, float]
    dphi: Dict[str, float]
    method: str = ""
    residual: float = 0.0
    iterations: int = 0
    settling_time: float = float("nan")

    def field(self, mode: str) -> complex:
        return {"s": self.E_s, "s'": self.E_sp, "i+": self.E_ip, "i-": self.E_im}[mode]

    @property
    def fields(self) -> np.ndarray:
        return np.array([self.E_s, self.E_sp, self.E_ip, self.E_im])

    @property
    def E_p1(self) -> complex:
        return self.pumps.E_p1

    @property
    def E_p2(self) -> complex:
        return self.pumps.E_p2


@dataclass(frozen=True)
class ConversionResult:
    efficiency: Dict[str, float]
    state: CMEState
    method: str
    residual: float
    iterations: int


# -- pumps -----------------------------------------------------------------


def pump_intracavity_fields(config: ResonatorConfig, pumps: PumpConfig) -> Tuple[complex, complex]:
    """Circulating pump amplitudes, |E_p|^2 = theta P / (alpha^2 + dphi_p^2).

    Phases are zero; ``dphi_p`` is the pump's offset from its Kerr-shifted
    resonance in round-trip phase.
    """
    t_r = config.round_trip_time
    out = []
    for band, P, det in ((BAND_946, pumps.P1, pumps.detuning1), (BAND_1550, pumps.P2, pumps.detuning2)):
        a = config.alpha(band)
        th = config.theta(band)
        dphi = det * t_r
        out.append(complex(math.sqrt(th * P / (a * a + dphi * dphi))))
    return out[0], out[1]


def pump_state(config: ResonatorConfig, pumps: PumpConfig) -> PumpState:
    """Pump amplitudes and the laser frequencies that put them on resonance."""
    E1, E2 = pump_intracavity_fields(config, pumps)
    I1, I2 = abs(E1) ** 2, abs(E2) ** 2
    L, t_r = config.length, config.round_trip_time
    shift1 = config.gamma(BAND_946) * L * (I1 + 2.0 * I2)
    shift2 = config.gamma(BAND_1550) * L * (I2 + 2.0 * I1)
    w1 = config.band946.omega - (shift1 + pumps.detuning1 * t_r) / t_r
    w2 = config.band1550.omega - (shift2 + pumps.detuning2 * t_r) / t_r
    return PumpState(E1, E2, w1, w2)


def solve_pump_kerr(
    config: ResonatorConfig,
    pumps: PumpConfig,
    cold_detuning1: float,
    cold_detuning2: float,
    n_steps: int = 200,
) -> PumpState:
    """Pump fields for lasers at fixed offsets from the *cold* resonances.

    Solves the coupled self/cross-phase fixed point

        I_k = theta_k P_k / (alpha_k^2 + (d_k t_R - s_k(I1, I2))^2)

    by ramping the input power from zero (the branch a slow laser sweep would
    follow).  ``cold_detuning*`` are resonance-minus-laser offsets in rad/s.
    """
    t_r, L = config.round_trip_time, config.length
    g1, g2 = config.gamma(BAND_946), config.gamma(BAND_1550)
    a1, a2 = config.alpha(BAND_946), config.alpha(BAND_1550)
    th1, th2 = config.theta(BAND_946), config.theta(BAND_1550)
    d1, d2 = cold_detuning1 * t_r, cold_detuning2 * t_r

    def residual(I, scale):
        I1, I2 = I
        s1 = g1 * L * (I1 + 2 * I2)
        s2 = g2 * L * (I2 + 2 * I1)
        return [
            I1 * (a1**2 + (d1 - s1) ** 2) - th1 * pumps.P1 * scale,
            I2 * (a2**2 + (d2 - s2) ** 2) - th2 * pumps.P2 * scale,
        ]

    I = np.zeros(2)
    for scale in np.linspace(0.0, 1.0, n_steps + 1)[1:]:
        sol, info, ier, msg = optimize.fsolve(residual, I, args=(scale,), full_output=True, xtol=1e-13)
        if ier != 1:
            raise SolverError(f"pump Kerr fixed point failed at {scale:.3f} of full power: {msg}")
        I = sol
    I1, I2 = I
    return PumpState(complex(math.sqrt(I1)), complex(math.sqrt(I2)),
                     config.band946.omega - d1 / t_r, config.band1550.omega - d2 / t_r)


# -- signal bookkeeping ----------------------------------------------------


def signal_frequency(config: ResonatorConfig, mu: int, detuning_norm):
    """Signal frequency for a wavelength offset given in linewidths.

    ``detuning_norm`` is (lambda_s - lambda_res) / (lambda_res / Q_L) for the
    cold resonance ``mu`` of the 946 band; positive values are red-shifted.
    """
    w_res = mode_resonance(config, "s", mu)
    lam_res = 2 * pi * c / w_res
    lam = lam_res * (1.0 + np.asarray(detuning_norm, dtype=float) / config.band946.Q_L)
    return 2 * pi * c / lam


def normalized_detuning(config: ResonatorConfig, mu: int, omega_s):
    """Inverse of :func:`signal_frequency`."""
    w_res = mode_resonance(config, "s", mu)
    return (w_res / np.asarray(omega_s, dtype=float) - 1.0) * config.band946.Q_L


def _mode_frequencies(pumps: PumpState, omega_s):
    d = omega_s - pumps.omega_p1
    return {
        "s": omega_s,
        "s'": pumps.omega_p1 - d,
        "i+": pumps.omega_p2 + d,
        "i-": pumps.omega_p2 - d,
    }


def _detunings(config: ResonatorConfig, pumps: PumpState, mu: int, omegas):
    I1, I2 = pumps.powers
    t_r, L = config.round_trip_time, config.length
    k1 = 2.0 * config.gamma(BAND_946) * L * (I1 + I2)
    k2 = 2.0 * config.gamma(BAND_1550) * L * (I1 + I2)
    kerr = {"s": k1, "s'": k1, "i+": k2, "i-": k2}
    return {m: (mode_resonance(config, m, mu) - omegas[m]) * t_r - kerr[m] for m in MODES}


def _coefficients(config: ResonatorConfig, pumps: PumpState):
    L = config.length
    g1, g2 = config.gamma(BAND_946), config.gamma(BAND_1550)
    return dict(
        a1=config.alpha(BAND_946),
        a2=config.alpha(BAND_1550),
        th1=config.theta(BAND_946),
        E1=complex(pumps.E_p1),
        E2=complex(pumps.E_p2),
        g1L=g1 * L,
        g2L=g2 * L,
    )


def _stacked_system(k, dphi, drive):
    """Matrix M and vector b with dx/dt = M x + b, x = (E_s, E_s'*, E_i+, E_i-*).

    ``dphi`` entries and ``drive`` may be arrays; the result then carries a
    leading batch dimension.
    """
    E1, E2 = k["E1"], k["E2"]
    g1L, g2L = k["g1L"], k["g2L"]
    a1, a2 = k["a1"], k["a2"]
    ds, dsp, dip, dim = (np.asarray(dphi[m], dtype=float) for m in MODES)
    shape = np.broadcast(ds, dsp, dip, dim).shape
    M = np.zeros(shape + (4, 4), dtype=complex)
    A = 1j * g1L * E1 * E1
    B1 = 2j * g1L * E1
    M[..., 0, 0] = -(a1 + 1j * ds)
    M[..., 0, 1] = A
    M[..., 0, 2] = B1 * np.conj(E2)
    M[..., 0, 3] = B1 * E2
    M[..., 1, 0] = np.conj(A)
    M[..., 1, 1] = -(a1 - 1j * dsp)
    M[..., 1, 2] = np.conj(B1 * E2)
    M[..., 1, 3] = np.conj(B1 * np.conj(E2))
    C = 1j * g2L * E2 * E2
    B2 = 2j * g2L * E2
    M[..., 2, 0] = B2 * np.conj(E1)
    M[..., 2, 1] = B2 * E1
    M[..., 2, 2] = -(a2 + 1j * dip)
    M[..., 2, 3] = C
    M[..., 3, 0] = np.conj(B2 * E1)
    M[..., 3, 1] = np.conj(B2 * np.conj(E1))
    M[..., 3, 2] = np.conj(C)
    M[..., 3, 3] = -(a2 - 1j * dim)
    b = np.zeros(shape + (4,), dtype=complex)
    b[..., 0] = drive
    return M, b


def cme_rhs(E, k, dphi, drive):
    """Right-hand side of the four weak-field equations (per round trip).

    ``E`` is the tuple (E_s, E_s', E_i+, E_i-) of un-conjugated amplitudes.
    """
    Es, Esp, Eip, Eim = E
    E1, E2 = k["E1"], k["E2"]
    g1L, g2L = k["g1L"], k["g2L"]
    a1, a2 = k["a1"], k["a2"]
    E1c, E2c = E1.conjugate(), E2.conjugate()
    dEs = (
        -(a1 + 1j * dphi["s"]) * Es
        + 1j * g1L * E1 * E1 * Esp.conjugate()
        + 2j * g1L * E1 * (E2 * Eim.conjugate() + E2c * Eip)
        + drive
    )
    dEsp = (
        -(a1 + 1j * dphi["s'"]) * Esp
        + 1j * g1L * E1 * E1 * Es.conjugate()
        + 2j * g1L * E1 * (E2 * Eip.conjugate() + E2c * Eim)
    )
    dEip = (
        -(a2 + 1j * dphi["i+"]) * Eip
        + 1j * g2L * E2 * E2 * Eim.conjugate()
        + 2j * g2L * E2 * (E1 * Esp.conjugate() + E1c * Es)
    )
    dEim = (
        -(a2 + 1j * dphi["i-"]) * Eim
        + 1j * g2L * E2 * E2 * Eip.conjugate()
        + 2j * g2L * E2 * (E1 * Es.conjugate() + E1c * Esp)
    )
    return dEs, dEsp, dEip, dEim


def _setup(config, pumps, signal):
    if isinstance(pumps, PumpConfig):
        pumps = pump_state(config, pumps)
    omegas = _mode_frequencies(pumps, signal.omega_s)
    dphi = _detunings(config, pumps, signal.mu, omegas)
    k = _coefficients(config, pumps)
    drive = 1j * math.sqrt(k["th1"] * signal.P_s)
    return pumps, omegas, dphi, k, drive


def steady_state_linear(config: ResonatorConfig, pumps, signal: Signal) -> CMEState:
    """Steady state from the stacked 4x4 linear system.

    ``pumps`` is a :class:`PumpConfig` (pumps parked on their shifted
    resonances) or an explicit :class:`PumpState`.
    """
    pumps, omegas, dphi, k, drive = _setup(config, pumps, signal)
    M, b = _stacked_system(k, dphi, drive)
    try:
        x = np.linalg.solve(M, -b)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"steady-state system is singular: {exc}") from None
    E = (complex(x[0]), complex(np.conj(x[1])), complex(x[2]), complex(np.conj(x[3])))
    res = cme_rhs(E, k, dphi, drive)
    scale = abs(drive) if drive != 0 else 1.0
    residual = max(abs(r) for r in res) / scale
    return CMEState(*E, pumps=pumps, signal=signal, omega=omegas, dphi=dphi,
                    method="linear", residual=float(residual), iterations=1)


def steady_state_timestep(
    config: ResonatorConfig,
    pumps,
    signal: Signal,
    t_max: Optional[float] = None,
    dt: Optional[float] = None,
    tol: float = 1e-10,
) -> CMEState:
    """Integrate the weak-field equations from zero with classical RK4.

    ``dt`` defaults to t_R / 10 and may not exceed it.  ``t_max`` may not be
    less than 50 photon lifetimes (t_R / alpha of the longer-lived band); by
    default it also covers 60 e-folding times of the slowest eigenmode of the
    linearised dynamics.  The run stops once the largest field change over
    one photon lifetime is below ``tol`` relative to the largest field.
    """
    pumps, omegas, dphi, k, drive = _setup(config, pumps, signal)
    t_r = config.round_trip_time
    a_min = min(k["a1"], k["a2"])
    lifetime = t_r / a_min
    if dt is None:
        dt = t_r / 10.0
    if dt > t_r / 10.0 * (1 + 1e-12):
        raise ValueError("dt must not exceed t_R / 10")
    if t_max is None:
        # cover the slowest decaying eigenmode, which near the oscillation
        # threshold can be far slower than the bare photon lifetime
        M, _ = _stacked_system(k, dphi, drive)
        slowest = float(np.min(-np.linalg.eigvals(M).real))
        t_max = 50.0 * lifetime
        if slowest > 0:
            t_max = max(t_max, 60.0 * t_r / slowest)
    if t_max < 50.0 * lifetime * (1 - 1e-12):
        raise ValueError("t_max must cover at least 50 photon lifetimes")

    h = dt / t_r
    steps_per_check = max(1, int(round(lifetime / dt)))
    max_steps = int(math.ceil(t_max / dt))
    E = (0j, 0j, 0j, 0j)
    last = E
    n = 0
    rel = float("inf")

    def add(u, v, s):
        return tuple(ui + s * vi for ui, vi in zip(u, v))

    while n < max_steps:
        for _ in range(steps_per_check):
            k1 = cme_rhs(E, k, dphi, drive)
            k2 = cme_rhs(add(E, k1, 0.5 * h), k, dphi, drive)
            k3 = cme_rhs(add(E, k2, 0.5 * h), k, dphi, drive)
            k4 = cme_rhs(add(E, k3, h), k, dphi, drive)
            E = tuple(e + h / 6.0 * (p + 2 * q + 2 * r + s) for e, p, q, r, s in zip(E, k1, k2, k3, k4))
            n += 1
        big = max(abs(e) for e in E)
        change = max(abs(e - l) for e, l in zip(E, last))
        if not math.isfinite(big):
            raise ConvergenceTimeout("time integration diverged (parametric instability)", float("inf"))
        rel = 0.0 if big == 0.0 else change / big
        last = E
        if rel < tol:
            return CMEState(*E, pumps=pumps, signal=signal, omega=omegas, dphi=dphi,
                            method="rk4", residual=float(rel), iterations=n,
                            settling_time=n * dt)
    raise ConvergenceTimeout(
        f"no steady state after {n} steps ({n * dt:.3e} s); last relative change {rel:.3e}", rel
    )


def is_stable(config: ResonatorConfig, pumps, signal: Signal) -> bool:
    """True when every eigenvalue of the linearised weak-field dynamics decays."""
    pumps, omegas, dphi, k, drive = _setup(config, pumps, signal)
    M, _ = _stacked_system(k, dphi, drive)
    return bool(np.all(np.linalg.eigvals(M).real < 0))


# -- outputs ---------------------------------------------------------------


def conversion_efficiency(state: CMEState, config: ResonatorConfig, branch: str = "i+") -> float:
    """Output photon flux in ``branch`` per input signal photon.

    Idlers leave through the 1550 nm coupling (theta2), the auxiliary signal
    through the 946 nm coupling (theta1); ``"s"`` is the transmitted signal,
    |sqrt(P_s) + i sqrt(theta1) E_s|^2 / P_s.
    """
    P_s = state.signal.P_s
    if P_s == 0:
        return 0.0
    w_s = state.omega["s"]
    if branch in ("i+", "i-"):
        th = coupling_ratio(config, BAND_1550)
    elif branch == "s'":
        th = coupling_ratio(config, BAND_946)
    elif branch == "s":
        th = coupling_ratio(config, BAND_946)
        out = math.sqrt(P_s) + 1j * math.sqrt(th) * state.E_s
        return abs(out) ** 2 / P_s
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return th * abs(state.field(branch)) ** 2 / state.omega[branch] / (P_s / w_s)


def convert(config: ResonatorConfig, pumps, signal: Signal) -> ConversionResult:
    """Linear steady state plus all four output efficiencies."""
    st = steady_state_linear(config, pumps, signal)
    eff = {m: conversion_efficiency(st, config, m) for m in ("i+", "i-", "s'", "s")}
    return ConversionResult(eff, st, st.method, st.residual, st.iterations)


def photon_flux_balance(state: CMEState, config: ResonatorConfig) -> Dict[str, float]:
    """Signed photon-number bookkeeping of a steady state.

    Bragg-scattering terms exchange photons between {s, i+} and {s', i-};
    the phase-conjugation terms create or remove one photon in each group.
    The conserved quantity is therefore N_s + N_i+ - N_s' - N_i-, counted with
    photon energies at each band's reference frequency (the one that sets
    gamma).  When n2 / A_eff is equal in both bands the returned ``residual``
    vanishes up to rounding.

    Returns net input flux, dissipated flux per mode (2 alpha |E|^2 / hbar w)
    split into its coupler (theta) and intrinsic (2 alpha - theta) parts, the
    signed sum, and the relative residual.  Fluxes are photons per second.
    """
    P_s = state.signal.P_s
    w_b = {"s": config.band946.omega, "s'": config.band946.omega,
           "i+": config.band1550.omega, "i-": config.band1550.omega}
    alpha = {"s": config.alpha(BAND_946), "s'": config.alpha(BAND_946),
             "i+": config.alpha(BAND_1550), "i-": config.alpha(BAND_1550)}
    th1 = config.theta(BAND_946)
    # net power injected by the drive term: P_s + theta1 |E_s|^2 - |s_out|^2
    inj = 2.0 * (state.E_s.conjugate() * 1j * math.sqrt(th1 * P_s)).real
    t_r = config.round_trip_time
    out = {"input": inj / (hbar * w_b["s"] * t_r)}
    sign = {"s": 1.0, "i+": 1.0, "s'": -1.0, "i-": -1.0}
    total = 0.0
    theta = {"s": th1, "s'": th1, "i+": config.theta(BAND_1550), "i-": config.theta(BAND_1550)}
    for m in MODES:
        n = abs(state.field(m)) ** 2 / (hbar * w_b[m] * t_r)
        f = 2.0 * alpha[m] * n
        out[m] = f
        out[m + " coupled"] = theta[m] * n
        out[m + " intrinsic"] = (2.0 * alpha[m] - theta[m]) * n
        total += sign[m] * f
    out["signed_total"] = total
    out["residual"] = abs(out["input"] - total) / abs(out["input"]) if out["input"] else abs(total)
    return out


def to_db(eta):
    eta = np.asarray(eta, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(eta)
    return float(out) if out.ndim == 0 else out


# -- batched evaluation and sweeps ----------------------------------------


def efficiency_curve(
    config: ResonatorConfig,
    pumps,
    mu: int,
    detuning_norm,
    branches: Sequence[str] = ("i+",),
    P_s: float = 1e-6,
    with_stability: bool = False,
) -> Dict[str, np.ndarray]:
    """Vectorised efficiencies over an array of normalised signal detunings.

    With ``with_stability`` the result also holds ``"stable"``, a boolean
    array that is False where the weak fields grow without bound
    (parametric oscillation) and the steady state is never reached.
    """
    if isinstance(pumps, PumpConfig):
        pumps = pump_state(config, pumps)
    x = np.atleast_1d(np.asarray(detuning_norm, dtype=float))
    w_s = signal_frequency(config, mu, x)
    omegas = _mode_frequencies(pumps, w_s)
    dphi = _detunings(config, pumps, mu, omegas)
    k = _coefficients(config, pumps)
    drive = 1j * math.sqrt(k["th1"] * P_s)
    M, b = _stacked_system(k, dphi, drive)
    sol = np.linalg.solve(M, -b[..., None])[..., 0]
    fields = {"s": sol[:, 0], "s'": np.conj(sol[:, 1]), "i+": sol[:, 2], "i-": np.conj(sol[:, 3])}
    th1 = coupling_ratio(config, BAND_946)
    th2 = coupling_ratio(config, BAND_1550)
    out = {}
    for br in branches:
        if br in ("i+", "i-"):
            out[br] = th2 * np.abs(fields[br]) ** 2 / omegas[br] / (P_s / w_s)
        elif br == "s'":
            out[br] = th1 * np.abs(fields[br]) ** 2 / omegas[br] / (P_s / w_s)
        elif br == "s":
            out[br] = np.abs(math.sqrt(P_s) + 1j * math.sqrt(th1) * fields["s"]) ** 2 / P_s
        else:
            raise ValueError(f"unknown branch {br!r}")
    if with_stability:
        out["stable"] = np.all(np.linalg.eigvals(M).real < 0, axis=-1)
    return out


def kerr_center(config: ResonatorConfig, pumps: PumpState) -> float:
    """Normalised detuning of the signal's Kerr-shifted resonance."""
    I1, I2 = pumps.powers
    k1 = 2.0 * config.gamma(BAND_946) * config.length * (I1 + I2)
    return k1 / (2.0 * config.alpha(BAND_946))


def optimize_signal_detuning(
    config: ResonatorConfig,
    pumps,
    mu: int = 1,
    branch: str = "i+",
    n_grid: int = 201,
    span: float = 2.0,
    stable_only: bool = True,
) -> Tuple[float, float]:
    """Signal detuning (linewidths) maximising ``branch``; returns (x, eta).

    A coarse grid of ``n_grid`` points covering +/- ``span`` linewidths about
    the Kerr-shifted signal resonance is refined by golden-section search.
    With ``stable_only`` detunings past the parametric-oscillation threshold
    are excluded; if none remain the result is (nan, nan).
    """
    if isinstance(pumps, PumpConfig):
        pumps = pump_state(config, pumps)
    x0 = kerr_center(config, pumps)
    grid = np.linspace(x0 - span, x0 + span, n_grid)
    curve = efficiency_curve(config, pumps, mu, grid, (branch,), with_stability=stable_only)
    eta = curve[branch]
    if stable_only:
        if not curve["stable"].any():
            return float("nan"), float("nan")
        eta = np.where(curve["stable"], eta, -1.0)
    i = int(np.argmax(eta))
    if eta[i] == 0.0:
        return float(grid[i]), 0.0
    if i == 0 or i == n_grid - 1 or eta[i - 1] < 0 or eta[i + 1] < 0:
        return float(grid[i]), float(eta[i])

    def neg(x):
        r = efficiency_curve(config, pumps, mu, [x], (branch,), with_stability=stable_only)
        if stable_only and not r["stable"][0]:
            return 0.0
        return -float(r[branch][0])

    res = optimize.minimize_scalar(neg, bracket=(grid[i - 1], grid[i], grid[i + 1]),
                                   method="golden", tol=1e-10)
    if -res.fun >= eta[i]:
        return float(res.x), float(-res.fun)
    return float(grid[i]), float(eta[i])


@dataclass
class DetuningSweep:
    powers: np.ndarray
    detuning: np.ndarray
    eta: np.ndarray  # (n_power, n_detuning)
    peak_detuning: np.ndarray
    peak_eta: np.ndarray

    def rows(self):
        for i, p in enumerate(self.powers):
            for j, x in enumerate(self.detuning):
                yield p, x, self.eta[i, j]


def sweep_signal_detuning(
    config: ResonatorConfig,
    pump_power_list: Iterable[float],
    mu: int = 1,
    detuning_grid=None,
    split_fraction: float = 0.5,
) -> DetuningSweep:
    """i+ efficiency versus normalised signal detuning for several pump powers.

    Powers are total input pump power in W.  Peaks are refined with the same
    golden-section search as :func:`optimize_signal_detuning`, bracketed on
    the supplied grid.
    """
    powers = np.asarray(list(pump_power_list), dtype=float)
    if powers.size == 0:
        raise ValueError("pump power list is empty")
    if detuning_grid is None:
        detuning_grid = np.linspace(-1.0, 3.0, 401)
    x = np.asarray(detuning_grid, dtype=float)
    eta = np.zeros((powers.size, x.size))
    px = np.zeros(powers.size)
    pe = np.zeros(powers.size)
    for i, P in enumerate(powers):
        ps = pump_state(config, PumpConfig(P, split_fraction))
        eta[i] = efficiency_curve(config, ps, mu, x)["i+"]
        j = int(np.argmax(eta[i]))
        px[i], pe[i] = x[j], eta[i, j]
        if 0 < j < x.size - 1 and eta[i, j] > 0:
            res = optimize.minimize_scalar(
                lambda v: -float(efficiency_curve(config, ps, mu, [v])["i+"][0]),
                bracket=(x[j - 1], x[j], x[j + 1]), method="golden", tol=1e-10)
            if -res.fun >= pe[i]:
                px[i], pe[i] = res.x, -res.fun
    return DetuningSweep(powers, x, eta, px, pe)


@dataclass
class MuSweep:
    mu: np.ndarray
    lambda_iplus: np.ndarray  # nm
    lambda_iminus: np.ndarray
    eta_iplus: np.ndarray
    eta_iminus: np.ndarray
    detuning_iplus: np.ndarray
    detuning_iminus: np.ndarray


def sweep_mu(
    config: ResonatorConfig,
    pump_power: float,
    mu_range: Iterable[int],
    split_fraction: float = 0.5,
) -> MuSweep:
    """Peak idler efficiencies versus pump-signal separation.

    Each branch is optimised over signal detuning on its own.  Output
    wavelengths are those of the optimised idlers.
    """
    mus = np.asarray(list(mu_range), dtype=int)
    ps = pump_state(config, PumpConfig(pump_power, split_fraction))
    n = mus.size
    ep, em, xp, xm, lp, lm = (np.zeros(n) for _ in range(6))
    for i, mu in enumerate(mus):
        xp[i], ep[i] = optimize_signal_detuning(config, ps, int(mu), "i+")
        xm[i], em[i] = optimize_signal_detuning(config, ps, int(mu), "i-")
        wp = _mode_frequencies(ps, float(signal_frequency(config, int(mu), xp[i])))["i+"]
        wm = _mode_frequencies(ps, float(signal_frequency(config, int(mu), xm[i])))["i-"]
        lp[i] = 2 * pi * c / wp * 1e9
        lm[i] = 2 * pi * c / wm * 1e9
    return MuSweep(mus, lp, lm, ep, em, xp, xm)


@dataclass
class QPowerMap:
    powers: np.ndarray
    Q_L: np.ndarray
    eta: np.ndarray  # (n_power, n_Q)
    detuning: np.ndarray
    unity_Q_L: np.ndarray  # first Q_L reaching eta = 1 per power (nan if none)


def _critical(config: ResonatorConfig, Q_L: float) -> ResonatorConfig:
    return config.with_quality(2.0 * Q_L, 2.0 * Q_L)


def sweep_q_power(
    config: ResonatorConfig,
    power_list: Iterable[float],
    Q_L_range: Iterable[float],
    critical_coupling: bool = True,
    mu: int = 1,
    level: float = 1.0,
) -> QPowerMap:
    """Optimised i+ efficiency over a (pump power, loaded Q) grid.

    With ``critical_coupling`` both bands get Q_i = Q_C = 2 Q_L; otherwise Q_i
    is scaled with the coupler Q fixed.  ``unity_Q_L`` holds, per power, the
    loaded Q at which the optimised efficiency first reaches ``level``
    (log-linear interpolation between grid points).
    """
    powers = np.asarray(list(power_list), dtype=float)
    qs = np.asarray(list(Q_L_range), dtype=float)
    if powers.size == 0 or qs.size == 0:
        raise ValueError("power and Q_L lists must be non-empty")
    eta = np.zeros((powers.size, qs.size))
    det = np.zeros_like(eta)
    for j, q in enumerate(qs):
        if critical_coupling:
            cfg = _critical(config, q)
        else:
            q_c = config.band946.Q_C
            if not q < q_c:
                raise ValueError(f"Q_L={q:g} not reachable with coupling Q {q_c:g}")
            q_i = 1.0 / (1.0 / q - 1.0 / q_c)
            cfg = replace(config, band946=replace(config.band946, Q_i=q_i),
                          band1550=replace(config.band1550, Q_i=q_i))
        for i, P in enumerate(powers):
            det[i, j], eta[i, j] = optimize_signal_detuning(cfg, PumpConfig(P), mu, "i+")
    unity = np.full(powers.size, np.nan)
    for i in range(powers.size):
        above = np.nonzero(eta[i] >= level)[0]
        if above.size == 0:
            continue
        j = above[0]
        if j == 0:
            unity[i] = qs[0]
            continue
        lq0, lq1 = np.log(qs[j - 1]), np.log(qs[j])
        e0, e1 = eta[i, j - 1], eta[i, j]
        unity[i] = math.exp(lq0 + (level - e0) * (lq1 - lq0) / (e1 - e0))
    return QPowerMap(powers, qs, eta, det, unity)


def random_case(rng: np.random.Generator, base: ResonatorConfig, max_power: float = 0.1,
                q_range: Tuple[float, float] = (2e4, 1.2e5)):
    """Random stable (config, pumps, signal) triple for cross-checking solvers.

    Quality factors are drawn log-uniformly from ``q_range`` per band, pump
    power uniformly in [0, ``max_power``] W with a random split and pump
    detunings within one half-linewidth, and the signal within [-2, 3]
    linewidths of resonance ``mu`` in 1..5.  Draws above the parametric
    oscillation threshold have no steady state and are redrawn.
    """
    lo, hi = math.log(q_range[0]), math.log(q_range[1])
    while True:
        q = np.exp(rng.uniform(lo, hi, size=4))
        cfg = replace(base, band946=replace(base.band946, Q_i=q[0], Q_C1=q[1], Q_C2=math.inf),
                      band1550=replace(base.band1550, Q_i=q[2], Q_C1=q[3], Q_C2=math.inf))
        t_r = cfg.round_trip_time
        d1 = rng.uniform(-1, 1) * cfg.alpha(BAND_946) / t_r
        d2 = rng.uniform(-1, 1) * cfg.alpha(BAND_1550) / t_r
        pumps = PumpConfig(rng.uniform(0, max_power), rng.uniform(0, 1), d1, d2)
        mu = int(rng.integers(1, 6))
        x = rng.uniform(-2, 3)
        sig = Signal(10 ** rng.uniform(-9, -3), float(signal_frequency(cfg, mu, x)), mu)
        if is_stable(cfg, pumps, sig):
            return cfg, pumps, sig
