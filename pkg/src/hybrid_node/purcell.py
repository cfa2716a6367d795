"""
Emitter-cavity coupling figures of merit.

The emitter's dipole moment follows from its radiative rate inside a host of
index n, including the empty-cavity local-field factor L = 3n^2/(2n^2+1):

    beta Gamma0 = w^3 n L^2 |mu|^2 / (3 pi eps0 hbar c^3)

Cavity fields come as :class:`FieldMap` objects (3D complex E on a regular
node grid plus the permittivity).  They are scaled so that the electric
energy equals half a photon, int eps0 eps_r |E|^2 dV = hbar w / 2.  Then
g = |mu . E| / hbar, kappa = w / Q, and the Purcell factor is
P = 4 g^2 / (kappa Gamma0).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.constants import c, epsilon_0, hbar, pi

__all__ = [
    "EmitterModel",
    "FieldMap",
    "OutOfGridError",
    "SIV0",
    "local_field_factor",
    "extract_dipole",
    "decay_rate",
    "normalize_single_photon",
    "field_at",
    "purcell_factor",
    "box_mode",
    "gaussian_mode",
    "evanescent_mode",
    "textbook_purcell",
    "collection_bandwidth_tradeoff",
    "TradeoffTable",
    "ring_linewidth",
    "read_field_map",
    "write_field_map",
]


class OutOfGridError(ValueError):
    """Evaluation point lies outside the sampled field."""


def local_field_factor(n: float) -> float:
    return 3.0 * n * n / (2.0 * n * n + 1.0)


@dataclass(frozen=True)
class EmitterModel:
    """Two-level emitter in a dielectric host.

    ``gamma0`` is the angular spontaneous-emission rate (rad/s), ``beta`` the
    fraction of it on the cavity-coupled transition.  Setting
    ``local_field_correction=False`` drops the factor L^2 from the rate
    relation (a point dipole that sees the macroscopic field).
    """

    gamma0: float
    wavelength: float
    host_index: float = 2.4
    beta: float = 1.0
    orientation: Tuple[float, float, float] = (0.0, 1.0, 0.0)
    local_field_correction: bool = True

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if not self.host_index >= 1:
            raise ValueError("host_index must be >= 1")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        o = np.asarray(self.orientation, dtype=float)
        norm = float(np.linalg.norm(o))
        if o.shape != (3,) or norm == 0:
            raise ValueError("orientation must be a non-zero 3-vector")
        object.__setattr__(self, "orientation", tuple(float(v) for v in o / norm))

    @property
    def omega(self) -> float:
        return 2 * pi * c / (self.wavelength * 1e-9)

    @property
    def linewidth(self) -> float:
        """Natural linewidth Gamma0 / 2pi in Hz."""
        return self.gamma0 / (2 * pi)

    def _rate_prefactor(self) -> float:
        L = local_field_factor(self.host_index) if self.local_field_correction else 1.0
        return self.omega**3 * self.host_index * L * L / (3 * pi * epsilon_0 * hbar * c**3)


# neutral silicon-vacancy centre: 88 MHz natural linewidth at 946 nm in diamond
SIV0 = EmitterModel(gamma0=2 * pi * 88e6, wavelength=946.0, host_index=2.4)


def extract_dipole(emitter: EmitterModel) -> float:
    """|mu| in C m from the emitter's decay rate."""
    return math.sqrt(emitter.beta * emitter.gamma0 / emitter._rate_prefactor())


def decay_rate(emitter: EmitterModel, dipole: float) -> float:
    """Total decay rate Gamma0 implied by dipole moment ``dipole`` (the forward relation)."""
    return emitter._rate_prefactor() * dipole * dipole / emitter.beta


@dataclass(frozen=True)
class FieldMap:
    """Complex E field on an (nx, ny, nz) node grid.

    ``E`` has shape (3, nx, ny, nz); ``spacing`` and ``origin`` are in nm,
    with ``origin`` the coordinate of node (0, 0, 0).
    """

    E: np.ndarray
    eps: np.ndarray
    spacing: Tuple[float, float, float]
    Q: float
    wavelength: float
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        E = np.asarray(self.E, dtype=complex)
        eps = np.asarray(self.eps, dtype=float)
        if E.ndim != 4 or E.shape[0] != 3:
            raise ValueError("E must have shape (3, nx, ny, nz)")
        if eps.shape != E.shape[1:]:
            raise ValueError("eps must have shape (nx, ny, nz) matching E")
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise ValueError("grid spacings must be positive")
        if np.any(eps < 1):
            raise ValueError("relative permittivity must be >= 1 everywhere")
        if not self.Q > 0 or not self.wavelength > 0:
            raise ValueError("Q and wavelength must be positive")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "origin", tuple(float(s) for s in self.origin))

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.eps.shape

    @property
    def omega(self) -> float:
        return 2 * pi * c / (self.wavelength * 1e-9)

    @property
    def cell_volume(self) -> float:
        dx, dy, dz = self.spacing
        return dx * dy * dz * 1e-27

    def electric_energy(self) -> float:
        """int eps0 eps_r |E|^2 dV in J (node sum times cell volume)."""
        return float(epsilon_0 * np.sum(self.eps * np.sum(np.abs(self.E) ** 2, axis=0)) * self.cell_volume)

    def mode_volume(self) -> float:
        """int eps |E|^2 dV / max(eps |E|^2), m^3."""
        w = self.eps * np.sum(np.abs(self.E) ** 2, axis=0)
        return float(np.sum(w) * self.cell_volume / w.max())

    def coarsest_allowed_spacing(self) -> float:
        return self.wavelength / (20.0 * math.sqrt(self.eps.max()))

    def scaled(self, factor: complex) -> "FieldMap":
        return replace(self, E=self.E * factor)


def normalize_single_photon(fmap: FieldMap) -> FieldMap:
    """Rescale so that the electric energy equals hbar w / 2."""
    U = fmap.electric_energy()
    if not U > 0:
        raise ValueError("field map carries no energy")
    return fmap.scaled(math.sqrt(hbar * fmap.omega / 2.0 / U))


def field_at(fmap: FieldMap, position: Sequence[float]) -> np.ndarray:
    """Trilinear interpolation of the complex field vector at ``position`` (nm)."""
    p = np.asarray(position, dtype=float)
    if p.shape != (3,):
        raise ValueError("position must be a 3-vector in nm")
    idx = []
    for k in range(3):
        n = fmap.shape[k]
        u = (p[k] - fmap.origin[k]) / fmap.spacing[k]
        if u < -1e-9 or u > n - 1 + 1e-9:
            lo = fmap.origin[k]
            hi = lo + (n - 1) * fmap.spacing[k]
            raise OutOfGridError(f"coordinate {'xyz'[k]} = {p[k]:g} nm outside [{lo:g}, {hi:g}] nm")
        u = min(max(u, 0.0), n - 1.0)
        i0 = min(int(math.floor(u)), max(n - 2, 0))
        idx.append((i0, u - i0, n))
    out = np.zeros(3, dtype=complex)
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                w = 1.0
                ii = []
                for (i0, t, n), d in zip(idx, (dx, dy, dz)):
                    w *= t if d else (1.0 - t)
                    ii.append(min(i0 + d, n - 1))
                if w:
                    out += w * fmap.E[:, ii[0], ii[1], ii[2]]
    return out


def purcell_factor(fmap: FieldMap, emitter: EmitterModel, position: Sequence[float]) -> float:
    """P = 4 g^2 / (kappa Gamma0) for the emitter at ``position`` (nm).

    The map is normalised to a single photon first, so any global amplitude
    or phase of the input field is irrelevant.
    """
    if max(fmap.spacing) > fmap.coarsest_allowed_spacing() * (1 + 1e-9):
        warnings.warn(
            f"field grid coarser than lambda/(20 n) = {fmap.coarsest_allowed_spacing():.3g} nm; "
            "interpolated fields may be inaccurate",
            stacklevel=2,
        )
    norm = normalize_single_photon(fmap)
    E = field_at(norm, position)
    mu = extract_dipole(emitter)
    g = mu * abs(np.dot(np.asarray(emitter.orientation), E)) / hbar
    kappa = fmap.omega / fmap.Q
    return float(4.0 * g * g / (kappa * emitter.gamma0))


def textbook_purcell(wavelength: float, n: float, Q: float, V: float) -> float:
    """(3 / 4 pi^2) (lambda/n)^3 Q / V with wavelength in nm and V in m^3."""
    lam = wavelength * 1e-9 / n
    return 3.0 / (4.0 * pi * pi) * lam**3 * Q / V


def _grid(shape, spacing, origin=None):
    if origin is None:
        origin = tuple(-0.5 * (n - 1) * d for n, d in zip(shape, spacing))
    axes = [o + d * np.arange(n) for n, d, o in zip(shape, spacing, origin)]
    return origin, np.meshgrid(*axes, indexing="ij")


def _polarized(amp, polarization):
    E = np.zeros((3,) + amp.shape, dtype=complex)
    E["xyz".index(polarization)] = amp
    return E


def box_mode(size: Sequence[float], shape: Sequence[int], eps_r: float, Q: float,
             wavelength: float, polarization: str = "y") -> FieldMap:
    """Uniform field filling a box of ``size`` (nm); volume is nx ny nz cell volumes."""
    shape = tuple(int(n) for n in shape)
    spacing = tuple(L / n for L, n in zip(size, shape))
    origin, _ = _grid(shape, spacing)
    E = _polarized(np.ones(shape), polarization)
    return FieldMap(E, np.full(shape, float(eps_r)), spacing, Q, wavelength, origin)


def gaussian_mode(sigma: Sequence[float], shape: Sequence[int], spacing: Sequence[float],
                  eps_r: float, Q: float, wavelength: float, polarization: str = "y") -> FieldMap:
    """Gaussian envelope exp(-sum x_k^2 / 2 sigma_k^2), centred in the grid."""
    origin, X = _grid(tuple(shape), tuple(spacing))
    amp = np.exp(-sum(x * x / (2.0 * s * s) for x, s in zip(X, sigma)))
    return FieldMap(_polarized(amp, polarization), np.full(amp.shape, float(eps_r)),
                    tuple(spacing), Q, wavelength, origin)


def evanescent_mode(sigma_xy: Tuple[float, float], decay_length: float, shape: Sequence[int],
                    spacing: Sequence[float], Q: float, wavelength: float,
                    eps_top: float, eps_bottom: float, polarization: str = "y") -> FieldMap:
    """Cavity field above z = 0 leaking into a substrate below it.

    The field is Gaussian in x and y, uniform for z >= 0 (the cavity layer), and
    decays as exp(z / ``decay_length``) for z < 0, so the power falls as
    exp(-2 d / decay_length) with depth d.  The grid is centred on the origin.
    """
    shape = tuple(int(n) for n in shape)
    spacing = tuple(float(s) for s in spacing)
    origin = (-0.5 * (shape[0] - 1) * spacing[0], -0.5 * (shape[1] - 1) * spacing[1],
              -0.5 * (shape[2] - 1) * spacing[2])
    _, (X, Y, Z) = _grid(shape, spacing, origin)
    amp = np.exp(-X**2 / (2 * sigma_xy[0] ** 2) - Y**2 / (2 * sigma_xy[1] ** 2))
    amp = amp * np.where(Z >= 0, 1.0, np.exp(np.minimum(Z, 0.0) / decay_length))
    eps = np.where(Z >= 0, float(eps_top), float(eps_bottom))
    return FieldMap(_polarized(amp, polarization), eps, spacing, Q, wavelength, origin)


def ring_linewidth(wavelength: float, Q_L: float) -> float:
    """Loaded linewidth c / (lambda Q_L) in Hz (wavelength in nm)."""
    return c / (wavelength * 1e-9) / Q_L


@dataclass
class TradeoffTable:
    purcell: np.ndarray
    collection: np.ndarray
    linewidth: np.ndarray  # Hz
    within_bandwidth: np.ndarray
    threshold: float
    converter_linewidth: float

    def rows(self):
        return zip(self.purcell, self.collection, self.linewidth, self.within_bandwidth)


def collection_bandwidth_tradeoff(emitter: EmitterModel, purcell_range: Iterable[float],
                                  converter_linewidth: float) -> TradeoffTable:
    """Collection efficiency P/(P+1) against Purcell-broadened linewidth.

    ``threshold`` is the Purcell factor where Gamma0 (1 + P) / 2pi reaches
    ``converter_linewidth`` (Hz).
    """
    P = np.asarray(list(purcell_range), dtype=float)
    if np.any(P < 0):
        raise ValueError("Purcell factors must be non-negative")
    lw = emitter.linewidth * (1.0 + P)
    return TradeoffTable(
        purcell=P,
        collection=P / (P + 1.0),
        linewidth=lw,
        within_bandwidth=lw <= converter_linewidth,
        threshold=converter_linewidth / emitter.linewidth - 1.0,
        converter_linewidth=float(converter_linewidth),
    )


# -- file formats ------------------------------------------------------------

_CSV_COLUMNS = ["ix", "iy", "iz", "eps_r", "Re(Ex)", "Im(Ex)", "Re(Ey)", "Im(Ey)", "Re(Ez)", "Im(Ez)"]


def write_field_map(fmap: FieldMap, path: Union[str, Path]) -> Path:
    """Write ``.npz`` (binary) or CSV, chosen by extension.

    The CSV starts with ``# key=value`` metadata lines (Q, wavelength_nm,
    origin_nm), then the grid header ``nx,ny,nz,dx_nm,dy_nm,dz_nm`` and its
    values, then one row per node.
    """
    path = Path(path)
    if path.suffix == ".npz":
        np.savez(path, E=fmap.E, eps=fmap.eps, spacing=np.array(fmap.spacing),
                 origin=np.array(fmap.origin), Q=fmap.Q, wavelength=fmap.wavelength)
        return path
    nx, ny, nz = fmap.shape
    with path.open("w", newline="") as fh:
        fh.write(f"# Q={fmap.Q!r}\n")
        fh.write(f"# wavelength_nm={fmap.wavelength!r}\n")
        fh.write("# origin_nm=" + ",".join(repr(v) for v in fmap.origin) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["nx", "ny", "nz", "dx_nm", "dy_nm", "dz_nm"])
        w.writerow([nx, ny, nz] + [repr(s) for s in fmap.spacing])
        w.writerow(_CSV_COLUMNS)
        for ix in range(nx):
            for iy in range(ny):
                for iz in range(nz):
                    e = fmap.E[:, ix, iy, iz]
                    w.writerow([ix, iy, iz, repr(float(fmap.eps[ix, iy, iz]))]
                               + [repr(float(v)) for comp in e for v in (comp.real, comp.imag)])
    return path


def read_field_map(path: Union[str, Path]) -> FieldMap:
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as d:
            return FieldMap(d["E"], d["eps"], tuple(d["spacing"]), float(d["Q"]),
                            float(d["wavelength"]), tuple(d["origin"]))
    meta = {}
    with path.open() as fh:
        lines = fh.read().splitlines()
    body = []
    for i, line in enumerate(lines):
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
        elif line.strip():
            body.append((i + 1, line))
    try:
        Q = float(meta["Q"])
        lam = float(meta["wavelength_nm"])
    except (KeyError, ValueError):
        raise ValueError(f"{path}: metadata must define Q and wavelength_nm") from None
    origin = tuple(float(v) for v in meta.get("origin_nm", "0,0,0").split(","))
    if len(body) < 3 or body[0][1].replace(" ", "") != "nx,ny,nz,dx_nm,dy_nm,dz_nm":
        raise ValueError(f"{path}: missing grid header nx,ny,nz,dx_nm,dy_nm,dz_nm")
    g = body[1][1].split(",")
    nx, ny, nz = (int(v) for v in g[:3])
    spacing = tuple(float(v) for v in g[3:6])
    E = np.zeros((3, nx, ny, nz), dtype=complex)
    eps = np.full((nx, ny, nz), np.nan)
    for lineno, line in body[3:]:
        f = line.split(",")
        if len(f) != 10:
            raise ValueError(f"{path}:{lineno}: expected 10 columns, got {len(f)}")
        ix, iy, iz = (int(v) for v in f[:3])
        vals = [float(v) for v in f[3:]]
        eps[ix, iy, iz] = vals[0]
        E[:, ix, iy, iz] = [vals[1] + 1j * vals[2], vals[3] + 1j * vals[4], vals[5] + 1j * vals[6]]
    if np.isnan(eps).any():
        raise ValueError(f"{path}: grid has missing nodes")
    return FieldMap(E, eps, spacing, Q, lam, origin)
