"""
Semi-vectorial finite-difference modes of a rectangular waveguide on a
substrate.

The cross-section lies in the (y, z) plane with the core resting on the
substrate at z = 0; light propagates along x.  Quasi-TE modes are solved for
E_y, quasi-TM modes for E_z.  For the dominant component F the operator is

    d/dp [ (1/eps) d/dp (eps F) ] + d^2F/dq^2 + k0^2 eps F = beta^2 F

where p is the polarization axis (y for TE, z for TM) and q the other one.
Differences are taken on a cell-centred grid.  Permittivity is averaged over
4 x 4 sub-samples per cell.  Window edges are perfect electric walls that lie
exactly on the window boundary.

The longitudinal component is reconstructed from the divergence condition,
E_x = (1 / (i beta eps)) d(eps F)/dp, on the staggered half-grid.  It enters
the mode-area integral and the polarization fraction.

n_g and D come from central differences of n_eff(lambda) at 1 nm with one
Richardson step (stencils at +/-1 nm and +/-2 nm).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.constants import c

from .materials import Material, get_material

__all__ = [
    "CrossSection",
    "ModeSolution",
    "DispersionScan",
    "MatchingScan",
    "ModeSolverError",
    "StencilError",
    "solve_mode",
    "group_index",
    "gvd_parameter",
    "mode_dispersion",
    "effective_area",
    "dispersion_scan",
    "group_index_matching_scan",
    "zero_crossings",
    "write_dispersion_csv",
    "write_matching_csv",
    "DISPERSION_HEADER",
    "MATCHING_HEADER",
]

DISPERSION_HEADER = ["lambda_nm", "n_eff", "n_g", "D_ps_nm_km", "A_eff_um2"]
MATCHING_HEADER = ["w_y_nm", "w_z_nm", "n_eff_946", "n_eff_1550", "n_g_946", "n_g_1550",
                   "delta_n_g", "cutoff_flag"]

MIN_MARGIN = 1500.0
GUIDED_MARGIN = 1e-4
STENCIL_STEP = 1.0
_SUBSAMPLE = 4
# 1 s/m^2 expressed in ps/(nm km)
_D_UNIT = 1e6


class ModeSolverError(RuntimeError):
    """Eigen-solver failure; ``residual`` holds the best residual seen."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class StencilError(ValueError):
    """A finite-difference stencil point is not guided."""


@dataclass(frozen=True)
class CrossSection:
    """Rectangular core of width ``w_y`` and thickness ``w_z`` (nm).

    The window is ``w_y + 2 margin`` wide and reaches ``margin`` above the
    core and ``substrate_depth`` into the substrate, each rounded up to a whole
    number of cells; the default depth ``w_z + margin`` puts the substrate in
    the lower half of the window.  ``w_y`` may equal the window width (core
    touching both side walls), which turns the guide into a slab.
    """

    w_y: float
    w_z: float
    core: Union[Material, str] = "GaP"
    substrate: Union[Material, str] = "Diamond"
    cladding: Union[Material, str] = "Air"
    grid_spacing: float = 20.0
    margin: float = MIN_MARGIN
    substrate_depth: Optional[float] = None
    window_y: Optional[float] = None

    def __post_init__(self):
        if not (self.w_y > 0 and self.w_z > 0):
            raise ValueError(f"core dimensions must be positive, got {self.w_y} x {self.w_z}")
        if not self.grid_spacing > 0:
            raise ValueError("grid_spacing must be positive")
        for name in ("core", "substrate", "cladding"):
            object.__setattr__(self, name, get_material(getattr(self, name)))
        h = self.grid_spacing
        if self.margin < MIN_MARGIN:
            raise ValueError(f"margin must be at least {MIN_MARGIN:g} nm, got {self.margin:g}")
        depth = self.w_z + self.margin if self.substrate_depth is None else self.substrate_depth
        if depth < MIN_MARGIN:
            raise ValueError(f"substrate_depth must be at least {MIN_MARGIN:g} nm")
        object.__setattr__(self, "substrate_depth", float(depth))
        total = math.ceil((depth + self.w_z + self.margin) / h - 1e-9) * h
        object.__setattr__(self, "_top", float(total - depth - self.w_z))
        if self.window_y is None:
            wy = math.ceil((self.w_y + 2 * self.margin) / h - 1e-9) * h
            object.__setattr__(self, "window_y", float(wy))
        else:
            if self.window_y < self.w_y - 1e-9:
                raise ValueError("core is wider than the window")
            side = (self.window_y - self.w_y) / 2
            if side > 1e-9 and side < MIN_MARGIN:
                raise ValueError(f"side margins must be 0 (slab) or at least {MIN_MARGIN:g} nm")
        for name, length in (("window_y", self.window_y), ("window_z", self.window_z)):
            cells = length / h
            if abs(cells - round(cells)) > 1e-6:
                raise ValueError(f"grid_spacing {h:g} nm does not divide {name} = {length:g} nm")
        if min(self.shape) < 3:
            raise ValueError("window must contain at least 3 cells per axis")

    @property
    def window_z(self) -> float:
        return self.substrate_depth + self.w_z + self._top

    @property
    def window(self) -> Tuple[float, float]:
        return self.window_y, self.window_z

    @property
    def shape(self) -> Tuple[int, int]:
        h = self.grid_spacing
        return int(round(self.window_y / h)), int(round(self.window_z / h))

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates (nm); y centred on the core, z = 0 at the substrate top."""
        ny, nz = self.shape
        h = self.grid_spacing
        y = (np.arange(ny) + 0.5) * h - self.window_y / 2
        z = (np.arange(nz) + 0.5) * h - self.substrate_depth
        return y, z

    def fill_fractions(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-cell area fractions of (core, substrate)."""
        ny, nz = self.shape
        h, s = self.grid_spacing, _SUBSAMPLE
        ys = (np.arange(ny * s) + 0.5) * h / s - self.window_y / 2
        zs = (np.arange(nz * s) + 0.5) * h / s - self.substrate_depth
        Y, Z = np.meshgrid(ys, zs, indexing="ij")
        core = (np.abs(Y) < self.w_y / 2) & (Z > 0) & (Z < self.w_z)
        sub = Z < 0
        f_core = core.reshape(ny, s, nz, s).mean(axis=(1, 3))
        f_sub = sub.reshape(ny, s, nz, s).mean(axis=(1, 3))
        return f_core, f_sub

    def permittivity(self, wavelength: float) -> np.ndarray:
        f_core, f_sub = self.fill_fractions()
        e_core = self.core.epsilon(wavelength)
        e_sub = self.substrate.epsilon(wavelength)
        e_clad = self.cladding.epsilon(wavelength)
        return f_core * e_core + f_sub * e_sub + (1.0 - f_core - f_sub) * e_clad

    def resolution_ok(self) -> bool:
        return min(self.w_y, self.w_z) / self.grid_spacing >= 20 - 1e-9

    def refined(self, factor: float) -> "CrossSection":
        """Same geometry on a grid ``factor`` times finer (window held fixed)."""
        return CrossSection(self.w_y, self.w_z, self.core, self.substrate, self.cladding,
                            self.grid_spacing / factor, self.margin, self.substrate_depth,
                            self.window_y)


@dataclass(frozen=True)
class ModeSolution:
    wavelength: float
    n_eff: float
    field: np.ndarray
    eps: np.ndarray
    polarization: str
    is_guided: bool
    grid_spacing: float
    y: np.ndarray
    z: np.ndarray
    n_core: float
    n_substrate: float
    longitudinal: Optional[np.ndarray] = None
    ring_region: Optional[np.ndarray] = None
    residual: float = 0.0

    @property
    def beta(self) -> float:
        """Propagation constant in 1/nm."""
        return 2 * math.pi * self.n_eff / self.wavelength

    def intensity(self) -> np.ndarray:
        """|E|^2 on cell centres: dominant component plus longitudinal part."""
        I = np.abs(self.field) ** 2
        if self.longitudinal is not None:
            I = I + np.abs(self.longitudinal) ** 2
        return I

    @property
    def dominant_fraction(self) -> float:
        """Share of eps-weighted electric energy in the dominant transverse component."""
        dom = float(np.sum(self.eps * np.abs(self.field) ** 2))
        return dom / float(np.sum(self.eps * self.intensity()))

    def boundary_ratio(self) -> float:
        a = np.abs(self.field)
        edge = max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max())
        return float(edge / a.max())


def _operator(eps: np.ndarray, h: float, k0: float, polarization: str) -> sp.csr_matrix:
    ny, nz = eps.shape
    N = ny * nz
    idx = np.arange(N).reshape(ny, nz)
    diag = (k0 * k0) * eps.ravel().astype(float)
    rows, cols, vals = [], [], []
    inv_h2 = 1.0 / (h * h)
    for axis in (0, 1):
        if axis == 0:
            a, b = eps[:-1, :].ravel(), eps[1:, :].ravel()
            I, J = idx[:-1, :].ravel(), idx[1:, :].ravel()
        else:
            a, b = eps[:, :-1].ravel(), eps[:, 1:].ravel()
            I, J = idx[:, :-1].ravel(), idx[:, 1:].ravel()
        polar_axis = (axis == 0) == (polarization == "TE")
        if polar_axis:
            mid = 0.5 * (a + b)
            rows += [I, J]
            cols += [J, I]
            vals += [b / mid * inv_h2, a / mid * inv_h2]
            np.add.at(diag, I, -a / mid * inv_h2)
            np.add.at(diag, J, -b / mid * inv_h2)
        else:
            one = np.full(a.shape, inv_h2)
            rows += [I, J]
            cols += [J, I]
            vals += [one, one]
            np.add.at(diag, I, -one)
            np.add.at(diag, J, -one)
    # wall on the window edge: the mirror cell carries -F, i.e. -2/h^2 extra
    for sl in (0, -1):
        np.add.at(diag, idx[sl, :].ravel(), -2.0 * inv_h2)
        np.add.at(diag, idx[:, sl].ravel(), -2.0 * inv_h2)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    return (A + sp.diags(diag)).tocsc()


def _longitudinal(F: np.ndarray, eps: np.ndarray, h: float, beta: float, polarization: str) -> np.ndarray:
    """|E_x| from the divergence condition, averaged from half-cells to centres.

    Returned as sqrt of the node-averaged |E_x|^2 (phase dropped).
    """
    axis = 0 if polarization == "TE" else 1
    D = eps * F
    dD = np.diff(D, axis=axis) / h
    e_half = 0.5 * (np.take(eps, range(eps.shape[axis] - 1), axis=axis)
                    + np.take(eps, range(1, eps.shape[axis]), axis=axis))
    ex2_half = np.abs(dD / (beta * e_half)) ** 2
    ex2 = np.zeros_like(np.abs(F))
    if axis == 0:
        ex2[1:, :] += 0.5 * ex2_half
        ex2[:-1, :] += 0.5 * ex2_half
    else:
        ex2[:, 1:] += 0.5 * ex2_half
        ex2[:, :-1] += 0.5 * ex2_half
    return np.sqrt(ex2)


def solve_mode(
    xs: CrossSection,
    wavelength: float,
    polarization: str = "TE",
    n_modes: int = 3,
    tol: float = 0.0,
    maxiter: Optional[int] = None,
) -> ModeSolution:
    """Fundamental mode of ``polarization`` ("TE" or "TM") at ``wavelength`` (nm).

    Shift-invert Arnoldi around (k0 n_core)^2 with an all-ones start vector;
    the largest eigenvalue found is the fundamental mode.  The field is
    normalised to unit peak with a positive maximum.
    """
    if polarization not in ("TE", "TM"):
        raise ValueError(f"polarization must be 'TE' or 'TM', got {polarization!r}")
    if not xs.resolution_ok():
        raise ValueError(
            f"grid spacing {xs.grid_spacing:g} nm gives fewer than 20 points across the core"
        )
    eps = xs.permittivity(wavelength)
    n_core = float(xs.core.index(wavelength))
    n_sub = float(xs.substrate.index(wavelength))
    h = xs.grid_spacing
    k0 = 2 * math.pi / wavelength
    A = _operator(eps, h, k0, polarization)
    N = A.shape[0]
    sigma = (k0 * max(n_core, float(np.sqrt(eps.max())))) ** 2
    try:
        w, v = sla.eigs(A, k=min(n_modes, N - 2), sigma=sigma, v0=np.ones(N),
                        tol=tol, maxiter=maxiter)
    except sla.ArpackNoConvergence as exc:
        res = float("nan")
        if len(exc.eigenvalues):
            i = int(np.argmax(exc.eigenvalues.real))
            x = exc.eigenvectors[:, i]
            res = float(np.linalg.norm(A @ x - exc.eigenvalues[i] * x) / abs(exc.eigenvalues[i]))
        raise ModeSolverError(f"eigen-solver did not converge at {wavelength:g} nm", res) from None
    i = int(np.argmax(w.real))
    lam = w[i].real
    x = v[:, i]
    residual = float(np.linalg.norm(A @ x - w[i] * x) / (abs(w[i]) * np.linalg.norm(x)))
    if residual > 1e-6:
        raise ModeSolverError(f"eigenpair at {wavelength:g} nm is inaccurate", residual)
    if lam <= 0:
        raise ModeSolverError(f"no propagating mode found at {wavelength:g} nm", residual)
    F = x.reshape(eps.shape)
    phase = F.ravel()[np.argmax(np.abs(F))]
    F = (F / phase).real
    n_eff = math.sqrt(lam) / k0
    beta = n_eff * k0
    y, z = xs.coordinates()
    f_core, _ = xs.fill_fractions()
    return ModeSolution(
        wavelength=float(wavelength),
        n_eff=n_eff,
        field=F,
        eps=eps,
        polarization=polarization,
        is_guided=bool(n_eff > n_sub + GUIDED_MARGIN),
        grid_spacing=h,
        y=y,
        z=z,
        n_core=n_core,
        n_substrate=n_sub,
        longitudinal=_longitudinal(F, eps, h, beta, polarization),
        ring_region=f_core,
        residual=residual,
    )


def _stencil(xs, wavelength, polarization, step):
    pts = {}
    for k in (-2, -1, 0, 1, 2):
        lam = wavelength + k * step
        m = solve_mode(xs, lam, polarization)
        if not m.is_guided:
            raise StencilError(f"mode is cut off at {lam:g} nm inside the derivative stencil")
        pts[k] = m
    return pts


def _derivatives(n, step):
    d1a = (n[1] - n[-1]) / (2 * step)
    d1b = (n[2] - n[-2]) / (4 * step)
    d2a = (n[1] - 2 * n[0] + n[-1]) / step**2
    d2b = (n[2] - 2 * n[0] + n[-2]) / (4 * step**2)
    return (4 * d1a - d1b) / 3, (4 * d2a - d2b) / 3


@dataclass(frozen=True)
class ModeDispersion:
    mode: ModeSolution
    n_g: float
    D: float


def mode_dispersion(xs: CrossSection, wavelength: float, polarization: str = "TE",
                    step: float = STENCIL_STEP) -> ModeDispersion:
    """Centre mode plus n_g and D from a single five-point stencil."""
    pts = _stencil(xs, wavelength, polarization, step)
    n = {k: m.n_eff for k, m in pts.items()}
    dn, d2n = _derivatives(n, step)
    n_g = n[0] - wavelength * dn
    # d2n is per nm^2; D = -(lambda / c) d2n/dlambda^2 in s/m^2
    D = -(wavelength * 1e-9) / c * d2n * 1e18 * _D_UNIT
    return ModeDispersion(pts[0], float(n_g), float(D))


def group_index(xs: CrossSection, wavelength: float, polarization: str = "TE",
                step: float = STENCIL_STEP) -> float:
    """n_g = n_eff - lambda dn_eff/dlambda."""
    return mode_dispersion(xs, wavelength, polarization, step).n_g


def gvd_parameter(xs: CrossSection, wavelength: float, polarization: str = "TE",
                  step: float = STENCIL_STEP) -> float:
    """D = -(lambda/c) d^2 n_eff / dlambda^2 in ps/(nm km); normal dispersion is negative."""
    return mode_dispersion(xs, wavelength, polarization, step).D


def effective_area(mode: ModeSolution, ring_region=None, field_scale: complex = 1.0) -> float:
    """Nonlinear effective area in um^2.

    The numerator integrates eps |E|^2 over the full window.  The denominator
    integrates eps^2 |E|^4 over ``ring_region`` only.  That region is a boolean
    or fractional mask on the solution grid and defaults to the core fill
    fractions.  ``field_scale`` multiplies the field (a homogeneity check).
    """
    if not mode.is_guided:
        raise ValueError("effective area is only defined for guided modes")
    mask = mode.ring_region if ring_region is None else np.asarray(ring_region, dtype=float)
    if mask is None or mask.shape != mode.eps.shape:
        raise ValueError("ring_region must match the solution grid")
    if not np.any(mask > 0):
        raise ValueError("ring_region mask is empty")
    I = mode.intensity() * abs(field_scale) ** 2
    dA = (mode.grid_spacing * 1e-3) ** 2
    num = (np.sum(mode.eps * I) * dA) ** 2
    den = np.sum(mask * mode.eps**2 * I**2) * dA
    return float(num / den)


@dataclass
class DispersionScan:
    wavelengths: np.ndarray
    n_eff: np.ndarray
    n_g: np.ndarray
    D: np.ndarray
    A_eff: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=float) for a in (self.wavelengths, self.n_eff, self.n_g, self.D, self.A_eff)]
        if len({a.size for a in arrs}) != 1:
            raise ValueError("dispersion scan columns have unequal length")
        if np.any(np.diff(arrs[0]) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        self.wavelengths, self.n_eff, self.n_g, self.D, self.A_eff = arrs

    def rows(self):
        return zip(self.wavelengths, self.n_eff, self.n_g, self.D, self.A_eff)

    def zero_crossings(self) -> List[float]:
        return zero_crossings(self.wavelengths, self.D)


def dispersion_scan(xs: CrossSection, wavelengths: Iterable[float], polarization: str = "TE") -> DispersionScan:
    lam = np.asarray(list(wavelengths), dtype=float)
    out = {k: [] for k in ("n", "ng", "D", "A")}
    for wl in lam:
        md = mode_dispersion(xs, float(wl), polarization)
        out["n"].append(md.mode.n_eff)
        out["ng"].append(md.n_g)
        out["D"].append(md.D)
        out["A"].append(effective_area(md.mode))
    return DispersionScan(lam, out["n"], out["ng"], out["D"], out["A"])


def zero_crossings(x: Sequence[float], y: Sequence[float]) -> List[float]:
    """Sign changes of y(x) located by linear interpolation; NaN entries break segments."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = []
    for i in range(len(x) - 1):
        y0, y1 = y[i], y[i + 1]
        if not (np.isfinite(y0) and np.isfinite(y1)):
            continue
        if y0 == 0.0:
            out.append(float(x[i]))
        elif y0 * y1 < 0:
            out.append(float(x[i] - y0 * (x[i + 1] - x[i]) / (y1 - y0)))
    if len(y) and y[-1] == 0.0 and np.isfinite(y[-1]):
        out.append(float(x[-1]))
    return out


@dataclass
class MatchingScan:
    rows: List[Tuple[float, float, float, float, float, float, float, int]]
    crossings: Dict[float, List[float]] = field(default_factory=dict)

    def row_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)


def group_index_matching_scan(
    thickness_list: Iterable[float],
    width_range: Iterable[float],
    lambda1: float = 946.0,
    lambda2: float = 1550.0,
    core="GaP",
    substrate="Diamond",
    grid_spacing: float = 20.0,
    polarization: str = "TE",
) -> MatchingScan:
    """Group-index mismatch n_g(lambda1) - n_g(lambda2) over (w_y, w_z).

    Geometries whose mode is cut off anywhere in either stencil are flagged
    (``cutoff_flag = 1``) with NaN for the quantities that could not be
    formed.  Zero crossings are found along w_y for each thickness.
    """
    rows = []
    crossings: Dict[float, List[float]] = {}
    widths = sorted(float(w) for w in width_range)
    for wz in thickness_list:
        wz = float(wz)
        dng = []
        for wy in widths:
            xs = CrossSection(wy, wz, core, substrate, grid_spacing=grid_spacing)
            vals = []
            flag = 0
            for lam in (lambda1, lambda2):
                try:
                    md = mode_dispersion(xs, lam, polarization)
                    vals.append((md.mode.n_eff, md.n_g))
                except StencilError:
                    m = solve_mode(xs, lam, polarization)
                    vals.append((m.n_eff, float("nan")))
                    flag = 1
            d = vals[0][1] - vals[1][1] if not flag else float("nan")
            rows.append((wy, wz, vals[0][0], vals[1][0], vals[0][1], vals[1][1], d, flag))
            dng.append(d)
        crossings[wz] = zero_crossings(widths, dng)
    return MatchingScan(rows, crossings)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.10g}"


def write_dispersion_csv(scan: DispersionScan, path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DISPERSION_HEADER)
        for row in scan.rows():
            w.writerow([_fmt(v) for v in row])
    return path


def write_matching_csv(scan: MatchingScan, path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MATCHING_HEADER)
        for row in scan.rows:
            w.writerow([_fmt(v) for v in row[:-1]] + [str(int(row[-1]))])
    return path
