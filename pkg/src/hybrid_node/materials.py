"""
Wavelength-dependent refractive index of the device materials.

Each solid is described by a Sellmeier expansion

    n^2(L) = a + sum_i B_i L^2 / (L^2 - C_i)

with L in micrometres and C_i in um^2.  The coefficient tables live in a
plain key-value file (``data/materials.ini``) so that a run can be repeated
exactly from the repository alone; :func:`load_materials` reads an alternate
file with the same layout.

Wavelengths passed to the public functions are in nanometres.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

__all__ = [
    "Material",
    "WavelengthRangeError",
    "load_materials",
    "set_material_table",
    "get_material",
    "refractive_index",
    "index_derivative",
    "GaP",
    "GaAs",
    "Diamond",
    "Air",
]


class WavelengthRangeError(ValueError):
    """Raised when a wavelength falls outside a material's valid interval."""


@dataclass(frozen=True)
class Material:
    """Sellmeier material.

    Parameters
    ----------
    name : str
        Material label (``"GaP"``, ``"GaAs"``, ``"Diamond"``, ``"Air"`` for the
        bundled table).
    sellmeier_coefficients : tuple of (B, C)
        Oscillator strengths (dimensionless) and pole positions C = l^2 (um^2).
    valid_range : (float, float)
        Accepted wavelength interval in um.
    a : float
        Constant background term of n^2 (1 for a pure Sellmeier form).
    source : str
        Free-text provenance of the coefficients.
    """

    name: str
    sellmeier_coefficients: Tuple[Tuple[float, float], ...] = ()
    valid_range: Tuple[float, float] = (0.0, math.inf)
    a: float = 1.0
    source: str = field(default="", compare=False)

    @classmethod
    def constant(cls, name: str, index: float) -> "Material":
        """Non-dispersive material with fixed index (used for test structures)."""
        return cls(name=name, a=float(index) ** 2, source="constant index")

    def _check_range(self, wavelength_um: np.ndarray) -> None:
        lo, hi = self.valid_range
        if np.any(wavelength_um < lo) or np.any(wavelength_um > hi):
            bad = wavelength_um[(wavelength_um < lo) | (wavelength_um > hi)]
            raise WavelengthRangeError(
                f"{self.name}: wavelength {1e3 * float(bad.flat[0]):g} nm outside "
                f"valid range [{1e3 * lo:g}, {1e3 * hi:g}] nm"
            )

    def epsilon(self, wavelength_nm):
        """Relative permittivity n^2 at ``wavelength_nm``."""
        lam = np.asarray(wavelength_nm, dtype=float) * 1e-3
        self._check_range(lam)
        lam2 = lam * lam
        eps = np.full_like(lam2, self.a)
        for b, c in self.sellmeier_coefficients:
            eps = eps + b * lam2 / (lam2 - c)
        return eps if eps.ndim else float(eps)

    def index(self, wavelength_nm):
        return np.sqrt(self.epsilon(wavelength_nm))

    def dindex(self, wavelength_nm):
        """dn/dL in 1/nm."""
        lam = np.asarray(wavelength_nm, dtype=float) * 1e-3
        self._check_range(lam)
        lam2 = lam * lam
        eps = np.full_like(lam2, self.a)
        deps = np.zeros_like(lam2)
        for b, c in self.sellmeier_coefficients:
            eps = eps + b * lam2 / (lam2 - c)
            deps = deps - 2.0 * b * c * lam / (lam2 - c) ** 2
        out = deps / (2.0 * np.sqrt(eps)) * 1e-3
        return out if out.ndim else float(out)


def _floats(text: str):
    text = text.strip()
    if not text:
        return []
    return [float(tok) for tok in text.split(",")]


def load_materials(path: Union[str, Path, None] = None) -> Dict[str, Material]:
    """Read a coefficient table.

    ``path=None`` loads the bundled ``materials.ini``.  Every section becomes one
    :class:`Material`; comment lines directly below the header are kept as its
    ``source`` string.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=None)
    if path is None:
        text = resources.files("hybrid_node").joinpath("data/materials.ini").read_text()
    else:
        text = Path(path).read_text()
    parser.read_string(text)

    sources: Dict[str, str] = {}
    current = None
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1]
            sources[current] = ""
        elif current is not None and s.startswith("#"):
            sources[current] = (sources[current] + " " + s.lstrip("# ")).strip()

    table = {}
    for name in parser.sections():
        sec = parser[name]
        b = _floats(sec.get("b", ""))
        poles = _floats(sec.get("poles_um", ""))
        if len(b) != len(poles):
            raise ValueError(f"{name}: {len(b)} strengths but {len(poles)} poles")
        rng = _floats(sec.get("range_um", "0, inf"))
        if len(rng) != 2 or not rng[0] < rng[1]:
            raise ValueError(f"{name}: range_um must be 'lo, hi' with lo < hi")
        table[name] = Material(
            name=name,
            sellmeier_coefficients=tuple((bi, li * li) for bi, li in zip(b, poles)),
            valid_range=(rng[0], rng[1]),
            a=sec.getfloat("a", 1.0),
            source=sources.get(name, ""),
        )
    return table


_TABLE: Dict[str, Material] = load_materials()


def set_material_table(path: Union[str, Path, None]) -> Dict[str, Material]:
    """Replace the process-wide table (the CLI ``--materials`` flag)."""
    global _TABLE, GaP, GaAs, Diamond, Air
    _TABLE = load_materials(path)
    GaP, GaAs, Diamond, Air = (_TABLE.get(k) for k in ("GaP", "GaAs", "Diamond", "Air"))
    return _TABLE


def get_material(name: Union[str, Material]) -> Material:
    if isinstance(name, Material):
        return name
    try:
        return _TABLE[name]
    except KeyError:
        raise KeyError(f"unknown material {name!r}; known: {sorted(_TABLE)}") from None


GaP = _TABLE["GaP"]
GaAs = _TABLE["GaAs"]
Diamond = _TABLE["Diamond"]
Air = _TABLE["Air"]


def refractive_index(material, wavelength):
    """Refractive index of ``material`` at ``wavelength`` (nm).

    Accepts scalars or arrays; raises :class:`WavelengthRangeError` outside the
    material's valid interval.
    """
    return get_material(material).index(wavelength)


def index_derivative(material, wavelength):
    """Analytic dn/dL of the Sellmeier expansion, in 1/nm."""
    return get_material(material).dindex(wavelength)
