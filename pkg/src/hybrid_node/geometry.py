"""
Input structures for external Maxwell solvers: nanobeam hole lists and ring
layouts.

Nanobeam cavity: the spacing between neighbouring elliptical holes grows
from ``a_cav`` at the centre to ``a_mirr`` over N = n_cavity_holes / 2 holes
per side,

    a_k = a_cav + (a_mirr - a_cav) (k / (N - 1))^p,   k = 0 .. N-1,

with p = 2 by default.  ``n_mirror_pairs`` further spacings of ``a_mirr``
follow.  The innermost pair sits at +/- a_cav / 2.  All lengths are in nm
unless a field name says otherwise.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

__all__ = [
    "NanobeamDesign",
    "HoleList",
    "Coupler",
    "RingLayout",
    "GAP_DESIGN",
    "GAAS_DESIGN",
    "DEFAULT_COUPLERS",
    "generate_taper",
    "taper_spacings",
    "generate_ring_layout",
    "write_hole_csv",
    "layout_to_json",
    "layout_from_json",
    "HOLE_HEADER",
]

HOLE_HEADER = ["index", "x_nm", "hx_nm", "hy_nm"]


@dataclass(frozen=True)
class NanobeamDesign:
    w_y: float
    w_z: float
    h_x: float
    h_y: float
    a_cav: float
    a_mirr: float
    n_cavity_holes: int = 20
    n_mirror_pairs: int = 20
    taper_exponent: float = 2.0

    def __post_init__(self):
        for name in ("w_y", "w_z", "h_x", "h_y", "a_cav", "a_mirr"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.a_cav < self.a_mirr:
            raise ValueError("a_cav must be smaller than a_mirr")
        if not self.h_y < self.w_y:
            raise ValueError("holes must fit inside the beam (h_y < w_y)")
        if self.h_x >= self.a_cav:
            raise ValueError("neighbouring holes overlap (h_x >= a_cav)")
        if int(self.n_cavity_holes) != self.n_cavity_holes or self.n_cavity_holes < 2 or self.n_cavity_holes % 2:
            raise ValueError("n_cavity_holes must be a positive even integer")
        if int(self.n_mirror_pairs) != self.n_mirror_pairs or self.n_mirror_pairs < 0:
            raise ValueError("n_mirror_pairs must be a non-negative integer")
        if not self.taper_exponent > 0:
            raise ValueError("taper_exponent must be positive")

    @property
    def holes_per_side(self) -> int:
        return self.n_cavity_holes // 2


# GaP-on-diamond and GaAs-on-diamond nanobeams at 946 nm
GAP_DESIGN = NanobeamDesign(w_y=400, w_z=380, h_x=59, h_y=128, a_cav=171, a_mirr=184)
GAAS_DESIGN = NanobeamDesign(w_y=350, w_z=220, h_x=70, h_y=136, a_cav=162, a_mirr=180)


@dataclass(frozen=True)
class HoleList:
    x: np.ndarray
    hx: float
    hy: float

    def __len__(self):
        return self.x.size

    @property
    def length(self) -> float:
        """Centre-to-centre span of the outermost holes."""
        return float(self.x[-1] - self.x[0])

    def rows(self):
        for i, xi in enumerate(self.x):
            yield i, float(xi), self.hx, self.hy


def taper_spacings(design: NanobeamDesign) -> np.ndarray:
    """Per-side spacing sequence: N taper values then the mirror spacings."""
    N = design.holes_per_side
    if N == 1:
        taper = np.array([design.a_cav])
    else:
        k = np.arange(N) / (N - 1)
        taper = design.a_cav + (design.a_mirr - design.a_cav) * k**design.taper_exponent
    return np.concatenate([taper, np.full(design.n_mirror_pairs, float(design.a_mirr))])


def generate_taper(design: NanobeamDesign) -> HoleList:
    """Mirror-symmetric hole centres.

    Spacing ``a_0 = a_cav`` separates the innermost pair; each further
    spacing pushes one hole outward on both sides.
    """
    a = taper_spacings(design)
    right = a[0] / 2.0 + np.concatenate([[0.0], np.cumsum(a[1:])])
    x = np.concatenate([-right[::-1], right])
    return HoleList(x, float(design.h_x), float(design.h_y))


def write_hole_csv(holes: HoleList, path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HOLE_HEADER)
        for i, x, hx, hy in holes.rows():
            w.writerow([i, repr(x), repr(hx), repr(hy)])
    return path


@dataclass(frozen=True)
class Coupler:
    """Bus waveguide: width w_y, thickness w_z and edge-to-edge gap to the ring (nm)."""

    w_y: float
    w_z: float
    gap: float
    label: str = ""

    def __post_init__(self):
        if self.gap < 0:
            raise ValueError(f"coupler gap must be non-negative, got {self.gap}")
        if not (self.w_y > 0 and self.w_z > 0):
            raise ValueError("coupler dimensions must be positive")
        for name in ("w_y", "w_z", "gap"):
            object.__setattr__(self, name, float(getattr(self, name)))


# 946 nm coupler shares the ring cross-section; the 1550 nm one is narrow enough
# that its 946 nm mode is far from phase matching
DEFAULT_COUPLERS = (
    Coupler(w_y=500, w_z=640, gap=210, label="946"),
    Coupler(w_y=300, w_z=380, gap=10, label="1550"),
)


@dataclass(frozen=True)
class RingLayout:
    radius_um: float
    w_y: float
    w_z: float
    couplers: Tuple[Coupler, ...] = ()
    center_um: Tuple[float, float] = (0.0, 0.0)
    units: str = "lengths in nm unless suffixed _um"

    def coupler_offsets_nm(self) -> List[float]:
        """Bus-waveguide centre distance from the ring centre, per coupler."""
        R = self.radius_um * 1e3
        return [R + self.w_y / 2 + cp.gap + cp.w_y / 2 for cp in self.couplers]


def generate_ring_layout(radius: float, cross_section: Tuple[float, float],
                         couplers: Sequence[Union[Coupler, Dict[str, Any]]] = ()) -> RingLayout:
    """Ring of ``radius`` (um) with core ``cross_section = (w_y, w_z)`` in nm.

    ``couplers`` takes :class:`Coupler` objects or mappings with ``w_y``,
    ``w_z``, ``gap`` (and optional ``label``).
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    w_y, w_z = (float(v) for v in cross_section)
    if not (w_y > 0 and w_z > 0):
        raise ValueError("ring cross-section must be positive")
    cps = tuple(cp if isinstance(cp, Coupler) else Coupler(**cp) for cp in couplers)
    return RingLayout(float(radius), w_y, w_z, cps)


def layout_to_json(layout: RingLayout) -> str:
    doc = {
        "units": layout.units,
        "ring": {"center_um": list(layout.center_um), "radius_um": layout.radius_um,
                 "w_y_nm": layout.w_y, "w_z_nm": layout.w_z},
        "couplers": [{"label": cp.label, "w_y_nm": cp.w_y, "w_z_nm": cp.w_z, "gap_nm": cp.gap,
                      "offset_nm": off}
                     for cp, off in zip(layout.couplers, layout.coupler_offsets_nm())],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def layout_from_json(text: str) -> RingLayout:
    doc = json.loads(text)
    ring = doc["ring"]
    cps = tuple(Coupler(w_y=cp["w_y_nm"], w_z=cp["w_z_nm"], gap=cp["gap_nm"], label=cp.get("label", ""))
                for cp in doc.get("couplers", []))
    return RingLayout(float(ring["radius_um"]), float(ring["w_y_nm"]), float(ring["w_z_nm"]), cps,
                      tuple(float(v) for v in ring.get("center_um", (0.0, 0.0))),
                      doc.get("units", RingLayout.units))
