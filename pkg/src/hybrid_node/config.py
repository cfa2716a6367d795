"""
Experiment configuration files.

A configuration is one YAML document.  Every physical quantity carries its
unit in the key name (``radius_um``, ``D1_GHz``, ``powers_mW``); resonance
coefficients are D_n / 2pi in the suffixed frequency unit.  Missing blocks
fall back to the bundled ring preset (``data/table1.yaml``) and the sweep
defaults below.

:func:`validate_config` collects every problem before raising, with the
source line of each offending field when it can be located.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml
from scipy.constants import c, pi

from .resonator import Band, ConfigurationError, DispersionModel, ResonatorConfig

__all__ = [
    "ConfigError",
    "ConfigWarning",
    "ExperimentConfig",
    "PRESETS",
    "validate_config",
    "parse_config",
    "load_resonator",
    "table1_config",
    "resonator_from_dict",
]

PRESETS = ("fig4c", "fig4d", "fig4e", "fig5b", "fig5c", "fig5d", "table1-check", "purcell-tradeoff")

_FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "THz": 1e12}
_D_KEY = re.compile(r"^D([123])_(Hz|kHz|MHz|GHz|THz)$")
# group indices a real ring can have; outside this the D1 unit is suspect
_NG_PLAUSIBLE = (1.0, 6.0)


class ConfigError(ValueError):
    """One or more configuration problems; ``errors`` lists them all."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


class ConfigWarning(UserWarning):
    pass


DEFAULTS: Dict[str, Dict[str, Any]] = {
    "fwm": {
        "powers_mW": [10.0, 20.0, 30.0, 50.0],
        "split_fraction": 0.5,
        "mu": 1,
        "detuning_start": -1.0,
        "detuning_stop": 3.0,
        "detuning_points": 401,
        "mu_max": 10,
        "mu_power_mW": 50.0,
        "map_powers_mW": [5.0, 100.0, 50],
        "map_Q_L": [1.0e4, 2.0e5, 50],
        "signal_power_mW": 1e-3,
    },
    "modesolver": {
        "core": "GaP",
        "substrate": "Diamond",
        "grid_nm": 20.0,
        "margin_nm": 1500.0,
        "w_y_nm": 500.0,
        "w_z_nm": 640.0,
        "thickness_list_nm": [540.0, 640.0, 740.0],
        "width_list_nm": [400.0, 450.0, 500.0, 550.0, 600.0, 650.0, 700.0],
        "wavelengths_nm": [900.0, 1700.0, 33],
        "fig4c_cross_sections_nm": [[500.0, 640.0], [600.0, 740.0], [450.0, 540.0]],
    },
    "purcell": {
        "gamma0_MHz": 88.0,
        "beta": 1.0,
        "host_index": 2.4,
        "wavelength_nm": 946.0,
        "ring_wavelength_nm": 946.6,
        "Q_L": 3.78e4,
        "purcell_max": 743.0,
        "purcell_points": 200,
    },
    "geometry": {
        "design": "GaP",
        "n_cavity_holes": 20,
        "n_mirror_pairs": 20,
        "taper_exponent": 2.0,
    },
}


@dataclass
class ExperimentConfig:
    resonator: ResonatorConfig
    fwm: Dict[str, Any]
    modesolver: Dict[str, Any]
    purcell: Dict[str, Any]
    geometry: Dict[str, Any]
    preset: Optional[str] = None
    out_dir: Optional[Path] = None
    seed: int = 0
    plot: bool = False
    warnings: List[str] = field(default_factory=list)
    source: str = "<defaults>"


def _line_map(text: str) -> Dict[Tuple[str, ...], int]:
    """Source line (1-based) of every mapping key, by key path."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    out: Dict[Tuple[str, ...], int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (str(k.value),)
                out[p] = k.start_mark.line + 1
                walk(v, p)

    walk(root, ())
    return out


class _Collector:
    def __init__(self, lines):
        self.lines = lines
        self.errors: List[str] = []
        self.warnings: List[str] = []

    def where(self, path):
        ln = self.lines.get(tuple(path))
        name = ".".join(path)
        return f"{name} (line {ln})" if ln else name

    def error(self, path, msg):
        self.errors.append(f"{self.where(path)}: {msg}")

    def warn(self, path, msg):
        self.warnings.append(f"{self.where(path)}: {msg}")

    def number(self, block, key, path, positive=False, default=None, integer=False):
        if key not in block:
            if default is None:
                self.error(path + [key], "missing required field")
            return default
        raw = block[key]
        try:
            if isinstance(raw, bool):
                raise TypeError
            v = float(raw)
        except (TypeError, ValueError):
            self.error(path + [key], f"expected a number, got {raw!r}")
            return default
        if math.isnan(v):
            self.error(path + [key], "must not be NaN")
            return default
        if positive and not v > 0:
            self.error(path + [key], f"must be positive, got {raw!r}")
            return default
        if integer:
            if v != int(v):
                self.error(path + [key], f"expected an integer, got {raw!r}")
                return default
            return int(v)
        return v

    def numbers(self, block, key, path, positive=False):
        raw = block.get(key)
        if not isinstance(raw, (list, tuple)):
            self.error(path + [key], f"expected a list of numbers, got {raw!r}")
            return None
        out = []
        for i, r in enumerate(raw):
            try:
                if isinstance(r, bool):
                    raise TypeError
                v = float(r)
            except (TypeError, ValueError):
                self.error(path + [key], f"entry {i} is not a number: {r!r}")
                return None
            if positive and not v > 0:
                self.error(path + [key], f"entry {i} must be positive, got {r!r}")
                return None
            out.append(v)
        return out


def _band(col: _Collector, block, path, radius_um):
    if not isinstance(block, dict):
        col.error(path, "expected a mapping")
        return None
    lam = col.number(block, "center_wavelength_nm", path, positive=True)
    D = {}
    for key in block:
        m = _D_KEY.match(str(key))
        if m:
            n = int(m.group(1))
            if n in D:
                col.error(path + [key], f"D{n} given more than once")
                continue
            v = col.number(block, key, path)
            if v is not None:
                D[n] = (v * _FREQ_UNITS[m.group(2)], m.group(2), key)
        elif str(key).startswith("D") and str(key)[1:2].isdigit():
            col.error(path + [key], "unknown unit suffix; use one of " + ", ".join(_FREQ_UNITS))
    if 1 not in D:
        col.error(path + ["D1_GHz"], "missing required field (D1 / 2pi with a frequency unit suffix)")
    q_i = col.number(block, "Q_i", path, positive=True)
    if "Q_C" in block and ("Q_C1" in block or "Q_C2" in block):
        col.error(path + ["Q_C"], "give either Q_C or the coupler pair Q_C1/Q_C2, not both")
        q_c1 = q_c2 = None
    elif "Q_C" in block:
        q_c1 = col.number(block, "Q_C", path, positive=True)
        q_c2 = math.inf
    else:
        q_c1 = col.number(block, "Q_C1", path, positive=True)
        q_c2 = col.number(block, "Q_C2", path, positive=True, default=math.inf)
    n2 = col.number(block, "n2_m2_per_W", path, default=0.0)
    if n2 is not None and n2 < 0:
        col.error(path + ["n2_m2_per_W"], "must be non-negative")
    a_eff = col.number(block, "A_eff_um2", path, positive=True)
    for key in block:
        known = {"center_wavelength_nm", "Q_i", "Q_C", "Q_C1", "Q_C2", "n2_m2_per_W", "A_eff_um2"}
        if key not in known and not _D_KEY.match(str(key)) and not (str(key).startswith("D") and str(key)[1:2].isdigit()):
            col.error(path + [key], "unknown field")

    if 1 in D and radius_um:
        fsr = D[1][0]
        if fsr > 0:
            n_g = c / (2 * pi * radius_um * 1e-6 * fsr)
            if not _NG_PLAUSIBLE[0] <= n_g <= _NG_PLAUSIBLE[1]:
                hint = ""
                for unit, scale in _FREQ_UNITS.items():
                    alt = c / (2 * pi * radius_um * 1e-6 * D[1][0] / _FREQ_UNITS[D[1][1]] * scale)
                    if _NG_PLAUSIBLE[0] <= alt <= _NG_PLAUSIBLE[1]:
                        hint = f"; the same number in {unit} gives n_g = {alt:.2f}"
                        break
                col.warn(path + [D[1][2]],
                         f"FSR consistency check: D1/2pi = {fsr:.4g} Hz on a {radius_um:g} um ring "
                         f"implies group index {n_g:.4g}, outside [{_NG_PLAUSIBLE[0]:g}, {_NG_PLAUSIBLE[1]:g}]{hint}")
        else:
            col.error(path + [D[1][2]], "D1 must be positive")
    if col.errors or None in (lam, q_i, q_c1, q_c2, a_eff, n2) or 1 not in D:
        return None
    omega0 = 2 * pi * c / (lam * 1e-9)
    try:
        model = DispersionModel(omega0, 2 * pi * D[1][0],
                                2 * pi * D.get(2, (0.0,))[0], 2 * pi * D.get(3, (0.0,))[0])
        return Band(model, q_i, q_c1, q_c2, n2, a_eff)
    except ConfigurationError as exc:
        col.error(path, str(exc))
        return None


def _resonator(col: _Collector, block, path=("resonator",)) -> Optional[ResonatorConfig]:
    path = list(path)
    if not isinstance(block, dict):
        col.error(path, "expected a mapping")
        return None
    radius = col.number(block, "radius_um", path, positive=True)
    bands = {}
    for name in ("band946", "band1550"):
        if name not in block:
            col.error(path + [name], "missing required block")
            continue
        bands[name] = _band(col, block[name], path + [name], radius)
    for key in block:
        if key not in ("radius_um", "band946", "band1550"):
            col.error(path + [key], "unknown field")
    if col.errors or radius is None or None in bands.values() or len(bands) != 2:
        return None
    try:
        return ResonatorConfig(radius, bands["band946"], bands["band1550"])
    except ConfigurationError as exc:
        col.error(path, str(exc))
        return None


def _preset_text() -> str:
    return resources.files("hybrid_node").joinpath("data/table1.yaml").read_text()


def resonator_from_dict(block: Dict[str, Any]) -> ResonatorConfig:
    col = _Collector({})
    cfg = _resonator(col, block)
    if col.errors:
        raise ConfigError(col.errors)
    for w in col.warnings:
        warnings.warn(w, ConfigWarning, stacklevel=2)
    return cfg


def table1_config() -> ResonatorConfig:
    """The bundled ring preset (640 x 500 nm GaP ring, R = 25 um)."""
    return resonator_from_dict(yaml.safe_load(_preset_text())["resonator"])


def load_resonator(path: Union[str, Path]) -> ResonatorConfig:
    return validate_config(path).resonator


def _merge_block(col, name, given):
    out = dict(DEFAULTS[name])
    if given is None:
        return out
    if not isinstance(given, dict):
        col.error([name], "expected a mapping")
        return out
    for k, v in given.items():
        if k not in out:
            col.error([name, k], "unknown field")
        else:
            out[k] = v
    return out


def _check_fwm(col, b):
    p = ["fwm"]
    powers = col.numbers(b, "powers_mW", p)
    if powers is not None:
        if not powers:
            col.error(p + ["powers_mW"], "power list is empty")
        elif any(x < 0 for x in powers):
            col.error(p + ["powers_mW"], "powers must be non-negative")
        b["powers_mW"] = powers
    sf = col.number(b, "split_fraction", p)
    if sf is not None and not 0 <= sf <= 1:
        col.error(p + ["split_fraction"], "must lie in [0, 1]")
    mu = col.number(b, "mu", p, positive=True, integer=True)
    b["mu"] = mu
    b["mu_max"] = col.number(b, "mu_max", p, positive=True, integer=True)
    b["detuning_points"] = col.number(b, "detuning_points", p, positive=True, integer=True)
    lo = col.number(b, "detuning_start", p)
    hi = col.number(b, "detuning_stop", p)
    if lo is not None and hi is not None and not lo < hi:
        col.error(p + ["detuning_stop"], "must exceed detuning_start")
    col.number(b, "mu_power_mW", p, positive=True)
    col.number(b, "signal_power_mW", p, positive=True)
    for key in ("map_powers_mW", "map_Q_L"):
        v = col.numbers(b, key, p, positive=True)
        if v is not None and (len(v) != 3 or v[0] >= v[1] or v[2] != int(v[2]) or v[2] < 2):
            col.error(p + [key], "expected [start, stop, count] with start < stop and count >= 2")


def _check_modesolver(col, b):
    p = ["modesolver"]
    from .materials import get_material

    for key in ("core", "substrate"):
        try:
            get_material(b[key])
        except KeyError as exc:
            col.error(p + [key], str(exc.args[0]))
    for key in ("grid_nm", "margin_nm", "w_y_nm", "w_z_nm"):
        col.number(b, key, p, positive=True)
    for key in ("thickness_list_nm", "width_list_nm"):
        v = col.numbers(b, key, p, positive=True)
        if v is not None and not v:
            col.error(p + [key], "list is empty")
    v = col.numbers(b, "wavelengths_nm", p, positive=True)
    if v is not None and (len(v) != 3 or v[0] >= v[1] or v[2] < 5 or v[2] != int(v[2])):
        col.error(p + ["wavelengths_nm"], "expected [start, stop, count] with count >= 5")
    xs = b.get("fig4c_cross_sections_nm")
    if not isinstance(xs, list) or not all(isinstance(r, (list, tuple)) and len(r) == 2 for r in xs):
        col.error(p + ["fig4c_cross_sections_nm"], "expected a list of [w_y, w_z] pairs")


def _check_purcell(col, b):
    p = ["purcell"]
    for key in ("gamma0_MHz", "wavelength_nm", "ring_wavelength_nm", "Q_L", "purcell_max"):
        col.number(b, key, p, positive=True)
    beta = col.number(b, "beta", p, positive=True)
    if beta is not None and beta > 1:
        col.error(p + ["beta"], "must lie in (0, 1]")
    n = col.number(b, "host_index", p)
    if n is not None and not n >= 1:
        col.error(p + ["host_index"], "must be >= 1")
    col.number(b, "purcell_points", p, positive=True, integer=True)


def _check_geometry(col, b):
    p = ["geometry"]
    d = b.get("design")
    if isinstance(d, str):
        if d not in ("GaP", "GaAs"):
            col.error(p + ["design"], f"unknown preset {d!r}; use GaP, GaAs or a mapping of *_nm fields")
    elif isinstance(d, dict):
        for key in ("w_y_nm", "w_z_nm", "h_x_nm", "h_y_nm", "a_cav_nm", "a_mirr_nm"):
            col.number(d, key, p + ["design"], positive=True)
    else:
        col.error(p + ["design"], "expected a preset name or a mapping")
    n = col.number(b, "n_cavity_holes", p, positive=True, integer=True)
    if n is not None and n % 2:
        col.error(p + ["n_cavity_holes"], "must be even")
    m = col.number(b, "n_mirror_pairs", p, default=None, integer=True)
    if m is not None and m < 0:
        col.error(p + ["n_mirror_pairs"], "must be non-negative")
    col.number(b, "taper_exponent", p, positive=True)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Validate configuration text; see :func:`validate_config`."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError([f"{source}: YAML parse error{where}: {getattr(exc, 'problem', exc)}"]) from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError([f"{source}: top level must be a mapping"])
    col = _Collector(_line_map(text))
    known = {"preset", "resonator", "fwm", "modesolver", "purcell", "geometry", "out_dir", "seed", "plot"}
    for key in doc:
        if key not in known:
            col.error([key], "unknown top-level field")

    preset = doc.get("preset")
    if preset is not None and preset not in PRESETS:
        col.error(["preset"], f"unknown preset {preset!r}; available: {', '.join(PRESETS)}")

    if "resonator" in doc:
        res = _resonator(col, doc["resonator"])
    else:
        pcol = _Collector({})
        res = _resonator(pcol, yaml.safe_load(_preset_text())["resonator"])
        col.errors += pcol.errors
        col.warnings += pcol.warnings

    blocks = {}
    for name, check in (("fwm", _check_fwm), ("modesolver", _check_modesolver),
                        ("purcell", _check_purcell), ("geometry", _check_geometry)):
        blocks[name] = _merge_block(col, name, doc.get(name))
        check(col, blocks[name])

    seed = col.number(doc, "seed", [], default=0, integer=True)
    plot = doc.get("plot", False)
    if not isinstance(plot, bool):
        col.error(["plot"], "expected true or false")
    out_dir = doc.get("out_dir")
    if col.errors:
        raise ConfigError(col.errors)
    for w in col.warnings:
        warnings.warn(w, ConfigWarning, stacklevel=3)
    return ExperimentConfig(
        resonator=res,
        preset=preset,
        out_dir=Path(out_dir) if out_dir else None,
        seed=seed,
        plot=bool(plot),
        warnings=list(col.warnings),
        source=source,
        **blocks,
    )


def validate_config(path: Union[str, Path, None] = None) -> ExperimentConfig:
    """Parse and normalise a configuration file.

    ``path=None`` returns the defaults (bundled ring preset).  All field
    violations are gathered into a single :class:`ConfigError`; suspicious
    units (a D1 that implies an implausible group index) produce a
    :class:`ConfigWarning` that is also kept in ``ExperimentConfig.warnings``.
    """
    if path is None:
        return parse_config("", "<defaults>")
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError([f"{p}: cannot read ({exc.strerror})"]) from None
    return parse_config(text, str(p))
