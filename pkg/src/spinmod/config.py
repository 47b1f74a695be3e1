"""Run configuration: flat ``section.key = value`` text with typed sections.

Lines starting with ``#`` are comments, except ``#@`` lines, which carry the
configuration echo embedded in result files.  A file containing any ``#@``
line is read from those lines only, so a result CSV can be passed back as a
configuration.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class PhysicalSection:
    t1_ns: float = 0.46
    b_field_mT: float = 0.0
    g_b: float = 0.0
    g_h: float | None = None  # None: same precession frequency as the electron
    p_over_psat: float = 0.02


@dataclass
class ModelSection:
    larmor_mhz: float | None = None  # overrides g_b·B
    larmor_over_gamma: float | None = None  # overrides both, 2ω_b in units of Γ
    delta_uev: float = 0.0
    gamma_opt_deph_over_gamma: float = 0.1
    dephasing: str = "markovian"  # or "overhauser"
    t2star_ns: float | None = None
    calibration_b_mT: float | None = None  # field at which t2star was measured
    spin_rate: float | None = None  # explicit Markovian rate, skips calibration
    v0: float = 1.0


@dataclass
class CavitySection:
    kappa: float = 100.0
    kappa_ext: float = 100.0
    g_coupling: float = 15.0
    gamma_x: float = 2.1739130434782608
    delta_c: float = 0.0


@dataclass
class JitterSection:
    kind: str = "none"  # none | gaussian_detuning | gaussian_overhauser
    fwhm_uev: float = 0.0
    n_samples: int = 21


@dataclass
class DetectorSection:
    jitter_ps: float = 0.0
    efficiency: float = 1.0
    bin_ps: float = 256.0


@dataclass
class HomodyneSection:
    lo_over_rsf: float = 10.0
    phi_lo: list = field(default_factory=lambda: [0.0])
    unlocked: bool = False
    phase_noise: float = 0.0


@dataclass
class GridSection:
    tau_max_ns: float | None = None
    n_points: int = 4096
    delta_over_gamma: list = field(default_factory=lambda: [0.0])
    omega_max_over_gamma: float = 6.0
    pad: int = 16


@dataclass
class TrajectorySection:
    n: int = 64
    duration_ns: float = 1000.0
    detection: str = "hbt"
    block_size: int = 512
    tau_max_ns: float = 5.0
    seed: int = 0


@dataclass
class OutputSection:
    dir: str = "."
    format: str = "csv"
    units: str = "si"


SECTIONS = {
    "physical": PhysicalSection,
    "model": ModelSection,
    "cavity": CavitySection,
    "jitter": JitterSection,
    "detector": DetectorSection,
    "homodyne": HomodyneSection,
    "grids": GridSection,
    "trajectories": TrajectorySection,
    "output": OutputSection,
}
PRESETS = ("qd1", "qd2", "qd1_tuned", "custom")


@dataclass
class RunConfig:
    preset: str = "custom"
    physical: PhysicalSection = field(default_factory=PhysicalSection)
    model: ModelSection = field(default_factory=ModelSection)
    cavity: CavitySection = field(default_factory=CavitySection)
    jitter: JitterSection = field(default_factory=JitterSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    homodyne: HomodyneSection = field(default_factory=HomodyneSection)
    grids: GridSection = field(default_factory=GridSection)
    trajectories: TrajectorySection = field(default_factory=TrajectorySection)
    output: OutputSection = field(default_factory=OutputSection)

    def set(self, key: str, value) -> None:
        """Assign a dotted key; strings are coerced to the field type."""
        if key == "preset":
            if value not in PRESETS:
                raise ConfigError(f"unknown preset {value!r}")
            self.preset = value
            return
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError(f"unknown key {key!r}")
        obj = getattr(self, section)
        types = {f.name: f.type for f in fields(obj)}
        if name not in types:
            raise ConfigError(f"unknown key {key!r}")
        setattr(obj, name, _coerce(value, types[name], key))

    def to_flat(self, with_output_dir: bool = True) -> dict[str, str]:
        flat = {"preset": self.preset}
        for section in SECTIONS:
            obj = getattr(self, section)
            for f in fields(obj):
                flat[f"{section}.{f.name}"] = _format(getattr(obj, f.name))
        if not with_output_dir:
            # where a result is written does not change what it contains
            del flat["output.dir"]
        return flat

    def to_text(self, prefix: str = "") -> str:
        return "".join(f"{prefix}{k} = {v}\n" for k, v in self.to_flat().items())


def _format(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ", ".join(_format(float(x)) for x in v)
    return str(v)


def _parse_float(s: str, key: str) -> float:
    s = s.strip()
    named = {"pi": math.pi, "pi/2": math.pi / 2, "-pi/2": -math.pi / 2, "pi/4": math.pi / 4}
    if s.lower() in named:
        return named[s.lower()]
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {s!r}") from None


def _coerce(value, typ: str, key: str):
    if not isinstance(value, str):
        return value
    s = value.strip()
    optional = "None" in typ
    if optional and s.lower() == "none":
        return None
    base = typ.replace("| None", "").strip()
    if base == "float":
        return _parse_float(s, key)
    if base == "int":
        try:
            return int(s)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {s!r}") from None
    if base == "bool":
        if s.lower() in ("true", "1", "yes"):
            return True
        if s.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected true/false, got {s!r}")
    if base == "list":
        return [_parse_float(x, key) for x in s.split(",") if x.strip()]
    return s


def parse_text(text: str) -> dict[str, str]:
    lines = text.splitlines()
    if any(line.startswith("#@") for line in lines):
        lines = [line[2:] for line in lines if line.startswith("#@")]
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def load_pairs(path) -> dict[str, str]:
    """Key/value pairs from a config file, a result CSV, or a result JSON."""
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        try:
            meta = json.loads(text)["metadata"]["config"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: not a result JSON with a config echo") from exc
        return dict(meta)
    return parse_text(text)


def build(pairs: dict[str, str], preset: str | None = None) -> RunConfig:
    """Start from a preset (argument, else the ``preset`` key) and apply pairs."""
    from .presets import preset_config

    name = preset or pairs.get("preset", "custom")
    cfg = preset_config(name)
    for k, v in pairs.items():
        if k != "preset":
            cfg.set(k, v)
    return cfg
