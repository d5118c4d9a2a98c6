"""Physical constants, trap/cavity configuration and the run-config file format.

Internal computation is SI with angular frequencies (rad/s). The config file
and the CLI speak ordinary units (nm, kHz, MHz, uK); conversion happens here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Raised for invalid configuration values or unknown keys."""


@dataclass(frozen=True)
class PhysicalConstants:
    # CODATA 2018 (exact where SI-defined)
    boltzmann: float = 1.380649e-23  # J/K
    vacuum_permittivity: float = 8.8541878128e-12  # F/m
    elementary_charge: float = 1.602176634e-19  # C
    atomic_mass_unit: float = 1.66053906660e-27  # kg


CONSTANTS = PhysicalConstants()

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TrapConfig:
    """Ion species, cavity and trap parameters (SI, angular frequencies).

    ``decay_rate``, ``pump_detuning``, ``finesse`` and ``linewidth`` are
    carried as metadata only; no computation reads them.
    """

    ion_mass: float
    charge: float = CONSTANTS.elementary_charge
    wavelength: float = 866e-9
    g0: float = TWO_PI * 0.9e6
    num_ions: int = 1
    doppler_temperature: float = 535e-6
    decay_rate: float | None = None
    pump_detuning: float | None = None
    finesse: float | None = None
    linewidth: float | None = None

    def __post_init__(self):
        for name in ("ion_mass", "charge", "wavelength", "g0", "doppler_temperature"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
        if isinstance(self.num_ions, bool) or not isinstance(self.num_ions, int) or self.num_ions < 1:
            raise ConfigError(f"num_ions must be a positive integer, got {self.num_ions!r}")

    @property
    def wavenumber(self) -> float:
        return TWO_PI / self.wavelength

    @property
    def mass_amu(self) -> float:
        return self.ion_mass / CONSTANTS.atomic_mass_unit


OVERRIDE_KEYS = frozenset(
    f.name for f in fields(TrapConfig) if f.name != "ion_mass"
)


def make_config(mass_amu: float = 40.0, overrides: dict | None = None) -> TrapConfig:
    """Build a TrapConfig with 40Ca+ defaults for anything not overridden.

    Allowed override keys are the TrapConfig field names other than
    ``ion_mass``: charge, wavelength, g0, num_ions, doppler_temperature,
    decay_rate, pump_detuning, finesse, linewidth.
    """
    if not (isinstance(mass_amu, (int, float)) and math.isfinite(mass_amu) and mass_amu > 0):
        raise ConfigError(f"mass_amu must be positive, got {mass_amu!r}")
    overrides = dict(overrides or {})
    unknown = sorted(set(overrides) - OVERRIDE_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    return TrapConfig(ion_mass=mass_amu * CONSTANTS.atomic_mass_unit, **overrides)


def with_ions(config: TrapConfig, num_ions: int) -> TrapConfig:
    return replace(config, num_ions=num_ions)


# ---------------------------------------------------------------------------
# config file: one ``key = value`` per line, ``#`` comments

@dataclass(frozen=True)
class RunConfig:
    trap: TrapConfig
    temperature: float | None = None  # K
    freq_min: float | None = None  # rad/s
    freq_max: float | None = None  # rad/s


_FILE_KEYS = (
    "mass_amu",
    "wavelength_nm",
    "g0_2pi_mhz",
    "num_ions",
    "temperature_uk",
    "doppler_temperature_uk",
    "secular_freq_khz_min",
    "secular_freq_khz_max",
    # optional metadata, never used in computation
    "decay_rate_2pi_mhz",
    "pump_detuning_2pi_mhz",
    "finesse",
    "linewidth_khz",
)


def parse_config_text(text: str) -> dict[str, float]:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FILE_KEYS:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = int(value) if key == "num_ions" else float(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: cannot parse value for {key!r}: {value!r}") from None
    return values


def run_config_from_values(values: dict[str, float]) -> RunConfig:
    overrides: dict = {}
    if "wavelength_nm" in values:
        overrides["wavelength"] = values["wavelength_nm"] * 1e-9
    if "g0_2pi_mhz" in values:
        overrides["g0"] = TWO_PI * values["g0_2pi_mhz"] * 1e6
    if "num_ions" in values:
        overrides["num_ions"] = values["num_ions"]
    if "doppler_temperature_uk" in values:
        overrides["doppler_temperature"] = values["doppler_temperature_uk"] * 1e-6
    if "decay_rate_2pi_mhz" in values:
        overrides["decay_rate"] = TWO_PI * values["decay_rate_2pi_mhz"] * 1e6
    if "pump_detuning_2pi_mhz" in values:
        overrides["pump_detuning"] = TWO_PI * values["pump_detuning_2pi_mhz"] * 1e6
    if "finesse" in values:
        overrides["finesse"] = values["finesse"]
    if "linewidth_khz" in values:
        overrides["linewidth"] = TWO_PI * values["linewidth_khz"] * 1e3
    trap = make_config(values.get("mass_amu", 40.0), overrides)

    def opt(key, scale):
        return values[key] * scale if key in values else None

    run = RunConfig(
        trap=trap,
        temperature=opt("temperature_uk", 1e-6),
        freq_min=opt("secular_freq_khz_min", TWO_PI * 1e3),
        freq_max=opt("secular_freq_khz_max", TWO_PI * 1e3),
    )
    if run.temperature is not None and run.temperature <= 0:
        raise ConfigError("temperature_uk must be positive")
    if run.freq_min is not None and run.freq_max is not None and not 0 < run.freq_min < run.freq_max:
        raise ConfigError("need 0 < secular_freq_khz_min < secular_freq_khz_max")
    return run


def load_config(path: str | Path) -> RunConfig:
    return run_config_from_values(parse_config_text(Path(path).read_text()))


def dump_config(run: RunConfig | TrapConfig) -> str:
    """Serialise to the config file format with round-trip float precision."""
    if isinstance(run, TrapConfig):
        run = RunConfig(trap=run)
    trap = run.trap
    if trap.charge != CONSTANTS.elementary_charge:
        raise ConfigError("the config file format only describes singly charged ions")
    lines = [
        f"mass_amu = {trap.mass_amu!r}",
        f"wavelength_nm = {trap.wavelength * 1e9!r}",
        f"g0_2pi_mhz = {trap.g0 / TWO_PI / 1e6!r}",
        f"num_ions = {trap.num_ions}",
        f"doppler_temperature_uk = {trap.doppler_temperature * 1e6!r}",
    ]
    if run.temperature is not None:
        lines.append(f"temperature_uk = {run.temperature * 1e6!r}")
    if run.freq_min is not None:
        lines.append(f"secular_freq_khz_min = {run.freq_min / TWO_PI / 1e3!r}")
    if run.freq_max is not None:
        lines.append(f"secular_freq_khz_max = {run.freq_max / TWO_PI / 1e3!r}")
    if trap.decay_rate is not None:
        lines.append(f"decay_rate_2pi_mhz = {trap.decay_rate / TWO_PI / 1e6!r}")
    if trap.pump_detuning is not None:
        lines.append(f"pump_detuning_2pi_mhz = {trap.pump_detuning / TWO_PI / 1e6!r}")
    if trap.finesse is not None:
        lines.append(f"finesse = {trap.finesse!r}")
    if trap.linewidth is not None:
        lines.append(f"linewidth_khz = {trap.linewidth / TWO_PI / 1e3!r}")
    return "\n".join(lines) + "\n"


def khz_to_angular(freq_khz):
    return TWO_PI * 1e3 * freq_khz


def angular_to_khz(omega):
    return omega / (TWO_PI * 1e3)
