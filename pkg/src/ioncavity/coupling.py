"""Standing-wave coupling, cavity emission and fringe visibility of a thermal ion string.

Phase conventions: an ion at z sees g0 cos(k z + theta) when the cavity is
displaced by theta / k, and the emission term is cos(2 k z + phi) with
phi = 2 theta. Emission rates are in units of g0^2.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import chain
from .chain import ChainSolution, ChainSolverError, ThermalState
from .config import CONSTANTS, TrapConfig, angular_to_khz

PHASE_SCAN_SAMPLES = 4096
COUPLING_GRID = 10_000
FREQ_GRID = 2000


def sweep_workers() -> int:
    """Thread cap for frequency sweeps, from ``IONCAVITY_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("IONCAVITY_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class CouplingModel:
    config: TrapConfig
    solution: ChainSolution
    thermal: ThermalState

    def __post_init__(self):
        n = self.config.num_ions
        if self.solution.num_ions != n or len(self.thermal.ion_spreads) != n:
            raise ValueError("config, chain solution and thermal state disagree on N")
        if not math.isclose(self.solution.ion_mass, self.config.ion_mass, rel_tol=1e-12):
            raise ValueError("chain solution was computed for a different ion mass")

    @property
    def debye_waller(self) -> np.ndarray:
        k = self.config.wavenumber
        return np.exp(-(k * self.thermal.ion_spreads) ** 2)


@dataclass(frozen=True)
class VisibilityPoint:
    com_frequency: float
    visibility: float
    uncertainty: float = 0.0


@dataclass(frozen=True, eq=False)
class VisibilityCurve:
    frequencies: np.ndarray  # rad/s
    visibilities: np.ndarray
    uncertainties: np.ndarray

    def __len__(self):
        return len(self.frequencies)

    def points(self) -> list[VisibilityPoint]:
        return [
            VisibilityPoint(float(f), float(v), float(s))
            for f, v, s in zip(self.frequencies, self.visibilities, self.uncertainties)
        ]

    @classmethod
    def from_points(cls, points) -> VisibilityCurve:
        pts = list(points)
        return cls(
            frequencies=np.array([p.com_frequency for p in pts], dtype=float),
            visibilities=np.array([p.visibility for p in pts], dtype=float),
            uncertainties=np.array([p.uncertainty for p in pts], dtype=float),
        )


@dataclass(frozen=True, eq=False)
class CouplingReport:
    phase_at_optimum: float
    g_tilde: float
    per_ion_couplings: np.ndarray
    # same quantities at the displacement that maximises the emission W
    emission_phase: float | None = None
    g_tilde_at_emission_phase: float | None = None


def build_model(config: TrapConfig, com_frequency: float, temperature: float) -> CouplingModel:
    solution = chain.solve_chain(config, com_frequency)
    return CouplingModel(config, solution, chain.thermal_spreads(solution, temperature))


def coupling_strength(config: TrapConfig, z):
    return config.g0 * np.cos(config.wavenumber * np.asarray(z))


def emission_profile(model: CouplingModel, displacement):
    """Summed emission W/g0^2 as the cavity is displaced (scalar or array)."""
    k = model.config.wavenumber
    phi = 2.0 * k * np.asarray(displacement, dtype=float)
    arg = 2.0 * k * model.solution.positions[:, None] + np.ravel(phi)[None, :]
    w = np.sum(1.0 + model.debye_waller[:, None] * np.cos(arg), axis=0)
    return w.reshape(np.shape(phi)) if np.ndim(phi) else float(w[0])


def fringe_phasor(model: CouplingModel) -> complex:
    k = model.config.wavenumber
    return complex(np.sum(model.debye_waller * np.exp(2j * k * model.solution.positions)))


def visibility(model: CouplingModel) -> float:
    """Fringe contrast in closed form, |sum_i DW_i exp(2ikz_i)| / N."""
    return abs(fringe_phasor(model)) / model.solution.num_ions


def _parabolic_peak(y: np.ndarray, i: int) -> float:
    n = len(y)
    ym, y0, yp = y[(i - 1) % n], y[i], y[(i + 1) % n]
    denom = ym - 2.0 * y0 + yp
    if denom == 0.0:
        return float(y0)
    p = 0.5 * (ym - yp) / denom
    return float(y0 - 0.25 * (ym - yp) * p)


def visibility_phase_scan(model: CouplingModel, samples: int = PHASE_SCAN_SAMPLES) -> float:
    """Visibility from the extrema of W over a uniform offset-phase scan.

    Kept as the brute-force cross-check of ``visibility``.
    """
    phi = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    w = emission_profile(model, phi / (2.0 * model.config.wavenumber))
    w_max = _parabolic_peak(w, int(np.argmax(w)))
    w_min = -_parabolic_peak(-w, int(np.argmin(w)))
    return (w_max - w_min) / (w_max + w_min)


def model_visibilities(config: TrapConfig, temperature: float, frequencies) -> np.ndarray:
    """Vectorised visibility over many COM frequencies.

    Uses the frequency-independent dimensionless chain: positions scale as
    w^(-2/3) and mode variances as 1/w^2.
    """
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    n = config.num_ions
    u = chain.dimensionless_equilibrium(n)
    if n == 1:
        mu, umat = np.ones(1), np.eye(1)
    else:
        mu, umat = chain._dimensionless_modes(n)
    k = config.wavenumber
    scales = chain.length_scale(config, 1.0) * freqs ** (-2.0 / 3.0)
    # per-ion variance at unit com frequency: sum_j U_ij^2 / mu_j
    shape = (umat**2) @ (1.0 / mu)
    var0 = 2.0 * CONSTANTS.boltzmann * temperature / config.ion_mass
    ion_var = var0 * shape[None, :] / freqs[:, None] ** 2
    dw = np.exp(-(k**2) * ion_var)
    phase = np.exp(2j * k * scales[:, None] * u[None, :])
    return np.abs(np.sum(dw * phase, axis=1)) / n


def _curve_point(config: TrapConfig, temperature: float, freq: float) -> float:
    try:
        return visibility(build_model(config, freq, temperature))
    except ChainSolverError as exc:
        raise ChainSolverError(f"at {angular_to_khz(freq):.4f} kHz: {exc}") from exc


def visibility_curve(config: TrapConfig, temperature: float, freq_grid) -> VisibilityCurve:
    """Model visibility on a grid of COM frequencies (rad/s, ascending)."""
    freqs = np.asarray(freq_grid, dtype=float)
    if freqs.ndim != 1 or freqs.size == 0:
        raise ValueError("frequency grid must be a non-empty 1-D sequence")
    if np.any(np.diff(freqs) <= 0):
        raise ValueError("frequency grid must be strictly ascending")
    workers = sweep_workers()
    if workers > 1 and freqs.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vis = list(pool.map(lambda f: _curve_point(config, temperature, f), freqs))
    else:
        vis = [_curve_point(config, temperature, f) for f in freqs]
    return VisibilityCurve(freqs, np.array(vis), np.zeros_like(freqs))


def mean_coupling(positions, wavenumber: float, theta) -> np.ndarray:
    """(1/N) sum_i |cos(k z_i + theta)| for each theta."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    kz = wavenumber * np.asarray(positions, dtype=float)
    return np.mean(np.abs(np.cos(kz[None, :] + th[:, None])), axis=1)


def optimise_mean_coupling(positions, wavenumber: float, samples: int = COUPLING_GRID) -> tuple[float, float]:
    """Maximise the mean |coupling| over the displacement phase in [0, pi).

    Dense grid followed by golden-section refinement around the best sample.
    """
    kz = np.mod(wavenumber * np.asarray(positions, dtype=float), math.pi)
    grid = np.linspace(0.0, math.pi, samples, endpoint=False)
    values = mean_coupling(kz, 1.0, grid)
    i = int(np.argmax(values))
    h = grid[1] - grid[0]

    def neg(t):
        return -float(mean_coupling(kz, 1.0, t)[0])

    best_t, best_v = grid[i], values[i]
    if values[(i - 1) % samples] < best_v and values[(i + 1) % samples] < best_v:
        res = optimize.minimize_scalar(
            neg, bracket=(grid[i] - h, grid[i], grid[i] + h), method="golden", tol=1e-12
        )
        if -res.fun >= best_v:
            best_t, best_v = float(res.x), -float(res.fun)
    return float(np.mod(best_t, math.pi)), float(best_v)


def coupling_report(positions, wavenumber: float, debye_waller=None) -> CouplingReport:
    positions = np.asarray(positions, dtype=float)
    theta, g = optimise_mean_coupling(positions, wavenumber)
    per_ion = np.abs(np.cos(wavenumber * positions + theta))
    g = float(np.mean(per_ion))
    emission_phase = alt = None
    if debye_waller is not None:
        s = np.sum(np.asarray(debye_waller) * np.exp(2j * wavenumber * positions))
        # W is maximal at phi = -arg(S); theta = phi / 2 modulo pi
        emission_phase = float(np.mod(-np.angle(s) / 2.0, math.pi))
        alt = float(mean_coupling(positions, wavenumber, emission_phase)[0])
    return CouplingReport(theta, g, per_ion, emission_phase, alt)


def average_coupling(model: CouplingModel) -> CouplingReport:
    return coupling_report(model.solution.positions, model.config.wavenumber, model.debye_waller)


def positions_from_spacings(spacings) -> np.ndarray:
    """Centred positions for a string with the given successive gaps."""
    z = np.concatenate([[0.0], np.cumsum(np.asarray(spacings, dtype=float))])
    return z - z.mean()


@dataclass(frozen=True, eq=False)
class FrequencyOptimum:
    frequency: float  # rad/s
    objective: str
    value: float
    solution: ChainSolution
    report: CouplingReport
    visibility: float


OBJECTIVES = {"max-visibility": "max-visibility", "visibility": "max-visibility",
              "max-g-tilde": "max-g-tilde", "g-tilde": "max-g-tilde"}


def optimise_frequency(config: TrapConfig, temperature: float, freq_range, objective: str = "max-visibility",
                       points: int = FREQ_GRID) -> FrequencyOptimum:
    """Global maximiser of visibility or g-tilde over a COM-frequency range.

    Dense grid, then bounded Brent refinement between the neighbours of the
    best grid point. Ties go to the lowest frequency.
    """
    try:
        objective = OBJECTIVES[objective]
    except KeyError:
        raise ValueError(f"unknown objective {objective!r}") from None
    lo, hi = (float(x) for x in freq_range)
    if not (math.isfinite(lo) and math.isfinite(hi) and 0 < lo < hi):
        raise ValueError(f"invalid frequency range ({lo!r}, {hi!r})")
    if points < 2:
        raise ValueError("need at least two grid points")

    if objective == "max-visibility":
        def score(freqs):
            return model_visibilities(config, temperature, freqs)
    else:
        u = chain.dimensionless_equilibrium(config.num_ions)
        k = config.wavenumber

        def score(freqs):
            return np.array([
                optimise_mean_coupling(u * chain.length_scale(config, f), k)[1]
                for f in np.atleast_1d(freqs)
            ])

    grid = np.linspace(lo, hi, points)
    values = score(grid)
    i = int(np.argmax(values))
    best_f, best_v = float(grid[i]), float(values[i])
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    res = optimize.minimize_scalar(lambda f: -float(score(f)[0]), bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-9 * best_f})
    if res.success and -res.fun > best_v:
        best_f, best_v = float(res.x), -float(res.fun)

    model = build_model(config, best_f, temperature)
    return FrequencyOptimum(
        frequency=best_f,
        objective=objective,
        value=best_v,
        solution=model.solution,
        report=average_coupling(model),
        visibility=visibility(model),
    )
