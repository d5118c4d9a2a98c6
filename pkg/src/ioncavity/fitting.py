"""Sinusoidal fits to cavity scans and (T, nu0) fits to visibility curves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .config import TWO_PI, TrapConfig
from .coupling import VisibilityCurve, model_visibilities
from .scan import ScanTrace


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScanFit:
    amplitude: float
    visibility: float
    phase: float
    period: float
    residual_rms: float
    visibility_uncertainty: float

    @property
    def significant(self) -> bool:
        """Contrast exceeds three standard errors."""
        return self.visibility > 3.0 * self.visibility_uncertainty


@dataclass(frozen=True, eq=False)
class CurveFit:
    temperature: float  # K
    nu_offset: float  # Hz
    covariance: np.ndarray  # over (temperature, nu_offset)
    chi_squared: float
    dof: int

    @property
    def temperature_error(self) -> float:
        return math.sqrt(self.covariance[0, 0])

    @property
    def nu_offset_error(self) -> float:
        return math.sqrt(self.covariance[1, 1])


def _covariance(jac: np.ndarray) -> np.ndarray:
    # a true inverse keeps weakly constrained directions large; pinv would zero them
    info = jac.T @ jac
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.full_like(info, np.inf)
    return 0.5 * (cov + cov.T)


def _sinusoid(params, x):
    a, v, phi, period = params
    return a * (1.0 + v * np.cos(TWO_PI * x / period + phi))


def fit_scan(trace: ScanTrace) -> ScanFit:
    """Least-squares fit of counts to A (1 + V cos(2 pi x / P + phi)).

    Starts from the Fourier component at the fringe period lambda/2 and keeps
    the period within 20 % of it. Residuals are Poisson-weighted by
    sqrt(max(counts, 1)); the covariance is not rescaled by the reduced chi^2.
    """
    x = np.asarray(trace.displacements, dtype=float)
    y = np.asarray(trace.counts, dtype=float)
    n = x.size
    period0 = trace.wavelength / 2.0
    if n < 8:
        raise FitError(f"need at least 8 points, got {n}")
    if (x[-1] - x[0]) * n / (n - 1) < period0 * (1 - 1e-9):
        raise FitError("scan does not cover a full fringe period")
    if not np.any(y > 0):
        raise FitError("no counts in trace")

    q = TWO_PI * x / period0
    design = np.column_stack([np.ones(n), np.cos(q), np.sin(q)])
    (c0, cc, cs), *_ = np.linalg.lstsq(design, y, rcond=None)
    amp = max(c0, 1e-12)
    # amplitude and period are fitted relative to their starting values so all
    # four parameters are order one and the solver is well conditioned
    start = np.array([1.0, math.hypot(cc, cs) / amp, math.atan2(-cs, cc), 1.0])
    sigma = np.sqrt(np.maximum(y, 1.0))
    xs = x / period0

    def resid(p):
        return (amp * p[0] * (1.0 + p[1] * np.cos(TWO_PI * xs / p[3] + p[2])) - y) / sigma

    lower = [0.0, -np.inf, -np.inf, 0.8]
    upper = [np.inf, np.inf, np.inf, 1.2]
    res = optimize.least_squares(resid, start, bounds=(lower, upper),
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    if not res.success:
        raise FitError(f"scan fit did not converge: {res.message} (cost {res.cost:.4g})")
    a, v, phi, period = res.x[0] * amp, res.x[1], res.x[2], res.x[3] * period0
    if v < 0:
        v, phi = -v, phi + math.pi
    phi = math.remainder(phi, TWO_PI)
    # visibility and phase are unscaled, so their block needs no rescaling
    cov = _covariance(res.jac)
    v_err = math.sqrt(max(cov[1, 1], 0.0))
    if v > 1.0 + 3.0 * v_err:
        raise FitError(f"fitted visibility {v:.4g} +- {v_err:.2g} exceeds 1")
    rms = math.sqrt(np.mean((_sinusoid((a, v, phi, period), x) - y) ** 2))
    return ScanFit(float(a), float(min(v, 1.0)), float(phi), float(period), rms, v_err)


def _chi2(config, data, sigma, temperature, nu0):
    model = model_visibilities(config, temperature, data.frequencies + TWO_PI * nu0)
    return float(np.sum(((model - data.visibilities) / sigma) ** 2))


def fit_visibility_curve(data: VisibilityCurve, config: TrapConfig, initial_T: float,
                         t_factors=(0.5, 0.75, 1.0, 1.5, 2.0), nu0_starts=(-2e3, 0.0, 2e3)) -> CurveFit:
    """Fit temperature and frequency offset to a visibility-vs-frequency curve.

    Nelder-Mead on chi^2 over (log T, nu0) from each start of the grid
    ``initial_T * t_factors`` x ``nu0_starts`` (Hz). Covariance is the inverse
    of J^T J for the weighted residuals at the optimum.
    """
    if len(data) < 3:
        raise FitError("need at least three data points")
    if not initial_T > 0:
        raise ValueError("initial_T must be positive")
    sigma = np.asarray(data.uncertainties, dtype=float)
    if np.all(sigma == 0):
        sigma = np.ones_like(sigma)
    elif np.any(sigma <= 0):
        raise FitError("uncertainties must all be positive")
    t_scale = initial_T

    def objective(p):
        value = _chi2(config, data, sigma, t_scale * math.exp(p[0]), p[1] * 1e3)
        return value if math.isfinite(value) else math.inf

    results = []
    for tf in t_factors:
        for nu0 in nu0_starts:
            p0 = np.array([math.log(tf), nu0 / 1e3])
            f0 = objective(p0)
            res = optimize.minimize(objective, p0, method="Nelder-Mead",
                                    options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 4000})
            best = (res.fun, res.x) if res.fun <= f0 else (f0, p0)
            results.append((best[0], t_scale * math.exp(best[1][0]), best[1][1] * 1e3, f0))
    finite = [r for r in results if math.isfinite(r[0])]
    if not finite:
        raise FitError("all starts failed; objective values: " + ", ".join(f"{r[0]:.4g}" for r in results))
    chi2 = min(r[0] for r in finite)
    # ties within round-off go to the lowest temperature
    chi2, temperature, nu0, _ = min((r for r in finite if r[0] <= chi2 * (1 + 1e-12) + 1e-300),
                                    key=lambda r: r[1])

    def resid(t, n0):
        model = model_visibilities(config, t, data.frequencies + TWO_PI * n0)
        return (model - data.visibilities) / sigma

    ht, hn = 1e-6 * temperature, 1.0
    jac = np.column_stack([
        (resid(temperature + ht, nu0) - resid(temperature - ht, nu0)) / (2 * ht),
        (resid(temperature, nu0 + hn) - resid(temperature, nu0 - hn)) / (2 * hn),
    ])
    cov = _covariance(jac)
    return CurveFit(float(temperature), float(nu0), cov, float(chi2), len(data) - 2)
