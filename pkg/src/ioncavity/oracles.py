"""Independent brute-force checks for the main solvers.

Nothing here calls the Newton solver, the Hessian builder, the per-ion
spread formula or the grid/golden coupling optimiser it is meant to verify.
"""

from __future__ import annotations

import math

import numpy as np

from .config import CONSTANTS


def chain_energy(u: np.ndarray) -> float:
    """Dimensionless potential energy: harmonic trap plus pairwise Coulomb."""
    i, j = np.triu_indices(len(u), k=1)
    return 0.5 * float(np.sum(u**2)) + float(np.sum(1.0 / np.abs(u[i] - u[j])))


def _energy_gradient(u: np.ndarray) -> np.ndarray:
    grad = u.copy()
    for a in range(len(u)):
        for b in range(len(u)):
            if a != b:
                d = u[a] - u[b]
                grad[a] -= math.copysign(1.0, d) / (d * d)
    return grad


def gradient_descent_equilibrium(n: int, gtol: float = 1e-13, max_iter: int = 500_000) -> np.ndarray:
    """Minimise the chain energy by steepest descent.

    Armijo backtracking while the energy still resolves the decrease, then a
    fixed step (half the last accepted one) down to the gradient tolerance.
    """
    if n == 1:
        return np.zeros(1)
    u = np.arange(n, dtype=float) - 0.5 * (n - 1)
    energy = chain_energy(u)
    step = 0.1
    line_search = True
    for _ in range(max_iter):
        g = _energy_gradient(u)
        gnorm2 = float(g @ g)
        if math.sqrt(gnorm2) < gtol:
            return u
        if line_search and gnorm2 < 1e-12:
            line_search = False
            step *= 0.5
        if not line_search:
            u = u - step * g
            continue
        step *= 2.0
        while True:
            trial = u - step * g
            if np.all(np.diff(trial) > 0):
                e_trial = chain_energy(trial)
                if e_trial <= energy - 0.5 * step * gnorm2:
                    break
            step *= 0.5
        u, energy = trial, e_trial
    raise RuntimeError(f"gradient descent did not converge for N={n}")


def monte_carlo_spreads(ion_mass: float, com_frequency: float, mode_eigenvalues, mode_matrix,
                        temperature: float, samples: int = 1_000_000, seed: int = 0,
                        chunk: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
    """Sample Gaussian mode amplitudes, project to ion coordinates, and return
    the per-ion sample standard deviations with their standard errors."""
    omega = com_frequency * np.sqrt(np.asarray(mode_eigenvalues, dtype=float))
    sd = np.sqrt(2.0 * CONSTANTS.boltzmann * temperature / (ion_mass * omega**2))
    umat = np.asarray(mode_matrix, dtype=float)
    rng = np.random.Generator(np.random.PCG64(seed))
    n = len(sd)
    total = np.zeros(n)
    total_sq = np.zeros(n)
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        amps = rng.standard_normal((m, n)) * sd[None, :]
        z = amps @ umat.T
        total += z.sum(axis=0)
        total_sq += (z**2).sum(axis=0)
        done += m
    mean = total / samples
    var = (total_sq - samples * mean**2) / (samples - 1)
    std = np.sqrt(var)
    return std, std / np.sqrt(2.0 * (samples - 1))


def exact_mean_coupling_max(positions, wavenumber: float) -> tuple[float, float]:
    """Exact maximum of (1/N) sum |cos(k z_i + theta)| over theta.

    Between consecutive nodes of the ions the signs are fixed, so the sum is a
    single sinusoid whose maximum is found in closed form on each piece.
    """
    a = np.mod(wavenumber * np.asarray(positions, dtype=float), math.pi)
    n = len(a)
    breaks = np.sort(np.mod(math.pi / 2 - a, math.pi))
    edges = np.concatenate([breaks, [breaks[0] + math.pi]])
    best_t, best_v = 0.0, -1.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        signs = np.sign(np.cos(a + mid))
        c = np.sum(signs * np.exp(1j * a))
        candidates = [lo, hi]
        t_star = -np.angle(c)
        t_star = lo + np.mod(t_star - lo, 2 * math.pi)
        if t_star <= hi:
            candidates.append(t_star)
        for t in candidates:
            v = float(np.mean(np.abs(np.cos(a + t))))
            if v > best_v:
                best_t, best_v = float(np.mod(t, math.pi)), v
    return best_t, best_v if n else 0.0
