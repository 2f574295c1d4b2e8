"""AC magnetometry figures built on the spin-readout noise.

An echo sequence of phase-accumulation time ``tau`` converts a magnetic
field into a spin population, which the readout turns into a binary or
photon-number outcome.  Given the readout noise ``sigma_R`` (possibly a
function of the readout window duration) and the time cost of one shot,
this module evaluates the magnetic sensitivity and optimizes the
readout window against the empirical noise/duration tradeoff.

All quantities are SI: fields in tesla, times in seconds, sensitivity
in T/sqrt(Hz).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import NoContrastError
from .readout import SCCPopulations, scc_noise
from .units import _TIME

__all__ = [
    "HBAR",
    "MU_B",
    "G_FACTOR",
    "CONVENTIONAL_SIGMA_R",
    "NoiseCurve",
    "SensitivityBudget",
    "SensitivityOptimum",
    "echo_signal",
    "echo_signal_slope",
    "min_detectable_field",
    "sensitivity",
    "optimize_sensitivity",
]

HBAR = 1.054571817e-34  # J s
MU_B = 9.2740100783e-24  # J/T
G_FACTOR = 2.003  # electron g-factor of the defect spin

# measured conventional-readout noise levels for reference comparisons
CONVENTIONAL_SIGMA_R = {"nanobeam": 10.6, "bulk": 20.0}


def _phase(B: float, tau: float, g_factor: float, hbar: float, mu_b: float) -> float:
    return g_factor * mu_b * B * tau / (np.pi * hbar)


def echo_signal(B: float, tau: float, pops: SCCPopulations,
                g_factor: float = G_FACTOR, hbar: float = HBAR,
                mu_b: float = MU_B) -> float:
    """Mean readout outcome after an echo of duration ``tau`` in field ``B``.

    The accumulated phase rotates the spin-0 population as ``cos**2`` of
    the phase angle; the outcome interpolates between the two click
    probabilities accordingly.  At ``B = 0`` the signal equals
    ``beta0_tilde``.
    """
    theta = _phase(B, tau, g_factor, hbar, mu_b)
    p0 = np.cos(theta) ** 2
    return float(p0 * pops.beta0_tilde + (1.0 - p0) * pops.beta1_tilde)


def echo_signal_slope(B: float, tau: float, pops: SCCPopulations,
                      g_factor: float = G_FACTOR, hbar: float = HBAR,
                      mu_b: float = MU_B) -> float:
    """Analytic derivative of :func:`echo_signal` with respect to ``B``."""
    theta = _phase(B, tau, g_factor, hbar, mu_b)
    dtheta = g_factor * mu_b * tau / (np.pi * hbar)
    return float(-(pops.beta0_tilde - pops.beta1_tilde) * np.sin(2.0 * theta) * dtheta)


def min_detectable_field(pops: SCCPopulations, tau: float,
                         g_factor: float = G_FACTOR, hbar: float = HBAR,
                         mu_b: float = MU_B) -> float:
    """Single-shot field resolution at the steepest point of the fringe.

    The binary outcome at the half-contrast working point has standard
    deviation ``sqrt(q (1 - q))`` with ``q = (b0 + b1) / 2``; dividing
    by the maximal fringe slope gives

    ``dB = (pi hbar / (g mu_B tau)) * sigma_S / |b0 - b1|``

    with ``sigma_S = sqrt((b0 + b1)(2 - b0 - b1)) / 2``.  This equals
    ``pi hbar sigma_R / (2 g mu_B tau)`` with the readout noise of
    :func:`sccread.readout.scc_noise`.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    b0, b1 = pops.beta0_tilde, pops.beta1_tilde
    if b0 == b1:
        raise NoContrastError("equal click probabilities; no field dependence to resolve")
    s = b0 + b1
    sigma_s = 0.5 * np.sqrt(s * (2.0 - s))
    return float(np.pi * hbar / (g_factor * mu_b * tau) * sigma_s / abs(b0 - b1))


@dataclass(frozen=True)
class NoiseCurve:
    """Empirical readout noise versus readout window duration,
    ``sigma_R(t_R) = 1 + a * t_R**(-b)`` with ``t_R`` expressed in
    ``t_unit``.  The floor of 1 is the quantum projection limit."""

    a: float
    b: float
    t_unit: str = "us"

    def __post_init__(self):
        if self.a < 0.0 or not np.isfinite(self.a):
            raise ValueError("a must be finite and >= 0")
        if not np.isfinite(self.b):
            raise ValueError("b must be finite")
        if self.t_unit not in _TIME:
            raise ValueError(f"unknown time unit {self.t_unit!r}")

    def sigma(self, t_R: float) -> float:
        """Readout noise at window duration ``t_R`` (seconds)."""
        if t_R <= 0.0:
            raise ValueError("t_R must be positive")
        x = t_R / _TIME[self.t_unit]
        return float(1.0 + self.a * x ** (-self.b))


@dataclass(frozen=True)
class SensitivityBudget:
    """Everything that prices one measurement shot.

    ``tau`` is the phase-accumulation time, ``t_I`` the initialization
    cost per shot, and ``noise`` either a fixed readout noise value or a
    :class:`NoiseCurve` making it a function of the readout window.
    """

    tau: float
    t_I: float = 0.0
    noise: object = 1.0
    g_factor: float = G_FACTOR
    hbar: float = HBAR
    mu_b: float = MU_B

    def __post_init__(self):
        if not (self.tau > 0.0) or not np.isfinite(self.tau):
            raise ValueError("tau must be positive and finite")
        if self.t_I < 0.0 or not np.isfinite(self.t_I):
            raise ValueError("t_I must be finite and >= 0")
        if isinstance(self.noise, (int, float)) and self.noise < 1.0:
            raise ValueError("sigma_R below 1 is unphysical")

    def sigma_at(self, t_R: float) -> float:
        if isinstance(self.noise, NoiseCurve):
            return self.noise.sigma(t_R)
        return float(self.noise)


def sensitivity(budget: SensitivityBudget, t_R: float = 0.0) -> float:
    """AC magnetic sensitivity of repeated shots, in T/sqrt(Hz).

    ``eta = (pi hbar / (2 g mu_B)) * sigma_R * sqrt(tau + t_I + t_R) / tau``:
    the single-shot field resolution at phase-accumulation time ``tau``
    scaled by the square root of the full cycle duration.
    """
    if t_R < 0.0:
        raise ValueError("t_R must be >= 0")
    if t_R > 0.0:
        sigma = budget.sigma_at(t_R)
    elif isinstance(budget.noise, NoiseCurve):
        raise ValueError("t_R must be positive when the noise depends on it")
    else:
        sigma = float(budget.noise)
    cycle = budget.tau + budget.t_I + t_R
    return float(np.pi * budget.hbar / (2.0 * budget.g_factor * budget.mu_b)
                 * sigma * np.sqrt(cycle) / budget.tau)


@dataclass(frozen=True)
class SensitivityOptimum:
    """Best readout window for a budget: duration, sensitivity, and
    whether the optimum sits on a search boundary."""

    t_R: float
    eta: float
    at_boundary: bool


def optimize_sensitivity(budget: SensitivityBudget,
                         bounds: tuple[float, float] = (1e-7, 1e-2)) -> SensitivityOptimum:
    """Minimize the sensitivity over the readout window duration.

    A longer window lowers the readout noise but stretches the shot
    cycle; the optimum balances the two.  With a constant-noise budget
    the tradeoff disappears and the optimum pins to the lower bound,
    which the ``at_boundary`` flag reports.
    """
    lo, hi = bounds
    if not (0.0 < lo < hi):
        raise ValueError("bounds must satisfy 0 < lo < hi")

    def objective(logt):
        return sensitivity(budget, float(10.0 ** logt))

    res = optimize.minimize_scalar(objective, bounds=(np.log10(lo), np.log10(hi)),
                                   method="bounded", options={"xatol": 1e-6})
    t_best = float(10.0 ** res.x)
    eta_best = float(res.fun)
    for t_edge in bounds:
        eta_edge = sensitivity(budget, t_edge)
        if eta_edge < eta_best:
            t_best, eta_best = t_edge, eta_edge
    log_span = np.log10(hi) - np.log10(lo)
    frac = (np.log10(t_best) - np.log10(lo)) / log_span
    return SensitivityOptimum(t_R=t_best, eta=eta_best,
                              at_boundary=frac < 1e-3 or frac > 1.0 - 1e-3)
