"""Charge-state classification and spin-readout performance figures.

A readout window is classified by thresholding its photon count: at or
above ``n_thresh`` counts the window is called NV-.  From the analytic
count distributions this module computes assignment probabilities, the
charge-readout fidelity, and the spin-readout noise of both the
spin-to-charge-conversion scheme and conventional fluorescence readout,
plus optimizers that sweep power, threshold, and window duration.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .ctmc import ChargeState, RateSet, _conditional_probs, steady_state
from .errors import NoContrastError, ZeroSuccessError
from .estimators import RatePowerLaws

__all__ = [
    "ReadoutPolicy",
    "SCCPopulations",
    "InitializationBudget",
    "ReadoutOptimum",
    "classify",
    "assignment_prob",
    "charge_fidelity",
    "optimize_readout",
    "fidelity_envelope",
    "scc_noise",
    "conventional_noise",
    "effective_populations",
    "initialization_model",
]


@dataclass(frozen=True)
class ReadoutPolicy:
    """How one readout window is taken and thresholded.

    ``t_R`` in seconds; windows with at least ``n_thresh`` detected
    photons are assigned NV-.  ``power`` (microwatts) is carried for
    bookkeeping when the policy came out of a power sweep.
    """

    t_R: float
    n_thresh: int
    power: float | None = None

    def __post_init__(self):
        if not (self.t_R > 0.0) or not np.isfinite(self.t_R):
            raise ValueError(f"t_R must be positive and finite, got {self.t_R!r}")
        if int(self.n_thresh) != self.n_thresh or self.n_thresh < 1:
            raise ValueError(f"n_thresh must be an integer >= 1, got {self.n_thresh!r}")
        object.__setattr__(self, "n_thresh", int(self.n_thresh))


def classify(n: int, policy: ReadoutPolicy) -> ChargeState:
    """Assign a charge state to a window with ``n`` detected photons."""
    if n < 0:
        raise ValueError("photon count must be >= 0")
    return ChargeState.NVM if n >= policy.n_thresh else ChargeState.NV0


def assignment_prob(rates: RateSet, policy: ReadoutPolicy,
                    initial: ChargeState, tol: float = 1e-10) -> float:
    """Probability that a window started in ``initial`` is assigned NV-.

    Only the head of the count distribution (n below threshold) is
    evaluated; the result is its complement, so an aggressive threshold
    does not force a long pmf computation.
    """
    if initial == ChargeState.NVM:
        args = (rates.g0, rates.g1, rates.gamma0, rates.gamma1)
    else:
        args = (rates.g1, rates.g0, rates.gamma1, rates.gamma0)
    head, _ = _conditional_probs(*args, policy.t_R, policy.n_thresh - 1, tol)
    return float(min(max(1.0 - head.sum(), 0.0), 1.0))


def charge_fidelity(rates: RateSet, policy: ReadoutPolicy,
                    prior: str | float = "balanced") -> float:
    """Average probability of assigning the charge state correctly.

    ``prior`` weights the two true states: ``"balanced"`` (the default)
    uses 1/2 each, ``"steady"`` uses the stationary occupation of the
    charge process, and a float is taken as the NV- prior weight.
    """
    if prior == "balanced":
        p = 0.5
    elif prior == "steady":
        p, _ = steady_state(rates)
    else:
        p = float(prior)
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"prior weight must lie in [0, 1], got {prior!r}")
    hit_minus = assignment_prob(rates, policy, ChargeState.NVM)
    false_minus = assignment_prob(rates, policy, ChargeState.NV0)
    return p * hit_minus + (1.0 - p) * (1.0 - false_minus)


@dataclass(frozen=True)
class ReadoutOptimum:
    """One row of a readout optimization: the best window duration and
    the fidelity it achieves for a given power and threshold."""

    power: float
    n_thresh: int
    t_R: float
    fidelity: float


def _best_window(rates: RateSet, n_thresh: int, bounds: tuple[float, float],
                 prior) -> tuple[float, float]:
    """Maximize charge fidelity over the window duration (log scale)."""
    lo, hi = bounds
    if not (0.0 < lo < hi):
        raise ValueError("t_R bounds must satisfy 0 < lo < hi")

    def neg(logt):
        policy = ReadoutPolicy(t_R=float(10.0 ** logt), n_thresh=n_thresh)
        return -charge_fidelity(rates, policy, prior)

    res = optimize.minimize_scalar(neg, bounds=(np.log10(lo), np.log10(hi)),
                                   method="bounded", options={"xatol": 1e-4})
    t_best = float(10.0 ** res.x)
    f_best = -float(res.fun)
    # the scalar search can stall on a flat interior; check the edges
    for t_edge in bounds:
        f_edge = charge_fidelity(rates, ReadoutPolicy(t_R=t_edge, n_thresh=n_thresh), prior)
        if f_edge > f_best:
            t_best, f_best = t_edge, f_edge
    return t_best, f_best


def optimize_readout(laws: RatePowerLaws, powers, thresholds,
                     t_R_bounds: tuple[float, float] = (1e-7, 1e-2),
                     prior: str | float = "balanced") -> list[ReadoutOptimum]:
    """Best window duration and fidelity for each (power, threshold).

    Returns one :class:`ReadoutOptimum` per combination, in sweep order.
    Combinations whose optimization fails are skipped, so the result can
    be empty.
    """
    rows = []
    for P in powers:
        rates = laws.rates_at(float(P))
        for n_thresh in thresholds:
            try:
                t_best, f_best = _best_window(rates, int(n_thresh), t_R_bounds, prior)
            except Exception:
                continue
            rows.append(ReadoutOptimum(power=float(P), n_thresh=int(n_thresh),
                                       t_R=t_best, fidelity=f_best))
    return rows


def pareto_front(rows) -> list[ReadoutOptimum]:
    """Rows not dominated in (shorter window, higher fidelity)."""
    ordered = sorted(rows, key=lambda r: (r.t_R, -r.fidelity))
    front = []
    best = -np.inf
    for r in ordered:
        if r.fidelity > best:
            front.append(r)
            best = r.fidelity
    return front


__all__.append("pareto_front")


def fidelity_envelope(laws: RatePowerLaws, t_R_max: float, powers, thresholds,
                      t_R_min: float = 1e-7, prior: str | float = "balanced") -> float:
    """Best achievable charge fidelity with the window capped at
    ``t_R_max``: the maximum over power, threshold, and any window
    duration up to the cap.

    Because the feasible set only grows with the cap, the envelope is
    non-decreasing in ``t_R_max``.
    """
    if not (t_R_max > t_R_min > 0.0):
        raise ValueError("need t_R_max > t_R_min > 0")
    best = 0.0
    for row in optimize_readout(laws, powers, thresholds,
                                t_R_bounds=(t_R_min, t_R_max), prior=prior):
        best = max(best, row.fidelity)
    return best


@dataclass(frozen=True)
class SCCPopulations:
    """Click probabilities of the spin-to-charge readout.

    ``beta0``/``beta1`` are the probabilities that the defect ends in
    NV- after the conversion step, given spin 0 or 1.  The tilde values
    fold in the imperfect charge readout: the probability that the
    window is *assigned* NV-.  With a perfect charge readout the tilde
    values equal the bare ones, which is the default.
    """

    beta0: float
    beta1: float
    beta0_tilde: float | None = None
    beta1_tilde: float | None = None

    def __post_init__(self):
        if self.beta0_tilde is None:
            object.__setattr__(self, "beta0_tilde", self.beta0)
        if self.beta1_tilde is None:
            object.__setattr__(self, "beta1_tilde", self.beta1)
        for nm in ("beta0", "beta1", "beta0_tilde", "beta1_tilde"):
            v = getattr(self, nm)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{nm} must lie in [0, 1], got {v!r}")

    @property
    def contrast(self) -> float:
        return abs(self.beta0_tilde - self.beta1_tilde)


def effective_populations(beta0: float, beta1: float, rates: RateSet,
                          policy: ReadoutPolicy) -> SCCPopulations:
    """Fold an imperfect charge readout into the conversion outcomes.

    The assignment is NV- with probability ``P(assign NV- | NV-)`` when
    conversion succeeded and ``P(assign NV- | NV0)`` when it failed, so
    each tilde value is a convex combination of the two conditional
    assignment probabilities.
    """
    hit = assignment_prob(rates, policy, ChargeState.NVM)
    false = assignment_prob(rates, policy, ChargeState.NV0)
    pops = SCCPopulations(beta0=beta0, beta1=beta1)
    return replace(pops,
                   beta0_tilde=beta0 * hit + (1.0 - beta0) * false,
                   beta1_tilde=beta1 * hit + (1.0 - beta1) * false)


def scc_noise(pops: SCCPopulations) -> float:
    """Spin-readout noise of the single-shot charge-mapped readout.

    One shot answers "NV-" with probability ``beta0_tilde`` (spin 0) or
    ``beta1_tilde`` (spin 1).  Relative to an ideal projective readout,
    the binomial spread of that answer inflates the per-shot phase
    uncertainty by

    ``sigma_R = sqrt(1 + 2 (b0(1-b0) + b1(1-b1)) / (b0 - b1)**2)``,

    which reaches 1 only for a perfect mapping (b0, b1) = (1, 0).
    """
    b0, b1 = pops.beta0_tilde, pops.beta1_tilde
    if b0 == b1:
        raise NoContrastError("beta0_tilde equals beta1_tilde; the readout carries no spin information")
    excess = 2.0 * (b0 * (1.0 - b0) + b1 * (1.0 - b1)) / (b0 - b1) ** 2
    return float(np.sqrt(1.0 + excess))


def conventional_noise(alpha0: float, alpha1: float) -> float:
    """Spin-readout noise of conventional fluorescence readout.

    ``alpha0``/``alpha1`` are the mean detected photon numbers per shot
    for spin 0 and spin 1.  Poisson shot noise of the two outcomes
    against their separation gives

    ``sigma_R = sqrt(1 + 2 (alpha0 + alpha1) / (alpha0 - alpha1)**2)``,

    approaching the projection limit 1 only when the two photon clouds
    are far apart compared to their shot noise.
    """
    if alpha0 < 0.0 or alpha1 < 0.0:
        raise ValueError("mean photon numbers must be >= 0")
    if alpha0 == alpha1:
        raise NoContrastError("alpha0 equals alpha1; the readout carries no spin information")
    excess = 2.0 * (alpha0 + alpha1) / (alpha0 - alpha1) ** 2
    return float(np.sqrt(1.0 + excess))


@dataclass(frozen=True)
class InitializationBudget:
    """Cost of heralded charge initialization.

    ``p_s`` is the per-attempt success probability of the herald;
    ``expected_attempts`` its reciprocal; ``effective_t_I`` the mean
    wall-clock time per successful initialization.
    """

    p_s: float
    expected_attempts: float
    effective_t_I: float
    fidelity_unconditional: float | None = None
    fidelity_conditional: float | None = None


def initialization_model(p_click: float, pump_duration: float = 0.0,
                         probe_duration: float = 0.0, overhead: float = 0.0,
                         fidelity_unconditional: float | None = None,
                         fidelity_conditional: float | None = None) -> InitializationBudget:
    """Budget of repeat-until-click charge initialization.

    Each attempt pumps, then probes for a herald click; attempts repeat
    until the click occurs, so the attempt count is geometric with mean
    ``1 / p_click`` and the mean time cost is the per-attempt duration
    times that factor.

    Raises
    ------
    ZeroSuccessError
        If ``p_click`` is zero (the herald never fires).
    """
    if not (0.0 <= p_click <= 1.0):
        raise ValueError(f"p_click must lie in [0, 1], got {p_click!r}")
    if p_click == 0.0:
        raise ZeroSuccessError("herald click probability is zero; initialization never succeeds")
    for nm, v in (("pump_duration", pump_duration), ("probe_duration", probe_duration),
                  ("overhead", overhead)):
        if v < 0.0 or not np.isfinite(v):
            raise ValueError(f"{nm} must be finite and >= 0")
    attempts = 1.0 / p_click
    per_attempt = pump_duration + probe_duration + overhead
    return InitializationBudget(p_s=p_click, expected_attempts=attempts,
                                effective_t_I=per_attempt * attempts,
                                fidelity_unconditional=fidelity_unconditional,
                                fidelity_conditional=fidelity_conditional)
