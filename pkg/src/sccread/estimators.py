"""Fitting routines for photon statistics and spin signals.

The centerpiece is :func:`fit_rates_mle`, which recovers the four
charge/photon rates from a single photon-count histogram by maximizing
a multinomial likelihood built on the analytic count distribution of
:mod:`sccread.ctmc`.  Around it sit weighted least-squares fits for the
power dependence of the rates, the spin-echo revival envelope, the
pulsed-excitation spin-polarization analysis, and the empirical
readout-noise/readout-time tradeoff curve.

All fitters return a :class:`FitResult`; optimization failures are
reported through ``converged=False`` rather than exceptions, while
structurally impossible fits (flat data, rank-deficient designs,
histograms a single Poisson already explains) raise eagerly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import erfc, erfcx, gammaln, xlogy
from scipy.stats import chi2

from .ctmc import RateSet, _conditional_probs
from .errors import (InvalidDomainError, NonIdentifiableError,
                     RankDeficiencyError)

__all__ = [
    "CountHistogram",
    "FitResult",
    "SaturationModel",
    "RatePowerLaws",
    "fit_rates_mle",
    "fit_charge_mixture",
    "fit_saturation",
    "fit_spin_echo",
    "fit_polarization",
    "fit_noise_curve",
    "pearson_residuals",
    "emg_profile",
]


@dataclass(frozen=True)
class CountHistogram:
    """Histogram of photon counts from repeated readout windows.

    ``counts[n]`` is the number of windows that produced exactly ``n``
    photons; the array is dense from ``n = 0`` and its last entry is
    nonzero (the canonical form, so that serialization round-trips are
    exact).  ``meta`` carries free-form context such as the optical
    power or a label.
    """

    counts: np.ndarray
    t_R: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("counts must be a nonempty 1-d array")
        if not np.issubdtype(c.dtype, np.integer):
            if np.any(c != np.floor(c)):
                raise ValueError("counts must be integers")
            c = c.astype(np.int64)
        else:
            c = c.astype(np.int64)
        if np.any(c < 0):
            raise ValueError("counts must be >= 0")
        if c.sum() <= 0:
            raise ValueError("histogram must contain at least one window")
        if c[-1] == 0:
            raise ValueError("counts must end at the last occupied bin")
        if not (self.t_R > 0.0) or not np.isfinite(self.t_R):
            raise ValueError(f"t_R must be positive and finite, got {self.t_R!r}")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n_windows(self) -> int:
        return int(self.counts.sum())

    @property
    def n_max(self) -> int:
        return self.counts.size - 1

    @property
    def occupied_bins(self) -> int:
        return int(np.count_nonzero(self.counts))

    def frequencies(self) -> np.ndarray:
        """Empirical probabilities per bin."""
        return self.counts / self.n_windows

    def mean(self) -> float:
        return float(np.arange(self.counts.size) @ self.counts) / self.n_windows

    @classmethod
    def from_samples(cls, samples, t_R: float, meta: dict | None = None) -> "CountHistogram":
        """Build the histogram of an array of per-window counts."""
        samples = np.asarray(samples)
        if samples.size == 0:
            raise ValueError("no samples")
        return cls(counts=np.bincount(samples), t_R=t_R, meta=meta or {})

    @classmethod
    def from_mapping(cls, mapping, t_R: float, meta: dict | None = None) -> "CountHistogram":
        """Build from a sparse {count: occurrences} mapping; absent bins
        are reconstructed as zeros."""
        items = {int(k): int(v) for k, v in mapping.items()}
        nonzero = [k for k, v in items.items() if v > 0]
        if not nonzero:
            raise ValueError("mapping holds no occupied bin")
        counts = np.zeros(max(nonzero) + 1, dtype=np.int64)
        for k, v in items.items():
            if k < 0:
                raise ValueError(f"negative count bin {k}")
            if v > 0:
                counts[k] = v
        return cls(counts=counts, t_R=t_R, meta=meta or {})


@dataclass(frozen=True)
class FitResult:
    """Outcome of a fit: point estimates, uncertainties, diagnostics.

    ``standard_errors`` keys are a subset of ``parameters`` keys.  One
    of ``log_likelihood`` / ``rss`` is set depending on the objective.
    ``n_evals`` counts objective evaluations and never exceeds the
    fitter's configured budget.
    """

    parameters: dict
    standard_errors: dict
    converged: bool
    n_evals: int
    log_likelihood: float | None = None
    rss: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        extra = set(self.standard_errors) - set(self.parameters)
        if extra:
            raise ValueError(f"standard_errors for unknown parameters: {sorted(extra)}")
        if self.n_evals < 0:
            raise ValueError("n_evals must be >= 0")
        object.__setattr__(self, "parameters", dict(self.parameters))
        object.__setattr__(self, "standard_errors", dict(self.standard_errors))
        object.__setattr__(self, "diagnostics", dict(self.diagnostics))


@dataclass(frozen=True)
class SaturationModel:
    """Power dependence of a rate under optical illumination.

    ``kind="linear_sat"``: ``a * P / (1 + P / P_sat) + dc`` — one-photon
    processes that saturate.  ``kind="quadratic_sat"``:
    ``a * P**2 / (1 + P / P_sat)`` — two-photon processes whose second
    step saturates.  ``P`` in microwatts, result in 1/s (or cps).
    """

    kind: str
    a: float
    P_sat: float
    dc: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear_sat", "quadratic_sat"):
            raise ValueError(f"unknown saturation kind {self.kind!r}")
        if self.a < 0.0 or not np.isfinite(self.a):
            raise ValueError("a must be finite and >= 0")
        if not (self.P_sat > 0.0) or not np.isfinite(self.P_sat):
            raise ValueError("P_sat must be positive and finite")
        if self.dc < 0.0 or not np.isfinite(self.dc):
            raise ValueError("dc must be finite and >= 0")
        if self.kind == "quadratic_sat" and self.dc != 0.0:
            raise ValueError("quadratic_sat carries no dc offset")

    def __call__(self, P):
        P = np.asarray(P, dtype=float)
        if np.any(P < 0.0):
            raise ValueError("optical power must be >= 0")
        sat = 1.0 + P / self.P_sat
        if self.kind == "linear_sat":
            out = self.a * P / sat + self.dc
        else:
            out = self.a * P ** 2 / sat
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class RatePowerLaws:
    """The four rates of :class:`RateSet` as functions of optical power."""

    g0: SaturationModel
    g1: SaturationModel
    gamma0: SaturationModel
    gamma1: SaturationModel

    def rates_at(self, power_uW: float) -> RateSet:
        """Evaluate all four laws at one power (microwatts)."""
        return RateSet(g0=self.g0(power_uW), g1=self.g1(power_uW),
                       gamma0=self.gamma0(power_uW), gamma1=self.gamma1(power_uW))


# ---------------------------------------------------------------------------
# rate estimation from a count histogram


def _poisson_gof_pvalue(counts: np.ndarray) -> float:
    """Pearson chi-square p-value of a single-Poisson fit to the
    histogram, with tail bins pooled to expected occupancy >= 5."""
    n_windows = counts.sum()
    ns = np.arange(counts.size, dtype=float)
    lam = float(ns @ counts) / n_windows
    logp = xlogy(ns, lam) - lam - gammaln(ns + 1.0)
    expected = n_windows * np.exp(logp)
    # pool adjacent bins until each pooled bin expects at least 5
    obs_pool, exp_pool = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(counts, expected):
        o_acc += o
        e_acc += e
        if e_acc >= 5.0:
            obs_pool.append(o_acc)
            exp_pool.append(e_acc)
            o_acc = e_acc = 0.0
    if o_acc or e_acc:
        if exp_pool:
            obs_pool[-1] += o_acc
            exp_pool[-1] += e_acc
        else:
            obs_pool.append(o_acc)
            exp_pool.append(e_acc)
    obs = np.array(obs_pool)
    exp = np.array(exp_pool)
    # account for leftover Poisson mass beyond the histogram support
    exp[-1] += max(0.0, n_windows - exp.sum())
    dof = obs.size - 2  # mean estimated from the same data
    if dof <= 0:
        return 1.0
    stat = float(np.sum((obs - exp) ** 2 / np.maximum(exp, 1e-12)))
    return float(chi2.sf(stat, dof))


def _poisson_mixture_em(counts: np.ndarray, iters: int = 200) -> tuple[float, float, float]:
    """Crude two-component Poisson mixture EM on a histogram.

    Returns ``(lam_lo, lam_hi, w_hi)``; used only to seed the full
    likelihood optimization.
    """
    ns = np.arange(counts.size, dtype=float)
    w = counts / counts.sum()
    mean = float(ns @ w)
    lam = np.array([max(0.3 * mean, 0.05), max(2.0 * mean, 0.5)])
    pi = np.array([0.5, 0.5])
    for _ in range(iters):
        logp = xlogy(ns[:, None], lam[None, :]) - lam[None, :] - gammaln(ns + 1.0)[:, None]
        logp += np.log(np.maximum(pi, 1e-12))[None, :]
        logp -= logp.max(axis=1, keepdims=True)
        resp = np.exp(logp)
        resp /= resp.sum(axis=1, keepdims=True)
        wk = (w[:, None] * resp).sum(axis=0)
        lam_new = (w[:, None] * resp * ns[:, None]).sum(axis=0) / np.maximum(wk, 1e-12)
        if np.allclose(lam_new, lam, rtol=1e-8, atol=1e-12):
            lam, pi = lam_new, wk
            break
        lam, pi = np.maximum(lam_new, 1e-6), wk
    order = np.argsort(lam)
    return float(lam[order[0]]), float(lam[order[1]]), float(pi[order[1]])


def _numeric_hessian(f, x: np.ndarray, h: float) -> np.ndarray:
    k = x.size
    H = np.empty((k, k))
    f0 = f(x)
    for i in range(k):
        for j in range(i, k):
            if i == j:
                xp = x.copy(); xp[i] += h
                xm = x.copy(); xm[i] -= h
                H[i, i] = (f(xp) - 2.0 * f0 + f(xm)) / h ** 2
            else:
                xpp = x.copy(); xpp[i] += h; xpp[j] += h
                xpm = x.copy(); xpm[i] += h; xpm[j] -= h
                xmp = x.copy(); xmp[i] -= h; xmp[j] += h
                xmm = x.copy(); xmm[i] -= h; xmm[j] -= h
                H[i, j] = H[j, i] = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h ** 2)
    return H


_START_SCALES = [(1.0, 1.0), (0.3, 1.0), (3.0, 1.0), (1.0, 0.3),
                 (1.0, 3.0), (0.3, 0.3), (3.0, 3.0), (0.3, 3.0)]


def fit_rates_mle(hist: CountHistogram, initial_mixture="steady",
                  n_starts: int = 8, max_nfev: int = 6000,
                  quad_tol: float = 1e-7) -> FitResult:
    """Maximum-likelihood estimate of all four rates from one histogram.

    The model distribution is the mixture of the two conditional count
    distributions; the mixture weight is either tied to the stationary
    law ``g0/(g0+g1)`` (``initial_mixture="steady"``) or held at a known
    preparation value (a float in [0, 1]).  Optimization runs in
    log-rate space with a multi-start Nelder-Mead (seeded by a
    two-component Poisson-mixture EM) followed by a tighter polish.

    Standard errors come from the inverse of the numerical Hessian of
    the negative log-likelihood at the optimum, mapped back to rate
    space.  Exhausting ``max_nfev`` yields ``converged=False`` rather
    than an exception.

    Raises
    ------
    NonIdentifiableError
        If fewer than two histogram bins are occupied, or a single
        Poisson distribution already explains the histogram (Pearson
        chi-square p-value above 5%), in which case no two-state
        blinking signature is present to fit.
    """
    if hist.occupied_bins < 2:
        raise NonIdentifiableError("histogram has fewer than two occupied bins")
    fixed_p = None
    if initial_mixture != "steady":
        fixed_p = float(initial_mixture)
        if not (0.0 <= fixed_p <= 1.0):
            raise ValueError(f"initial_mixture must be 'steady' or in [0, 1], got {initial_mixture!r}")
    gof_p = _poisson_gof_pvalue(hist.counts)
    if gof_p > 0.05:
        raise NonIdentifiableError(
            f"a single Poisson distribution already explains the histogram "
            f"(goodness-of-fit p = {gof_p:.3f}); the charge rates are not identifiable"
        )

    counts = hist.counts
    t_R = hist.t_R
    n_max = hist.n_max
    evals = [0]

    def nll(x):
        evals[0] += 1
        if np.any(np.abs(x) > 45.0):
            return 1e12
        g0, g1, gamma0, gamma1 = np.exp(x)
        try:
            pm, _ = _conditional_probs(g0, g1, gamma0, gamma1, t_R, n_max, quad_tol)
            pz, _ = _conditional_probs(g1, g0, gamma1, gamma0, t_R, n_max, quad_tol)
        except Exception:
            return 1e12
        p = fixed_p if fixed_p is not None else g0 / (g0 + g1)
        mix = p * pm + (1.0 - p) * pz
        value = -float(counts @ np.log(np.maximum(mix, 1e-300)))
        return value if np.isfinite(value) else 1e12

    lam_lo, lam_hi, w_hi = _poisson_mixture_em(counts)
    gamma1_0 = max(lam_hi / t_R, 1e-3)
    gamma0_0 = max(lam_lo / t_R, 1e-3)
    p0 = fixed_p if fixed_p is not None else min(max(w_hi, 0.05), 0.95)
    g_total = 1.0 / t_R
    base = np.log([max(p0 * g_total, 1e-3), max((1.0 - p0) * g_total, 1e-3),
                   gamma0_0, gamma1_0])
    nll_init = nll(base)

    best_x, best_f = base, nll_init
    for a, b in _START_SCALES[:n_starts]:
        start = base + np.log([a, b, 1.0, 1.0])
        budget = max_nfev - evals[0]
        if budget <= 10:
            break
        res = optimize.minimize(nll, start, method="Nelder-Mead",
                                options={"maxfev": min(400, budget),
                                         "xatol": 1e-3, "fatol": 1e-2})
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun

    budget = max_nfev - evals[0]
    polished = None
    if budget > 10:
        polished = optimize.minimize(nll, best_x, method="Nelder-Mead",
                                     options={"maxfev": min(600, budget),
                                              "xatol": 1e-5, "fatol": 1e-4})
        if polished.fun <= best_f:
            best_x, best_f = polished.x, polished.fun
    converged = polished is not None and bool(polished.success) and evals[0] <= max_nfev

    rates = np.exp(best_x)
    names = ("g0", "g1", "gamma0", "gamma1")
    ses = {}
    hess_note = None
    try:
        H = _numeric_hessian(nll, best_x, 1e-3)
        cov = np.linalg.inv(H)
        diag = np.diag(cov)
        if np.all(diag > 0.0):
            ses = {nm: float(r * np.sqrt(d)) for nm, r, d in zip(names, rates, diag)}
        else:
            hess_note = "observed information not positive definite"
    except np.linalg.LinAlgError:
        hess_note = "observed information singular"

    if (rates[0] + rates[1]) * t_R < 0.2:
        warnings.warn(
            "charge jumps are rare within one window ((g0+g1)*t_R < 0.2); "
            "the jump rates are only weakly identified", stacklevel=2)

    p_hat = fixed_p if fixed_p is not None else float(rates[0] / (rates[0] + rates[1]))
    fitted = RateSet(*[float(r) for r in rates])
    pm, _ = _conditional_probs(fitted.g0, fitted.g1, fitted.gamma0, fitted.gamma1,
                               t_R, n_max, quad_tol)
    pz, _ = _conditional_probs(fitted.g1, fitted.g0, fitted.gamma1, fitted.gamma0,
                               t_R, n_max, quad_tol)
    model = p_hat * pm + (1.0 - p_hat) * pz
    _, z = pearson_residuals(hist, model)
    diagnostics = {
        "ll_init": -nll_init,
        "ll_final": -best_f,
        "poisson_gof_pvalue": gof_p,
        "p_minus": p_hat,
        "mixture": "steady" if fixed_p is None else fixed_p,
        "max_abs_pearson": float(np.max(np.abs(z))) if z.size else 0.0,
    }
    if hess_note:
        diagnostics["hessian"] = hess_note
    return FitResult(parameters=dict(zip(names, (float(r) for r in rates))),
                     standard_errors=ses, converged=converged, n_evals=evals[0],
                     log_likelihood=-best_f, diagnostics=diagnostics)


def fit_charge_mixture(hist: CountHistogram, rates: RateSet,
                       max_nfev: int = 500) -> FitResult:
    """Estimate the initial NV- weight of a histogram at known rates.

    One-dimensional maximum likelihood over the mixture weight of the
    two fixed conditional count distributions.  A weight estimate at the
    boundary of [0, 1] is flagged in ``diagnostics["boundary"]``.
    """
    tol_q = 1e-9
    pm, _ = _conditional_probs(rates.g0, rates.g1, rates.gamma0, rates.gamma1,
                               hist.t_R, hist.n_max, tol_q)
    pz, _ = _conditional_probs(rates.g1, rates.g0, rates.gamma1, rates.gamma0,
                               hist.t_R, hist.n_max, tol_q)
    counts = hist.counts
    evals = [0]

    def nll(p):
        evals[0] += 1
        mix = p * pm + (1.0 - p) * pz
        return -float(counts @ np.log(np.maximum(mix, 1e-300)))

    nll_init = nll(0.5)
    res = optimize.minimize_scalar(nll, bounds=(0.0, 1.0), method="bounded",
                                   options={"xatol": 1e-9, "maxiter": max_nfev})
    p_hat = float(res.x)
    boundary = p_hat < 1e-6 or p_hat > 1.0 - 1e-6
    h = 1e-5
    pc = min(max(p_hat, h), 1.0 - h)
    curv = (nll(pc + h) - 2.0 * nll(pc) + nll(pc - h)) / h ** 2
    se = float(1.0 / np.sqrt(curv)) if curv > 0.0 else float("nan")
    return FitResult(parameters={"p_minus": p_hat},
                     standard_errors={"p_minus": se},
                     converged=bool(res.success), n_evals=evals[0],
                     log_likelihood=-float(res.fun),
                     diagnostics={"boundary": boundary,
                                  "ll_init": -nll_init, "ll_final": -float(res.fun)})


# ---------------------------------------------------------------------------
# weighted least-squares fits


def _ls_covariance(res, n_points: int, absolute: bool) -> np.ndarray:
    """Linearized parameter covariance of a least_squares result."""
    J = res.jac
    k = J.shape[1]
    if np.linalg.matrix_rank(J) < k:
        raise RankDeficiencyError("jacobian is rank deficient at the optimum")
    JTJ = J.T @ J
    cov = np.linalg.inv(JTJ)
    if not absolute:
        dof = max(n_points - k, 1)
        cov = cov * (2.0 * res.cost / dof)
    return cov


def fit_saturation(P, rate, err=None, kind: str = "linear_sat",
                   fix: dict | None = None, max_nfev: int = 10000) -> FitResult:
    """Weighted least-squares fit of a rate-versus-power saturation law.

    Parameters
    ----------
    P, rate : array-like
        Optical powers (microwatts) and measured rates (1/s or cps).
    err : array-like, optional
        One-sigma uncertainties of ``rate``.  When given, the fit is
        inverse-variance weighted and the parameter covariance is taken
        at face value; otherwise the residual variance is estimated.
    kind : {"linear_sat", "quadratic_sat"}
    fix : dict, optional
        Parameters to clamp, e.g. ``{"P_sat": 53.2}`` or ``{"dc": 268.0}``.

    Raises
    ------
    RankDeficiencyError
        If fewer distinct powers than free parameters, or the design is
        singular at the optimum.
    """
    P = np.asarray(P, dtype=float)
    y = np.asarray(rate, dtype=float)
    if P.shape != y.shape or P.ndim != 1:
        raise ValueError("P and rate must be 1-d arrays of equal length")
    if P.size < 3:
        raise ValueError("need at least 3 points")
    if np.any(P <= 0.0):
        raise ValueError("powers must be positive")
    w = None
    if err is not None:
        w = np.asarray(err, dtype=float)
        if w.shape != y.shape or np.any(w <= 0.0):
            raise ValueError("err must match rate and be positive")
    fix = dict(fix or {})
    if kind == "linear_sat":
        names = ["a", "P_sat", "dc"]
    elif kind == "quadratic_sat":
        names = ["a", "P_sat"]
        if "dc" in fix and fix["dc"] != 0.0:
            raise ValueError("quadratic_sat carries no dc offset")
        fix.pop("dc", None)
    else:
        raise ValueError(f"unknown saturation kind {kind!r}")
    unknown = set(fix) - set(names)
    if unknown:
        raise ValueError(f"cannot fix unknown parameters {sorted(unknown)}")
    free = [nm for nm in names if nm not in fix]
    if not free:
        raise ValueError("no free parameters left")
    if np.unique(P).size < len(free):
        raise RankDeficiencyError(
            f"{np.unique(P).size} distinct powers cannot constrain {len(free)} parameters")

    # initial guesses from the raw data shape
    init_all = {
        "P_sat": float(np.median(P)),
        "dc": float(max(y.min(), 1e-9)) if kind == "linear_sat" else 0.0,
        "a": float(max((y.max() - y.min()) / max(P.max(), 1e-9), 1e-9))
        if kind == "linear_sat" else float(max(np.median(y / P ** 2), 1e-9)),
    }
    lo = {"a": 0.0, "P_sat": 1e-6, "dc": 0.0}

    def assemble(theta):
        vals = dict(fix)
        vals.update(zip(free, theta))
        return vals

    def residual(theta):
        v = assemble(theta)
        model = SaturationModel(kind=kind, a=max(v["a"], 0.0),
                                P_sat=max(v["P_sat"], 1e-12), dc=max(v.get("dc", 0.0), 0.0))(P)
        r = model - y
        return r / w if w is not None else r

    x0 = np.array([init_all[nm] for nm in free])
    res = optimize.least_squares(residual, x0, bounds=([lo[nm] for nm in free], np.inf),
                                 max_nfev=max_nfev, xtol=1e-14, ftol=1e-14, gtol=1e-14)
    vals = assemble(res.x)
    cov = _ls_covariance(res, P.size, absolute=w is not None)
    ses = dict(zip(free, np.sqrt(np.maximum(np.diag(cov), 0.0))))
    params = {nm: float(vals[nm]) for nm in names}
    return FitResult(parameters=params,
                     standard_errors={nm: float(s) for nm, s in ses.items()},
                     converged=res.status > 0, n_evals=int(res.nfev),
                     rss=float(2.0 * res.cost),
                     diagnostics={"kind": kind, "fixed": {k: float(v) for k, v in fix.items()}})


def _echo_model(tau, A, B, n, T2, T_rev, T_dec, n_revivals=10):
    """Revival-modulated stretched-exponential echo envelope."""
    tau = np.asarray(tau, dtype=float)
    j = np.arange(n_revivals)[:, None]
    revivals = np.exp(-(((tau[None, :] - j * T_rev) / T_dec) ** 2)).sum(axis=0)
    return A + B * np.exp(-((tau / T2) ** n)) * revivals


def fit_spin_echo(tau, signal, err=None, max_nfev: int = 20000) -> FitResult:
    """Fit the spin-echo decay with collapse-and-revival structure.

    The model is a baseline plus a stretched-exponential envelope
    multiplied by a train of Gaussian revivals at multiples of the
    revival period.  The revival period creates many local optima, so
    the fit multi-starts over a period grid augmented by the strongest
    Fourier component of the detrended signal.

    Raises
    ------
    NonIdentifiableError
        If the signal is flat (no revival amplitude to fit).
    ValueError
        If fewer than 12 points are given.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(signal, dtype=float)
    if tau.shape != y.shape or tau.ndim != 1:
        raise ValueError("tau and signal must be 1-d arrays of equal length")
    if tau.size < 12:
        raise ValueError("need at least 12 points to constrain 6 parameters")
    if np.any(tau < 0.0):
        raise ValueError("tau must be >= 0")
    w = None
    if err is not None:
        w = np.asarray(err, dtype=float)
        if w.shape != y.shape or np.any(w <= 0.0):
            raise ValueError("err must match signal and be positive")
    if np.ptp(y) < 1e-9 * (abs(float(np.mean(y))) + 1.0):
        raise NonIdentifiableError("signal is flat; the revival amplitude is not identifiable")

    span = float(tau.max() - tau.min())
    order = np.argsort(tau)
    A0 = float(np.median(y))
    B0 = float(max(y.max() - A0, 1e-6))

    # Fourier guess for the revival period on a resampled uniform grid
    grid = np.linspace(tau.min(), tau.max(), 4 * tau.size)
    resampled = np.interp(grid, tau[order], y[order])
    spec = np.abs(np.fft.rfft(resampled - resampled.mean()))
    freqs = np.fft.rfftfreq(grid.size, grid[1] - grid[0])
    candidates = list(np.linspace(span / 12.0, span / 2.0, 10))
    if spec[1:].size:
        k = 1 + int(np.argmax(spec[1:]))
        if freqs[k] > 0.0:
            candidates.append(1.0 / freqs[k])

    def residual(theta):
        r = _echo_model(tau, *theta) - y
        return r / w if w is not None else r

    lower = [0.0, 0.0, 0.5, 1e-3 * span, 1e-2 * span, 1e-3 * span]
    upper = [2.0 * y.max() + 1.0, 2.0 * y.max() + 1.0, 4.0, 100.0 * span, 2.0 * span, span]
    best = None
    n_evals = 0
    for T_rev0 in candidates:
        x0 = np.clip([A0, B0, 2.0, span / 2.0, T_rev0, T_rev0 / 5.0], lower, upper)
        res = optimize.least_squares(residual, x0, bounds=(lower, upper),
                                     max_nfev=max_nfev // len(candidates),
                                     xtol=1e-14, ftol=1e-14, gtol=1e-14)
        n_evals += int(res.nfev)
        if best is None or res.cost < best.cost:
            best = res
    names = ("A", "B", "n", "T2", "T_rev", "T_dec")
    try:
        cov = _ls_covariance(best, tau.size, absolute=w is not None)
        ses = {nm: float(s) for nm, s in zip(names, np.sqrt(np.maximum(np.diag(cov), 0.0)))}
    except RankDeficiencyError:
        ses = {}
    params = dict(zip(names, (float(v) for v in best.x)))
    diagnostics = {"n_starts": len(candidates)}
    if span < params["T_rev"]:
        diagnostics["span_warning"] = "scan range shorter than the fitted revival period"
    return FitResult(parameters=params, standard_errors=ses,
                     converged=best.status > 0, n_evals=n_evals,
                     rss=float(2.0 * best.cost), diagnostics=diagnostics)


def emg_profile(t, t0: float, sigma: float, tau: float):
    """Exponentially modified Gaussian: Gaussian timing jitter of width
    ``sigma`` convolved with an exponential decay of lifetime ``tau``.

    Evaluated in the standard two-branch form that stays finite for
    arguments far on either side of ``t0``.
    """
    t = np.asarray(t, dtype=float)
    if sigma <= 0.0 or tau <= 0.0:
        raise ValueError("sigma and tau must be positive")
    u = t - t0
    z = (sigma / tau - u / sigma) / np.sqrt(2.0)
    out = np.empty_like(u)
    pos = z >= 0.0
    out[pos] = (0.5 / tau) * erfcx(z[pos]) * np.exp(-0.5 * (u[pos] / sigma) ** 2)
    out[~pos] = (0.5 / tau) * np.exp(0.5 * sigma ** 2 / tau ** 2 - u[~pos] / tau) * erfc(z[~pos])
    return out if out.ndim else float(out)


def _decay_design(times, t0, sigma, tau0, tau1):
    return np.column_stack([emg_profile(times, t0, sigma, tau0),
                            emg_profile(times, t0, sigma, tau1),
                            np.ones_like(times)])


def fit_polarization(times, decays, tau0: float, tau1: float,
                     max_nfev: int = 4000) -> FitResult:
    """Two-stage spin-polarization analysis of pulsed fluorescence decays.

    Each decay trace (one per spin-rotation duration) is modelled as a
    nonnegative combination of two exponentially modified Gaussians with
    the known lifetimes ``tau0`` and ``tau1`` plus a constant floor; the
    timing offset and jitter width are shared across traces and found by
    a Nelder-Mead search wrapped around per-trace linear solves (stage
    one).  The resulting population fractions are then fit with a cosine
    in the rotation duration (stage two); the fraction extrapolated to
    zero rotation is reported as ``p0_at_zero``.

    Parameters
    ----------
    times : array-like
        Sample times of every trace (shared), seconds or any one unit.
    decays : sequence of (t_rot, trace)
        Rotation durations and measured decay traces.
    tau0, tau1 : float
        Known fluorescence lifetimes of the two spin populations, in the
        same unit as ``times``.

    Notes
    -----
    If the stage-one fractions do not oscillate (peak-to-peak amplitude
    consistent with zero), the cosine frequency is not identifiable; the
    result then carries ``diagnostics["omega_unidentifiable"] = True``
    and ``p0_at_zero`` equal to the weighted mean fraction.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 8:
        raise ValueError("times must be a 1-d array with at least 8 samples")
    if tau0 <= 0.0 or tau1 <= 0.0 or tau0 == tau1:
        raise ValueError("lifetimes must be positive and distinct")
    decays = list(decays)
    if len(decays) < 6:
        raise ValueError("need at least 6 rotation durations")
    t_rot = np.array([d[0] for d in decays], dtype=float)
    traces = [np.asarray(d[1], dtype=float) for d in decays]
    for tr in traces:
        if tr.shape != times.shape:
            raise ValueError("every trace must match the shared time axis")
    evals = [0]

    def stage1(theta):
        evals[0] += 1
        sigma = max(abs(theta[0]), 1e-3 * min(tau0, tau1))
        t0 = theta[1]
        X = _decay_design(times, t0, sigma, tau0, tau1)
        total = 0.0
        for tr in traces:
            coef, rss, *_ = np.linalg.lstsq(X, tr, rcond=None)
            total += rss[0] if rss.size else float(np.sum((X @ coef - tr) ** 2))
        return total

    dt = float(np.median(np.diff(np.sort(times))))
    theta0 = np.array([max(2.0 * dt, 0.05 * min(tau0, tau1)), float(times[np.argmax(traces[0])])])
    res = optimize.minimize(stage1, theta0, method="Nelder-Mead",
                            options={"xatol": 1e-8, "fatol": 1e-12, "maxfev": max_nfev})
    sigma = max(abs(float(res.x[0])), 1e-3 * min(tau0, tau1))
    t0 = float(res.x[1])

    X = _decay_design(times, t0, sigma, tau0, tau1)
    fracs = np.empty(len(traces))
    frac_se = np.empty(len(traces))
    for i, tr in enumerate(traces):
        coef, rss, rank, _ = np.linalg.lstsq(X, tr, rcond=None)
        if rank < 3:
            raise RankDeficiencyError("decay design is rank deficient (lifetimes too similar?)")
        p0c, p1c = max(coef[0], 0.0), max(coef[1], 0.0)
        s = p0c + p1c
        if s <= 0.0:
            raise NonIdentifiableError(f"trace {i} carries no decay amplitude")
        fracs[i] = p0c / s
        dof = max(times.size - 3, 1)
        sig2 = (rss[0] if rss.size else float(np.sum((X @ coef - tr) ** 2))) / dof
        cov = sig2 * np.linalg.inv(X.T @ X)
        grad = np.array([p1c / s ** 2, -p0c / s ** 2])
        var = float(grad @ cov[:2, :2] @ grad)
        frac_se[i] = np.sqrt(max(var, 1e-20))

    diagnostics = {"sigma": sigma, "t0": t0, "rot_durations": t_rot.tolist(),
                   "fractions": fracs.tolist(), "fraction_errors": frac_se.tolist(),
                   "stage1_rss": float(res.fun)}
    weights = 1.0 / frac_se ** 2
    wmean = float(np.sum(weights * fracs) / np.sum(weights))

    flat = np.ptp(fracs) < max(3.0 * float(np.median(frac_se)), 1e-9)
    if not flat:
        span_r = float(t_rot.max() - t_rot.min())
        omega_cands = [2.0 * np.pi * k / span_r for k in (0.5, 1.0, 2.0, 3.0)]
        if t_rot.size > 4:
            o = np.argsort(t_rot)
            gridr = np.linspace(t_rot.min(), t_rot.max(), 4 * t_rot.size)
            spec = np.abs(np.fft.rfft(np.interp(gridr, t_rot[o], fracs[o]) - fracs.mean()))
            fr = np.fft.rfftfreq(gridr.size, gridr[1] - gridr[0])
            k = 1 + int(np.argmax(spec[1:])) if spec[1:].size else 0
            if k and fr[k] > 0.0:
                omega_cands.append(2.0 * np.pi * fr[k])
        cosine = lambda t, a, omega, c: a * np.cos(omega * t) + c
        best = None
        for om0 in omega_cands:
            try:
                popt, pcov = optimize.curve_fit(
                    cosine, t_rot, fracs, p0=[0.5 * np.ptp(fracs), om0, wmean],
                    sigma=frac_se, absolute_sigma=True, maxfev=2000)
            except RuntimeError:
                continue
            rss_c = float(np.sum(((cosine(t_rot, *popt) - fracs) / frac_se) ** 2))
            if best is None or rss_c < best[0]:
                best = (rss_c, popt, pcov)
        if best is None:
            flat = True
        else:
            _, popt, pcov = best
            a, omega, c = (float(v) for v in popt)
            if abs(a) < 2.0 * np.sqrt(max(pcov[0, 0], 0.0)):
                flat = True
    if flat:
        diagnostics["omega_unidentifiable"] = True
        params = {"p0_at_zero": wmean, "a": 0.0, "omega": float("nan"), "c": wmean,
                  "sigma": sigma, "t0": t0}
        ses = {"p0_at_zero": float(1.0 / np.sqrt(np.sum(weights))),
               "c": float(1.0 / np.sqrt(np.sum(weights)))}
        return FitResult(parameters=params, standard_errors=ses, converged=bool(res.success),
                         n_evals=evals[0], rss=float(res.fun), diagnostics=diagnostics)
    if a < 0.0:
        # at zero rotation the population sits in the *other* spin state
        diagnostics["inverted_polarization"] = True
    p0_zero = a + c
    var_p0 = float(pcov[0, 0] + pcov[2, 2] + 2.0 * pcov[0, 2])
    params = {"p0_at_zero": float(p0_zero), "a": a, "omega": abs(omega), "c": c,
              "sigma": sigma, "t0": t0}
    ses = {"p0_at_zero": float(np.sqrt(max(var_p0, 0.0))),
           "a": float(np.sqrt(max(pcov[0, 0], 0.0))),
           "omega": float(np.sqrt(max(pcov[1, 1], 0.0))),
           "c": float(np.sqrt(max(pcov[2, 2], 0.0)))}
    return FitResult(parameters=params, standard_errors=ses, converged=bool(res.success),
                     n_evals=evals[0], rss=float(res.fun), diagnostics=diagnostics)


def fit_noise_curve(t_R, sigma_R, t_unit: str = "us", max_nfev: int = 10000) -> FitResult:
    """Fit the readout-noise-versus-readout-time tradeoff
    ``sigma_R(t_R) = 1 + a * t_R**(-b)``.

    ``t_R`` must be expressed in the unit named by ``t_unit`` (the
    fitted ``a`` is only meaningful together with that unit, and the
    unit is echoed in the diagnostics).  All ``sigma_R`` must exceed 1,
    the quantum-projection floor of the parameterization.
    """
    t = np.asarray(t_R, dtype=float)
    s = np.asarray(sigma_R, dtype=float)
    if t.shape != s.shape or t.ndim != 1:
        raise ValueError("t_R and sigma_R must be 1-d arrays of equal length")
    if t.size < 3:
        raise ValueError("need at least 3 points")
    if np.any(t <= 0.0):
        raise InvalidDomainError("readout times must be positive")
    if np.any(s <= 1.0):
        raise InvalidDomainError("sigma_R must exceed 1 (the model floor)")
    # exact linearization: log(sigma - 1) = log a - b log t
    coeffs = np.polyfit(np.log(t), np.log(s - 1.0), 1)
    a0, b0 = float(np.exp(coeffs[1])), float(-coeffs[0])

    def residual(theta):
        return 1.0 + theta[0] * t ** (-theta[1]) - s

    res = optimize.least_squares(residual, [max(a0, 1e-9), b0],
                                 bounds=([0.0, -10.0], [np.inf, 10.0]),
                                 max_nfev=max_nfev, xtol=1e-14, ftol=1e-14, gtol=1e-14)
    cov = _ls_covariance(res, t.size, absolute=False)
    return FitResult(parameters={"a": float(res.x[0]), "b": float(res.x[1])},
                     standard_errors={"a": float(np.sqrt(max(cov[0, 0], 0.0))),
                                      "b": float(np.sqrt(max(cov[1, 1], 0.0)))},
                     converged=res.status > 0, n_evals=int(res.nfev),
                     rss=float(2.0 * res.cost), diagnostics={"t_unit": t_unit})


def pearson_residuals(hist: CountHistogram, model_probs: np.ndarray,
                      min_expected: float = 5.0):
    """Per-bin Pearson residuals ``(obs - exp) / sqrt(exp)`` of a model
    distribution against a histogram, restricted to bins whose expected
    occupancy is at least ``min_expected``.

    Returns ``(bins, z)`` arrays.
    """
    p = np.asarray(model_probs, dtype=float)
    size = min(p.size, hist.counts.size)
    expected = hist.n_windows * p[:size]
    obs = hist.counts[:size]
    keep = expected >= min_expected
    z = (obs[keep] - expected[keep]) / np.sqrt(expected[keep])
    return np.nonzero(keep)[0], z
