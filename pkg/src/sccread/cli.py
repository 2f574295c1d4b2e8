"""Command-line interface.

All commands read their inputs from one YAML run-configuration file
(``--config``) and write their outputs into ``--out-dir``.  Physical
quantities in the configuration are unit-tagged strings such as
``"5 ms"``, ``"40 kcps"`` or ``"820 nW"``; bare numbers are accepted
only for dimensionless values.  Each command that produces a table also
renders a PNG figure next to it unless ``--no-plot`` is given.

Exit codes:

* 0 — success
* 2 — configuration problem (missing file/section/key, bad units, bad values)
* 3 — input data file could not be parsed
* 4 — the fit or figure of merit is impossible or did not converge
      (no contrast, non-identifiable data, rank deficiency, optimizer
      failure)
* 5 — numerical failure inside the computation

``SCCREAD_OUT_DIR`` and ``SCCREAD_SEED`` override the output directory
and seed from the environment; explicit command-line flags beat both.
No other setting is read from the environment.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import dataio, plots
from .ctmc import (ChargeState, RateSet, pmf_analytic, pmf_mixture,
                   simulate_windows, steady_state)
from .errors import (ConfigError, DataFormatError, DegenerateRatesError,
                     InvalidDomainError, NoContrastError,
                     NonIdentifiableError, QuadratureError,
                     RankDeficiencyError, SccReadError, UnitError,
                     ZeroSuccessError)
from .estimators import (CountHistogram, RatePowerLaws, SaturationModel,
                         fit_noise_curve, fit_polarization, fit_rates_mle,
                         fit_saturation, fit_spin_echo)
from .magnetometry import (CONVENTIONAL_SIGMA_R, NoiseCurve,
                           SensitivityBudget, optimize_sensitivity,
                           sensitivity)
from .readout import (ReadoutPolicy, SCCPopulations, assignment_prob,
                      charge_fidelity, effective_populations,
                      fidelity_envelope, optimize_readout, pareto_front,
                      scc_noise)
from .units import parse_coefficient, parse_quantity

_COMMANDS = ("simulate", "fit-rates", "fit-power", "fit-echo",
             "fit-polarization", "fit-noise", "charge-fidelity",
             "optimize-readout", "scc-noise", "sensitivity")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sccread",
        description="Simulate, fit, and optimize spin-to-charge-conversion readout.",
        epilog="Exit codes: 0 ok, 2 config, 3 data parse, 4 fit failure, 5 numerical.")
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--out-dir", default=None,
                        help="output directory (default '.'; env SCCREAD_OUT_DIR)")
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed (env SCCREAD_SEED; config key 'seed'; default 12345)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="'json' additionally writes JSON versions of the tables")
    parser.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    parser.add_argument("command", choices=_COMMANDS, metavar="command",
                        help="one of: " + ", ".join(_COMMANDS))
    return parser


# ---------------------------------------------------------------------------
# configuration helpers


def _load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"configuration file {p} does not exist")
    try:
        cfg = yaml.safe_load(p.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {p}: {e}") from None
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p} must hold a mapping at the top level")
    return cfg


def _section(cfg: dict, name: str) -> dict:
    if name not in cfg:
        raise ConfigError(f"configuration is missing the '{name}' section")
    sec = cfg[name]
    if not isinstance(sec, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    return sec


_MISSING = object()


def _get(sec: dict, key: str, kind: str, default=_MISSING, where: str = ""):
    if key not in sec:
        if default is _MISSING:
            raise ConfigError(f"missing key '{where}{key}'")
        return default
    try:
        return parse_quantity(sec[key], kind)
    except UnitError as e:
        raise ConfigError(f"key '{where}{key}': {e}") from None


def _rates_from(sec: dict, where: str = "rates.") -> RateSet:
    if not isinstance(sec, dict):
        raise ConfigError(f"'{where.rstrip('.')}' must be a mapping of the four rates")
    vals = {nm: _get(sec, nm, "rate", where=where) for nm in ("g0", "g1", "gamma0", "gamma1")}
    try:
        return RateSet(**vals)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _law_from(sec: dict, where: str) -> SaturationModel:
    if not isinstance(sec, dict):
        raise ConfigError(f"'{where}' must be a mapping")
    kind = sec.get("kind")
    if kind not in ("linear_sat", "quadratic_sat"):
        raise ConfigError(f"'{where}.kind' must be linear_sat or quadratic_sat, got {kind!r}")
    coeff_kind = "rate/power" if kind == "linear_sat" else "rate/power^2"
    try:
        a = parse_coefficient(sec.get("a"), coeff_kind)
    except UnitError as e:
        raise ConfigError(f"key '{where}.a': {e}") from None
    P_sat = _get(sec, "P_sat", "power", where=where + ".")
    dc = _get(sec, "dc", "rate", default=0.0, where=where + ".")
    try:
        return SaturationModel(kind=kind, a=a, P_sat=P_sat, dc=dc)
    except ValueError as e:
        raise ConfigError(f"'{where}': {e}") from None


def _laws_from(sec: dict, where: str = "laws") -> RatePowerLaws:
    if not isinstance(sec, dict):
        raise ConfigError(f"'{where}' must be a mapping")
    return RatePowerLaws(**{nm: _law_from(_section(sec, nm), f"{where}.{nm}")
                            for nm in ("g0", "g1", "gamma0", "gamma1")})


def _sweep_from(spec, kind: str, where: str) -> np.ndarray:
    """A list of quantities, or {min, max, n, spacing: log|linear}."""
    if isinstance(spec, (list, tuple)):
        if not spec:
            raise ConfigError(f"'{where}' must not be empty")
        return np.array([parse_quantity(v, kind) for v in spec])
    if isinstance(spec, dict):
        lo = _get(spec, "min", kind, where=where + ".")
        hi = _get(spec, "max", kind, where=where + ".")
        n = spec.get("n", 10)
        if not isinstance(n, int) or n < 1:
            raise ConfigError(f"'{where}.n' must be a positive integer")
        if not (0.0 < lo <= hi):
            raise ConfigError(f"'{where}' needs 0 < min <= max")
        spacing = spec.get("spacing", "log")
        if spacing == "log":
            return np.geomspace(lo, hi, n)
        if spacing == "linear":
            return np.linspace(lo, hi, n)
        raise ConfigError(f"'{where}.spacing' must be log or linear")
    raise ConfigError(f"'{where}' must be a list of quantities or a min/max/n mapping")


def _policy_from(sec: dict, where: str = "policy.") -> ReadoutPolicy:
    t_R = _get(sec, "t_R", "time", where=where)
    n_thresh = sec.get("n_thresh")
    if not isinstance(n_thresh, int):
        raise ConfigError(f"'{where}n_thresh' must be an integer")
    try:
        return ReadoutPolicy(t_R=t_R, n_thresh=n_thresh)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _initial_from(value):
    aliases = {"NV-": ChargeState.NVM, "NVminus": ChargeState.NVM, "NVM": ChargeState.NVM,
               "NV0": ChargeState.NV0, "NVzero": ChargeState.NV0}
    if isinstance(value, str):
        if value in aliases:
            return aliases[value]
        if value == "steady":
            return "steady"
        raise ConfigError(f"unknown initial state {value!r} "
                          f"(use NV-, NV0, steady, or a mixture weight)")
    if isinstance(value, (int, float)) and 0.0 <= float(value) <= 1.0:
        return float(value)
    raise ConfigError(f"bad initial state {value!r}")


def _rates_or_laws(sec: dict) -> RateSet:
    if "rates" in sec:
        return _rates_from(sec["rates"])
    if "laws" in sec:
        power = _get(sec, "power", "power")
        return _laws_from(_section(sec, "laws")).rates_at(power)
    raise ConfigError("give either 'rates' or 'laws' plus 'power'")


def _input_path(sec: dict, base: Path) -> Path:
    if "input" not in sec:
        raise ConfigError("missing key 'input'")
    p = Path(sec["input"])
    if not p.is_absolute():
        p = base / p
    if not p.exists():
        raise DataFormatError("input file does not exist", path=p)
    return p


class _Ctx:
    """Resolved run context shared by all commands."""

    def __init__(self, args, cfg):
        out = args.out_dir or os.environ.get("SCCREAD_OUT_DIR") or cfg.get("out_dir") or "."
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        seed = args.seed
        if seed is None and "SCCREAD_SEED" in os.environ:
            try:
                seed = int(os.environ["SCCREAD_SEED"])
            except ValueError:
                raise ConfigError("SCCREAD_SEED must be an integer") from None
        if seed is None:
            seed = cfg.get("seed", 12345)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
        self.seed = seed
        self.json_too = args.format == "json"
        self.plot = not args.no_plot
        self.config_dir = Path(args.config).resolve().parent

    def emit_table(self, name: str, columns: dict, meta: dict) -> None:
        dataio.write_table_csv(self.out / f"{name}.csv", columns, meta)
        if self.json_too:
            doc = {"meta": meta, "columns": {k: dataio._jsonable(list(v))
                                             for k, v in columns.items()}}
            (self.out / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, ctx: _Ctx) -> int:
    sec = _section(cfg, "simulate")
    rates = _rates_from(_section(sec, "rates"))
    t_R = _get(sec, "t_R", "time")
    n_windows = sec.get("n_windows")
    if not isinstance(n_windows, int) or n_windows < 0:
        raise ConfigError("'simulate.n_windows' must be an integer >= 0")
    initial = _initial_from(sec.get("initial", "steady"))
    if initial == "steady":
        initial = steady_state(rates)[0]
    if n_windows == 0:
        (ctx.out / "histogram.csv").write_text(
            "# photon count histogram\n# t_R_s = {}\n# n_windows = 0\nn,occurrences\n".format(repr(t_R)))
        print("warning: n_windows = 0, wrote an empty histogram", file=sys.stderr)
        return 0
    counts, finals = simulate_windows(rates, t_R, initial, n_windows, ctx.seed)
    meta = {"seed": ctx.seed}
    if "label" in sec:
        meta["label"] = str(sec["label"])
    hist = CountHistogram.from_samples(counts, t_R=t_R, meta=meta)
    dataio.write_histogram_csv(ctx.out / "histogram.csv", hist)
    dataio.write_histogram_json(ctx.out / "histogram.json", hist)
    summary = {"n_windows": n_windows, "seed": ctx.seed, "t_R_s": t_R,
               "mean_count": float(counts.mean()),
               "final_minus_fraction": float(np.mean(finals == int(ChargeState.NVM)))}
    (ctx.out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    if ctx.plot:
        dist = (pmf_mixture(rates, t_R, initial) if isinstance(initial, float)
                else pmf_analytic(rates, t_R, initial))
        plots.plot_histogram(ctx.out / "histogram.png", hist, dist.probs)
    return 0


def _read_any_histogram(path: Path) -> CountHistogram:
    if path.suffix.lower() == ".json":
        return dataio.read_histogram_json(path)
    return dataio.read_histogram_csv(path)


def _finish_fit(ctx: _Ctx, name: str, result, extra_note: str = "") -> int:
    dataio.write_fit_result_json(ctx.out / f"{name}.json", result)
    if not result.converged:
        print(f"warning: {name} did not converge{extra_note}", file=sys.stderr)
        return 4
    return 0


def cmd_fit_rates(cfg, ctx: _Ctx) -> int:
    sec = _section(cfg, "fit_rates")
    hist = _read_any_histogram(_input_path(sec, ctx.config_dir))
    mixture = sec.get("initial_mixture", "steady")
    if mixture != "steady":
        mixture = parse_quantity(mixture, "none")
    result = fit_rates_mle(hist, initial_mixture=mixture,
                           n_starts=int(sec.get("n_starts", 8)),
                           max_nfev=int(sec.get("max_nfev", 6000)))
    fitted = RateSet(**{k: result.parameters[k] for k in ("g0", "g1", "gamma0", "gamma1")})
    p = result.diagnostics["p_minus"]
    model = pmf_mixture(fitted, hist.t_R, p, n_max=hist.n_max)
    ctx.emit_table("fit_rates_curve",
                   {"n": np.arange(hist.counts.size),
                    "observed_frequency": hist.frequencies(),
                    "model_probability": model.probs[:hist.counts.size]},
                   {"t_R_s": hist.t_R, "n_windows": hist.n_windows})
    if ctx.plot:
        plots.plot_histogram(ctx.out / "fit_rates.png", hist, model.probs)
    return _finish_fit(ctx, "fit_rates", result)


def cmd_fit_power(cfg, ctx: _Ctx) -> int:
    sec = _section(cfg, "fit_power")
    cols, meta = dataio.read_table_csv(_input_path(sec, ctx.config_dir),
                                       required=("power_uW", "rate_cps"))
    kind = sec.get("kind")
    if kind not in ("linear_sat", "quadratic_sat"):
        raise ConfigError("'fit_power.kind' must be linear_sat or quadratic_sat")
    fix = {}
    fix_sec = sec.get("fix", {})
    if not isinstance(fix_sec, dict):
        raise ConfigError("'fit_power.fix' must be a mapping")
    for key, val in fix_sec.items():
        if key == "P_sat":
            fix[key] = parse_quantity(val, "power")
        elif key == "dc":
            fix[key] = parse_quantity(val, "rate")
        else:
            raise ConfigError(f"'fit_power.fix' cannot fix {key!r}")
    err = cols.get("err_cps")
    result = fit_saturation(cols["power_uW"], cols["rate_cps"], err=err,
                            kind=kind, fix=fix)
    model = SaturationModel(kind=kind, **{k: result.parameters[k]
                                          for k in ("a", "P_sat", "dc") if k in result.parameters})
    grid = np.geomspace(cols["power_uW"].min(), cols["power_uW"].max(), 200)
    ctx.emit_table("fit_power_curve", {"power_uW": grid, "rate_cps": model(grid)},
                   {"kind": kind})
    if ctx.plot:
        plots.plot_curve_fit(ctx.out / "fit_power.png", cols["power_uW"], cols["rate_cps"],
                             grid, model(grid), "optical power (uW)", "rate (cps)",
                             yerr=err, logx=True, logy=True)
    return _finish_fit(ctx, "fit_power", result)


def cmd_fit_echo(cfg, ctx: _Ctx) -> int:
    from .estimators import _echo_model
    sec = _section(cfg, "fit_echo")
    cols, _ = dataio.read_table_csv(_input_path(sec, ctx.config_dir),
                                    required=("tau_s", "signal"))
    result = fit_spin_echo(cols["tau_s"], cols["signal"], err=cols.get("err"))
    p = result.parameters
    grid = np.linspace(cols["tau_s"].min(), cols["tau_s"].max(), 600)
    model = _echo_model(grid, p["A"], p["B"], p["n"], p["T2"], p["T_rev"], p["T_dec"])
    ctx.emit_table("fit_echo_curve", {"tau_s": grid, "signal": model}, {})
    if ctx.plot:
        plots.plot_curve_fit(ctx.out / "fit_echo.png", cols["tau_s"], cols["signal"],
                             grid, model, "total precession time (s)", "echo signal",
                             yerr=cols.get("err"))
    return _finish_fit(ctx, "fit_echo", result)


def cmd_fit_polarization(cfg, ctx: _Ctx) -> int:
    sec = _section(cfg, "fit_polarization")
    path = _input_path(sec, ctx.config_dir)
    try:
        doc = json.loads(path.read_text())
        times = np.asarray(doc["times_ns"], dtype=float)
        tau0 = float(doc["tau0_ns"])
        tau1 = float(doc["tau1_ns"])
        decays = [(float(d["t_rot_ns"]), np.asarray(d["trace"], dtype=float))
                  for d in doc["decays"]]
    except json.JSONDecodeError as e:
        raise DataFormatError(f"invalid JSON: {e.msg}", path=path, line=e.lineno,
                              column=e.colno) from None
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"bad polarization document: {e}", path=path) from None
    result = fit_polarization(times, decays, tau0, tau1)
    d = result.diagnostics
    t_rot = np.asarray(d["rot_durations"])
    fracs = np.asarray(d["fractions"])
    errs = np.asarray(d["fraction_errors"])
    p = result.parameters
    if np.isfinite(p["omega"]):
        model = p["a"] * np.cos(p["omega"] * t_rot) + p["c"]
    else:
        model = np.full_like(t_rot, p["c"])
    ctx.emit_table("fit_polarization_curve",
                   {"t_rot_ns": t_rot, "fraction": fracs,
                    "fraction_err": errs, "model": model}, {})
    if ctx.plot:
        order = np.argsort(t_rot)
        plots.plot_curve_fit(ctx.out / "fit_polarization.png", t_rot, fracs,
                             t_rot[order], model[order],
                             "spin rotation duration (ns)", "spin-0 fraction", yerr=errs)
    return _finish_fit(ctx, "fit_polarization", result)


def cmd_fit_noise(cfg, ctx: _Ctx) -> int:
    sec = _section(cfg, "fit_noise")
    cols, meta = dataio.read_table_csv(_input_path(sec, ctx.config_dir),
                                       required=("t_R", "sigma_R"))
    t_unit = sec.get("t_unit", meta.get("t_unit", "us"))
    result = fit_noise_curve(cols["t_R"], cols["sigma_R"], t_unit=t_unit)
    a, b = result.parameters["a"], result.parameters["b"]
    grid = np.geomspace(cols["t_R"].min(), cols["t_R"].max(), 200)
    ctx.emit_table("fit_noise_curve", {"t_R": grid, "sigma_R": 1.0 + a * grid ** (-b)},
                   {"t_unit": t_unit})
    if ctx.plot:
        plots.plot_curve_fit(ctx.out / "fit_noise.png", cols["t_R"], cols["sigma_R"],
                             grid, 1.0 + a * grid ** (-b),
                             f"readout window ({t_unit})", "readout noise",
                             logx=True, logy=True)
    return _finish_fit(ctx, "fit_noise", result)


def cmd_charge_fidelity(cfg, ctx: _Ctx) -> int:
    sec = _section(cfg, "charge_fidelity")
    rates = _rates_or_laws(sec)
    policy = _policy_from(_section(sec, "policy"))
    prior = sec.get("prior", "balanced")
    if isinstance(prior, str) and prior not in ("balanced", "steady"):
        raise ConfigError("'charge_fidelity.prior' must be balanced, steady, or a weight")
    fidelity = charge_fidelity(rates, policy, prior)
    doc = {"fidelity": fidelity,
           "hit_given_minus": assignment_prob(rates, policy, ChargeState.NVM),
           "false_given_zero": assignment_prob(rates, policy, ChargeState.NV0),
           "t_R_s": policy.t_R, "n_thresh": policy.n_thresh, "prior": prior,
           "rates_cps": {"g0": rates.g0, "g1": rates.g1,
                         "gamma0": rates.gamma0, "gamma1": rates.gamma1}}
    (ctx.out / "charge_fidelity.json").write_text(json.dumps(doc, indent=1) + "\n")
    print(f"charge fidelity {fidelity:.6f} at t_R = {policy.t_R:g} s, "
          f"threshold {policy.n_thresh}")
    return 0


def cmd_optimize_readout(cfg, ctx: _Ctx) -> int:
    sec = _section(cfg, "optimize_readout")
    laws = _laws_from(_section(sec, "laws"))
    powers = _sweep_from(sec.get("powers"), "power", "optimize_readout.powers")
    thresholds = sec.get("thresholds", [1, 2, 3])
    if (not isinstance(thresholds, list) or not thresholds
            or not all(isinstance(v, int) and v >= 1 for v in thresholds)):
        raise ConfigError("'optimize_readout.thresholds' must be a list of integers >= 1")
    bounds_cfg = sec.get("t_R_bounds", ["100 ns", "10 ms"])
    if not isinstance(bounds_cfg, list) or len(bounds_cfg) != 2:
        raise ConfigError("'optimize_readout.t_R_bounds' must be [lo, hi]")
    bounds = tuple(parse_quantity(v, "time") for v in bounds_cfg)
    prior = sec.get("prior", "balanced")
    rows = optimize_readout(laws, powers, thresholds, t_R_bounds=bounds, prior=prior)
    if not rows:
        print("warning: every (power, threshold) optimization failed", file=sys.stderr)
        return 4
    front = pareto_front(rows)
    ctx.emit_table("readout_scan",
                   {"power_uW": [r.power for r in rows],
                    "n_thresh": [r.n_thresh for r in rows],
                    "t_R_s": [r.t_R for r in rows],
                    "F_C": [r.fidelity for r in rows]},
                   {"t_R_lo_s": bounds[0], "t_R_hi_s": bounds[1]})
    ctx.emit_table("readout_front",
                   {"power_uW": [r.power for r in front],
                    "n_thresh": [r.n_thresh for r in front],
                    "t_R_s": [r.t_R for r in front],
                    "F_C": [r.fidelity for r in front]}, {})
    if "envelope_caps" in sec:
        caps = _sweep_from(sec["envelope_caps"], "time", "optimize_readout.envelope_caps")
        env = [fidelity_envelope(laws, float(c), powers, thresholds, t_R_min=bounds[0])
               for c in caps]
        ctx.emit_table("readout_envelope", {"t_R_cap_s": caps, "F_C": env}, {})
    if ctx.plot:
        plots.plot_readout_scan(ctx.out / "readout_scan.png", rows, front)
    # ties (within 1e-6) go to the smallest threshold
    top = max(r.fidelity for r in rows)
    best = min((r for r in rows if r.fidelity >= top - 1e-6),
               key=lambda r: (r.n_thresh, -r.fidelity))
    print(f"best fidelity {best.fidelity:.6f} at P = {best.power:g} uW, "
          f"threshold {best.n_thresh}, t_R = {best.t_R:.4g} s")
    return 0


def cmd_scc_noise(cfg, ctx: _Ctx) -> int:
    sec = _section(cfg, "scc_noise")
    if "beta0_tilde" in sec and "beta1_tilde" in sec:
        pops = SCCPopulations(
            beta0=parse_quantity(sec.get("beta0", sec["beta0_tilde"]), "none"),
            beta1=parse_quantity(sec.get("beta1", sec["beta1_tilde"]), "none"),
            beta0_tilde=parse_quantity(sec["beta0_tilde"], "none"),
            beta1_tilde=parse_quantity(sec["beta1_tilde"], "none"))
    elif "beta0" in sec and "beta1" in sec:
        beta0 = parse_quantity(sec["beta0"], "none")
        beta1 = parse_quantity(sec["beta1"], "none")
        if "policy" in sec:
            rates = _rates_or_laws(sec)
            policy = _policy_from(_section(sec, "policy"))
            pops = effective_populations(beta0, beta1, rates, policy)
        else:
            pops = SCCPopulations(beta0=beta0, beta1=beta1)
    else:
        raise ConfigError("'scc_noise' needs beta0/beta1 or beta0_tilde/beta1_tilde")
    sigma = scc_noise(pops)
    doc = {"sigma_R": sigma, "beta0": pops.beta0, "beta1": pops.beta1,
           "beta0_tilde": pops.beta0_tilde, "beta1_tilde": pops.beta1_tilde,
           "contrast": pops.contrast}
    (ctx.out / "scc_noise.json").write_text(json.dumps(doc, indent=1) + "\n")
    print(f"spin readout noise sigma_R = {sigma:.6f}")
    return 0


def _noise_from(sec, where: str, base: Path):
    if not isinstance(sec, dict):
        raise ConfigError(f"'{where}' must be a mapping")
    if "preset" in sec:
        name = sec["preset"]
        if name not in CONVENTIONAL_SIGMA_R:
            raise ConfigError(f"unknown noise preset {name!r} "
                              f"(known: {', '.join(CONVENTIONAL_SIGMA_R)})")
        return float(CONVENTIONAL_SIGMA_R[name])
    if "sigma_R" in sec:
        return parse_quantity(sec["sigma_R"], "none")
    if "fit" in sec:
        path = Path(sec["fit"])
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise DataFormatError("noise-curve fit file does not exist", path=path)
        result = dataio.read_fit_result_json(path)
        if "a" not in result.parameters or "b" not in result.parameters:
            raise DataFormatError("fit result lacks a/b noise-curve parameters",
                                  path=path)
        try:
            return NoiseCurve(a=result.parameters["a"], b=result.parameters["b"],
                              t_unit=result.diagnostics.get("t_unit", "us"))
        except ValueError as e:
            raise ConfigError(f"'{where}': {e}") from None
    if "a" in sec and "b" in sec:
        try:
            return NoiseCurve(a=parse_quantity(sec["a"], "none"),
                              b=parse_quantity(sec["b"], "none"),
                              t_unit=sec.get("t_unit", "us"))
        except ValueError as e:
            raise ConfigError(f"'{where}': {e}") from None
    raise ConfigError(f"'{where}' needs a preset, a sigma_R, a fit file, "
                      f"or a/b curve coefficients")


def cmd_sensitivity(cfg, ctx: _Ctx) -> int:
    sec = _section(cfg, "sensitivity")
    taus = _sweep_from(sec.get("tau"), "time", "sensitivity.tau")
    schemes = sec.get("schemes")
    if not isinstance(schemes, list) or not schemes:
        raise ConfigError("'sensitivity.schemes' must be a nonempty list")
    bounds_cfg = sec.get("t_R_bounds", ["100 ns", "10 ms"])
    bounds = tuple(parse_quantity(v, "time") for v in bounds_cfg)
    out_cols = {"tau_s": [], "t_R_opt_s": [], "eta_T_per_sqrtHz": [],
                "scheme": [], "sigma_R": []}
    curves = {}
    summaries = {}
    for i, sch in enumerate(schemes):
        if not isinstance(sch, dict) or "name" not in sch:
            raise ConfigError(f"'sensitivity.schemes[{i}]' must be a mapping with a name")
        name = str(sch["name"])
        noise = _noise_from(_section(sch, "noise"), f"schemes[{i}].noise",
                            ctx.config_dir)
        t_I = _get(sch, "t_I", "time", default=0.0, where=f"schemes[{i}].")
        fixed_t_R = _get(sch, "t_R", "time", default=None, where=f"schemes[{i}].")
        etas = []
        for tau in taus:
            budget = SensitivityBudget(tau=float(tau), t_I=t_I, noise=noise)
            if fixed_t_R is not None:
                t_R, eta = fixed_t_R, sensitivity(budget, fixed_t_R)
            elif isinstance(noise, NoiseCurve):
                opt = optimize_sensitivity(budget, bounds=bounds)
                t_R, eta = opt.t_R, opt.eta
            else:
                t_R, eta = 0.0, sensitivity(budget, 0.0)
            out_cols["tau_s"].append(float(tau))
            out_cols["t_R_opt_s"].append(float(t_R))
            out_cols["eta_T_per_sqrtHz"].append(float(eta))
            out_cols["scheme"].append(name)
            out_cols["sigma_R"].append(budget.sigma_at(t_R) if t_R > 0 else float(noise))
            etas.append(float(eta))
        curves[name] = (taus, np.array(etas))
        k = int(np.argmin(etas))
        summaries[name] = {"best_tau_s": float(taus[k]), "best_eta_T_per_sqrtHz": etas[k]}
    ctx.emit_table("sensitivity", out_cols, {"t_R_lo_s": bounds[0], "t_R_hi_s": bounds[1]})
    (ctx.out / "sensitivity_summary.json").write_text(json.dumps(summaries, indent=1) + "\n")
    if ctx.plot:
        plots.plot_sensitivity(ctx.out / "sensitivity.png", curves)
    for name, s in summaries.items():
        print(f"{name}: best eta {s['best_eta_T_per_sqrtHz'] * 1e9:.3f} nT/sqrt(Hz) "
              f"at tau = {s['best_tau_s']:g} s")
    return 0


_DISPATCH = {
    "simulate": cmd_simulate,
    "fit-rates": cmd_fit_rates,
    "fit-power": cmd_fit_power,
    "fit-echo": cmd_fit_echo,
    "fit-polarization": cmd_fit_polarization,
    "fit-noise": cmd_fit_noise,
    "charge-fidelity": cmd_charge_fidelity,
    "optimize-readout": cmd_optimize_readout,
    "scc-noise": cmd_scc_noise,
    "sensitivity": cmd_sensitivity,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        ctx = _Ctx(args, cfg)
        return _DISPATCH[args.command](cfg, ctx)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except DataFormatError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except (NonIdentifiableError, RankDeficiencyError, InvalidDomainError,
            NoContrastError, ZeroSuccessError, DegenerateRatesError) as e:
        print(f"fit failure: {e}", file=sys.stderr)
        return 4
    except (QuadratureError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 5
    except SccReadError as e:
        print(f"error: {e}", file=sys.stderr)
        return 5


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
