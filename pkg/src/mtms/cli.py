"""Command line front end.

Exit codes: 0 success, 1 numerical failure, 2 usage or config error.
Configs are JSON objects carrying ``"schema": 1``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import figures
from .dynamics import (
    GateScenario,
    effective_heating_factor,
    fidelity_detuning,
    fidelity_heating,
    leading_order_budget,
    trajectory,
)
from .lindblad import SimConfig, evolve, sweep
from .presets import PRESETS
from .tomography import (
    CountsRecord,
    ParityDataset,
    SpamMap,
    apply_spam,
    bell_fidelity_estimate,
    bell_fidelity_stderr,
    mle_parity_fit,
    mle_populations,
    sample_counts,
    simulate_parity_dataset,
)
from .tones import NumericError, constraint_residuals, optimize_tones

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


# --- config handling ------------------------------------------------------

_SCENARIO_KEYS = {
    "n_tones", "delta_hz", "delta_rad_per_s", "frac_detuning", "detuning_rad_per_s",
    "heating_rate", "nbar", "fock_truncation", "step_tolerance", "basis",
    "detuning_offset_rad_per_s",
}


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if data.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"config needs \"schema\": {SCHEMA_VERSION}, got {data.get('schema')!r}")
    return data


def check_keys(cfg: dict, required: set, allowed: set):
    missing = sorted(k for k in required if k not in cfg)
    unknown = sorted(k for k in cfg if k not in allowed | required | {"schema"})
    problems = []
    if missing:
        problems.append(f"missing required keys: {', '.join(missing)}")
    if unknown:
        problems.append(f"unknown keys: {', '.join(unknown)}")
    if problems:
        raise ConfigError("; ".join(problems))


def _delta_from(cfg, preset):
    if "delta_rad_per_s" in cfg:
        return float(cfg["delta_rad_per_s"])
    if "delta_hz" in cfg:
        return 2 * math.pi * float(cfg["delta_hz"])
    if preset is not None:
        return preset.delta
    raise ConfigError("missing required keys: delta_hz (or delta_rad_per_s, or --preset paper)")


def scenario_from(cfg: dict, preset=None) -> GateScenario:
    delta = _delta_from(cfg, preset)
    ts = optimize_tones(int(cfg["n_tones"]), delta)
    if "detuning_rad_per_s" in cfg and "frac_detuning" in cfg:
        raise ConfigError("give either frac_detuning or detuning_rad_per_s, not both")
    det = float(cfg.get("detuning_rad_per_s", float(cfg.get("frac_detuning", 0.0)) * delta))
    nbar = cfg.get("nbar", preset.nbar_cold if preset is not None else 0.0)
    return GateScenario(ts, det, float(cfg.get("heating_rate", 0.0)), float(nbar))


def simconfig_from(cfg: dict, preset=None) -> SimConfig:
    sc = scenario_from(cfg, preset)
    kwargs = {}
    if cfg.get("fock_truncation") is not None:
        kwargs["fock_truncation"] = int(cfg["fock_truncation"])
    if "step_tolerance" in cfg:
        kwargs["step_tolerance"] = float(cfg["step_tolerance"])
    if "basis" in cfg:
        kwargs["basis"] = cfg["basis"]
    if "detuning_offset_rad_per_s" in cfg:
        kwargs["detuning_offset"] = float(cfg["detuning_offset_rad_per_s"])
    return SimConfig(sc, **kwargs)


# --- output helpers -------------------------------------------------------

@contextmanager
def partial_file(path):
    """Write to ``path.partial`` and rename on success; interrupted runs keep the partial."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".partial")
    with open(tmp, "w", newline="") as fh:
        yield fh
    os.replace(tmp, path)


def write_rows(path, rows, columns=None):
    columns = columns or list(rows[0].keys())
    with partial_file(path) as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})


def emit_json(obj, out=None):
    text = json.dumps(obj, indent=2, default=_jsonable) + "\n"
    if out:
        with partial_file(out) as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _progress(label):
    def report(done, total):
        print(f"[{label}] {done}/{total}", file=sys.stderr, flush=True)

    return report


def _threads(args):
    return args.threads if args.threads else (os.cpu_count() or 1)


def _preset(args):
    return PRESETS[args.preset] if args.preset else None


# --- commands -------------------------------------------------------------

def cmd_tones(args):
    if args.n is None or args.n < 1:
        raise ConfigError("--n must be a positive integer")
    preset = _preset(args)
    delta = 2 * math.pi * args.delta_hz if args.delta_hz else (preset.delta if preset else 1.0)
    ts = optimize_tones(args.n, delta)
    ent, clo = constraint_residuals(ts)
    out = ts.to_dict()
    out.update(
        entangling_residual=ent,
        closure_residual=clo,
        heating_factor=effective_heating_factor(ts),
        gate_time_s=ts.gate_time,
    )
    emit_json(out, args.out)


def _scenario_args(args):
    cfg = load_config(args.config) if args.config else {"schema": SCHEMA_VERSION}
    for key in ("n_tones", "delta_hz", "frac_detuning", "heating_rate", "nbar"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    check_keys(cfg, {"n_tones"}, _SCENARIO_KEYS | {"n_samples"})
    return cfg


def cmd_trajectory(args):
    cfg = _scenario_args(args)
    sc = scenario_from(cfg, _preset(args))
    tr = trajectory(sc, int(cfg.get("n_samples", args.samples)))
    if args.out:
        with partial_file(args.out) as fh:
            tr.to_csv(fh)
    else:
        tr.to_csv(sys.stdout)


def cmd_fidelity(args):
    cfg = _scenario_args(args)
    sc = scenario_from(cfg, _preset(args))
    budget = leading_order_budget(sc)
    emit_json(
        {
            "scenario": {**sc.tones.to_dict(), "detuning_rad_per_s": sc.detuning_error,
                         "heating_rate": sc.heating_rate, "nbar": sc.nbar},
            "fidelity_heating": fidelity_heating(sc.tones, sc.heating_rate),
            "fidelity_detuning": fidelity_detuning(sc),
            "leading_order": {
                "e_heating": budget.e_heating,
                "e_detuning": budget.e_detuning,
                "in_regime": budget.in_regime,
            },
        },
        args.out,
    )


def cmd_simulate(args):
    if not args.config:
        raise ConfigError("simulate needs --config")
    cfg = load_config(args.config)
    check_keys(cfg, {"n_tones"}, _SCENARIO_KEYS)
    sim = simconfig_from(cfg, _preset(args))
    start = time.perf_counter()
    _, report = evolve(sim)
    out = report.to_dict()
    out["wall_time_s"] = time.perf_counter() - start
    out["config"] = {k: v for k, v in cfg.items()}
    emit_json(out, args.out)


def cmd_sweep(args):
    if not args.config:
        raise ConfigError("sweep needs --config")
    cfg = load_config(args.config)
    check_keys(cfg, {"n_tones", "vary", "values"}, _SCENARIO_KEYS)
    vary = cfg["vary"]
    if vary not in ("heating_rate", "frac_detuning", "nbar"):
        raise ConfigError("vary must be heating_rate, frac_detuning or nbar")
    tone_counts = cfg["n_tones"] if isinstance(cfg["n_tones"], list) else [cfg["n_tones"]]
    grid = []
    for n in tone_counts:
        for v in cfg["values"]:
            point = {k: val for k, val in cfg.items() if k not in ("vary", "values")}
            point["n_tones"] = n
            point[vary] = v
            grid.append(simconfig_from(point, _preset(args)))
    rows = sweep(grid, workers=_threads(args), progress=_progress("sweep"))
    if not args.out:
        raise ConfigError("sweep needs --out")
    write_rows(args.out, [r.to_dict() for r in rows])


def cmd_figure(args):
    out = Path(args.out or ".")
    overrides = load_config(args.config) if args.config else {}
    preset = PRESETS[args.preset or "paper"]
    delta = _delta_from(overrides, preset)
    workers = _threads(args)
    which = args.which
    if which in ("fig1b", "fig1c"):
        x = float(overrides.get("frac_detuning", 0.0 if which == "fig1b" else 0.05))
        trajs, summary = figures.fig1(x, n_samples=int(overrides.get("n_samples", 401)), delta=delta)
        for n, tr in trajs.items():
            with partial_file(out / f"{which}_N{n}.csv") as fh:
                tr.to_csv(fh)
        emit_json(summary, out / f"{which}_summary.json")
    elif which == "fig2":
        rates = np.asarray(overrides.get("heating_rates", np.linspace(0, 300, 7)), dtype=float)
        data = figures.fig2(rates, nbar=float(overrides.get("nbar", preset.nbar_cold)), delta=delta,
                            fock_truncation=overrides.get("fock_truncation"), workers=workers,
                            progress=_progress("fig2"))
        for label, rows in data.items():
            write_rows(out / f"fig2_{label}.csv", rows)
    elif which == "fig3":
        xs = np.asarray(overrides.get("frac_detunings", np.linspace(-0.2, 0.2, 9)), dtype=float)
        data = figures.fig3(xs, nbar=float(overrides.get("nbar", preset.nbar_cold)), delta=delta,
                            fock_truncation=overrides.get("fock_truncation"), workers=workers,
                            progress=_progress("fig3"))
        for label, rows in data.items():
            write_rows(out / f"fig3_{label}.csv", rows)
    elif which == "fig4-analytic":
        curves, summary = figures.fig4_analytic(
            float(overrides.get("frac_detuning", 0.03)),
            nbar=float(overrides.get("nbar", preset.nbar_doppler)),
            delta=delta,
        )
        for label, rows in curves.items():
            write_rows(out / f"fig4_{label}.csv", rows)
        emit_json(summary, out / "fig4_summary.json")
    else:  # argparse restricts choices
        raise ConfigError(f"unknown figure {which!r}")


def _bell_rho(amplitude, phase0, pop_even):
    # (|00> + e^{i b}|11>) coherence chosen so the parity curve is A cos(2 phi + phase0)
    from .tomography import parity_scan_probabilities

    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = rho[3, 3] = pop_even / 2
    rho[1, 1] = rho[2, 2] = (1 - pop_even) / 2
    # find the Bell phase whose scan has the requested offset
    probe = np.zeros((4, 4), dtype=complex)
    probe[0, 0] = probe[3, 3] = 0.5
    probe[3, 0] = 0.5
    probe[0, 3] = 0.5
    phis = np.array([0.0, math.pi / 4])
    pr = parity_scan_probabilities(probe, phis)
    par = pr[:, 0] + pr[:, 2] - pr[:, 1]
    base = math.atan2(-par[1], par[0])
    coh = 0.5 * amplitude * np.exp(1j * (base - phase0))
    rho[3, 0] = coh
    rho[0, 3] = np.conj(coh)
    return rho


def cmd_tomo(args):
    if args.action == "generate":
        cfg = load_config(args.config) if args.config else {"schema": SCHEMA_VERSION}
        check_keys(cfg, set(), {"amplitude", "phase0", "pop_even", "n_shots", "n_phases",
                                "combined_fidelity", "population_shots", "seed"})
        amp = float(cfg.get("amplitude", 1.0))
        pop = float(cfg.get("pop_even", 1.0))
        if not (0 <= pop <= 1) or abs(amp) > pop:
            raise ConfigError("need 0 <= pop_even <= 1 and |amplitude| <= pop_even")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        spam = SpamMap.from_combined_fidelity(float(cfg.get("combined_fidelity", 0.87)))
        rho = _bell_rho(amp, float(cfg.get("phase0", 0.0)), pop)
        phis = np.linspace(0.0, math.pi, int(cfg.get("n_phases", 12)))
        rng = np.random.default_rng(seed)
        ds = simulate_parity_dataset(rho, phis, int(cfg.get("n_shots", 500)), spam, rng)
        pops = sample_counts(apply_spam(np.array([pop / 2, 1 - pop, pop / 2]), spam),
                             int(cfg.get("population_shots", 10_000)), rng)
        out = Path(args.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        ds.to_csv(out / "parity.csv")
        write_rows(out / "populations.csv", [{"x0": pops.x0, "x1": pops.x1, "x2": pops.x2}])
        (out / "spam.json").write_text(spam.to_json() + "\n")
        return
    # fit
    if not args.data:
        raise ConfigError("tomo fit needs --data")
    spam = SpamMap.from_json(Path(args.spam).read_text()) if args.spam else SpamMap.identity()
    ds = ParityDataset.from_csv(args.data, spam)
    fit = mle_parity_fit(ds)
    result = {
        "amplitude": fit.amplitude,
        "amplitude_stderr": fit.amplitude_stderr,
        "phase0": fit.phase,
        "phase0_stderr": fit.phase_stderr,
        "log_likelihood": fit.log_likelihood,
    }
    if args.populations:
        with open(args.populations, newline="") as fh:
            row = next(csv.DictReader(fh))
        pf = mle_populations(CountsRecord(int(row["x0"]), int(row["x1"]), int(row["x2"])), spam)
        dphi = fit.phase - args.expected_phase
        pop = min(max(pf.pop_even, 0.0), 1.0)
        result.update(
            pop_even=pf.pop_even,
            pop_even_stderr=pf.pop_even_stderr,
            fidelity=bell_fidelity_estimate(pop, fit.amplitude, dphi),
            fidelity_stderr=bell_fidelity_stderr(pf.pop_even_stderr, fit.amplitude_stderr, dphi),
        )
    emit_json(result, args.out)


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None, help="worker count for sweeps")
    common.add_argument("--preset", choices=sorted(PRESETS), default=None)

    p = argparse.ArgumentParser(prog="mtms", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tones", parents=[common], help="optimized tone coefficients")
    t.add_argument("--n", type=int, required=True)
    t.add_argument("--delta-hz", type=float, default=None)
    t.set_defaults(func=cmd_tones)

    def scenario_flags(sp):
        sp.add_argument("--n", dest="n_tones", type=int)
        sp.add_argument("--delta-hz", type=float)
        sp.add_argument("--frac-detuning", type=float)
        sp.add_argument("--heating-rate", type=float)
        sp.add_argument("--nbar", type=float)

    tr = sub.add_parser("trajectory", parents=[common], help="phase-space trajectory CSV")
    scenario_flags(tr)
    tr.add_argument("--samples", type=int, default=201)
    tr.set_defaults(func=cmd_trajectory)

    fi = sub.add_parser("fidelity", parents=[common], help="closed-form fidelities")
    scenario_flags(fi)
    fi.set_defaults(func=cmd_fidelity)

    si = sub.add_parser("simulate", parents=[common], help="one master-equation run")
    si.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", parents=[common], help="master-equation sweep to CSV")
    sw.set_defaults(func=cmd_sweep)

    fg = sub.add_parser("figure", parents=[common], help="figure data files")
    fg.add_argument("which", choices=figures.FIGURES)
    fg.set_defaults(func=cmd_figure)

    to = sub.add_parser("tomo", parents=[common], help="synthetic tomography data and fits")
    to.add_argument("action", choices=("generate", "fit"))
    to.add_argument("--data", help="parity CSV (phi_rad,x0,x1,x2)")
    to.add_argument("--spam", help="SPAM map JSON")
    to.add_argument("--populations", help="CSV with one x0,x1,x2 row")
    to.add_argument("--expected-phase", type=float, default=0.0)
    to.set_defaults(func=cmd_tomo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
