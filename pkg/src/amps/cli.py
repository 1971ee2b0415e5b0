"""Command-line front end: ``amps synth | compare | optimize | charge``.

Exit codes: 0 success, 2 usage or validation error, 3 infeasible problem,
4 I/O failure. Any option can also be given in a JSON file passed with
``--config``; keys are option names (dashes or underscores), and flags on the
command line win over the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .charging import ChargeSimState, plan_charging, simulate_charging
from .core import AmpsError, ContractError, InfeasibleError
from .experiments import (
    PRESETS,
    Settings,
    TrialConfig,
    TrialResult,
    distortion_table,
    parse_fraction_list,
    run_matrix,
    run_trial,
)
from .modulation import NlmConfig, TieBreak
from .optimizer import DEFAULT_BUDGET, OptimizationProblem, optimize
from .waveforms import WaveformKind, WaveformSpec

log = logging.getLogger("amps")

EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

GLOBAL_DEFAULTS = {"sample_rate": 1e6, "seed": 0, "out_dir": ".", "config": None, "verbose": False}

SIGNAL_DEFAULTS = {
    "waveform": "gaussian",
    "modules": 3,
    "voltages": "symmetric",
    "method": "nlm",
    "max_gap": None,
    "budget": DEFAULT_BUDGET,
    "carrier_frequency": 50e3,
    "tie_break": TieBreak.TOWARD_ZERO.value,
    "min_dwell": 1,
    "band": "45e3,55e3",
    "zero_pad": 2**18,
    "spectrum_max_hz": 250e3,
    "param": [],
}

COMMAND_DEFAULTS = {
    "synth": {**SIGNAL_DEFAULTS, "name": "synth"},
    "compare": {**SIGNAL_DEFAULTS, "preset": None, "trial": [], "waveforms": "monophasic,biphasic,gaussian",
                "name": "compare", "trial_files": True},
    "optimize": {**SIGNAL_DEFAULTS, "waveform": "monophasic", "name": "optimize"},
    "charge": {"targets": None, "inhibit": True, "simulate": False, "resistance": 1.0,
               "capacitance": 1e-3, "dt": 1e-5, "name": "charging"},
}


class UsageError(AmpsError):
    pass


# ---------------------------------------------------------------- output


def fmt(x) -> str:
    """Shortest round-trip text for floats, plain str otherwise."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: list[str], columns: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def pct(x: float) -> float:
    return round(100.0 * float(x), 10)


# ---------------------------------------------------------------- parsing


def _add_global(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--sample-rate", type=float, help="sample rate in Hz (default 1e6)")
    g.add_argument("--seed", type=int, help="optimizer seed (default 0)")
    g.add_argument("--out-dir", help="directory for output files (default .)")
    g.add_argument("--config", help="JSON file with option values")
    g.add_argument("-v", "--verbose", action="store_true")


def _add_signal(p: argparse.ArgumentParser, *, single: bool = True) -> None:
    if single:
        p.add_argument("--waveform", choices=[k.value for k in WaveformKind])
        p.add_argument("--modules", type=int)
        p.add_argument("--voltages", help="symmetric | geometric:RATIO | optimized | comma list")
        p.add_argument("--method", choices=["nlm", "psc-pwm"])
    p.add_argument("--max-gap", type=float, help="bound on max(V) - min(V) while optimizing")
    p.add_argument("--budget", type=int, help="optimizer objective evaluations")
    p.add_argument("--carrier-frequency", type=float, help="PWM carrier frequency in Hz")
    p.add_argument("--tie-break", choices=[t.value for t in TieBreak])
    p.add_argument("--min-dwell", type=int, help="NLM minimum dwell in samples")
    p.add_argument("--band", help="band edges in Hz for the energy ratio, 'lo,hi'")
    p.add_argument("--zero-pad", type=int, help="DFT length")
    p.add_argument("--spectrum-max-hz", type=float, help="highest frequency written to spectrum CSV")
    p.add_argument("--param", action="append",
                   help="waveform parameter KEY=VALUE or WAVEFORM.KEY=VALUE (repeatable)")
    p.add_argument("--name", help="output file stem")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amps",
        description="Asymmetric modular pulse synthesizer simulator and optimizer.",
        argument_default=argparse.SUPPRESS,
    )
    _add_global(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    kw = {"argument_default": argparse.SUPPRESS}
    p = sub.add_parser("synth", help="modulate one reference waveform", **kw)
    _add_global(p)
    _add_signal(p)

    p = sub.add_parser("compare", help="run a comparison matrix of trials", **kw)
    _add_global(p)
    p.add_argument("preset", nargs="?", default=None, choices=sorted(PRESETS), help="named trial matrix")
    p.add_argument("--trial", action="append",
                   help="LABEL:MODULES:VOLTAGES:METHOD (repeatable, at least two without a preset)")
    p.add_argument("--waveforms", help="comma list of waveforms")
    p.add_argument("--no-trial-files", dest="trial_files", action="store_false",
                   help="only write the table and report")
    _add_signal(p, single=False)

    p = sub.add_parser("optimize", help="optimize the module voltage asymmetry", **kw)
    _add_global(p)
    p.add_argument("--waveform", choices=[k.value for k in WaveformKind])
    p.add_argument("--modules", type=int)
    _add_signal(p, single=False)

    p = sub.add_parser("charge", help="plan (and simulate) single-supply charging", **kw)
    _add_global(p)
    p.add_argument("--targets", help="module targets from the supply end, fractions or percent")
    p.add_argument("--no-inhibit", dest="inhibit", action="store_false",
                   help="keep the supply connected after charging")
    p.add_argument("--simulate", action="store_true", help="also write RC charging traces")
    p.add_argument("--resistance", type=float, help="source resistance in ohm")
    p.add_argument("--capacitance", type=float, help="module capacitance in farad")
    p.add_argument("--dt", type=float, help="simulation time step in seconds")
    p.add_argument("--name", help="output file stem")
    return parser


def resolve_options(parser: argparse.ArgumentParser, argv: list[str] | None) -> argparse.Namespace:
    ns = parser.parse_args(argv)
    given = vars(ns)
    opts = {**GLOBAL_DEFAULTS, **COMMAND_DEFAULTS[ns.command]}
    if given.get("config"):
        path = Path(given["config"])
        try:
            data = json.loads(path.read_text())
        except OSError as e:
            raise OSError(f"cannot read config {path}: {e.strerror}") from e
        except json.JSONDecodeError as e:
            raise UsageError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise UsageError(f"config {path} must hold a JSON object")
        for key, value in data.items():
            key = key.replace("-", "_")
            if key not in opts or key == "command":
                raise UsageError(f"unknown option {key!r} in config {path}")
            opts[key] = value
    opts.update(given)
    return argparse.Namespace(**opts)


def _waveform_params(items: list[str]) -> dict:
    """``KEY=VALUE`` applies to every waveform having KEY; ``WAVEFORM.KEY=VALUE`` to one."""
    known = {k.value: WaveformSpec(k).resolved_parameters() for k in WaveformKind}
    out: dict = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        try:
            val = float(value)
        except ValueError:
            raise UsageError(f"--param value must be numeric, got {item!r}") from None
        wf, _, name = key.rpartition(".")
        kinds = [WaveformKind(wf).value] if wf else [k for k in known if name in known[k]]
        if not kinds or any(name not in known[k] for k in kinds):
            raise UsageError(f"unknown waveform parameter {key!r}")
        for k in kinds:
            out.setdefault(k, {})[name] = val
    return out


def _band(text) -> tuple[float, float]:
    if isinstance(text, (list, tuple)):
        lo, hi = text
    else:
        try:
            lo, hi = (float(x) for x in str(text).split(","))
        except ValueError:
            raise UsageError(f"--band expects 'lo,hi', got {text!r}") from None
    return float(lo), float(hi)


def settings_from(opts: argparse.Namespace) -> Settings:
    return Settings(
        sample_rate=float(opts.sample_rate),
        seed=int(opts.seed),
        budget=int(opts.budget),
        max_gap=None if opts.max_gap is None else float(opts.max_gap),
        carrier_frequency=float(opts.carrier_frequency),
        nlm=NlmConfig(TieBreak(opts.tie_break), int(opts.min_dwell)),
        band=_band(opts.band),
        zero_pad=int(opts.zero_pad),
        waveform_params=_waveform_params(opts.param),
    )


def config_record(opts: argparse.Namespace) -> dict:
    skip = {"config", "verbose", "out_dir"}
    rec = {}
    for k, v in sorted(vars(opts).items()):
        if k in skip:
            continue
        rec[k] = list(v) if isinstance(v, tuple) else v
    return rec


# ---------------------------------------------------------------- commands


def _write_trial_files(out: Path, stem: str, res: TrialResult, max_hz: float) -> list[Path]:
    t = res.reference.time
    paths = [out / f"{stem}_waveform.csv", out / f"{stem}_states.csv", out / f"{stem}_spectrum.csv"]
    write_atomic(paths[0], csv_text(["time_s", "ref", "out"], [t, res.reference.samples, res.report.output.samples]))
    states = res.report.trajectory.states
    n = states.shape[1]
    write_atomic(paths[1], csv_text(["time_s"] + [f"s{i + 1}" for i in range(n)],
                                    [t] + [states[:, i].tolist() for i in range(n)]))
    sp = res.spectrum
    keep = sp.frequencies <= max_hz
    write_atomic(paths[2], csv_text(["frequency_hz", "magnitude"], [sp.frequencies[keep], sp.magnitudes[keep]]))
    return paths


def cmd_synth(opts: argparse.Namespace) -> int:
    settings = settings_from(opts)
    trial = TrialConfig(opts.name, int(opts.modules), str(opts.voltages), opts.method)
    res = run_trial(trial, opts.waveform, settings)
    out = Path(opts.out_dir)
    _write_trial_files(out, opts.name, res, float(opts.spectrum_max_hz))
    report = {
        "config": {**config_record(opts), "voltages_resolved_pct": [pct(x) for x in res.voltages.voltages]},
        "distortion_pct": 100.0 * res.distortion,
        "switch_counts": list(res.report.switch_count),
        "level_count": res.level_count,
        "warnings": list(res.report.warnings),
        "band_energy_ratio": res.band_energy_ratio,
    }
    write_atomic(out / f"{opts.name}_report.json", json_text(report))
    print(f"{opts.waveform} {opts.method} {res.level_count} levels: distortion {100 * res.distortion:.2f}%")
    return 0


def cmd_compare(opts: argparse.Namespace) -> int:
    trials: list[TrialConfig] = list(PRESETS[opts.preset]) if opts.preset else []
    trials += [TrialConfig.parse(t) for t in opts.trial or []]
    if not opts.preset and len(trials) < 2:
        raise UsageError("compare needs a preset or at least two --trial entries")
    labels = [t.label for t in trials]
    if len(set(labels)) != len(labels):
        raise UsageError(f"duplicate trial labels: {labels}")
    waveforms = [WaveformKind(w.strip()) for w in str(opts.waveforms).split(",") if w.strip()]
    settings = settings_from(opts)
    results = run_matrix(trials, waveforms, settings)

    out = Path(opts.out_dir)
    table = distortion_table(results)
    cols = [w.value for w in waveforms]
    rows = [[label] + [pct(table[label][c]) for c in cols] for label in table]
    write_atomic(out / f"{opts.name}_table.csv",
                 csv_text(["trial"] + [f"{c}_distortion_pct" for c in cols], list(map(list, zip(*rows)))))
    report = {
        "config": config_record(opts),
        "distortion_pct": {label: {c: pct(v) for c, v in row.items()} for label, row in table.items()},
        "switch_counts": {f"{r.trial.label}/{r.waveform.value}": list(r.report.switch_count) for r in results},
        "level_count": {r.trial.label: r.level_count for r in results},
        "warnings": [f"{r.trial.label}/{r.waveform.value}: {w}" for r in results for w in r.report.warnings],
        "trials": [r.summary() for r in results],
    }
    write_atomic(out / f"{opts.name}_report.json", json_text(report))
    if opts.trial_files:
        for r in results:
            _write_trial_files(out / "trials", f"{r.trial.label}_{r.waveform.value}", r,
                               float(opts.spectrum_max_hz))
    width = max(len(label) for label in table)
    print(f"{'trial':<{width}}  " + "  ".join(f"{c:>10}" for c in cols))
    for row in rows:
        print(f"{row[0]:<{width}}  " + "  ".join(f"{x:>9.2f}%" for x in row[1:]))
    return 0


def cmd_optimize(opts: argparse.Namespace) -> int:
    modules = int(opts.modules)
    if modules < 2:
        raise UsageError(f"optimize needs at least 2 modules, got {modules}")
    settings = settings_from(opts)
    kind = WaveformKind(opts.waveform)
    ref = settings.reference(kind)
    problem = OptimizationProblem(ref, modules, settings.max_gap, settings.nlm)
    res = optimize(problem, settings.budget, settings.seed)
    best_pct = [pct(x) for x in res.best.voltages]
    row = {"reference": kind.value, **{f"V{i + 1}_pct": p for i, p in enumerate(best_pct)},
           "distortion_pct": pct(res.best_distortion)}
    doc = {
        "config": config_record(opts),
        "best_pct": best_pct,
        "best_fraction": res.best.voltages.tolist(),
        "distortion_pct": 100.0 * res.best_distortion,
        "evaluations": res.evaluations,
        "baselines_distortion_pct": {k: 100.0 * v for k, v in res.baselines.items()},
        "trace": [{"iteration": e.iteration, "voltages_pct": [pct(x) for x in e.candidate.voltages],
                   "distortion_pct": 100.0 * e.distortion} for e in res.trace],
        "table_row": row,
    }
    out = Path(opts.out_dir)
    stem = f"{opts.name}_{kind.value}"
    write_atomic(out / f"{stem}.json", json_text(doc))
    write_atomic(out / f"{stem}_table.csv", csv_text(list(row), [[v] for v in row.values()]))
    print(f"{kind.value}: V = [{', '.join(f'{p:.1f}%' for p in best_pct)}], "
          f"distortion {100 * res.best_distortion:.2f}%")
    return 0


def cmd_charge(opts: argparse.Namespace) -> int:
    if not opts.targets:
        raise UsageError("charge needs --targets")
    targets = opts.targets if isinstance(opts.targets, list) else parse_fraction_list(str(opts.targets))
    plan = plan_charging(targets, supply_inhibit=bool(opts.inhibit))
    doc = {
        "config": config_record(opts),
        "targets_pct": [pct(x) for x in plan.targets],
        "steps": [{"step": i + 1, "setpoint_pct": pct(s.setpoint), "links": [l.value for l in s.links]}
                  for i, s in enumerate(plan.steps)],
        "supply_inhibit": plan.supply_inhibit,
    }
    out = Path(opts.out_dir)
    write_atomic(out / f"{opts.name}_plan.json", json_text(doc))
    if opts.simulate:
        n = plan.n_modules
        trace = simulate_charging(plan, ChargeSimState((0.0,) * n, True), float(opts.resistance),
                                  float(opts.capacitance), float(opts.dt))
        cols = [[s.time_s for s in trace], [s.step for s in trace], [int(s.supply_connected) for s in trace]]
        cols += [[s.module_voltages[i] for s in trace] for i in range(n)]
        write_atomic(out / f"{opts.name}_trace.csv",
                     csv_text(["time_s", "step", "supply_connected"] + [f"v{i + 1}" for i in range(n)], cols))
    print("; ".join(f"{d['setpoint_pct']:g}% {''.join(d['links'])}" for d in doc["steps"]))
    return 0


COMMANDS = {"synth": cmd_synth, "compare": cmd_compare, "optimize": cmd_optimize, "charge": cmd_charge}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        opts = resolve_options(parser, argv)
        logging.basicConfig(level=logging.DEBUG if opts.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[opts.command](opts)
    except InfeasibleError as e:
        print(f"amps: infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ContractError, ValueError) as e:
        print(f"amps: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        where = f" ({e.filename})" if getattr(e, "filename", None) else ""
        print(f"amps: I/O error{where}: {e.strerror or e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
