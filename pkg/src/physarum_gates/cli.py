"""Command-line front end.

Machine-readable output (JSON or CSV) goes to stdout, diagnostics to stderr.
Exit codes: 0 success, 1 runtime error, 2 usage error.  Seeded commands use
numpy's PCG64 generator with streams derived through ``SeedSequence`` and are
bit-reproducible.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .circuits import BUNDLED, Mode, circuit_error_rate, load_netlist, truth_table
from .dsp import DEFAULT_BAND, METHODS, frequency_change
from .errors import PhysarumError
from .gates import (
    DEFAULT_THRESHOLDS,
    GateKind,
    GateSpec,
    accuracy_distribution,
    bits_label,
    classify,
    evaluate_truth_table,
    monte_carlo_accuracy,
)
from .response_model import Family, ResponseModel, StimulusSet, default_model, extended_model
from .synth import OscillatorParams, TrialProtocol, synthesize_batch
from .trace_io import emit_report, read_trace, write_sidecar, write_trace

logger = logging.getLogger("physarum_gates")


class UsageError(Exception):
    pass


class _Formatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    def _get_help_string(self, action):
        # options that describe their own default keep that wording
        if "(default:" in (action.help or "") or action.default is None or action.default is False:
            return action.help
        return super()._get_help_string(action)


def _defaults_epilog() -> str:
    lines = ["Built-in response model (median % change, SD, n):"]
    for entry in default_model().entries.values():
        lines.append(f"  {entry.stimuli.label:<12} {entry.median_change:>6.1f}  {entry.sd_change:>5.1f}  {entry.n_trials}")
    lines.append("Gate thresholds (output 1 iff change >= threshold):")
    for kind, theta in DEFAULT_THRESHOLDS.items():
        lines.append(f"  {kind.value:<4} {theta:g}%")
    lines.append("Inputs: OR/AND x=Oat, y=Heat; NOT x=Light.")
    return "\n".join(lines)


def _band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like LO:HI in Hz, got {text!r}") from None
    return lo, hi


def _harmonic(text: str) -> tuple[int, float]:
    try:
        order, rel = text.split(":")
        return int(order), float(rel)
    except ValueError:
        raise argparse.ArgumentTypeError(f"harmonic must look like ORDER:REL, got {text!r}") from None


def _load_model(args) -> ResponseModel:
    if getattr(args, "model", None):
        model = ResponseModel.load(args.model)
    elif getattr(args, "extended", False):
        model = extended_model()
    else:
        model = default_model()
    if getattr(args, "family", None):
        model = model.with_family(args.family)
    return model


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(doc) -> None:
    _emit(json.dumps(doc, indent=2))


# -- commands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    model = _load_model(args)
    stimuli = StimulusSet.parse(args.stimuli)
    params = OscillatorParams(
        amplitude=args.amplitude,
        amplitude_jitter=args.jitter,
        drift_rate=args.drift,
        noise_sd=args.noise_sd,
        harmonics=tuple(args.harmonic or ()),
        ramp_s=args.ramp,
        wander_amplitude=args.wander,
    )
    protocol = TrialProtocol(args.pre, args.post, args.stim_time)
    traces = synthesize_batch(model, stimuli, args.trials, params, protocol, args.seed, args.base_period)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(args.trials)))
    trials = []
    for i, trace in enumerate(traces, start=1):
        csv_path = out / f"trial_{i:0{width}d}.csv"
        write_trace(trace, csv_path)
        side = write_sidecar(csv_path, trace.stimulation_time)
        trials.append(
            {
                "file": csv_path.name,
                "sidecar": side.name,
                "change_pct": trace.meta["change_pct"],
                "base_period_s": trace.meta["base_period_s"],
                "f_pre_hz": trace.meta["f_pre_hz"],
                "f_post_hz": trace.meta["f_post_hz"],
            }
        )
    manifest = {
        "stimuli": list(stimuli.names),
        "label": stimuli.label,
        "trials": args.trials,
        "seed": args.seed,
        "distribution_family": model.family.value,
        "stimulation_time_s": protocol.stimulation_time,
        "pre_duration_s": protocol.pre_duration,
        "post_duration_s": protocol.post_duration,
        "params": {
            "amplitude_mV": params.amplitude,
            "amplitude_jitter": params.amplitude_jitter,
            "drift_mV_per_s": params.drift_rate,
            "noise_sd_mV": params.noise_sd,
            "harmonics": [list(h) for h in params.harmonics],
            "ramp_s": params.ramp_s,
            "wander_mV": params.wander_amplitude,
            "base_period_s": args.base_period,
        },
        "files": trials,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    _dump({"out": str(out), "trials": len(trials), "manifest": "manifest.json"})
    return 0


def cmd_analyze(args) -> int:
    protocol = TrialProtocol(args.pre, args.post)
    results = []
    for path in args.input:
        trace = read_trace(path, args.sample_rate, args.stim_time, resample=args.resample, clip=args.clip)
        if trace.stimulation_time is None:
            raise UsageError(f"{path}: no --stim-time given and no sidecar JSON found")
        fc = frequency_change(trace, protocol, args.band, args.method)
        for flag in fc.flags:
            logger.warning("%s: %s", path, flag.replace("_", " "))
        results.append(fc)
    if len(results) == 1 and args.format == "json":
        _emit(emit_report(results[0], "json"))
    else:
        _emit(emit_report(results, args.format))
    return 0


def cmd_gate(args) -> int:
    model = _load_model(args)
    if args.action == "truth-table":
        kinds = [GateKind.parse(args.kind)] if args.kind and args.kind.lower() != "all" else list(GateKind)
        tables = {
            k.value: evaluate_truth_table(GateSpec.default(k, args.threshold), model).as_strings() for k in kinds
        }
        _dump(tables[kinds[0].value] if len(kinds) == 1 else tables)
        return 0
    if args.kind is None or args.kind.lower() == "all":
        raise UsageError("gate classify needs a single --kind")
    if args.change is None:
        raise UsageError("gate classify needs --change")
    _emit(str(classify(GateSpec.default(args.kind, args.threshold), args.change)))
    return 0


def cmd_mc(args) -> int:
    model = _load_model(args)
    if args.gate.lower() == "all":
        if args.threshold is not None:
            raise UsageError("--threshold needs a single --gate")
        gates = [GateSpec.default(k) for k in GateKind]
    else:
        gates = [GateSpec.default(args.gate, args.threshold)]
    docs = []
    # every gate reuses the seed, so "all" reproduces the single-gate runs
    seed = args.seed
    for gate in gates:
        if args.repeats:
            dist = accuracy_distribution(gate, model, args.n, args.repeats, seed=seed, jobs=args.jobs)
            docs.append(dist.to_dict())
        else:
            report = monte_carlo_accuracy(gate, model, args.n, seed=seed, jobs=args.jobs)
            if args.format == "csv":
                _emit(emit_report(report, "csv"))
                continue
            docs.append(report.to_dict())
    if docs:
        _dump(docs[0] if len(docs) == 1 else docs)
    return 0


def cmd_circuit(args) -> int:
    model = _load_model(args)
    net = load_netlist(args.netlist)
    if Mode(args.mode) is Mode.DETERMINISTIC:
        table = truth_table(net, model)
        _dump(
            {
                "netlist": net.name,
                "inputs": list(net.inputs),
                "outputs": [o for o, _ in net.outputs],
                "truth_table": {bits_label(a): outs for a, outs in table.items()},
            }
        )
        return 0
    rates = circuit_error_rate(net, model, args.n, seed=args.seed, jobs=args.jobs)
    _dump(
        {
            "netlist": net.name,
            "inputs": list(net.inputs),
            "n": args.n,
            "seed": args.seed,
            "error_rate": {bits_label(a): r for a, r in rates.items()},
        }
    )
    return 0


def cmd_model(args) -> int:
    _emit(_load_model(args).to_json())
    return 0


# -- parser -------------------------------------------------------------------


def _add_model_args(p):
    p.add_argument("--model", help="response model JSON replacing the built-in table")
    p.add_argument("--extended", action="store_true", help="add the extrapolated volatile-chemical rows")
    p.add_argument("--family", choices=[f.value for f in Family], help="override the distribution family")


def build_parser() -> argparse.ArgumentParser:
    epilog = _defaults_epilog()
    parser = argparse.ArgumentParser(
        prog="physarum-gates",
        description="Frequency-change logic gates in slime-mould recordings.",
        epilog=epilog,
        formatter_class=_Formatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file of option defaults (flags take precedence)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help, epilog=epilog, formatter_class=_Formatter)
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "synthesize a batch of trial recordings")
    p.add_argument("--stimuli", default="none", help="comma-separated stimuli, or 'none' for control")
    p.add_argument("--trials", type=int, default=12, help="number of recordings")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--base-period", type=float, default=None,
                   help="fixed oscillation period in s (default: uniform 50-200 s per trial)")
    p.add_argument("--amplitude", type=float, default=5.0, help="oscillation amplitude, mV")
    p.add_argument("--noise-sd", type=float, default=0.5, help="white-noise SD, mV")
    p.add_argument("--jitter", type=float, default=0.0, help="per-cycle relative amplitude jitter")
    p.add_argument("--drift", type=float, default=0.0, help="linear drift, mV/s")
    p.add_argument("--wander", type=float, default=0.0, help="slow baseline wander amplitude, mV")
    p.add_argument("--harmonic", type=_harmonic, action="append", help="add a harmonic ORDER:REL (repeatable)")
    p.add_argument("--ramp", type=float, default=0.0, help="frequency transition time, s")
    p.add_argument("--pre", type=float, default=600.0, help="pre-stimulation period, s")
    p.add_argument("--post", type=float, default=600.0, help="post-stimulation period, s")
    p.add_argument("--stim-time", type=float, default=None, help="stimulation time, s (default: --pre)")
    _add_model_args(p)

    p = add("analyze", cmd_analyze, "measure the frequency change of recorded traces")
    p.add_argument("--input", nargs="+", required=True, help="trace CSV file(s)")
    p.add_argument("--stim-time", type=float, default=None,
                   help="stimulation time, s (default: read from the sidecar JSON)")
    p.add_argument("--band", type=_band, default=DEFAULT_BAND, help="search band LO:HI in Hz")
    p.add_argument("--method", choices=METHODS, default="fft", help="frequency estimator")
    p.add_argument("--pre", type=float, default=600.0, help="pre-stimulation window, s")
    p.add_argument("--post", type=float, default=600.0, help="post-stimulation window, s")
    p.add_argument("--sample-rate", type=float, default=None, help="expected sample rate, Hz")
    p.add_argument("--resample", action="store_true", help="interpolate irregular timestamps")
    p.add_argument("--clip", action="store_true", help="clip potentials beyond +/-39 mV instead of failing")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="output format")

    p = add("gate", cmd_gate, "classify a frequency change or print a gate truth table")
    p.add_argument("action", nargs="?", choices=("classify", "truth-table"), default="classify",
                   help="what to do")
    p.add_argument("--kind", default=None, help="OR, AND or NOT ('all' for truth-table)")
    p.add_argument("--change", type=float, default=None, help="frequency change, percent")
    p.add_argument("--threshold", type=float, default=None, help="override the gate threshold, percent")
    _add_model_args(p)

    p = add("mc", cmd_mc, "Monte Carlo gate accuracy")
    p.add_argument("--gate", default="all", help="OR, AND, NOT or all")
    p.add_argument("--n", type=int, default=1_000_000, help="trials per input combination")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--repeats", type=int, default=0,
                   help="repeat the n-trial experiment this many times and report the spread")
    p.add_argument("--threshold", type=float, default=None, help="override the gate threshold, percent")
    p.add_argument("--jobs", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="output format")
    _add_model_args(p)

    p = add("circuit", cmd_circuit, "evaluate a gate network")
    p.add_argument("--netlist", required=True, help=f"netlist JSON or bundled name ({', '.join(BUNDLED)})")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.DETERMINISTIC.value,
                   help="median-based truth table or Monte Carlo error rates")
    p.add_argument("--n", type=int, default=100_000, help="stochastic runs per input assignment")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--jobs", type=int, default=1, help="worker threads (results do not depend on it)")
    _add_model_args(p)

    p = add("model", cmd_model, "print the response model as JSON")
    _add_model_args(p)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        config = json.loads(Path(known.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(config, dict):
        raise UsageError("config must be a JSON object")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in subparsers.choices.items():
        dests = {a.dest for a in sp._actions}
        values = {k.replace("-", "_"): v for k, v in config.items() if not isinstance(v, dict)}
        values.update({k.replace("-", "_"): v for k, v in config.get(name, {}).items()})
        unknown = set(values) - dests
        if name in config and unknown & set(config[name]):
            raise UsageError(f"config section {name!r} has unknown keys: {', '.join(sorted(unknown))}")
        sp.set_defaults(**{k: v for k, v in values.items() if k in dests})


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (PhysarumError, OSError, ValueError) as exc:
        print(f"{parser.prog} {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
