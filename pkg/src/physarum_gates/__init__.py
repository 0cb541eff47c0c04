"""Simulation and analysis of frequency-change logic gates in *Physarum polycephalum*.

Pipeline: synthesize (or ingest) surface-potential traces, estimate the dominant
oscillation frequency before and after stimulation, convert the change into a
logic level with a threshold gate, and estimate gate and circuit accuracy by
Monte Carlo or in closed form.
"""

__version__ = "0.1.0"

from .circuits import Mode, Netlist, circuit_error_rate, evaluate_circuit, load_netlist
from .dsp import FrequencyChange, FrequencyEstimate, Window, estimate_frequency, frequency_change
from .gates import (
    AccuracyReport,
    GateKind,
    GateSpec,
    TrialOutcome,
    TruthTable,
    classify,
    empirical_accuracy,
    evaluate_truth_table,
    inputs_to_stimuli,
    monte_carlo_accuracy,
)
from .response_model import (
    Family,
    ResponseEntry,
    ResponseModel,
    StimulusSet,
    default_model,
    expected_accuracy,
    extended_model,
    sample_change,
)
from .synth import OscillatorParams, Trace, TrialProtocol, synthesize_batch, synthesize_trial
from .trace_io import emit_report, read_trace, write_trace

__all__ = [
    "__version__",
    "Mode",
    "Netlist",
    "circuit_error_rate",
    "evaluate_circuit",
    "load_netlist",
    "FrequencyChange",
    "FrequencyEstimate",
    "Window",
    "estimate_frequency",
    "frequency_change",
    "AccuracyReport",
    "GateKind",
    "GateSpec",
    "TrialOutcome",
    "TruthTable",
    "classify",
    "empirical_accuracy",
    "evaluate_truth_table",
    "inputs_to_stimuli",
    "monte_carlo_accuracy",
    "Family",
    "ResponseEntry",
    "ResponseModel",
    "StimulusSet",
    "default_model",
    "expected_accuracy",
    "extended_model",
    "sample_change",
    "OscillatorParams",
    "Trace",
    "TrialProtocol",
    "synthesize_batch",
    "synthesize_trial",
    "emit_report",
    "read_trace",
    "write_trace",
]
