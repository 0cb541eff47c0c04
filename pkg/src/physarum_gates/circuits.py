"""Combinational networks of threshold gates.

Every gate instance is an independent preparation: in stochastic mode each one
draws its own frequency change, so errors compound through the network.  How
correlated the errors of physically cascaded preparations would be is unknown;
independence is the modelling assumption here.
"""
from __future__ import annotations

import enum
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import CyclicNetlist, NetlistError, UnassignedInput
from .gates import SHARD_SIZE, Bits, GateKind, GateSpec, classify, inputs_to_stimuli
from .response_model import ResponseModel, as_generator, sample_change, sample_changes

BUNDLED = ("xor", "half_adder", "or")


class Mode(str, enum.Enum):
    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class GateNode:
    id: str
    spec: GateSpec


@dataclass(frozen=True)
class Wire:
    source: str
    to_gate: str
    to_port: int


@dataclass(frozen=True)
class Netlist:
    inputs: tuple[str, ...]
    nodes: tuple[GateNode, ...]
    wires: tuple[Wire, ...]
    outputs: tuple[tuple[str, str], ...]
    name: str = ""

    def __post_init__(self):
        names = list(self.inputs) + [g.id for g in self.nodes]
        if len(set(names)) != len(names):
            raise NetlistError("input names and gate ids must be unique")
        gates = {g.id: g for g in self.nodes}
        driven: dict[tuple[str, int], str] = {}
        for w in self.wires:
            if w.source not in gates and w.source not in self.inputs:
                raise NetlistError(f"wire source {w.source!r} is neither an input nor a gate")
            if w.to_gate not in gates:
                raise NetlistError(f"wire targets unknown gate {w.to_gate!r}")
            if not 0 <= w.to_port < gates[w.to_gate].spec.arity:
                raise NetlistError(f"gate {w.to_gate!r} has no port {w.to_port}")
            if (w.to_gate, w.to_port) in driven:
                raise NetlistError(f"gate {w.to_gate!r} port {w.to_port} is driven twice")
            driven[(w.to_gate, w.to_port)] = w.source
        for g in self.nodes:
            for port in range(g.spec.arity):
                if (g.id, port) not in driven:
                    raise NetlistError(f"gate {g.id!r} port {port} is undriven")
        for out, gid in self.outputs:
            if gid not in gates:
                raise NetlistError(f"output {out!r} refers to unknown gate {gid!r}")
        object.__setattr__(self, "_drivers", driven)
        object.__setattr__(self, "_order", self._topological_order())

    def _topological_order(self) -> tuple[GateNode, ...]:
        # Kahn's algorithm; ties broken by declaration order for stable draws
        deps = {g.id: {w.source for w in self.wires if w.to_gate == g.id and w.source not in self.inputs}
                for g in self.nodes}
        done: set[str] = set()
        order = []
        while len(order) < len(self.nodes):
            ready = [g for g in self.nodes if g.id not in done and deps[g.id] <= done]
            if not ready:
                stuck = sorted(set(deps) - done)
                raise CyclicNetlist(f"netlist has a cycle through {', '.join(stuck)}")
            order.append(ready[0])
            done.add(ready[0].id)
        return tuple(order)

    @property
    def order(self) -> tuple[GateNode, ...]:
        return self._order

    def driver(self, gate_id: str, port: int) -> str:
        return self._drivers[(gate_id, port)]

    @property
    def assignments(self) -> tuple[Bits, ...]:
        return tuple(itertools.product((0, 1), repeat=len(self.inputs)))

    # -- file format -------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: Mapping, name: str = "") -> Netlist:
        try:
            nodes = []
            for n in doc["nodes"]:
                kind = GateKind.parse(n["kind"])
                spec = GateSpec.default(kind, n.get("threshold_pct"))
                if "input_map" in n:
                    spec = GateSpec(kind, spec.threshold_pct, tuple(n["input_map"]))
                nodes.append(GateNode(str(n["id"]), spec))
            wires = tuple(Wire(str(w["from"]), str(w["to_gate"]), int(w["to_port"])) for w in doc["wires"])
            outputs = tuple((str(o["name"]), str(o["gate_id"])) for o in doc["outputs"])
            inputs = tuple(str(i) for i in doc["inputs"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, NetlistError):
                raise
            raise NetlistError(f"malformed netlist: {exc!r}") from None
        return cls(inputs, tuple(nodes), wires, outputs, name)

    def to_dict(self) -> dict:
        nodes = []
        for g in self.nodes:
            node = {"id": g.id, "kind": g.spec.kind.value, "threshold_pct": g.spec.threshold_pct}
            nodes.append(node)
        return {
            "inputs": list(self.inputs),
            "nodes": nodes,
            "wires": [{"from": w.source, "to_gate": w.to_gate, "to_port": w.to_port} for w in self.wires],
            "outputs": [{"name": o, "gate_id": g} for o, g in self.outputs],
        }


def load_netlist(source: str | Path) -> Netlist:
    """Load a netlist from a JSON path or by bundled name (``xor``, ``half_adder``, ``or``)."""
    path = Path(source)
    if path.exists():
        text, name = path.read_text(encoding="utf-8"), path.stem
    else:
        stem = path.stem if path.suffix == ".json" else str(source)
        if stem not in BUNDLED:
            raise NetlistError(f"no netlist file {source!r} and no bundled netlist of that name")
        text = resources.files("physarum_gates").joinpath("data", f"{stem}.json").read_text(encoding="utf-8")
        name = stem
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetlistError(f"{source}: invalid JSON: {exc}") from None
    return Netlist.from_dict(doc, name)


def _bits_for(net: Netlist, primary_inputs: Mapping[str, int] | Sequence[int]) -> dict[str, int]:
    if not isinstance(primary_inputs, Mapping):
        primary_inputs = dict(zip(net.inputs, primary_inputs))
    missing = [i for i in net.inputs if i not in primary_inputs]
    if missing:
        raise UnassignedInput(f"no value for primary input(s) {', '.join(missing)}")
    return {i: int(primary_inputs[i]) for i in net.inputs}


def evaluate_circuit(
    net: Netlist,
    primary_inputs: Mapping[str, int] | Sequence[int],
    model: ResponseModel,
    mode: Mode | str = Mode.DETERMINISTIC,
    rng: np.random.Generator | int | None = None,
) -> dict[str, int]:
    """Output bits of `net` for one primary-input assignment.

    Deterministic mode classifies each gate at its model median; stochastic mode
    draws one change per gate instance from `rng`.
    """
    mode = Mode(mode)
    gen = as_generator(rng) if mode is Mode.STOCHASTIC else None
    values: dict[str, int] = _bits_for(net, primary_inputs)
    for node in net.order:
        bits = tuple(values[net.driver(node.id, p)] for p in range(node.spec.arity))
        stimuli = inputs_to_stimuli(node.spec, bits)
        if gen is None:
            change = model.entry(stimuli).median_change
        else:
            change = sample_change(model, stimuli, gen)
        values[node.id] = classify(node.spec, change)
    return {out: values[gid] for out, gid in net.outputs}


def boolean_reference(net: Netlist, primary_inputs: Mapping[str, int] | Sequence[int]) -> dict[str, int]:
    """Ideal Boolean evaluation of the same topology, ignoring the response model."""
    values: dict[str, int] = _bits_for(net, primary_inputs)
    for node in net.order:
        bits = tuple(values[net.driver(node.id, p)] for p in range(node.spec.arity))
        values[node.id] = node.spec.expected(bits)
    return {out: values[gid] for out, gid in net.outputs}


def truth_table(net: Netlist, model: ResponseModel) -> dict[Bits, dict[str, int]]:
    return {a: evaluate_circuit(net, a, model, Mode.DETERMINISTIC) for a in net.assignments}


def _simulate(net: Netlist, assignment: Bits, model: ResponseModel, size: int, gen: np.random.Generator):
    """Vectorized stochastic evaluation: `size` independent runs of one assignment."""
    values = {name: np.full(size, bit, dtype=np.int8) for name, bit in zip(net.inputs, assignment)}
    for node in net.order:
        ins = np.stack([values[net.driver(node.id, p)] for p in range(node.spec.arity)])
        out = np.zeros(size, dtype=np.int8)
        for combo in node.spec.combinations:
            mask = np.all(ins == np.asarray(combo, dtype=np.int8)[:, None], axis=0)
            m = int(mask.sum())
            if m:
                changes = sample_changes(model, inputs_to_stimuli(node.spec, combo), gen, m)
                out[mask] = changes >= node.spec.threshold_pct
        values[node.id] = out
    return {o: values[gid] for o, gid in net.outputs}


def circuit_error_rate(
    net: Netlist, model: ResponseModel, n: int, seed: int = 0, jobs: int = 1
) -> dict[Bits, float]:
    """Fraction of `n` stochastic runs per assignment whose outputs differ from deterministic mode.

    A run counts as an error when any output bit disagrees.  Random streams are
    keyed by ``(seed, assignment, shard)``, so `jobs` does not affect results.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    reference = truth_table(net, model)
    tasks = []
    for ai, a in enumerate(net.assignments):
        full, rest = divmod(n, SHARD_SIZE)
        for si, size in enumerate([SHARD_SIZE] * full + ([rest] if rest else [])):
            tasks.append((a, size, np.random.SeedSequence(seed, spawn_key=(ai, si))))

    def run(task):
        a, size, ss = task
        outs = _simulate(net, a, model, size, np.random.default_rng(ss))
        wrong = np.zeros(size, dtype=bool)
        for name, bits in outs.items():
            wrong |= bits != reference[a][name]
        return a, int(wrong.sum())

    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    errors = dict.fromkeys(net.assignments, 0)
    for a, k in results:
        errors[a] += k
    return {a: k / n for a, k in errors.items()}

