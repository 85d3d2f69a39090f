"""Standard and ancilla-boosted Bell-state measurements.

The click-pattern table is derived by simulation: each of the four Bell states
(with the two-photon ancilla for the boosted circuit) is sent through the
circuit, and every reachable pattern is labelled by the unique Bell state that
produces it, or Ambiguous if more than one does.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .detection import DetectorBankConfig, detect_conditional, detect_exact
from .fock import (
    FockState,
    ModeLayout,
    apply_mode_unitary,
    apply_polynomial,
    beam_splitter,
    hwp,
    polarization_unitary,
    splitter_between,
    tensor,
    vacuum,
)
from .sources import ANCILLA_ANGLE, PROBE_STATES, QubitSpec

AMBIGUITY_THRESHOLD = 1e-12


class Outcome(str, Enum):
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    AMBIGUOUS = "Ambiguous"
    INVALID = "Invalid"

    @property
    def is_bell(self) -> bool:
        return self in BELL_OUTCOMES


BELL_OUTCOMES = (Outcome.PSI_PLUS, Outcome.PSI_MINUS, Outcome.PHI_PLUS, Outcome.PHI_MINUS)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# X^m_zz Z^m_xx, keyed by the word; "XZ" is the matrix product X @ Z
CORRECTION_WORDS = {
    "I": PAULI["I"],
    "X": PAULI["X"],
    "Z": PAULI["Z"],
    "XZ": PAULI["X"] @ PAULI["Z"],
}


class CircuitKind(str, Enum):
    STANDARD = "Standard"
    BOOSTED = "Boosted"


class FanoutMismatch(ValueError):
    pass


class UndefinedCorrection(ValueError):
    pass


@dataclass(frozen=True)
class SplitterStage:
    """Balanced splitter between two spatial modes (both polarizations), then renaming."""

    port_a: str
    port_b: str
    out_a: str
    out_b: str


@dataclass(frozen=True)
class BsmCircuit:
    kind: CircuitKind
    stages: tuple
    inputs: tuple
    detected: tuple

    @classmethod
    def standard(cls) -> "BsmCircuit":
        return cls(
            CircuitKind.STANDARD,
            (SplitterStage("in", "a", "c", "d"),),
            ("in", "a"),
            ("c", "d"),
        )

    @classmethod
    def boosted(cls) -> "BsmCircuit":
        """Second splitter mixes BS1 output ``d`` with the ancilla mode."""
        return cls(
            CircuitKind.BOOSTED,
            (SplitterStage("in", "a", "c", "d"), SplitterStage("d", "anc", "e", "f")),
            ("in", "a", "anc"),
            ("c", "e", "f"),
        )

    @classmethod
    def from_kind(cls, kind) -> "BsmCircuit":
        kind = CircuitKind(kind)
        return cls.standard() if kind is CircuitKind.STANDARD else cls.boosted()

    @property
    def uses_ancilla(self) -> bool:
        return "anc" in self.inputs

    def apply(self, state: FockState) -> FockState:
        for st in self.stages:
            for pol in ("H", "V"):
                state = apply_mode_unitary(
                    state, splitter_between(state.layout, st.port_a, st.port_b, pol)
                )
            state = state.relabel({st.port_a: st.out_a, st.port_b: st.out_b})
        return state

    def detection(self, fanout=8, efficiency=1.0, traced=()) -> DetectorBankConfig:
        return DetectorBankConfig.polarization_resolved(self.detected, fanout, efficiency, traced)

    def describe(self) -> dict:
        return {
            "kind": self.kind.value,
            "stages": [[s.port_a, s.port_b, s.out_a, s.out_b] for s in self.stages],
            "inputs": list(self.inputs),
            "detected": list(self.detected),
        }


_R = 1 / math.sqrt(2)
# creation polynomials on (in, a)
BELL_POLYNOMIALS = {
    Outcome.PHI_PLUS: [(_R, [("in", "H"), ("a", "H")]), (_R, [("in", "V"), ("a", "V")])],
    Outcome.PHI_MINUS: [(_R, [("in", "H"), ("a", "H")]), (-_R, [("in", "V"), ("a", "V")])],
    Outcome.PSI_PLUS: [(_R, [("in", "H"), ("a", "V")]), (_R, [("in", "V"), ("a", "H")])],
    Outcome.PSI_MINUS: [(_R, [("in", "H"), ("a", "V")]), (-_R, [("in", "V"), ("a", "H")])],
}


def two_photon_ancilla(spatial: str = "anc") -> FockState:
    """hwp(pi/8) applied to a_H^dag a_V^dag |vac>, i.e. (|2H> - |2V>)/sqrt2."""
    layout = ModeLayout.dual_rail([spatial], 2)
    pair = apply_polynomial(vacuum(layout), [(1.0, [(spatial, "H"), (spatial, "V")])])
    return apply_mode_unitary(pair, polarization_unitary(hwp(ANCILLA_ANGLE), spatial))


def bell_input(label: Outcome) -> FockState:
    layout = ModeLayout.dual_rail(["in", "a"], 2)
    return apply_polynomial(vacuum(layout), BELL_POLYNOMIALS[Outcome(label)])


@dataclass
class ClassificationTable:
    """Click pattern -> outcome, with the provenance needed to reproduce it."""

    groups: tuple
    fanouts: tuple
    entries: dict
    corrections: dict
    provenance: dict = field(default_factory=dict)

    @property
    def convention_hash(self) -> str:
        return self.provenance.get("convention_hash", "")

    @property
    def success_probability(self) -> float:
        return self.provenance.get("success_probability", float("nan"))

    def labels(self) -> set:
        return set(self.entries.values())

    def defined_outcomes(self) -> tuple:
        """Bell outcomes that this table can report unambiguously."""
        present = self.labels()
        return tuple(o for o in BELL_OUTCOMES if o in present)

    def to_json(self) -> str:
        doc = {
            "groups": list(self.groups),
            "fanouts": [f if f is not None else "pnr" for f in self.fanouts],
            "provenance": self.provenance,
            "corrections": {o.value: w for o, w in sorted(self.corrections.items())},
            "entries": [
                {"clicks": list(p), "label": self.entries[p].value} for p in sorted(self.entries)
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ClassificationTable":
        doc = json.loads(text)
        fanouts = tuple(None if f == "pnr" else int(f) for f in doc["fanouts"])
        entries = {tuple(e["clicks"]): Outcome(e["label"]) for e in doc["entries"]}
        corrections = {Outcome(k): v for k, v in doc["corrections"].items()}
        return cls(tuple(doc["groups"]), fanouts, entries, corrections, doc["provenance"])


def convention_hash(circuit: BsmCircuit, detection: DetectorBankConfig, include_ancilla: bool,
                    cutoff: int) -> str:
    bs = beam_splitter(0.5)
    doc = {
        "splitter": [[round(float(x.real), 12) for x in row] for row in bs],
        "hwp": "a_H -> cos2t a_H + sin2t a_V; a_V -> sin2t a_H - cos2t a_V",
        "ancilla_angle": round(ANCILLA_ANGLE, 12),
        "circuit": circuit.describe(),
        "groups": list(detection.names),
        "fanouts": [f if f is not None else "pnr" for f in detection.fanouts],
        "ancilla": include_ancilla,
        "cutoff": cutoff,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def _prepare(circuit: BsmCircuit, core: FockState, include_ancilla: bool) -> FockState:
    if circuit.uses_ancilla:
        anc = two_photon_ancilla() if include_ancilla else vacuum(ModeLayout.dual_rail(["anc"], 2))
        core = tensor(core, anc)
    return circuit.apply(core)


def _bell_distributions(circuit, detection, include_ancilla) -> dict:
    out = {}
    for label in BELL_OUTCOMES:
        state = _prepare(circuit, bell_input(label), include_ancilla)
        out[label] = detect_exact(state, detection)
    return out


def _check_ideal(detection: DetectorBankConfig):
    if any(g.efficiency != 1.0 for g in detection.groups):
        raise ValueError("classification tables are derived with unit efficiency")


def build_classification_table(circuit: BsmCircuit, detection: DetectorBankConfig | None = None,
                               include_ancilla: bool | None = None) -> ClassificationTable:
    """Label every click pattern reachable from the ideal Bell inputs.

    ``include_ancilla`` defaults to whether the circuit has an ancilla port;
    passing ``False`` for the boosted circuit yields the table for events where
    the ancilla source did not fire.
    """
    if detection is None:
        detection = circuit.detection(fanout=None)
    _check_ideal(detection)
    if include_ancilla is None:
        include_ancilla = circuit.uses_ancilla
    dists = _bell_distributions(circuit, detection, include_ancilla)
    patterns = sorted(set().union(*dists.values()))
    entries = {}
    success = 0.0
    per_label = {o.value: 0.0 for o in BELL_OUTCOMES}
    for pat in patterns:
        producers = [o for o in BELL_OUTCOMES if dists[o].get(pat, 0.0) > AMBIGUITY_THRESHOLD]
        if len(producers) == 1:
            entries[pat] = producers[0]
            p = dists[producers[0]][pat]
            success += p / 4
            per_label[producers[0].value] += p
        elif producers:
            entries[pat] = Outcome.AMBIGUOUS
    corrections = derive_corrections(circuit, detection, include_ancilla, entries)
    cutoff = 4 if include_ancilla and circuit.uses_ancilla else 2
    provenance = {
        "circuit": circuit.describe(),
        "include_ancilla": include_ancilla,
        "cutoff": cutoff,
        "fanout": [f if f is not None else "pnr" for f in detection.fanouts],
        "convention_hash": convention_hash(circuit, detection, include_ancilla, cutoff),
        "success_probability": success,
        "identification_probability": per_label,
    }
    return ClassificationTable(detection.names, detection.fanouts, entries, corrections, provenance)


def _teleported_branches(circuit, detection, entries, qubit: QubitSpec, include_ancilla) -> dict:
    """Bob's normalized qubit for every labelled pattern, ideal resources."""
    layout = ModeLayout.dual_rail(["in"], 1)
    inp = apply_polynomial(
        vacuum(layout), [(qubit.alpha, [("in", "H")]), (qubit.beta, [("in", "V")])]
    )
    pair_layout = ModeLayout.dual_rail(["a", "b"], 2)
    pair = apply_polynomial(vacuum(pair_layout), [
        (_R, [("a", "H"), ("b", "V")]), (-_R, [("a", "V"), ("b", "H")]),
    ])
    state = _prepare(circuit, tensor(inp, pair), include_ancilla)
    det = DetectorBankConfig(detection.groups, (("b", "H"), ("b", "V")))
    branches = detect_conditional(state, det, [("b", "H"), ("b", "V")])
    out = {}
    for pat, br in branches.items():
        label = entries.get(pat)
        if label is None or not label.is_bell or br.probability < AMBIGUITY_THRESHOLD:
            continue
        block = br.qubit_block()
        out.setdefault(label, []).append(block / np.real(np.trace(block)))
    return out


def derive_corrections(circuit: BsmCircuit, detection: DetectorBankConfig,
                       include_ancilla: bool, entries: dict) -> dict:
    """Solve for the Pauli word that returns Bob's qubit to the input, per outcome."""
    probes = [PROBE_STATES["zero"], PROBE_STATES["plus"]]
    candidates = {}
    for q in probes:
        branches = _teleported_branches(circuit, detection, entries, q, include_ancilla)
        target = q.vector
        for label, states in branches.items():
            ok = set()
            for word, p in CORRECTION_WORDS.items():
                fids = [
                    float(np.real(target.conj() @ p @ r @ p.conj().T @ target))
                    for r in states
                ]
                if min(fids) > 1 - 1e-9:
                    ok.add(word)
            candidates[label] = candidates.get(label, ok) & ok
    corrections = {}
    for label, words in candidates.items():
        if len(words) != 1:
            raise RuntimeError(f"no unique correction for {label.value}: {sorted(words)}")
        corrections[label] = words.pop()
    return corrections


@lru_cache(maxsize=None)
def default_table(kind: str = "Boosted", fanout: int | None = None,
                  include_ancilla: bool | None = None) -> ClassificationTable:
    circuit = BsmCircuit.from_kind(kind)
    return build_classification_table(circuit, circuit.detection(fanout=fanout), include_ancilla)


def classify(pattern, table: ClassificationTable, detection: DetectorBankConfig | None = None) -> Outcome:
    if detection is not None and tuple(detection.fanouts) != tuple(table.fanouts):
        raise FanoutMismatch(f"table fanouts {table.fanouts} != detector fanouts {detection.fanouts}")
    pattern = tuple(pattern)
    if len(pattern) != len(table.groups):
        raise FanoutMismatch(f"pattern has {len(pattern)} groups, table has {len(table.groups)}")
    return table.entries.get(pattern, Outcome.INVALID)


def acceptance_probability(n_accepted: float, n_ambiguous: float) -> float:
    """``N_a / (N_a + N_amb)``; invalid events are excluded by the caller."""
    total = n_accepted + n_ambiguous
    if total <= 0:
        raise ZeroDivisionError("no accepted or ambiguous events")
    return n_accepted / total


def correction_for(outcome, table: ClassificationTable | None = None) -> str:
    """Pauli word (I, X, Z or XZ) restoring the input for a Bell outcome."""
    outcome = Outcome(outcome)
    if not outcome.is_bell:
        raise UndefinedCorrection(f"no correction for outcome {outcome.value}")
    if table is None:
        table = default_table("Boosted", None)
    try:
        return table.corrections[outcome]
    except KeyError:
        raise UndefinedCorrection(f"{outcome.value} is never identified by this table") from None


def correction_matrix(word: str) -> np.ndarray:
    return CORRECTION_WORDS[word]
