import json

import numpy as np
import pytest

from boosted_teleport.bsm import (
    BELL_OUTCOMES,
    BsmCircuit,
    ClassificationTable,
    FanoutMismatch,
    Outcome,
    UndefinedCorrection,
    acceptance_probability,
    bell_input,
    build_classification_table,
    classify,
    correction_for,
    correction_matrix,
    default_table,
    two_photon_ancilla,
)
from boosted_teleport.detection import detect_exact
from boosted_teleport.fock import tensor


def bell_patterns(circuit, label, fanout=None):
    state = bell_input(label)
    if circuit.uses_ancilla:
        state = tensor(state, two_photon_ancilla())
    return detect_exact(circuit.apply(state), circuit.detection(fanout))


def test_success_probabilities():
    assert default_table("Standard").success_probability == pytest.approx(0.5, abs=1e-12)
    assert default_table("Boosted").success_probability == pytest.approx(0.625, abs=1e-12)
    assert default_table("Boosted", None, False).success_probability == pytest.approx(0.5, abs=1e-12)


def test_threshold_bank_regression():
    # frozen from an independent dict-based prototype of the same circuit
    assert default_table("Boosted", 8).success_probability == pytest.approx(1101 / 2048, abs=1e-12)
    assert default_table("Standard", 8).success_probability == pytest.approx(0.5, abs=1e-12)


def test_standard_identifies_psi_and_never_phi():
    circuit = BsmCircuit.standard()
    table = default_table("Standard")
    for label in BELL_OUTCOMES:
        dist = bell_patterns(circuit, label)
        got = {classify(p, table) for p, w in dist.items() if w > 1e-12}
        if label in (Outcome.PSI_PLUS, Outcome.PSI_MINUS):
            assert got == {label}
        else:
            assert got == {Outcome.AMBIGUOUS}


def test_boosted_outcome_split():
    circuit = BsmCircuit.boosted()
    table = default_table("Boosted")
    identified = {}
    for label in BELL_OUTCOMES:
        dist = bell_patterns(circuit, label)
        assert sum(dist.values()) == pytest.approx(1.0)
        identified[label] = sum(w for p, w in dist.items() if classify(p, table) is label)
        wrong = sum(w for p, w in dist.items() if classify(p, table) not in (label, Outcome.AMBIGUOUS))
        assert wrong == pytest.approx(0.0, abs=1e-12)
    # psi states are always resolved; the ancilla rescues a quarter of each phi
    assert identified[Outcome.PSI_PLUS] == pytest.approx(1.0)
    assert identified[Outcome.PSI_MINUS] == pytest.approx(1.0)
    assert identified[Outcome.PHI_PLUS] == pytest.approx(0.25)
    assert identified[Outcome.PHI_MINUS] == pytest.approx(0.25)
    assert sum(identified.values()) / 4 == pytest.approx(0.625, abs=1e-12)


def test_label_sets_disjoint():
    table = default_table("Boosted")
    circuit = BsmCircuit.boosted()
    owners = {}
    for label in BELL_OUTCOMES:
        for p, w in bell_patterns(circuit, label).items():
            if w > 1e-12:
                owners.setdefault(p, set()).add(label)
    for p, labels in owners.items():
        want = next(iter(labels)) if len(labels) == 1 else Outcome.AMBIGUOUS
        assert table.entries[p] is want


def test_classify_contract():
    table = default_table("Boosted")
    assert classify((0,) * 6, table) is Outcome.INVALID
    assert classify((1, 1, 1, 1, 1, 1), table) is Outcome.INVALID
    psi_minus = next(p for p, o in table.entries.items() if o is Outcome.PSI_MINUS)
    assert classify(psi_minus, table) is Outcome.PSI_MINUS
    with pytest.raises(FanoutMismatch):
        classify(psi_minus, table, BsmCircuit.boosted().detection(8))
    with pytest.raises(FanoutMismatch):
        classify((0, 0), table)


def test_acceptance_probability():
    assert acceptance_probability(50, 50) == 0.5
    assert acceptance_probability(0, 7) == 0.0
    with pytest.raises(ZeroDivisionError):
        acceptance_probability(0, 0)
    table = default_table("Boosted")
    total = table.success_probability
    assert acceptance_probability(total, 1 - total) == pytest.approx(0.625, abs=1e-12)


def test_corrections():
    assert correction_for(Outcome.PSI_MINUS) == "I"
    assert correction_for(Outcome.PSI_PLUS) == "Z"
    assert {correction_for(o) for o in BELL_OUTCOMES} == {"I", "X", "Z", "XZ"}
    with pytest.raises(UndefinedCorrection):
        correction_for(Outcome.AMBIGUOUS)
    with pytest.raises(UndefinedCorrection):
        correction_for(Outcome.INVALID)
    with pytest.raises(UndefinedCorrection):
        correction_for(Outcome.PHI_PLUS, default_table("Standard"))
    assert np.allclose(correction_matrix("XZ"), [[0, -1], [1, 0]])


def test_table_json_round_trip_and_hash():
    for kind, fanout in (("Standard", None), ("Boosted", 8)):
        table = default_table(kind, fanout)
        again = ClassificationTable.from_json(table.to_json())
        assert again.entries == table.entries
        assert again.corrections == table.corrections
        assert again.fanouts == table.fanouts
        assert again.convention_hash == table.convention_hash
        assert json.loads(table.to_json())["provenance"]
    assert default_table("Boosted", 8).convention_hash != default_table("Boosted").convention_hash


def test_table_rejects_lossy_detection():
    circuit = BsmCircuit.standard()
    with pytest.raises(ValueError):
        build_classification_table(circuit, circuit.detection(None, efficiency=0.9))


def test_circuit_description():
    d = BsmCircuit.boosted().describe()
    assert d["stages"] == [["in", "a", "c", "d"], ["d", "anc", "e", "f"]]
    assert BsmCircuit.boosted().uses_ancilla and not BsmCircuit.standard().uses_ancilla
