"""End-to-end teleportation for the standard, boosted and background scenarios.

The exact pipeline conditions on Bob holding exactly one photon, sends the
remaining modes through the measurement circuit and the detector banks, and
keeps Bob's conditional qubit for every click pattern. Patterns are then
post-selected on one herald click and the scenario's coincidence order,
classified, corrected and scored.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .bsm import (
    BELL_OUTCOMES,
    BsmCircuit,
    ClassificationTable,
    Outcome,
    acceptance_probability,
    classify,
    correction_matrix,
    default_table,
)
from .detection import DetectorBankConfig, DetectorGroup, detect_conditional
from .fock import FockState, tensor
from .sources import (
    PROBE_STATES,
    QubitSpec,
    SourceParams,
    ancilla_state,
    bell_pair_state,
    heralded_input_state,
)
from .tomography import (
    BASES,
    PROCESS_METHOD,
    STATE_METHOD,
    CountRecord,
    bootstrap_fidelity,
    chi_from_unitary,
    estimate_process,
    fit_state_mle,
    p_plus,
    process_fidelity,
    pure_state_fidelity,
)

HERALD = "herald"
BOB = (("b", "H"), ("b", "V"))
REPORTED_OUTCOMES = BELL_OUTCOMES + (Outcome.AMBIGUOUS,)


class ScenarioKind(str, Enum):
    SQT = "SQT"
    BQT = "BQT"
    SQT_BACKGROUND = "SQT_background"


class TruncationBoundExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    """Source brightness, detector model and post-selection for one scenario.

    ``ambiguous_correction`` is the fixed Pauli word applied to ambiguous
    events; the default leaves them uncorrected.
    """

    kind: ScenarioKind
    bell: SourceParams
    input: SourceParams
    ancilla: SourceParams | None = None
    fanout: int | None = 8
    efficiency: float = 1.0
    herald_efficiency: float = 1.0
    herald_fanout: int | None = 1
    total_cutoff: int = 8
    ambiguous_correction: str = "I"
    max_truncation_weight: float = 0.05
    group_efficiency: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        object.__setattr__(self, "group_efficiency", tuple(sorted(dict(self.group_efficiency).items())))
        names = set(self.circuit.detection(self.fanout).names)
        unknown = [n for n, _ in self.group_efficiency if n not in names]
        if unknown:
            raise ValueError(f"unknown detector groups {unknown}; expected a subset of {sorted(names)}")
        if self.kind is ScenarioKind.SQT and self.ancilla is not None and self.ancilla.lam > 0:
            raise ValueError("SQT blocks the ancilla source")
        if self.kind is not ScenarioKind.SQT and (self.ancilla is None or self.ancilla.lam == 0):
            raise ValueError(f"{self.kind.value} needs an active ancilla source")
        if self.total_cutoff < self.photon_total:
            raise ValueError(f"cutoff {self.total_cutoff} below coincidence order {self.photon_total}")

    @property
    def photon_total(self) -> int:
        return 6 if self.kind is ScenarioKind.BQT else 4

    @property
    def lossless_pnr(self) -> bool:
        """Every detector resolves photon number without loss.

        Post-selection then fixes the total photon number exactly, so terms
        dropped by truncation cannot leak into accepted events.
        """
        return (
            self.fanout is None and self.herald_fanout is None
            and self.efficiency == 1.0 and self.herald_efficiency == 1.0
            and all(eta == 1.0 for _, eta in self.group_efficiency)
        )

    @property
    def circuit(self) -> BsmCircuit:
        return BsmCircuit.standard() if self.kind is ScenarioKind.SQT else BsmCircuit.boosted()

    def table(self) -> ClassificationTable:
        if self.kind is ScenarioKind.SQT:
            return default_table("Standard", self.fanout)
        return default_table("Boosted", self.fanout, self.kind is ScenarioKind.BQT)

    def detection(self) -> DetectorBankConfig:
        bsm = self.circuit.detection(self.fanout, self.efficiency)
        overrides = dict(self.group_efficiency)
        groups = tuple(replace(g, efficiency=overrides.get(g.name, g.efficiency)) for g in bsm.groups)
        herald = DetectorGroup(
            HERALD, (("idler", "H"), ("idler", "V")), self.herald_fanout, self.herald_efficiency
        )
        return DetectorBankConfig(groups + (herald,), BOB)

    @classmethod
    def build(cls, kind, lam: float = 0.1, *, bell_scale: float = 1.0, input_scale: float = 1.0,
              ancilla_scale: float = 1.0, pair_cutoff: int = 4, **kwargs) -> "Scenario":
        """One global lambda with per-source multipliers."""
        kind = ScenarioKind(kind)
        anc = None
        if kind is not ScenarioKind.SQT:
            anc = SourceParams(lam * ancilla_scale, pair_cutoff)
        return cls(
            kind,
            SourceParams(lam * bell_scale, pair_cutoff),
            SourceParams(lam * input_scale, pair_cutoff),
            anc,
            **kwargs,
        )

    @classmethod
    def ideal(cls, kind, **kwargs) -> "Scenario":
        """Single-pair sources, lossless number-resolving detection.

        Keeping one pair per source is the lambda -> 0 limit once the events are
        post-selected on the coincidence order; lambda only sets the event rate.
        """
        kwargs.setdefault("fanout", None)
        kwargs.setdefault("herald_fanout", None)
        return cls.build(kind, 0.1, pair_cutoff=1, **kwargs)


@dataclass
class OutcomeResult:
    outcome: Outcome
    probability: float
    rho: np.ndarray | None
    fidelity: float | None
    fidelity_err: float = 0.0
    counts: int | None = None
    records: tuple = ()


@dataclass
class TeleportationReport:
    scenario: ScenarioKind
    input_label: str
    outcomes: dict
    p_a: float | None
    mean_fidelity: float | None
    q: float | None
    defined: tuple
    diagnostics: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def fraction(self, outcome: Outcome) -> float:
        """Share of ``outcome`` among accepted plus ambiguous events."""
        total = sum(self.outcomes[o].probability for o in REPORTED_OUTCOMES)
        return self.outcomes[outcome].probability / total if total > 0 else float("nan")


def teleport_fidelity(rho_tel: np.ndarray, q: QubitSpec) -> float:
    """``<psi_in| rho_tel |psi_in>`` for the pure input ``q``."""
    rho_tel = np.asarray(rho_tel, dtype=complex)
    if not np.allclose(rho_tel, rho_tel.conj().T, atol=1e-10):
        raise ValueError("rho_tel is not Hermitian")
    if np.linalg.eigvalsh(rho_tel).min() < -1e-9:
        raise ValueError("rho_tel is not positive semidefinite")
    return pure_state_fidelity(rho_tel / np.real(np.trace(rho_tel)), q.vector)


def quality(p_a: float, mean_fidelity: float) -> float:
    for name, v in (("p_a", p_a), ("mean_fidelity", mean_fidelity)):
        if not 0.0 <= v <= 1.0 + 1e-12:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return p_a * mean_fidelity


def prepare_state(q: QubitSpec, scenario: Scenario) -> FockState:
    """All three sources, truncated at the global cutoff."""
    cut = scenario.total_cutoff
    state = tensor(heralded_input_state(q, scenario.input, "in", "idler"),
                   bell_pair_state(scenario.bell, "a", "b"), cut)
    if scenario.kind is not ScenarioKind.SQT:
        state = tensor(state, ancilla_state(scenario.ancilla, "anc"), cut)
    return state


def _bob_single_photon(state: FockState) -> FockState:
    h, v = state.layout.spatial_modes("b")
    kept = {occ: a for occ, a in state.amplitudes.items() if occ[h] + occ[v] == 1}
    return FockState(state.layout, kept)


@dataclass
class Branch:
    """One post-selected click pattern with Bob's corrected, unnormalized qubit."""

    clicks: tuple
    outcome: Outcome
    probability: float
    block: np.ndarray


def _truncation_diagnostics(state: FockState, scenario: Scenario) -> dict:
    high = sum(abs(a) ** 2 for occ, a in state.amplitudes.items() if sum(occ) >= scenario.photon_total)
    rel = state.discarded_weight / high if high > 0 else 0.0
    return {"discarded_weight": state.discarded_weight, "relative_truncation_weight": rel}


def exact_branches(q: QubitSpec, scenario: Scenario, table: ClassificationTable | None = None,
                   corrected: bool = True):
    """Post-selected branches and diagnostics for one input state.

    With ``corrected=False`` Bob's qubit is left as it arrives.
    """
    table = table or scenario.table()
    detection = scenario.detection()
    joint = prepare_state(q, scenario)
    diagnostics = _truncation_diagnostics(joint, scenario)
    diagnostics["truncation_checked"] = not scenario.lossless_pnr
    if (diagnostics["truncation_checked"]
            and diagnostics["relative_truncation_weight"] > scenario.max_truncation_weight):
        raise TruncationBoundExceeded(
            f"relative truncation weight {diagnostics['relative_truncation_weight']:.3g} "
            f"exceeds bound {scenario.max_truncation_weight}"
        )
    state = scenario.circuit.apply(_bob_single_photon(joint))
    cond = detect_conditional(state, detection, BOB)
    bsm_groups = len(detection.groups) - 1
    bsm_clicks = scenario.photon_total - 2
    branches = []
    for clicks in sorted(cond):
        br = cond[clicks]
        if clicks[-1] != 1 or sum(clicks[:bsm_groups]) != bsm_clicks:
            continue
        outcome = classify(clicks[:bsm_groups], table)
        if not corrected:
            word = "I"
        elif outcome.is_bell:
            word = table.corrections[outcome]
        elif outcome is Outcome.AMBIGUOUS:
            word = scenario.ambiguous_correction
        else:
            word = "I"
        p = correction_matrix(word)
        block = p @ br.qubit_block() @ p.conj().T
        branches.append(Branch(clicks, outcome, float(np.real(np.trace(block))), block))
    diagnostics["post_selected_probability"] = sum(b.probability for b in branches)
    return branches, diagnostics


def _summarize(outcomes: dict, defined: tuple):
    n_a = sum(outcomes[o].probability for o in BELL_OUTCOMES)
    n_amb = outcomes[Outcome.AMBIGUOUS].probability
    p_a = acceptance_probability(n_a, n_amb) if n_a + n_amb > 0 else None
    weighted = [
        (outcomes[o].probability, outcomes[o].fidelity)
        for o in BELL_OUTCOMES
        if outcomes[o].fidelity is not None and outcomes[o].probability > 0
    ]
    w = sum(p for p, _ in weighted)
    mean_f = sum(p * f for p, f in weighted) / w if w > 0 else None
    q = quality(p_a, mean_f) if p_a is not None and mean_f is not None else None
    return p_a, mean_f, q


def run_teleportation_exact(q: QubitSpec, scenario: Scenario,
                            table: ClassificationTable | None = None,
                            corrected: bool = True) -> TeleportationReport:
    table = table or scenario.table()
    branches, diagnostics = exact_branches(q, scenario, table, corrected)
    blocks = defaultdict(lambda: np.zeros((2, 2), dtype=complex))
    probs = defaultdict(float)
    for b in branches:
        blocks[b.outcome] += b.block
        probs[b.outcome] += b.probability
    outcomes = {}
    for o in REPORTED_OUTCOMES:
        p = probs.get(o, 0.0)
        if p > 0:
            rho = blocks[o] / p
            outcomes[o] = OutcomeResult(o, p, rho, teleport_fidelity(rho, q))
        else:
            outcomes[o] = OutcomeResult(o, 0.0, None, None)
    diagnostics["invalid_probability"] = probs.get(Outcome.INVALID, 0.0)
    defined = table.defined_outcomes()
    p_a, mean_f, qual = _summarize(outcomes, defined)
    return TeleportationReport(
        scenario.kind, q.label, outcomes, p_a, mean_f, qual, defined, diagnostics,
        {"mode": "exact", "corrected": corrected, "ambiguous_correction": scenario.ambiguous_correction,
         "table_hash": table.convention_hash, "process_tomography": PROCESS_METHOD},
    )


@dataclass(frozen=True)
class Event:
    clicks: tuple
    outcome: str
    basis: str
    result: int


def run_teleportation_sampled(q: QubitSpec, scenario: Scenario, shots: int, seed,
                              table: ClassificationTable | None = None,
                              bootstrap: int = 250):
    """Monte Carlo over post-selected coincidence events.

    Each of the ``shots`` events is a click pattern drawn from the exact
    post-selected distribution; Bob's photon is measured in a uniformly chosen
    Pauli basis. Per outcome, the state is reconstructed by maximum likelihood.
    Returns ``(events, report)``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    table = table or scenario.table()
    branches, diagnostics = exact_branches(q, scenario, table)
    rng = np.random.default_rng(seed)
    weights = np.array([b.probability for b in branches])
    if weights.sum() <= 0:
        events = []
    else:
        picks = rng.choice(len(branches), size=shots, p=weights / weights.sum())
        bases = rng.integers(0, 3, size=shots)
        uniform = rng.random(shots)
        plus_prob = np.array([
            [p_plus(b.block / b.probability, basis) if b.probability > 0 else 0.5 for basis in BASES]
            for b in branches
        ])
        events = [
            Event(branches[i].clicks, branches[i].outcome.value, BASES[k],
                  1 if u < plus_prob[i, k] else -1)
            for i, k, u in zip(picks, bases, uniform)
        ]
    tallies = defaultdict(lambda: {b: [0, 0] for b in BASES})
    counts = defaultdict(int)
    for ev in events:
        counts[ev.outcome] += 1
        tallies[ev.outcome][ev.basis][0 if ev.result == 1 else 1] += 1
    outcomes = {}
    boot_seeds = np.random.SeedSequence(rng.integers(2**63)).spawn(len(REPORTED_OUTCOMES))
    for o, ss in zip(REPORTED_OUTCOMES, boot_seeds):
        n = counts.get(o.value, 0)
        records = tuple(CountRecord(b, *tallies[o.value][b]) for b in BASES) if n else ()
        rho = fid = None
        err = 0.0
        if n and all(r.total > 0 for r in records):
            rho = fit_state_mle(records).rho
            fid = pure_state_fidelity(rho, q.vector)
            if bootstrap:
                err = bootstrap_fidelity(records, q.vector, bootstrap, ss)
        outcomes[o] = OutcomeResult(o, float(n), rho, fid, err, n, records)
    diagnostics["invalid_events"] = counts.get(Outcome.INVALID.value, 0)
    defined = table.defined_outcomes()
    p_a, mean_f, qual = _summarize(outcomes, defined)
    report = TeleportationReport(
        scenario.kind, q.label, outcomes, p_a, mean_f, qual, defined, diagnostics,
        {"mode": "sampled", "shots": shots, "ambiguous_correction": scenario.ambiguous_correction,
         "table_hash": table.convention_hash, "state_tomography": STATE_METHOD,
         "process_tomography": PROCESS_METHOD},
    )
    return events, report


@dataclass
class ScenarioReport:
    """Reports for the four probe inputs plus pooled figures and chi matrices."""

    scenario: Scenario
    reports: dict
    p_a: float | None
    mean_fidelity: float | None
    q: float | None
    chi: dict
    process_fidelity: dict
    defined: tuple


def _pooled(reports: dict):
    n_a = n_amb = 0.0
    fw = w = 0.0
    for rep in reports.values():
        for o in BELL_OUTCOMES:
            r = rep.outcomes[o]
            n_a += r.probability
            if r.fidelity is not None:
                fw += r.probability * r.fidelity
                w += r.probability
        n_amb += rep.outcomes[Outcome.AMBIGUOUS].probability
    p_a = acceptance_probability(n_a, n_amb) if n_a + n_amb > 0 else None
    mean_f = fw / w if w > 0 else None
    q = quality(p_a, mean_f) if p_a is not None and mean_f is not None else None
    return p_a, mean_f, q


def process_per_outcome(reports: dict, defined: tuple):
    """Chi (post-correction) and its fidelity with the identity, per defined outcome."""
    ideal = chi_from_unitary(np.eye(2))
    chis, fps = {}, {}
    for o in defined:
        outputs = {}
        for name, rep in reports.items():
            if rep.outcomes[o].rho is None:
                break
            outputs[name] = rep.outcomes[o].rho
        else:
            chi = estimate_process(outputs).chi
            chis[o] = chi
            fps[o] = process_fidelity(chi, ideal)
    return chis, fps


def run_scenario(scenario: Scenario, shots: int = 0, seed=0, inputs=None,
                 bootstrap: int = 250) -> ScenarioReport:
    """Run every input (default: the four probe states) exactly or by sampling."""
    inputs = inputs or [PROBE_STATES[k] for k in ("zero", "one", "plus", "plus_i")]
    table = scenario.table()
    reports = {}
    seeds = np.random.SeedSequence(seed).spawn(len(inputs))
    for q, ss in zip(inputs, seeds):
        if shots:
            _, rep = run_teleportation_sampled(q, scenario, shots, ss, table, bootstrap)
        else:
            rep = run_teleportation_exact(q, scenario, table)
        reports[q.label] = rep
    p_a, mean_f, qual = _pooled(reports)
    chis, fps = {}, {}
    if set(reports) >= {"zero", "one", "plus", "plus_i"}:
        chis, fps = process_per_outcome(reports, table.defined_outcomes())
    return ScenarioReport(scenario, reports, p_a, mean_f, qual, chis, fps, table.defined_outcomes())
