"""Photon-pair sources: polarization-entangled pairs, heralded qubits, the ancilla.

Every source is a truncated squeezed vacuum. Pair-number terms are generated
exactly from the creation-operator polynomial of the generator, so the
higher-order content (weights in lambda**2, lambda**4, ...) is the physical one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import (
    FockState,
    ModeLayout,
    ZeroWeight,
    apply_mode_unitary,
    apply_polynomial,
    hwp,
    occupation_marginal,
    polarization_unitary,
    vacuum,
)

ANCILLA_ANGLE = math.pi / 8


@dataclass(frozen=True)
class SourceParams:
    """Squeezing amplitude ``lam`` and the largest pair number kept."""

    lam: float
    cutoff: int = 4

    def __post_init__(self):
        if not 0.0 <= self.lam < 1.0:
            raise ValueError(f"lambda must satisfy 0 <= lambda < 1, got {self.lam}")
        if self.cutoff < 1:
            raise ValueError("pair cutoff must be >= 1")


@dataclass(frozen=True)
class QubitSpec:
    alpha: complex
    beta: complex
    label: str = ""

    def __post_init__(self):
        nrm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {nrm}, expected 1")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    @property
    def density_matrix(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    def preparation_unitary(self) -> np.ndarray:
        """SU(2) matrix taking |H> to ``alpha|H> + beta|V>``."""
        a, b = complex(self.alpha), complex(self.beta)
        return np.array([[a, -b.conjugate()], [b, a.conjugate()]], dtype=complex)


_S = 1 / math.sqrt(2)
PROBE_STATES = {
    "zero": QubitSpec(1.0, 0.0, "zero"),
    "one": QubitSpec(0.0, 1.0, "one"),
    "plus": QubitSpec(_S, _S, "plus"),
    "plus_i": QubitSpec(_S, 1j * _S, "plus_i"),
}


def qubit_from_bloch(theta: float, phi: float, label: str = "") -> QubitSpec:
    return QubitSpec(math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2), label)


def _pair_series(layout: ModeLayout, generator, lam: float, cutoff: int) -> list:
    """Terms ``lam**n G**n / n! |vac>`` for n = 0..cutoff (unnormalized)."""
    terms = [vacuum(layout)]
    current = terms[0]
    for n in range(1, cutoff + 1):
        current = apply_polynomial(current, generator).scaled(lam / n)
        terms.append(current)
    return terms


def _sum_terms(layout: ModeLayout, terms: list) -> FockState:
    amps = {}
    for t in terms:
        for occ, a in t.amplitudes.items():
            amps[occ] = amps.get(occ, 0.0) + a
    return FockState(layout, amps)


def _finish(layout: ModeLayout, terms: list, exact_norm_sq: float) -> FockState:
    state = _sum_terms(layout, terms)
    kept = state.norm() ** 2
    out = state.normalized()
    out.discarded_weight = max(0.0, 1.0 - kept / exact_norm_sq)
    return out


def bell_pair_state(params: SourceParams, spatial_a: str = "a", spatial_b: str = "b") -> FockState:
    """Truncated ``exp[lam (a_H b_V - a_V b_H)] |vac>``; one pair is exactly psi-minus.

    ``discarded_weight`` holds the probability of pair numbers above the cutoff.
    """
    layout = ModeLayout.dual_rail([spatial_a, spatial_b], 2 * params.cutoff)
    gen = [
        (1.0, [(spatial_a, "H"), (spatial_b, "V")]),
        (-1.0, [(spatial_a, "V"), (spatial_b, "H")]),
    ]
    terms = _pair_series(layout, gen, params.lam, params.cutoff)
    # sum_n (n + 1) lam^(2n)
    return _finish(layout, terms, 1.0 / (1.0 - params.lam**2) ** 2)


def heralded_input_state(q: QubitSpec, params: SourceParams, spatial_signal: str = "in",
                         spatial_idler: str = "idler") -> FockState:
    """Two-mode squeezed vacuum with the signal rotated to ``alpha|H> + beta|V>``."""
    layout = ModeLayout.dual_rail([spatial_signal, spatial_idler], 2 * params.cutoff)
    gen = [(1.0, [(spatial_signal, "H"), (spatial_idler, "H")])]
    terms = _pair_series(layout, gen, params.lam, params.cutoff)
    state = _finish(layout, terms, 1.0 / (1.0 - params.lam**2))
    rotated = apply_mode_unitary(
        state, polarization_unitary(q.preparation_unitary(), spatial_signal)
    )
    rotated.discarded_weight = state.discarded_weight
    return rotated


def ancilla_source(params: SourceParams, spatial: str = "anc", angle: float = 0.0) -> FockState:
    """Collinear pair source ``exp[lam a_H a_V] |vac>`` followed by a HWP at ``angle``."""
    layout = ModeLayout.dual_rail([spatial], 2 * params.cutoff)
    gen = [(1.0, [(spatial, "H"), (spatial, "V")])]
    terms = _pair_series(layout, gen, params.lam, params.cutoff)
    state = _finish(layout, terms, 1.0 / (1.0 - params.lam**2))
    out = apply_mode_unitary(state, polarization_unitary(hwp(angle), spatial))
    out.discarded_weight = state.discarded_weight
    return out


def ancilla_state(params: SourceParams, spatial: str = "anc") -> FockState:
    """The ancilla as used by the boosted measurement: two-photon part ``(|2H> - |2V>)/sqrt2``."""
    return ancilla_source(params, spatial, ANCILLA_ANGLE)


def photon_number_distribution(state: FockState, modes) -> dict:
    dist = {}
    for occ, p in occupation_marginal(state, modes).items():
        n = sum(occ)
        dist[n] = dist.get(n, 0.0) + p
    return dist


def g2_zero(state: FockState, mode_group) -> float:
    """``<n(n-1)> / <n>^2`` of the total photon number on ``mode_group``."""
    dist = photon_number_distribution(state, mode_group)
    mean = sum(n * p for n, p in dist.items())
    if mean <= 0.0:
        raise ZeroWeight("mean photon number on the group is zero")
    second = sum(n * (n - 1) * p for n, p in dist.items())
    return second / mean**2


def heralded_g2(state: FockState, herald_group, signal_group, efficiency: float = 1.0) -> float:
    """g2(0) of ``signal_group`` conditioned on a threshold click on ``herald_group``."""
    h_idx = state.layout.indices(herald_group)
    s_idx = state.layout.indices(signal_group)
    joint = {}
    for occ, amp in state.amplitudes.items():
        nh = sum(occ[i] for i in h_idx)
        ns = sum(occ[i] for i in s_idx)
        p_click = 1.0 - (1.0 - efficiency) ** nh
        joint[ns] = joint.get(ns, 0.0) + abs(amp) ** 2 * p_click
    mean = sum(n * p for n, p in joint.items())
    if mean <= 0.0:
        raise ZeroWeight("no heralded signal photons")
    total = sum(joint.values())
    second = sum(n * (n - 1) * p for n, p in joint.items())
    return (second / total) / (mean / total) ** 2


def _hv_coincidence(state: FockState, spatial: str) -> float:
    h, v = state.layout.spatial_modes(spatial)
    return sum(abs(a) ** 2 for occ, a in state.amplitudes.items() if occ[h] >= 1 and occ[v] >= 1)


def _depolarized_coincidence(state: FockState, spatial: str) -> float:
    # n photons spread uniformly over |k, n-k>: P(both polarizations occupied) = (n-1)/(n+1)
    h, v = state.layout.spatial_modes(spatial)
    total = 0.0
    for occ, a in state.amplitudes.items():
        n = occ[h] + occ[v]
        if n >= 2:
            total += abs(a) ** 2 * (n - 1) / (n + 1)
    return total


def ancilla_visibility(params: SourceParams, angle_grid, admixture: float = 0.0,
                       spatial: str = "anc") -> float:
    """(max CC_HV - min CC_HV) / max CC_HV over a half-wave-plate scan.

    ``admixture`` mixes in a polarization-depolarized copy of the source with
    weight ``admixture``; it has no HWP dependence and so lowers the visibility.
    """
    angles = list(angle_grid)
    if not angles:
        raise ValueError("angle grid is empty")
    if not 0.0 <= admixture <= 1.0:
        raise ValueError("admixture must lie in [0, 1]")
    base = ancilla_source(params, spatial, 0.0)
    background = _depolarized_coincidence(base, spatial)
    cc = []
    for theta in angles:
        rotated = apply_mode_unitary(base, polarization_unitary(hwp(theta), spatial))
        cc.append((1 - admixture) * _hv_coincidence(rotated, spatial) + admixture * background)
    cmax, cmin = max(cc), min(cc)
    if cmax <= 0.0:
        raise ZeroWeight("no HV coincidences anywhere on the grid")
    return (cmax - cmin) / cmax
