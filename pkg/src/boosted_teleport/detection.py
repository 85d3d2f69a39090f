"""Pseudo-photon-number-resolving detection.

Each group is a set of modes whose photons are pooled (e.g. one polarization
output of a PBS), thinned by a per-group efficiency and split evenly over
``fanout`` threshold detectors. The observable is the number of detectors that
fire in each group. ``fanout=None`` is the number-resolving limit.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fock import FockState

DEFAULT_FANOUT = 8


class UncoveredModes(ValueError):
    pass


@dataclass(frozen=True)
class DetectorGroup:
    name: str
    modes: tuple
    fanout: int | None = DEFAULT_FANOUT
    efficiency: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(tuple(m) for m in self.modes))
        if self.fanout is not None and self.fanout < 1:
            raise ValueError(f"fanout must be >= 1 or None, got {self.fanout}")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")


@dataclass(frozen=True)
class DetectorBankConfig:
    """Detector groups plus modes that are deliberately left undetected."""

    groups: tuple
    traced: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "traced", tuple(tuple(m) for m in self.traced))
        names = [g.name for g in self.groups]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate group names: {names}")

    @property
    def names(self) -> tuple:
        return tuple(g.name for g in self.groups)

    @property
    def fanouts(self) -> tuple:
        return tuple(g.fanout for g in self.groups)

    @classmethod
    def polarization_resolved(cls, spatial_labels, fanout=DEFAULT_FANOUT, efficiency=1.0,
                              traced=()) -> "DetectorBankConfig":
        """A PBS on every spatial output, each polarization onto its own 1xN bank."""
        groups = [
            DetectorGroup(f"{s}_{p}", ((s, p),), fanout, efficiency)
            for s in spatial_labels
            for p in ("H", "V")
        ]
        return cls(tuple(groups), tuple(traced))

    def subset(self, names) -> "DetectorBankConfig":
        keep = [g for g in self.groups if g.name in names]
        return DetectorBankConfig(tuple(keep), self.traced)


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    if n == k:
        return 1
    if n == 0 or k == 0:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


@lru_cache(maxsize=None)
def occupancy_click_distribution(n: int, m: int | None) -> tuple:
    """P(k detectors fire) for ``n`` photons spread uniformly over ``m`` detectors.

    ``P(k) = C(m, k) k! S(n, k) / m**n``; returned as a tuple indexed by k.
    """
    if n < 0:
        raise ValueError("photon number must be non-negative")
    if m is None:
        return tuple(1.0 if k == n else 0.0 for k in range(n + 1))
    if m < 1:
        raise ValueError("fanout must be >= 1")
    top = min(n, m)
    denom = m**n
    return tuple(math.comb(m, k) * math.factorial(k) * stirling2(n, k) / denom for k in range(top + 1))


@lru_cache(maxsize=None)
def click_kernel(n: int, m: int | None, efficiency: float) -> tuple:
    """P(k clicks | n photons) with binomial loss followed by the occupancy split."""
    out = defaultdict(float)
    for j in range(n + 1):
        survive = math.comb(n, j) * efficiency**j * (1.0 - efficiency) ** (n - j)
        if survive == 0.0:
            continue
        for k, p in enumerate(occupancy_click_distribution(j, m)):
            if p:
                out[k] += survive * p
    return tuple(sorted(out.items()))


def _group_indices(state: FockState, config: DetectorBankConfig) -> list:
    layout = state.layout
    idx = [layout.indices(g.modes) for g in config.groups]
    covered = {i for group in idx for i in group} | set(layout.indices(config.traced))
    missing = [layout.modes[i] for i in range(len(layout)) if i not in covered]
    if missing:
        raise UncoveredModes(f"modes neither detected nor traced: {missing}")
    return idx


def _pattern_distribution(counts: tuple, config: DetectorBankConfig) -> list:
    branches = [((), 1.0)]
    for n, g in zip(counts, config.groups):
        kernel = click_kernel(n, g.fanout, g.efficiency)
        branches = [(pat + (k,), p * q) for pat, p in branches for k, q in kernel]
    return branches


def detect_exact(state: FockState, config: DetectorBankConfig) -> dict:
    """Exact distribution over click patterns (tuples ordered like ``config.groups``)."""
    idx = _group_indices(state, config)
    photon_counts = defaultdict(float)
    for occ, amp in state.amplitudes.items():
        photon_counts[tuple(sum(occ[i] for i in g) for g in idx)] += abs(amp) ** 2
    dist = defaultdict(float)
    for counts, w in photon_counts.items():
        for pat, p in _pattern_distribution(counts, config):
            dist[pat] += w * p
    return dict(dist)


@dataclass
class ConditionalBranch:
    """Click-pattern probability with the unnormalized state of the kept modes.

    ``rho`` is expressed on ``basis`` (occupation tuples of the kept modes) and
    has trace equal to ``probability``.
    """

    probability: float
    basis: tuple
    rho: np.ndarray

    def conditional_state(self) -> np.ndarray:
        return self.rho / self.probability

    def qubit_block(self) -> np.ndarray:
        """Unnormalized 2x2 block on |1_H 0_V>, |0_H 1_V> of a two-mode kept set."""
        pos = {b: i for i, b in enumerate(self.basis)}
        idx = [pos.get((1, 0)), pos.get((0, 1))]
        block = np.zeros((2, 2), dtype=complex)
        for r, i in enumerate(idx):
            for c, j in enumerate(idx):
                if i is not None and j is not None:
                    block[r, c] = self.rho[i, j]
        return block


def detect_conditional(state: FockState, config: DetectorBankConfig, kept) -> dict:
    """Joint distribution over (click pattern, state of the ``kept`` modes).

    The detected modes are measured diagonally in photon number, so the kept
    modes are left in a mixture of pure conditional states, one per detected
    occupation pattern, weighted by the click kernel.
    """
    kept_idx = state.layout.indices(kept)
    kept_set = set(kept_idx)
    cfg = DetectorBankConfig(config.groups, tuple(config.traced) + tuple(tuple(k) for k in kept))
    idx = _group_indices(state, cfg)
    basis = sorted({tuple(occ[i] for i in kept_idx) for occ in state.amplitudes})
    pos = {b: i for i, b in enumerate(basis)}
    dim = len(basis)
    vectors = defaultdict(lambda: np.zeros(dim, dtype=complex))
    for occ, amp in state.amplitudes.items():
        key = tuple(sum(occ[i] for i in g) for g in idx)
        # distinct occupations of measured or traced modes are orthogonal
        rest = tuple(n for i, n in enumerate(occ) if i not in kept_set)
        vectors[(key, rest)][pos[tuple(occ[i] for i in kept_idx)]] += amp
    acc = {}
    for (counts, _), vec in vectors.items():
        rho = np.outer(vec, vec.conj())
        for pat, p in _pattern_distribution(counts, cfg):
            if p == 0.0:
                continue
            if pat in acc:
                acc[pat] += p * rho
            else:
                acc[pat] = p * rho
    return {
        pat: ConditionalBranch(float(np.real(np.trace(r))), tuple(basis), r)
        for pat, r in acc.items()
    }


def sample_patterns(dist: dict, shots: int, rng: np.random.Generator) -> list:
    """Draw ``shots`` patterns from an exact distribution (deterministic key order)."""
    keys = sorted(dist)
    probs = np.array([dist[k] for k in keys], dtype=float)
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    draws = rng.choice(len(keys), size=shots, p=probs)
    return [keys[i] for i in draws]


def detect_sample(state: FockState, config: DetectorBankConfig, seed) -> tuple:
    """One click pattern drawn from :func:`detect_exact`."""
    rng = np.random.default_rng(seed)
    return sample_patterns(detect_exact(state, config), 1, rng)[0]
