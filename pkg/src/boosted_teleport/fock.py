"""Truncated multimode Fock states and exact linear-optical transformations.

States are sparse maps from occupation vectors to complex amplitudes over an
ordered set of (spatial, polarization) modes. Linear optics acts on creation
operators in the Heisenberg picture, ``a_i^dag -> sum_j U[j, i] a_j^dag``, so a
unitary is applied by re-creating every photon of a term in the transformed
modes.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

PRUNE_THRESHOLD = 1e-14
UNITARY_TOL = 1e-10

POLARIZATIONS = ("H", "V")

Mode = tuple  # (spatial_label, polarization)


class CutoffExceeded(ValueError):
    pass


class NonUnitaryMatrix(ValueError):
    pass


class LabelCollision(ValueError):
    pass


class ZeroWeight(ValueError):
    pass


@dataclass(frozen=True)
class ModeLayout:
    """Ordered registry of ``(spatial, polarization)`` modes."""

    modes: tuple
    total_cutoff: int = 8

    def __post_init__(self):
        modes = tuple((str(s), str(p)) for s, p in self.modes)
        object.__setattr__(self, "modes", modes)
        if len(set(modes)) != len(modes):
            raise ValueError(f"duplicate modes in layout: {modes}")
        for _, pol in modes:
            if pol not in POLARIZATIONS:
                raise ValueError(f"unknown polarization {pol!r}")
        if self.total_cutoff < 1:
            raise ValueError("total_cutoff must be >= 1")
        object.__setattr__(self, "_index", {m: i for i, m in enumerate(modes)})

    @classmethod
    def dual_rail(cls, spatial_labels: Iterable[str], total_cutoff: int = 8) -> "ModeLayout":
        """Layout with H and V modes for every spatial label, in the given order."""
        return cls(tuple((s, p) for s in spatial_labels for p in POLARIZATIONS), total_cutoff)

    def __len__(self):
        return len(self.modes)

    @property
    def spatial_labels(self) -> tuple:
        seen = []
        for s, _ in self.modes:
            if s not in seen:
                seen.append(s)
        return tuple(seen)

    def index(self, mode) -> int:
        if isinstance(mode, (int, np.integer)):
            if not 0 <= mode < len(self.modes):
                raise KeyError(f"mode index {mode} out of range")
            return int(mode)
        try:
            return self._index[tuple(mode)]
        except KeyError:
            raise KeyError(f"mode {mode!r} not in layout") from None

    def indices(self, modes) -> list:
        return [self.index(m) for m in modes]

    def spatial_modes(self, spatial: str) -> list:
        """Indices of the H and V modes of one spatial label (H first)."""
        return [self.index((spatial, p)) for p in POLARIZATIONS]

    def with_cutoff(self, total_cutoff: int) -> "ModeLayout":
        return ModeLayout(self.modes, total_cutoff)

    def relabel(self, mapping: dict) -> "ModeLayout":
        modes = tuple((mapping.get(s, s), p) for s, p in self.modes)
        return ModeLayout(modes, self.total_cutoff)

    def subset(self, indices: Sequence[int]) -> "ModeLayout":
        return ModeLayout(tuple(self.modes[i] for i in indices), self.total_cutoff)


@dataclass
class FockState:
    """Sparse superposition of occupation vectors.

    ``discarded_weight`` accumulates squared amplitude dropped by pruning or
    truncation; it is a diagnostic and never renormalized away silently.
    """

    layout: ModeLayout
    amplitudes: dict = field(default_factory=dict)
    discarded_weight: float = 0.0

    def __post_init__(self):
        n = len(self.layout)
        clean = {}
        for occ, amp in self.amplitudes.items():
            occ = tuple(int(x) for x in occ)
            if len(occ) != n:
                raise ValueError(f"occupation {occ} does not match {n} modes")
            if abs(amp) >= PRUNE_THRESHOLD:
                clean[occ] = complex(amp)
            else:
                self.discarded_weight += abs(amp) ** 2
        self.amplitudes = clean

    def __len__(self):
        return len(self.amplitudes)

    def __iter__(self):
        return iter(self.amplitudes.items())

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def normalized(self) -> "FockState":
        nrm = self.norm()
        if nrm == 0:
            raise ZeroWeight("cannot normalize the zero vector")
        return FockState(
            self.layout,
            {k: v / nrm for k, v in self.amplitudes.items()},
            self.discarded_weight / nrm**2,
        )

    def scaled(self, factor: complex) -> "FockState":
        return FockState(
            self.layout, {k: v * factor for k, v in self.amplitudes.items()}, self.discarded_weight
        )

    def amplitude(self, occupation) -> complex:
        return self.amplitudes.get(tuple(occupation), 0.0)

    def probabilities(self) -> dict:
        return {k: abs(v) ** 2 for k, v in self.amplitudes.items()}

    def photon_numbers(self) -> set:
        return {sum(occ) for occ in self.amplitudes}

    def relabel(self, mapping: dict) -> "FockState":
        """Rename spatial labels; amplitudes are untouched."""
        return FockState(self.layout.relabel(mapping), dict(self.amplitudes), self.discarded_weight)

    def inner(self, other: "FockState") -> complex:
        if other.layout.modes != self.layout.modes:
            raise ValueError("layouts differ")
        return sum(np.conj(a) * other.amplitudes.get(k, 0.0) for k, a in self.amplitudes.items())

    def allclose(self, other: "FockState", atol: float = 1e-9) -> bool:
        keys = set(self.amplitudes) | set(other.amplitudes)
        return all(
            abs(self.amplitudes.get(k, 0.0) - other.amplitudes.get(k, 0.0)) <= atol for k in keys
        )

    def truncated(self, total_cutoff: int) -> "FockState":
        """Drop terms above ``total_cutoff`` photons, recording their weight."""
        kept, dropped = {}, 0.0
        for occ, amp in self.amplitudes.items():
            if sum(occ) <= total_cutoff:
                kept[occ] = amp
            else:
                dropped += abs(amp) ** 2
        return FockState(
            self.layout.with_cutoff(total_cutoff), kept, self.discarded_weight + dropped
        )


@dataclass(frozen=True)
class ModeUnitary:
    matrix: np.ndarray
    targets: tuple

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise NonUnitaryMatrix(f"matrix must be square, got shape {u.shape}")
        if len(self.targets) != u.shape[0]:
            raise ValueError("number of target modes does not match matrix size")
        if not np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=UNITARY_TOL, rtol=0):
            raise NonUnitaryMatrix("matrix is not unitary")
        object.__setattr__(self, "matrix", u)
        object.__setattr__(self, "targets", tuple(self.targets))

    def dagger(self) -> "ModeUnitary":
        return ModeUnitary(self.matrix.conj().T, self.targets)


def vacuum(layout: ModeLayout) -> FockState:
    return FockState(layout, {(0,) * len(layout): 1.0})


def _add_creation(acc: dict, occ: tuple, amp: complex, index: int):
    n = occ[index]
    new = occ[:index] + (n + 1,) + occ[index + 1 :]
    acc[new] += amp * math.sqrt(n + 1)


def apply_creation(state: FockState, mode) -> FockState:
    """Apply one creation operator; the result is generally unnormalized."""
    idx = state.layout.index(mode)
    cutoff = state.layout.total_cutoff
    out = defaultdict(complex)
    for occ, amp in state.amplitudes.items():
        if sum(occ) + 1 > cutoff:
            raise CutoffExceeded(f"creation in mode {mode!r} exceeds cutoff {cutoff}")
        _add_creation(out, occ, amp, idx)
    return FockState(state.layout, dict(out), state.discarded_weight)


def apply_polynomial(state: FockState, terms) -> FockState:
    """Apply ``sum_k c_k prod_m a_m^dag`` given as ``[(c_k, [modes...]), ...]``."""
    out = defaultdict(complex)
    for coeff, modes in terms:
        s = state
        for m in modes:
            s = apply_creation(s, m)
        for occ, amp in s.amplitudes.items():
            out[occ] += coeff * amp
    return FockState(state.layout, dict(out), state.discarded_weight)


def apply_mode_unitary(state: FockState, u: ModeUnitary) -> FockState:
    """Transform creation operators of the target modes by ``u``."""
    targets = state.layout.indices(u.targets)
    mat = u.matrix
    out = defaultdict(complex)
    for occ, amp in state.amplitudes.items():
        base = list(occ)
        photons = []
        scale = 1.0
        for col, m in enumerate(targets):
            photons.extend([col] * occ[m])
            scale *= math.factorial(occ[m])
            base[m] = 0
        partial = {tuple(base): amp / math.sqrt(scale)}
        for col in photons:
            nxt = defaultdict(complex)
            for row, m in enumerate(targets):
                c = mat[row, col]
                if c == 0:
                    continue
                for o, a in partial.items():
                    _add_creation(nxt, o, a * c, m)
            partial = nxt
        for o, a in partial.items():
            out[o] += a
    return FockState(state.layout, dict(out), state.discarded_weight)


def beam_splitter(reflectivity: float = 0.5) -> np.ndarray:
    """Real symmetric splitter; ``beam_splitter(0.5) == [[1, 1], [1, -1]] / sqrt(2)``."""
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError(f"reflectivity must lie in [0, 1], got {reflectivity}")
    t, r = math.sqrt(1.0 - reflectivity), math.sqrt(reflectivity)
    return np.array([[t, r], [r, -t]], dtype=complex)


def hwp(theta: float) -> np.ndarray:
    """Half-wave plate at angle ``theta`` acting on (H, V)."""
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp(theta: float) -> np.ndarray:
    """Quarter-wave plate at angle ``theta`` acting on (H, V)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [[c * c + 1j * s * s, (1 - 1j) * s * c], [(1 - 1j) * s * c, s * s + 1j * c * c]],
        dtype=complex,
    )


def splitter_between(layout: ModeLayout, spatial_a: str, spatial_b: str, pol: str,
                     reflectivity: float = 0.5) -> ModeUnitary:
    return ModeUnitary(beam_splitter(reflectivity), ((spatial_a, pol), (spatial_b, pol)))


def polarization_unitary(matrix: np.ndarray, spatial: str) -> ModeUnitary:
    return ModeUnitary(matrix, ((spatial, "H"), (spatial, "V")))


def tensor(a: FockState, b: FockState, total_cutoff: int | None = None) -> FockState:
    """Joint state on the concatenated layout.

    Without ``total_cutoff`` the cutoffs add. With it, product terms above the
    bound are dropped and their weight is added to ``discarded_weight``.
    """
    clash = set(a.layout.spatial_labels) & set(b.layout.spatial_labels)
    if clash:
        raise LabelCollision(f"spatial labels appear in both states: {sorted(clash)}")
    if total_cutoff is None:
        total_cutoff = a.layout.total_cutoff + b.layout.total_cutoff
    layout = ModeLayout(a.layout.modes + b.layout.modes, total_cutoff)
    amps = {}
    dropped = 0.0
    for oa, va in a.amplitudes.items():
        na = sum(oa)
        for ob, vb in b.amplitudes.items():
            if na + sum(ob) > total_cutoff:
                dropped += abs(va * vb) ** 2
                continue
            amps[oa + ob] = va * vb
    discarded = (
        dropped
        + a.discarded_weight * b.norm() ** 2
        + b.discarded_weight * a.norm() ** 2
        + a.discarded_weight * b.discarded_weight
    )
    return FockState(layout, amps, discarded)


def project_occupation(state: FockState, subset, pattern) -> tuple:
    """Probability of ``pattern`` on ``subset`` and the renormalized remainder."""
    idx = state.layout.indices(subset)
    pattern = tuple(int(x) for x in pattern)
    if len(pattern) != len(idx):
        raise ValueError("pattern length does not match subset")
    rest = [i for i in range(len(state.layout)) if i not in idx]
    rest_layout = state.layout.subset(rest)
    amps = defaultdict(complex)
    for occ, amp in state.amplitudes.items():
        if tuple(occ[i] for i in idx) == pattern:
            amps[tuple(occ[i] for i in rest)] += amp
    prob = sum(abs(a) ** 2 for a in amps.values())
    if prob == 0.0:
        return 0.0, FockState(rest_layout, {})
    nrm = math.sqrt(prob)
    return prob, FockState(rest_layout, {k: v / nrm for k, v in amps.items()})


def occupation_marginal(state: FockState, subset) -> dict:
    """Distribution of occupation patterns on ``subset``."""
    idx = state.layout.indices(subset)
    dist = defaultdict(float)
    for occ, amp in state.amplitudes.items():
        dist[tuple(occ[i] for i in idx)] += abs(amp) ** 2
    return dict(dist)


def reduce_to_qubit(state: FockState, spatial: str) -> tuple:
    """Single-photon polarization qubit of ``spatial`` with everything else traced.

    Returns ``(rho, p_single)`` where ``p_single`` is the weight of the
    one-photon subspace used for conditioning (relative to the state norm).
    """
    h, v = state.layout.spatial_modes(spatial)
    env = defaultdict(lambda: np.zeros(2, dtype=complex))
    for occ, amp in state.amplitudes.items():
        pair = (occ[h], occ[v])
        if pair == (1, 0):
            slot = 0
        elif pair == (0, 1):
            slot = 1
        else:
            continue
        key = tuple(n for i, n in enumerate(occ) if i not in (h, v))
        env[key][slot] += amp
    rho = np.zeros((2, 2), dtype=complex)
    for vec in env.values():
        rho += np.outer(vec, vec.conj())
    weight = float(np.real(np.trace(rho)))
    total = state.norm() ** 2
    if weight <= 0.0:
        raise ZeroWeight(f"no single-photon weight in spatial mode {spatial!r}")
    return rho / weight, weight / total


def reduce_to_two_qubits(state: FockState, spatial_a: str, spatial_b: str) -> tuple:
    """Two-qubit polarization state of one photon in each of two spatial modes.

    Basis order is HH, HV, VH, VV. Returns ``(rho, p_coincidence)``.
    """
    ha, va = state.layout.spatial_modes(spatial_a)
    hb, vb = state.layout.spatial_modes(spatial_b)
    slots = {(1, 0, 1, 0): 0, (1, 0, 0, 1): 1, (0, 1, 1, 0): 2, (0, 1, 0, 1): 3}
    env = defaultdict(lambda: np.zeros(4, dtype=complex))
    skip = (ha, va, hb, vb)
    for occ, amp in state.amplitudes.items():
        slot = slots.get((occ[ha], occ[va], occ[hb], occ[vb]))
        if slot is None:
            continue
        env[tuple(n for i, n in enumerate(occ) if i not in skip)][slot] += amp
    rho = np.zeros((4, 4), dtype=complex)
    for vec in env.values():
        rho += np.outer(vec, vec.conj())
    weight = float(np.real(np.trace(rho)))
    if weight <= 0.0:
        raise ZeroWeight("no one-photon-per-arm weight")
    return rho / weight, weight / state.norm() ** 2
