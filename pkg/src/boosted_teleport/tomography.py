"""Qubit state tomography by maximum likelihood and Pauli-basis process tomography."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import sqrtm
from scipy.optimize import brentq

from .bsm import PAULI
from .sources import PROBE_STATES

BASES = ("X", "Y", "Z")
PAULI_BASIS = ("I", "X", "Y", "Z")
PROBE_ORDER = ("zero", "one", "plus", "plus_i")

STATE_METHOD = "maximum likelihood (diluted RrhoR, closed-form optimum when available)"
PROCESS_METHOD = "linear inversion projected onto CPTP chi (Dykstra alternating projections)"

MAX_ITER = 10_000
LL_TOL = 1e-10
STALL_GAIN = 1e-7
PSD_TOL = 1e-9


class MLEConvergenceError(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class CountRecord:
    basis: str
    n_plus: int
    n_minus: int

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}, got {self.basis!r}")
        if self.n_plus < 0 or self.n_minus < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.n_plus + self.n_minus


def projector(basis: str, sign: int) -> np.ndarray:
    return (PAULI["I"] + sign * PAULI[basis]) / 2


def validate_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real} != 1")
    if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def p_plus(rho: np.ndarray, basis: str) -> float:
    return float(np.clip(np.real(np.trace(rho @ projector(basis, +1))), 0.0, 1.0))


def simulate_pauli_counts(rho: np.ndarray, basis: str, shots: int, seed=None) -> CountRecord:
    """Binomial draw of ``shots`` measurements of ``rho`` in a Pauli basis."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_plus = int(rng.binomial(shots, p_plus(rho, basis)))
    return CountRecord(basis, n_plus, shots - n_plus)


def _check_records(records) -> list:
    records = list(records)
    present = {r.basis for r in records if r.total > 0}
    if present != set(BASES):
        raise ValueError(f"need counts in all of {BASES}, got {sorted(present)}")
    return records


def log_likelihood(rho: np.ndarray, records) -> float:
    ll = 0.0
    for r in records:
        pp = np.real(np.trace(rho @ projector(r.basis, +1)))
        for n, p in ((r.n_plus, pp), (r.n_minus, 1.0 - pp)):
            if n == 0:
                continue
            if p <= 0.0:
                return -np.inf
            ll += n * np.log(p)
    return float(ll)


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    return np.array([np.real(np.trace(rho @ PAULI[b])) for b in BASES])


def from_bloch(r) -> np.ndarray:
    x, y, z = r
    return (PAULI["I"] + x * PAULI["X"] + y * PAULI["Y"] + z * PAULI["Z"]) / 2


def linear_inversion(records) -> np.ndarray:
    """Bloch-vector estimate from frequencies; may be unphysical."""
    records = _check_records(records)
    r = np.zeros(3)
    for i, b in enumerate(BASES):
        plus = sum(x.n_plus for x in records if x.basis == b)
        total = sum(x.total for x in records if x.basis == b)
        r[i] = (2 * plus - total) / total
    return from_bloch(r)


def project_to_physical(rho: np.ndarray) -> np.ndarray:
    """Nearest unit-trace PSD qubit matrix in Frobenius norm (Bloch ball projection)."""
    r = bloch_vector((rho + rho.conj().T) / 2)
    length = np.linalg.norm(r)
    if length > 1.0:
        r = r / length
    return from_bloch(r)


@dataclass
class MLEResult:
    rho: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool


def _basis_totals(records) -> np.ndarray:
    """(n_plus, n_minus) summed per basis, rows ordered like BASES."""
    out = np.zeros((3, 2))
    for r in records:
        i = BASES.index(r.basis)
        out[i] += (r.n_plus, r.n_minus)
    return out


def _component_on_sphere(p: float, m: float, mu: float) -> float:
    # stationary point of p log(1+r) + m log(1-r) - mu r^2 on [-1, 1]
    if m == 0 and p == 0:
        return 0.0
    if m == 0:
        return min(1.0, (-1 + np.sqrt(1 + 2 * p / mu)) / 2)
    if p == 0:
        return max(-1.0, -(-1 + np.sqrt(1 + 2 * m / mu)) / 2)
    return brentq(lambda r: p * (1 - r) - m * (1 + r) - 2 * mu * r * (1 - r * r), -1.0, 1.0)


def boundary_mle(records) -> np.ndarray | None:
    """Exact maximizer on the Bloch sphere when the linear estimate lies outside it.

    With one count pair per Pauli axis the log-likelihood separates over Bloch
    components, so the constrained optimum solves a one-parameter Lagrange
    condition. Returns None when the unconstrained optimum is already physical.
    """
    counts = _basis_totals(records)
    r_li = (counts[:, 0] - counts[:, 1]) / counts.sum(axis=1)
    if np.linalg.norm(r_li) <= 1.0:
        return None

    def excess(log_mu):
        mu = np.exp(log_mu)
        return sum(_component_on_sphere(p, m, mu) ** 2 for p, m in counts) - 1.0

    lo, hi = -40.0, 40.0
    log_mu = brentq(excess, lo, hi, xtol=1e-14)
    r = np.array([_component_on_sphere(p, m, np.exp(log_mu)) for p, m in counts])
    return from_bloch(r / np.linalg.norm(r))


def fit_state_mle(records, max_iter: int = MAX_ITER, tol: float = LL_TOL,
                  start: np.ndarray | None = None) -> MLEResult:
    """Diluted RrhoR iteration with an adaptive dilution step.

    The step ``eps`` is doubled after an improving update and halved after a
    failing one, so the log-likelihood never decreases. RrhoR keeps the rank of
    its iterate, so a pure-state optimum is only reached asymptotically; if the
    iteration stalls there, the exact boundary maximizer is used instead.
    """
    records = _check_records(records)
    total = sum(r.total for r in records)
    ops = [(r.n_plus, projector(r.basis, +1)) for r in records]
    ops += [(r.n_minus, projector(r.basis, -1)) for r in records]
    ops = [(n, P) for n, P in ops if n > 0]
    weights = np.array([n for n, _ in ops], dtype=float)
    stack = np.array([P for _, P in ops])
    eye = np.eye(2, dtype=complex)

    def ll_of(rho):
        probs = np.real(np.einsum("ij,kji->k", rho, stack))
        if probs.min() <= 0.0:
            return -np.inf, probs
        return float(weights @ np.log(probs)), probs

    rho = eye / 2 if start is None else np.asarray(start, dtype=complex)
    ll, probs = ll_of(rho)
    li = project_to_physical(linear_inversion(records))
    if start is None:
        mixed = 0.5 * li + 0.5 * rho
        ll_mixed, probs_mixed = ll_of(mixed)
        if ll_mixed > ll:
            rho, ll, probs = mixed, ll_mixed, probs_mixed
    edge = boundary_mle(records)
    ll_edge = log_likelihood(edge, records) if edge is not None else -np.inf
    eps = 1.0
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        R = np.tensordot(weights / probs, stack, axes=1) / total
        while True:
            A = eye + eps * R
            cand = A @ rho @ A.conj().T
            cand = cand / np.real(np.trace(cand))
            cand = (cand + cand.conj().T) / 2
            ll_new, probs_new = ll_of(cand)
            if ll_new >= ll or eps < 1e-12:
                break
            eps /= 2
        gain = ll_new - ll
        if gain < 0:
            break
        rho, ll, probs = cand, ll_new, probs_new
        if gain < tol:
            converged = True
            break
        if gain < STALL_GAIN and ll_edge >= ll:
            break
        eps = min(eps * 2, 1e6)
    if not converged and ll_edge >= ll:
        rho, ll, converged = edge, ll_edge, True
    ll_li = log_likelihood(li, records)
    if ll_li >= ll:
        # a physical linear estimate maximizes the separable likelihood exactly
        rho, ll, converged = li, ll_li, converged or edge is None
    return MLEResult(rho, ll, it, converged)


def mle_state_tomography(records, max_iter: int = MAX_ITER, tol: float = LL_TOL) -> np.ndarray:
    """Physical density matrix maximizing the binomial likelihood of the counts."""
    result = fit_state_mle(records, max_iter, tol)
    if not result.converged:
        raise MLEConvergenceError(
            f"no convergence after {result.iterations} iterations "
            f"(log-likelihood {result.log_likelihood:.6g})",
            result,
        )
    return result.rho


def state_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Squared Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    s = sqrtm(rho)
    inner = sqrtm(s @ sigma @ s)
    return float(np.clip(np.real(np.trace(inner)) ** 2, 0.0, 1.0))


def pure_state_fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    psi = np.asarray(psi, dtype=complex)
    return float(np.clip(np.real(psi.conj() @ rho @ psi), 0.0, 1.0))


def random_pure_state(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def bootstrap_fidelity(records, psi: np.ndarray, n_resamples: int = 250, seed=None) -> float:
    """Standard deviation of the MLE fidelity under Poissonian resampling of the counts."""
    rng = np.random.default_rng(seed)
    records = list(records)
    start = 0.9 * fit_state_mle(records).rho + 0.05 * np.eye(2)
    fids = []
    for _ in range(n_resamples):
        sample = [
            CountRecord(r.basis, int(rng.poisson(r.n_plus)), int(rng.poisson(r.n_minus)))
            for r in records
        ]
        try:
            _check_records(sample)
        except ValueError:
            continue
        fids.append(pure_state_fidelity(fit_state_mle(sample, start=start).rho, psi))
    if len(fids) < 2:
        return float("nan")
    return float(np.std(fids, ddof=1))


# --- process tomography -------------------------------------------------------------

def _pauli_ops():
    return [PAULI[k] for k in PAULI_BASIS]


def apply_chi(chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    ops = _pauli_ops()
    out = np.zeros((2, 2), dtype=complex)
    for j in range(4):
        for k in range(4):
            if chi[j, k] != 0:
                out += chi[j, k] * ops[j] @ rho @ ops[k].conj().T
    return out


def chi_from_unitary(u: np.ndarray) -> np.ndarray:
    c = np.array([np.trace(A.conj().T @ u) / 2 for A in _pauli_ops()])
    return np.outer(c, c.conj())


def pauli_channel_chi(probabilities) -> np.ndarray:
    return np.diag(np.asarray(probabilities, dtype=complex))


def _matrix_units(outputs: dict) -> list:
    """Channel images of |0><0|, |0><1|, |1><0|, |1><1| from the four probe outputs."""
    r0, r1, rp, ri = (np.asarray(outputs[k], dtype=complex) for k in PROBE_ORDER)
    s = r0 + r1
    e01 = rp + 1j * ri - (1 + 1j) / 2 * s
    e10 = rp - 1j * ri - (1 - 1j) / 2 * s
    return [r0, e01, e10, r1]


_UNITS = [np.array(m, dtype=complex) for m in ([[1, 0], [0, 0]], [[0, 1], [0, 0]],
                                                [[0, 0], [1, 0]], [[0, 0], [0, 1]])]


def _chi_design() -> np.ndarray:
    ops = _pauli_ops()
    cols = []
    for j in range(4):
        for k in range(4):
            cols.append(np.concatenate([(ops[j] @ E @ ops[k].conj().T).ravel() for E in _UNITS]))
    return np.array(cols).T


def _tp_constraint() -> np.ndarray:
    ops = _pauli_ops()
    return np.array([(ops[k].conj().T @ ops[j]).ravel() for j in range(4) for k in range(4)]).T


_DESIGN = _chi_design()
_TP = _tp_constraint()
_TP_PINV = _TP.conj().T @ np.linalg.inv(_TP @ _TP.conj().T)
_EYE_VEC = np.eye(2, dtype=complex).ravel()


def _project_tp(chi: np.ndarray) -> np.ndarray:
    c = chi.ravel()
    c = c - _TP_PINV @ (_TP @ c - _EYE_VEC)
    m = c.reshape(4, 4)
    return (m + m.conj().T) / 2


def _project_psd(chi: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((chi + chi.conj().T) / 2)
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


def tp_residual(chi: np.ndarray) -> float:
    return float(np.linalg.norm(_TP @ chi.ravel() - _EYE_VEC))


def project_chi(chi: np.ndarray, max_iter: int = 10_000, tol: float = 1e-13) -> np.ndarray:
    """Nearest Hermitian PSD trace-preserving chi (Dykstra's alternating projections)."""
    x = (chi + chi.conj().T) / 2
    if np.linalg.eigvalsh(x).min() >= -1e-12 and tp_residual(x) < 1e-12:
        return x
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        y = _project_tp(x + p)
        p = x + p - y
        x_new = _project_psd(y + q)
        q = y + q - x_new
        if np.linalg.norm(x_new - x) < tol:
            x = x_new
            break
        x = x_new
    return x


@dataclass
class ProcessEstimate:
    chi: np.ndarray
    raw_chi: np.ndarray
    projection_distance: float

    @property
    def consistent(self) -> bool:
        return self.projection_distance < 1e-2


def estimate_process(outputs: dict) -> ProcessEstimate:
    """Linear inversion of chi from the four probe outputs, then physical projection."""
    missing = [k for k in PROBE_ORDER if k not in outputs]
    if missing:
        raise ValueError(f"missing probe outputs: {missing}")
    rhs = np.concatenate([m.ravel() for m in _matrix_units(outputs)])
    vec, *_ = np.linalg.lstsq(_DESIGN, rhs, rcond=None)
    raw = vec.reshape(4, 4)
    chi = project_chi(raw)
    return ProcessEstimate(chi, raw, float(np.linalg.norm(chi - raw)))


def process_tomography(outputs: dict) -> np.ndarray:
    """Chi matrix in the {I, X, Y, Z} basis from outputs keyed by probe name."""
    est = estimate_process(outputs)
    if not est.consistent:
        warnings.warn(
            f"probe outputs inconsistent with a CPTP map (projection moved chi by "
            f"{est.projection_distance:.3g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return est.chi


def process_fidelity(chi_exp: np.ndarray, chi_ideal: np.ndarray) -> float:
    return float(np.clip(np.real(np.trace(chi_exp @ chi_ideal)), 0.0, 1.0))


def probe_outputs(channel) -> dict:
    """Outputs of ``channel(rho)`` on the four probe states."""
    return {k: channel(PROBE_STATES[k].density_matrix) for k in PROBE_ORDER}
