"""Independent reference computations used by the tests.

None of these call into the package; they work from first principles
(explicit polynomial expansion, brute-force enumeration, closed-form series).
"""

import itertools
import math
from collections import Counter, defaultdict
from fractions import Fraction

import numpy as np


def linear_optics_oracle(u, occupation):
    """Output amplitudes of ``prod_i (a_i^dag)^n_i / sqrt(n_i!) |0>`` under a_i^dag -> sum_j u[j, i] a_j^dag.

    Expands the product of linear forms term by term and collects monomials.
    """
    u = np.asarray(u, dtype=complex)
    factors = [i for i, n in enumerate(occupation) for _ in range(n)]
    norm = math.prod(math.factorial(n) for n in occupation)
    monomials = defaultdict(complex)
    for choice in itertools.product(range(u.shape[0]), repeat=len(factors)):
        coeff = 1.0 + 0j
        for col, row in zip(factors, choice):
            coeff *= u[row, col]
        if coeff != 0:
            monomials[tuple(sorted(choice))] += coeff
    out = {}
    for mono, coeff in monomials.items():
        counts = Counter(mono)
        occ = tuple(counts.get(i, 0) for i in range(u.shape[0]))
        amp = coeff * math.sqrt(math.prod(math.factorial(n) for n in occ)) / math.sqrt(norm)
        if abs(amp) > 1e-13:
            out[occ] = amp
    return out


def click_enumeration(n, m):
    """P(k distinct detectors hit) by listing all m**n photon-to-detector assignments."""
    counts = Counter(len(set(a)) for a in itertools.product(range(m), repeat=n))
    return {k: Fraction(c, m**n) for k, c in counts.items()}


def bell_pair_series(lam, n_max):
    """Occupations (aH, aV, bH, bV) and amplitudes of exp[lam(aH bV - aV bH)]|0>, unnormalized.

    (x - y)^n / n! with x = aH bV, y = aV bH gives each |k, n-k, n-k, k> the
    amplitude lam^n (-1)^(n-k): the binomial C(n,k)/n! cancels against the
    k!(n-k)! from the creation operators.
    """
    out = {}
    for n in range(n_max + 1):
        for k in range(n + 1):
            out[(k, n - k, n - k, k)] = lam**n * (-1) ** (n - k)
    return out


def tmsv_series(lam, n_max):
    """Photon-number amplitudes lam^n of exp[lam a b]|0>, unnormalized."""
    return {n: lam**n for n in range(n_max + 1)}


def pauli_matrices():
    return [
        np.eye(2, dtype=complex),
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]
