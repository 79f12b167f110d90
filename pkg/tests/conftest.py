"""Shared fixtures: random twisted spectral data at desk scale.

Even data constrains R hard: gamma exchanges the +-lambda eigenspaces of D,
so any positive R commuting with both D and gamma is a function of |D| when
the singular values are simple.  The generators below therefore draw random
positive values per |D|-eigenvalue for the even case and fully independent
ones for the odd case.
"""

import numpy as np
import pytest

from ncgtwist.heat import make_jlo_context


def random_unitary(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_even_data(rng, half, spread=2.0):
    """gamma = diag(1..1,-1..-1), D = offdiag(w, w), R = f(|D|) blockwise."""
    v = random_unitary(rng, half)
    lam = np.sort(rng.uniform(0.3, spread, size=half))
    w = v @ np.diag(lam) @ v.conj().T
    d = np.zeros((2 * half, 2 * half), dtype=complex)
    d[:half, half:] = w
    d[half:, :half] = w
    h = d @ d
    rvals = rng.uniform(0.5, 2.0, size=half)
    rblk = v @ np.diag(rvals) @ v.conj().T
    r = np.zeros_like(d)
    r[:half, :half] = rblk
    r[half:, half:] = rblk
    gamma = np.diag(np.concatenate([np.ones(half), -np.ones(half)]))
    return h, r, gamma.astype(complex), d


def random_odd_data(rng, dim, spread=2.0):
    """D random self-adjoint; R positive with the same eigenbasis."""
    u = random_unitary(rng, dim)
    s = rng.uniform(-spread, spread, size=dim)
    d = u @ np.diag(s) @ u.conj().T
    rvals = rng.uniform(0.5, 2.0, size=dim)
    r = u @ np.diag(rvals) @ u.conj().T
    return d @ d, r, None, d


def random_context(rng, beta, even=True, half=3, dim=6):
    if even:
        h, r, gamma, d = random_even_data(rng, half)
    else:
        h, r, gamma, d = random_odd_data(rng, dim)
    return make_jlo_context(h, r, beta, gamma=gamma, dirac=d)


def random_mats(rng, dim, count):
    return [rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            for _ in range(count)]


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
