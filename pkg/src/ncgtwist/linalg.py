"""Dense complex linear algebra shared by every other module.

Plain numpy on complex128 throughout.  Truncation dimensions stay desk-scale
(a few thousand at most), so there is no sparse machinery: eigh, svd, explicit
reconstruction checks.  All functions are pure; tolerances are per operation
because heat traces downstream span many orders of magnitude.
"""

from dataclasses import dataclass

import numpy as np


class NotSquare(ValueError):
    pass


class NotHermitian(ValueError):
    pass


class NotPositiveDefinite(ValueError):
    pass


class DomainError(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


def as_matrix(a):
    """Coerce to a 2-d complex array (no copy when already one)."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got ndim={m.ndim}")
    return m


def as_square(a):
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise NotSquare(f"expected square, got {m.shape}")
    return m


def dagger(a):
    return np.conj(np.transpose(a))


@dataclass(frozen=True)
class HermitianEigensystem:
    """Spectral data of a Hermitian matrix.

    eigenvalues ascend; vectors holds the matching orthonormal eigenvectors
    as columns, each with its first nonnegligible component rotated to the
    positive real axis so repeated runs give identical output.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    def reconstruct(self):
        v = self.vectors
        return (v * self.eigenvalues) @ dagger(v)


def _fix_phases(vectors):
    # rotate each column so its first component of nonnegligible size is
    # real positive; ties inside degenerate eigenspaces remain up to eigh,
    # which is deterministic for a fixed input
    v = vectors.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        big = np.abs(col) > 1e-12 * max(1.0, np.abs(col).max())
        k = int(np.argmax(big))
        ph = col[k] / abs(col[k])
        v[:, j] = col * np.conj(ph)
    return v


def hermitian_eigen(m, tol=1e-10):
    """Eigensystem of a Hermitian matrix, ascending, phases fixed.

    Raises NotHermitian when the symmetry defect exceeds tol * ||m||,
    NotSquare for rectangular input.
    """
    m = as_square(m)
    scale = np.linalg.norm(m)
    defect = np.linalg.norm(m - dagger(m))
    if defect > tol * max(scale, 1e-300):
        raise NotHermitian(f"symmetry defect {defect:.3e} over norm {scale:.3e}")
    w, v = np.linalg.eigh((m + dagger(m)) / 2)
    return HermitianEigensystem(eigenvalues=w, vectors=_fix_phases(v))


def matrix_function(eig, f):
    """U diag(f(lambda)) U* from an eigensystem; f maps reals to reals.

    DomainError when f is non-finite on some eigenvalue.
    """
    with np.errstate(all="ignore"):
        fw = np.asarray([f(x) for x in eig.eigenvalues], dtype=float)
    if not np.all(np.isfinite(fw)):
        bad = eig.eigenvalues[~np.isfinite(fw)]
        raise DomainError(f"f non-finite at eigenvalues {bad}")
    v = eig.vectors
    return (v * fw) @ dagger(v)


def hermitian_function(m, f, tol=1e-10):
    """Convenience: matrix_function(hermitian_eigen(m), f)."""
    return matrix_function(hermitian_eigen(m, tol=tol), f)


def fractional_power(r, s, tol=1e-10):
    """r**s for positive definite r by spectral calculus.

    Positivity gate: min eigenvalue > 1e-12 * max eigenvalue.
    """
    eig = hermitian_eigen(r, tol=tol)
    w = eig.eigenvalues
    if w[0] <= 1e-12 * max(w[-1], 0.0):
        raise NotPositiveDefinite(f"eigenvalue range [{w[0]:.3e}, {w[-1]:.3e}]")
    return matrix_function(eig, lambda x: x**s)


def commutator(a, b):
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0] or b.shape[1] != a.shape[0]:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape}")
    return a @ b - b @ a


def trace(a):
    return complex(np.trace(as_square(a)))


def operator_norm(a):
    """Largest singular value."""
    return float(np.linalg.norm(as_matrix(a), 2))


def dump_matrix(m):
    """JSON-ready dict {rows, cols, re, im} with row-major entry lists."""
    m = as_matrix(m)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": [float(x) for x in m.real.ravel()],
        "im": [float(x) for x in m.imag.ravel()],
    }


def load_matrix(obj):
    rows, cols = int(obj["rows"]), int(obj["cols"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    if re.size != rows * cols or im.size != rows * cols:
        raise DimensionMismatch(f"entry count {re.size} vs {rows}x{cols}")
    m = (re + 1j * im).reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise DomainError("non-finite entries in matrix payload")
    return m
