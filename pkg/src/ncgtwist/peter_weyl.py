"""Representation-theoretic layer for compact matrix pseudogroups.

Everything here works at the level of a finite irrep table: each entry
carries a label, a dimension and a positive-definite matrix F whose trace
equals the trace of its inverse.  That data determines the modular family
of multiplicative functionals phi_z, the canonical twisting operator on any
concretely decomposed carrier space, and the Haar pairings between matrix
coefficients.  Products of coefficients are deliberately out of scope; the
invariance checker takes them from a caller-supplied oracle so that this
module stays exactly as strong as the general theory.

Index convention: phi_z applied to the (i, j) coefficient of the irrep
labelled n reads off the (j, i) entry of F_n^z.  The transposition is
calibrated, not assumed: chi_conjugation_check computes both sides of the
weighted-trace conjugation identity independently, and only this order of
indices makes the identity hold together with the Haar pairing below.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import (
    DimensionMismatch,
    NotPositiveDefinite,
    as_square,
    hermitian_eigen,
    operator_norm,
)


class UnknownIrrep(KeyError):
    """Label missing from the irrep table."""


class InconsistentDecomposition(ValueError):
    """Block data does not match the irrep table or the basis."""


class BlockStructureViolation(ValueError):
    """Operator expected to be scalar on each block is not."""


class TruncationOverflow(RuntimeError):
    """A product of coefficients left the truncated basis."""


# ---------------------------------------------------------------------------
# irrep tables


@dataclass(frozen=True)
class IrrepDatum:
    label: object
    dim: int
    f_mat: np.ndarray
    m_val: float


def make_irrep(label, f_mat, m_val=None, tol=1e-10):
    """Validated irrep entry.

    F must be positive definite with Tr F = Tr F^{-1}; that common value is
    the quantum dimension stored as m_val (computed when not supplied).
    """
    f = as_square(f_mat)
    d = f.shape[0]
    if operator_norm(f - f.conj().T) > tol * (1 + operator_norm(f)):
        raise NotPositiveDefinite(f"F for irrep {label!r} is not hermitian")
    w, _ = np.linalg.eigh(f)
    if w[0] <= tol * max(w[-1], 1.0):
        raise NotPositiveDefinite(f"F for irrep {label!r} has min eig {w[0]:.3e}")
    tr = float(np.sum(w))
    tr_inv = float(np.sum(1.0 / w))
    if m_val is None:
        m_val = tr
    defect = max(abs(tr - m_val), abs(tr_inv - m_val))
    if defect > tol * (1 + abs(m_val)):
        raise ValueError(
            f"irrep {label!r}: Tr F = {tr:.12g}, Tr F^-1 = {tr_inv:.12g}, "
            f"M = {m_val:.12g} disagree by {defect:.3e}")
    return IrrepDatum(label=label, dim=d, f_mat=f, m_val=float(m_val))


@dataclass(frozen=True)
class IrrepTable:
    entries: tuple

    @property
    def labels(self):
        return tuple(e.label for e in self.entries)

    def get(self, label):
        for e in self.entries:
            if e.label == label:
                return e
        raise UnknownIrrep(f"no irrep labelled {label!r}")


def irrep_table(entries):
    entries = tuple(entries)
    labels = [e.label for e in entries]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate irrep labels")
    return IrrepTable(entries=entries)


def dump_irrep_table(table):
    out = []
    for e in table.entries:
        out.append({
            "label": e.label,
            "dim": int(e.dim),
            "F_re": e.f_mat.real.tolist(),
            "F_im": e.f_mat.imag.tolist(),
        })
    return out


def load_irrep_table(obj):
    entries = []
    for rec in obj:
        f = np.asarray(rec["F_re"], dtype=float) + 1j * np.asarray(rec["F_im"],
                                                                   dtype=float)
        if f.shape != (rec["dim"], rec["dim"]):
            raise DimensionMismatch(f"irrep {rec['label']!r} F shape {f.shape}")
        entries.append(make_irrep(rec["label"], f))
    return irrep_table(entries)


# ---------------------------------------------------------------------------
# concrete carrier spaces


@dataclass(frozen=True)
class DecompositionBlock:
    label: object
    mult: int
    start: int
    stop: int


@dataclass(frozen=True)
class RepDecomposition:
    blocks: tuple
    basis: np.ndarray

    @property
    def dim(self):
        return self.basis.shape[0]


def make_decomposition(blocks, basis, table=None, tol=1e-10):
    """Carrier space split into irrep copies.

    blocks is a sequence of (label, multiplicity index, start, stop) column
    ranges into the unitary basis; the ranges must tile [0, dim) in order.
    When a table is supplied each block length is checked against its d_n.
    """
    basis = np.asarray(basis, dtype=complex)
    if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
        raise InconsistentDecomposition("basis must be square")
    dim = basis.shape[0]
    eye = np.eye(dim)
    if operator_norm(basis.conj().T @ basis - eye) > tol * 10:
        raise InconsistentDecomposition("basis is not unitary")
    blk = tuple(DecompositionBlock(label=b[0], mult=int(b[1]),
                                   start=int(b[2]), stop=int(b[3]))
                for b in blocks)
    cursor = 0
    for b in blk:
        if b.start != cursor or b.stop <= b.start:
            raise InconsistentDecomposition(
                f"block ranges must tile the space, got [{b.start},{b.stop}) "
                f"at cursor {cursor}")
        cursor = b.stop
        if table is not None:
            d = table.get(b.label).dim
            if b.stop - b.start != d:
                raise InconsistentDecomposition(
                    f"block {b.label!r} has length {b.stop - b.start}, "
                    f"irrep dim is {d}")
    if cursor != dim:
        raise InconsistentDecomposition(f"blocks cover {cursor} of {dim} columns")
    return RepDecomposition(blocks=blk, basis=basis)


def block_scalar_operator(dec, values):
    """Operator acting on each block as the given scalar, in computational
    coordinates.  values maps (label, mult) or block position to a number."""
    diag = np.zeros(dec.dim, dtype=complex)
    for pos, b in enumerate(dec.blocks):
        if (b.label, b.mult) in values:
            v = values[(b.label, b.mult)]
        else:
            v = values[pos]
        diag[b.start:b.stop] = v
    return dec.basis @ np.diag(diag) @ dec.basis.conj().T


# ---------------------------------------------------------------------------
# modular functionals


def _f_power(datum, z):
    eig = hermitian_eigen(datum.f_mat)
    w, u = eig.eigenvalues, eig.vectors
    return (u * np.exp(z * np.log(w))[None, :]) @ u.conj().T


def phi_z(table, n, i, j, z):
    """Value of the modular functional on the (i, j) coefficient of irrep n.

    phi_0 recovers the counit values delta_ij; the family is a group under
    convolution along the coproduct, which at the matrix level is just the
    power law F^z F^w = F^{z+w}.
    """
    datum = table.get(n)
    if not (0 <= i < datum.dim and 0 <= j < datum.dim):
        raise DimensionMismatch(
            f"coefficient ({i},{j}) outside irrep {n!r} of dim {datum.dim}")
    return complex(_f_power(datum, z)[j, i])


def phi_matrix(table, n, z):
    """All phi_z values of irrep n at once, indexed [i, j]."""
    return _f_power(table.get(n), z).T.copy()


def build_F_phi(dec, table, phi, require_positive=True, tol=1e-10):
    """Operator implementing a functional blockwise on a decomposed space.

    phi is a callable (label, i, j) -> complex.  On each block the action is
    F_phi e_j = sum_i e_i phi(t_ij), transported back to computational
    coordinates by the decomposition basis.  With phi = phi_1 this is the
    canonical twisting operator.
    """
    dim = dec.dim
    out = np.zeros((dim, dim), dtype=complex)
    for b in dec.blocks:
        d = table.get(b.label).dim
        if b.stop - b.start != d:
            raise InconsistentDecomposition(
                f"block {b.label!r} length {b.stop - b.start} vs dim {d}")
        blk = np.array([[phi(b.label, i, j) for j in range(d)]
                        for i in range(d)], dtype=complex)
        out[b.start:b.stop, b.start:b.stop] = blk
    full = dec.basis @ out @ dec.basis.conj().T
    if require_positive:
        herm = operator_norm(full - full.conj().T)
        if herm > tol * (1 + operator_norm(full)):
            raise NotPositiveDefinite("F_phi is not hermitian")
        w = np.linalg.eigvalsh(full)
        if w[0] <= tol * max(w[-1], 1.0):
            raise NotPositiveDefinite(f"F_phi has min eigenvalue {w[0]:.3e}")
    return full


def canonical_twist(dec, table):
    """The twisting operator built from phi_1."""
    return build_F_phi(dec, table,
                       lambda n, i, j: phi_z(table, n, i, j, 1.0))


# ---------------------------------------------------------------------------
# Haar pairings


def haar_pair(table, left, right):
    """Haar expectation of t_ij times the conjugate coefficient t_kl*.

    Coefficients of distinct irreps are orthogonal; within one irrep the
    value is delta_ik F_n(j, l) / M_n.
    """
    n, i, j = left
    m, k, l = right
    datum = table.get(n)
    table.get(m)
    if n != m:
        return 0.0 + 0.0j
    d = datum.dim
    if not all(0 <= x < d for x in (i, j, k, l)):
        raise DimensionMismatch(f"indices {left}, {right} outside dim {d}")
    if i != k:
        return 0.0 + 0.0j
    return complex(datum.f_mat[j, l]) / datum.m_val


def chi_weighted_trace(dec, table, a, weights):
    """Weighted trace Tr(a R W) with R the canonical twist and W the
    block-scalar weight family; this is the linear functional whose
    conjugation invariance the check below verifies."""
    a = as_square(a)
    ab = dec.basis.conj().T @ a @ dec.basis
    total = 0.0 + 0.0j
    for pos, b in enumerate(dec.blocks):
        f = table.get(b.label).f_mat
        sub = ab[b.start:b.stop, b.start:b.stop]
        # Tr(sub R_block) with R_block[l, j] = F(j, l)
        total += weights[pos] * np.sum(sub * f)
    return total


def _block_weights(dec, weights, dirac, beta, tol):
    if weights is not None:
        w = [float(x) for x in weights]
        if len(w) != len(dec.blocks):
            raise DimensionMismatch(
                f"{len(w)} weights for {len(dec.blocks)} blocks")
        if any(x <= 0 for x in w):
            raise ValueError("block weights must be positive")
        return w
    if dirac is None:
        raise ValueError("need either weights or a block-scalar operator")
    d_mat = as_square(dirac)
    db = dec.basis.conj().T @ d_mat @ dec.basis
    scale = 1 + operator_norm(d_mat)
    w = []
    for b in dec.blocks:
        sub = db[b.start:b.stop, b.start:b.stop]
        lam = complex(np.trace(sub)) / (b.stop - b.start)
        defect = operator_norm(sub - lam * np.eye(b.stop - b.start))
        row = db[b.start:b.stop].copy()
        row[:, b.start:b.stop] = 0.0
        defect = max(defect, np.abs(row).max() if row.size else 0.0)
        if defect > tol * scale:
            raise BlockStructureViolation(
                f"operator is not scalar on block {b.label!r}/{b.mult}, "
                f"defect {defect:.3e}")
        if abs(lam.imag) > tol * scale:
            raise BlockStructureViolation("block scalars must be real")
        w.append(float(np.exp(-beta * lam.real ** 2)))
    return w


def chi_conjugation_check(dec, table, a, weights=None, dirac=None, beta=1.0,
                          tol=1e-10):
    """Absolute defect of the conjugation identity for the weighted trace.

    The left side is the weighted trace of a.  The right side pushes a
    through the defining corepresentation and pairs the coefficient legs
    with the Haar state, as an explicit sum over block indices; no algebraic
    simplification is applied, so the two sides share nothing but the irrep
    table.  Weights can be given directly, or derived as exp(-beta lambda^2)
    from an operator that is scalar on every block.
    """
    w = _block_weights(dec, weights, dirac, beta, tol)
    a = as_square(a)
    if a.shape[0] != dec.dim:
        raise DimensionMismatch(f"argument dim {a.shape[0]} vs space {dec.dim}")
    ab = dec.basis.conj().T @ a @ dec.basis
    lhs = chi_weighted_trace(dec, table, a, w)
    rhs = 0.0 + 0.0j
    for pos, b in enumerate(dec.blocks):
        n = b.label
        f = table.get(n).f_mat
        d = b.stop - b.start
        sub = ab[b.start:b.stop, b.start:b.stop]
        for i in range(d):
            for l in range(d):
                acc = 0.0 + 0.0j
                for s in range(d):
                    for r in range(d):
                        acc += sub[s, r] * haar_pair(table, (n, i, s), (n, l, r))
                rhs += w[pos] * f[i, l] * acc
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# invariance of multilinear functionals


def invariance_defect(table, chi, args, product_oracle):
    """Norm of the invariance defect of a multilinear functional.

    args is a list of coefficient symbols (label, i, j).  Each argument is
    expanded along the coproduct of its irrep, the first legs are fed to
    chi, and the second legs are multiplied out by the product oracle, which
    must return coefficient vectors over a fixed truncated basis (the empty
    product giving the unit vector) and raise TruncationOverflow when a
    product falls outside the truncation.  A zero defect says chi behaves
    like an invariant integral on these arguments.
    """
    dims = [table.get(n).dim for n, _, _ in args]
    unit_vec = np.asarray(product_oracle([]), dtype=complex)
    acc = np.zeros_like(unit_vec)
    for mid in np.ndindex(*dims):
        first = [(n, i, k) for (n, i, _), k in zip(args, mid)]
        value = complex(chi(first))
        if value == 0.0:
            continue
        second = [(n, k, j) for (n, _, j), k in zip(args, mid)]
        acc = acc + value * np.asarray(product_oracle(second), dtype=complex)
    base = complex(chi(list(args)))
    defect = acc - base * unit_vec
    return float(np.abs(defect).max())


# ---------------------------------------------------------------------------
# heat-trace growth probe


@dataclass(frozen=True)
class GrowthProbeReport:
    t_values: tuple
    traces: tuple
    exponents: tuple


def growth_probe(dec, table, dirac, t_grid):
    """Local power-law exponents of the twisted heat trace.

    For consecutive grid points the report stores the slope estimate
    p(t) = -dlog Tr(R exp(-t D^2)) / dlog t.  A classical spectrum gives a
    plateau near half the polynomial growth order of the eigenvalue counts;
    the canonical twist of a genuinely quantum table keeps pushing the slope
    up as t shrinks or the truncation grows.  Diagnostic only: no verdict.
    """
    t_vals = [float(t) for t in t_grid]
    if any(t <= 0 for t in t_vals):
        raise ValueError("t_grid must be positive")
    if not t_vals:
        return GrowthProbeReport(t_values=(), traces=(), exponents=())
    r_mat = canonical_twist(dec, table)
    d_mat = as_square(dirac)
    w, u = np.linalg.eigh((d_mat + d_mat.conj().T) / 2)
    r_diag = np.real(np.diag(u.conj().T @ r_mat @ u))
    traces = [float(np.sum(r_diag * np.exp(-t * w ** 2))) for t in t_vals]
    exps = []
    for k in range(len(t_vals) - 1):
        num = np.log(traces[k + 1]) - np.log(traces[k])
        den = np.log(t_vals[k + 1]) - np.log(t_vals[k])
        exps.append(-num / den)
    return GrowthProbeReport(t_values=tuple(t_vals), traces=tuple(traces),
                             exponents=tuple(exps))
