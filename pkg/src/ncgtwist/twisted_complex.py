"""Twisted cyclic cochain complex over a finite-dimensional algebra.

A degree-n cochain phi over an m-dimensional algebra is stored densely as the
array phi[i_0, ..., i_n] = phi(e_{i_0}, ..., e_{i_n}) of shape (m,)*(n+1).
The twist enters through an algebra automorphism sigma.  The boundary
operators below satisfy b^2 = 0, B^2 = 0, bB + Bb = 0 on sigma-invariant
cochains; the test-suite checks this on random algebras.  Dense tensors cap
practical sizes at roughly m <= 16, n <= 4 (m^(n+1) coefficients).
"""

import math
from dataclasses import dataclass

import numpy as np

from .linalg import DimensionMismatch, operator_norm


class NotInvariant(ValueError):
    pass


# ---------------------------------------------------------------------------
# algebras


@dataclass(frozen=True)
class FiniteAlgebra:
    """Unital algebra with a fixed basis and an automorphism sigma.

    structure[a, b, g] holds the coefficient of e_g in e_a e_b.  sigma acts
    on coordinate vectors: coords(sigma(x)) = sigma_mat @ coords(x).
    norm_rep[i] is a faithful matrix representation of e_i; the norm used in
    cochain norm estimates is the operator norm in this representation.
    """

    dim: int
    structure: np.ndarray
    unit: np.ndarray
    sigma_mat: np.ndarray
    sigma_inv_mat: np.ndarray
    norm_rep: np.ndarray

    def multiply(self, x, y):
        return np.einsum("a,b,abg->g", x, y, self.structure)

    def sigma(self, x):
        return self.sigma_mat @ x

    def sigma_inv(self, x):
        return self.sigma_inv_mat @ x

    def represent(self, x):
        return np.einsum("i,ijk->jk", x, self.norm_rep)

    def star_norm(self, x):
        return operator_norm(self.represent(x))


def finite_algebra(structure, unit, sigma_mat, norm_rep, sigma_inv_mat=None,
                   check=True, tol=1e-10):
    """Build a FiniteAlgebra and verify its axioms.

    Checks associativity, the unit laws, that sigma is a unital algebra map
    and that sigma_inv really inverts it.  All defects are measured against
    1 + the scale of the structure constants.
    """
    structure = np.asarray(structure, dtype=complex)
    unit = np.asarray(unit, dtype=complex)
    sigma_mat = np.asarray(sigma_mat, dtype=complex)
    norm_rep = np.asarray(norm_rep, dtype=complex)
    if sigma_inv_mat is None:
        sigma_inv_mat = np.linalg.inv(sigma_mat)
    else:
        sigma_inv_mat = np.asarray(sigma_inv_mat, dtype=complex)
    m = structure.shape[0]
    if structure.shape != (m, m, m):
        raise DimensionMismatch(f"structure tensor shape {structure.shape}")
    if unit.shape != (m,) or sigma_mat.shape != (m, m):
        raise DimensionMismatch("unit or sigma shape does not match dim")
    if norm_rep.ndim != 3 or norm_rep.shape[0] != m:
        raise DimensionMismatch(f"norm_rep shape {norm_rep.shape}")

    if check:
        scale = 1.0 + np.abs(structure).max()
        # (e_a e_b) e_c vs e_a (e_b e_c)
        left = np.einsum("abx,xcg->abcg", structure, structure)
        right = np.einsum("bcx,axg->abcg", structure, structure)
        if np.abs(left - right).max() > 1e-12 * scale:
            raise ValueError("structure constants are not associative")
        ident = np.eye(m)
        lu = np.einsum("a,abg->bg", unit, structure)
        ru = np.einsum("b,abg->ag", unit, structure)
        if np.abs(lu - ident).max() > 1e-12 * scale or \
           np.abs(ru - ident).max() > 1e-12 * scale:
            raise ValueError("unit laws fail")
        if np.abs(sigma_mat @ sigma_inv_mat - ident).max() > 1e-12 * (1 + np.abs(sigma_mat).max()):
            raise ValueError("sigma_inv does not invert sigma")
        # sigma(e_a e_b) = sigma(e_a) sigma(e_b), as maps on basis pairs
        hom_l = np.einsum("abg,xg->abx", structure, sigma_mat)
        hom_r = np.einsum("pa,qb,pqx->abx", sigma_mat, sigma_mat, structure)
        if np.abs(hom_l - hom_r).max() > tol * scale:
            raise ValueError("sigma is not an algebra map")
        if np.abs(sigma_mat @ unit - unit).max() > tol:
            raise ValueError("sigma does not fix the unit")
    return FiniteAlgebra(dim=m, structure=structure, unit=unit,
                         sigma_mat=sigma_mat, sigma_inv_mat=sigma_inv_mat,
                         norm_rep=norm_rep)


def function_algebra(m, perm=None):
    """Functions on m points; sigma permutes the points (identity when None).

    The norm representation is by diagonal matrices, so the star norm is the
    sup norm.
    """
    structure = np.zeros((m, m, m), dtype=complex)
    for i in range(m):
        structure[i, i, i] = 1.0
    unit = np.ones(m, dtype=complex)
    sigma_mat = np.eye(m, dtype=complex)
    if perm is not None:
        sigma_mat = np.zeros((m, m), dtype=complex)
        for i, p in enumerate(perm):
            sigma_mat[p, i] = 1.0
    norm_rep = np.zeros((m, m, m), dtype=complex)
    for i in range(m):
        norm_rep[i, i, i] = 1.0
    return finite_algebra(structure, unit, sigma_mat, norm_rep)


def full_matrix_algebra(d, conjugator=None):
    """All of M_d with basis E_ij (row-major index i*d + j).

    sigma(a) = C^{-1} a C for an invertible conjugator C (identity when
    None); with positive C this is the similarity twist used throughout,
    with unitary C a *-automorphism.
    """
    m = d * d
    structure = np.zeros((m, m, m), dtype=complex)
    for i in range(d):
        for j in range(d):
            for l in range(d):
                structure[i * d + j, j * d + l, i * d + l] = 1.0
    unit = np.zeros(m, dtype=complex)
    for i in range(d):
        unit[i * d + i] = 1.0
    if conjugator is None:
        sigma_mat = np.eye(m, dtype=complex)
    else:
        c = np.asarray(conjugator, dtype=complex)
        cinv = np.linalg.inv(c)
        # sigma(E_ij) = sum_{k,l} cinv[k,i] c[j,l] E_kl
        sigma_mat = np.einsum("ki,jl->klij", cinv, c).reshape(m, m)
    norm_rep = np.zeros((m, d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            norm_rep[i * d + j, i, j] = 1.0
    return finite_algebra(structure, unit, sigma_mat, norm_rep)


def algebra_from_matrices(mats, conjugator=None, tol=1e-9):
    """Algebra generated by a given linear basis of d x d matrices.

    mats has shape (m, d, d) and must be a linearly independent family that
    is closed under products, contains the identity in its span and is fixed
    by a -> C^{-1} a C when a conjugator is supplied.  Structure constants,
    unit coordinates and the sigma matrix are extracted by least squares;
    any expansion residual above tol * scale means the family was not
    actually closed and raises.
    """
    mats = np.asarray(mats, dtype=complex)
    m, d = mats.shape[0], mats.shape[1]
    basis_cols = mats.reshape(m, d * d).T
    scale = 1.0 + np.abs(mats).max()

    def expand(x):
        coef, res, rank, sv = np.linalg.lstsq(basis_cols, x.ravel(), rcond=None)
        resid = np.abs(basis_cols @ coef - x.ravel()).max()
        if resid > tol * scale:
            raise ValueError(f"matrix outside the span, residual {resid:.2e}")
        return coef

    structure = np.zeros((m, m, m), dtype=complex)
    for a in range(m):
        for b in range(m):
            structure[a, b] = expand(mats[a] @ mats[b])
    unit = expand(np.eye(d))
    if conjugator is None:
        sigma_mat = np.eye(m, dtype=complex)
    else:
        c = np.asarray(conjugator, dtype=complex)
        cinv = np.linalg.inv(c)
        sigma_mat = np.stack([expand(cinv @ mats[a] @ c) for a in range(m)], axis=1)
    return finite_algebra(structure, unit, sigma_mat, mats)


# ---------------------------------------------------------------------------
# cochains


@dataclass(frozen=True)
class Cochain:
    """Dense multilinear functional on (degree + 1) algebra arguments.

    Degree -1 is the zero space, stored as a 0-d zero array; it shows up as
    the output of unit_evaluate on degree 0.  The invariant flag asserts
    sigma-invariance and is checked at construction time by make_cochain.
    """

    degree: int
    dim: int
    coeffs: np.ndarray
    invariant: bool = False

    def norm(self):
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0


def coordinate_twist_defect(coeffs, sigma_mat):
    """Max-norm of phi o (sigma x ... x sigma) - phi for a raw tensor."""
    twisted = coeffs
    for _ in range(coeffs.ndim):
        twisted = np.tensordot(twisted, sigma_mat, axes=([0], [0]))
    if coeffs.size == 0 or coeffs.ndim == 0:
        return 0.0
    return float(np.abs(twisted - coeffs).max())


def sigma_invariance_defect(algebra, coeffs):
    return coordinate_twist_defect(coeffs, algebra.sigma_mat)


def make_cochain(algebra, coeffs, invariant=None, tol=1e-9):
    """Wrap a coefficient tensor, checking shape and the invariance flag.

    invariant=None detects the flag from the measured defect; True enforces
    it (NotInvariant on failure); False skips the check.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    degree = coeffs.ndim - 1
    if degree >= 0 and coeffs.shape != (algebra.dim,) * (degree + 1):
        raise DimensionMismatch(
            f"coeff shape {coeffs.shape} over algebra of dim {algebra.dim}")
    if invariant is None or invariant:
        defect = sigma_invariance_defect(algebra, coeffs)
        # additive 1 so that numerically-zero tensors count as invariant
        bound = tol * (1 + (np.abs(coeffs).max() if coeffs.size else 0.0))
        if invariant is None:
            invariant = defect <= bound
        elif defect > bound:
            raise NotInvariant(f"sigma-invariance defect {defect:.3e}")
    return Cochain(degree=degree, dim=algebra.dim, coeffs=coeffs,
                   invariant=bool(invariant))


def zero_cochain(algebra, degree, invariant=True):
    if degree < 0:
        coeffs = np.zeros((), dtype=complex)
    else:
        coeffs = np.zeros((algebra.dim,) * (degree + 1), dtype=complex)
    return Cochain(degree=degree, dim=algebra.dim, coeffs=coeffs,
                   invariant=invariant)


def evaluate_cochain(phi, args):
    """phi(a_0, ..., a_n) for coordinate vectors args."""
    if len(args) != phi.degree + 1:
        raise DimensionMismatch(
            f"{len(args)} arguments for degree {phi.degree}")
    out = phi.coeffs
    for x in reversed(args):
        out = out @ np.asarray(x, dtype=complex)
    return complex(out)


def dump_cochain(phi):
    return {
        "degree": int(phi.degree),
        "dim": int(phi.dim),
        "coeffs_re": [float(x) for x in phi.coeffs.real.ravel()],
        "coeffs_im": [float(x) for x in phi.coeffs.imag.ravel()],
        "invariant": bool(phi.invariant),
    }


def load_cochain(obj):
    degree, dim = int(obj["degree"]), int(obj["dim"])
    shape = (dim,) * (degree + 1) if degree >= 0 else ()
    re = np.asarray(obj["coeffs_re"], dtype=float).reshape(shape)
    im = np.asarray(obj["coeffs_im"], dtype=float).reshape(shape)
    return Cochain(degree=degree, dim=dim, coeffs=re + 1j * im,
                   invariant=bool(obj["invariant"]))


# ---------------------------------------------------------------------------
# the complex operators
#
# Sign and slot conventions, with n the input degree:
#   cyclic_permute     (T phi)(a_0..a_n)     = (-1)^n phi(sigma(a_n), a_0, .., a_{n-1})
#   cyclic_permute_inv (T' phi)(a_0..a_n)    = (-1)^n phi(a_1, .., a_n, sigma^{-1}(a_0))
#   cyclic_symmetrize  N = sum_{j=0}^n T^j
#   unit_evaluate      (U phi)(a_0..a_{n-1}) = (-1)^n phi(a_0, .., a_{n-1}, 1)
#   twisted_insert     (V phi)(a_0..a_{n+1}) = (-1)^{n+1} phi(sigma(a_{n+1}) a_0, a_1, .., a_n)
#   coboundary_B       B = N U (T - 1), degree n -> n - 1
#   coboundary_b       b = sum_{j=0}^{n+1} T'^{j+1} V T^j, degree n -> n + 1


def _check_pair(algebra, phi):
    if phi.dim != algebra.dim:
        raise DimensionMismatch(
            f"cochain dim {phi.dim} over algebra dim {algebra.dim}")


def cyclic_permute(algebra, phi):
    """Signed twisted cyclic rotation of the arguments."""
    _check_pair(algebra, phi)
    n = phi.degree
    out = (-1.0) ** n * np.tensordot(phi.coeffs, algebra.sigma_mat,
                                     axes=([0], [0]))
    return Cochain(degree=n, dim=phi.dim, coeffs=out, invariant=phi.invariant)


def cyclic_permute_inv(algebra, phi):
    _check_pair(algebra, phi)
    n = phi.degree
    out = (-1.0) ** n * np.tensordot(algebra.sigma_inv_mat, phi.coeffs,
                                     axes=([0], [n]))
    return Cochain(degree=n, dim=phi.dim, coeffs=out, invariant=phi.invariant)


def cyclic_symmetrize(algebra, phi):
    """Sum of the cyclic powers T^0 + ... + T^degree."""
    _check_pair(algebra, phi)
    acc = phi.coeffs.copy()
    cur = phi
    for _ in range(phi.degree):
        cur = cyclic_permute(algebra, cur)
        acc += cur.coeffs
    return Cochain(degree=phi.degree, dim=phi.dim, coeffs=acc,
                   invariant=phi.invariant)


def unit_evaluate(algebra, phi):
    """Evaluate the last slot at the unit; lowers degree by one."""
    _check_pair(algebra, phi)
    n = phi.degree
    if n == 0:
        return zero_cochain(algebra, -1)
    out = (-1.0) ** n * np.tensordot(phi.coeffs, algebra.unit, axes=([n], [0]))
    return Cochain(degree=n - 1, dim=phi.dim, coeffs=out,
                   invariant=phi.invariant)


def twisted_insert(algebra, phi):
    """Multiply the twisted new last argument into slot zero; raises degree.

    (V phi)(a_0, .., a_{n+1}) = (-1)^{n+1} phi(sigma(a_{n+1}) a_0, a_1, .., a_n).
    """
    _check_pair(algebra, phi)
    n = phi.degree
    # W[a, b, g]: coefficient of e_g in sigma(e_a) e_b
    w = np.einsum("pa,pbg->abg", algebra.sigma_mat, algebra.structure)
    out = (-1.0) ** (n + 1) * np.einsum("abg,g...->b...a", w, phi.coeffs)
    return Cochain(degree=n + 1, dim=phi.dim, coeffs=out, invariant=False)


def _flag_invariant(algebra, coeffs, ref_scale, tol):
    # the reference scale is the input's, so that outputs which ought to be
    # zero (closed cochains) do not fail a self-relative check
    defect = sigma_invariance_defect(algebra, coeffs)
    scale = max(np.abs(coeffs).max() if coeffs.size else 0.0, ref_scale, 1e-300)
    if defect > tol * scale:
        raise NotInvariant(f"output invariance defect {defect:.3e}")
    return Cochain(degree=coeffs.ndim - 1, dim=algebra.dim, coeffs=coeffs,
                   invariant=True)


def coboundary_B(algebra, phi, tol=1e-9):
    """Connes-type boundary N U (T - 1); degree n -> n - 1.

    Requires the invariance flag; the output is invariant again and carries
    the flag (checked).
    """
    _check_pair(algebra, phi)
    if not phi.invariant:
        raise NotInvariant("coboundary_B needs a sigma-invariant cochain")
    if phi.degree == 0:
        return zero_cochain(algebra, -1)
    t = cyclic_permute(algebra, phi)
    diff = Cochain(degree=phi.degree, dim=phi.dim,
                   coeffs=t.coeffs - phi.coeffs, invariant=False)
    u = unit_evaluate(algebra, diff)
    out = cyclic_symmetrize(algebra, u)
    return _flag_invariant(algebra, out.coeffs, phi.norm(), tol)


def coboundary_b(algebra, phi, tol=1e-9):
    """Twisted Hochschild-type boundary; degree n -> n + 1.

    Assembled as sum_j T'^(j+1) V T^j with T' the inverse cyclic rotation;
    on invariant inputs this reproduces the usual alternating-sum face maps
    with the twist in the wrap-around face.
    """
    _check_pair(algebra, phi)
    if not phi.invariant:
        raise NotInvariant("coboundary_b needs a sigma-invariant cochain")
    n = phi.degree
    acc = None
    tpow = phi
    for j in range(n + 2):
        term = twisted_insert(algebra, tpow)
        for _ in range(j + 1):
            term = cyclic_permute_inv(algebra, term)
        acc = term.coeffs if acc is None else acc + term.coeffs
        if j < n + 1:
            tpow = cyclic_permute(algebra, tpow)
    return _flag_invariant(algebra, acc, phi.norm(), tol)


# ---------------------------------------------------------------------------
# entire sequences


@dataclass(frozen=True)
class EntireCochainSequence:
    """Finite truncation of an entire cochain of the given parity.

    components[k] has degree 2k (even parity) or 2k+1 (odd).  top_incomplete
    marks a top component that misses contributions from beyond the
    truncation (total_boundary sets it).  factorial_weighted records the
    bookkeeping convention that the sequence stands for ((2n)! phi_2n) or
    its odd analogue; coefficients themselves are always the plain phi_n.
    """

    parity: str
    components: tuple
    norms: tuple = ()
    top_incomplete: bool = False
    factorial_weighted: bool = False

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise ValueError(f"parity {self.parity!r}")
        off = 0 if self.parity == "even" else 1
        for k, c in enumerate(self.components):
            if c.degree != 2 * k + off:
                raise ValueError(
                    f"component {k} has degree {c.degree}, want {2 * k + off}")


def total_boundary(algebra, seq):
    """(b + B) on a truncated sequence; returns the opposite parity.

    Output degree-k component is b phi_{k-1} + B phi_{k+1}; the top output
    only sees b of the top input and is flagged truncation-incomplete.
    """
    comp = {c.degree: c for c in seq.components}
    in_scale = max([c.norm() for c in seq.components] or [0.0])
    out_off = 1 if seq.parity == "even" else 0
    top_in = max(comp) if comp else -1
    out = []
    k = out_off
    while k <= top_in + 1:
        pieces = []
        if k - 1 in comp:
            pieces.append(coboundary_b(algebra, comp[k - 1]).coeffs)
        if k + 1 in comp:
            pieces.append(coboundary_B(algebra, comp[k + 1]).coeffs)
        if not pieces:
            pieces = [zero_cochain(algebra, k).coeffs]
        total = pieces[0]
        for p in pieces[1:]:
            total = total + p
        out.append(_flag_invariant(algebra, total, in_scale, tol=1e-8))
        k += 2
    return EntireCochainSequence(
        parity="odd" if seq.parity == "even" else "even",
        components=tuple(out), top_incomplete=True,
        factorial_weighted=seq.factorial_weighted)


# ---------------------------------------------------------------------------
# norms and growth


@dataclass(frozen=True)
class NormBounds:
    upper: float
    lower: float


def _coordinate_caps(algebra):
    # |x_i| <= cap_i whenever the represented operator norm of x is <= 1;
    # obtained from the pseudoinverse of the vectorized representation and
    # the Frobenius/operator norm gap sqrt(d)
    m = algebra.dim
    d = algebra.norm_rep.shape[1]
    e = algebra.norm_rep.reshape(m, d * d).T
    pinv = np.linalg.pinv(e)
    return np.linalg.norm(pinv, axis=1) * np.sqrt(d)


def cochain_norm_bounds(algebra, phi, samples=1000, seed=7):
    """Upper and sampled lower bound for sup |phi| over star-norm unit balls.

    The exact multilinear sup is out of reach in general; the upper bound is
    the weighted l1 norm of the coefficients in cap-scaled coordinates, the
    lower bound the best of `samples` random evaluations at normalized
    arguments (seeded, hence reproducible).
    """
    _check_pair(algebra, phi)
    if phi.degree < 0 or phi.coeffs.size == 0:
        return NormBounds(0.0, 0.0)
    caps = _coordinate_caps(algebra)
    upper = np.abs(phi.coeffs)
    for _ in range(phi.degree + 1):
        upper = np.tensordot(upper, caps, axes=([0], [0]))
    upper = float(upper)

    rng = np.random.default_rng(seed)
    m = algebra.dim
    lower = 0.0
    for _ in range(samples):
        args = []
        ok = True
        for _ in range(phi.degree + 1):
            x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            nrm = algebra.star_norm(x)
            if nrm < 1e-12:
                ok = False
                break
            args.append(x / nrm)
        if not ok:
            continue
        lower = max(lower, abs(evaluate_cochain(phi, args)))
    return NormBounds(upper=upper, lower=lower)


@dataclass(frozen=True)
class GrowthReport:
    indices: tuple
    root_values: tuple
    nonincreasing_tail: bool


def entire_growth_report(algebra, seq, samples=200, seed=11):
    """Entire-growth diagnostic (norm_n / n!)^(1/n) for a sequence.

    Uses the upper norm bounds.  The verdict is whether the root sequence is
    nonincreasing from index 1 on, a practical proxy for the radius of the
    generating power series being infinite.
    """
    idx, roots = [], []
    for k, c in enumerate(seq.components):
        if k == 0:
            continue
        nb = cochain_norm_bounds(algebra, c, samples=samples, seed=seed)
        val = (nb.upper / float(math.factorial(k))) ** (1.0 / k)
        idx.append(k)
        roots.append(val)
    tail_ok = all(roots[i + 1] <= roots[i] * (1 + 1e-9)
                  for i in range(len(roots) - 1))
    return GrowthReport(indices=tuple(idx), root_values=tuple(roots),
                        nonincreasing_tail=bool(tail_ok))


# ---------------------------------------------------------------------------
# invariant cochain sampling


def random_invariant_cochain(algebra, degree, rng, max_terms=64, tol=1e-8):
    """Random sigma-invariant cochain of the given degree.

    Decomposes sigma on coordinates; tensor products of eigenvectors whose
    eigenvalue product is 1 span the invariant cochains, so a random
    combination of (at most max_terms of) them is invariant by construction.
    Raises if sigma is not diagonalizable to working precision or no
    invariant tuple exists.
    """
    m = algebra.dim
    vals, vecs = np.linalg.eig(algebra.sigma_mat.T)
    if np.linalg.cond(vecs) > 1e8:
        raise ValueError("sigma too far from diagonalizable for sampling")
    # phi transforms with sigma^T on each slot; expand in its eigenbasis
    tuples = []
    for flat in range(m ** (degree + 1)):
        idx = np.unravel_index(flat, (m,) * (degree + 1))
        prod = np.prod(vals[list(idx)])
        if abs(prod - 1.0) < tol:
            tuples.append(idx)
    if not tuples:
        raise ValueError("no invariant cochains at this degree")
    if len(tuples) > max_terms:
        pick = rng.choice(len(tuples), size=max_terms, replace=False)
        tuples = [tuples[i] for i in sorted(pick)]
    coeffs = np.zeros((m,) * (degree + 1), dtype=complex)
    for idx in tuples:
        c = rng.standard_normal() + 1j * rng.standard_normal()
        block = vecs[:, idx[0]]
        for i in idx[1:]:
            block = np.multiply.outer(block, vecs[:, i])
        coeffs = coeffs + c * block
    scale = np.abs(coeffs).max()
    if scale < 1e-12:
        raise ValueError("degenerate invariant sample")
    return make_cochain(algebra, coeffs / scale, invariant=True, tol=1e-9)
