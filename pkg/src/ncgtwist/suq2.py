"""Concrete q-deformed SU(2) model: polynomial algebra, Haar state, GNS
truncation and the canonical positive twist operators.

The polynomial *-algebra is handled in PBW normal form: every element is a
combination of monomials a^k b^m b*^p where a, b are the two generators
(relations a b = q b a, a b* = q b* a, b b* = b* b, a* a + b* b = 1,
a a* + q^2 b b* = 1) and a negative k encodes powers of a*.  Products are
reduced with memoized a^j a*^l collapse tables, so multiplication stays exact
in the coefficients (floating point in q only).

The GNS construction truncates at a total-degree cutoff.  The two commuting
weight gradings wL = k - m + p and wR = k + m - p split the monomial basis
into sectors holding exactly one new monomial per degree step; Gram-Schmidt
against the Haar inner product inside each sector therefore recovers the
matrix-coefficient rays of the irreducible corepresentations without any
q-Clebsch-Gordan data.  Scales and phases are pinned by h(t_0j t_0j*) =
F(j,j)/M on the top row and by the coproduct chain
Delta(t_kj) = sum_s t_ks (x) t_sj for the remaining rows; the chain residual
is the identification gate.

Twist conventions, fixed by requiring that the represented b generator be a
fixed point of sigma = Ad(R R'):

    R  = (id (x) phi_1) Delta   (right leg)   = q^{-wR} on monomials
    R' = (phi_1 (x) id) Delta   (left leg)    = q^{-wL} on monomials

so R R' = q^{-2k} is the a-power grading, whose fixed matrices are exactly
the ones generated by the b part.  On the spin-l block R carries the
F_l = diag(q^{2i-2l}) pattern on the column index and R' carries q^{-2 khat},
khat = l - k, on the row (multiplicity) index, counted symmetrically.
"""

from dataclasses import dataclass
import json
import numpy as np

from .linalg import DomainError, operator_norm
from .peter_weyl import (
    IrrepTable,
    RepDecomposition,
    TruncationOverflow,
    make_irrep,
    irrep_table,
    make_decomposition,
)


class GramSingular(RuntimeError):
    """Truncated Haar Gram matrix is numerically rank deficient."""


class BlockIdentificationFailed(RuntimeError):
    """Irrep block extraction from the truncated GNS space broke down."""


class TailTooLarge(RuntimeError):
    """Requested tolerance is below the computable truncation tail."""


class SpectralGapTooSmall(RuntimeError):
    """Spectral indicator cut falls inside a cluster of eigenvalues."""


# ---------------------------------------------------------------------------
# PBW normal form
#
# key = (k, m, p): a^k b^m b*^p with signed k, m >= 0, p >= 0.

_UNIT_KEY = (0, 0, 0)
_GEN_KEYS = {
    "alpha": (1, 0, 0),
    "beta": (0, 1, 0),
    "beta_star": (0, 0, 1),
    "alpha_star": (-1, 0, 0),
}

_PRUNE = 1e-300


@dataclass
class QAlgebraElement:
    """Element of the q-deformed polynomial algebra in PBW normal form."""

    q: float
    terms: dict


def qa_element(q, terms):
    if not (0.0 < q < 1.0):
        raise DomainError("deformation parameter must lie in (0, 1)")
    clean = {}
    for key, c in terms.items():
        k, m, p = key
        if m < 0 or p < 0:
            raise DomainError("negative b power in monomial key %r" % (key,))
        c = complex(c)
        if abs(c) > _PRUNE:
            clean[(int(k), int(m), int(p))] = c
    return QAlgebraElement(q=float(q), terms=clean)


def qa_unit(q):
    return qa_element(q, {_UNIT_KEY: 1.0})


def generator(q, name):
    if name not in _GEN_KEYS:
        raise DomainError("unknown generator %r" % (name,))
    return qa_element(q, {_GEN_KEYS[name]: 1.0})


def key_degree(key):
    k, m, p = key
    return abs(k) + m + p


def qa_degree(x):
    return max((key_degree(key) for key in x.terms), default=0)


def qa_add(x, y, cy=1.0):
    if x.q != y.q:
        raise DomainError("mixing elements with different q")
    out = dict(x.terms)
    for key, c in y.terms.items():
        out[key] = out.get(key, 0.0) + cy * c
    return qa_element(x.q, out)


def qa_scale(c, x):
    return qa_element(x.q, {key: c * v for key, v in x.terms.items()})


# Collapse tables for mixed a powers.  _merge_pos_neg(q, j, l) is the normal
# form of a^j a*^l, _merge_neg_pos(q, j, l) of a*^j a^l; both spread over
# keys with equal extra b and b* powers.  Cached dicts are shared: callers
# must not mutate them.
_MERGE_PN = {}
_MERGE_NP = {}
_PROD_CACHE = {}
_PAIR_CACHE = {}


def _shift_bb(tab):
    return {(k, m + 1, p + 1): c for (k, m, p), c in tab.items()}


def _merge_pos_neg(q, j, l):
    if j == 0 or l == 0:
        return {(j - l, 0, 0): 1.0}
    cached = _MERGE_PN.get((q, j, l))
    if cached is None:
        base = _merge_pos_neg(q, j - 1, l - 1)
        cached = dict(base)
        for key, c in _shift_bb(base).items():
            cached[key] = cached.get(key, 0.0) - (q ** (2 * l)) * c
        _MERGE_PN[(q, j, l)] = cached
    return cached


def _merge_neg_pos(q, j, l):
    if j == 0 or l == 0:
        return {(l - j, 0, 0): 1.0}
    cached = _MERGE_NP.get((q, j, l))
    if cached is None:
        base = _merge_neg_pos(q, j - 1, l - 1)
        cached = dict(base)
        for key, c in _shift_bb(base).items():
            cached[key] = cached.get(key, 0.0) - (q ** (-2 * (l - 1))) * c
        _MERGE_NP[(q, j, l)] = cached
    return cached


def _mono_product(q, key1, key2):
    """Normal form of a product of PBW monomials as a shared key->coeff dict."""
    cached = _PROD_CACHE.get((q, key1, key2))
    if cached is not None:
        return cached
    k1, m1, p1 = key1
    k2, m2, p2 = key2
    # moving the a part of key2 through the b part of key1 costs q^{-(m+p)k}
    phase = q ** (-(m1 + p1) * k2)
    if k1 >= 0 and k2 >= 0 or k1 <= 0 and k2 <= 0:
        merged = {(k1 + k2, 0, 0): 1.0}
    elif k1 > 0:
        merged = _merge_pos_neg(q, k1, -k2)
    else:
        merged = _merge_neg_pos(q, -k1, k2)
    out = {}
    mm, pp = m1 + m2, p1 + p2
    for (k, j, _), c in merged.items():
        key = (k, mm + j, pp + j)
        out[key] = out.get(key, 0.0) + phase * c
    _PROD_CACHE[(q, key1, key2)] = out
    return out


def normal_order(x, y):
    """Product of two algebra elements, reduced to PBW normal form."""
    if x.q != y.q:
        raise DomainError("mixing elements with different q")
    q = x.q
    out = {}
    for k1, c1 in x.terms.items():
        for k2, c2 in y.terms.items():
            c = c1 * c2
            for key, w in _mono_product(q, k1, k2).items():
                out[key] = out.get(key, 0.0) + c * w
    return qa_element(q, out)


def _adjoint_key(q, key):
    # (a^k b^m b*^p)* = q^{(m+p)k} a^{-k} b^p b*^m
    k, m, p = key
    return (-k, p, m), q ** ((m + p) * k)


def qa_adjoint(x):
    out = {}
    for key, c in x.terms.items():
        akey, w = _adjoint_key(x.q, key)
        out[akey] = out.get(akey, 0.0) + w * np.conj(c)
    return qa_element(x.q, out)


def haar(x):
    """Haar state by the moment formula: only k = 0, m = p monomials survive."""
    q2 = x.q * x.q
    total = 0.0 + 0.0j
    for (k, m, p), c in x.terms.items():
        if k == 0 and m == p:
            total += c * (1.0 - q2) / (1.0 - q2 ** (m + 1))
    return complex(total)


def counit(x):
    # multiplicative with eps(a) = 1, eps(b) = 0
    return complex(sum(c for (k, m, p), c in x.terms.items() if m == 0 and p == 0))


def antipode(x):
    """Antipode, extended antimultiplicatively from the generator table
    kappa(a) = a*, kappa(b) = -q b, kappa(b*) = -b*/q, kappa(a*) = a."""
    q = x.q
    out = {}
    for (k, m, p), c in x.terms.items():
        w = ((-1.0) ** (m + p)) * q ** (m - p + (m + p) * k)
        key = (-k, m, p)
        out[key] = out.get(key, 0.0) + w * c
    return qa_element(q, out)


def _delta_letters(q):
    # coproduct tables on generators, as (left key, right key, coeff)
    a, b, bs, ast = (
        _GEN_KEYS["alpha"],
        _GEN_KEYS["beta"],
        _GEN_KEYS["beta_star"],
        _GEN_KEYS["alpha_star"],
    )
    return {
        a: ((a, a, 1.0), (bs, b, -q)),
        ast: ((ast, ast, 1.0), (b, bs, -q)),
        b: ((b, a, 1.0), (ast, b, 1.0)),
        bs: ((bs, ast, 1.0), (a, bs, 1.0)),
    }


def _tensor_letter(q, tens, letter_terms):
    out = {}
    for (lk, rk), c in tens.items():
        for gl, gr, gc in letter_terms:
            cl = _mono_product(q, lk, gl)
            cr = _mono_product(q, rk, gr)
            for kl, wl in cl.items():
                base = c * gc * wl
                for kr, wr in cr.items():
                    key = (kl, kr)
                    out[key] = out.get(key, 0.0) + base * wr
    return out


def _mono_coproduct(q, key, letters):
    k, m, p = key
    tens = {(_UNIT_KEY, _UNIT_KEY): 1.0}
    seq = []
    if k >= 0:
        seq += [_GEN_KEYS["alpha"]] * k
    else:
        seq += [_GEN_KEYS["alpha_star"]] * (-k)
    seq += [_GEN_KEYS["beta"]] * m
    seq += [_GEN_KEYS["beta_star"]] * p
    for g in seq:
        tens = _tensor_letter(q, tens, letters[g])
    return tens


def comultiply(x, max_degree=None):
    """Coproduct as a dict (left key, right key) -> coefficient.

    Legs of a degree-d monomial have degree at most d, so the expansion never
    leaves the span generated by the input degrees; max_degree only guards
    the caller's own truncation window.
    """
    if max_degree is not None and qa_degree(x) > max_degree:
        raise TruncationOverflow(
            "coproduct of degree %d element exceeds window %d"
            % (qa_degree(x), max_degree)
        )
    letters = _delta_letters(x.q)
    out = {}
    for key, c in x.terms.items():
        for tk, w in _mono_coproduct(x.q, key, letters).items():
            out[tk] = out.get(tk, 0.0) + c * w
    return {k: v for k, v in out.items() if abs(v) > _PRUNE}


def phi_exponent(key):
    """Right-leg weight wR = k + m - p; the modular family acts by q^{-z wR}."""
    k, m, p = key
    return k + m - p


def left_exponent(key):
    """Left-leg weight wL = k - m + p."""
    k, m, p = key
    return k - m + p


def _phi_on_key(q, key, z):
    # multiplicative functional: kills any b power, q^{-zk} on the a part
    k, m, p = key
    if m or p:
        return 0.0
    return q ** (-z * k)


# ---------------------------------------------------------------------------
# Haar oracle: truncated invariance linear system


def haar_invariance_oracle(q, degree):
    """Haar values on all monomials of degree <= degree, from right invariance.

    Solves (id (x) h) Delta(x) = h(x) 1 as a truncated linear system with the
    normalization h(1) = 1.  No moment formula enters; this is the
    independent cross-check for `haar`.  Returns a dict key -> value.
    """
    keys = monomial_keys(degree)
    index = {key: i for i, key in enumerate(keys)}
    letters = _delta_letters(q)
    rows = []
    rhs = []
    for key in keys:
        tens = _mono_coproduct(q, key, letters)
        by_left = {}
        for (lk, rk), c in tens.items():
            by_left.setdefault(lk, []).append((rk, c))
        for lk, contribs in by_left.items():
            row = np.zeros(len(keys), dtype=complex)
            for rk, c in contribs:
                row[index[rk]] += c
            if lk == _UNIT_KEY:
                row[index[key]] -= 1.0
            rows.append(row)
            rhs.append(0.0)
    norm_row = np.zeros(len(keys), dtype=complex)
    norm_row[index[_UNIT_KEY]] = 1.0
    rows.append(norm_row)
    rhs.append(1.0)
    a = np.array(rows)
    b = np.array(rhs, dtype=complex)
    # row scales spread over q^{-O(degree^2)}; equilibrate before solving
    scale = np.abs(a).max(axis=1)
    scale[scale == 0.0] = 1.0
    a /= scale[:, None]
    b /= scale
    sol, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if rank < len(keys):
        raise GramSingular(
            "invariance system rank %d below unknown count %d" % (rank, len(keys))
        )
    resid = np.abs(a @ sol - b).max()
    if resid > 1e-10:
        raise GramSingular("invariance system residual %.3e" % resid)
    return {key: complex(sol[index[key]]) for key in keys}


# ---------------------------------------------------------------------------
# GNS truncation


def monomial_keys(degree):
    keys = []
    for k in range(-degree, degree + 1):
        rest = degree - abs(k)
        for m in range(rest + 1):
            for p in range(rest - m + 1):
                keys.append((k, m, p))
    keys.sort(key=lambda key: (key_degree(key), key[0], key[1], key[2]))
    return keys


def _sector(key):
    return (left_exponent(key), phi_exponent(key))


def q_integer(n, q):
    """[n]_q = (q^{-n} - q^n) / (q^{-1} - q)."""
    return (q ** (-n) - q ** n) / (q ** (-1) - q)


def suq2_irrep_table(q, twol_max):
    entries = []
    for n in range(twol_max + 1):
        expo = np.arange(-n, n + 1, 2)
        f = np.diag(q ** expo.astype(float))
        entries.append(make_irrep(n, f, m_val=q_integer(n + 1, q)))
    return irrep_table(entries)


@dataclass
class GnsTruncation:
    """Degree-truncated GNS data for the Haar state.

    basis holds the PBW monomial keys; onb_map columns expand the
    orthonormal basis in monomial coordinates, ordered by the (2l, row k,
    column j) labels of the identified irrep blocks.  t_elements maps
    (2l, k, j) to the identified matrix-coefficient algebra element.
    """

    q: float
    degree_cutoff: int
    basis: tuple
    index: dict
    gram: np.ndarray
    onb_map: np.ndarray
    labels: tuple
    table: IrrepTable
    pw_blocks: RepDecomposition
    t_elements: dict
    chain_defect: float
    chain_gate: float

    @property
    def dim(self):
        return len(self.basis)


def _haar_pairing_any(q, key_left, key_right):
    """h(x* y) for monomials; key_right may lie outside any basis.

    Same-sector keys share the alpha power k and the b-b* imbalance, so
    x* y collapses to P_k(w) w^M with w = b b* = b* b, M = m_left + p_right
    and P_k(w) = prod_{j=0}^{k-1} (1 - q^{-2j} w) for k >= 0 or
    prod_{j=1}^{|k|} (1 - q^{2j} w) for k < 0; the adjoint and reordering
    phases cancel exactly.  Against the spectral weights of w, h(f(w)) =
    (1-q^2) sum_n q^{2n} f(q^{2n}), the k >= 0 factors zero out every
    term with n < k and leave the rest positive, so both branches sum
    nonnegative terms only; the normal-form route loses up to
    q^{-k(k-1)} eps to cancellation at deep alpha powers.
    """
    cached = _PAIR_CACHE.get((q, key_left, key_right))
    if cached is not None:
        return cached
    kl, ml, pl = key_left
    kr, mr, pr = key_right
    if kl != kr or (ml - pl) != (mr - pr):
        out = 0.0
    else:
        mm = ml + pr
        kk = abs(kl)
        q2 = q * q
        # alpha*^k alpha^k = prod_{j<k} (1 - q^{-2j} w) kills the spectral
        # weights n < k, so that branch starts at n = k; the alpha^k alpha*^k
        # branch, prod_{1<=j<=k} (1 - q^{2j} w), contributes from n = 0
        n0 = kk if kl >= 0 else 0
        offs = range(-(kk - 1), 1) if kl >= 0 else range(1, kk + 1)
        total = 0.0
        weight = (1.0 - q2) * q2 ** (n0 * (mm + 1))
        step = q2 ** (mm + 1)
        for n in range(n0, n0 + 4000):
            term = weight
            for j in offs:
                term *= 1.0 - q2 ** (n + j)
            total += term
            weight *= step
            if weight < 1e-17 * total + 1e-300:
                break
        out = total
    _PAIR_CACHE[(q, key_left, key_right)] = out
    return out


def element_pair(x, y):
    """h(x* y) through the cancellation-free monomial pairing.

    Prefer this over haar(normal_order(qa_adjoint(x), y)) whenever the
    alpha powers run deep: normal ordering alpha*^k alpha^k expansions
    loses up to q^{-k(k-1)} eps to cancellation, the pairing loses nothing.
    """
    if x.q != y.q:
        raise DomainError("mismatched deformation parameters")
    total = 0.0
    for kx, cx in x.terms.items():
        for ky, cy in y.terms.items():
            if _sector(kx) == _sector(ky):
                total += np.conj(cx) * cy * _haar_pairing_any(x.q, kx, ky)
    return complex(total)


def _sector_groups(keys, index):
    groups = {}
    for key in keys:
        groups.setdefault(_sector(key), []).append(index[key])
    for sec, ix in groups.items():
        degs = [key_degree(keys[i]) for i in ix]
        if len(set(degs)) != len(degs):
            raise BlockIdentificationFailed(
                "degree collision inside weight sector %r" % (sec,)
            )
        order = np.argsort(degs)
        groups[sec] = [ix[int(i)] for i in order]
    return groups


def gns_build(q, degree_cutoff, tol=1e-9):
    """Truncated GNS space of the Haar state with identified irrep blocks.

    Raises GramSingular when the Haar Gram matrix degenerates and
    BlockIdentificationFailed when the sector filtration or the coproduct
    chain consistency check breaks down.
    """
    if not (0.0 < q < 1.0):
        raise DomainError("deformation parameter must lie in (0, 1)")
    if degree_cutoff < 1:
        raise DomainError("degree cutoff must be at least 1")
    keys = tuple(monomial_keys(degree_cutoff))
    index = {key: i for i, key in enumerate(keys)}
    dim = len(keys)

    gram = np.zeros((dim, dim), dtype=complex)
    groups = _sector_groups(keys, index)
    for ix in groups.values():
        for i in ix:
            for j in ix:
                gram[i, j] = _haar_pairing_any(q, keys[i], keys[j])

    # sector Gram-Schmidt through per-sector Cholesky; columns stay
    # triangular against the degree filtration inside each sector.
    # positivity is gated per sector: the full Gram is block diagonal in the
    # weight sectors anyway, and the tiny moment-matrix eigenvalues of deep
    # sectors would drown in the rounding noise of a full eigvalsh
    raw_cols = {}
    worst_cond = 1.0
    eps = np.finfo(float).eps
    for sec, ix in groups.items():
        sub = gram[np.ix_(ix, ix)]
        ws = np.linalg.eigvalsh(sub)
        if ws[0] <= 32.0 * eps * ws[-1]:
            raise GramSingular(
                "sector %r Gram eigenvalue range [%.3e, %.3e] at cutoff %d"
                % (sec, ws[0], ws[-1], degree_cutoff)
            )
        worst_cond = max(worst_cond, float(ws[-1] / ws[0]))
        try:
            chol = np.linalg.cholesky(sub)
        except np.linalg.LinAlgError:
            raise GramSingular("sector %r Gram not positive definite" % (sec,))
        coeff = np.linalg.inv(chol).conj().T
        a, b = sec
        base = max(abs(a), abs(b))
        for level in range(len(ix)):
            twol = base + 2 * level
            vec = np.zeros(dim, dtype=complex)
            for r in range(level + 1):
                vec[ix[r]] = coeff[r, level]
            raw_cols[(twol, (twol - a) // 2, (twol - b) // 2)] = vec

    expected = [
        (twol, k, j)
        for twol in range(degree_cutoff + 1)
        for k in range(twol + 1)
        for j in range(twol + 1)
    ]
    missing = [lab for lab in expected if lab not in raw_cols]
    if missing or len(raw_cols) != len(expected):
        raise BlockIdentificationFailed(
            "sector filtration produced %d vectors, expected %d (missing %r)"
            % (len(raw_cols), len(expected), missing[:4])
        )

    table = suq2_irrep_table(q, degree_cutoff)
    onb = np.zeros((dim, dim), dtype=complex)
    labels = tuple(expected)
    col_of = {}
    for col, lab in enumerate(labels):
        onb[:, col] = raw_cols[lab]
        col_of[lab] = col
    coords_map = onb.conj().T @ gram  # monomial delta -> ONB coordinates

    letters = _delta_letters(q)
    tens_cache = {}

    def tensor_matrix(vec):
        # ONB (x) ONB coordinate matrix of Delta(vec)
        accum = {}
        for i in np.nonzero(np.abs(vec) > 1e-15)[0]:
            key = keys[int(i)]
            if key not in tens_cache:
                tens_cache[key] = _mono_coproduct(q, key, letters)
            for tk, w_ in tens_cache[key].items():
                accum[tk] = accum.get(tk, 0.0) + vec[i] * w_
        if not accum:
            return np.zeros((dim, dim), dtype=complex)
        ls = np.array([index[lk] for lk, _ in accum], dtype=int)
        rs = np.array([index[rk] for _, rk in accum], dtype=int)
        cs = np.array(list(accum.values()), dtype=complex)
        return coords_map[:, ls] @ (cs[:, None] * coords_map[:, rs].T)

    # scales: row 0 pinned by the Haar pairing pattern h(t t*) = F(j,j)/M,
    # remaining rows propagated through the coproduct chain
    scales = {(0, 0, 0): 1.0 + 0.0j}
    chain_defect = 0.0
    for twol in range(1, degree_cutoff + 1):
        datum = table.get(twol)
        fdiag = np.diag(datum.f_mat).real
        for j in range(twol + 1):
            u = raw_cols[(twol, 0, j)]
            elem = qa_element(q, {keys[int(i)]: u[int(i)] for i in np.nonzero(u)[0]})
            adj = qa_adjoint(elem)
            nn = element_pair(adj, adj).real  # h(u u*), stable at deep alpha powers
            if nn <= 0:
                raise BlockIdentificationFailed(
                    "non-positive h(u u*) on block (%d, 0, %d)" % (twol, j)
                )
            scales[(twol, 0, j)] = np.sqrt(fdiag[j] / (datum.m_val * nn)) + 0.0j
        for j in range(twol + 1):
            tmat = tensor_matrix(raw_cols[(twol, 0, j)])
            c0j = scales[(twol, 0, j)]
            for s in range(1, twol + 1):
                g = tmat[col_of[(twol, 0, s)], col_of[(twol, s, j)]]
                if abs(g) < 1e-13:
                    raise BlockIdentificationFailed(
                        "vanishing chain coefficient on (%d, %d, %d)" % (twol, s, j)
                    )
                scales[(twol, s, j)] = g * c0j / scales[(twol, 0, s)]
    # full chain validation: Delta(t_kj) = sum_s t_ks (x) t_sj
    for twol in range(1, degree_cutoff + 1):
        for k_row in range(twol + 1):
            for j in range(twol + 1):
                tmat = scales[(twol, k_row, j)] * tensor_matrix(
                    raw_cols[(twol, k_row, j)]
                )
                total = np.linalg.norm(tmat)
                for s in range(twol + 1):
                    tmat[col_of[(twol, k_row, s)], col_of[(twol, s, j)]] -= (
                        scales[(twol, k_row, s)] * scales[(twol, s, j)]
                    )
                rel = np.linalg.norm(tmat) / max(total, 1e-300)
                chain_defect = max(chain_defect, float(rel))
    # the residual floor tracks eps * cond of the sector moment Grams
    # (moment matrices go near-singular as the degree climbs); the widened
    # gate still trips on convention mistakes, which leave O(1) residuals,
    # so it is capped well below that scale
    chain_gate = max(float(tol), min(1e-2, 256.0 * np.finfo(float).eps * worst_cond))
    if chain_defect > chain_gate:
        raise BlockIdentificationFailed(
            "coproduct chain residual %.3e exceeds %.1e" % (chain_defect, chain_gate)
        )

    blocks = []
    col = 0
    for twol in range(degree_cutoff + 1):
        for k_row in range(twol + 1):
            blocks.append((twol, k_row, col, col + twol + 1))
            col += twol + 1
    pw_blocks = make_decomposition(blocks, np.eye(dim), table=table)

    t_elements = {}
    for lab in labels:
        vec = scales[lab] * raw_cols[lab]
        t_elements[lab] = qa_element(
            q, {keys[int(i)]: vec[int(i)] for i in np.nonzero(vec)[0]}
        )

    return GnsTruncation(
        q=q,
        degree_cutoff=degree_cutoff,
        basis=keys,
        index=index,
        gram=gram,
        onb_map=onb,
        labels=labels,
        table=table,
        pw_blocks=pw_blocks,
        t_elements=t_elements,
        chain_defect=chain_defect,
        chain_gate=chain_gate,
    )


def represent(trunc, x):
    """Compression of left multiplication by x to the truncated GNS space.

    Matrix entries are exact Haar pairings <e_u, x e_v>; the compression
    error is concentrated on source vectors of degree above
    degree_cutoff - deg(x), and the represented relations hold on the
    complementary safe subspace.  pi(x*) = pi(x)* exactly.
    """
    if isinstance(x, str):
        x = generator(trunc.q, x)
    if x.q != trunc.q:
        raise DomainError("element q does not match the truncation")
    dim = trunc.dim
    keys = trunc.basis
    q = trunc.q
    sector_members = {}
    for i, key in enumerate(keys):
        sector_members.setdefault(_sector(key), []).append(i)
    w_mat = np.zeros((dim, dim), dtype=complex)
    for yi, ykey in enumerate(keys):
        prod = {}
        for key, c in x.terms.items():
            for pk, pw in _mono_product(q, key, ykey).items():
                prod[pk] = prod.get(pk, 0.0) + c * pw
        for tkey, tc in prod.items():
            members = sector_members.get(_sector(tkey))
            if not members:
                continue
            for mi in members:
                pairing = _haar_pairing_any(q, keys[mi], tkey)
                if pairing != 0.0:
                    w_mat[mi, yi] += tc * pairing
    return trunc.onb_map.conj().T @ w_mat @ trunc.onb_map


def safe_subspace_mask(trunc, deg):
    """Mask of ONB columns free of compression error under degree-deg
    left multiplication."""
    return np.array(
        [lab[0] <= trunc.degree_cutoff - deg for lab in trunc.labels], dtype=bool
    )


def gns_vector(trunc, x):
    """Coordinates of the GNS vector of x in the orthonormal basis."""
    if x.q != trunc.q:
        raise DomainError("element q does not match the truncation")
    coords = np.zeros(trunc.dim, dtype=complex)
    for key, c in x.terms.items():
        i = trunc.index.get(key)
        if i is None:
            raise TruncationOverflow(
                "monomial %r lies outside the degree window" % (key,)
            )
        coords[i] = c
    return trunc.onb_map.conj().T @ trunc.gram @ coords


# ---------------------------------------------------------------------------
# canonical twist operators


def _leg_action_checked(trunc, z, leg):
    """Validate the leg action of the modular functional monomial by
    monomial against its weight eigenvalue."""
    q = trunc.q
    letters = _delta_letters(q)
    check_deg = min(trunc.degree_cutoff, 4)
    for key in trunc.basis:
        if key_degree(key) > check_deg:
            continue
        acc = {}
        for (lk, rk), c in _mono_coproduct(q, key, letters).items():
            wgt = _phi_on_key(q, rk if leg == "right" else lk, z)
            if wgt != 0.0:
                tgt = lk if leg == "right" else rk
                acc[tgt] = acc.get(tgt, 0.0) + c * wgt
        expo = phi_exponent(key) if leg == "right" else left_exponent(key)
        expected = q ** (-z * expo)
        acc.setdefault(key, 0.0)
        defect = max(
            abs(c - (expected if tk == key else 0.0)) for tk, c in acc.items()
        )
        if defect > 1e-10 * max(1.0, abs(expected)):
            raise BlockIdentificationFailed(
                "leg action not diagonal on %r (defect %.3e)" % (key, defect)
            )


def build_R(trunc, validate=True):
    """Right-leg twist (id (x) phi_1) Delta as a diagonal matrix in the ONB.

    Eigenvalue q^{-wR} on each monomial; on the spin-l block this is the
    F_l pattern on the column index.
    """
    if validate:
        _leg_action_checked(trunc, 1.0, "right")
    q = trunc.q
    eig = np.array([q ** float(2 * lab[2] - lab[0]) for lab in trunc.labels])
    return np.diag(eig)


def build_Rprime(trunc, validate=True):
    """Left-leg twist (phi_1 (x) id) Delta, diagonal with q^{-wL} eigenvalues.

    The exponent sign is pinned by requiring that the represented b
    generator commute with R R'; on the spin-l block the eigenvalues follow
    q^{-2 khat} with the multiplicity index khat = l - k counted
    symmetrically around zero.
    """
    if validate:
        _leg_action_checked(trunc, 1.0, "left")
    q = trunc.q
    eig = np.array([q ** float(2 * lab[1] - lab[0]) for lab in trunc.labels])
    return np.diag(eig)


def build_R1(trunc, validate=True):
    r = build_R(trunc, validate=validate)
    return r @ build_Rprime(trunc, validate=False)


def build_dirac(trunc, spectral_fn=None):
    """Equivariant Dirac operator: scalar d(l, k) on each irrep block.

    spectral_fn maps (2l, row k) to a real value; default 2l + 1.
    """
    if spectral_fn is None:
        spectral_fn = lambda twol, k: float(twol + 1)
    eig = np.empty(trunc.dim)
    for i, (twol, k, _) in enumerate(trunc.labels):
        val = complex(spectral_fn(twol, k))
        if abs(val.imag) > 0:
            raise DomainError("Dirac spectral values must be real")
        eig[i] = val.real
    return np.diag(eig)


def equivariance_defect(trunc, d_mat):
    """Distance of d_mat from block-scalar form over the identified blocks."""
    d_mat = np.asarray(d_mat, dtype=complex)
    defect = 0.0
    for blk in trunc.pw_blocks.blocks:
        sl = slice(blk.start, blk.stop)
        sub = d_mat[sl, sl]
        mean = np.trace(sub) / sub.shape[0]
        defect = max(defect, operator_norm(sub - mean * np.eye(sub.shape[0])))
        off = d_mat[sl, :].copy()
        off[:, sl] = 0.0
        if off.size:
            defect = max(defect, float(np.abs(off).max()))
    return float(defect)


@dataclass
class HaarRecovery:
    value: complex
    tail: float
    trace_weight: float


def haar_recovery(trunc, a, lam_fn, tol=1e-6):
    """Haar value of a recovered from the twisted trace
    Tr(pi(a) R L) / Tr(R L).

    lam_fn maps 2l to the positive weight on the spin-l blocks.  The
    reported tail bounds the mass of the blocks beyond the cutoff,
    (||pi(a)|| + |value|) sum_{l > L} (2l+1) M_l lam_l / Tr(R L); raises
    TailTooLarge when it exceeds tol or the weight sum fails to converge.
    """
    if isinstance(a, str):
        a = generator(trunc.q, a)
    q = trunc.q
    r_diag = np.diag(build_R(trunc, validate=False))
    lam = np.array([float(lam_fn(lab[0])) for lab in trunc.labels])
    if (lam <= 0).any():
        raise DomainError("trace weights must be positive")
    rl = r_diag * lam
    den = rl.sum().real
    mat = represent(trunc, a)
    value = complex((mat * rl[None, :]).trace() / den)

    mass = 0.0
    prev = np.inf
    twol = trunc.degree_cutoff + 1
    converged = False
    for _ in range(2000):
        term = (twol + 1) * q_integer(twol + 1, q) * float(lam_fn(twol))
        mass += term
        if term < 1e-300:
            converged = True
            break
        if term > prev and term > 1e-30:
            raise TailTooLarge("trace weights grow with the spin; tail not summable")
        prev = term
        twol += 1
    if not converged:
        raise TailTooLarge("tail sum did not converge within the horizon")
    tail = float((operator_norm(mat) + abs(value)) * mass / den)
    if tail > tol:
        raise TailTooLarge("tail bound %.3e exceeds tolerance %.1e" % (tail, tol))
    return HaarRecovery(value=value, tail=tail, trace_weight=den)


def fixed_point_basis(trunc, r1=None, tol=1e-8):
    """Monomials whose represented matrices are fixed by Ad(R R')."""
    if r1 is None:
        r1 = build_R1(trunc, validate=False)
    r1d = np.diag(r1)
    out = []
    for key in trunc.basis:
        mat = represent(trunc, qa_element(trunc.q, {key: 1.0}))
        nrm = operator_norm(mat)
        if nrm == 0.0:
            continue
        twisted = (r1d[:, None] * mat) / r1d[None, :]
        if operator_norm(twisted - mat) <= tol * nrm:
            out.append(qa_element(trunc.q, {key: 1.0}))
    return out


def fixed_projection_defect(trunc, mat, r1=None, tol=1e-12):
    """Relative distance of mat from the Ad(R R')-fixed matrix subspace.

    The fixed subspace is spanned by the matrix units with equal R R'
    weights, so the Frobenius-orthogonal projection is an entry mask.
    """
    if r1 is None:
        r1 = build_R1(trunc, validate=False)
    r1d = np.diag(r1).real
    mask = np.abs(r1d[:, None] - r1d[None, :]) <= tol * np.maximum(
        r1d[:, None], r1d[None, :]
    )
    mat = np.asarray(mat, dtype=complex)
    nrm = np.linalg.norm(mat)
    if nrm == 0.0:
        return 0.0
    return float(np.linalg.norm(mat * ~mask) / nrm)


@dataclass
class UnitaryWitness:
    matrix: np.ndarray
    defect: float
    gap: float


def u_element(trunc, epsilon_u=0.05, gap_tol=1e-6):
    """Nontrivial unitary u = I1(b* b)(pi(b) - 1) + 1.

    I1 is the spectral indicator of [1 - epsilon_u, infinity) for the
    represented b* b; raises SpectralGapTooSmall when the cut lands within
    gap_tol of its spectrum.  Returns the matrix with the measured
    unitarity defect ||u* u - 1|| and the spectral gap at the cut.
    """
    bb = represent(trunc, qa_element(trunc.q, {(0, 1, 1): 1.0}))
    bb = 0.5 * (bb + bb.conj().T)
    w, v = np.linalg.eigh(bb)
    cut = 1.0 - epsilon_u
    gap = float(np.abs(w - cut).min())
    if gap < gap_tol:
        raise SpectralGapTooSmall(
            "indicator cut %.6f within %.1e of the spectrum" % (cut, gap)
        )
    sel = w > cut
    proj = v[:, sel] @ v[:, sel].conj().T
    pb = represent(trunc, "beta")
    u = proj @ (pb - np.eye(trunc.dim)) + np.eye(trunc.dim)
    defect = operator_norm(u.conj().T @ u - np.eye(trunc.dim))
    return UnitaryWitness(matrix=u, defect=float(defect), gap=gap)


# ---------------------------------------------------------------------------
# equivariant functionals


def product_oracle(trunc):
    """Multiplication oracle over identified matrix coefficients.

    Maps a tuple of (2l, i, j) symbols to the monomial coordinate vector of
    the product element; raises TruncationOverflow when the degrees cannot
    stay inside the window.
    """

    def oracle(symbols):
        total = sum(int(s[0]) for s in symbols)
        if total > trunc.degree_cutoff:
            raise TruncationOverflow(
                "product degree %d exceeds cutoff %d" % (total, trunc.degree_cutoff)
            )
        elem = qa_unit(trunc.q)
        for sym in symbols:
            t = trunc.t_elements.get(tuple(int(v) for v in sym))
            if t is None:
                raise KeyError("unidentified coefficient %r" % (sym,))
            elem = normal_order(elem, t)
        coords = np.zeros(trunc.dim, dtype=complex)
        for key, c in elem.terms.items():
            i = trunc.index.get(key)
            if i is None:
                raise TruncationOverflow(
                    "product leaves the degree window at %r" % (key,)
                )
            coords[i] = c
        return coords

    return oracle


def make_eta(trunc, d_mat, r_mat, s_consts):
    """Heat-damped equivariant functional on identified coefficients.

    eta(a_0, ..., a_n) = Tr(pi(a_0) e^{-s_0 D^2} [D, pi(a_1)] e^{-s_1 D^2}
    ... [D, pi(a_n)] e^{-s_n D^2} R) with fixed damping constants s_i; the
    returned callable takes a tuple of (2l, i, j) symbols, for use with the
    invariance checker.
    """
    d_mat = np.asarray(d_mat, dtype=complex)
    r_mat = np.asarray(r_mat, dtype=complex)
    s_consts = tuple(float(s) for s in s_consts)
    if not s_consts or any(s <= 0 for s in s_consts):
        raise DomainError("damping constants must be positive")
    w, v = np.linalg.eigh(0.5 * (d_mat + d_mat.conj().T))
    heats = {}

    def heat(s):
        if s not in heats:
            heats[s] = (v * np.exp(-s * w * w)[None, :]) @ v.conj().T
        return heats[s]

    rep_cache = {}

    def rep(sym):
        sym = tuple(int(x) for x in sym)
        if sym not in rep_cache:
            t = trunc.t_elements.get(sym)
            if t is None:
                raise KeyError("unidentified coefficient %r" % (sym,))
            rep_cache[sym] = represent(trunc, t)
        return rep_cache[sym]

    def eta(symbols):
        if not symbols:
            raise DomainError("eta needs at least one argument")
        if len(symbols) > len(s_consts):
            raise DomainError(
                "eta arity %d exceeds the %d damping constants"
                % (len(symbols), len(s_consts))
            )
        acc = rep(symbols[0]) @ heat(s_consts[0])
        for pos, sym in enumerate(symbols[1:], start=1):
            a = rep(sym)
            acc = acc @ (d_mat @ a - a @ d_mat) @ heat(s_consts[pos])
        return complex(np.trace(acc @ r_mat))

    return eta


def eta_tail_bound(trunc, d_mat, r_mat, s_consts, symbols):
    """Computable bound on the truncation defect of the invariance identity.

    Every discrepancy term factors through a state of spin above
    (cutoff - argument degrees), damped by at least the smallest heat
    constant; the bound sums the twisted block mass
    (2l+1) M_l e^{-s_min d(l)^2} beyond that edge and multiplies by ||R||,
    the argument amplification factors max(1, 2 ||D|| ||pi(a_j)||) and the
    total Haar-pair mass M_l of the coproduct legs.
    """
    d_mat = np.asarray(d_mat, dtype=complex)
    q = trunc.q
    s_min = min(float(s) for s in s_consts)
    deg_args = sum(int(s[0]) for s in symbols)
    twol_eff = max(trunc.degree_cutoff - deg_args + 1, 0)
    dnorm = operator_norm(d_mat)
    rnorm = operator_norm(np.asarray(r_mat, dtype=complex))
    amp = 1.0
    for sym in symbols:
        t = trunc.t_elements[tuple(int(v) for v in sym)]
        amp *= max(1.0, 2.0 * dnorm * operator_norm(represent(trunc, t)))
    legs = 1.0
    for sym in symbols:
        legs *= q_integer(int(sym[0]) + 1, q)
    mass = 0.0
    twol = twol_eff
    for _ in range(4000):
        d_val = float(twol + 1)
        term = (twol + 1) * q_integer(twol + 1, q) * np.exp(-s_min * d_val * d_val)
        mass += term
        if term < 1e-300:
            break
        twol += 1
    return float(amp * legs * rnorm * mass)


# ---------------------------------------------------------------------------
# model files


@dataclass
class Suq2Model:
    q: float
    degree_cutoff: int
    dirac: tuple
    epsilon_u: float


def load_suq2_model(obj):
    """Model description from a JSON-compatible dict.

    Expected shape: {"q": 0.5, "degree_cutoff": 6,
    "dirac": [[l, value, sign], ...], "epsilon_u": 0.05}; the dirac rows
    override the default spectral values 2l + 1 per spin.
    """
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        q = float(obj["q"])
        cutoff = int(obj["degree_cutoff"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError("model needs numeric q and degree_cutoff") from exc
    if not (0.0 < q < 1.0):
        raise DomainError("deformation parameter must lie in (0, 1)")
    if cutoff < 1:
        raise DomainError("degree cutoff must be at least 1")
    rows = []
    for row in obj.get("dirac", []):
        if len(row) != 3:
            raise DomainError("dirac rows must be [l, value, sign]")
        l_val, value, sign = row
        twol = int(round(2 * float(l_val)))
        if abs(2 * float(l_val) - twol) > 1e-9 or twol < 0:
            raise DomainError("dirac row spin %r is not a half-integer" % (l_val,))
        if float(sign) not in (-1.0, 1.0):
            raise DomainError("dirac row sign must be +-1")
        rows.append((twol, float(value), float(sign)))
    eps = float(obj.get("epsilon_u", 0.05))
    if not (0.0 < eps < 1.0):
        raise DomainError("epsilon_u must lie in (0, 1)")
    return Suq2Model(q=q, degree_cutoff=cutoff, dirac=tuple(rows), epsilon_u=eps)


def dump_suq2_model(model):
    return {
        "q": model.q,
        "degree_cutoff": model.degree_cutoff,
        "dirac": [[twol / 2.0, value, sign] for twol, value, sign in model.dirac],
        "epsilon_u": model.epsilon_u,
    }


def model_spectral_fn(model):
    table = {twol: sign * value for twol, value, sign in model.dirac}

    def spectral_fn(twol, k):
        return table.get(twol, float(twol + 1))

    return spectral_fn
