import numpy as np
import pytest

from conftest import random_unitary
from ncgtwist.linalg import DimensionMismatch, NotPositiveDefinite
from ncgtwist.peter_weyl import (
    BlockStructureViolation,
    InconsistentDecomposition,
    TruncationOverflow,
    UnknownIrrep,
    block_scalar_operator,
    build_F_phi,
    canonical_twist,
    chi_conjugation_check,
    chi_weighted_trace,
    dump_irrep_table,
    growth_probe,
    haar_pair,
    invariance_defect,
    irrep_table,
    load_irrep_table,
    make_decomposition,
    make_irrep,
    phi_matrix,
    phi_z,
)


def q_int(n, q):
    # (q^-n - q^n) / (q^-1 - q), the balanced q-analogue of n
    return (q ** (-n) - q ** n) / (q ** (-1) - q)


def q_diag_f(l, q):
    exps = np.arange(-2 * l, 2 * l + 1, 2).astype(float)
    return np.diag(q ** (-exps))


def spin_table(q, l_max):
    ents = [make_irrep(l, q_diag_f(l, q)) for l in range(l_max + 1)]
    return irrep_table(ents)


def balanced_posdef(rng, d):
    # eigenvalues paired with their reciprocals so Tr F = Tr F^{-1}
    if d % 2:
        lams = [1.0]
    else:
        lams = []
    for k in range(d // 2):
        x = float(rng.uniform(1.2, 2.5))
        lams += [x, 1.0 / x]
    u = random_unitary(rng, d)
    return u @ np.diag(sorted(lams)) @ u.conj().T


# ---------------------------------------------------------------------------
# irrep data


def test_irrep_trace_facts_match_q_integers():
    q = 0.5
    for l in range(3):                # dims 1, 3, 5
        datum = make_irrep(l, q_diag_f(l, q))
        want = q_int(2 * l + 1, q)
        assert abs(datum.m_val - want) <= 1e-8 * (1 + abs(want))
        assert abs(np.trace(np.linalg.inv(datum.f_mat)).real - want) <= 1e-8


def test_irrep_rejects_bad_f():
    with pytest.raises(NotPositiveDefinite):
        make_irrep(0, np.diag([1.0, -2.0]))
    with pytest.raises(ValueError):
        make_irrep(0, np.diag([2.0, 1.0]))      # Tr F = 3 but Tr F^-1 = 1.5
    with pytest.raises(ValueError):
        make_irrep(0, np.diag([2.0, 0.5]), m_val=7.0)


def test_table_lookup_and_duplicates():
    tab = spin_table(0.6, 2)
    assert tab.get(1).dim == 3
    with pytest.raises(UnknownIrrep):
        tab.get(9)
    with pytest.raises(ValueError):
        irrep_table([make_irrep(0, np.eye(1)), make_irrep(0, np.eye(1))])


def test_table_json_roundtrip(rng):
    f = balanced_posdef(rng, 3)
    tab = irrep_table([make_irrep("a", np.eye(2)), make_irrep("b", f)])
    back = load_irrep_table(dump_irrep_table(tab))
    assert back.labels == ("a", "b")
    assert np.abs(back.get("b").f_mat - f).max() <= 1e-14


# ---------------------------------------------------------------------------
# modular functionals


def test_phi_zero_is_counit():
    tab = spin_table(0.5, 2)
    for l in (0, 1, 2):
        d = 2 * l + 1
        for i in range(d):
            for j in range(d):
                assert phi_z(tab, l, i, j, 0.0) == pytest.approx(
                    1.0 if i == j else 0.0, abs=1e-14)


def test_phi_one_diagonal_reads_f():
    q = 0.5
    tab = spin_table(q, 1)
    f = q_diag_f(1, q)
    for j in range(3):
        assert phi_z(tab, 1, j, j, 1.0) == pytest.approx(f[j, j], rel=1e-12)


def test_phi_convolution_group_law(rng):
    f = balanced_posdef(rng, 3)
    tab = irrep_table([make_irrep("x", f)])
    for z, w in [(0.3, -1.1), (0.5 + 0.2j, 1.0 - 0.4j)]:
        pz = phi_matrix(tab, "x", z)
        pw_ = phi_matrix(tab, "x", w)
        pzw = phi_matrix(tab, "x", z + w)
        # convolution along the coproduct: sum_k phi_z(t_ik) phi_w(t_kj)
        conv = np.einsum("ik,kj->ij", pz, pw_)
        assert np.abs(conv - pzw).max() <= 1e-10


def test_phi_unknown_and_out_of_range():
    tab = spin_table(0.5, 1)
    with pytest.raises(UnknownIrrep):
        phi_z(tab, 7, 0, 0, 1.0)
    with pytest.raises(DimensionMismatch):
        phi_z(tab, 1, 0, 5, 1.0)


# ---------------------------------------------------------------------------
# decompositions and the canonical twist


def two_block_space(rng, table, labels):
    blocks = []
    cur = 0
    for k, l in enumerate(labels):
        d = table.get(l).dim
        blocks.append((l, k, cur, cur + d))
        cur += d
    basis = random_unitary(rng, cur)
    return make_decomposition(blocks, basis, table=table)


def test_decomposition_rejects():
    tab = spin_table(0.5, 1)
    with pytest.raises(InconsistentDecomposition):
        make_decomposition([(0, 0, 0, 2)], np.eye(2), table=tab)   # dim 1 block
    with pytest.raises(InconsistentDecomposition):
        make_decomposition([(0, 0, 0, 1)], np.eye(2), table=tab)   # gap at end
    bad = np.eye(3)
    bad[0, 0] = 2.0
    with pytest.raises(InconsistentDecomposition):
        make_decomposition([(1, 0, 0, 3)], bad, table=tab)


def test_build_identity_twist():
    tab = irrep_table([make_irrep(0, np.eye(1)), make_irrep(1, np.eye(3))])
    dec = make_decomposition([(0, 0, 0, 1), (1, 0, 1, 4)], np.eye(4), table=tab)
    r = canonical_twist(dec, tab)
    assert np.abs(r - np.eye(4)).max() <= 1e-12


def test_build_single_irrep_diag_pattern():
    q = 0.5
    tab = irrep_table([make_irrep("h", np.diag([1 / q, q]))])
    dec = make_decomposition([("h", 0, 0, 2)], np.eye(2), table=tab)
    r = canonical_twist(dec, tab)
    assert np.allclose(r, np.diag([1 / q, q]))


def test_canonical_twist_positive_and_equivariant(rng):
    tab = spin_table(0.5, 2)
    dec = two_block_space(rng, tab, [0, 1, 2])
    r = canonical_twist(dec, tab)
    w = np.linalg.eigvalsh(r)
    assert w[0] > 0
    d_mat = block_scalar_operator(dec, {0: 0.3, 1: 1.7, 2: -2.2})
    assert np.abs(r @ d_mat - d_mat @ r).max() <= 1e-10 * (1 + np.abs(d_mat).max())


def test_build_group_law(rng):
    tab = irrep_table([make_irrep("x", balanced_posdef(rng, 2)),
                       make_irrep("y", balanced_posdef(rng, 3))])
    dec = two_block_space(rng, tab, ["x", "y"])

    def phi_at(z):
        return lambda n, i, j: phi_z(tab, n, i, j, z)

    fz = build_F_phi(dec, tab, phi_at(0.7))
    fw = build_F_phi(dec, tab, phi_at(-0.2))
    fzw = build_F_phi(dec, tab, phi_at(0.5))
    assert np.abs(fz @ fw - fzw).max() <= 1e-10 * (1 + np.abs(fzw).max())


def test_build_imaginary_power_needs_opt_out(rng):
    tab = irrep_table([make_irrep("x", balanced_posdef(rng, 2))])
    dec = two_block_space(rng, tab, ["x"])
    phi = lambda n, i, j: phi_z(tab, n, i, j, 1.0j)
    with pytest.raises(NotPositiveDefinite):
        build_F_phi(dec, tab, phi)
    u = build_F_phi(dec, tab, phi, require_positive=False)
    # unitary, not positive
    assert np.abs(u @ u.conj().T - np.eye(2)).max() <= 1e-10


# ---------------------------------------------------------------------------
# Haar pairing


def test_haar_pair_values():
    q = 0.5
    tab = spin_table(q, 2)
    # trivial irrep: the pairing of 1 with itself is 1
    assert haar_pair(tab, (0, 0, 0), (0, 0, 0)) == pytest.approx(1.0)
    # distinct left indices kill the pairing, as do distinct irreps
    assert haar_pair(tab, (1, 0, 1), (1, 1, 1)) == 0.0
    assert haar_pair(tab, (1, 0, 0), (2, 0, 0)) == 0.0
    # spin-1/2 style 2-dim irrep: F = diag(1/q, q), M = q + 1/q
    tab_h = irrep_table([make_irrep("h", np.diag([1 / q, q]))])
    got = haar_pair(tab_h, ("h", 0, 0), ("h", 0, 0))
    assert got == pytest.approx((1 / q) / (q + 1 / q), rel=1e-12)
    assert got == pytest.approx(0.8, rel=1e-12)


def test_haar_pair_classical_schur():
    tab = irrep_table([make_irrep(0, np.eye(3))])
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    want = (1.0 / 3.0) if (i == k and j == l) else 0.0
                    got = haar_pair(tab, (0, i, j), (0, k, l))
                    assert got == pytest.approx(want, abs=1e-14)


# ---------------------------------------------------------------------------
# conjugation invariance of the weighted trace


def test_chi_conjugation_identity_block_diag(rng):
    tab = spin_table(0.5, 2)
    dec = two_block_space(rng, tab, [0, 1, 2, 1])
    weights = [0.9, 0.4, 0.2, 0.7]
    # block-diagonal argument in decomposition coordinates
    blocks = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
              for d in (1, 3, 5, 3)]
    ab = np.zeros((12, 12), dtype=complex)
    cur = 0
    for m in blocks:
        d = m.shape[0]
        ab[cur:cur + d, cur:cur + d] = m
        cur += d
    a = dec.basis @ ab @ dec.basis.conj().T
    defect = chi_conjugation_check(dec, tab, a, weights=weights)
    ref = abs(chi_weighted_trace(dec, tab, a, weights))
    assert defect <= 1e-9 * (1 + ref)


def test_chi_conjugation_identity_full_argument(rng):
    # off-block parts of the argument drop out of both sides
    tab = spin_table(0.5, 1)
    dec = two_block_space(rng, tab, [0, 1])
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    defect = chi_conjugation_check(dec, tab, a, weights=[1.3, 0.6])
    ref = abs(chi_weighted_trace(dec, tab, a, [1.3, 0.6]))
    assert defect <= 1e-9 * (1 + ref)


def test_chi_conjugation_unit_argument(rng):
    tab = spin_table(0.5, 2)
    dec = two_block_space(rng, tab, [0, 1, 2])
    weights = [1.0, 0.5, 0.25]
    defect = chi_conjugation_check(dec, tab, np.eye(9), weights=weights)
    # both sides equal the weighted sum of the F traces
    want = sum(w * tab.get(l).m_val for w, l in zip(weights, [0, 1, 2]))
    got = chi_weighted_trace(dec, tab, np.eye(9), weights)
    assert got == pytest.approx(want, rel=1e-12)
    assert defect <= 1e-9 * (1 + abs(want))


def test_chi_conjugation_classical_single_irrep(rng):
    tab = irrep_table([make_irrep(0, np.eye(3))])
    dec = two_block_space(rng, tab, [0])
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert chi_conjugation_check(dec, tab, a, weights=[1.0]) <= 1e-10


def test_chi_weights_from_dirac(rng):
    tab = spin_table(0.5, 1)
    dec = two_block_space(rng, tab, [0, 1])
    d_mat = block_scalar_operator(dec, {0: 1.0, 1: 2.0})
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    got = chi_conjugation_check(dec, tab, a, dirac=d_mat, beta=0.5)
    want = chi_conjugation_check(dec, tab, a,
                                 weights=[np.exp(-0.5), np.exp(-2.0)])
    assert got == pytest.approx(want, abs=1e-12)
    bad = d_mat + 0.01 * np.eye(4)
    bad[0, 0] += 0.05          # breaks block-scalarity on the 1-dim block? no:
    # a 1-dim block is always scalar; perturb inside the 3-dim block instead
    bad = d_mat.copy()
    pert = np.zeros((4, 4))
    pert[1, 2] = pert[2, 1] = 0.05
    bad = bad + dec.basis @ pert @ dec.basis.conj().T
    with pytest.raises(BlockStructureViolation):
        chi_conjugation_check(dec, tab, a, dirac=bad)


def test_chi_weight_validation(rng):
    tab = spin_table(0.5, 1)
    dec = two_block_space(rng, tab, [0, 1])
    with pytest.raises(DimensionMismatch):
        chi_conjugation_check(dec, tab, np.eye(4), weights=[1.0])
    with pytest.raises(ValueError):
        chi_conjugation_check(dec, tab, np.eye(4), weights=[1.0, -2.0])
    with pytest.raises(ValueError):
        chi_conjugation_check(dec, tab, np.eye(4))


# ---------------------------------------------------------------------------
# invariance checker on a rank-one toy: truncated integer characters


def char_table(n_max):
    return irrep_table([make_irrep(n, np.eye(1))
                        for n in range(-n_max, n_max + 1)])


def char_oracle(n_max):
    # basis vector e_{total+n_max} for the product character; the unit is
    # the zero character
    def oracle(symbols):
        total = sum(n for n, _, _ in symbols)
        if abs(total) > n_max:
            raise TruncationOverflow(f"character {total} beyond {n_max}")
        vec = np.zeros(2 * n_max + 1, dtype=complex)
        vec[total + n_max] = 1.0
        return vec
    return oracle


def test_invariance_haar_functional():
    tab = char_table(4)
    oracle = char_oracle(4)

    def haar_chi(symbols):
        return 1.0 if sum(n for n, _, _ in symbols) == 0 else 0.0

    assert invariance_defect(tab, haar_chi, [(2, 0, 0)], oracle) <= 1e-14
    assert invariance_defect(tab, haar_chi, [(1, 0, 0), (-1, 0, 0)],
                             oracle) <= 1e-14
    assert invariance_defect(tab, haar_chi, [(1, 0, 0), (2, 0, 0)],
                             oracle) <= 1e-14


def test_invariance_flags_counterexample():
    tab = char_table(4)
    oracle = char_oracle(4)
    constant_one = lambda symbols: 1.0
    assert invariance_defect(tab, constant_one, [(2, 0, 0)], oracle) > 0.1


def test_invariance_truncation_overflow():
    tab = char_table(4)
    oracle = char_oracle(2)
    constant_one = lambda symbols: 1.0
    with pytest.raises(TruncationOverflow):
        invariance_defect(tab, constant_one, [(3, 0, 0), (1, 0, 0)], oracle)


# ---------------------------------------------------------------------------
# growth probe


def weyl_toy(l_max, q=None):
    if q is None:
        ents = [make_irrep(l, np.eye(2 * l + 1)) for l in range(l_max + 1)]
    else:
        ents = [make_irrep(l, q_diag_f(l, q)) for l in range(l_max + 1)]
    tab = irrep_table(ents)
    blocks = []
    cur = 0
    for l in range(l_max + 1):
        d = 2 * l + 1
        for k in range(d):      # multiplicity equals the dimension
            blocks.append((l, k, cur, cur + d))
            cur += d
    dec = make_decomposition(blocks, np.eye(cur), table=tab)
    return tab, dec, blocks


def test_growth_probe_classical_plateau():
    tab, dec, blocks = weyl_toy(6)
    vals = {pos: np.sqrt(b[0] * (b[0] + 1.0)) for pos, b in enumerate(blocks)}
    d_mat = block_scalar_operator(dec, vals)
    rep = growth_probe(dec, tab, d_mat, np.geomspace(1.0, 0.12, 12))
    tail = rep.exponents[-4:]
    assert max(tail) - min(tail) <= 0.1
    assert all(abs(p - 1.5) <= 0.2 for p in tail)


def test_growth_probe_quantum_climbs():
    tab, dec, blocks = weyl_toy(6, q=0.5)
    vals = {pos: 2.0 * b[0] + 1.0 for pos, b in enumerate(blocks)}
    d_mat = block_scalar_operator(dec, vals)
    rep = growth_probe(dec, tab, d_mat, np.geomspace(1.0, 0.12, 12))
    tail = rep.exponents[-5:]
    assert all(tail[k] < tail[k + 1] for k in range(len(tail) - 1))
    assert tail[-1] > 2.0


def test_growth_probe_empty_grid():
    tab, dec, _ = weyl_toy(1)
    rep = growth_probe(dec, tab, np.eye(dec.dim), [])
    assert rep.t_values == () and rep.exponents == ()
