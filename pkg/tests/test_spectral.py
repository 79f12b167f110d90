import itertools
import math

import numpy as np
import pytest
import scipy.linalg

from conftest import random_unitary
from ncgtwist.linalg import NotPositiveDefinite, DomainError, commutator, dagger
from ncgtwist.twisted_complex import algebra_from_matrices, evaluate_cochain
from ncgtwist.spectral_data import (
    ChernCharacter,
    NotFixed,
    NotIdempotent,
    NotUnitary,
    chern_character,
    cocycle_defect,
    dump_character,
    expand_in_basis,
    make_spectral_data,
    pair_even,
    pair_odd,
    twist_automorphism,
    validate_spectral_data,
)


# ---------------------------------------------------------------------------
# independent oracle: heat functional by raw index loops, weights from the
# matrix exponential of the Opitz bidiagonal


def opitz_weight(nodes, beta):
    mu = np.asarray(nodes, dtype=float)
    n = mu.size - 1
    if n == 0:
        return math.exp(-beta * mu[0])
    b = np.diag(mu) + np.diag(np.ones(n), 1)
    return (-1.0) ** n * beta ** (-n) * scipy.linalg.expm(-beta * b)[0, -1]


def jlo_oracle(h, mats, beta, r=None, gamma=None):
    # gamma R is folded into slot 0; it commutes with h so the node pattern
    # of the simplex weight is untouched
    lam, u = np.linalg.eigh(h)
    d = len(lam)
    front = np.eye(d, dtype=complex)
    if gamma is not None:
        front = front @ gamma
    if r is not None:
        front = front @ r
    mb = [u.conj().T @ front @ mats[0] @ u]
    mb += [u.conj().T @ m @ u for m in mats[1:]]
    n = len(mats) - 1
    memo = {}
    total = 0.0 + 0.0j
    for idx in itertools.product(range(d), repeat=n + 1):
        entry = 1.0 + 0.0j
        for j in range(n + 1):
            entry *= mb[j][idx[j], idx[(j + 1) % (n + 1)]]
        if entry == 0.0:
            continue
        key = tuple(sorted(lam[k] for k in (idx[1:] + idx[:1])))
        if key not in memo:
            memo[key] = opitz_weight(key, beta)
        total += entry * memo[key]
    return beta ** n * total


def character_oracle(data, beta, degree, arg_mats, gamma_in_odd=False):
    # same prefactor conventions as the package, different evaluation path
    d_mat = data.dirac
    slots = [arg_mats[0]] + [commutator(d_mat, a) for a in arg_mats[1:]]
    if degree % 2 == 0:
        n = degree // 2
        pref = beta ** (-n)
    else:
        n = (degree - 1) // 2
        pref = (1 + 1j) * beta ** (-(n + 0.5))
        if gamma_in_odd:
            slots[0] = data.grading @ slots[0]
    return pref * jlo_oracle(d_mat @ d_mat, slots, beta,
                             r=data.twist, gamma=data.grading)


# ---------------------------------------------------------------------------
# synthetic beds


def even_bed(twist="generic"):
    # C^4 = C^2 (+) C^2 with the grading separating the halves.  The off
    # diagonal corner d = P S Q* is deliberately non normal so that the two
    # halves of D^2 differ and the graded components do not cancel.  The
    # twist acts as f(S) transported into each corner's own basis, which is
    # exactly the commutation constraint d R_1 = R_0 d.  The algebra is the
    # upper block plus the lower unit, so it is unital and twist closed.
    rng = np.random.default_rng(31)
    p = random_unitary(rng, 2)
    q = random_unitary(rng, 2)
    sing = np.array([0.8, 1.5])
    d_half = p @ np.diag(sing) @ q.conj().T
    d_mat = np.zeros((4, 4), dtype=complex)
    d_mat[:2, 2:] = d_half
    d_mat[2:, :2] = d_half.conj().T
    if twist == "identity":
        r_top, r_bot = np.eye(2), np.eye(2)
    else:
        f = np.diag([0.7, 1.6])
        r_top = p @ f @ p.conj().T
        r_bot = q @ f @ q.conj().T
    r_mat = np.zeros((4, 4), dtype=complex)
    r_mat[:2, :2] = r_top
    r_mat[2:, 2:] = r_bot
    gamma = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
    basis = []
    for i in range(2):
        for j in range(2):
            e = np.zeros((4, 4), dtype=complex)
            e[i, j] = 1.0
            basis.append(e)
    low = np.zeros((4, 4), dtype=complex)
    low[2, 2] = low[3, 3] = 1.0
    basis.append(low)
    data = make_spectral_data(basis, d_mat, r_mat, grading=gamma)
    algebra = algebra_from_matrices(basis, conjugator=r_mat)
    return data, algebra


def odd_bed():
    # full 2x2 matrix algebra; Dirac and twist share an eigenbasis
    rng = np.random.default_rng(32)
    u = random_unitary(rng, 2)
    d_mat = u @ np.diag([1.1, -0.6]) @ u.conj().T
    r_mat = u @ np.diag([0.8, 1.7]) @ u.conj().T
    basis = []
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            basis.append(e)
    data = make_spectral_data(basis, d_mat, r_mat)
    algebra = algebra_from_matrices(basis, conjugator=r_mat)
    return data, algebra


def dirac_zero_bed():
    # D = 0, R = I, algebra = the full grading commutant (two 2x2 blocks)
    gamma = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
    basis = []
    for blk in (0, 2):
        for i in range(2):
            for j in range(2):
                e = np.zeros((4, 4), dtype=complex)
                e[blk + i, blk + j] = 1.0
                basis.append(e)
    data = make_spectral_data(basis, np.zeros((4, 4)), np.eye(4), grading=gamma)
    algebra = algebra_from_matrices(basis)
    return data, algebra


def random_coords(rng, m, count):
    return [rng.standard_normal(m) + 1j * rng.standard_normal(m)
            for _ in range(count)]


def mats_from_coords(basis, coords):
    b = np.asarray(basis)
    return [np.tensordot(c, b, axes=(0, 0)) for c in coords]


# ---------------------------------------------------------------------------
# validation


def test_validate_trivial_commuting_family():
    basis = [np.diag([1.0 if k == i else 0.0 for k in range(3)]).astype(complex)
             for i in range(3)]
    data = make_spectral_data(basis, np.zeros((3, 3)), np.eye(3))
    report = validate_spectral_data(data)
    assert report.valid
    names = {e.name for e in report.entries}
    assert "twist-dirac-commute" in names and "twist-closure" in names


def test_validate_catches_noncommuting_twist():
    basis = [np.eye(3, dtype=complex)]
    d_mat = np.diag([1.0, 2.0, 3.0])
    noise = np.zeros((3, 3))
    noise[0, 1] = noise[1, 0] = 1e-3
    data = make_spectral_data(basis, d_mat, np.eye(3) + noise)
    report = validate_spectral_data(data)
    entry = report.entry("twist-dirac-commute")
    assert not entry.passed
    assert 1e-4 < entry.defect < 1e-2
    assert not report.valid


def test_validate_catches_commuting_grading():
    basis = [np.eye(4, dtype=complex)]
    d_mat = np.diag([1.0, 2.0, 3.0, 4.0])
    gamma = np.diag([1.0, 1.0, -1.0, -1.0])
    data = make_spectral_data(basis, d_mat, np.eye(4), grading=gamma)
    report = validate_spectral_data(data)
    assert not report.entry("grading-dirac-anticommute").passed


def test_validate_even_bed():
    data, _ = even_bed()
    report = validate_spectral_data(data)
    assert report.valid, [(e.name, e.defect) for e in report.entries if not e.passed]


def test_validate_catches_unclosed_span():
    # the span of {1, E01} is closed under multiplication but not under a
    # generic twist conjugation
    basis = [np.eye(2, dtype=complex),
             np.array([[0, 1], [0, 0]], dtype=complex)]
    r_mat = np.array([[2.0, 1.0], [1.0, 2.0]])
    data = make_spectral_data(basis, np.zeros((2, 2)), r_mat)
    report = validate_spectral_data(data)
    assert not report.entry("twist-closure").passed


# ---------------------------------------------------------------------------
# the twist automorphism group


def test_twist_automorphism_values():
    data = make_spectral_data([np.eye(2, dtype=complex)], np.zeros((2, 2)),
                              np.diag([4.0, 1.0]))
    a = np.array([[0, 1], [0, 0]], dtype=complex)
    assert np.allclose(twist_automorphism(data, a, 0.0), a)
    got = twist_automorphism(data, a, 1.0)
    assert np.allclose(got, np.array([[0, 0.25], [0, 0]]))


def test_twist_automorphism_group_law(rng):
    w = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    r_mat = w @ w.conj().T + 0.5 * np.eye(3)
    data = make_spectral_data([np.eye(3, dtype=complex)], np.zeros((3, 3)), r_mat)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    half = twist_automorphism(data, twist_automorphism(data, a, 0.5), 0.5)
    assert np.abs(half - twist_automorphism(data, a, 1.0)).max() <= 1e-10


def test_twist_automorphism_rejects_semidefinite():
    data = make_spectral_data([np.eye(2, dtype=complex)], np.zeros((2, 2)),
                              np.diag([1.0, 0.0]))
    with pytest.raises(NotPositiveDefinite):
        twist_automorphism(data, np.eye(2), 0.5)


# ---------------------------------------------------------------------------
# character construction


def test_chern_dirac_zero_collapses():
    data, algebra = dirac_zero_bed()
    ch = chern_character(data, 1.0, 2, algebra=algebra)
    assert ch.degrees == (0, 2, 4)
    # degree 0 is the grading-weighted trace of the argument
    for alpha, a in enumerate(data.algebra_basis):
        want = np.trace(data.grading @ a)
        assert ch.component(0).coeffs[alpha] == pytest.approx(want, abs=1e-12)
    for deg in (2, 4):
        assert ch.component(deg).norm() <= 1e-14


def test_chern_untwisted_matches_oracle(rng):
    data, algebra = even_bed(twist="identity")
    beta = 0.9
    ch = chern_character(data, beta, 3, algebra=algebra)
    for deg in (0, 2, 4, 6):
        comp = ch.component(deg)
        for _ in range(3):
            coords = random_coords(rng, len(data.algebra_basis), deg + 1)
            got = evaluate_cochain(comp, coords)
            want = character_oracle(data, beta, deg,
                                    mats_from_coords(data.algebra_basis, coords))
            assert abs(got - want) <= 1e-10 * max(1.0, abs(want))


def test_chern_twisted_matches_oracle(rng):
    data, algebra = even_bed()
    beta = 1.2
    ch = chern_character(data, beta, 2, algebra=algebra)
    for deg in (0, 2, 4):
        comp = ch.component(deg)
        coords = random_coords(rng, len(data.algebra_basis), deg + 1)
        got = evaluate_cochain(comp, coords)
        want = character_oracle(data, beta, deg,
                                mats_from_coords(data.algebra_basis, coords))
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want))


def test_chern_odd_data_matches_oracle(rng):
    data, algebra = odd_bed()
    ch = chern_character(data, 1.0, 2, algebra=algebra)
    assert ch.degrees == (1, 3, 5)
    for deg in (1, 3, 5):
        comp = ch.component(deg)
        coords = random_coords(rng, len(data.algebra_basis), deg + 1)
        got = evaluate_cochain(comp, coords)
        want = character_oracle(data, 1.0, deg,
                                mats_from_coords(data.algebra_basis, coords))
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want))


def test_chern_components_invariant():
    data, algebra = even_bed()
    ch = chern_character(data, 1.0, 2, algebra=algebra)
    assert all(c.invariant for c in ch.components.components)
    # and without a prebuilt algebra the flags agree
    ch2 = chern_character(data, 1.0, 2)
    assert all(c.invariant for c in ch2.components.components)
    for deg in (0, 2, 4):
        assert np.allclose(ch.component(deg).coeffs, ch2.component(deg).coeffs)


def test_character_serialization():
    data, algebra = odd_bed()
    ch = chern_character(data, 1.0, 1, algebra=algebra)
    payload = dump_character(ch)
    assert payload["parity"] == "odd"
    assert payload["beta"] == 1.0
    assert payload["normalization"] == "plain"
    assert len(payload["components"]) == 2
    assert payload["components"][0]["degree"] == 1


# ---------------------------------------------------------------------------
# closedness under the total coboundary


def test_cocycle_closed_even_bed():
    data, algebra = even_bed()
    ch = chern_character(data, 1.0, 3, algebra=algebra)
    res = cocycle_defect(ch)
    scale = 1 + max(ch.components.norms)
    assert res.shape == (3,)          # output degrees 1, 3, 5
    assert np.all(res <= 1e-8 * scale), res


def test_cocycle_closed_odd_bed():
    data, algebra = odd_bed()
    ch = chern_character(data, 1.0, 2, algebra=algebra)
    res = cocycle_defect(ch)
    scale = 1 + max(ch.components.norms)
    assert res.shape == (3,)          # output degrees 0, 2, 4
    assert np.all(res <= 1e-8 * scale), res


def test_cocycle_closed_untwisted_reduction():
    data, algebra = even_bed(twist="identity")
    ch = chern_character(data, 1.0, 3, algebra=algebra)
    res = cocycle_defect(ch)
    assert np.all(res <= 1e-8 * (1 + max(ch.components.norms)))


def test_even_data_odd_sequence_vanishes_both_readings():
    # with a grading, every odd component integrand has odd parity, with or
    # without the grading folded into slot zero; both readings are zero
    data, algebra = even_bed()
    for flag in (False, True):
        ch = chern_character(data, 1.0, 2, sequence="odd",
                             gamma_in_odd=flag, algebra=algebra)
        assert max(ch.components.norms) <= 1e-12


def test_cocycle_defect_needs_algebra():
    data, _ = odd_bed()
    ch = chern_character(data, 1.0, 1)
    with pytest.raises(ValueError):
        cocycle_defect(ch)


# ---------------------------------------------------------------------------
# pairings


def test_pair_even_dirac_zero_integrality():
    data, algebra = dirac_zero_bed()
    ch = chern_character(data, 1.0, 2, algebra=algebra)
    p = np.diag([1.0, 1.0, 0.0, 0.0]).astype(complex)
    res = pair_even(ch, p)
    assert res.value == pytest.approx(2.0, abs=1e-9)
    assert res.tail <= 1e-12
    # the unit projection pairs to half the grading trace, zero here
    res1 = pair_even(ch, np.eye(4, dtype=complex))
    assert abs(res1.value) <= 1e-12


def test_pair_even_rejects():
    data, algebra = dirac_zero_bed()
    ch = chern_character(data, 1.0, 1, algebra=algebra)
    with pytest.raises(NotIdempotent):
        pair_even(ch, 0.5 * np.eye(4, dtype=complex))
    odd_data, odd_alg = odd_bed()
    odd_ch = chern_character(odd_data, 1.0, 1, algebra=odd_alg)
    with pytest.raises(ValueError):
        pair_even(odd_ch, np.eye(2, dtype=complex))
    with pytest.raises(NotUnitary):
        pair_odd(odd_ch, 2.0 * np.eye(2, dtype=complex))
    # projection that fails to commute with a nontrivial twist
    u_mat = odd_data.twist
    w = np.linalg.eigh(u_mat)[1]
    p_bad = np.outer(w[:, 0] + w[:, 1], (w[:, 0] + w[:, 1]).conj()) / 2
    with pytest.raises(NotFixed):
        pair_odd(odd_ch, np.eye(2) - 2 * p_bad)


def test_pair_even_untwisted_matches_classical(rng):
    data, algebra = even_bed(twist="identity")
    beta = 1.0
    ch = chern_character(data, beta, 3, algebra=algebra)
    # rank-one projection inside the upper block of the algebra
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    v = v / np.linalg.norm(v)
    p = np.zeros((4, 4), dtype=complex)
    p[:2, :2] = np.outer(v, v.conj())
    got = pair_even(ch, p).value
    # classical value from the oracle components with the same convention
    shift = p - 0.5 * np.eye(4)
    want = 0.0 + 0.0j
    for n in range(4):
        w = (-1.0) ** n * math.factorial(2 * n) / math.factorial(n)
        want += w * character_oracle(data, beta, 2 * n, [shift] + [p] * (2 * n))
    assert abs(got - want) <= 1e-9 * max(1.0, abs(want))


def test_pair_odd_runs_and_is_stable(rng):
    data, algebra = odd_bed()
    ch = chern_character(data, 1.0, 2, algebra=algebra)
    # unitary sharing the twist eigenbasis, hence twist-fixed
    lam, u = np.linalg.eigh(data.twist)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 2))
    un = u @ np.diag(phases) @ u.conj().T
    res = pair_odd(ch, un)
    assert np.isfinite(res.value.real) and np.isfinite(res.value.imag)
    assert res.tail < abs(res.terms[0]) + 1.0
