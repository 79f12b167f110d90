"""Independent exact-rational check of _haar_pairing_any.

Oracle route: replicate the module's merge recursions with Fractions
(no cancellation possible in exact arithmetic), take the rational
adjoint phase, the rational product, and the rational moment formula.
The merge recursions themselves are exercised by the relation
identities, so this route is independent of the spectral-series form.
"""
from fractions import Fraction as Fr
import sys

sys.path.insert(0, "src")
from ncgtwist import suq2 as s

MPN = {}
MNP = {}


def shift(tab):
    return {(k, m + 1, p + 1): c for (k, m, p), c in tab.items()}


def merge_pn(q, j, l):
    if j == 0 or l == 0:
        return {(j - l, 0, 0): Fr(1)}
    key = (q, j, l)
    if key not in MPN:
        base = merge_pn(q, j - 1, l - 1)
        out = dict(base)
        for kk, c in shift(base).items():
            out[kk] = out.get(kk, Fr(0)) - (q ** (2 * l)) * c
        MPN[key] = out
    return MPN[key]


def merge_np(q, j, l):
    if j == 0 or l == 0:
        return {(l - j, 0, 0): Fr(1)}
    key = (q, j, l)
    if key not in MNP:
        base = merge_np(q, j - 1, l - 1)
        out = dict(base)
        for kk, c in shift(base).items():
            out[kk] = out.get(kk, Fr(0)) - (q ** (-2 * (l - 1))) * c
        MNP[key] = out
    return MNP[key]


def mono_product(q, key1, key2):
    k1, m1, p1 = key1
    k2, m2, p2 = key2
    phase = q ** (-(m1 + p1) * k2)
    if (k1 >= 0 and k2 >= 0) or (k1 <= 0 and k2 <= 0):
        merged = {(k1 + k2, 0, 0): Fr(1)}
    elif k1 > 0:
        merged = merge_pn(q, k1, -k2)
    else:
        merged = merge_np(q, -k1, k2)
    out = {}
    mm, pp = m1 + m2, p1 + p2
    for (k, j, _), c in merged.items():
        kk = (k, mm + j, pp + j)
        out[kk] = out.get(kk, Fr(0)) + phase * c
    return out


def haar_exact(q, terms):
    q2 = q * q
    tot = Fr(0)
    for (k, m, p), c in terms.items():
        if k == 0 and m == p:
            tot += c * (1 - q2) / (1 - q2 ** (m + 1))
    return tot


def pair_exact(q, key_left, key_right):
    k, m, p = key_left
    akey = (-k, p, m)
    aw = q ** ((m + p) * k)
    prod = mono_product(q, akey, key_right)
    return aw * haar_exact(q, prod)


def battery(qfr):
    qf = float(qfr)
    worst = 0.0
    worst_case = None
    ncase = 0
    for k in range(-6, 7):
        for ml in range(0, 3):
            for pl in range(0, 3):
                for mr in range(0, 3):
                    pr = mr - (ml - pl)
                    if pr < 0 or pr > 2:
                        continue
                    kl = (k, ml, pl)
                    kr = (k, mr, pr)
                    ex = float(pair_exact(qfr, kl, kr))
                    got = s._haar_pairing_any(qf, kl, kr)
                    scale = max(abs(ex), 1e-30)
                    rel = abs(got - ex) / scale
                    ncase += 1
                    if rel > worst:
                        worst, worst_case = rel, (kl, kr, ex, got)
    return ncase, worst, worst_case


for qfr in (Fr(1, 2), Fr(3, 5), Fr(9, 10), Fr(3, 10)):
    n, w, case = battery(qfr)
    print("q = %s: %d sector-matched cases, worst rel err %.3e" % (qfr, n, w))
    if w > 1e-12:
        print("   FAIL at", case)

# mismatch sector must give exactly zero
z = s._haar_pairing_any(0.5, (2, 1, 0), (2, 0, 0))
print("cross-sector value:", z)

# the two deep values that drove the bug hunt, against the exact route
for key in ((6, 0, 0), (-6, 0, 0)):
    ex = float(pair_exact(Fr(1, 2), key, key))
    got = s._haar_pairing_any(0.5, key, key)
    print("pair%s exact %.12e  series %.12e" % (key, ex, got))
