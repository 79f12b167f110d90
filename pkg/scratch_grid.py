import sys, time
import numpy as np
sys.path.insert(0, "src")
from ncgtwist import suq2 as s

for q in (0.3, 0.5, 0.7, 0.9):
    for deg in (4, 6, 8):
        t0 = time.time()
        try:
            g = s.gns_build(q, deg)
            dt = time.time() - t0
            print("q=%.1f deg=%d  dim=%d chain=%.3e gate=%.1e  (%.1fs)"
                  % (q, deg, g.dim, g.chain_defect, g.chain_gate, dt))
        except s.GramSingular as e:
            print("q=%.1f deg=%d  GramSingular: %s" % (q, deg, e))
        except s.BlockIdentificationFailed as e:
            print("q=%.1f deg=%d  BlockIdentificationFailed: %s" % (q, deg, e))

# representation smoke at the acceptance point
g = s.gns_build(0.5, 6)
rep = s.represent(g)
one = rep(s.qa_unit(0.5))
print("pi(1) - I:", np.max(np.abs(one - np.eye(g.dim))))
a = s.generator(0.5, "alpha")
b = s.generator(0.5, "beta")
bs = s.generator(0.5, "beta_star")
ast = s.generator(0.5, "alpha_star")
# relations on the degree-safe subspace
rels = {
    "ab-qba": s.qa_add(s.normal_order(a, b), s.normal_order(b, a), -0.5),
    "ab*-qb*a": s.qa_add(s.normal_order(a, bs), s.normal_order(bs, a), -0.5),
    "bb*-b*b": s.qa_add(s.normal_order(b, bs), s.normal_order(bs, b), -1.0),
    "a*a+b*b-1": s.qa_add(s.qa_add(s.normal_order(ast, a), s.normal_order(bs, b)),
                          s.qa_unit(0.5), -1.0),
    "aa*+q2bb*-1": s.qa_add(s.qa_add(s.normal_order(a, ast),
                                     s.qa_scale(0.25, s.normal_order(b, bs))),
                            s.qa_unit(0.5), -1.0),
}
for name, el in rels.items():
    print("relation %-12s max |coeff| = %.3e" % (name, max((abs(c) for c in el.terms.values()), default=0.0)))

# GNS state equals h on a sample
x = s.qa_add(b, s.qa_scale(0.3, s.normal_order(bs, b)))
xs = s.qa_adjoint(x)
lhs = rep(s.normal_order(xs, x))[0, 0]
rhs = s.element_pair(x, x)
print("GNS state vs h:", abs(lhs - rhs))
print("h(b*b) = %.12f (want 0.8)" % s.haar(s.normal_order(bs, b)).real)
