import sys, time
import numpy as np
sys.path.insert(0, "src")
from ncgtwist import suq2 as s

q = 0.5
g = s.gns_build(q, 6)

R = s.build_R(g)
Rp = s.build_Rprime(g)
R1 = s.build_R1(g)
print("R1 - R Rp:", np.max(np.abs(R1 - R @ Rp)))
print("[R, Rp]:", np.max(np.abs(R @ Rp - Rp @ R)))

b = s.generator(q, "beta")
a = s.generator(q, "alpha")
mb = s.represent(g, b)
ma = s.represent(g, a)
R1i = np.diag(1.0 / np.diag(R1))
sig_b = R1 @ mb @ R1i
sig_a = R1 @ ma @ R1i
print("sigma(beta) - beta:", np.max(np.abs(sig_b - mb)))
print("sigma(alpha) - q^-2 alpha:", np.max(np.abs(sig_a - ma / q**2)))
print("fixed proj defect beta:", s.fixed_projection_defect(g, mb))
print("fixed proj defect alpha:", s.fixed_projection_defect(g, ma))

lam = lambda twol: float(np.exp(-10.0 * (twol + 1)))
D = s.build_dirac(g, lambda twol, k: 1.0 + 0.5 * twol)
print("[D, R]:", np.max(np.abs(D @ R - R @ D)))
print("equivariance defect:", s.equivariance_defect(g, D))
Dbad = D.copy(); Dbad[0, -1] += 0.2; Dbad[-1, 0] += 0.2
print("perturbed equivariance defect:", s.equivariance_defect(g, Dbad))

# criterion-9 style recovery
t0 = time.time()
probes = {
    "one": s.qa_unit(q),
    "b*b": s.normal_order(s.generator(q, "beta_star"), b),
    "(b*b)^2": None,
    "alpha": a,
    "alpha beta": s.normal_order(a, b),
}
w = s.normal_order(s.generator(q, "beta_star"), b)
probes["(b*b)^2"] = s.normal_order(w, w)
for name, el in probes.items():
    val, tail = s.haar_recovery(g, el, lam)
    print("recover %-10s %.12f  (tail %.2e)  oracle %.12f" % (
        name, val.real, tail, s.haar(el).real))
print("recovery wall time: %.1fs" % (time.time() - t0))

# u_element at the model epsilon
rep = s.u_element(g, epsilon_u=0.05)
print("u defect:", rep.defect, "gap:", rep.gap, "rank:", rep.rank)
EOF = None
