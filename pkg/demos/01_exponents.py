"""Exponent arithmetic walkthrough.

Starts from raw structure parameters, checks the growth-gap condition,
derives every exponent the estimate machinery uses, and shows the ordering
chain plus the behaviour as the integrability exponents blow up.
"""

from pqlab import StructureParams, check_gap, derive

params = StructureParams(n=2, p=2.0, q=2.1, alpha=20.0, beta=20.0)
gap = check_gap(params)
print(f"parameters: n={params.n} p={params.p} q={params.q} "
      f"alpha={params.alpha} beta={params.beta}")
print(f"gap condition: q < {gap.rhs:.6f}  ->  {'OK' if gap.ok else 'FAIL'} "
      f"(margin {gap.margin:.6f})")
print(f"implied coefficient restriction: {gap.coefficient_product:.6f} > "
      f"{gap.coefficient_floor:.6f} -> {gap.implied_restriction_ok}")

d = derive(params)
print("\nderived exponents")
for name in ("p_alpha", "q_beta", "beta_conj", "gamma", "m", "kappa",
             "theta1", "theta2", "theta3"):
    print(f"  {name:10s} = {getattr(d, name):.12f}")

print("\nordering chain (each >= the next):")
chain = [
    ("gamma", d.gamma),
    ("gamma/beta'", d.gamma / d.beta_conj),
    ("p_a/(p_a+1-q)", d.p_alpha / (d.p_alpha + 1 - d.q)),
    ("p/(p+1-q)", d.p / (d.p + 1 - d.q)),
    ("q", d.q),
    ("2", 2.0),
]
print("  " + "  >=  ".join(f"{name}={val:.4f}" for name, val in chain))
print(f"  gamma < m: {d.gamma:.4f} < {d.m:.4f}")
print(f"  kappa = {d.kappa:.6f} > (q-p)/(p+1-q) = {(d.q-d.p)/(d.p+1-d.q):.6f}")
print(f"  identity theta3*(m-gamma)*(1+kappa) - kappa = "
      f"{d.theta3*(d.m-d.gamma)*(1+d.kappa) - d.kappa:.2e}")

print("\nlimit of the degenerate coefficients (alpha = beta -> infinity):")
for k in (1, 2, 4, 8):
    a = 10.0**k
    dk = derive(StructureParams(n=2, p=2.0, q=2.1, alpha=a, beta=a))
    print(f"  alpha=beta=1e{k}: p_alpha={dk.p_alpha:.8f} (->2), "
          f"q_beta={dk.q_beta:.8f} (->2.1)")
d_inf = derive(StructureParams(n=2, p=2.0, q=2.1))
print(f"  infinite:        p_alpha={d_inf.p_alpha:.8f}, q_beta={d_inf.q_beta:.8f}")
