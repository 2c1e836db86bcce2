"""Analysis toolbox in action: exponential time mollification, the
parabolic interpolation inequality, and fast geometric convergence.
"""

import numpy as np

from pqlab import (
    Cylinder,
    Domain,
    GeometricIteration,
    constant_field,
    field_from_function,
    geometric_iterate,
    interpolation_ratio,
    lp_norm,
    mollifier_derivative_residual,
    mollify_time,
    SpaceTimeField,
)

dom = Domain(n=1, box=((0.0, 1.0),), T=1.0, nx=17, nt=256)
h = 0.5

print("== time mollification ==")
m = mollify_time(constant_field(dom, 1.0), h)
exact = 1.0 - np.exp(-(dom.T - dom.times) / h)
print(f"constant field, h={h}: max deviation from the closed form "
      f"{np.abs(m.values - exact[:, None]).max():.2e}")
print(f"value at t=0: {m.values[0, 0]:.10f}  (1 - e^-2 = {1 - np.exp(-2):.10f})")

rng = np.random.default_rng(1)
noise = SpaceTimeField(dom, rng.uniform(-1, 1, dom.shape))
for r in (1.0, 2.0):
    print(f"L^{r:g} contraction on noise: ratio "
          f"{lp_norm(mollify_time(noise, h), r) / lp_norm(noise, r):.4f} "
          f"(cap {1 + 5 * dom.dt / h:.4f})")

print("derivative identity residual under time refinement:")
for nt in (64, 128, 256):
    dom_j = Domain(n=1, box=((0.0, 1.0),), T=1.0, nx=17, nt=nt)
    v = field_from_function(dom_j, lambda x, t: np.sin(np.pi * x) * np.cos(2 * t))
    print(f"  nt={nt:4d}: {mollifier_derivative_residual(v, h):.3e}")

print("\n== interpolation inequality ==")
dom_i = Domain(n=1, box=((0.0, 1.0),), T=1.0, nx=129, nt=64)
v = field_from_function(dom_i, lambda x, t: np.sin(np.pi * x))
for s in (0.3, 0.6, 0.9):
    cyl = Cylinder((0.5, 1.0), 0.5 + 1e-9, s)
    print(f"  sine profile, depth {s}: empirical constant "
          f"{interpolation_ratio(v, cyl, 1.9):.6f}")

print("\n== fast geometric convergence ==")
g = GeometricIteration(C=1.0, lam=2.0, kappa=1.0, X0=0.5)
res = geometric_iterate(g, 50)
print(f"at the threshold (X0 = {g.threshold}): first values "
      f"{[float(x) for x in res.values[:5]]} ... converged={res.converged}")
res_hi = geometric_iterate(GeometricIteration(C=1.0, lam=2.0, kappa=1.0, X0=1.0), 50)
print(f"above the threshold: first values {[float(x) for x in res_hi.values[:5]]} "
      f"... diverged={res_hi.diverged}")
