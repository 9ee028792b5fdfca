"""
Deterministic convergence check on the unit square.

The coefficients mu = x1 + x2 + 1 and lambda = sin(2 pi x1) + 2 are fixed and
the forcing is chosen so that

    u = (2 (cos 2 pi x1 - 1) sin 2 pi x2, (1 - cos 2 pi x2) sin 2 pi x1)

solves the problem exactly.  Piecewise linear elements on uniform meshes
should show second order in the centroid L2 error and in the mean of
u1 + u2 (whose exact value is zero).
"""
from elasticqmc.experiments import build_problem
from elasticqmc.fem import (empirical_rate, example1_exact_and_forcing, functional_mean,
                            l2_error_centroid)

u_exact, _ = example1_exact_and_forcing()

Js = [8, 16, 32, 64, 128]
l2, fun = [], []
for J in Js:
    # build_problem(1, ...) interpolates mu and lambda nodally, as in the reference tables
    u_h = build_problem(1, J, degree=1).solve()
    l2.append(l2_error_centroid(u_h, u_exact))
    fun.append(abs(functional_mean(u_h)))

rl2 = [None] + empirical_rate(l2)
rfun = [None] + empirical_rate(fun)
print(f"{'J':>4} {'L2 error':>12} {'CR':>7} {'|mean|':>12} {'CR':>7}")
for J, a, ra, b, rb in zip(Js, l2, rl2, fun, rfun):
    fa = f"{ra:7.4f}" if ra else " " * 7
    fb = f"{rb:7.4f}" if rb else " " * 7
    print(f"{J:4d} {a:12.4e} {fa} {b:12.4e} {fb}")
