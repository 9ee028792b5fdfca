"""
Both coefficients random: sparse-grid combination versus one direct rule.

With p = q = 1/2 the sparse grid at level L uses M = (L - 1) 2^L solves and
its terms telescope; the direct rule uses one interlaced rule of order 3
in s1 + s2 dimensions.  Small sizes (J = 8, s1 = s2 = 8) keep this quick.
"""
import math

from elasticqmc.estimators import (EstimatorConfig, RuleFamily, direct_estimate,
                                   direct_rule_weights, rule_weights, sparse_estimate)
from elasticqmc.experiments import build_problem, example_weights

J, s = 8, 8
problem = build_problem(4, J, degree=2, s1=s, s2=s)
F = problem.mean_functional
ws = example_weights(4, s, s, 0.5, 0.5)

weights, order = direct_rule_weights(ws, s, s)
direct = RuleFamily(2 * s, ws.gamma, weights)
ref = direct_estimate(EstimatorConfig(s, s, J, 2, mode="direct", m=14),
                      direct.points(14), F, order).value
print(f"reference (direct rule, 2^14 points): {ref!r}")

print("direct rule")
for m in range(6, 12):
    est = direct_estimate(EstimatorConfig(s, s, J, 2, mode="direct", m=m), direct.points(m), F, order)
    print(f"  N = {2 ** m:5d}  error {abs(est.value - ref):.3e}")

print("sparse grid")
fy = RuleFamily(s, ws.alpha, rule_weights(ws.b_tilde, ws.alpha))
fz = RuleFamily(s, ws.beta, rule_weights(ws.b_hat, ws.beta))
grids: dict = {}
for L in range(3, 10):
    est = sparse_estimate(EstimatorConfig(s, s, J, 2, mode="sparse", L=L), F, fy, fz, cache=grids)
    bound = math.log(est.n_points) / est.n_points
    print(f"  L = {L}  M = {est.n_points:5d}  error {abs(est.value - ref):.3e}  "
          f"(log M)/M {bound:.3e}  new solves {est.n_solves}")
