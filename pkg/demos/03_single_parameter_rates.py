"""
QMC convergence when only mu is random.

mu(x, y) = 0.1 (1 + sum_j y_j j^-2 sin(j pi x1) sin((2j - 1) pi x2)) with
lambda = 1.  The quantity of interest is the expected mean of u1 + u2 over
the square.  A coarse setting (J = 8, s = 16) keeps the run under a minute;
the `run --preset 2` command does the same at J = 32, s = 64.
"""
import numpy as np

from elasticqmc.estimators import EstimatorConfig, RuleFamily, rule_weights, tensor_estimate
from elasticqmc.experiments import build_problem, example_weights
from elasticqmc.fem import empirical_rate

J, s = 8, 16
problem = build_problem(2, J, degree=2, s1=s)
ws = example_weights(2, s, 0, 0.5, 0.5)
rules = RuleFamily(s, ws.alpha, rule_weights(ws.b_tilde, ws.alpha))
empty = RuleFamily(0, ws.beta, None)


def estimate(m):
    cfg = EstimatorConfig(s, 0, J, 2, mode="tensor", m1=m, m2=0)
    return tensor_estimate(cfg, rules.points(m), empty.points(0), problem.mean_functional).value


ref = estimate(11)
levels = range(3, 9)
errs = [abs(estimate(m) - ref) for m in levels]
rates = [None] + empirical_rate(errs)
for m, e, r in zip(levels, errs, rates):
    print(f"N1 = {2 ** m:4d}  error {e:.4e}  " + (f"CR {r:.3f}" if r else ""))
slope = -np.polyfit(list(levels), np.log2(errs), 1)[0]
print(f"least-squares rate: {slope:.2f}")
