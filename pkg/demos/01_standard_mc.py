"""Standard Monte Carlo on the quadratic benchmark.

Estimates E[X^2] for X ~ N(0,1) (analytic value 1, variance 2), shows the
CLT confidence interval, and demonstrates the n^{-1/2} error decay by
measuring the RMSE against the analytic mean over a grid of sample sizes.
"""

import math

import numpy as np

from uqmc import RngStream, builtin_problem, mc_estimate

problem = builtin_problem("quadratic")
truth = problem.truth["mean"]

print("single run, n = 10^5")
report = mc_estimate(problem.model, problem.input, 100_000, RngStream(seed=1))
lo, hi = report.ci_95
print(f"  estimate = {report.estimate:.5f}  (truth {truth})")
print(f"  95% CI   = [{lo:.5f}, {hi:.5f}]")
print(f"  cost     = {report.total_cost:.0f} work units")
print(f"  unbiased variance estimate = {report.diagnostics['zeta_sq']:.4f} (truth 2)")

print("\nRMSE decay over n (100 replications each):")
sizes = [100, 1_000, 10_000, 100_000]
rmse = []
for n in sizes:
    errs = [
        mc_estimate(problem.model, problem.input, n, RngStream(seed=1000 * n + r)).estimate - truth
        for r in range(100)
    ]
    rmse.append(math.sqrt(np.mean(np.square(errs))))
    print(f"  n = {n:>6d}   RMSE = {rmse[-1]:.5f}")

slope = np.polyfit(np.log10(sizes), np.log10(rmse), 1)[0]
print(f"\nlog-log slope = {slope:.3f}  (theory: -1/2)")
