"""The optimal (h, epsilon) coupling and the convergence-rate bound.

The error bound

    C sqrt(k) ( exp(C / (h^d eps^2)) / (sqrt(n h^d) eps) + h + eps^(r/2) )

balances a sampling term with an exponential cliff against two bias terms.
The printed coupling eps = h^(2/r) sqrt(C), h = (log(n)/4)^(-r/(d r + 4))
collapses it to the headline (log n)^(-r/(d r + 4)) decay.  The constant C
is unknown in general; it is a user knob (default 1) and is echoed in every
report.
"""

import numpy as np

from cmvsim import optimize_rate, rate_bound, schedule

print("schedule for d=1, r=0.5, C=1:")
print(f"{'n':>10s}  {'h':>8s}  {'epsilon':>8s}  {'bound':>10s}  {'(log n)^-1/9':>12s}")
for n in (10**3, 10**4, 10**6, 10**9):
    pt = schedule(n, d=1, r=0.5, C=1.0)
    val = rate_bound(pt.h, pt.epsilon, n, 1, 1, 0.5, 1.0)
    print(f"{n:>10d}  {pt.h:>8.4f}  {pt.epsilon:>8.4f}  {val:>10.4f}  {pt.log_rate:>12.4f}")

print("\nfine grids beat the analytic coupling a little (C=0.1, n=1e6):")
h_grid = np.geomspace(1e-2, 1.0, 60)
eps_grid = np.geomspace(1e-4, 1.0, 60)
h_star, eps_star, best, interior = optimize_rate(10**6, 1, 1, 0.5, 0.1, h_grid, eps_grid)
pt = schedule(10**6, d=1, r=0.5, C=0.1)
print(f"  schedule point: h={pt.h:.4f} eps={pt.epsilon:.4f} "
      f"bound={rate_bound(pt.h, pt.epsilon, 10**6, 1, 1, 0.5, 0.1):.4f}")
where = "interior" if interior else "on the grid boundary"
print(f"  grid optimum:   h={h_star:.4f} eps={eps_star:.4f} bound={best:.4f} ({where})")

print("\nthe exponential cliff: shrink epsilon too far and the bound explodes")
for eps in (0.3, 0.1, 0.03, 0.01):
    val = rate_bound(0.5, eps, 10**6, 1, 1, 0.5, 1.0)
    print(f"  eps={eps:<5g} bound={val:.3g}")
