"""Long-only mean-variance solves with a verifiable optimality certificate.

Solves a few simplex-constrained problems, prints the KKT certificate the
solver guarantees, and cross-checks one solution against a brute-force grid.
"""

import numpy as np

from blview import CovarianceMatrix, MVOProblem, equal_weight, kkt_report, solve_mvo
import datetime as dt

AS_OF = dt.date(2024, 6, 3)

# Two assets, identical risk: symmetry forces an even split
problem = MVOProblem(np.array([0.1, 0.1]), CovarianceMatrix(np.eye(2)), lam=0.1)
print("symmetric split:", solve_mvo(problem, AS_OF).w)

# Tilted expected returns shift the interior optimum slightly
problem = MVOProblem(np.array([0.2, 0.0]), CovarianceMatrix(np.eye(2)), lam=0.1)
print("tilted solution:", solve_mvo(problem, AS_OF).w, "(closed form: 0.505, 0.495)")

# A random 5-asset instance with the certificate printed
rng = np.random.default_rng(9)
A = rng.normal(0, 0.015, (5, 12))
problem = MVOProblem(rng.normal(5e-4, 2e-3, 5), CovarianceMatrix(A @ A.T / 12), lam=0.1)
weights = solve_mvo(problem, AS_OF)
report = kkt_report(problem, weights.w)
print("weights:", np.round(weights.w, 4), "sum", weights.w.sum())
print(
    f"KKT certificate: stationarity spread {report.stationarity:.2e}, "
    f"dual violation {report.dual_violation:.2e}, sum gap {report.sum_gap:.2e}"
)

# Brute-force comparison on a 3-asset instance
A = rng.normal(0, 0.02, (3, 6))
problem = MVOProblem(rng.normal(0, 0.01, 3), CovarianceMatrix(A @ A.T / 6), lam=0.1)
weights = solve_mvo(problem, AS_OF)

steps = 200  # 0.005 resolution
i, j = np.meshgrid(np.arange(steps + 1), np.arange(steps + 1), indexing="ij")
mask = i + j <= steps
grid = np.column_stack([i[mask] / steps, j[mask] / steps, 1 - (i[mask] + j[mask]) / steps])
grid_vals = np.einsum("ij,jk,ik->i", grid, problem.sigma.sigma, grid) - 0.1 * grid @ problem.mu
mine = weights.w @ problem.sigma.sigma @ weights.w - 0.1 * problem.mu @ weights.w
print(f"solver objective {mine:.8f} vs best of {mask.sum()} grid points {grid_vals.min():.8f}")

# The 1/n baseline for reference
print("equal weights:", equal_weight(3, AS_OF).w)
