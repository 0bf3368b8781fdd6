"""
Limited-angle tomography
========================

31 parallel-beam projections spread over 60 degrees. The Radon operator is an
explicit sparse matrix, so the u-subproblem falls back to conjugate gradients.
SART is the unregularized baseline.
"""

import time

from gradratio.grid import relative_error, shepp_logan
from gradratio.operators import limited_angles, radon_operator
from gradratio.solvers import Problem, ct_params, sart_solve, solve_l1_over_l2, solve_tv

n = 128
u = shepp_logan(n)
op = radon_operator(n, n, limited_angles(60.0, 31), 182)
problem = Problem(op, op.apply(u))
print(f"system matrix {op.matrix.shape}, {op.matrix.nnz} nonzeros")

t0 = time.perf_counter()
sart = sart_solve(problem, iterations=100).u
print(f"sart   RE {relative_error(sart, u):.3f}  ({time.perf_counter() - t0:.0f}s)")

params = ct_params(k_max=300)
for name, solver in (("tv", solve_tv), ("l1/l2", solve_l1_over_l2)):
    t0 = time.perf_counter()
    res = solver(problem, params, ground_truth=u)
    re = res.diagnostics.re_trace
    print(f"{name:6s} RE {re[-1]:.3f} after {len(re)} iterations  "
          f"({time.perf_counter() - t0:.0f}s)")
