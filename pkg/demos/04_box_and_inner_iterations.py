"""
Why the box matters, and how many inner steps to take
=====================================================

Six radial lines is a hard problem. Without the [0, 1] box the iteration
drifts to another local minimizer and the error grows again; with it the
error keeps falling. The second half compares one inner ADMM step per outer
iteration against five.
"""

import numpy as np

from gradratio.grid import shepp_logan
from gradratio.operators import FourierSampling, make_radial_mask
from gradratio.solvers import Problem, mri_params, solve_l1_over_l2

n = 128
u = shepp_logan(n)
op = FourierSampling(make_radial_mask(n, n, 6))
problem = Problem(op, op.apply(u))

for box in ((0.0, 1.0), None):
    res = solve_l1_over_l2(problem, mri_params(box=box, k_max=300, eps_rel=1e-12), ground_truth=u)
    re = np.array(res.diagnostics.re_trace)
    print(f"box={box}: min RE {re.min():.3f} at k={re.argmin()}, final RE {re[-1]:.3f}")

for j_max in (1, 5):
    res = solve_l1_over_l2(problem, mri_params(j_max=j_max, k_max=300, eps_rel=1e-12),
                           ground_truth=u)
    print(f"jMax={j_max}: final RE {res.diagnostics.re_trace[-1]:.3f}")
