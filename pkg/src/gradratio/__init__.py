"""Recovery of piecewise-constant signals and images by minimizing the L1/L2
ratio of the gradient under exact linear measurements and a box constraint."""

__version__ = "0.1.0"

from .grid import make_one_bar, make_two_bar, psnr, relative_error, shepp_logan  # noqa: F401
from .solvers import (  # noqa: F401
    Problem,
    SolverParams,
    sart_solve,
    solve_l1_minus_l2,
    solve_l1_over_l2,
    solve_lp,
    solve_tv,
    zero_fill,
)
