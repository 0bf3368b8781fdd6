"""ADMM solvers for gradient-regularized recovery under ``A u = b`` and a box.

The main entry point is :func:`solve_l1_over_l2`, a double-loop ADMM for

    min ||D u||_1 / ||D u||_2   s.t.  A u = b,  p <= u <= q.

The outer loop splits ``h = D u`` and alternates an inexact ``u`` update, the
closed-form ``h`` update and a dual step. The ``u`` update itself runs a few
iterations of an inner ADMM that splits ``d = D u`` and ``v = u`` and treats
``A u = b`` with a scaled multiplier. :func:`solve_tv`, :func:`solve_lp` and
:func:`solve_l1_minus_l2` share that inner iteration as a single-loop solver
and differ only in the proximal map applied to ``d``.

All dual variables are scaled duals.
"""

import logging
import time
from dataclasses import dataclass, field, asdict, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .grid import relative_error
from .operators import (
    FourierSampling,
    MatrixOperator,
    gradient_adjoint,
    gradient_apply,
    gradient_gram_spectrum,
)
from .prox import box_project, h_update, half_threshold, prox_l1_minus_al2, soft_shrink

log = logging.getLogger(__name__)

__all__ = [
    "SolverParams",
    "Problem",
    "Diagnostics",
    "SolveResult",
    "NormalSolver",
    "solve_u_linear",
    "InnerState",
    "inner_admm",
    "lagrangian_value",
    "solve_l1_over_l2",
    "solve_tv",
    "solve_lp",
    "solve_l1_minus_l2",
    "solve_gradient_prox",
    "zero_fill",
    "sart_solve",
    "mri_params",
    "ct_params",
]


@dataclass(frozen=True)
class SolverParams:
    """Algorithm parameters.

    ``gamma=None`` means ``gamma = rho``; ``h_norm_floor=None`` means
    ``1e-12 * sqrt(N)``. ``box=None`` drops the box constraint.
    """

    rho: float = 1.0
    gamma: float = None
    beta: float = 1.0
    lam: float = 1000.0
    box: tuple = (0.0, 1.0)
    k_max: int = 300
    j_max: int = 5
    eps_rel: float = 1e-5
    h_norm_floor: float = None
    cg_tol: float = 1e-10
    cg_max_iter: int = 500
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("rho", "beta", "lam", "eps_rel", "cg_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.box is not None and self.box[0] > self.box[1]:
            raise ValueError(f"empty box {self.box}")
        if self.k_max < 1 or self.j_max < 1 or self.cg_max_iter < 1:
            raise ValueError("iteration limits must be at least 1")

    @property
    def gamma_(self):
        return self.rho if self.gamma is None else self.gamma

    @property
    def bounds(self):
        return (-np.inf, np.inf) if self.box is None else tuple(self.box)

    def floor_for(self, size):
        return 1e-12 * np.sqrt(size) if self.h_norm_floor is None else self.h_norm_floor

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        d = asdict(self)
        d["box"] = None if self.box is None else list(self.box)
        return d


def mri_params(**kw):
    """Defaults for Fourier-sampled problems (MRI, super-resolution)."""
    base = dict(rho=1.0, beta=1.0, lam=1000.0, j_max=5, k_max=500)
    base.update(kw)
    return SolverParams(**base)


def ct_params(**kw):
    """Defaults for tomography with an explicit system matrix."""
    base = dict(rho=0.0625, beta=0.25, lam=0.05, j_max=1, k_max=1500, cg_tol=1e-4, cg_max_iter=100)
    base.update(kw)
    return SolverParams(**base)


@dataclass
class Problem:
    """Measurement operator and data; `shape` is the image shape."""

    op: object
    b: np.ndarray

    @property
    def shape(self):
        return self.op.shape


@dataclass
class Diagnostics:
    lagrangian_trace: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)
    re_trace: list = field(default_factory=list)
    feasibility_trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)
    rel_step_trace: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    inner_iterations: int = 0
    h_branch_count: int = 0
    cg_failures: int = 0
    diverged: bool = False

    @property
    def outer_iterations(self):
        return len(self.step_trace)

    def to_dict(self):
        return asdict(self)


@dataclass
class SolveResult:
    u: np.ndarray
    diagnostics: Diagnostics


# -- linear systems ----------------------------------------------------------


class NormalSolver:
    """Solves ``(lam A^T A + c D^T D + beta I) u = rhs``.

    If the operator exposes a Fourier-diagonal Gram spectrum the system is
    inverted exactly with FFTs; otherwise conjugate gradients are used,
    warm-started from the previous solution.
    """

    def __init__(self, op, lam, c, beta, cg_tol=1e-10, cg_max_iter=500, use_fft=None):
        self.op, self.lam, self.c, self.beta = op, lam, c, beta
        self.cg_tol, self.cg_max_iter = cg_tol, cg_max_iter
        self.shape = op.shape
        if use_fft is None:
            use_fft = op.gram_spectrum is not None
        if use_fft and op.gram_spectrum is None:
            raise ValueError("operator has no Fourier-diagonal Gram spectrum")
        self.use_fft = use_fft
        self.failures = 0
        self._x0 = None
        if use_fft:
            spec_d = gradient_gram_spectrum(*self.shape)
            self.denom = lam * op.gram_spectrum + c * spec_d + beta

    def matvec(self, u):
        u = u.reshape(self.shape)
        out = self.lam * self.op.normal(u) + self.c * gradient_adjoint(gradient_apply(u)) + self.beta * u
        return out.reshape(-1)

    def solve(self, rhs):
        if self.use_fft:
            return np.real(np.fft.ifftn(np.fft.fftn(rhs) / self.denom))
        N = rhs.size
        A = LinearOperator((N, N), matvec=self.matvec, dtype=float)
        x0 = None if self._x0 is None else self._x0
        x, info = cg(A, rhs.reshape(-1), x0=x0, rtol=self.cg_tol, atol=0.0, maxiter=self.cg_max_iter)
        if info != 0:
            self.failures += 1
        self._x0 = x
        return x.reshape(self.shape)


def solve_u_linear(rhs, op, params, use_fft=None, rho_term=True):
    """One-shot solve of the u-system for the given parameters.

    With ``rho_term=False`` the ``rho D^T D`` contribution is dropped (the
    single-loop solvers have no ``h`` split).
    """
    c = params.gamma_ + (params.rho if rho_term else 0.0)
    solver = NormalSolver(op, params.lam, c, params.beta, params.cg_tol,
                          params.cg_max_iter, use_fft=use_fft)
    return solver.solve(np.asarray(rhs, dtype=float))


def _rel_change(u, u_prev):
    nu = np.linalg.norm(u)
    diff = np.linalg.norm(u - u_prev)
    return diff / nu if nu > 0 else diff


def _rel_residual(Au, b):
    nb = np.linalg.norm(b)
    res = np.linalg.norm(Au - b)
    return res / nb if nb > 0 else res


# -- inner ADMM ----------------------------------------------------------------


@dataclass
class InnerState:
    """Split variables and scaled duals of the inner ADMM; persists across outer steps."""

    u: np.ndarray
    d: np.ndarray
    v: np.ndarray
    w: np.ndarray
    y: np.ndarray
    z: np.ndarray

    @classmethod
    def zeros(cls, problem):
        shape = problem.shape
        u = np.zeros(shape)
        g = gradient_apply(u)
        z = np.zeros_like(problem.b)
        return cls(u=u, d=g.copy(), v=u.copy(), w=u.copy(), y=g.copy(), z=z)


def inner_admm(state, problem, params, solver, prox, mu, h=None, g=None, j_max=None,
               eps_rel=None, on_step=None):
    """Run the inner ADMM in place on `state`.

    Parameters
    ----------
    state : InnerState
        Updated in place; ``state.u`` holds the result.
    solver : NormalSolver
        Must be built with ``c = gamma + rho`` when `h` is given and
        ``c = gamma`` otherwise.
    prox : callable ``prox(x, mu)``
        Proximal map for the ``d`` update.
    mu : float
        Threshold passed to `prox`.
    h, g : ndarray, optional
        Outer split variable and its dual. Omitted for single-loop solvers.

    Returns
    -------
    int
        Number of inner iterations performed.
    """
    op, b = problem.op, problem.b
    gamma, beta, lam = params.gamma_, params.beta, params.lam
    p, q = params.bounds
    j_max = params.j_max if j_max is None else j_max
    eps_rel = params.eps_rel if eps_rel is None else eps_rel
    outer_rhs = 0.0
    if h is not None:
        outer_rhs = params.rho * gradient_adjoint(h - g)
    j = 0
    while j < j_max:
        rhs = (lam * op.adjoint(b - state.z)
               + gamma * gradient_adjoint(state.d - state.y)
               + outer_rhs
               + beta * (state.v - state.w))
        u_new = solver.solve(rhs)
        Du = gradient_apply(u_new)
        Au = op.apply(u_new)
        state.d = prox(Du + state.y, mu)
        state.v = box_project(u_new + state.w, p, q)
        state.w = state.w + u_new - state.v
        state.y = state.y + Du - state.d
        state.z = state.z + Au - b
        change = _rel_change(u_new, state.u)
        state.u = u_new
        j += 1
        if on_step is not None:
            on_step(state, Au)
        if change <= eps_rel and _rel_residual(Au, b) <= eps_rel:
            break
    return j


# -- objective and Lagrangian ------------------------------------------------


def ratio_objective(u):
    """``||D u||_1 / ||D u||_2``; NaN for a constant image."""
    Du = gradient_apply(u)
    n2 = np.linalg.norm(Du)
    return float(np.abs(Du).sum() / n2) if n2 > 0 else float("nan")


def lagrangian_value(u, h, g, problem, params, feas_tol=1e-6):
    """Augmented Lagrangian of the outer splitting at ``(u, h; g)``.

    ``||Du||_1/||h|| + rho <g, Du - h> + rho/2 ||Du - h||^2``. The indicator
    terms are evaluated with tolerances: ``inf`` is returned if
    ``||Au - b|| > feas_tol * max(1, ||b||)``, if `u` leaves the box by more
    than `feas_tol`, or if ``h = 0``.
    """
    op, b = problem.op, problem.b
    nh = np.linalg.norm(h)
    if nh == 0:
        return float("inf")
    if np.linalg.norm(op.apply(u) - b) > feas_tol * max(1.0, np.linalg.norm(b)):
        return float("inf")
    p, q = params.bounds
    if np.any(u < p - feas_tol) or np.any(u > q + feas_tol):
        return float("inf")
    Du = gradient_apply(u)
    r = Du - h
    rho = params.rho
    return float(np.abs(Du).sum() / nh + rho * np.vdot(g, r) + rho / 2 * np.vdot(r, r))


# -- solvers -------------------------------------------------------------------


def _random_start(problem, params, rng):
    p, q = params.bounds
    lo, hi = (0.0, 1.0) if not np.isfinite(p) or not np.isfinite(q) else (p, q)
    return rng.uniform(lo, hi, size=problem.shape)


def _record(diag, u, u_prev, problem, t0, ground_truth):
    op, b = problem.op, problem.b
    nb = np.linalg.norm(b)
    res = np.linalg.norm(op.apply(u) - b)
    diag.feasibility_trace.append(float(res / nb) if nb > 0 else float(res))
    diag.step_trace.append(float(np.linalg.norm(u - u_prev)))
    diag.rel_step_trace.append(float(_rel_change(u, u_prev)))
    diag.objective_trace.append(ratio_objective(u))
    diag.wall_times.append(time.perf_counter() - t0)
    if ground_truth is not None:
        diag.re_trace.append(relative_error(u, ground_truth))


def _stalled(diag, eps):
    # a small step alone is not enough: u can sit still while duals build up
    return diag.rel_step_trace[-1] <= eps and diag.feasibility_trace[-1] <= eps


def _finalize(u, params):
    p, q = params.bounds
    return np.clip(u, p, q)


def solve_l1_over_l2(problem, params=SolverParams(), ground_truth=None, init="zero",
                     lagrangian=False, callback=None):
    """Minimize ``||Du||_1/||Du||_2`` subject to ``A u = b`` and the box.

    Parameters
    ----------
    problem : Problem
    params : SolverParams
    ground_truth : ndarray, optional
        If given, the relative error is traced per outer iteration.
    init : {"zero", "random"} or ndarray
        ``"zero"`` starts every variable at zero. ``"random"`` draws ``u``
        uniformly in the box from ``params.rng_seed``; an array is used as
        ``u`` directly. In both cases ``h = d = D u`` and ``v = u``.
    lagrangian : bool
        Trace the augmented Lagrangian (one extra operator application per
        outer iteration).
    callback : callable ``callback(k, u)``, optional

    Returns
    -------
    SolveResult
        The final iterate clipped to the box and the diagnostics.
    """
    rng = np.random.default_rng(params.rng_seed)
    state = InnerState.zeros(problem)
    h = np.zeros_like(state.d)
    if isinstance(init, str) and init == "random":
        u0 = _random_start(problem, params, rng)
        state.u, state.v = u0, u0.copy()
        state.d = gradient_apply(u0)
        h = state.d.copy()
    elif isinstance(init, np.ndarray):
        u0 = np.asarray(init, dtype=float).reshape(problem.shape)
        state.u, state.v = u0.copy(), u0.copy()
        state.d = gradient_apply(u0)
        h = state.d.copy()
    elif not (isinstance(init, str) and init == "zero"):
        raise ValueError(f"unknown init {init!r}")
    g = np.zeros_like(h)
    solver = NormalSolver(problem.op, params.lam, params.gamma_ + params.rho, params.beta,
                          params.cg_tol, params.cg_max_iter)
    floor = params.floor_for(state.u.size)
    diag = Diagnostics()
    t0 = time.perf_counter()
    u = state.u.copy()

    for k in range(params.k_max):
        nh = np.linalg.norm(h)
        mu = 1.0 / (params.gamma_ * nh) if nh > 0 else np.inf
        diag.inner_iterations += inner_admm(state, problem, params, solver, soft_shrink, mu, h=h, g=g)
        u_prev, u = u, state.u.copy()
        Du = gradient_apply(u)
        h, random_branch = h_update(Du + g, np.abs(Du).sum(), params.rho, rng)
        if random_branch:
            diag.h_branch_count += 1
            log.info("h update hit a zero target at k=%d", k)
        g = g + Du - h
        _record(diag, u, u_prev, problem, t0, ground_truth)
        if lagrangian:
            diag.lagrangian_trace.append(lagrangian_value(u, h, g, problem, params))
        if callback is not None:
            callback(k, u)
        if np.linalg.norm(h) < floor:
            diag.diverged = True
            log.warning("||h|| fell below %.3g at k=%d", floor, k)
            break
        if k > 0 and _stalled(diag, params.eps_rel):
            break

    diag.cg_failures = solver.failures
    return SolveResult(_finalize(u, params), diag)


def solve_gradient_prox(problem, params, prox, ground_truth=None, callback=None):
    """Single-loop ADMM for ``min R(D u)`` under ``A u = b`` and the box.

    `prox(x, mu)` is the proximal map of ``R`` with weight ``mu = 1/gamma``;
    :func:`solve_tv`, :func:`solve_lp` and :func:`solve_l1_minus_l2` are this
    function with different maps. One pass of the inner ADMM is one
    iteration and ``j_max`` is ignored.
    """
    state = InnerState.zeros(problem)
    solver = NormalSolver(problem.op, params.lam, params.gamma_, params.beta,
                          params.cg_tol, params.cg_max_iter)
    mu = 1.0 / params.gamma_
    diag = Diagnostics()
    t0 = time.perf_counter()
    u = state.u.copy()
    for k in range(params.k_max):
        diag.inner_iterations += inner_admm(state, problem, params, solver, prox, mu, j_max=1)
        u_prev, u = u, state.u.copy()
        _record(diag, u, u_prev, problem, t0, ground_truth)
        if callback is not None:
            callback(k, u)
        if k > 0 and _stalled(diag, params.eps_rel):
            break
    diag.cg_failures = solver.failures
    return SolveResult(_finalize(u, params), diag)


def solve_tv(problem, params=SolverParams(), ground_truth=None, callback=None):
    """Anisotropic TV: ``min ||D u||_1`` under ``A u = b`` and the box."""
    return solve_gradient_prox(problem, params, soft_shrink, ground_truth, callback)


def solve_lp(problem, params=SolverParams(), ground_truth=None, callback=None):
    """``min sum |D u|^(1/2)`` under ``A u = b`` and the box (half thresholding)."""
    return solve_gradient_prox(problem, params, half_threshold, ground_truth, callback)


def solve_l1_minus_l2(problem, params=SolverParams(), ground_truth=None, alpha=0.5,
                      callback=None):
    """``min ||D u||_1 - alpha ||D u||_2`` under ``A u = b`` and the box."""
    def prox(x, mu):
        return prox_l1_minus_al2(x, alpha, mu)
    return solve_gradient_prox(problem, params, prox, ground_truth, callback)


# -- baselines -----------------------------------------------------------------


def zero_fill(b, mask_or_op):
    """Inverse unitary DFT of the data with unmeasured bins set to zero."""
    op = mask_or_op
    if not isinstance(op, FourierSampling):
        if isinstance(op, MatrixOperator):
            raise TypeError("zero filling needs a Fourier sampling operator")
        op = FourierSampling(op)
    return op.adjoint(b)


def sart_solve(problem, iterations=50, relax=1.0, nonneg=True, u0=None, ground_truth=None):
    """Block-iterative SART for an explicit system matrix.

    Each sweep visits the operator's row blocks (projection angles for a
    Radon operator) in order and applies

        u += relax * (A_B^T W_B^{-1} (b_B - A_B u)) / colsum(A_B)

    with ``W_B`` the row sums of the block. Rows or columns with zero sum get
    zero weight. Negative values are clipped after each sweep when `nonneg`.
    """
    op = problem.op
    if not isinstance(op, MatrixOperator):
        raise TypeError("SART needs an explicit system matrix")
    A, b = op.matrix, np.asarray(problem.b, dtype=float)
    blocks = []
    for rows in op.blocks:
        Ab = A[rows]
        rs = np.asarray(Ab.sum(axis=1)).ravel()
        cs = np.asarray(Ab.sum(axis=0)).ravel()
        inv_r = np.divide(1.0, rs, out=np.zeros_like(rs), where=rs != 0)
        inv_c = np.divide(1.0, cs, out=np.zeros_like(cs), where=cs != 0)
        blocks.append((Ab, Ab.T.tocsr(), b[rows], inv_r, inv_c))
    x = np.zeros(A.shape[1]) if u0 is None else np.asarray(u0, dtype=float).ravel(order="F").copy()
    diag = Diagnostics()
    t0 = time.perf_counter()
    for _ in range(int(iterations)):
        x_prev = x.copy()
        for Ab, AbT, bb, inv_r, inv_c in blocks:
            x += relax * inv_c * (AbT @ (inv_r * (bb - Ab @ x)))
        if nonneg:
            np.maximum(x, 0.0, out=x)
        u = x.reshape(op.shape, order="F")
        _record(diag, u, x_prev.reshape(op.shape, order="F"), problem, t0, ground_truth)
    return SolveResult(x.reshape(op.shape, order="F").copy(), diag)
