"""Closed-form proximal maps and the ratio-penalty ``h`` subproblem."""

import numpy as np

__all__ = [
    "soft_shrink",
    "half_threshold",
    "prox_l1_minus_al2",
    "box_project",
    "solve_tau",
    "h_update",
]


def soft_shrink(x, mu):
    """``sign(x) * max(|x| - mu, 0)``, elementwise. ``mu = inf`` maps to zero."""
    x = np.asarray(x, dtype=float)
    if mu < 0:
        raise ValueError("threshold must be nonnegative")
    return np.sign(x) * np.maximum(np.abs(x) - mu, 0.0)


def half_threshold(x, mu):
    """Elementwise minimizer of ``0.5*(y - x)**2 + mu*|y|**0.5``.

    Uses the half-thresholding formula: inputs with ``|x|`` at or below
    ``(3/2) mu**(2/3)`` go to zero, larger ones follow a trigonometric
    closed form. At the threshold both candidates tie and zero is returned.
    """
    x = np.asarray(x, dtype=float)
    if mu < 0:
        raise ValueError("threshold must be nonnegative")
    if mu == 0:
        return x.copy()
    # written for min (y - x)^2 + lam |y|^(1/2), hence lam = 2 mu
    lam = 2.0 * mu
    # 54**(1/3)/4 * lam**(2/3), simplified so ties are exact
    thresh = 1.5 * mu ** (2 / 3)
    ax = np.abs(x)
    out = np.zeros_like(x)
    big = ax > thresh
    if np.any(big):
        phi = np.arccos(lam / 8 * (ax[big] / 3) ** -1.5)
        out[big] = 2 / 3 * x[big] * (1 + np.cos(2 * np.pi / 3 - 2 * phi / 3))
    return out


def prox_l1_minus_al2(v, alpha, mu):
    """Minimizer of ``0.5*||y - v||^2 + mu*(||y||_1 - alpha*||y||_2)`` over the whole vector.

    Parameters
    ----------
    v : ndarray
        Input of any shape; the norms couple all entries.
    alpha : float
        Weight of the L2 term, in ``[0, 1]``.
    mu : float
        Positive penalty weight.
    """
    v = np.asarray(v, dtype=float)
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    vmax = np.max(np.abs(v)) if v.size else 0.0
    if vmax > mu:
        z = soft_shrink(v, mu)
        nz = np.linalg.norm(z)
        return z * (nz + alpha * mu) / nz
    if vmax > (1 - alpha) * mu:
        out = np.zeros_like(v)
        i = np.unravel_index(np.argmax(np.abs(v)), v.shape)
        out[i] = np.sign(v[i]) * (abs(v[i]) + (alpha - 1) * mu)
        return out
    return np.zeros_like(v)


def box_project(u, p, q):
    """Clip `u` elementwise to ``[p, q]``."""
    if p > q:
        raise ValueError(f"empty box [{p}, {q}]")
    return np.clip(u, p, q)


def solve_tau(eta):
    """Real root ``tau >= 1`` of ``tau**2 * (tau - 1) = eta`` by Cardano's formula."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0):
        raise ValueError("eta must be nonnegative")
    a = 27 * eta + 2
    xi = np.cbrt((a + np.sqrt(a * a - 4)) / 2)
    # xi + 1/xi - 2 == (xi - 1)^2 / xi, which avoids cancellation near eta = 0
    tau = 1 + (xi - 1) ** 2 / (3 * xi)
    return float(tau) if tau.ndim == 0 else tau


def h_update(target, a, rho, rng=None):
    """Minimize ``a/||h|| + rho/2 * ||h - target||^2`` over `h`.

    For a nonzero target the minimizer is ``tau * target`` with
    ``tau = solve_tau(a / (rho * ||target||^3))``. A zero target has no
    preferred direction, so a uniformly random unit direction scaled to
    ``(a/rho)**(1/3)`` is returned instead.

    Returns
    -------
    h : ndarray
    random_branch : bool
        True when the zero-target branch was taken.
    """
    target = np.asarray(target, dtype=float)
    nt = np.linalg.norm(target)
    if nt > 0:
        return solve_tau(a / (rho * nt ** 3)) * target, False
    rng = np.random.default_rng(rng)
    r = rng.standard_normal(target.shape)
    r *= (a / rho) ** (1 / 3) / np.linalg.norm(r)
    return r, True
