"""Brute-force reference solutions used by the tests.

Nothing here imports the library code it is meant to check.
"""

import numpy as np


def tau_bisection(eta, tol=1e-15):
    """Root of ``t**2 (t - 1) = eta`` on ``[1, 1 + eta**(1/3) + 1]`` by bisection."""
    lo, hi = 1.0, 2.0 + eta ** (1 / 3)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * mid * (mid - 1) < eta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return 0.5 * (lo + hi)


def half_threshold_oracle(x, mu):
    """Argmin of ``0.5 (y - x)^2 + mu |y|^0.5`` by a grid scan plus zooming.

    The minimizer lies between 0 and `x`, so only that segment is searched.
    """
    def f(y):
        return 0.5 * (y - x) ** 2 + mu * np.sqrt(np.abs(y))

    lo, hi = min(0.0, x), max(0.0, x)
    ys = np.linspace(lo, hi, 4001)
    best = ys[np.argmin(f(ys))]
    width = (hi - lo) / 4000
    for _ in range(6):
        ys = np.linspace(max(lo, best - 2 * width), min(hi, best + 2 * width), 401)
        best = ys[np.argmin(f(ys))]
        width /= 100
    # compare against zero explicitly; ties go to zero
    return 0.0 if f(0.0) <= f(best) else best


def l1_minus_l2_oracle(v, alpha, mu, radius=None):
    """Argmin of ``0.5||y - v||^2 + mu(||y||_1 - alpha ||y||_2)`` for 2D `v` by zooming grids."""
    v = np.asarray(v, dtype=float)

    def f(Y):
        return (0.5 * np.sum((Y - v) ** 2, axis=-1)
                + mu * (np.sum(np.abs(Y), axis=-1) - alpha * np.linalg.norm(Y, axis=-1)))

    radius = radius or (np.max(np.abs(v)) + mu + 0.5)
    center = np.zeros(2)
    width = radius
    best = center
    for _ in range(7):
        g = np.linspace(-width, width, 201)
        Y = np.stack(np.meshgrid(center[0] + g, center[1] + g, indexing="ij"), axis=-1)
        F = f(Y)
        idx = np.unravel_index(np.argmin(F), F.shape)
        best = Y[idx]
        center = best
        width = width / 20
    # the axes are where the nonsmooth minimizers sit; check them exactly
    cands = [best, np.zeros(2)]
    for ax in range(2):
        t = np.linspace(-radius, radius, 200001)
        Y = np.zeros((t.size, 2))
        Y[:, ax] = t
        cands.append(Y[np.argmin(f(Y))])
    cands = np.array(cands)
    return cands[np.argmin(f(cands))]
