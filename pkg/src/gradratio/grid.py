"""Test signals, phantoms and reconstruction metrics.

Images are plain numpy arrays: a 1D signal has shape ``(N,)`` and a 2D image
has shape ``(m, n)``. Whenever an image has to be laid out as a single vector
(sparse system matrices, serialization of operators) the column-major
ordering is used, i.e. pixel ``(i, j)`` sits at linear index ``i + j*m``.
See :func:`vec` and :func:`unvec`.
"""

import numpy as np

__all__ = [
    "vec",
    "unvec",
    "make_one_bar",
    "make_two_bar",
    "shepp_logan",
    "SHEPP_LOGAN_ELLIPSES",
    "relative_error",
    "psnr",
    "minimum_separation",
    "gradient_support",
    "save_image",
    "load_image",
]


def vec(u):
    """Flatten an image in column-major order."""
    return np.asarray(u).ravel(order="F")


def unvec(x, shape):
    """Inverse of :func:`vec`."""
    return np.asarray(x).reshape(shape, order="F")


def make_one_bar(N, s):
    """Return a length-`N` signal that is 1 except on its first and last `s` entries.

    For ``0 < s < N/2`` the periodic forward difference has exactly two
    nonzeros, at ``s - 1`` and ``N - s - 1``.
    """
    N, s = int(N), int(s)
    if N < 1 or s < 1 or 2 * s > N:
        raise ValueError(f"need 1 <= s <= N/2, got N={N}, s={s}")
    u = np.zeros(N)
    u[s:N - s] = 1.0
    return u


def make_two_bar(N, s, t):
    """Two bars of heights 2 and 1 on a background of level `t`.

    Entries ``s .. 2s-1`` equal 2, the last ``2s`` entries equal 1 and the rest
    equal `t`.
    """
    N, s = int(N), int(s)
    if s < 1 or 4 * s > N:
        raise ValueError(f"need 1 <= s and 4s <= N, got N={N}, s={s}")
    u = np.full(N, float(t))
    u[s:2 * s] = 2.0
    u[N - 2 * s:] = 1.0
    return u


# intensity, semi-axis a, semi-axis b, x0, y0, rotation (degrees)
SHEPP_LOGAN_ELLIPSES = np.array([
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0],
    [-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0],
    [-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0],
    [0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0],
    [0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0],
    [0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0],
    [0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0],
])


def _phantom_axes(m, n):
    x = (np.arange(n) - (n - 1) / 2) / ((n - 1) / 2)
    # row 0 is the top of the image (y = +1)
    y = ((m - 1) / 2 - np.arange(m)) / ((m - 1) / 2)
    return np.meshgrid(x, y)


def shepp_logan(m, n=None):
    """Modified Shepp-Logan phantom of size ``m x n`` with values in [0, 1].

    Each pixel holds the summed intensity of the ellipses containing its
    center, on the square ``[-1, 1]^2`` sampled at ``m`` rows and ``n``
    columns.
    """
    n = m if n is None else n
    m, n = int(m), int(n)
    if m < 16 or n < 16:
        raise ValueError("phantom needs at least 16 x 16 pixels")
    X, Y = _phantom_axes(m, n)
    p = np.zeros((m, n))
    for A, a, b, x0, y0, phi in SHEPP_LOGAN_ELLIPSES:
        c, s = np.cos(np.deg2rad(phi)), np.sin(np.deg2rad(phi))
        xr = (X - x0) * c + (Y - y0) * s
        yr = (Y - y0) * c - (X - x0) * s
        p[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += A
    # overlapping +/-0.2 intensities leave residues around 1e-17
    p = np.round(p, 12)
    return np.clip(p, 0.0, 1.0)


def relative_error(u_star, u_true):
    """Relative L2 error ``||u_star - u_true|| / ||u_true||``."""
    u_star = np.asarray(u_star, dtype=float)
    u_true = np.asarray(u_true, dtype=float)
    if u_star.shape != u_true.shape:
        raise ValueError(f"shape mismatch {u_star.shape} vs {u_true.shape}")
    denom = np.linalg.norm(u_true)
    if denom == 0:
        raise ZeroDivisionError("ground truth has zero norm")
    return float(np.linalg.norm(u_star - u_true) / denom)


def psnr(u_star, u_true):
    """Peak signal-to-noise ratio in dB, with the peak taken as ``max(u_true)``.

    Identical inputs give ``inf``.
    """
    u_star = np.asarray(u_star, dtype=float)
    u_true = np.asarray(u_true, dtype=float)
    if u_star.shape != u_true.shape:
        raise ValueError(f"shape mismatch {u_star.shape} vs {u_true.shape}")
    err = np.sum((u_star - u_true) ** 2)
    if err == 0:
        return float("inf")
    peak = u_true.max()
    return float(10 * np.log10(u_true.size * peak ** 2 / err))


def minimum_separation(T, N):
    """Smallest wrap-around distance between two distinct indices of `T`.

    Parameters
    ----------
    T : iterable of int
        Support indices in ``[0, N)``.
    N : int
        Period of the index set.
    """
    T = np.unique(np.asarray(list(T), dtype=int))
    if T.size < 2:
        raise ValueError("minimum separation needs at least two indices")
    if T[0] < 0 or T[-1] >= N:
        raise ValueError(f"indices must lie in [0, {N})")
    # for sorted indices the closest pair is adjacent, including the wrap pair
    gaps = np.diff(np.append(T, T[0] + N))
    gaps = np.minimum(gaps, N - gaps)
    return int(gaps.min())


def gradient_support(u, tol=0.0):
    """Indices where the periodic forward difference of a 1D signal is nonzero."""
    u = np.asarray(u, dtype=float)
    d = np.roll(u, -1) - u
    return np.flatnonzero(np.abs(d) > tol)


def save_image(path, u, fmt=None):
    """Write an image as CSV or raw binary with an ``(m, n)`` header.

    CSV: first line ``m,n``, then ``m`` lines of ``n`` comma-separated floats
    (row-major). Binary (``.bin``/``.raw``): two little-endian int64 values
    ``m, n`` followed by ``m*n`` little-endian float64 values in row-major
    order. 1D signals are stored with ``n = 1``.
    """
    u = np.asarray(u, dtype=float)
    grid = u.reshape(-1, 1) if u.ndim == 1 else u
    if u.ndim not in (1, 2):
        raise ValueError("only 1D and 2D images can be saved")
    fmt = fmt or ("bin" if str(path).endswith((".bin", ".raw")) else "csv")
    m, n = grid.shape
    if fmt == "csv":
        with open(path, "w") as fh:
            fh.write(f"{m},{n}\n")
            np.savetxt(fh, grid, delimiter=",", fmt="%.17g")
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(np.array([m, n], dtype="<i8").tobytes())
            fh.write(np.ascontiguousarray(grid, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown image format {fmt!r}")


def load_image(path, fmt=None):
    """Read an image written by :func:`save_image`. ``n = 1`` yields a 1D array."""
    fmt = fmt or ("bin" if str(path).endswith((".bin", ".raw")) else "csv")
    if fmt == "csv":
        with open(path) as fh:
            m, n = (int(v) for v in fh.readline().split(","))
            grid = np.loadtxt(fh, delimiter=",", ndmin=2)
    elif fmt == "bin":
        raw = open(path, "rb").read()
        m, n = np.frombuffer(raw[:16], dtype="<i8")
        grid = np.frombuffer(raw[16:], dtype="<f8").copy()
    else:
        raise ValueError(f"unknown image format {fmt!r}")
    grid = np.asarray(grid, dtype=float).reshape(int(m), int(n))
    return grid[:, 0].copy() if n == 1 else grid
