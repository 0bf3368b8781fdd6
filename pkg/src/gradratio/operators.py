"""Difference and measurement operators on periodic grids.

Gradient fields are stored with a leading component axis: a signal of shape
``(N,)`` has a gradient of shape ``(1, N)`` and an image of shape ``(m, n)``
has a gradient of shape ``(2, m, n)`` holding the horizontal and vertical
forward differences.
"""

import numpy as np
import scipy.sparse as sp

from .grid import vec, unvec

__all__ = [
    "gradient_apply",
    "gradient_adjoint",
    "gradient_gram_spectrum",
    "dense_gradient_matrix",
    "make_lowpass_mask_1d",
    "make_lowfreq_square_mask",
    "make_radial_mask",
    "hermitian_symmetrize",
    "is_hermitian_symmetric",
    "MeasurementOperator",
    "FourierSampling",
    "MatrixOperator",
    "RadonOperator",
    "fourier_sampling_operator",
    "radon_operator",
    "limited_angles",
]


def gradient_apply(u):
    """Periodic forward differences of `u`.

    ``out[0][i, j] = u[i, j+1] - u[i, j]`` and ``out[1][i, j] = u[i+1, j] - u[i, j]``
    with indices taken modulo the grid size. A 1D signal yields a single
    component.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        return (np.roll(u, -1) - u)[None]
    if u.ndim != 2:
        raise ValueError("expected a 1D signal or a 2D image")
    return np.stack([np.roll(u, -1, axis=1) - u, np.roll(u, -1, axis=0) - u])


def gradient_adjoint(g):
    """Transpose of :func:`gradient_apply`."""
    g = np.asarray(g, dtype=float)
    if g.shape[0] == 1 and g.ndim == 2:
        return np.roll(g[0], 1) - g[0]
    if g.ndim != 3 or g.shape[0] != 2:
        raise ValueError(f"bad gradient field shape {g.shape}")
    return (np.roll(g[0], 1, axis=1) - g[0]) + (np.roll(g[1], 1, axis=0) - g[1])


def gradient_gram_spectrum(m, n=1):
    """Eigenvalues of ``D^T D`` laid out on the unshifted FFT grid.

    Returns ``4 sin^2(pi k/m) + 4 sin^2(pi l/n)`` with shape ``(m, n)``, or
    shape ``(m,)`` when ``n == 1`` (1D signals).
    """
    sk = 4 * np.sin(np.pi * np.arange(m) / m) ** 2
    if n == 1:
        return sk
    sl = 4 * np.sin(np.pi * np.arange(n) / n) ** 2
    return sk[:, None] + sl[None, :]


def dense_gradient_matrix(shape):
    """Explicit ``D`` as a dense matrix acting on column-major vectors.

    Only meant for small grids in tests and checks.
    """
    N = int(np.prod(shape))
    cols = []
    for idx in range(N):
        e = np.zeros(N)
        e[idx] = 1.0
        cols.append(gradient_apply(unvec(e, shape)).reshape(-1))
    return np.array(cols).T


# -- frequency masks ---------------------------------------------------------
#
# Masks are boolean arrays on the unshifted FFT grid (bin 0 first), with the
# same shape as the image.


def hermitian_symmetrize(mask):
    """Return ``mask | mask[-k]`` so each kept bin has its conjugate partner."""
    mask = np.asarray(mask, dtype=bool)
    flipped = mask
    for ax in range(mask.ndim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    return mask | flipped


def is_hermitian_symmetric(mask):
    mask = np.asarray(mask, dtype=bool)
    return bool(np.array_equal(mask, hermitian_symmetrize(mask)))


def make_lowpass_mask_1d(N, f_c):
    """Keep the ``2 f_c + 1`` bins with ``|k| <= f_c``."""
    N, f_c = int(N), int(f_c)
    if f_c < 0 or 2 * f_c + 1 >= N:
        raise ValueError(f"need 0 <= f_c and 2 f_c + 1 < N, got N={N}, f_c={f_c}")
    k = np.fft.fftfreq(N, d=1.0 / N)
    return np.abs(k) <= f_c


def make_lowfreq_square_mask(m, n, ratio):
    """Centered ``(2r+1) x (2r+1)`` square of low frequencies.

    `r` is the largest radius whose kept fraction does not exceed `ratio`.
    """
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    if ratio * m * n < 1:
        raise ValueError("ratio too small to keep the DC bin")
    side = int(np.floor(np.sqrt(ratio * m * n)))
    side = min(side, m, n)
    if side % 2 == 0:
        side -= 1
    r = side // 2
    km = np.abs(np.fft.fftfreq(m, d=1.0 / m))
    kn = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    return (km[:, None] <= r) & (kn[None, :] <= r)


def make_radial_mask(m, n, n_lines):
    """Radial lines through the k-space origin at angles ``j*pi/n_lines``.

    Each line is rasterized by sampling it every quarter pixel and rounding
    to the nearest bin, which gives a one-pixel-wide 4-connected path. The
    result is Hermitian-symmetrized and always contains the DC bin.
    """
    n_lines = int(n_lines)
    if n_lines < 1:
        raise ValueError("need at least one line")
    cm, cn = m // 2, n // 2
    radius = np.hypot(m, n)
    t = np.arange(-radius, radius + 0.25, 0.25)
    shifted = np.zeros((m, n), dtype=bool)
    for theta in np.pi * np.arange(n_lines) / n_lines:
        rows = np.rint(cm - t * np.sin(theta)).astype(int)
        cols = np.rint(cn + t * np.cos(theta)).astype(int)
        ok = (rows >= 0) & (rows < m) & (cols >= 0) & (cols < n)
        shifted[rows[ok], cols[ok]] = True
    shifted[cm, cn] = True
    return hermitian_symmetrize(np.fft.ifftshift(shifted))


# -- measurement operators ---------------------------------------------------


class MeasurementOperator:
    """A linear map ``A`` from images to data vectors.

    Subclasses implement :meth:`apply` and :meth:`adjoint`. When ``A^T A`` is
    diagonalized by the unitary DFT, ``gram_spectrum`` holds its eigenvalues
    on the FFT grid; otherwise it is ``None``.
    """

    gram_spectrum = None

    def __init__(self, shape):
        self.shape = tuple(int(s) for s in shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def apply(self, u):
        raise NotImplementedError

    def adjoint(self, b):
        raise NotImplementedError

    def normal(self, u):
        return self.adjoint(self.apply(u))

    @staticmethod
    def inner(a, b):
        """Real inner product on the data space."""
        return float(np.real(np.vdot(a, b)))


class FourierSampling(MeasurementOperator):
    """Unitary DFT followed by selection of the bins in `mask`.

    Data vectors are complex and ordered like ``fft(u)[mask]``.
    """

    def __init__(self, mask):
        mask = np.asarray(mask, dtype=bool)
        super().__init__(mask.shape)
        self.mask = mask
        self.gram_spectrum = mask.astype(float)

    @property
    def n_kept(self):
        return int(self.mask.sum())

    def apply(self, u):
        return np.fft.fftn(u, norm="ortho")[self.mask]

    def adjoint(self, b):
        full = np.zeros(self.shape, dtype=complex)
        full[self.mask] = b
        return np.real(np.fft.ifftn(full, norm="ortho"))

    def normal(self, u):
        return np.real(np.fft.ifftn(np.fft.fftn(u, norm="ortho") * self.mask, norm="ortho"))


def fourier_sampling_operator(mask):
    return FourierSampling(mask)


class MatrixOperator(MeasurementOperator):
    """An explicit (sparse or dense) system matrix acting on column-major vectors.

    `blocks` optionally partitions the rows into groups, used by the
    block-iterative baseline.
    """

    def __init__(self, matrix, shape, blocks=None):
        super().__init__(shape)
        self.matrix = sp.csr_matrix(matrix)
        self.matrix_T = self.matrix.T.tocsr()
        if self.matrix.shape[1] != self.size:
            raise ValueError("matrix columns do not match the image size")
        self.blocks = blocks or [np.arange(self.matrix.shape[0])]

    def apply(self, u):
        return self.matrix @ vec(u)

    def adjoint(self, b):
        return unvec(self.matrix_T @ b, self.shape)


class RadonOperator(MatrixOperator):
    """Parallel-beam projections assembled as a sparse matrix.

    Line integrals are computed with Joseph's method: each ray is walked one
    pixel at a time along its dominant axis, interpolating linearly between
    the two neighbouring pixels across it, and the samples are weighted by
    the path length per step. Detectors have unit (pixel) spacing and are
    centered on the image center. Data are angle-major: detector `k` of
    angle `a` is entry ``a * n_detectors + k``.
    """

    def __init__(self, m, n, angles, n_detectors):
        angles = np.asarray(angles, dtype=float)
        if angles.size == 0:
            raise ValueError("empty angle list")
        if np.any(np.diff(angles) <= 0) or angles[0] < 0 or angles[-1] >= np.pi:
            raise ValueError("angles must be strictly increasing in [0, pi)")
        self.angles = angles
        self.n_detectors = int(n_detectors)
        matrix = _joseph_matrix(int(m), int(n), angles, self.n_detectors)
        nd = self.n_detectors
        blocks = [np.arange(a * nd, (a + 1) * nd) for a in range(angles.size)]
        super().__init__(matrix, (m, n), blocks=blocks)

    def sinogram(self, b):
        return np.asarray(b).reshape(self.angles.size, self.n_detectors)


def _joseph_matrix(m, n, angles, nd):
    s = np.arange(nd) - (nd - 1) / 2
    xs = np.arange(n) - (n - 1) / 2
    ys = (m - 1) / 2 - np.arange(m)
    rows, cols, vals = [], [], []
    for a, theta in enumerate(angles):
        c, si = np.cos(theta), np.sin(theta)
        if abs(si) >= abs(c):
            # walk across columns, interpolate between rows
            y = (s[:, None] - xs[None, :] * c) / si
            frac_idx = (m - 1) / 2 - y
            step_idx = np.broadcast_to(np.arange(n), frac_idx.shape)
            weight = 1.0 / abs(si)
            lo = np.floor(frac_idx).astype(int)
            f = frac_idx - lo
            for off, w in ((0, 1.0 - f), (1, f)):
                r = lo + off
                ok = (r >= 0) & (r < m) & (w > 0)
                det = np.broadcast_to(np.arange(nd)[:, None], r.shape)[ok]
                rows.append(a * nd + det)
                cols.append(r[ok] + step_idx[ok] * m)
                vals.append(weight * w[ok])
        else:
            # walk across rows, interpolate between columns
            x = (s[:, None] - ys[None, :] * si) / c
            frac_idx = x + (n - 1) / 2
            step_idx = np.broadcast_to(np.arange(m), frac_idx.shape)
            weight = 1.0 / abs(c)
            lo = np.floor(frac_idx).astype(int)
            f = frac_idx - lo
            for off, w in ((0, 1.0 - f), (1, f)):
                cc = lo + off
                ok = (cc >= 0) & (cc < n) & (w > 0)
                det = np.broadcast_to(np.arange(nd)[:, None], cc.shape)[ok]
                rows.append(a * nd + det)
                cols.append(step_idx[ok] + cc[ok] * m)
                vals.append(weight * w[ok])
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(angles) * nd, m * n),
    )
    return A.tocsr()


def radon_operator(m, n, angles, n_detectors):
    return RadonOperator(m, n, angles, n_detectors)


def limited_angles(theta_max_deg, n_angles=31):
    """``n_angles`` equispaced angles (radians) covering ``[0, theta_max]``."""
    if not 0 < theta_max_deg < 180:
        raise ValueError("theta_max must lie in (0, 180) degrees")
    return np.deg2rad(np.linspace(0.0, theta_max_deg, int(n_angles)))
