import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradratio.grid import (
    SHEPP_LOGAN_ELLIPSES,
    gradient_support,
    load_image,
    make_one_bar,
    make_two_bar,
    minimum_separation,
    psnr,
    relative_error,
    save_image,
    shepp_logan,
    unvec,
    vec,
)


def test_vec_is_column_major():
    u = np.arange(6.0).reshape(2, 3)
    # pixel (i, j) at i + j*m
    assert vec(u)[1 + 2 * 2] == u[1, 2]
    np.testing.assert_array_equal(unvec(vec(u), u.shape), u)


def test_one_bar_layout():
    u = make_one_bar(100, 13)
    assert np.all(u[:13] == 0) and np.all(u[-13:] == 0) and np.all(u[13:87] == 1)
    np.testing.assert_array_equal(gradient_support(u), [12, 86])
    assert minimum_separation(gradient_support(u), 100) == 26


def test_one_bar_degenerate_and_errors():
    assert not make_one_bar(100, 50).any()
    assert gradient_support(make_one_bar(100, 50)).size == 0
    with pytest.raises(ValueError):
        make_one_bar(100, 51)
    with pytest.raises(ValueError):
        make_one_bar(100, 0)


@pytest.mark.parametrize("s", range(1, 50))
def test_one_bar_gradient_is_two_sparse(s):
    u = make_one_bar(100, s)
    d = np.roll(u, -1) - u
    supp = np.flatnonzero(d)
    assert supp.size == 2
    assert sorted(d[supp]) == [-1.0, 1.0]
    assert minimum_separation(supp, 100) == min(2 * s, 100 - 2 * s)


def test_one_bar_s12_separation():
    assert minimum_separation(gradient_support(make_one_bar(100, 12)), 100) == 24


@pytest.mark.parametrize("t, nnz", [(1.3, 4), (1.0, 2), (2.0, 2), (1.5, 4)])
def test_two_bar_gradient_sparsity(t, nnz):
    u = make_two_bar(100, 12, t)
    assert gradient_support(u).size == nnz
    assert np.all(u[12:24] == 2) and np.all(u[-24:] == 1)


def test_two_bar_rejects_wide_bars():
    with pytest.raises(ValueError):
        make_two_bar(100, 26, 1.5)


def _inside_any_ellipse(x, y):
    total = 0.0
    for A, a, b, x0, y0, phi in SHEPP_LOGAN_ELLIPSES:
        c, s = np.cos(np.deg2rad(phi)), np.sin(np.deg2rad(phi))
        xr = (x - x0) * c + (y - y0) * s
        yr = (y - y0) * c - (x - x0) * s
        if (xr / a) ** 2 + (yr / b) ** 2 <= 1:
            total += A
    return total


def test_shepp_logan_center_and_corners():
    p = shepp_logan(256, 256)
    # pixel-center coordinates of the central pixel and a corner
    xc = (128 - 127.5) / 127.5
    yc = (127.5 - 128) / 127.5
    assert p[128, 128] == pytest.approx(_inside_any_ellipse(xc, yc))
    assert p[128, 128] > 0
    assert p[0, 0] == p[0, -1] == p[-1, 0] == p[-1, -1] == 0


def test_shepp_logan_range_and_determinism():
    small = shepp_logan(16, 16)
    assert small.min() >= 0 and small.max() <= 1
    a, b = shepp_logan(256, 256), shepp_logan(256, 256)
    assert np.array_equal(a, b)
    assert a.max() == 1.0
    with pytest.raises(ValueError):
        shepp_logan(8, 8)


def test_shepp_logan_rectangular():
    p = shepp_logan(64, 48)
    assert p.shape == (64, 48)
    assert p.min() >= 0 and p.max() <= 1


def test_relative_error_examples():
    rng = np.random.default_rng(0)
    u = rng.random(20) + 0.1
    assert relative_error(u, u) == 0
    assert relative_error(2 * u, u) == pytest.approx(1.0)
    e0 = np.zeros(20)
    e0[0] = np.linalg.norm(u)
    assert relative_error(u + e0, u) == pytest.approx(1.0)
    with pytest.raises(ZeroDivisionError):
        relative_error(u, np.zeros(20))
    with pytest.raises(ValueError):
        relative_error(u, u[:5])


def test_psnr_examples():
    truth = np.array([1.0, 0.0, 0.0, 0.0])
    # ||diff||^2 = 0.04, N = 4, P = 1  ->  10 log10(100) = 20 dB
    assert psnr(truth + np.array([0.2, 0, 0, 0]), truth) == pytest.approx(20.0)
    assert psnr(truth, truth) == float("inf")


@given(st.floats(0.01, 100.0))
def test_psnr_scale_invariant(c):
    rng = np.random.default_rng(1)
    truth = rng.random((8, 8))
    est = truth + 0.01 * rng.standard_normal((8, 8))
    assert psnr(c * est, c * truth) == pytest.approx(psnr(est, truth), abs=1e-9)


def test_psnr_relative_error_consistency():
    rng = np.random.default_rng(2)
    truth = rng.random((16, 16))
    est = truth + 0.05 * rng.standard_normal((16, 16))
    re = relative_error(est, truth)
    expected = 10 * np.log10(truth.size * truth.max() ** 2 / (re ** 2 * np.sum(truth ** 2)))
    assert psnr(est, truth) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("T, N, ms", [([12, 86], 100, 26), ([0, 50], 100, 50), ([0, 1, 99], 100, 1)])
def test_minimum_separation_examples(T, N, ms):
    assert minimum_separation(T, N) == ms


def test_minimum_separation_needs_two():
    with pytest.raises(ValueError):
        minimum_separation([3], 10)


@given(st.lists(st.integers(0, 59), min_size=2, max_size=10, unique=True), st.integers(0, 59))
def test_minimum_separation_shift_invariant(T, shift):
    N = 60
    brute = min(min(abs(a - b), N - abs(a - b)) for a in T for b in T if a != b)
    assert minimum_separation(T, N) == brute
    assert minimum_separation([(t + shift) % N for t in T], N) == brute


@pytest.mark.parametrize("suffix", [".csv", ".bin"])
@pytest.mark.parametrize("shape", [(5, 3), (7,)])
def test_image_roundtrip(tmp_path, suffix, shape):
    u = np.random.default_rng(3).random(shape)
    path = tmp_path / f"img{suffix}"
    save_image(path, u)
    np.testing.assert_array_equal(load_image(path), u)


def test_csv_header_is_shape(tmp_path):
    u = np.arange(6.0).reshape(2, 3)
    save_image(tmp_path / "a.csv", u)
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "2,3"
    assert lines[1].split(",") == ["0", "1", "2"]
