import numpy as np
import pytest
import scipy.fft
from hypothesis import given, settings
from hypothesis import strategies as st

from nextscale.exceptions import DomainError, ShapeError
from nextscale.spectral import band_energy, dct2, dct_matrix, embed_low_band, idct2
from oracles import brute_dct2, brute_idct2


@pytest.mark.parametrize("shape", [(1, 1), (2, 3), (5, 4), (8, 8)])
def test_dct2_matches_definition(rng, shape):
    x = rng.normal(size=shape)
    np.testing.assert_allclose(dct2(x), brute_dct2(x), atol=1e-12)
    np.testing.assert_allclose(idct2(x), brute_idct2(x), atol=1e-12)


@pytest.mark.parametrize("shape", [(3, 17), (16, 16), (64, 7)])
def test_dct2_matches_scipy(rng, shape):
    x = rng.normal(size=shape)
    np.testing.assert_allclose(dct2(x), scipy.fft.dctn(x, norm="ortho"), atol=1e-12)


def test_identity_on_single_sample():
    assert dct2(np.array([[3.25]])).tolist() == [[3.25]]


@pytest.mark.parametrize("n", [1, 2, 4, 7])
def test_constant_grid_is_pure_dc(n):
    c = -1.7
    spec = dct2(np.full((n, n), c))
    assert spec[0, 0] == pytest.approx(c * n, abs=1e-12)
    rest = spec.copy()
    rest[0, 0] = 0.0
    assert np.max(np.abs(rest)) < 1e-12
    back = idct2(np.where(np.arange(n * n).reshape(n, n) == 0, c * n, 0.0))
    np.testing.assert_allclose(back, c, atol=1e-12)


def test_zero_spectrum_gives_zero_grid():
    assert np.all(idct2(np.zeros((4, 6))) == 0.0)


def test_channels_transformed_independently(rng):
    x = rng.normal(size=(5, 6, 3))
    spec = dct2(x)
    for c in range(3):
        np.testing.assert_allclose(spec[:, :, c], dct2(x[:, :, c]), atol=1e-13)


def test_basis_is_orthonormal():
    for n in (1, 3, 8, 33):
        c = dct_matrix(n)
        np.testing.assert_allclose(c @ c.T, np.eye(n), atol=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 64), st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_round_trip_and_parseval(h, w, seed):
    x = np.random.default_rng(seed).normal(size=(h, w))
    spec = dct2(x)
    assert np.max(np.abs(idct2(spec) - x)) < 1e-10
    assert np.max(np.abs(dct2(idct2(spec)) - spec)) < 1e-10
    e = np.sum(x * x)
    assert abs(e - np.sum(spec * spec)) / e < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 32), st.integers(1, 32), st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_linearity(h, w, a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, h, w))
    np.testing.assert_allclose(dct2(a * x + b * y), a * dct2(x) + b * dct2(y), atol=1e-10)


@pytest.mark.parametrize("fn", [dct2, idct2])
def test_non_finite_rejected(fn):
    with pytest.raises(DomainError):
        fn(np.array([[1.0, np.nan]]))


# -- band surgery ---------------------------------------------------------------


def test_embed_amplitude_preserving_keeps_constants():
    out = embed_low_band(dct2(np.ones((4, 4))), dct2(np.ones((2, 2))))
    np.testing.assert_allclose(idct2(out), 1.0, atol=1e-12)


def test_embed_raw_copy_halves_constant():
    # source DC 2 lands where the 4x4 constant needs DC 4
    out = embed_low_band(dct2(np.ones((4, 4))), dct2(np.ones((2, 2))), amplitude_preserving=False)
    np.testing.assert_allclose(brute_idct2(out), 0.5, atol=1e-12)
    np.testing.assert_allclose(idct2(out), 0.5, atol=1e-12)


def test_embed_equal_size_returns_source(rng):
    src = rng.normal(size=(3, 5))
    np.testing.assert_array_equal(embed_low_band(rng.normal(size=(3, 5)), src), src)


def test_embed_touches_only_low_corner(rng):
    tgt = rng.normal(size=(6, 5, 2))
    src = rng.normal(size=(3, 2, 2))
    out = embed_low_band(tgt, src, amplitude_preserving=False)
    np.testing.assert_array_equal(out[:3, :2], src)
    mask = np.ones((6, 5), bool)
    mask[:3, :2] = False
    np.testing.assert_array_equal(out[mask], tgt[mask])


@pytest.mark.parametrize("src_shape", [(5, 2), (2, 6), (5, 6)])
def test_embed_rejects_larger_source(src_shape):
    with pytest.raises(ShapeError):
        embed_low_band(np.zeros((4, 5)), np.zeros(src_shape))


def test_band_energy_partitions(rng):
    spec = rng.normal(size=(7, 6))
    total = np.sum(spec**2)
    low, high = band_energy(spec, 7, 6)
    assert high == 0.0 and low == pytest.approx(total)
    assert band_energy(spec, 0, 6)[0] == 0.0
    assert band_energy(spec, 4, 0)[0] == 0.0
    low, high = band_energy(spec, 3, 2)
    assert low == pytest.approx(np.sum(spec[:3, :2] ** 2), rel=1e-12)
    assert abs(low + high - total) / total < 1e-9


@pytest.mark.parametrize("cut", [(-1, 2), (8, 2), (2, 7)])
def test_band_energy_range(cut):
    with pytest.raises(ShapeError):
        band_energy(np.zeros((7, 6)), *cut)
