import numpy as np
import pytest
from sklearn.base import clone

from nextscale.codec import (
    Codebook,
    MultiScaleResidualQuantizer,
    area_matrix,
    check_ladder,
    dequantize,
    downsample_area,
    encode_multiscale,
    format_ladder,
    mse,
    parse_ladder,
    quantize_nearest,
    reconstruct,
    upsample_u,
)
from nextscale.dse import interpolate
from nextscale.exceptions import DomainError, ShapeError
from oracles import brute_area_downsample

LADDER = ((1, 1), (2, 2), (4, 4), (8, 8))


def scalar_book(*values):
    return Codebook(np.array(values, dtype=float)[:, None])


@pytest.mark.parametrize("value, index", [(0.0, 0), (0.9, 1), (0.5, 0), (0.1, 0), (2.0, 1)])
def test_quantize_scalar(value, index):
    assert quantize_nearest(np.full((1, 1, 1), value), scalar_book(0.0, 1.0))[0, 0] == index


def test_tie_goes_to_lowest_index():
    # 1.0 is equidistant from codewords 1 (0.0 duplicate) and 2 (2.0)
    book = Codebook(np.array([[0.0], [0.0], [2.0], [2.0]]))
    assert quantize_nearest(np.full((2, 2, 1), 1.0), book).tolist() == [[0, 0], [0, 0]]
    assert quantize_nearest(np.full((1, 1, 1), 2.0), book)[0, 0] == 2


def test_quantize_matches_brute_search(rng):
    book = Codebook.generate(16, 3, seed=4)
    r = rng.normal(size=(5, 6, 3))
    tok = quantize_nearest(r, book)
    for i in range(5):
        for j in range(6):
            d = [float(np.sum((r[i, j] - v) ** 2)) for v in book.vectors]
            assert tok[i, j] == d.index(min(d))


def test_quantize_dim_mismatch():
    with pytest.raises(ShapeError):
        quantize_nearest(np.zeros((1, 1, 2)), scalar_book(0.0, 1.0))


def test_dequantize_lookup_and_range():
    book = Codebook.generate(8, 2, seed=1)
    tok = np.array([[0, 3], [3, 7]])
    out = dequantize(tok, book)
    assert out.shape == (2, 2, 2)
    assert np.all(out[0, 0] == 0.0)
    assert np.array_equal(out[0, 1], out[1, 0])
    np.testing.assert_array_equal(out[1, 1], book.vectors[7])
    for bad in (np.array([[8]]), np.array([[-1]])):
        with pytest.raises(DomainError):
            dequantize(bad, book)


def test_quantize_dequantize_is_identity_on_codewords():
    book = Codebook.generate(8, 3, seed=2)
    tok = np.array([[1, 2, 7], [0, 5, 5]])
    assert np.array_equal(quantize_nearest(dequantize(tok, book), book), tok)


# -- codebook ---------------------------------------------------------------------


def test_codebook_zero_word_enforced():
    with pytest.raises(DomainError):
        Codebook(np.array([[1.0], [0.0]]))
    assert np.all(Codebook.from_array(np.ones((3, 2)), force_zero=True).vectors[0] == 0)
    with pytest.raises(DomainError):
        Codebook(np.array([[0.0], [np.nan]]))
    with pytest.raises(ShapeError):
        Codebook(np.zeros(3))


def test_codebook_generation_is_seeded():
    a = Codebook.generate(32, 4, seed=7, scale=0.5)
    b = Codebook.generate(32, 4, seed=7, scale=0.5)
    assert np.array_equal(a.vectors, b.vectors)
    assert not np.array_equal(a.vectors, Codebook.generate(32, 4, seed=8).vectors)
    assert (a.size, a.dim) == (32, 4)
    assert not a.vectors.flags.writeable


def test_codebook_tensor_layouts():
    book = Codebook.generate(5, 3, seed=0)
    t = book.as_tensor()
    assert t.shape == (5, 1, 3)
    assert np.array_equal(Codebook.from_array(t).vectors, book.vectors)
    assert np.array_equal(Codebook.from_array(t.transpose(1, 0, 2)).vectors, book.vectors)
    with pytest.raises(ShapeError):
        Codebook.from_array(np.zeros((2, 2, 2)))


# -- ladder / resampling ------------------------------------------------------------


def test_ladder_round_trip():
    assert parse_ladder("1x1, 2x2,4x4") == ((1, 1), (2, 2), (4, 4))
    assert format_ladder(LADDER) == "1x1,2x2,4x4,8x8"


@pytest.mark.parametrize("ladder, full", [(((2, 2), (1, 1)), None), ((), None), (((1, 1), (4, 4)), (8, 8)), (((0, 1),), None)])
def test_ladder_rejections(ladder, full):
    with pytest.raises(ShapeError):
        check_ladder(ladder, full)


@pytest.mark.parametrize("src, dst", [((8, 8), (2, 4)), ((6, 9), (3, 3)), ((4, 4), (1, 1))])
def test_area_downsample_matches_block_mean(rng, src, dst):
    x = rng.normal(size=src + (2,))
    np.testing.assert_allclose(downsample_area(x, *dst), brute_area_downsample(x, *dst), atol=1e-13)


def test_area_matrix_fractional_rows_are_averages():
    m = area_matrix(5, 2)
    np.testing.assert_allclose(m.sum(axis=1), 1.0)
    np.testing.assert_allclose(m[0], [0.4, 0.4, 0.2, 0, 0])
    with pytest.raises(ShapeError):
        area_matrix(2, 5)


def test_upsample_shares_interpolation_contract(rng):
    z = rng.normal(size=(2, 3, 2))
    for kind in ("nearest", "linear"):
        np.testing.assert_array_equal(upsample_u(z, 4, 6, kind), interpolate(z, 4, 6, kind))


# -- encode / reconstruct ---------------------------------------------------------


def test_constant_codeword_field_single_scale():
    book = Codebook.generate(6, 3, seed=9)
    f = np.broadcast_to(book.vectors[4], (1, 1, 3)).copy()
    tokens = encode_multiscale(f, ((1, 1),), book)
    assert tokens[0].tolist() == [[4]]
    assert mse(reconstruct(tokens, ((1, 1),), book), f) == 0.0


def test_zero_field_gives_zero_tokens():
    book = Codebook.generate(32, 4, seed=0)
    f = np.zeros((8, 8, 4))
    tokens = encode_multiscale(f, LADDER, book)
    assert all(np.all(t == 0) for t in tokens)
    assert np.all(reconstruct(tokens, LADDER, book) == 0.0)


def test_single_full_scale_is_exact_when_values_are_codewords(rng):
    book = Codebook.generate(10, 2, seed=3)
    tok = rng.integers(0, 10, size=(4, 5))
    f = book.vectors[tok]
    tokens = encode_multiscale(f, ((4, 5),), book)
    assert np.array_equal(reconstruct(tokens, ((4, 5),), book), f)


@pytest.mark.parametrize("kind", ["nearest", "linear"])
def test_decoder_agrees_with_encoder_accumulator(rng, kind):
    book = Codebook.generate(32, 4, seed=1, scale=0.5)
    f = rng.normal(size=(8, 8, 4))
    tokens, steps = encode_multiscale(f, LADDER, book, kind, return_steps=True)
    f_hat, rsteps = reconstruct(tokens, LADDER, book, kind, return_steps=True)
    assert np.array_equal(f_hat, steps[-1])
    assert all(np.array_equal(a, b) for a, b in zip(steps, rsteps))
    assert mse(f, f_hat) <= mse(f, 0 * f)
    assert [t.shape for t in tokens] == list(LADDER)


def test_monotone_refinement_over_random_trials():
    for trial in range(120):
        rng = np.random.default_rng(trial)
        book = Codebook.generate(32, 4, seed=trial, scale=float(rng.uniform(0.2, 2.0)))
        f = rng.normal(size=(8, 8, 4)) * rng.uniform(0.1, 3.0)
        _, steps = encode_multiscale(f, LADDER, book, "nearest", return_steps=True)
        errs = [mse(f, 0 * f)] + [mse(f, s) for s in steps]
        assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:])), (trial, errs)


def test_encoding_is_deterministic(rng):
    book = Codebook.generate(16, 2, seed=5)
    f = rng.normal(size=(4, 4, 2))
    a = encode_multiscale(f, ((1, 1), (2, 2), (4, 4)), book)
    b = encode_multiscale(f.copy(), ((1, 1), (2, 2), (4, 4)), book)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


@pytest.mark.parametrize("kind", ["nearest", "linear"])
def test_reconstruction_linear_in_codebook(rng, kind):
    book = Codebook.generate(16, 3, seed=2)
    delta = Codebook.from_array(rng.normal(size=(16, 3)), force_zero=True)
    moved = Codebook(book.vectors + delta.vectors)
    f = rng.normal(size=(8, 8, 3))
    tokens = encode_multiscale(f, LADDER, book, kind)
    diff = reconstruct(tokens, LADDER, moved, kind) - reconstruct(tokens, LADDER, book, kind)
    np.testing.assert_allclose(diff, reconstruct(tokens, LADDER, delta, kind), atol=1e-12)
    # each scale moves every location by a convex mix of codeword shifts
    bound = np.max(np.linalg.norm(delta.vectors, axis=1))
    _, per = reconstruct(tokens, LADDER, delta, kind, return_steps=True)
    contributions = np.diff(np.stack([0 * per[0]] + per), axis=0)
    assert np.max(np.linalg.norm(contributions, axis=-1)) <= bound + 1e-12


def test_shape_errors():
    book = Codebook.generate(4, 2, seed=0)
    with pytest.raises(ShapeError):
        encode_multiscale(np.zeros((4, 4, 3)), ((4, 4),), book)
    with pytest.raises(ShapeError):
        encode_multiscale(np.zeros((4, 4, 2)), ((2, 2),), book)
    with pytest.raises(ShapeError):
        reconstruct([np.zeros((1, 1), int)], ((1, 1), (2, 2)), book)
    with pytest.raises(ShapeError):
        reconstruct([np.zeros((2, 1), int)], ((1, 1),), book)
    with pytest.raises(ShapeError):
        encode_multiscale(np.zeros((2, 2, 2)), ((2, 2),), book, "cubic")


def test_estimator_round_trip(rng):
    est = MultiScaleResidualQuantizer(ladder="1x1,2x2,4x4", codebook_size=8, random_state=3)
    f = rng.normal(size=(4, 4, 2))
    tokens = est.fit_transform(f)
    assert est.codebook_.size == 8 and est.n_features_in_ == 2
    np.testing.assert_array_equal(est.inverse_transform(tokens), reconstruct(tokens, est.ladder_, est.codebook_))
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(ShapeError):
        MultiScaleResidualQuantizer(ladder="1x1,2x2").fit(f)
    supplied = MultiScaleResidualQuantizer(ladder=[(4, 4)], codebook=est.codebook_.vectors).fit(f)
    assert np.array_equal(supplied.codebook_.vectors, est.codebook_.vectors)
