# tests/test_model.py
# Testuje denoiser: enkoder obrazu, fuzję z F_g, cross-attention, głowicę keypointów i inicjalizację θ.
import numpy as np
import pytest

from diffpose_animal.cfg import ModelConfig
from diffpose_animal.errors import CheckpointMismatchError, ConfigError, ShapeError
from diffpose_animal.model import (
    PARAM_ORDER,
    DenoiserParams,
    cross_attend,
    decode_keypoints,
    encode_image,
    forward,
    fuse_condition,
    init_params,
)
from diffpose_animal.numerics import Rng, Tensor, gradcheck, ops

SMALL = ModelConfig(C=4, d=8, heads=2, t_dim=4, N=3, T=10, image_h=8, image_w=8, stride=4)


def _unit_rows(rng, n, d):
    v = rng.normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_encoder_shape_and_zero_input():
    cfg = ModelConfig(C=32, d=16, heads=4, N=17, image_h=64, image_w=64, stride=4)
    params = init_params(cfg, seed=0)
    F = encode_image(np.zeros((3, 64, 64)), params)
    assert F.shape == (32, 16, 16)
    assert not F.data.any()


def test_encoder_rejects_wrong_image():
    with pytest.raises(ShapeError):
        encode_image(np.zeros((3, 16, 16)), init_params(SMALL, 0))


def test_encoder_gradcheck():
    rng = Rng(21, "test/enc")
    params = init_params(SMALL, 1)
    x = rng.normal((3, 8, 8))
    target = rng.normal((SMALL.C, 2, 2))
    enc = {n: params[n] for n in PARAM_ORDER if n.startswith("enc_")}

    def fn():
        return ops.sum_all(ops.square(ops.sub_const(encode_image(x, params), target)))

    assert gradcheck(fn, enc, points=20, h=1e-5, rng=rng).ok(1e-4)


def test_fuse_condition_channels():
    F = Tensor(np.ones((4, 2, 2)))
    out = fuse_condition(F, np.zeros(8))
    assert out.shape == (12, 2, 2)
    assert not out.data[4:].any()
    g = np.arange(8.0)
    np.testing.assert_array_equal(fuse_condition(F, g).data[4:, 1, 0], g)


def test_fuse_condition_rejects_prior_width_mismatch():
    F = Tensor(np.ones((4, 2, 2)))
    with pytest.raises(ShapeError, match=r"d=6.*d=8"):
        fuse_condition(F, np.zeros(6), d=8)
    params = init_params(SMALL, 0)
    with pytest.raises(ShapeError, match="fuse_condition"):
        forward(np.zeros((3, 8, 8)), np.zeros((3, 2, 2)), 1, np.zeros(6), np.zeros((3, 8)), params)


def test_cross_attend_single_cell_weight_is_one():
    cfg = ModelConfig(C=4, d=8, heads=2, t_dim=4, N=3, T=10, image_h=8, image_w=8, stride=8)
    params = init_params(cfg, 2)
    rng = Rng(22, "test/ca1")
    Z = rng.normal((12, 1, 1))
    out, weights = cross_attend(rng.normal((3, 1, 1)), Tensor(Z), 3, params, return_weights=True)
    for A in weights:
        assert A.data.shape == (1, 1) and A.data[0, 0] == 1.0
    V = Z.reshape(1, 12) @ params["attn_wv"].data
    ref = V @ params["attn_wo"].data + params["attn_bo"].data
    np.testing.assert_allclose(out.data.reshape(-1), ref.reshape(-1), atol=1e-12)


def test_cross_attend_uniform_keys_ignore_query():
    params = init_params(SMALL, 3)
    rng = Rng(23, "test/ca2")
    col = rng.normal(12)
    F_fuse = Tensor(np.broadcast_to(col[:, None, None], (12, 2, 2)))
    a = cross_attend(rng.normal((3, 2, 2)), F_fuse, 4, params).data
    b = cross_attend(rng.normal((3, 2, 2)) * 5.0, F_fuse, 4, params).data
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_cross_attend_weights_sum_to_one_and_t_range():
    params = init_params(SMALL, 4)
    rng = Rng(24, "test/ca3")
    F_fuse = Tensor(rng.normal((12, 2, 2)))
    _, weights = cross_attend(rng.normal((3, 2, 2)), F_fuse, 10, params, return_weights=True)
    for A in weights:
        np.testing.assert_allclose(A.data.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ConfigError):
        cross_attend(rng.normal((3, 2, 2)), F_fuse, 0, params)
    with pytest.raises(ConfigError):
        cross_attend(rng.normal((3, 2, 2)), F_fuse, 11, params)


def test_decode_keypoints_prior_rows():
    params = init_params(SMALL, 5)
    rng = Rng(25, "test/head")
    F_CA, F = Tensor(rng.normal((4, 2, 2))), Tensor(rng.normal((4, 2, 2)))
    Fl = _unit_rows(rng, 3, 8)

    zero = Fl.copy()
    zero[1] = 0.0
    out = decode_keypoints(F_CA, F, zero, params).data
    np.testing.assert_array_equal(out[1], np.full((2, 2), params["head_bias"].data[1]))

    same = Fl.copy()
    same[2] = same[0]
    out = decode_keypoints(F_CA, F, same, params).data
    np.testing.assert_allclose(out[0], out[2], atol=0)

    perm = np.array([2, 0, 1])
    base = decode_keypoints(F_CA, F, Fl, params).data
    np.testing.assert_allclose(decode_keypoints(F_CA, F, Fl[perm], params).data, base[perm], atol=1e-12)


def test_full_forward_gradcheck():
    rng = Rng(26, "test/forward")
    params = init_params(SMALL, 6)
    x = rng.normal((3, 8, 8))
    y_t = rng.normal((3, 2, 2))
    Fg, Fl = _unit_rows(rng, 1, 8)[0], _unit_rows(rng, 3, 8)
    target = rng.normal((3, 2, 2))

    def fn():
        return ops.mean_all(ops.square(ops.sub_const(forward(x, y_t, 5, Fg, Fl, params), target)))

    rep = gradcheck(fn, dict(params), points=20, h=1e-5, rng=rng)
    assert rep.ok(1e-4), rep.max_rel_error


def test_init_params_determinism_and_shapes():
    a, b, c = init_params(SMALL, 0), init_params(SMALL, 0), init_params(SMALL, 1)
    for name in PARAM_ORDER:
        assert a[name].data.tobytes() == b[name].data.tobytes()
    assert not np.array_equal(a["attn_wq"].data, c["attn_wq"].data)
    np.testing.assert_array_equal(a["head_scale"].data, np.ones(3))
    assert not a["enc_b1"].data.any()
    with pytest.raises(CheckpointMismatchError):
        DenoiserParams.from_arrays(SMALL.model_copy(update={"N": 4}), a.arrays())
