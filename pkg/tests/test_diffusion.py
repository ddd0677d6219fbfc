# tests/test_diffusion.py
# Testuje harmonogram β/ᾱ i arytmetykę dyfuzji (forward, ε z ŷ_0, krok DDIM).
import numpy as np
import pandas as pd
import pytest

from diffpose_animal.diffusion import (
    DiffusionSchedule,
    ddim_step,
    dump_schedule_csv,
    eps_from_x0,
    forward_sample,
    make_schedule,
    x0_from_eps,
)
from diffpose_animal.errors import ConfigError, ShapeError, SingularityError
from diffpose_animal.heatmap_codec import HeatmapStack
from diffpose_animal.numerics import Rng


def test_schedule_small_cases():
    s = make_schedule(2, 0.1, 0.2)
    np.testing.assert_allclose(s.alpha, [0.9, 0.8], atol=1e-15)
    np.testing.assert_allclose(s.alpha_bar, [0.9, 0.72], atol=1e-15)
    one = make_schedule(1, 0.05, 0.05)
    assert one.alpha_bar[0] == pytest.approx(0.95, abs=1e-15)
    assert s.abar(0) == 1.0


def test_schedule_product_oracle():
    s = make_schedule(100, 1e-4, 0.02)
    prod = 1.0
    for k in range(100):
        prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * k / 99)
    assert s.alpha_bar[-1] == pytest.approx(prod, abs=1e-14)
    assert np.all(np.diff(s.alpha_bar) < 0)


def test_schedule_rejects_bad_config():
    with pytest.raises(ConfigError):
        make_schedule(0)
    with pytest.raises(ConfigError):
        make_schedule(10, 0.02, 1e-4)
    with pytest.raises(ConfigError):
        make_schedule(10, kind="cosine")


def test_forward_sample_cases():
    s = make_schedule(2, 0.1, 0.2)
    y0 = np.ones((1, 2, 2))
    np.testing.assert_allclose(forward_sample(y0, 2, np.zeros_like(y0), s), np.sqrt(0.72) * y0)
    out = forward_sample(y0, 2, np.ones_like(y0), s)
    assert out[0, 0, 0] == pytest.approx(np.sqrt(0.72) + np.sqrt(0.28), abs=1e-12)
    assert out[0, 0, 0] == pytest.approx(1.37772, abs=1e-5)
    tiny = make_schedule(1, 1e-12, 1e-12)
    np.testing.assert_allclose(forward_sample(y0, 1, np.ones_like(y0), tiny), y0, atol=1e-5)


def test_forward_sample_preserves_heatmap_stack_and_checks_t():
    s = make_schedule(4)
    hm = HeatmapStack(np.ones((2, 3, 3)), 4)
    out = forward_sample(hm, 1, np.zeros((2, 3, 3)), s)
    assert isinstance(out, HeatmapStack) and out.stride == 4
    with pytest.raises(ConfigError):
        forward_sample(hm, 0, np.zeros((2, 3, 3)), s)
    with pytest.raises(ConfigError):
        forward_sample(hm, 5, np.zeros((2, 3, 3)), s)
    with pytest.raises(ShapeError):
        forward_sample(hm, 1, np.zeros((2, 3, 4)), s)


def test_eps_from_x0_inverse_and_hand_case():
    s = make_schedule(2, 0.1, 0.2)
    rng = Rng(5, "test/eps")
    y0, eps = rng.normal((3, 4, 4)), rng.normal((3, 4, 4))
    yt = forward_sample(y0, 2, eps, s)
    np.testing.assert_allclose(eps_from_x0(yt, y0, 2, s).data, eps, atol=1e-12)
    np.testing.assert_allclose(x0_from_eps(yt, eps, 2, s), y0, atol=1e-12)

    got = eps_from_x0(yt, yt, 2, s).data
    np.testing.assert_allclose(got, yt * (1 - np.sqrt(0.72)) / np.sqrt(0.28), atol=1e-12)
    z = np.zeros((1, 2, 2))
    assert not eps_from_x0(z, z, 1, s).data.any()


def test_eps_from_x0_singularity():
    s = DiffusionSchedule(1, np.array([0.0]), np.array([1.0]), np.array([1.0]))
    with pytest.raises(SingularityError):
        eps_from_x0(np.ones(2), np.ones(2), 1, s)


def test_ddim_step_boundary_and_identity():
    s = make_schedule(10)
    rng = Rng(6, "test/ddim")
    y0, eps = rng.normal((2, 4, 4)), rng.normal((2, 4, 4))
    yt = forward_sample(y0, 1, eps, s)
    np.testing.assert_array_equal(ddim_step(yt, y0 * 0.5, 1, s), y0 * 0.5)

    yt = forward_sample(y0, 7, eps, s)
    np.testing.assert_allclose(ddim_step(yt, y0, 7, s), forward_sample(y0, 6, eps, s), atol=1e-12)


def test_ddim_recursion_with_exact_x0_returns_y0():
    s = make_schedule(100)
    rng = Rng(8, "test/ddim-chain")
    y0 = rng.normal((3, 8, 8))
    y = rng.normal((3, 8, 8))
    eps = eps_from_x0(y, y0, s.T, s)
    for t in range(s.T, 0, -1):
        y = ddim_step(y, y0, t, s)
        if t > 1:
            np.testing.assert_allclose(y, forward_sample(y0, t - 1, eps, s), atol=1e-10)
    np.testing.assert_allclose(y, y0, atol=1e-10)


def test_ddim_step_fixed_point():
    ab = np.array([0.5, 0.5])
    s = DiffusionSchedule(2, 1.0 - np.array([0.5, 1.0]), np.array([0.5, 1.0]), ab)
    y = Rng(7, "test/fixed").normal((1, 3, 3))
    np.testing.assert_allclose(ddim_step(y, y, 2, s), y, atol=1e-12)


def test_dump_schedule_csv(tmp_path):
    s = make_schedule(5)
    p = dump_schedule_csv(s, tmp_path / "sched.csv")
    df = pd.read_csv(p, float_precision="round_trip")
    assert list(df.columns) == ["t", "beta", "alpha", "alpha_bar"]
    np.testing.assert_array_equal(df["alpha_bar"].to_numpy(), s.alpha_bar)
