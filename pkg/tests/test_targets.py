import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_difference, random_spd
from mfhmc.targets import (
    DualFidelityTarget,
    LinearGaussianPosterior,
    MatrixFormatError,
    MvnTarget,
    linear_gaussian_log_density_and_grad,
    load_linear_operator,
    mvn_log_density_and_grad,
    save_linear_operator,
)


def test_mvn_origin():
    v, g = mvn_log_density_and_grad(np.zeros(2), np.eye(2))
    assert v == 0.0 and np.array_equal(g, np.zeros(2))


def test_mvn_identity_arithmetic():
    v, g = mvn_log_density_and_grad(np.array([3.0, 4.0]), np.eye(2))
    assert v == -12.5
    assert np.array_equal(g, [-3.0, -4.0])


def test_mvn_dimension_mismatch():
    with pytest.raises(ValueError):
        mvn_log_density_and_grad(np.zeros(3), np.eye(2))


def test_mvn_gradient_finite_difference(rng):
    A = random_spd(rng, 5)
    for _ in range(20):
        x = rng.standard_normal(5)
        _, g = mvn_log_density_and_grad(x, A)
        fd = central_difference(lambda z: mvn_log_density_and_grad(z, A)[0], x)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))


def test_mvn_target_validation():
    with pytest.raises(ValueError, match="symmetric"):
        MvnTarget(np.array([[1.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="positive definite"):
        MvnTarget(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        MvnTarget(np.ones((2, 3)))


def test_mvn_target_immutable(rng):
    t = MvnTarget(random_spd(rng, 3))
    with pytest.raises(ValueError):
        t.precision[0, 0] = 5.0


@settings(deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=4, max_size=4), st.integers(0, 1000))
def test_mvn_even(x, seed):
    t = MvnTarget(random_spd(np.random.default_rng(seed), 4))
    x = np.array(x)
    assert t.log_density(x) == t.log_density(-x)


def test_mvn_covariance(rng):
    A = random_spd(rng, 4)
    np.testing.assert_allclose(MvnTarget(A).covariance() @ A, np.eye(4), atol=1e-10)


def test_linear_gaussian_zero_case():
    v, g = linear_gaussian_log_density_and_grad(np.zeros(1), [[1.0]], [0.0], 1.0, 1.0)
    assert v == 0.0 and g[0] == 0.0


def test_linear_gaussian_scalar_arithmetic():
    v, g = linear_gaussian_log_density_and_grad(np.zeros(1), [[1.0]], [1.0], 1.0, 1.0)
    assert v == -0.5 and g[0] == 1.0


def test_linear_gaussian_fd(rng):
    F = rng.standard_normal((3, 4))
    y = rng.standard_normal(3)
    f = lambda z: linear_gaussian_log_density_and_grad(z, F, y, 0.7, 1.3)[0]
    for _ in range(20):
        x = rng.standard_normal(4)
        _, g = linear_gaussian_log_density_and_grad(x, F, y, 0.7, 1.3)
        fd = central_difference(f, x)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(g))


@pytest.mark.parametrize("sn,sp", [(0.0, 1.0), (1.0, -1.0), (math.nan, 1.0)])
def test_linear_gaussian_bad_sigma(sn, sp):
    with pytest.raises(ValueError):
        linear_gaussian_log_density_and_grad(np.zeros(1), [[1.0]], [0.0], sn, sp)


def test_linear_gaussian_shape_mismatch():
    with pytest.raises(ValueError):
        linear_gaussian_log_density_and_grad(np.zeros(2), np.eye(3), np.zeros(3), 1.0, 1.0)


def test_zero_forward_reduces_to_prior(rng):
    post = LinearGaussianPosterior(np.zeros((3, 5)), rng.standard_normal(3), 0.5, 2.0)
    x = rng.standard_normal(5)
    np.testing.assert_allclose(post.gradient(x), -x / 4.0, rtol=1e-14)


def test_posterior_class_matches_function(rng):
    F = rng.standard_normal((6, 4))
    y = rng.standard_normal(6)
    post = LinearGaussianPosterior(F, y, 0.3, 0.8)
    x0 = rng.standard_normal(4)
    v0, _ = linear_gaussian_log_density_and_grad(x0, F, y, 0.3, 0.8)
    for _ in range(10):
        x = rng.standard_normal(4)
        v, g = linear_gaussian_log_density_and_grad(x, F, y, 0.3, 0.8)
        # equal up to the same additive constant
        assert post.log_density(x) - post.log_density(x0) == pytest.approx(v - v0, rel=1e-10, abs=1e-10)
        np.testing.assert_allclose(post.gradient(x), g, rtol=1e-10, atol=1e-10)


def test_low_rank_matches_dense(rng):
    F = rng.standard_normal((8, 8))
    y = rng.standard_normal(8)
    u, s, vt = np.linalg.svd(F)
    k = 3
    dense = LinearGaussianPosterior((u[:, :k] * s[:k]) @ vt[:k], y, 0.5, 1.0)
    low = LinearGaussianPosterior.low_rank(u[:, :k], s[:k], vt[:k], y, 0.5, 1.0)
    assert low.dim == 8
    for _ in range(10):
        x = rng.standard_normal(8)
        assert low.log_density(x) == pytest.approx(dense.log_density(x), rel=1e-10)
        np.testing.assert_allclose(low.gradient(x), dense.gradient(x), rtol=1e-9, atol=1e-9)
    with pytest.raises(ValueError):
        LinearGaussianPosterior.low_rank(u[:, :k], s[:2], vt[:k], y, 0.5, 1.0)


def test_every_lf_target_passes_fd_validation(rng):
    F = rng.standard_normal((5, 5))
    y = rng.standard_normal(5)
    u, s, vt = np.linalg.svd(F)
    targets = [
        MvnTarget(random_spd(rng, 5)),
        LinearGaussianPosterior(F, y, 0.5, 1.0),
        LinearGaussianPosterior.low_rank(u[:, :2], s[:2], vt[:2], y, 0.5, 1.0),
    ]
    for t in targets:
        d = DualFidelityTarget.from_targets(t, t)
        for _ in range(20):
            x = rng.standard_normal(5)
            g = d.lf_gradient(x)
            fd = central_difference(d.lf_log_density, x)
            assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))


def test_dual_target_dim_mismatch():
    with pytest.raises(ValueError):
        DualFidelityTarget.from_targets(MvnTarget(np.eye(2)), MvnTarget(np.eye(3)))


def test_dual_target_exposes_no_hf_gradient():
    d = DualFidelityTarget.from_targets(MvnTarget(np.eye(2)), MvnTarget(np.eye(2)))
    assert not hasattr(d, "hf_gradient")


# --- matrix files ----------------------------------------------------------------------


def test_load_identity(tmp_path):
    p = tmp_path / "eye.csv"
    p.write_text("2,2\n1,0\n0,1\n")
    assert np.array_equal(load_linear_operator(p), np.eye(2))


def test_ragged_row_named(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("3,2\n1,2\n3\n4,5\n")
    with pytest.raises(MatrixFormatError, match="row 1"):
        load_linear_operator(p)


@pytest.mark.parametrize("text", ["", "2\n1,2\n", "2,2\n1,2\n", "1,2\n1,x\n", "0,2\n"])
def test_malformed_files(tmp_path, text):
    p = tmp_path / "m.csv"
    p.write_text(text)
    with pytest.raises(MatrixFormatError):
        load_linear_operator(p)


def test_round_trip(tmp_path, rng):
    A = rng.standard_normal((10, 10)) * 10.0 ** rng.integers(-8, 8, (10, 10))
    p = tmp_path / "a.csv"
    save_linear_operator(p, A)
    B = load_linear_operator(p)
    assert np.max(np.abs(A - B)) <= 1e-12 * np.max(np.abs(A))
    assert np.array_equal(A, B)


def test_mode_matches_conjugate_mean(rng):
    from mfhmc.forward_models import conjugate_posterior

    F = rng.standard_normal((7, 5))
    y = rng.standard_normal(7)
    mean, _ = conjugate_posterior(F, y, 0.4, 0.9)
    np.testing.assert_allclose(LinearGaussianPosterior(F, y, 0.4, 0.9).mode(), mean, atol=1e-12)
    u, s, vt = np.linalg.svd(F, full_matrices=False)
    Fk = (u[:, :2] * s[:2]) @ vt[:2]
    mean_k, _ = conjugate_posterior(Fk, y, 0.4, 0.9)
    low = LinearGaussianPosterior.low_rank(u[:, :2], s[:2], vt[:2], y, 0.4, 0.9)
    np.testing.assert_allclose(low.mode(), mean_k, atol=1e-12)
    assert np.max(np.abs(low.gradient(low.mode()))) < 1e-9
