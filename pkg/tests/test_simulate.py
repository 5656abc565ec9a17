import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from liargrid import (
    ConfigurationError,
    KernelField,
    NoiseSpec,
    StabilityError,
    kernel_distance,
    operator_norm,
    random_stable_kernels,
    simulate_liar,
)
from liargrid.grid import linear_to_site
from liargrid.neighborhoods import box_neighborhood


def _self_only_kernels(shape, a, order=1):
    n = int(np.prod(shape))
    nbs = [box_neighborhood(linear_to_site(i, shape), shape, 0) for i in range(n)]
    coeffs = [np.full((order, 1), a) for _ in range(n)]
    return KernelField(shape, order, nbs, coeffs)


class TestOperatorNorm:
    def test_zero_kernels(self):
        kern = _self_only_kernels((3, 3), 0.0)
        assert operator_norm(kern) == 0.0

    def test_self_half_is_half(self):
        kern = _self_only_kernels((4, 5), 0.5)
        assert_allclose(operator_norm(kern), 0.5, rtol=1e-10)

    def test_matches_dense_svd_oracle(self):
        shape = (3, 3)
        kern = random_stable_kernels(shape, 1, target_norm=0.7, seed=2)
        dense = kern.operators(dense=True)[0]
        want = np.linalg.svd(np.asarray(dense), compute_uv=False)[0]
        assert_allclose(operator_norm(kern), want, rtol=1e-6)

    def test_multi_lag_is_sum_of_lag_norms(self):
        shape = (3, 3)
        kern = random_stable_kernels(shape, 1, order=2, target_norm=0.6, seed=5)
        parts = [
            np.linalg.svd(np.asarray(op), compute_uv=False)[0]
            for op in kern.operators(dense=True)
        ]
        assert_allclose(operator_norm(kern), sum(parts), rtol=1e-6)


class TestRandomStableKernels:
    def test_target_norm_hit(self):
        kern = random_stable_kernels((6, 6), 2, target_norm=0.8, seed=9)
        assert abs(operator_norm(kern) - 0.8) <= 1e-6

    def test_same_seed_identical(self):
        a = random_stable_kernels((5, 5), 1, target_norm=0.5, seed=31)
        b = random_stable_kernels((5, 5), 1, target_norm=0.5, seed=31)
        assert kernel_distance(a, b) == 0.0

    def test_different_seed_differs(self):
        a = random_stable_kernels((5, 5), 1, target_norm=0.5, seed=31)
        b = random_stable_kernels((5, 5), 1, target_norm=0.5, seed=32)
        assert kernel_distance(a, b) > 0.0

    def test_radius_zero_supports(self):
        kern = random_stable_kernels((4, 4), 0, target_norm=0.5, seed=1)
        for nb in kern.neighborhoods:
            assert nb.size == 1

    def test_tensor_radii(self):
        kern = random_stable_kernels((3, 3, 4), (0, 1, 1), target_norm=0.6, seed=4)
        center = kern.neighborhoods[kern.n_sites // 2 + 1]
        assert center.size <= 9

    def test_bad_target(self):
        with pytest.raises(ConfigurationError):
            random_stable_kernels((3, 3), 1, target_norm=1.0, seed=0)


class TestSimulate:
    def test_zero_kernels_no_noise(self):
        kern = _self_only_kernels((3, 3), 0.0)
        s = simulate_liar(kern, 10, NoiseSpec(sigma=0.0, seed=0), burn_in=5)
        assert_array_equal(s.values, 0.0)

    def test_stable_kernels_no_noise_fixed_point(self):
        kern = random_stable_kernels((4, 4), 1, target_norm=0.8, seed=3)
        s = simulate_liar(kern, 8, NoiseSpec(sigma=0.0, seed=0), burn_in=20)
        assert_array_equal(s.values, 0.0)

    def test_scalar_ar1_autocorrelation(self):
        kern = _self_only_kernels((1, 1), 0.9)
        s = simulate_liar(kern, 10_000, NoiseSpec(sigma=1.0, seed=77))
        x = s.values[:, 0]
        r1 = np.corrcoef(x[:-1], x[1:])[0, 1]
        assert abs(r1 - 0.9) < 0.05

    def test_uniform_noise_variance(self):
        kern = _self_only_kernels((2, 2), 0.0)
        s = simulate_liar(
            kern, 40_000, NoiseSpec(kind="iid_uniform", sigma=0.7, seed=5),
            burn_in=0,
        )
        assert abs(s.values.std() - 0.7) < 0.02
        # bounded support: |e| <= sigma * sqrt(3)
        assert np.abs(s.values).max() <= 0.7 * np.sqrt(3) + 1e-12

    def test_deterministic_repeat(self):
        kern = random_stable_kernels((5, 5), 1, target_norm=0.7, seed=8)
        a = simulate_liar(kern, 50, NoiseSpec(sigma=1.0, seed=21))
        b = simulate_liar(kern, 50, NoiseSpec(sigma=1.0, seed=21))
        assert_array_equal(a.values, b.values)

    def test_prefix_property(self):
        kern = random_stable_kernels((5, 5), 1, target_norm=0.7, seed=8)
        short = simulate_liar(kern, 50, NoiseSpec(sigma=1.0, seed=21))
        long = simulate_liar(kern, 90, NoiseSpec(sigma=1.0, seed=21))
        assert_array_equal(long.values[:50], short.values)

    def test_refuses_unstable(self):
        kern = _self_only_kernels((3, 3), 1.01)
        with pytest.raises(StabilityError, match="1.01"):
            simulate_liar(kern, 10, NoiseSpec(sigma=1.0, seed=0))

    def test_sample_mean_near_zero(self):
        # mean of each entry within 5 long-run standard errors of 0;
        # the long-run variance of the sample mean of a stable VAR(1)
        # is diag((I-M)^-1 Sigma (I-M)^-T) / T
        shape = (4, 4)
        kern = random_stable_kernels(shape, 1, target_norm=0.8, seed=13)
        t = 10_000
        s = simulate_liar(kern, t, NoiseSpec(sigma=1.0, seed=14))
        m = np.asarray(kern.operators(dense=True)[0])
        resolvent = np.linalg.inv(np.eye(m.shape[0]) - m)
        lrv = resolvent @ resolvent.T
        se = np.sqrt(np.diag(lrv) / t)
        assert np.all(np.abs(s.values.mean(axis=0)) < 5 * se)

    def test_multi_lag_recursion_matches_manual(self):
        from liargrid import rng
        from liargrid.simulate import _CTX_NOISE

        shape = (3, 3)
        kern = random_stable_kernels(shape, 1, order=2, target_norm=0.6, seed=6)
        s = simulate_liar(kern, 30, NoiseSpec(sigma=1.3, seed=7), burn_in=0)
        ops = [np.asarray(o) for o in kern.operators(dense=True)]
        site_keys = rng.derive_key(7, [_CTX_NOISE, np.arange(9)])
        noise = 1.3 * rng.frame_gaussians(site_keys, np.arange(30))
        x_prev2 = np.zeros(9)
        x_prev1 = np.zeros(9)
        for t in range(30):
            x = ops[0] @ x_prev1 + ops[1] @ x_prev2 + noise[t]
            assert_allclose(s.values[t], x, rtol=0, atol=1e-12)
            x_prev2, x_prev1 = x_prev1, x


class TestKernelField:
    def test_json_round_trip(self, tmp_path):
        kern = random_stable_kernels((4, 5), (1, 2), order=2,
                                     target_norm=0.7, seed=19)
        path = tmp_path / "k.json"
        kern.save_json(path)
        back = KernelField.load_json(path)
        assert back.shape == kern.shape
        assert back.order == kern.order
        assert kernel_distance(kern, back) == 0.0

    def test_scale(self):
        kern = random_stable_kernels((3, 3), 1, target_norm=0.8, seed=2)
        half = kern.scale(0.5)
        assert_allclose(operator_norm(half), 0.4, rtol=1e-6)

    def test_kernel_distance_union_footprint(self):
        a = _self_only_kernels((2, 2), 0.5)
        b = random_stable_kernels((2, 2), 1, target_norm=0.5, seed=3)
        d = kernel_distance(a, b)
        assert d > 0
        assert_allclose(d, kernel_distance(b, a), rtol=1e-15)

    def test_coeff_length_validated(self):
        nb = box_neighborhood((0, 0), (2, 2), 1)
        with pytest.raises(ConfigurationError):
            KernelField((2, 2), 1, [nb] * 4, [np.ones((1, 3))] * 4)
