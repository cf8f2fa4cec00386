import math

import numpy as np
import pytest

from cmvsim.errors import InvalidParameterError, UnsupportedDimensionError
from cmvsim.kernels import (
    KernelSpec,
    ScaledKernel,
    check_assumption_K,
    epanechnikov,
    eval_scaled,
    gaussian,
    get_kernel,
    scaled_values,
    second_moment,
    uniform_ball,
)

ALL_KERNELS = [gaussian(1), epanechnikov(1), uniform_ball(1)]


def trapz_1d(f, lo, hi, n=40_001):
    x = np.linspace(lo, hi, n)
    w = np.full(n, x[1] - x[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return float(np.dot(w, f(x)))


class TestEvalScaled:
    def test_gaussian_origin_h1(self):
        k = ScaledKernel(gaussian(1), 1.0)
        assert eval_scaled(k, [0.0]) == pytest.approx(1.0 / math.sqrt(2 * math.pi), abs=1e-12)

    def test_gaussian_origin_h_quarter(self):
        k = ScaledKernel(gaussian(1), 0.25)
        assert eval_scaled(k, [0.0]) == pytest.approx(2.0 / math.sqrt(2 * math.pi), abs=1e-12)

    def test_epanechnikov_outside_support(self):
        k = ScaledKernel(epanechnikov(1), 1.0)
        assert eval_scaled(k, [2.0]) == 0.0

    def test_scaled_second_moment_is_h(self):
        # quadrature oracle on a fine grid: int K_h(z) z^2 dz = h
        h = 0.04
        k = gaussian(1)
        val = trapz_1d(lambda x: scaled_values(k, h, x[:, None]) * x * x, -12, 12)
        assert val == pytest.approx(h, abs=1e-6)

    def test_nonpositive_h_rejected(self):
        with pytest.raises(InvalidParameterError):
            ScaledKernel(gaussian(1), 0.0)
        with pytest.raises(InvalidParameterError):
            scaled_values(gaussian(1), -1.0, np.zeros((1, 1)))

    def test_scaling_identity_pointwise(self, rng):
        for kernel in ALL_KERNELS:
            h = 0.37
            z = rng.standard_normal((64, 1))
            expect = h ** -0.5 * kernel.density(z / math.sqrt(h))
            got = scaled_values(kernel, h, z)
            assert np.array_equal(got, expect)

    def test_compact_support_exact_zero(self, rng):
        for kernel in (epanechnikov(1), uniform_ball(1)):
            h = 0.09
            radius = kernel.support_radius * math.sqrt(h)
            z = radius + np.abs(rng.standard_normal((100, 1))) + 1e-9
            assert np.all(scaled_values(kernel, h, z) == 0.0)


class TestAssumptionChecks:
    def test_gaussian_passes_with_root_two_exp_moment(self):
        rep = check_assumption_K(gaussian(1))
        assert rep.passed
        assert rep.mass == pytest.approx(1.0, abs=1e-8)
        assert rep.exp_moment == pytest.approx(math.sqrt(2.0), abs=1e-6)

    def test_epanechnikov_passes_finite_exp_moment(self):
        rep = check_assumption_K(epanechnikov(1))
        assert rep.passed
        assert math.isfinite(rep.exp_moment)

    def test_uniform_ball_passes(self):
        rep = check_assumption_K(uniform_ball(1))
        assert rep.passed

    def test_shifted_density_fails_mean_check(self):
        shifted = KernelSpec(
            id="shifted",
            dim=1,
            density=lambda z: np.exp(-0.5 * np.sum((z - 1.0) ** 2, axis=-1))
            / math.sqrt(2 * math.pi),
            support_radius=math.inf,
            sup_value=1.0 / math.sqrt(2 * math.pi),
        )
        rep = check_assumption_K(shifted)
        assert rep.mass_ok
        assert not rep.mean_ok
        assert rep.mean[0] == pytest.approx(1.0, abs=1e-6)
        assert not rep.symmetric

    def test_dimension_guard(self):
        with pytest.raises(UnsupportedDimensionError):
            check_assumption_K(gaussian(3))
        with pytest.raises(UnsupportedDimensionError):
            second_moment(gaussian(3))

    def test_two_dimensional_mass(self):
        rep = check_assumption_K(gaussian(2), points=3001)
        assert rep.passed
        assert rep.mass == pytest.approx(1.0, abs=1e-6)


class TestSecondMoment:
    def test_gaussian_unit(self):
        assert second_moment(gaussian(1)) == pytest.approx(1.0, abs=1e-6)

    def test_epanechnikov_one_fifth(self):
        # exact algebra: (3/4) int (1 - z^2) z^2 dz over [-1, 1] = 1/5
        assert second_moment(epanechnikov(1)) == pytest.approx(0.2, abs=1e-6)

    def test_uniform_one_third(self):
        assert second_moment(uniform_ball(1)) == pytest.approx(1.0 / 3.0, abs=1e-6)

    def test_scaled_family_second_moment(self):
        # invariant: second moment of K_h is h times the base one; integrate
        # compact kernels on their scaled support so the kink sits on a node
        for kernel in ALL_KERNELS:
            base = second_moment(kernel)
            for h in (1.0, 0.1):
                lim = kernel.support_radius * math.sqrt(h) if kernel.compact else 12.0
                val = trapz_1d(
                    lambda x: scaled_values(kernel, h, x[:, None]) * x * x, -lim, lim
                )
                assert val == pytest.approx(h * base, abs=1e-6)


class TestFamilyInvariants:
    @pytest.mark.parametrize("h", [1.0, 0.1, 0.01])
    def test_mass_and_mean_of_scaled_family(self, h):
        # d=1 grid of >= 10^4 points per the checker convention; compact
        # kernels integrate on their scaled support (kink on a node)
        for kernel in ALL_KERNELS:
            lim = kernel.support_radius * math.sqrt(h) if kernel.compact else 12.0
            mass = trapz_1d(lambda x: scaled_values(kernel, h, x[:, None]), -lim, lim)
            mean = trapz_1d(lambda x: scaled_values(kernel, h, x[:, None]) * x, -lim, lim)
            assert mass == pytest.approx(1.0, abs=1e-6)
            assert abs(mean) < 1e-6

    def test_get_kernel_registry(self):
        assert get_kernel("gaussian", 2).dim == 2
        with pytest.raises(InvalidParameterError):
            get_kernel("triangle", 1)
