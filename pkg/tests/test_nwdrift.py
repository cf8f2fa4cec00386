import math

import numpy as np
import pytest

from cmvsim.errors import InvalidParameterError, StrategyUnsupportedError
from cmvsim.kernels import epanechnikov, gaussian, scaled_values, uniform_ball
from cmvsim.models import Coefficient, ModelSpec, preset, standard_normal_law
from cmvsim.nwdrift import (
    DriftParams,
    WeightedMeasure,
    block_denominators,
    floor_hit_rate,
    nw_block,
    particle_drift,
)
from cmvsim.simulate import ParticleEnsemble


def gauss_params(h=1.0, eps=1e-6):
    return DriftParams(h=h, epsilon=eps, kernel=gaussian(1))


def mixed_mode_model():
    """m=2, d=1 test model exercising every coefficient mode."""
    b = {
        (0, 0): Coefficient(fn=np.tanh, mode="query", bound=1.0),
        (0, 1): Coefficient(fn=lambda y: np.tanh(y[..., 0, :]), mode="atoms", bound=1.0),
        (1, 0): Coefficient(
            fn=lambda xj, y: np.tanh(xj - y[..., 0, :]), mode="both", bound=1.0
        ),
    }
    return ModelSpec(
        name="mixed", m=2, d=1, b=b, V=(None, lambda x: 0.5 * np.tanh(x[:, 0, :])),
        sigma=1.0, mu0=standard_normal_law(2), bounds={"b": 1.0, "V": 0.5},
    )


class TestWeightedMeasure:
    def test_uniform_default(self):
        nu = WeightedMeasure.empirical(np.zeros((4, 2, 1)))
        assert np.allclose(nu.weights, 0.25)

    def test_bad_weights(self):
        atoms = np.zeros((2, 1, 1))
        with pytest.raises(InvalidParameterError):
            WeightedMeasure(atoms, np.array([0.7, 0.4]))
        with pytest.raises(InvalidParameterError):
            WeightedMeasure(atoms, np.array([-0.1, 1.1]))
        with pytest.raises(InvalidParameterError):
            WeightedMeasure(np.zeros((0, 1, 1)))


class TestNwBlock:
    def test_single_atom_returns_coefficient_exactly(self):
        # one-point measure at the query: the kernel value cancels
        x = np.array([[[0.4], [-0.7]]])
        nu = WeightedMeasure.empirical(x)
        coeff = Coefficient(fn=lambda xj, y: np.tanh(xj + y[..., 0, :]),
                            mode="both", bound=1.0)
        got = nw_block(x[0, 0], 0, coeff, nu, gauss_params())
        assert got[0] == pytest.approx(math.tanh(0.4 - 0.7), abs=1e-15)

    def test_constant_coefficient_floor_shrinkage(self):
        c = 2.5
        coeff = Coefficient(fn=lambda y: np.full(y.shape[:-2] + (1,), c),
                            mode="atoms", bound=c)
        atoms = np.array([[[0.0], [0.0]], [[5.0], [0.0]]])
        nu = WeightedMeasure.empirical(atoms)
        # wide floor: average kernel mass D as denominator -> exactly c
        params = gauss_params(eps=1e-12)
        assert nw_block([0.0], 0, coeff, nu, params)[0] == pytest.approx(c, rel=1e-12)
        # floor above D: output shrinks to c * D / eps
        kv = scaled_values(gaussian(1), 1.0, np.array([[0.0], [-5.0]]))
        D = kv.mean()
        params = gauss_params(eps=10 * D)
        assert nw_block([0.0], 0, coeff, nu, params)[0] == pytest.approx(
            c * D / (10 * D), rel=1e-12
        )

    def test_two_atom_hand_case(self):
        # atoms {(0, 1), (2, -1)}, coefficient reads the other block, query 0
        atoms = np.array([[[0.0], [1.0]], [[2.0], [-1.0]]])
        nu = WeightedMeasure.empirical(atoms)
        coeff = Coefficient(fn=lambda y: y[..., 0, :], mode="atoms", bound=1.0)
        k0 = math.exp(0.0) / math.sqrt(2 * math.pi)
        k2 = math.exp(-2.0) / math.sqrt(2 * math.pi)
        num = 0.5 * (k0 - k2)
        den = 0.5 * (k0 + k2)
        got = nw_block([0.0], 0, coeff, nu, gauss_params())
        assert got[0] == pytest.approx(num / den, rel=1e-14)
        assert got[0] == pytest.approx(0.7615941559557649, abs=1e-12)

    def test_boundedness_invariant(self, rng):
        # |nw| <= ||b||_inf whatever the floor
        coeff = Coefficient(fn=lambda xj, y: np.tanh(3 * xj * y[..., 0, :]),
                            mode="both", bound=1.0)
        for eps in (1e-12, 1e-3, 0.3, 10.0):
            params = gauss_params(h=0.2, eps=eps)
            atoms = rng.standard_normal((50, 2, 1))
            nu = WeightedMeasure.empirical(atoms)
            for _ in range(20):
                val = nw_block(rng.standard_normal(1), 0, coeff, nu, params)
                assert abs(val[0]) <= 1.0 + 1e-12

    def test_epsilon_monotone_magnitude(self, rng):
        coeff = Coefficient(fn=lambda y: np.tanh(y[..., 0, :]), mode="atoms", bound=1.0)
        atoms = rng.standard_normal((30, 2, 1))
        nu = WeightedMeasure.empirical(atoms)
        q = rng.standard_normal(1)
        vals = [
            abs(nw_block(q, 0, coeff, nu, gauss_params(h=0.15, eps=eps))[0])
            for eps in (1e-8, 1e-4, 1e-2, 0.5, 2.0)
        ]
        assert all(vals[i] >= vals[i + 1] - 1e-15 for i in range(len(vals) - 1))

    def test_translation_consistency(self, rng):
        # shift all atoms and the query: kernel weights unchanged, and a
        # translation-invariant coefficient gives the same output
        coeff = Coefficient(fn=lambda xj, y: np.sin(xj - y[..., 0, :]),
                            mode="both", bound=1.0)
        atoms = rng.standard_normal((25, 2, 1))
        q = np.array([0.3])
        shift = 1.7
        base = nw_block(q, 0, coeff, WeightedMeasure.empirical(atoms),
                        gauss_params(h=0.5))
        moved = nw_block(q + shift, 0, coeff,
                         WeightedMeasure.empirical(atoms + shift),
                         gauss_params(h=0.5))
        assert moved[0] == pytest.approx(base[0], abs=1e-12)


class TestParticleDrift:
    def test_single_particle_reduces_to_coefficient_sum(self):
        model = preset("decoupled-oracle")
        x = np.array([[[0.5], [-1.0]]])
        ens = ParticleEnsemble(x, t=0.0)
        drift = particle_drift(ens, model, gauss_params())
        expect = math.tanh(0.5) + math.tanh(-1.0)
        np.testing.assert_allclose(drift[0], expect, atol=1e-12)

    def test_zero_interaction_leaves_only_v(self, rng):
        model = mixed_mode_model()
        no_b = ModelSpec(
            name="vonly", m=2, d=1, b={}, V=model.V, sigma=1.0,
            mu0=model.mu0, bounds=model.bounds,
        )
        x = rng.standard_normal((40, 2, 1))
        drift = particle_drift(ParticleEnsemble(x, t=0.0), no_b, gauss_params())
        np.testing.assert_array_equal(drift, no_b.v_values(x))

    def test_matches_nw_block_reference(self, rng):
        model = mixed_mode_model()
        x = rng.standard_normal((60, 2, 1))
        ens = ParticleEnsemble(x, t=0.0)
        params = gauss_params(h=0.4, eps=1e-3)
        drift = particle_drift(ens, model, params)
        nu = WeightedMeasure.empirical(x)
        for k in (0, 17, 59):
            expect = np.zeros((2, 1))
            for (i, j), coeff in model.b.items():
                expect[i] += nw_block(x[k, j], j, coeff, nu, params)
            expect += model.v_values(x[k][None])[0]
            np.testing.assert_allclose(drift[k], expect, atol=1e-12)

    @pytest.mark.parametrize("kernel", [epanechnikov(1), uniform_ball(1)])
    @pytest.mark.parametrize("n", [3, 113, 1000])
    def test_strategy_equivalence_property(self, kernel, n, rng):
        model = mixed_mode_model()
        x = rng.standard_normal((n, 2, 1)) * 1.5
        ens = ParticleEnsemble(x, t=0.0)
        params = DriftParams(h=0.2, epsilon=1e-4, kernel=kernel)
        naive = particle_drift(ens, model, params, strategy="naive")
        cells = particle_drift(ens, model, params, strategy="celllist")
        np.testing.assert_allclose(cells, naive, atol=1e-12)

    def test_celllist_rejects_full_support(self, rng):
        ens = ParticleEnsemble(rng.standard_normal((10, 2, 1)), t=0.0)
        with pytest.raises(StrategyUnsupportedError):
            particle_drift(ens, mixed_mode_model(), gauss_params(), strategy="celllist")

    def test_permutation_equivariance(self, rng):
        model = mixed_mode_model()
        x = rng.standard_normal((80, 2, 1))
        params = gauss_params(h=0.3, eps=1e-3)
        drift = particle_drift(ParticleEnsemble(x, t=0.0), model, params)
        perm = rng.permutation(80)
        drift_p = particle_drift(ParticleEnsemble(x[perm], t=0.0), model, params)
        np.testing.assert_allclose(drift_p, drift[perm], atol=1e-12)

    def test_worker_count_does_not_change_bits(self, rng):
        model = mixed_mode_model()
        ens = ParticleEnsemble(rng.standard_normal((200, 2, 1)), t=0.0)
        params = gauss_params(h=0.4, eps=1e-3)
        base = particle_drift(ens, model, params, workers=1)
        for workers in (2, 8):
            again = particle_drift(ens, model, params, workers=workers)
            np.testing.assert_array_equal(again, base)

    def test_boundedness_of_full_drift(self, rng):
        model = mixed_mode_model()
        x = 2.0 * rng.standard_normal((300, 2, 1))
        drift = particle_drift(ParticleEnsemble(x, t=0.0), model,
                               gauss_params(h=0.25, eps=1e-5))
        # block 0 sums two coefficient families, block 1 one family plus V
        assert np.max(np.abs(drift[:, 0, :])) <= 2.0 + 1e-12
        assert np.max(np.abs(drift[:, 1, :])) <= 1.5 + 1e-12


class TestFloorHitRate:
    def test_self_term_clears_tiny_floor(self, rng):
        x = rng.standard_normal((100, 1, 1))
        ens = ParticleEnsemble(x, t=0.0)
        k0 = 1.0 / math.sqrt(2 * math.pi * 0.1)
        params = DriftParams(h=0.1, epsilon=0.5 * k0 / 100, kernel=gaussian(1))
        assert floor_hit_rate(ens, 0, params) == 0.0

    def test_floor_above_peak_hits_everywhere(self, rng):
        x = 10.0 * rng.standard_normal((200, 1, 1))
        k0 = 1.0 / math.sqrt(2 * math.pi * 0.1)
        params = DriftParams(h=0.1, epsilon=1.01 * k0, kernel=gaussian(1))
        assert floor_hit_rate(ParticleEnsemble(x, t=0.0), 0, params) == 1.0

    def test_rate_tracks_low_density_mass_and_epsilon(self):
        g = np.random.default_rng(5)
        x = g.standard_normal((10_000, 1, 1))
        ens = ParticleEnsemble(x, t=0.0)
        dens_at_2 = math.exp(-2.0) / math.sqrt(2 * math.pi)
        r1 = floor_hit_rate(ens, 0, DriftParams(0.1, 0.5 * dens_at_2, gaussian(1)))
        r2 = floor_hit_rate(ens, 0, DriftParams(0.1, 0.25 * dens_at_2, gaussian(1)))
        assert 0.0 < r2 < r1 < 1.0
        # density falls below 0.5 phi(2) for |x| > sqrt(4 + 2 log 2) ~ 2.32,
        # about 2% of the mass; smoothing by K_h shrinks it a little
        assert r1 == pytest.approx(2.03e-2, abs=1e-2)

    def test_denominators_match_reference(self, rng):
        x = rng.standard_normal((64, 2, 1))
        params = gauss_params(h=0.3)
        den = block_denominators(x, 1, params)
        xj = x[:, 1, :]
        diffs = (xj[:, None, :] - xj[None, :, :]).reshape(-1, 1)
        ref = scaled_values(gaussian(1), 0.3, diffs).reshape(64, 64).mean(axis=1)
        np.testing.assert_allclose(den, ref, rtol=1e-13)
