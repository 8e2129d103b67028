import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seadyn.dynamics import IntegratorConfig, ModelSpec, evolve
from seadyn.equilibrium import SupportSpectrum, gibbs_density, solve_beta
from seadyn.errors import PreconditionError
from seadyn.linearized import (
    LinearizedModel,
    commuting_observable_decay,
    decay_rate,
    linear_propagate,
    oscillator_damping,
    oscillator_operators,
    rate_matrix,
    two_level_populations,
    two_level_rates,
    xcothx,
)
from strategies import balanced_perturbation, random_hermitian, thermal_perturbation

COTH1 = (math.e ** 2 + 1) / (math.e ** 2 - 1)


def model(energies, beta, sigma=1.0):
    return LinearizedModel(beta, sigma, np.asarray(energies, dtype=float))


class TestXcothx:
    def test_zero(self):
        assert xcothx(0.0) == 1.0

    def test_one(self):
        assert xcothx(1.0) == pytest.approx(COTH1, abs=1e-15)
        assert xcothx(1.0) == pytest.approx(1.313035, abs=1e-6)

    def test_even(self):
        assert xcothx(-1.0) == xcothx(1.0)

    def test_series_switchover(self):
        for x in (1e-3 * (1 - 1e-12), 1e-3):
            assert xcothx(x) == pytest.approx(1e-3 / math.tanh(1e-3), abs=1e-14)

    def test_vectorized(self):
        np.testing.assert_allclose(xcothx(np.array([0.0, 1.0, -2.0])), [1.0, COTH1, 2 / math.tanh(2)])

    @given(st.floats(-50, 50))
    def test_lower_bound(self, x):
        assert xcothx(x) >= 1.0
        if x != 0:
            assert xcothx(x) > 1.0 or abs(x) < 1e-7


class TestDecayRate:
    def test_degenerate_levels(self):
        lam, gam = decay_rate(0, 1, model([0.3, 0.3], 2.0, sigma=0.7))
        assert lam == pytest.approx(0.7)
        assert gam == 0.0

    def test_unit_gap(self):
        lam, gam = decay_rate(1, 0, model([0.0, 1.0], 2.0))
        assert gam == pytest.approx(COTH1 - 1, abs=1e-15)
        assert gam == pytest.approx(0.313035, abs=1e-6)
        assert lam == pytest.approx(COTH1)

    def test_infinite_temperature(self):
        m = model([0.0, 0.4, 3.0], 0.0)
        assert all(decay_rate(i, j, m)[1] == 0.0 for i in range(3) for j in range(3))

    @given(st.lists(st.floats(-3, 3), min_size=2, max_size=6), st.floats(-4, 4))
    def test_symmetric_and_nonnegative(self, energies, beta):
        m = model(energies, beta)
        lam = rate_matrix(m)
        np.testing.assert_allclose(lam, lam.T)
        assert np.all(lam - m.sigma_eq >= -1e-15)
        assert np.all(np.diag(lam) == m.sigma_eq)

    def test_monotone_in_gap(self):
        gaps = np.linspace(0.1, 5, 30)
        g = [decay_rate(0, 1, model([0.0, x], 1.3))[1] for x in gaps]
        assert np.all(np.diff(g) > 0)

    def test_requires_positive_sigma(self):
        with pytest.raises(ValueError):
            model([0.0, 1.0], 1.0, sigma=0.0)


class TestLinearPropagate:
    energies = np.array([0.0, 1.0, 2.5])

    def delta(self, rng, scale=1e-3):
        return thermal_perturbation(self.energies, rng, scale)

    def test_identity_at_zero(self, rng):
        d0 = self.delta(rng)
        np.testing.assert_allclose(linear_propagate(d0, 0.0, model(self.energies, 1.0)), d0, atol=1e-18)

    def test_diagonal_decays_uniformly(self, rng):
        d0 = np.diag(np.diag(self.delta(rng)))
        m = model(self.energies, 1.2, sigma=0.5)
        np.testing.assert_allclose(linear_propagate(d0, 2.0, m), d0 * math.exp(-1.0), atol=1e-18)

    def test_single_pair(self):
        d0 = np.zeros((2, 2), dtype=complex)
        d0[0, 1], d0[1, 0] = 1e-3j, -1e-3j
        out = linear_propagate(d0, 1.0, model([0.0, 1.0], 2.0))
        assert abs(out[0, 1]) == pytest.approx(1e-3 * math.exp(-COTH1), rel=1e-12)

    def test_rejects_trace(self):
        with pytest.raises(PreconditionError, match="Tr"):
            linear_propagate(np.diag([1e-3, 0.0, 0.0]), 1.0, model(self.energies, 1.0))

    def test_rejects_energy(self):
        with pytest.raises(PreconditionError, match="H"):
            linear_propagate(np.diag([1e-3, -1e-3, 0.0]), 1.0, model(self.energies, 1.0))

    def test_two_level_kinetics_match_diagonal(self):
        m = model([0.0, 1.0], 0.7, sigma=1.3)
        n_eq = m.gibbs_populations
        # two levels: Tr(H delta) = 0 forces a zero population deviation; use the rate law directly
        t = np.linspace(0, 4, 9)
        n1 = two_level_populations(n_eq[0] + 0.01, t, m)
        np.testing.assert_allclose(n1 - n_eq[0], 0.01 * np.exp(-1.3 * t), atol=1e-15)

    def test_three_level_populations_follow_common_rate(self, rng):
        m = model(self.energies, 0.9, sigma=0.8)
        d0 = self.delta(rng)
        for t in (0.5, 1.5):
            np.testing.assert_allclose(np.diag(linear_propagate(d0, t, m)), np.diag(d0) * math.exp(-0.8 * t),
                                       atol=1e-18)

    def test_eigenbasis_round_trip(self, rng):
        h = random_hermitian(rng, 3)
        m = LinearizedModel.from_hamiltonian(h, 0.5)
        x = random_hermitian(rng, 3)
        np.testing.assert_allclose(m.from_eigenbasis(m.to_eigenbasis(x)), x, atol=1e-13)


class TestCommutingObservable:
    m = model([0.0, 1.0, 2.0], 1.0)

    def test_zero_initial_average(self):
        o = np.diag([1.0, 0.0, 0.0])
        d0 = np.array([[0, 1e-3, 0], [1e-3, 0, 0], [0, 0, 0]], dtype=complex)
        assert commuting_observable_decay(o, d0, 3.0, self.m) == 0.0

    def test_identity_at_zero(self):
        o = np.diag([1.0, -2.0, 0.5])
        d0 = np.diag([1e-3, -2e-3, 1e-3])
        assert commuting_observable_decay(o, d0, 0.0, self.m) == pytest.approx(np.trace(o @ d0).real)

    def test_halved(self):
        o = np.diag([1.0, -2.0, 0.5])
        d0 = np.diag([1e-3, -2e-3, 1e-3])
        assert commuting_observable_decay(o, d0, math.log(2), self.m) == pytest.approx(np.trace(o @ d0).real / 2)

    def test_rejects_non_commuting(self):
        with pytest.raises(PreconditionError):
            commuting_observable_decay(np.ones((3, 3)), np.zeros((3, 3)), 1.0, self.m)


class TestTwoLevelRates:
    def test_infinite_temperature(self):
        assert two_level_rates(model([0.0, 1.0], 0.0, sigma=2.0)) == (1.0, 1.0)

    def test_ln3(self):
        k12, k21 = two_level_rates(model([0.0, 1.0], math.log(3)))
        assert k12 == pytest.approx(0.25, abs=1e-15)
        assert k21 == pytest.approx(0.75, abs=1e-15)
        populations = solve_beta(SupportSpectrum((0.0, 1.0)), 0.25).probabilities
        assert k21 == pytest.approx(populations[0], abs=1e-12)

    def test_ground_state_saturation(self):
        k12, k21 = two_level_rates(model([0.0, 1.0], 800.0))
        assert k12 == pytest.approx(0.0, abs=1e-300)
        assert k21 == 1.0

    @given(st.floats(-5, 5), st.floats(0.1, 3))
    def test_detailed_balance(self, beta, gap):
        k12, k21 = two_level_rates(model([0.0, gap], beta))
        assert k12 / k21 == pytest.approx(math.exp(-beta * gap), rel=1e-10)


class TestOscillator:
    def test_infinite_temperature(self):
        assert oscillator_damping(1.0, model([0.0], 0.0)).gamma == 1.0

    def test_value(self):
        assert oscillator_damping(2.0, model([0.0], 1.0)).gamma == pytest.approx(COTH1, abs=1e-15)

    def test_characteristic_roots(self):
        omega = 1.7
        damp = oscillator_damping(omega, model([0.0], 0.6, sigma=0.4))
        # first-order system for (<q>, <p>) with damping gamma and frequency omega
        a = np.array([[-damp.gamma, omega], [-omega, -damp.gamma]])
        roots = np.roots([1.0, damp.friction, damp.stiffness])
        np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(a)), np.sort_complex(roots), atol=1e-12)
        np.testing.assert_allclose(np.sort_complex(roots), np.sort_complex([-damp.gamma - 1j * omega,
                                                                            -damp.gamma + 1j * omega]))

    def test_operators(self):
        h, a, q, p = oscillator_operators(6, omega=2.0)
        np.testing.assert_allclose(np.diag(h).real, 2.0 * (np.arange(6) + 0.5))
        np.testing.assert_allclose((a.conj().T @ a).diagonal().real, np.arange(6))
        comm = q @ p - p @ q
        np.testing.assert_allclose(np.diag(comm)[:-1], 1j, atol=1e-14)

    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(ValueError):
            oscillator_damping(0.0, model([0.0], 1.0))


def test_nonlinear_dynamics_agree_with_linear_propagator():
    """d = 4 random H, initial state 1e-3 from Gibbs: fitted exponents per element and for populations."""
    rng = np.random.default_rng(99)
    h = random_hermitian(rng, 4)
    beta = 0.9
    lin = LinearizedModel.from_hamiltonian(h, beta)
    d0 = balanced_perturbation(lin.energies, rng, 1e-3)
    rho_eq = gibbs_density(h, beta)
    traj = evolve(rho_eq + lin.from_eigenbasis(d0), ModelSpec(h), IntegratorConfig(t_end=2.0, record_every=0.1),
                  picture="interaction")
    lam = rate_matrix(lin)
    dev = np.array([lin.to_eigenbasis(s - rho_eq) for s in traj.states])
    for k, t in enumerate(traj.times):
        # second-order corrections are O(|delta|^2)
        want = linear_propagate(d0, t, lin, hbar=1.0)
        assert np.max(np.abs(dev[k] - want)) <= 0.05 * np.max(np.abs(want))
    mags = np.abs(dev)
    for mu in range(4):
        for nu in range(4):
            if mu != nu:
                slope = -np.polyfit(traj.times, np.log(mags[:, mu, nu]), 1)[0]
                assert slope == pytest.approx(lam[mu, nu], rel=0.02)
    pops = np.linalg.norm(np.diagonal(dev, axis1=1, axis2=2), axis=1)
    assert -np.polyfit(traj.times, np.log(pops), 1)[0] == pytest.approx(lin.sigma_eq, rel=0.02)
