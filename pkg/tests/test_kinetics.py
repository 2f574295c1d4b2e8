import numpy as np
import pytest

from sccread import (ChargeState, LevelSystem, RateSet, Trajectory,
                     Transition, UnknownLevelError, UnknownTransitionError,
                     pmf_analytic, simulate_sequence)


def two_level_system(g0, g1):
    return LevelSystem(
        levels=("minus", "zero"),
        transitions=(Transition("minus", "zero", g1),
                     Transition("zero", "minus", g0)))


def blinking_emitter(g0, g1, gamma0, gamma1, k_ret=1e9):
    """Two charge levels plus short-lived radiative shadow levels.

    A detected photon is modelled as a round trip through the shadow
    level at rate gamma; with the return rate far above every other
    rate, the photon record approaches a Poisson process of intensity
    gamma while in the parent level.
    """
    return LevelSystem(
        levels=("minus", "minus*", "zero", "zero*"),
        transitions=(
            Transition("minus", "zero", g1, name="ionize"),
            Transition("zero", "minus", g0, name="recapture"),
            Transition("minus", "minus*", gamma1, emits_photon=True,
                       collected=True, name="emit1"),
            Transition("minus*", "minus", k_ret, name="return1"),
            Transition("zero", "zero*", gamma0, emits_photon=True,
                       collected=True, name="emit0"),
            Transition("zero*", "zero", k_ret, name="return0"),
        ))


class TestValidation:
    def test_unknown_level_in_transition(self):
        with pytest.raises(UnknownLevelError):
            LevelSystem(levels=("a",), transitions=(Transition("a", "b", 1.0),))

    def test_duplicate_levels(self):
        with pytest.raises(ValueError):
            LevelSystem(levels=("a", "a"), transitions=())

    def test_duplicate_transition_names(self):
        with pytest.raises(ValueError):
            LevelSystem(levels=("a", "b"),
                        transitions=(Transition("a", "b", 1.0, name="t"),
                                     Transition("b", "a", 2.0, name="t")))

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError):
            Transition("a", "a", 1.0)

    def test_collected_requires_emission(self):
        with pytest.raises(ValueError):
            Transition("a", "b", 1.0, emits_photon=False, collected=True)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            Transition("a", "b", -2.0)

    def test_unknown_initial_level(self):
        sys_ = two_level_system(100.0, 100.0)
        with pytest.raises(UnknownLevelError):
            simulate_sequence(sys_, [(1e-3, {})], "nope", seed=0)

    def test_unknown_override(self):
        sys_ = two_level_system(100.0, 100.0)
        with pytest.raises(UnknownTransitionError):
            simulate_sequence(sys_, [(1e-3, {"missing": 5.0})], "minus", seed=0)

    def test_trajectory_shape_invariant(self):
        with pytest.raises(ValueError):
            Trajectory(jump_times=np.array([1.0]), states=np.array([0]),
                       photon_times=np.array([]), total_duration=2.0, seed=0)


class TestSimulateSequence:
    def test_deterministic(self):
        sys_ = blinking_emitter(300.0, 500.0, 200.0, 4000.0)
        a = simulate_sequence(sys_, [(5e-3, {})], "minus", seed=42)
        b = simulate_sequence(sys_, [(5e-3, {})], "minus", seed=42)
        np.testing.assert_array_equal(a.jump_times, b.jump_times)
        np.testing.assert_array_equal(a.photon_times, b.photon_times)

    def test_absorbing_when_rates_off(self):
        sys_ = two_level_system(0.0, 0.0)
        traj = simulate_sequence(sys_, [(1e-3, {})], "zero", seed=3)
        assert traj.jump_times.size == 0
        assert traj.states.tolist() == [1]
        assert traj.total_duration == 1e-3

    def test_override_freezes_dynamics(self):
        sys_ = blinking_emitter(300.0, 500.0, 200.0, 4000.0)
        dark = {"ionize": 0.0, "recapture": 0.0, "emit0": 0.0, "emit1": 0.0}
        traj = simulate_sequence(sys_, [(2e-3, {}), (3e-3, dark)], "minus", seed=5)
        assert traj.total_duration == 5e-3
        assert np.all(traj.jump_times < 2e-3 + 1e-12)
        assert np.all(traj.photon_times < 2e-3 + 1e-12)

    def test_times_ordered_and_bounded(self):
        sys_ = blinking_emitter(300.0, 500.0, 200.0, 4000.0)
        traj = simulate_sequence(sys_, [(5e-3, {})], "minus", seed=11)
        assert np.all(np.diff(traj.jump_times) > 0.0)
        assert traj.jump_times.size == traj.states.size - 1
        assert np.all(traj.photon_times <= 5e-3)

    def test_state_lookup_and_photon_slicing(self):
        sys_ = two_level_system(400.0, 600.0)
        traj = simulate_sequence(sys_, [(5e-3, {})], "minus", seed=2)
        assert traj.state_at(0.0) == 0
        assert traj.count_photons() == 0
        with pytest.raises(ValueError):
            traj.state_at(6e-3)

    def test_dwell_time_statistics(self):
        """Mean dwell time in an exponential two-level hop matches 1/rate."""
        g = 2000.0
        sys_ = two_level_system(g, g)
        dwells = []
        for seed in range(60):
            traj = simulate_sequence(sys_, [(20e-3, {})], "minus", seed=seed)
            if traj.jump_times.size > 1:
                dwells.append(np.diff(traj.jump_times))
        d = np.concatenate(dwells)
        assert abs(d.mean() - 1.0 / g) < 4.0 / (g * np.sqrt(d.size))


class TestReductionToTwoState:
    """The general engine must agree with the specialized two-state
    machinery when the level system is the two-state blinking emitter:
    the same count statistics and the same relaxation of the final
    state.  This is the package's independent cross-check between its
    two simulation routes."""

    G0, G1 = 300.0, 500.0
    GAMMA0, GAMMA1 = 200.0, 4000.0
    T_R = 5e-3
    REPS = 400

    def _photon_counts(self):
        sys_ = blinking_emitter(self.G0, self.G1, self.GAMMA0, self.GAMMA1)
        counts = np.empty(self.REPS)
        in_minus = np.empty(self.REPS, dtype=bool)
        for seed in range(self.REPS):
            traj = simulate_sequence(sys_, [(self.T_R, {})], "minus", seed=seed)
            counts[seed] = traj.count_photons()
            in_minus[seed] = traj.state_at(self.T_R) < 2  # minus or minus*
        return counts, in_minus

    def test_count_moments_match_analytic(self):
        counts, _ = self._photon_counts()
        rates = RateSet(g0=self.G0, g1=self.G1, gamma0=self.GAMMA0, gamma1=self.GAMMA1)
        dist = pmf_analytic(rates, self.T_R, ChargeState.NVM)
        ns = np.arange(dist.probs.size)
        mean = float(ns @ dist.probs)
        var = float((ns - mean) ** 2 @ dist.probs)
        assert abs(counts.mean() - mean) < 4.0 * np.sqrt(var / self.REPS)
        assert abs(counts.var() - var) < 5.0 * var * np.sqrt(2.0 / self.REPS)

    def test_final_state_matches_propagator(self):
        _, in_minus = self._photon_counts()
        g = self.G0 + self.G1
        p_inf = self.G0 / g
        expected = p_inf + (1.0 - p_inf) * np.exp(-g * self.T_R)
        got = in_minus.mean()
        assert abs(got - expected) < 4.0 * np.sqrt(expected * (1.0 - expected) / self.REPS)
