import numpy as np
import pytest

from sccread import (ChargeState, NoContrastError, RateSet, ReadoutPolicy,
                     SCCPopulations, ZeroSuccessError, assignment_prob,
                     charge_fidelity, classify, conventional_noise,
                     effective_populations, fidelity_envelope,
                     initialization_model, optimize_readout, pareto_front,
                     scc_noise, simulate_windows, steady_state)


class TestPolicyAndClassify:
    def test_threshold_edge(self):
        pol = ReadoutPolicy(t_R=1e-3, n_thresh=3)
        assert classify(2, pol) == ChargeState.NV0
        assert classify(3, pol) == ChargeState.NVM
        assert classify(30, pol) == ChargeState.NVM

    def test_validation(self):
        with pytest.raises(ValueError):
            ReadoutPolicy(t_R=0.0, n_thresh=1)
        with pytest.raises(ValueError):
            ReadoutPolicy(t_R=1e-3, n_thresh=0)
        pol = ReadoutPolicy(t_R=1e-3, n_thresh=1)
        with pytest.raises(ValueError):
            classify(-1, pol)


class TestAssignmentProb:
    RATES = RateSet(g0=30.0, g1=50.0, gamma0=1500.0, gamma1=30000.0)

    def test_against_simulation(self):
        pol = ReadoutPolicy(t_R=4e-4, n_thresh=5)
        n = 200000
        for initial in (ChargeState.NVM, ChargeState.NV0):
            p = assignment_prob(self.RATES, pol, initial)
            counts, _ = simulate_windows(self.RATES, pol.t_R, initial, n,
                                         seed=700 + int(initial))
            frac = float(np.mean(counts >= pol.n_thresh))
            assert abs(frac - p) < 4.0 * np.sqrt(p * (1.0 - p) / n) + 1e-4

    def test_short_window_poisson_limit(self):
        # negligible blinking: the click statistics are plain Poisson
        t = 1e-7
        pol = ReadoutPolicy(t_R=t, n_thresh=1)
        p = assignment_prob(self.RATES, pol, ChargeState.NVM)
        assert p == pytest.approx(-np.expm1(-self.RATES.gamma1 * t), rel=1e-4)

    def test_monotone_in_threshold(self):
        probs = [assignment_prob(self.RATES, ReadoutPolicy(t_R=4e-4, n_thresh=k),
                                 ChargeState.NVM) for k in range(1, 25)]
        assert all(a >= b for a, b in zip(probs, probs[1:]))


class TestChargeFidelity:
    RATES = RateSet(g0=30.0, g1=50.0, gamma0=1500.0, gamma1=30000.0)

    def test_matches_assignment_probs(self):
        pol = ReadoutPolicy(t_R=4e-4, n_thresh=5)
        hit = assignment_prob(self.RATES, pol, ChargeState.NVM)
        false = assignment_prob(self.RATES, pol, ChargeState.NV0)
        assert charge_fidelity(self.RATES, pol) == pytest.approx(
            0.5 * hit + 0.5 * (1.0 - false), rel=1e-12)
        p_eq = steady_state(self.RATES)[0]
        assert charge_fidelity(self.RATES, pol, prior="steady") == pytest.approx(
            p_eq * hit + (1.0 - p_eq) * (1.0 - false), rel=1e-12)
        assert charge_fidelity(self.RATES, pol, prior=1.0) == pytest.approx(hit)

    def test_beats_coin_flip_at_best_threshold(self):
        pol_best = max((ReadoutPolicy(t_R=4e-4, n_thresh=k) for k in range(1, 20)),
                       key=lambda pol: charge_fidelity(self.RATES, pol))
        assert charge_fidelity(self.RATES, pol_best) > 0.5

    def test_bad_prior(self):
        pol = ReadoutPolicy(t_R=4e-4, n_thresh=5)
        with pytest.raises(ValueError):
            charge_fidelity(self.RATES, pol, prior=1.5)


class TestOptimizeReadout:
    def test_rows_and_front(self, reference_laws):
        rows = optimize_readout(reference_laws, powers=[2.0, 5.0],
                                thresholds=[1, 3, 6])
        assert len(rows) == 6
        for row in rows:
            # the reported optimum beats nearby windows
            rates = reference_laws.rates_at(row.power)
            pol = ReadoutPolicy(t_R=row.t_R, n_thresh=row.n_thresh)
            assert charge_fidelity(rates, pol) == pytest.approx(row.fidelity, abs=1e-9)
            for factor in (0.7, 1.4):
                other = ReadoutPolicy(t_R=row.t_R * factor, n_thresh=row.n_thresh)
                assert charge_fidelity(rates, other) <= row.fidelity + 1e-7

        front = pareto_front(rows)
        assert set(id(r) for r in front) <= set(id(r) for r in rows)
        ts = [r.t_R for r in front]
        fs = [r.fidelity for r in front]
        assert ts == sorted(ts)
        assert fs == sorted(fs)     # longer windows on the front do better
        best = max(rows, key=lambda r: r.fidelity)
        assert best.fidelity == pytest.approx(front[-1].fidelity)

    def test_envelope_monotone_in_cap(self, reference_laws):
        powers = [0.875, 2.0, 5.0]
        thresholds = [1, 2, 4, 8]
        caps = [3e-5, 3e-4, 3e-3]
        envs = [fidelity_envelope(reference_laws, cap, powers, thresholds)
                for cap in caps]
        assert all(a <= b + 1e-9 for a, b in zip(envs, envs[1:]))
        assert 0.5 < envs[-1] <= 1.0

    def test_envelope_validation(self, reference_laws):
        with pytest.raises(ValueError):
            fidelity_envelope(reference_laws, 1e-8, [1.0], [1])


class TestSCCNoise:
    def test_reference_values(self):
        pops = SCCPopulations(beta0=0.755, beta1=0.415,
                              beta0_tilde=0.504, beta1_tilde=0.162)
        assert scc_noise(pops) == pytest.approx(2.756, abs=2e-3)
        assert conventional_noise(0.238, 0.154) == pytest.approx(10.588, abs=2e-3)

    def test_perfect_mapping_floor(self):
        assert scc_noise(SCCPopulations(beta0=1.0, beta1=0.0)) == 1.0

    def test_noise_exceeds_projection_limit(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            b0, b1 = rng.uniform(0.0, 1.0, 2)
            if abs(b0 - b1) < 1e-3:
                continue
            assert scc_noise(SCCPopulations(beta0=b0, beta1=b1)) >= 1.0

    def test_label_exchange_symmetry(self):
        a = scc_noise(SCCPopulations(beta0=0.7, beta1=0.2))
        b = scc_noise(SCCPopulations(beta0=0.2, beta1=0.7))
        assert a == pytest.approx(b, rel=1e-14)

    def test_no_contrast(self):
        with pytest.raises(NoContrastError):
            scc_noise(SCCPopulations(beta0=0.4, beta1=0.4))
        with pytest.raises(NoContrastError):
            conventional_noise(0.2, 0.2)
        with pytest.raises(ValueError):
            conventional_noise(-0.1, 0.2)

    def test_default_tilde_equals_bare(self):
        pops = SCCPopulations(beta0=0.755, beta1=0.415)
        assert pops.beta0_tilde == 0.755
        assert pops.beta1_tilde == 0.415
        assert pops.contrast == pytest.approx(0.34)


class TestEffectivePopulations:
    RATES = RateSet(g0=30.0, g1=50.0, gamma0=1500.0, gamma1=30000.0)

    def test_convex_combination(self):
        pol = ReadoutPolicy(t_R=4e-4, n_thresh=5)
        hit = assignment_prob(self.RATES, pol, ChargeState.NVM)
        false = assignment_prob(self.RATES, pol, ChargeState.NV0)
        pops = effective_populations(0.755, 0.415, self.RATES, pol)
        assert pops.beta0 == 0.755
        assert pops.beta0_tilde == pytest.approx(0.755 * hit + 0.245 * false)
        assert pops.beta1_tilde == pytest.approx(0.415 * hit + 0.585 * false)
        # degraded readout always shrinks the contrast
        assert pops.contrast <= abs(pops.beta0 - pops.beta1) + 1e-12

    def test_perfect_readout_keeps_populations(self):
        # gamma1 >> 1/t_R and gamma0 = 0 with threshold 1: every NV-
        # window clicks, no NV0 window can
        rates = RateSet(g0=0.0, g1=0.0, gamma0=0.0, gamma1=1e7)
        pol = ReadoutPolicy(t_R=1e-2, n_thresh=1)
        pops = effective_populations(0.7, 0.3, rates, pol)
        assert pops.beta0_tilde == pytest.approx(0.7, abs=1e-9)
        assert pops.beta1_tilde == pytest.approx(0.3, abs=1e-9)


class TestInitialization:
    def test_geometric_budget(self):
        budget = initialization_model(0.216, pump_duration=5e-6,
                                      probe_duration=20e-6, overhead=2e-6)
        assert budget.expected_attempts == pytest.approx(1.0 / 0.216)
        assert budget.effective_t_I == pytest.approx(27e-6 / 0.216)

    def test_certain_click(self):
        budget = initialization_model(1.0, probe_duration=1e-5)
        assert budget.expected_attempts == 1.0
        assert budget.effective_t_I == pytest.approx(1e-5)

    def test_zero_success(self):
        with pytest.raises(ZeroSuccessError):
            initialization_model(0.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            initialization_model(1.2)
        with pytest.raises(ValueError):
            initialization_model(0.5, pump_duration=-1e-6)
