import math
from collections import namedtuple

import numpy as np
import pytest

from superres.analytics import NO_NOISE, Convention
from superres.errors import DomainError, ScanFailedError, ValidationError
from superres.estimation import (
    LikelihoodModel,
    ScanPoint,
    batch_probability,
    fit_detuning_scan,
    log_likelihood,
    mle_1d,
    mle_1d_study,
    mle_multiparam,
    preliminary_scan,
    scaling_study,
)
from superres.montecarlo import BatchSettings, RunSeed, ShotBatch, simulate_batch
from superres.signal import (
    GaussianIID,
    TwoToneSignal,
    plan_for_detuning,
    plan_for_detuning_product,
)

PI = math.pi
OMEGA_S = 1000 * PI

FakeBatch = namedtuple("FakeBatch", ["n_shots", "n_ones", "settings"])


def _settings(omega_r=0.05, sigma=1.0, delta_s_t=2 * PI, convention=Convention.PHYSICAL):
    sig = TwoToneSignal(omega_s=OMEGA_S, omega_r=omega_r, amp_model=GaussianIID(sigma))
    plan = plan_for_detuning_product(OMEGA_S, delta_s_t, 1.0)
    return sig, plan, BatchSettings(sig, plan, NO_NOISE, convention)


class TestLogLikelihood:
    def test_observed_frequency_is_the_binomial_optimum(self):
        sig, plan, settings = _settings(sigma=5.0)
        batch = FakeBatch(n_shots=1000, n_ones=137, settings=settings)
        model = LikelihoodModel(("omega_r",), [[0.0, 1.0]],
                                fixed={"omega_s": OMEGA_S, "sigma": 5.0})
        # invert p(omega_r) = 0.137 numerically, then perturb
        from scipy.optimize import brentq

        w_star = brentq(
            lambda w: batch_probability(settings, w) - 0.137, 1e-4, 1.0
        )
        best = log_likelihood([batch], model, [w_star])
        assert best > log_likelihood([batch], model, [w_star * 1.05])
        assert best > log_likelihood([batch], model, [w_star * 0.95])

    def test_zero_counts_zero_probability_contribution(self):
        sig, plan, settings = _settings(omega_r=1e-9)
        batch = FakeBatch(n_shots=1000, n_ones=0, settings=settings)
        model = LikelihoodModel(("omega_r",), [[0.0, 1.0]],
                                fixed={"omega_s": OMEGA_S, "sigma": 1.0})
        assert log_likelihood([batch], model, [1e-9]) == pytest.approx(0.0, abs=1e-6)

    def test_two_identical_batches_double(self):
        sig, plan, settings = _settings()
        batch = FakeBatch(n_shots=1000, n_ones=137, settings=settings)
        model = LikelihoodModel(("omega_r",), [[0.0, 1.0]],
                                fixed={"omega_s": OMEGA_S, "sigma": 1.0})
        one = log_likelihood([batch], model, [0.04])
        two = log_likelihood([batch, batch], model, [0.04])
        assert two == pytest.approx(2 * one, rel=1e-12)

    def test_empty_batches_rejected(self):
        model = LikelihoodModel(("omega_r",), [[0.0, 1.0]])
        with pytest.raises(ValidationError):
            log_likelihood([], model, [0.1])


class TestMle1d:
    def test_recovers_separation(self):
        sig, plan, _ = _settings(omega_r=0.05, sigma=5.0)
        batch = simulate_batch(sig, plan, NO_NOISE, 10**5, RunSeed(1), Convention.PHYSICAL)
        rep = mle_1d(batch, omega_s=OMEGA_S, sigma=5.0, bounds=(0.0, 0.5))
        assert not rep.boundary
        se = rep.std_errors["omega_r"]
        assert 0 < se < 0.01
        assert abs(rep.estimates["omega_r"] - 0.05) < 4 * se

    def test_zero_count_data_hits_lower_boundary(self):
        sig, plan, _ = _settings(omega_r=1e-14)
        batch = simulate_batch(sig, plan, NO_NOISE, 10**4, RunSeed(2), Convention.PHYSICAL)
        assert batch.n_ones == 0
        rep = mle_1d(batch, omega_s=OMEGA_S, sigma=1.0, bounds=(0.0, 0.5))
        assert rep.boundary
        assert rep.estimates["omega_r"] == 0.0

    def test_bad_bounds(self):
        sig, plan, _ = _settings()
        batch = simulate_batch(sig, plan, NO_NOISE, 100, RunSeed(3))
        with pytest.raises(DomainError):
            mle_1d(batch, OMEGA_S, 1.0, bounds=(-0.1, 0.5))
        with pytest.raises(DomainError):
            mle_1d(batch, OMEGA_S, 1.0, bounds=(0.5, 0.1))

    def test_study_determinism(self):
        sig, plan, _ = _settings(omega_r=0.05, sigma=5.0)
        a = mle_1d_study(sig, plan, 10**4, 5, RunSeed(9), (0.0, 0.5))
        b = mle_1d_study(sig, plan, 10**4, 5, RunSeed(9), (0.0, 0.5))
        np.testing.assert_array_equal(a.samples["omega_r"], b.samples["omega_r"])
        assert a.rmse == b.rmse


class TestEstimatorInvariance:
    def test_rescaling_frequencies_and_time_rescales_estimates_exactly(self):
        # scaling (omega_s, omega_r, sigma) by 2 and t by 1/2 is exact in binary
        sig1 = TwoToneSignal(omega_s=OMEGA_S, omega_r=0.05, amp_model=GaussianIID(5.0))
        plan1 = plan_for_detuning_product(OMEGA_S, 2 * PI, 1.0)
        sig2 = TwoToneSignal(omega_s=2 * OMEGA_S, omega_r=0.1, amp_model=GaussianIID(10.0))
        plan2 = plan_for_detuning_product(2 * OMEGA_S, 2 * PI, 0.5)
        assert plan2.tau == plan1.tau / 2 and plan2.n_pulses == plan1.n_pulses
        b1 = simulate_batch(sig1, plan1, NO_NOISE, 10**5, RunSeed(6), Convention.EFFECTIVE)
        b2 = simulate_batch(sig2, plan2, NO_NOISE, 10**5, RunSeed(6), Convention.EFFECTIVE)
        assert b1.n_ones == b2.n_ones
        r1 = mle_1d(b1, omega_s=OMEGA_S, sigma=5.0, bounds=(0.0, 0.5))
        r2 = mle_1d(b2, omega_s=2 * OMEGA_S, sigma=10.0, bounds=(0.0, 1.0))
        # grid construction goes through log/exp, so exactness holds to rounding
        assert r2.estimates["omega_r"] == pytest.approx(
            2 * r1.estimates["omega_r"], rel=1e-9
        )


class TestScalingStudyValidation:
    def test_needs_enough_replicates(self):
        sig, plan, _ = _settings()
        with pytest.raises(ValidationError, match="replicates"):
            scaling_study(sig, plan, [10**4, 10**6], 50, RunSeed(0), (0.0, 0.5))

    def test_needs_wide_span(self):
        sig, plan, _ = _settings()
        with pytest.raises(ValidationError, match="decades"):
            scaling_study(sig, plan, [10**5, 10**6], 200, RunSeed(0), (0.0, 0.5))

    def test_deterministic_model_has_no_exponent(self):
        # a zero-amplitude signal never flips, every fit rails at the true 0
        sig = TwoToneSignal(omega_s=OMEGA_S, omega_r=0.0, amp_model=GaussianIID(0.0))
        plan = plan_for_detuning_product(OMEGA_S, 2 * PI, 1.0)
        with pytest.raises(ValidationError, match="zero-variance"):
            scaling_study(sig, plan, [100, 400, 1000, 3200], 200, RunSeed(0),
                          (0.0, 0.5))


class TestDetuningScan:
    def test_noise_free_probabilities_recover_exactly(self):
        omega_s = 40 * PI
        truth = TwoToneSignal(omega_s=omega_s, omega_r=0.35, amp_model=GaussianIID(1.0))
        points = []
        for d in np.linspace(0.6 * PI, 3.2 * PI, 30):
            plan = plan_for_detuning_product(omega_s, d, 1.0)
            settings = BatchSettings(truth, plan, NO_NOISE, Convention.PHYSICAL)
            p = batch_probability(settings, truth.omega_r)
            points.append(ScanPoint(plan=plan, n_shots=10**6, n_ones=p * 10**6))
        est = fit_detuning_scan(points, omega_s, 1.0, seed=3)
        assert est.estimates["omega_s"] == pytest.approx(omega_s, abs=1e-6)
        assert est.estimates["sigma"] == pytest.approx(1.0, abs=1e-6)
        assert est.estimates["omega_r"] == pytest.approx(0.35, abs=1e-5)

    def test_simulated_scan_pins_center_frequency(self):
        omega_s = 40 * PI
        truth = TwoToneSignal(omega_s=omega_s, omega_r=0.35, amp_model=GaussianIID(1.0))
        est = preliminary_scan(
            truth, np.linspace(0.6 * PI, 3.2 * PI, 30), 2 * 10**4, RunSeed(5)
        )
        assert abs(est.estimates["omega_s"] - omega_s) < truth.omega_r
        assert est.estimates["sigma"] == pytest.approx(1.0, rel=0.05)

    def test_scan_missing_dip_fails(self):
        omega_s = 40 * PI
        plan = plan_for_detuning_product(omega_s, 0.4 * PI, 1.0)
        points = [ScanPoint(plan=plan, n_shots=1000, n_ones=480)] * 5
        with pytest.raises(ScanFailedError):
            fit_detuning_scan(points, omega_s, 1.0)

    def test_shots_floor(self):
        truth = TwoToneSignal(omega_s=40 * PI, omega_r=0.3, amp_model=GaussianIID(1.0))
        with pytest.raises(ValidationError):
            preliminary_scan(truth, [PI, 2 * PI], 100, RunSeed(0))


class TestMleMultiparam:
    def test_identical_detunings_rejected(self):
        sig, plan, settings = _settings()
        batch = ShotBatch(1000, 10, settings, RunSeed(0))
        bounds = [[0.0, 0.3], [OMEGA_S - 0.3, OMEGA_S + 0.3], [0.5, 2.0]]
        with pytest.raises(DomainError, match="singular"):
            mle_multiparam([batch, batch, batch], bounds)

    def test_gradient_vanishes_at_truth_for_exact_counts(self):
        omega_r, sigma = 0.01, 5.0
        detunings = (2 * PI, 6.0, 5.5)
        truth = TwoToneSignal(omega_s=OMEGA_S, omega_r=omega_r, amp_model=GaussianIID(sigma))
        batches = []
        for d in detunings:
            plan = plan_for_detuning_product(OMEGA_S, d, 1.0)
            settings = BatchSettings(truth, plan, NO_NOISE, Convention.PHYSICAL)
            p = batch_probability(settings, omega_r)
            batches.append(FakeBatch(n_shots=10**6, n_ones=p * 10**6, settings=settings))
        model = LikelihoodModel(
            ("omega_r", "omega_s", "sigma"),
            [[0.0, 0.3], [OMEGA_S - 0.3, OMEGA_S + 0.3], [4.0, 6.0]],
        )
        theta = np.array([omega_r, OMEGA_S, sigma])
        base = log_likelihood(batches, model, theta)
        for i, h in enumerate([1e-7, 1e-7, 1e-6]):
            up, dn = theta.copy(), theta.copy()
            up[i] += h
            dn[i] -= h
            grad = (log_likelihood(batches, model, up)
                    - log_likelihood(batches, model, dn)) / (2 * h)
            curv = abs(log_likelihood(batches, model, up)
                       + log_likelihood(batches, model, dn) - 2 * base) / h**2
            assert abs(grad) < max(1e-3 * math.sqrt(curv * max(base, 1.0)), 1e-2)

    def test_joint_fit_recovers_truth(self):
        omega_r, sigma = 0.01, 5.0
        truth = TwoToneSignal(omega_s=OMEGA_S, omega_r=omega_r, amp_model=GaussianIID(sigma))
        batches = []
        for j, d in enumerate((2 * PI, 6.05, 5.49)):
            plan = plan_for_detuning_product(OMEGA_S, d, 1.0)
            batches.append(
                simulate_batch(truth, plan, NO_NOISE, 3 * 10**5, RunSeed(40 + j),
                               Convention.PHYSICAL)
            )
        bounds = [[0.0, 0.3], [OMEGA_S - 0.3, OMEGA_S + 0.3], [3.5, 7.0]]
        rep = mle_multiparam(batches, bounds, seed=1)
        assert rep.estimates["omega_r"] == pytest.approx(omega_r, abs=5e-3)
        assert rep.estimates["omega_s"] == pytest.approx(OMEGA_S, abs=0.01)
        assert rep.estimates["sigma"] == pytest.approx(sigma, rel=0.02)
        assert 0 < rep.std_errors["omega_r"] < 0.01
