import math

import numpy as np
import pytest

from superres.analytics import (
    NO_NOISE,
    Convention,
    NoiseSpec,
    OUParams,
    ou_noise_floor,
    p_bessel,
    p_gaussian,
)
from superres.errors import ValidationError
from superres.montecarlo import (
    BatchSettings,
    RunSeed,
    ShotBatch,
    draw_quadratures,
    ou_step_params,
    ou_transition_counts,
    simulate_batch,
    simulate_ou_batch,
    simulate_ou_shot,
    _draw_chunk_quads,
)
from superres.signal import (
    FixedAmpUniformPhase,
    GaussianIID,
    PulsePlan,
    Quadratures,
    TwoToneSignal,
    accumulated_phase_free,
    plan_for_detuning,
    two_tone_phase_pulsed,
)

PI = math.pi
OMEGA_S = 1000 * PI


def _resonant(omega_r, sigma=1.0):
    sig = TwoToneSignal(omega_s=OMEGA_S, omega_r=omega_r, amp_model=GaussianIID(sigma))
    plan = plan_for_detuning(OMEGA_S, 2 * PI, 1.0)
    return sig, plan


class TestRunSeed:
    def test_validation(self):
        with pytest.raises(ValidationError):
            RunSeed(-1)
        with pytest.raises(ValidationError):
            RunSeed(2**64)
        assert RunSeed(5).child(3).stream_index == 3

    def test_streams_are_independent(self):
        a = RunSeed(5, 0).generator().random(4)
        b = RunSeed(5, 1).generator().random(4)
        assert not np.allclose(a, b)

    def test_counter_blocks_reproduce(self):
        s = RunSeed(5, 2)
        np.testing.assert_array_equal(
            s.generator(counter_block=7).random(4), s.generator(counter_block=7).random(4)
        )


class TestDrawQuadratures:
    def test_zero_spread_gives_zeros(self):
        q = draw_quadratures(GaussianIID(0.0), RunSeed(1).generator())
        assert q.as_array().tolist() == [0.0, 0.0, 0.0, 0.0]

    def test_gaussian_mean_bound(self):
        sigma = 0.7
        n = 10**6
        quads = _draw_chunk_quads(GaussianIID(sigma), RunSeed(2).generator(), n)
        assert abs(quads[:, 0].mean()) < 4 * sigma / math.sqrt(n)

    def test_fixed_amplitude_on_circle(self):
        rng = RunSeed(3).generator()
        for _ in range(50):
            q = draw_quadratures(FixedAmpUniformPhase(1.7), rng)
            assert q.a1**2 + q.b1**2 == pytest.approx(1.7**2, rel=1e-12)
            assert q.a2**2 + q.b2**2 == pytest.approx(1.7**2, rel=1e-12)

    def test_unknown_model(self):
        with pytest.raises(ValidationError):
            draw_quadratures(object(), RunSeed(1).generator())


class TestSimulateBatch:
    def test_batch_invariants(self):
        sig, plan = _resonant(0.1)
        with pytest.raises(ValidationError):
            ShotBatch(10, 11, BatchSettings(sig, plan, NO_NOISE, Convention.EFFECTIVE),
                      RunSeed(0))
        with pytest.raises(ValidationError):
            simulate_batch(sig, plan, NO_NOISE, 0, RunSeed(0))

    def test_zero_separation_on_resonance_never_flips(self):
        sig, plan = _resonant(1e-14)
        batch = simulate_batch(sig, plan, NO_NOISE, 10**5, RunSeed(1))
        assert batch.n_ones == 0

    def test_agrees_with_gaussian_closed_form(self):
        sig, plan = _resonant(0.1)
        d1 = plan.detuning(sig.omega_1)
        d2 = plan.detuning(sig.omega_2)
        p = p_gaussian(d1, d2, 1.0)
        for n in (10**5, 10**6):
            batch = simulate_batch(sig, plan, NO_NOISE, n, RunSeed(7), Convention.EFFECTIVE)
            assert abs(batch.frequency - p) < 4 * math.sqrt(p * (1 - p) / n)

    def test_agrees_with_bessel_closed_form(self):
        sig = TwoToneSignal(
            omega_s=OMEGA_S, omega_r=0.1, amp_model=FixedAmpUniformPhase(2.0)
        )
        plan = plan_for_detuning(OMEGA_S, 2 * PI, 1.0)
        p = p_bessel(plan.detuning(sig.omega_1), plan.detuning(sig.omega_2), 2.0)
        batch = simulate_batch(sig, plan, NO_NOISE, 10**6, RunSeed(3), Convention.EFFECTIVE)
        assert abs(batch.frequency - p) < 4 * math.sqrt(p * (1 - p) / 10**6)

    def test_readout_floor(self):
        sig, plan = _resonant(1e-14)
        noise = NoiseSpec(readout_eps=0.01)
        batch = simulate_batch(sig, plan, noise, 10**6, RunSeed(2))
        assert abs(batch.frequency - 0.01) < 4 * math.sqrt(0.01 * 0.99 / 10**6)

    def test_dephasing_mixing(self):
        sig, plan = _resonant(0.1)
        kappa = 0.3
        noise = NoiseSpec(kappa=kappa)
        p0 = p_gaussian(plan.detuning(sig.omega_1), plan.detuning(sig.omega_2), 1.0)
        p = 0.5 * (1 - math.exp(-2 * kappa * plan.total_time) * (1 - 2 * p0))
        batch = simulate_batch(sig, plan, noise, 10**6, RunSeed(4), Convention.EFFECTIVE)
        assert abs(batch.frequency - p) < 4 * math.sqrt(p * (1 - p) / 10**6)

    def test_reproducible_across_thread_counts(self):
        sig, plan = _resonant(0.1)
        counts = {
            t: simulate_batch(sig, plan, NO_NOISE, 3 * 10**5, RunSeed(5), threads=t).n_ones
            for t in (1, 2, 8)
        }
        assert len(set(counts.values())) == 1

    def test_batch_serializes_to_record_schema(self):
        sig, plan = _resonant(0.1)
        batch = simulate_batch(sig, plan, NO_NOISE, 1000, RunSeed(5, 2))
        d = batch.to_dict()
        assert d["n_shots"] == 1000 and d["n_ones"] == batch.n_ones
        assert d["master_seed"] == 5 and d["stream_index"] == 2
        assert d["convention"] == "effective"
        import json

        assert json.loads(json.dumps(d)) == d

    def test_physical_convention_closed_form(self):
        sig, plan = _resonant(0.1)
        t = plan.total_time
        x = 0.0
        for w in (sig.omega_1, sig.omega_2):
            d = plan.detuning(w)
            x += 8 * (math.tan(w * plan.tau / 2) / w) ** 2 * math.sin(d * t / 2) ** 2
        p = -0.5 * math.expm1(-x)
        batch = simulate_batch(sig, plan, NO_NOISE, 10**6, RunSeed(9), Convention.PHYSICAL)
        assert abs(batch.frequency - p) < 4 * math.sqrt(p * (1 - p) / 10**6)


class TestOuSimulation:
    def test_noise_floor(self):
        sig = TwoToneSignal(omega_s=2 * PI, omega_r=1e-12, amp_model=GaussianIID(1.0))
        plan = PulsePlan(tau=1.0, n_pulses=1)
        gamma = 0.01
        sigma_n = math.sqrt(1e-3 * PI**2)
        noise = NoiseSpec(ou=OUParams(gamma=gamma, sigma_n=sigma_n))
        phases = simulate_ou_batch(sig, plan, noise, 10**5, RunSeed(11))
        assert phases.var() == pytest.approx(ou_noise_floor(sigma_n, gamma, 1.0), rel=0.1)

    def test_frozen_noise_reduces_to_free_phase(self):
        sig = TwoToneSignal(omega_s=2 * PI, omega_r=0.01, amp_model=GaussianIID(1.0))
        plan = PulsePlan(tau=1.0, n_pulses=1)
        noise = NoiseSpec(ou=OUParams(gamma=1e-12, sigma_n=0.0))
        q0 = np.array([0.7, -0.3, 0.2, 1.1])
        phi = simulate_ou_shot(sig, plan, None, RunSeed(0), noise=noise, q0=q0)
        exact = accumulated_phase_free(Quadratures(*q0), sig, 1.0)
        assert abs(phi - exact) < 1e-6

    def test_frozen_noise_reduces_to_pulsed_phase(self):
        sig = TwoToneSignal(omega_s=40 * PI, omega_r=0.3, amp_model=GaussianIID(1.0))
        plan = plan_for_detuning(40 * PI, 2 * PI, 1.0)
        noise = NoiseSpec(ou=OUParams(gamma=1e-12, sigma_n=0.0))
        q0 = np.array([0.7, -0.3, 0.2, 1.1])
        dt = (2 * PI / sig.omega_s) / 800
        phi = simulate_ou_shot(sig, plan, dt, RunSeed(0), noise=noise, q0=q0)
        exact = two_tone_phase_pulsed(Quadratures(*q0), sig, plan)
        assert abs(phi - exact) < 1e-6

    def test_halving_dt_is_converged(self):
        sig = TwoToneSignal(omega_s=2 * PI, omega_r=0.01, amp_model=GaussianIID(1.0))
        plan = PulsePlan(tau=1.0, n_pulses=1)
        noise = NoiseSpec(ou=OUParams(gamma=1e-12, sigma_n=0.0))
        q0 = np.array([0.7, -0.3, 0.2, 1.1])
        coarse = simulate_ou_shot(sig, plan, None, RunSeed(0), noise=noise, q0=q0)
        fine = simulate_ou_shot(sig, plan, (2 * PI / sig.omega_s) / 200, RunSeed(0),
                                noise=noise, q0=q0)
        assert abs(coarse - fine) < 1e-6

    def test_exact_update_preserves_stationary_variance(self):
        gamma, sigma_n, dt = 0.7, 1.3, 0.01
        decay, kick = ou_step_params(gamma, sigma_n, dt)
        target = sigma_n**2 / (2 * gamma)
        # the exact update has the stationary law as its fixed point
        assert kick**2 / (1 - decay**2) == pytest.approx(target, rel=1e-12)
        rng = RunSeed(13).generator()
        x = rng.normal(0.0, math.sqrt(target), size=10**5)
        for _ in range(100):
            x = x * decay + kick * rng.normal(size=x.size)
        assert x.var() == pytest.approx(target, rel=0.05)

    def test_floor_plus_quadratic_fit(self):
        plan = PulsePlan(tau=1.0, n_pulses=1)
        gamma = 0.01
        sigma_n = math.sqrt(1e-3 * PI**2)
        noise = NoiseSpec(ou=OUParams(gamma=gamma, sigma_n=sigma_n))
        grid = [1e-12, 0.05, 0.1]
        ps = []
        for wr in grid:
            sig = TwoToneSignal(omega_s=2 * PI, omega_r=wr, amp_model=GaussianIID(1.0))
            phases = simulate_ou_batch(sig, plan, noise, 4 * 10**4, RunSeed(21))
            ps.append(np.mean(np.sin(phases) ** 2))
        design = np.vstack([np.ones(3), np.square(grid)]).T
        floor_fit, _ = np.linalg.lstsq(design, np.array(ps), rcond=None)[0]
        assert floor_fit == pytest.approx(ou_noise_floor(sigma_n, gamma, 1.0), rel=0.15)

    def test_dt_validation(self):
        sig = TwoToneSignal(omega_s=2 * PI, omega_r=0.01, amp_model=GaussianIID(1.0))
        plan = PulsePlan(tau=1.0, n_pulses=1)
        noise = NoiseSpec(ou=OUParams(gamma=0.01, sigma_n=0.1))
        with pytest.raises(ValidationError):
            simulate_ou_batch(sig, plan, noise, 10, RunSeed(0), dt=0.5)
        with pytest.raises(ValidationError):
            simulate_ou_batch(sig, plan, NO_NOISE, 10, RunSeed(0))

    def test_transition_counts_reproducible(self):
        sig = TwoToneSignal(omega_s=2 * PI, omega_r=0.05, amp_model=GaussianIID(1.0))
        plan = PulsePlan(tau=1.0, n_pulses=1)
        noise = NoiseSpec(ou=OUParams(gamma=0.01, sigma_n=0.1))
        phases = simulate_ou_batch(sig, plan, noise, 10**4, RunSeed(8))
        c1 = ou_transition_counts(phases, NO_NOISE, 1.0, RunSeed(8))
        c2 = ou_transition_counts(phases, NO_NOISE, 1.0, RunSeed(8))
        assert c1 == c2
        p_hat = np.mean(np.sin(phases) ** 2)
        assert abs(c1 / 10**4 - p_hat) < 4 * math.sqrt(max(p_hat, 1e-6) / 10**4)

    def test_thread_count_invariance(self):
        sig = TwoToneSignal(omega_s=2 * PI, omega_r=0.05, amp_model=GaussianIID(1.0))
        plan = PulsePlan(tau=1.0, n_pulses=1)
        noise = NoiseSpec(ou=OUParams(gamma=0.01, sigma_n=0.1))
        a = simulate_ou_batch(sig, plan, noise, 5000, RunSeed(8), threads=1)
        b = simulate_ou_batch(sig, plan, noise, 5000, RunSeed(8), threads=4)
        np.testing.assert_array_equal(a, b)
