"""Seeded stochastic simulation of measurement records.

Per shot: draw quadratures, accumulate the pulsed two-tone phase, mix the
transition probability through dephasing (analytically, matching the
Master-equation solution), apply the readout flip, and sample a Bernoulli
outcome.  Randomness is counter-based Philox keyed on
(master_seed, stream_index), with one counter block per 2^16-shot chunk, so
batches are bit-reproducible no matter how many workers split them.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .analytics import Convention, NoiseSpec
from .errors import ValidationError
from .signal import FixedAmpUniformPhase, GaussianIID, Quadratures, TwoToneSignal

CHUNK_SHOTS = 1 << 16


@dataclass(frozen=True)
class RunSeed:
    """Identity of one random stream: (master_seed, stream_index)."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ValidationError("stream_index must be nonnegative")

    def generator(self, counter_block=0):
        """Philox generator for this stream, offset to an independent counter block."""
        bitgen = np.random.Philox(
            key=np.array([self.master_seed, self.stream_index], dtype=np.uint64),
            counter=np.array([0, 0, 0, counter_block], dtype=np.uint64),
        )
        return np.random.Generator(bitgen)

    def child(self, k):
        """Derived stream for worker/replicate k of this seed."""
        return replace(self, stream_index=self.stream_index + k)


@dataclass(frozen=True)
class BatchSettings:
    signal: TwoToneSignal
    plan: object
    noise: NoiseSpec
    convention: Convention


@dataclass(frozen=True)
class ShotBatch:
    n_shots: int
    n_ones: int
    settings: BatchSettings
    seed: RunSeed

    def __post_init__(self):
        if not 0 <= self.n_ones <= self.n_shots:
            raise ValidationError("need 0 <= n_ones <= n_shots")

    @property
    def frequency(self):
        return self.n_ones / self.n_shots

    def to_dict(self):
        """Flat summary in the experiment-record JSON schema (see cli)."""
        sig, plan = self.settings.signal, self.settings.plan
        return {
            "n_shots": self.n_shots,
            "n_ones": self.n_ones,
            "master_seed": self.seed.master_seed,
            "stream_index": self.seed.stream_index,
            "omega_s": sig.omega_s,
            "omega_r": sig.omega_r,
            "tau": plan.tau,
            "n_pulses": plan.n_pulses,
            "convention": self.settings.convention.value,
            "kappa": self.settings.noise.kappa,
            "readout_eps": self.settings.noise.readout_eps,
        }


def draw_quadratures(model, rng):
    """One quadrature realization from an amplitude model."""
    if isinstance(model, GaussianIID):
        a1, b1, a2, b2 = rng.normal(0.0, model.sigma, size=4)
    elif isinstance(model, FixedAmpUniformPhase):
        th1, th2 = rng.uniform(0.0, 2.0 * math.pi, size=2)
        a1, b1 = model.omega_amp * math.cos(th1), model.omega_amp * math.sin(th1)
        a2, b2 = model.omega_amp * math.cos(th2), model.omega_amp * math.sin(th2)
    else:
        raise ValidationError(f"unknown amplitude model {type(model).__name__}")
    return Quadratures(a1, b1, a2, b2)


def phase_coefficients(signal, plan, convention):
    """Weights c with phi = (a1, b1, a2, b2) . c for the pulsed two-tone phase.

    PHYSICAL uses the exact tan(w tau/2)/w tone weight; EFFECTIVE treats the
    tones as free oscillations at their detunings (weight 1/delta).
    """
    t = plan.total_time
    coeffs = np.empty(4)
    for i, w in enumerate((signal.omega_1, signal.omega_2)):
        d = plan.detuning(w)
        if convention is Convention.PHYSICAL:
            weight = math.tan(w * plan.tau / 2.0) / w
        else:
            weight = 1.0 / d
        # cos-quadrature couples through 1 - cos(delta t), sin through sin(delta t)
        coeffs[2 * i] = weight * (1.0 - math.cos(d * t))
        coeffs[2 * i + 1] = weight * math.sin(d * t)
    return coeffs


def _draw_chunk_quads(model, rng, n):
    if isinstance(model, GaussianIID):
        return rng.normal(0.0, model.sigma, size=(n, 4))
    if isinstance(model, FixedAmpUniformPhase):
        th = rng.uniform(0.0, 2.0 * math.pi, size=(n, 2))
        quads = np.empty((n, 4))
        quads[:, 0] = np.cos(th[:, 0])
        quads[:, 1] = np.sin(th[:, 0])
        quads[:, 2] = np.cos(th[:, 1])
        quads[:, 3] = np.sin(th[:, 1])
        quads *= model.omega_amp
        return quads
    raise ValidationError(f"unknown amplitude model {type(model).__name__}")


def simulate_batch(signal, plan, noise, n_shots, seed, convention=Convention.EFFECTIVE,
                   threads=1):
    """Simulate n_shots Ramsey measurements; returns a ShotBatch.

    Deterministic in (seed, settings): the batch is cut into fixed 2^16-shot
    chunks, each drawing from its own counter block, and counts are summed.
    """
    if n_shots < 1:
        raise ValidationError("n_shots must be at least 1")
    coeffs = phase_coefficients(signal, plan, convention)
    t = plan.total_time
    dephasing_factor = math.exp(-2.0 * noise.kappa * t)
    eps_prime = noise.readout_eps

    chunks = [
        (block, min(CHUNK_SHOTS, n_shots - block * CHUNK_SHOTS))
        for block in range((n_shots + CHUNK_SHOTS - 1) // CHUNK_SHOTS)
    ]

    def run_chunk(args):
        block, size = args
        rng = seed.generator(counter_block=block)
        quads = _draw_chunk_quads(signal.amp_model, rng, size)
        uniforms = rng.random(size)
        return _kernels.count_transitions(
            quads, uniforms, coeffs, dephasing_factor, eps_prime
        )

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(run_chunk, chunks))
    else:
        counts = [run_chunk(c) for c in chunks]

    return ShotBatch(
        n_shots=n_shots,
        n_ones=int(sum(counts)),
        settings=BatchSettings(signal, plan, noise, convention),
        seed=seed,
    )


def _square_wave_weights(n_pulses, steps_per_seg, dt):
    """Trapezoid weights times the square-wave sign on the aligned time grid.

    Interior segment boundaries carry 0.5*(sign_left + sign_right) = 0 for
    alternating signs; global endpoints carry half weight.
    """
    n_steps = n_pulses * steps_per_seg
    w = np.zeros(n_steps + 1)
    for seg in range(n_pulses):
        sign = 1.0 if seg % 2 == 0 else -1.0
        lo, hi = seg * steps_per_seg, (seg + 1) * steps_per_seg
        w[lo] += 0.5 * sign
        w[lo + 1 : hi] += sign
        w[hi] += 0.5 * sign
    return w * dt


def ou_step_params(gamma, sigma_n, dt):
    """Exact discrete OU transition: decay and kick std over one step."""
    decay = math.exp(-gamma * dt)
    if gamma > 0:
        kick = sigma_n * math.sqrt(-math.expm1(-2.0 * gamma * dt) / (2.0 * gamma))
    else:
        kick = sigma_n * math.sqrt(dt)
    return decay, kick


def _ou_grid(signal, plan, dt):
    period = 2.0 * math.pi / signal.omega_s
    if dt is None:
        dt = period / 100.0
    if dt > period / 50.0:
        raise ValidationError("dt must resolve the signal: dt <= (2 pi/omega_s)/50")
    steps_per_seg = max(1, int(math.ceil(plan.tau / dt)))
    dt = plan.tau / steps_per_seg  # align the grid with the pulse boundaries
    n_steps = plan.n_pulses * steps_per_seg
    times = np.arange(n_steps + 1) * dt
    tables = np.empty((n_steps + 1, 4))
    tables[:, 0] = np.cos(signal.omega_1 * times)
    tables[:, 1] = np.sin(signal.omega_1 * times)
    tables[:, 2] = np.cos(signal.omega_2 * times)
    tables[:, 3] = np.sin(signal.omega_2 * times)
    weights = _square_wave_weights(plan.n_pulses, steps_per_seg, dt)
    return dt, n_steps, weights, tables


OU_CHUNK_SHOTS = 1 << 10


def simulate_ou_batch(signal, plan, noise, n_shots, seed, dt=None, threads=1, q0=None):
    """Phases of n_shots with intra-shot OU drift of the quadratures.

    Exact discrete OU updates on a grid aligned with the pulse boundaries;
    the phase integral is a trapezoid sum against the square wave.  q0
    overrides the stationary initialization (useful for frozen-noise checks).
    """
    if noise.ou is None:
        raise ValidationError("NoiseSpec.ou must be set for an OU simulation")
    if n_shots < 1:
        raise ValidationError("n_shots must be at least 1")
    gamma, sigma_n = noise.ou.gamma, noise.ou.sigma_n
    dt, n_steps, weights, tables = _ou_grid(signal, plan, dt)
    decay, kick = ou_step_params(gamma, sigma_n, dt)
    if gamma > 0:
        stat_std = sigma_n / math.sqrt(2.0 * gamma)
    else:
        stat_std = 0.0

    chunks = [
        (block, min(OU_CHUNK_SHOTS, n_shots - block * OU_CHUNK_SHOTS))
        for block in range((n_shots + OU_CHUNK_SHOTS - 1) // OU_CHUNK_SHOTS)
    ]

    def run_chunk(args):
        block, size = args
        rng = seed.generator(counter_block=block)
        if q0 is not None:
            init = np.broadcast_to(np.asarray(q0, dtype=float), (size, 4)).copy()
        else:
            init = rng.normal(0.0, 1.0, size=(size, 4)) * stat_std
        noise_steps = rng.normal(0.0, 1.0, size=(n_steps, size, 4))
        return _kernels.ou_phases(init, noise_steps, decay, kick, weights, tables)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run_chunk, chunks))
    else:
        parts = [run_chunk(c) for c in chunks]
    return np.concatenate(parts)


def simulate_ou_shot(signal, plan, dt, rng_or_seed, noise=None, q0=None):
    """Single OU-drifted shot; returns the accumulated phase in radians."""
    if noise is None:
        raise ValidationError("pass the NoiseSpec carrying the OU parameters")
    seed = rng_or_seed if isinstance(rng_or_seed, RunSeed) else RunSeed(int(rng_or_seed))
    return float(simulate_ou_batch(signal, plan, noise, 1, seed, dt=dt, q0=q0)[0])


def ou_transition_counts(phases, noise, t, seed):
    """Bernoulli counts from OU phases, with dephasing and readout applied."""
    p = 0.5 - 0.5 * math.exp(-2.0 * noise.kappa * t) * np.cos(2.0 * phases)
    p = (1.0 - 2.0 * noise.readout_eps) * p + noise.readout_eps
    rng = seed.generator(counter_block=1 << 32)  # clear of the path blocks
    return int(np.count_nonzero(rng.random(p.size) < p))
