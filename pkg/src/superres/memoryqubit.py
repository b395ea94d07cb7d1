"""Sampling-based schemes on memory qubits: Fourier-basis superresolution
over N stored phases, and two-window correlation on a single memory qubit.

Sampling grid: n windows per signal period (tau = 2 pi/(n omega_s)) over m
periods (T = m 2 pi/omega_s), N = n*m phases at t_j = j tau.  When
omega_r = 0 the stored state only has weight on harmonics of omega_s
(Fourier indices divisible by m); the weight elsewhere carries the
separation signal and grows as omega_r^2 T^2.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .montecarlo import RunSeed
from .signal import FixedAmpUniformPhase, GaussianIID

NORM_TOL = 1e-12


@dataclass(frozen=True)
class PhaseState:
    """Normalized memory-register state (1/sqrt(N)) sum_j e^{i phi_j} |j>."""

    amplitudes: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "amplitudes", amps)
        if self.n < 3 or self.m < 2:
            raise ValidationError("need n >= 3 samples per period and m >= 2 periods")
        if amps.shape != (self.n * self.m,):
            raise ValidationError("amplitude vector must have length n*m")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"state norm differs from 1 by {abs(norm - 1.0):.3g}")

    @property
    def size(self):
        return self.n * self.m

    def window_length(self, omega_s):
        return 2.0 * math.pi / (self.n * omega_s)

    def total_time(self, omega_s):
        return self.m * 2.0 * math.pi / omega_s


MAX_STATE_SIZE = 1 << 16


def sample_phases(q, signal, n, m):
    """Window phases phi_j = tau * sum_i [a_i cos(w_i t_j) + b_i sin(w_i t_j)]."""
    if n < 3 or m < 2:
        raise ValidationError("need n >= 3 samples per period and m >= 2 periods")
    size = n * m
    if size > MAX_STATE_SIZE:
        raise ValidationError(f"register size n*m = {size} exceeds {MAX_STATE_SIZE}")
    tau = 2.0 * math.pi / (n * signal.omega_s)
    t = np.arange(size) * tau
    phases = tau * (
        q.a1 * np.cos(signal.omega_1 * t)
        + q.b1 * np.sin(signal.omega_1 * t)
        + q.a2 * np.cos(signal.omega_2 * t)
        + q.b2 * np.sin(signal.omega_2 * t)
    )
    return phases


def build_phase_state(q, signal, n, m):
    phases = sample_phases(q, signal, n, m)
    amps = np.exp(1j * phases) / math.sqrt(phases.size)
    return PhaseState(amplitudes=amps, n=n, m=m)


def dft_spectrum(state):
    """Outcome probabilities of a Fourier-basis measurement of the register."""
    coeffs = np.fft.fft(state.amplitudes) / math.sqrt(state.size)
    return np.abs(coeffs) ** 2


def nonharmonic_probability(spectrum, n, m):
    """Total weight on Fourier indices that are not multiples of m."""
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.size != n * m:
        raise ValidationError("spectrum length must equal n*m")
    mask = np.arange(spectrum.size) % m != 0
    return float(spectrum[mask].sum())


def spectrum_table(spectrum, n, m):
    """Rows (index, index mod m, probability) for CSV export of a spectrum."""
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.size != n * m:
        raise ValidationError("spectrum length must equal n*m")
    return [(int(k), int(k % m), float(p)) for k, p in enumerate(spectrum)]


def mean_nonharmonic_probability(signal, n, m, n_draws, seed, chunk=2048):
    """Monte Carlo mean of the nonharmonic weight over quadrature draws."""
    if n_draws < 1:
        raise ValidationError("n_draws must be positive")
    size = n * m
    tau = 2.0 * math.pi / (n * signal.omega_s)
    t = np.arange(size) * tau
    tables = np.stack([
        np.cos(signal.omega_1 * t),
        np.sin(signal.omega_1 * t),
        np.cos(signal.omega_2 * t),
        np.sin(signal.omega_2 * t),
    ])
    mask = np.arange(size) % m != 0
    model = signal.amp_model
    total = 0.0
    done = 0
    block = 0
    while done < n_draws:
        k = min(chunk, n_draws - done)
        rng = seed.generator(counter_block=block)
        if isinstance(model, GaussianIID):
            quads = rng.normal(0.0, model.sigma, size=(k, 4))
        elif isinstance(model, FixedAmpUniformPhase):
            th = rng.uniform(0.0, 2.0 * math.pi, size=(k, 2))
            quads = model.omega_amp * np.stack(
                [np.cos(th[:, 0]), np.sin(th[:, 0]), np.cos(th[:, 1]), np.sin(th[:, 1])],
                axis=1,
            )
        else:
            raise ValidationError(f"unknown amplitude model {type(model).__name__}")
        phases = tau * (quads @ tables)
        amps = np.exp(1j * phases) / math.sqrt(size)
        spectra = np.abs(np.fft.fft(amps, axis=1)) ** 2 / size
        total += float(spectra[:, mask].sum())
        done += k
        block += 1
    return total / n_draws


def qft_fisher(sigma, tau, total_time):
    """Information about omega_r of the Fourier-basis scheme at omega_r = 0:
    (2/3) (sigma tau)^2 T^2."""
    return (2.0 / 3.0) * (sigma * tau) ** 2 * total_time**2


def qft_nonharmonic_mean(sigma, tau, total_time, omega_r):
    """Small-separation mean nonharmonic weight: (1/6) w_r^2 T^2 (sigma tau)^2."""
    return (omega_r * total_time) ** 2 * (sigma * tau) ** 2 / 6.0


def _check_window(total_time, omega_s):
    if omega_s is not None:
        cycles = total_time * omega_s / (2.0 * math.pi)
        if abs(cycles - round(cycles)) > 1e-9 or round(cycles) < 1:
            raise ValidationError(
                "correlation interval must be a positive integer number of signal periods"
            )


def correlation_probability(sigma, tau, total_time, omega_r, omega_s=None):
    """Two-window correlation transition probability: 2 sigma^2 tau^2 w_r^2 T^2."""
    _check_window(total_time, omega_s)
    return 2.0 * (sigma * tau) ** 2 * (omega_r * total_time) ** 2


def correlation_fisher(sigma, tau, total_time, omega_s=None):
    """Information about omega_r of the correlation scheme: 8 (sigma tau)^2 T^2."""
    _check_window(total_time, omega_s)
    return 8.0 * (sigma * tau) ** 2 * total_time**2


def correlation_mc_probability(signal, tau, total_time, n_draws, seed):
    """Monte Carlo over exact window phases of the correlation scheme.

    Windows at [0, tau] and [T, T + tau]; the transition probability per
    draw is sin^2(phi_1 - phi_2) with exact integrals over each window.
    """
    _check_window(total_time, signal.omega_s)
    if not isinstance(signal.amp_model, GaussianIID):
        raise ValidationError("the correlation closed form assumes Gaussian quadratures")
    rng = RunSeed(seed).generator() if not isinstance(seed, RunSeed) else seed.generator()
    quads = rng.normal(0.0, signal.amp_model.sigma, size=(n_draws, 4))

    def window_phase(t0):
        coeffs = np.empty(4)
        for i, w in enumerate((signal.omega_1, signal.omega_2)):
            coeffs[2 * i] = (math.sin(w * (t0 + tau)) - math.sin(w * t0)) / w
            coeffs[2 * i + 1] = (math.cos(w * t0) - math.cos(w * (t0 + tau))) / w
        return quads @ coeffs

    dphi = window_phase(0.0) - window_phase(total_time)
    return float(np.mean(np.sin(dphi) ** 2))
