"""Two-tone signal model and phase accumulation under pi-pulse control.

The signal acting on the sensor is
    H(t) = [a1 cos(w1 t) + b1 sin(w1 t) + a2 cos(w2 t) + b2 sin(w2 t)] sz
with w1 = omega_s + omega_r and w2 = omega_s - omega_r.  Quadratures carry
the (cos, sin) coefficient layout of this Hamiltonian.  All frequencies are
angular (rad per unit time); nothing in this module fixes a time scale.

Pulsed evolution applies a pi-pulse every tau, i.e. at a pulse angular
frequency pi/tau; the detuning of tone omega is delta = pi/tau - omega.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularSpacingError, ValidationError

SPACING_TOL = 1e-6  # closeness of omega*tau to an odd multiple of pi


@dataclass(frozen=True)
class GaussianIID:
    """Shot-to-shot quadrature noise: every quadrature is N(0, sigma).

    sigma = 0 is allowed as the degenerate no-signal model.
    """

    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValidationError("GaussianIID requires sigma >= 0")


@dataclass(frozen=True)
class FixedAmpUniformPhase:
    """Constant tone amplitude Omega with an independent uniform phase per tone."""

    omega_amp: float

    def __post_init__(self):
        if not self.omega_amp > 0:
            raise ValidationError("FixedAmpUniformPhase requires Omega > 0")


@dataclass(frozen=True)
class TwoToneSignal:
    omega_s: float
    omega_r: float
    amp_model: object = None

    def __post_init__(self):
        if not self.omega_s > 0:
            raise ValidationError("omega_s must be positive")
        if not abs(self.omega_r) < self.omega_s:
            raise ValidationError(
                "|omega_r| must stay below omega_s so both tone frequencies are positive"
            )

    @property
    def omega_1(self):
        return self.omega_s + self.omega_r

    @property
    def omega_2(self):
        return self.omega_s - self.omega_r


@dataclass(frozen=True)
class Quadratures:
    """Cos/sin amplitudes (a_i, b_i) of the two tones."""

    a1: float
    b1: float
    a2: float
    b2: float

    def __post_init__(self):
        for name in ("a1", "b1", "a2", "b2"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"quadrature {name} must be finite")

    def as_array(self):
        return np.array([self.a1, self.b1, self.a2, self.b2])


@dataclass(frozen=True)
class PulsePlan:
    """Pi-pulse spacing tau repeated n_pulses times; total time t = n_pulses * tau."""

    tau: float
    n_pulses: int

    def __post_init__(self):
        if not self.tau > 0:
            raise ValidationError("tau must be positive")
        if self.n_pulses < 1:
            raise ValidationError("n_pulses must be a positive integer")

    @property
    def total_time(self):
        return self.n_pulses * self.tau

    @property
    def pulse_omega(self):
        return math.pi / self.tau

    def detuning(self, omega):
        """delta of a tone at angular frequency omega: tau = pi/(omega + delta)."""
        return math.pi / self.tau - omega

    def delta_s(self, signal):
        return 0.5 * (self.detuning(signal.omega_1) + self.detuning(signal.omega_2))


def plan_for_detuning(omega_s, delta_s, t):
    """Build the plan whose pulse frequency is omega_s + delta_s over total time t.

    n_pulses must come out integer, so the realized central detuning is the
    closest achievable one: delta = n*pi/t - omega_s with n = round(t*(omega_s+delta_s)/pi).
    """
    n = int(round(t * (omega_s + delta_s) / math.pi))
    if n < 1:
        raise ValidationError("requested detuning gives a non-positive pulse count")
    return PulsePlan(tau=t / n, n_pulses=n)


def plan_for_detuning_product(omega_s, delta_s_t, t_target):
    """Plan realizing the detuning-time product delta_s * t exactly.

    Holding t fixed quantizes delta_s*t in steps of pi; here tau is solved so
    that n*pi - omega_s*t equals the requested product, letting the total
    time float by at most pi/omega_s around t_target.
    """
    n = int(round((omega_s * t_target + delta_s_t) / math.pi))
    if n < 1:
        raise ValidationError("requested product gives a non-positive pulse count")
    tau = (n * math.pi - delta_s_t) / (n * omega_s)
    if tau <= 0:
        raise ValidationError("requested product is unreachable at this omega_s")
    return PulsePlan(tau=tau, n_pulses=n)


def _check_spacing(omega, tau):
    # odd multiples of pi in omega*tau make the phase impossible to nullify
    x = omega * tau / math.pi
    nearest_odd = 2 * math.floor((x - 1) / 2 + 0.5) + 1
    if abs(x - nearest_odd) * math.pi <= SPACING_TOL:
        raise SingularSpacingError(
            f"omega*tau = {omega * tau:.9g} sits at an odd multiple of pi"
        )


def accumulated_phase_free(q, signal, t):
    """Phase accumulated with no control: sum_i a_i sin(w_i t)/w_i + b_i (1-cos(w_i t))/w_i."""
    if not t > 0:
        raise ValidationError("t must be positive")
    phi = 0.0
    for a, b, w in (
        (q.a1, q.b1, signal.omega_1),
        (q.a2, q.b2, signal.omega_2),
    ):
        phi += a * math.sin(w * t) / w + b * (1.0 - math.cos(w * t)) / w
    return phi


def accumulated_phase_pulsed(a_sin, b_cos, omega, plan):
    """Exact single-tone phase under pi-pulses every tau.

    Takes the tone as H = [a_sin*sin(omega t) + b_cos*cos(omega t)] sz and returns
        phi = [a_sin*sin(delta t) + b_cos*(1 - cos(delta t))] * tan(omega tau/2)/omega
    with delta = pi/tau - omega and t = n_pulses * tau.
    """
    _check_spacing(omega, plan.tau)
    delta = plan.detuning(omega)
    t = plan.total_time
    w = math.tan(omega * plan.tau / 2.0) / omega
    return (a_sin * math.sin(delta * t) + b_cos * (1.0 - math.cos(delta * t))) * w


def two_tone_phase_pulsed(q, signal, plan):
    """Pulsed phase of the full two-tone signal (quadratures in cos/sin layout)."""
    phi = accumulated_phase_pulsed(q.b1, q.a1, signal.omega_1, plan)
    phi += accumulated_phase_pulsed(q.b2, q.a2, signal.omega_2, plan)
    return phi


def pulsed_phase_piecewise(a_sin, b_cos, omega, plan):
    """Oracle for the pulsed phase: segment-by-segment integration of the
    sign-flipped integrand, using the exact antiderivative on each segment."""
    tau = plan.tau
    phi = 0.0
    for n in range(plan.n_pulses):
        t0, t1 = n * tau, (n + 1) * tau
        seg = a_sin * (math.cos(omega * t0) - math.cos(omega * t1)) / omega
        seg += b_cos * (math.sin(omega * t1) - math.sin(omega * t0)) / omega
        phi += seg if n % 2 == 0 else -seg
    return phi


def effective_prefactor(omega, tau):
    """Amplitude prefactor tan(omega tau/2) * delta/omega of the pulse-shifted tone."""
    _check_spacing(omega, tau)
    delta = math.pi / tau - omega
    return math.tan(omega * tau / 2.0) * delta / omega


def gradient_span_rank(omega_s, omega_r, a, b, alpha, beta, times):
    """Numerical rank of the span of signal gradients over the sample times.

    The signal is parametrized near degeneracy as
        f(t) = a sin(omega_s t + alpha) + b omega_r t sin(omega_s t + beta)
    and the gradient is taken with respect to (omega_s, omega_r, a, b, alpha, beta).
    """
    times = np.asarray(times, dtype=float)
    if times.size < 6:
        raise ValidationError("need at least 6 sample times for a rank-6 gradient span")
    sa = np.sin(omega_s * times + alpha)
    ca = np.cos(omega_s * times + alpha)
    sb = np.sin(omega_s * times + beta)
    cb = np.cos(omega_s * times + beta)
    grad = np.vstack([
        a * times * ca + b * omega_r * times**2 * cb,
        b * times * sb,
        sa,
        omega_r * times * sb,
        a * ca,
        b * omega_r * times * cb,
    ])
    sv = np.linalg.svd(grad, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > 1e-10 * sv[0]))
