"""Averaged transition probabilities and Fisher information, closed form.

Everything here works in the dimensionless products sigma_t = sigma*t,
omega_r_t = omega_r*t, delta_t = delta*t, kappa_t = kappa*t; an explicit
`t` argument restores units on outputs that carry them (Fisher information
about a frequency scales as t^2 per shot).

Conventions.  The same experiment can be written with the pulse prefactor
kept on the amplitudes (PHYSICAL) or absorbed into them (EFFECTIVE):

* EFFECTIVE - the tones oscillate at their detunings with bare amplitudes;
  the averaged probability is p = (1 - exp(-8 sum_i s^2 sin^2(d_i t/2)/d_i^2))/2
  and the resonant Fisher information about omega_r is 2 s^2 t^4 / pi^2.
* PHYSICAL - amplitudes carry tan(w_i tau/2) d_i/w_i (-> 2/pi for slow
  detuning), giving the resonant value 8 s^2 t^4 / pi^4.

Mixing the two silently is the classic mistake with these formulas, so
every result-producing function takes the flag explicitly.
"""

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._bessel import j0
from ._optimize import golden_max
from .errors import DomainError, SingularityError, ValidationError
from .fisherinfo import DensityMatrix, ParamDensityFamily

TWO_PI = 2.0 * math.pi


class Convention(enum.Enum):
    """Where the pi-pulse amplitude prefactor lives."""

    PHYSICAL = "physical"
    EFFECTIVE = "effective"


@dataclass(frozen=True)
class OUParams:
    """Ornstein-Uhlenbeck drift of the quadratures: damping gamma, diffusion sigma_n."""

    gamma: float
    sigma_n: float

    def __post_init__(self):
        if self.gamma < 0 or self.sigma_n < 0:
            raise ValidationError("OU parameters must be nonnegative")


@dataclass(frozen=True)
class NoiseSpec:
    ou: Optional[OUParams] = None
    kappa: float = 0.0
    readout_eps: float = 0.0
    floor_eps: float = 0.0

    def __post_init__(self):
        if self.kappa < 0:
            raise ValidationError("dephasing rate kappa must be nonnegative")
        if not 0.0 <= self.readout_eps < 0.5:
            raise ValidationError("readout error must lie in [0, 0.5)")
        if not 0.0 <= self.floor_eps < 0.5:
            raise ValidationError("probability floor must lie in [0, 0.5)")


NO_NOISE = NoiseSpec()

_SERIES_CUT = 1e-4


def _sin_half_sq_over_sq(x):
    """sin^2(x/2)/x^2 with the x -> 0 limit handled by series."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_CUT
    x_safe = np.where(small, 1.0, x)
    direct = np.sin(0.5 * x_safe) ** 2 / x_safe**2
    series = 0.25 - x**2 / 48.0 + x**4 / 1440.0
    return np.where(small, series, direct)


def _sin_half_over(x):
    """sin(x/2)/x with the x -> 0 limit handled by series."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_CUT
    x_safe = np.where(small, 1.0, x)
    direct = np.sin(0.5 * x_safe) / x_safe
    series = 0.5 - x**2 / 48.0
    return np.where(small, series, direct)


def gaussian_exponent(delta_t, sigma_t):
    """Single-tone contribution 8 sigma^2 sin^2(delta t/2)/delta^2 in t-products."""
    return 8.0 * sigma_t**2 * _sin_half_sq_over_sq(delta_t)


def p_gaussian(delta1_t, delta2_t, sigma_t):
    """Averaged transition probability for Gaussian i.i.d. quadratures.

    p = (1 - exp(-8 sum_i sigma^2/delta_i^2 sin^2(delta_i t/2)))/2, in [0, 0.5].
    """
    if np.any(np.asarray(sigma_t) < 0):
        raise ValidationError("sigma_t must be nonnegative")
    x = gaussian_exponent(delta1_t, sigma_t) + gaussian_exponent(delta2_t, sigma_t)
    out = -0.5 * np.expm1(-x)
    return float(out) if np.ndim(out) == 0 else out


def p_bessel(delta1_t, delta2_t, omega_amp_t):
    """Averaged transition probability for fixed amplitude, uniform phases.

    p = (1 - J0(4 W/d1 sin(d1 t/2)) J0(4 W/d2 sin(d2 t/2)))/2.
    """
    if np.any(np.asarray(omega_amp_t) < 0):
        raise ValidationError("omega_amp_t must be nonnegative")
    a1 = 4.0 * omega_amp_t * _sin_half_over(delta1_t)
    a2 = 4.0 * omega_amp_t * _sin_half_over(delta2_t)
    out = 0.5 * (1.0 - j0(a1) * j0(a2))
    return float(out) if np.ndim(out) == 0 else out


def binary_fisher(p, dp, limit_coefficient=None):
    """Fisher information of a two-outcome measurement: dp^2 / (p (1-p)).

    When p = c s^2 vanishes quadratically at s -> 0 the information stays
    finite; pass limit_coefficient=c to get the analytic limit 4c instead of
    evaluating at the singular point.
    """
    if limit_coefficient is not None:
        return 4.0 * limit_coefficient
    if not 0.0 < p < 1.0:
        raise SingularityError(
            f"p = {p} is on the boundary; use limit_coefficient for the p = c*s^2 limit"
        )
    return dp * dp / (p * (1.0 - p))


def _scan_weight_sq(delta_t, convention):
    """Squared per-tone amplitude weight (times delta^2) for detuning-grid forms.

    EFFECTIVE tones weigh as 1/delta; PHYSICAL ones carry the extra slow-
    detuning prefactor 2/pi.
    """
    if convention is Convention.PHYSICAL:
        return (2.0 / math.pi) ** 2
    return 1.0


def _p_two_tone(delta_s_t, omega_r_t, sigma_t, convention):
    """p on a detuning grid: tones at delta_s -/+ omega_r with equal amplitudes."""
    scale = math.sqrt(_scan_weight_sq(None, convention))
    return p_gaussian(delta_s_t - omega_r_t, delta_s_t + omega_r_t, sigma_t * scale)


def fisher_r(signal, plan, sigma_t, convention):
    """Fisher information about omega_r for a concrete signal and pulse plan.

    Computed as binary_fisher over the Gaussian closed form with a central
    finite difference in omega_r (relative step 1e-3).  PHYSICAL uses the
    exact per-tone weight tan(w_i tau/2)/w_i; EFFECTIVE uses 1/delta_i.
    """
    t = plan.total_time
    sigma = sigma_t / t
    omega_r = signal.omega_r
    if omega_r == 0.0:
        raise SingularityError("fisher_r is evaluated at small omega_r, never at 0")

    def prob(wr):
        phi_var = 0.0
        for sgn in (+1.0, -1.0):
            w = signal.omega_s + sgn * wr
            d = plan.detuning(w)
            if convention is Convention.PHYSICAL:
                weight = math.tan(w * plan.tau / 2.0) / w
            else:
                weight = 1.0 / d
            phi_var += 8.0 * sigma**2 * weight**2 * math.sin(d * t / 2.0) ** 2
        return -0.5 * math.expm1(-phi_var)

    h = abs(omega_r) * 1e-3
    p = prob(omega_r)
    dp = (prob(omega_r + h) - prob(omega_r - h)) / (2.0 * h)
    return binary_fisher(p, dp)


def fisher_r_scan(delta_s_t, sigma_t, omega_r_t, t=1.0, convention=Convention.EFFECTIVE):
    """fisher_r on a grid of central detunings (vectorized over delta_s_t)."""
    delta_s_t = np.asarray(delta_s_t, dtype=float)
    h = abs(omega_r_t) * 1e-3
    if h == 0.0:
        raise SingularityError("omega_r_t must be nonzero for a finite-difference scan")
    p = _p_two_tone(delta_s_t, omega_r_t, sigma_t, convention)
    dp = (
        _p_two_tone(delta_s_t, omega_r_t + h, sigma_t, convention)
        - _p_two_tone(delta_s_t, omega_r_t - h, sigma_t, convention)
    ) / (2.0 * h)
    out = dp**2 / (p * (1.0 - p)) * t**2
    return float(out) if out.ndim == 0 else out


def resonant_fisher_r(sigma_t, t=1.0, convention=Convention.EFFECTIVE):
    """Limiting omega_r -> 0 value on resonance: 2 s^2 t^4/pi^2 or 8 s^2 t^4/pi^4."""
    if convention is Convention.PHYSICAL:
        return 8.0 * sigma_t**2 * t**2 / math.pi**4
    return 2.0 * sigma_t**2 * t**2 / math.pi**2


def quadratic_coefficient(sigma_t, convention=Convention.EFFECTIVE):
    """c in the resonant small-separation law p = c (omega_r t)^2."""
    if convention is Convention.PHYSICAL:
        return 2.0 * sigma_t**2 / math.pi**4
    return sigma_t**2 / (2.0 * math.pi**2)


def fisher_with_floor(sigma_t, omega_r_t, eps, t=1.0, convention=Convention.EFFECTIVE):
    """Fisher information about omega_r when an additive noise floor eps caps p.

    p = c (omega_r t)^2 + eps with the resonant quadratic coefficient c;
    the information is (dp/domega_r)^2 / (p(1-p)).
    """
    if not 0.0 <= eps < 0.5:
        raise ValidationError("floor eps must lie in [0, 0.5)")
    c = quadratic_coefficient(sigma_t, convention)
    p = c * omega_r_t**2 + eps
    dp = 2.0 * c * omega_r_t * t
    if p <= 0.0:
        return binary_fisher(None, None, limit_coefficient=c * t**2)
    return dp * dp / (p * (1.0 - p))


def floor_half_max_eps(sigma_t, omega_r_t, convention=Convention.EFFECTIVE):
    """The floor at which fisher_with_floor drops to half its eps = 0 value."""
    return quadratic_coefficient(sigma_t, convention) * omega_r_t**2


def ou_noise_floor(sigma_n, gamma, t):
    """Leading-order probability floor from intra-shot OU drift: sigma_n^2 t^3/pi^2."""
    if sigma_n < 0 or gamma < 0 or t <= 0:
        raise ValidationError("OU floor needs sigma_n, gamma >= 0 and t > 0")
    if gamma * t > 0.1:
        warnings.warn(
            f"gamma*t = {gamma * t:.3g} is outside the leading-order regime (<= 0.1)",
            stacklevel=2,
        )
    eps = sigma_n**2 * t**3 / math.pi**2
    if eps >= 0.5:
        raise ValidationError(
            f"sigma_n^2 t^3/pi^2 = {eps:.3g} is not a valid probability floor"
        )
    return eps


def ou_resolution_ratio(omega_r, gamma):
    """Fourier-limit figure of merit: resolution needs omega_r/gamma > 1."""
    if gamma <= 0:
        raise ValidationError("gamma must be positive")
    return omega_r / gamma


def p_dephasing(sigma_t, omega_r_t, kappa_t):
    """Resonant transition probability with probe dephasing at rate kappa."""
    if kappa_t < 0:
        raise ValidationError("kappa_t must be nonnegative")
    x = sigma_t**2 * omega_r_t**2 / math.pi**2 + 2.0 * kappa_t
    return -0.5 * math.expm1(-x)


def fisher_dephasing(sigma_t, omega_r_t, kappa_t, t=1.0):
    """Closed-form information about omega_r under dephasing:

    I_r = 4 w_r^2 s^4 t^8 / (pi^4 [exp(4 k t + 2 w_r^2 s^2 t^4/pi^2) - 1]).
    """
    if kappa_t < 0:
        raise ValidationError("kappa_t must be nonnegative")
    num = 4.0 * omega_r_t**2 * sigma_t**4 * t**2 / math.pi**4
    den = math.expm1(4.0 * kappa_t + 2.0 * omega_r_t**2 * sigma_t**2 / math.pi**2)
    if den == 0.0:
        raise SingularityError("dephasing FI undefined at omega_r = kappa = 0")
    return num / den


def dephasing_minimal_time(sigma, omega_r, kappa):
    """Time scale below which dephasing dominates the omega_r signal:
    kappa^(1/3) sigma^(-2/3) omega_r^(-2/3)."""
    return kappa ** (1.0 / 3.0) / (sigma ** (2.0 / 3.0) * omega_r ** (2.0 / 3.0))


def dephasing_fi_ratio(sigma, omega_r, kappa, t):
    """Dephased over noiseless information at the same settings."""
    st, wrt, kt = sigma * t, omega_r * t, kappa * t
    return fisher_dephasing(st, wrt, kt, t) / fisher_dephasing(st, wrt, 0.0, t)


def p_readout(p_ideal, eps_prime):
    """Readout infidelity mixes the outcomes: p = (1-e')p + e'(1-p)."""
    if not 0.0 <= eps_prime < 0.5:
        raise ValidationError("readout error must lie in [0, 0.5)")
    p_ideal = np.asarray(p_ideal, dtype=float)
    out = (1.0 - 2.0 * eps_prime) * p_ideal + eps_prime
    return float(out) if out.ndim == 0 else out


def readout_resolution_threshold(eps_prime, sigma_t):
    """Smallest resolvable omega_r*t under readout error: sqrt(eps')/(sigma t)."""
    if not 0.0 <= eps_prime < 0.5:
        raise ValidationError("readout error must lie in [0, 0.5)")
    if sigma_t <= 0:
        raise ValidationError("sigma_t must be positive")
    return math.sqrt(eps_prime) / sigma_t


def sample_complexity(
    regime, sigma_t, omega_r_t, delta_s_t=None, convention=Convention.PHYSICAL
):
    """Shot count needed for resolution.

    'resonant': N = 1/p with the quadratic resonant probability (requires
    delta_s*t at a multiple of 2 pi).  'off_resonant': N = p(1-p) /
    ((d^2p/dw_r^2)^2 w_r^4) with the curvature from a central second
    difference, for the biased estimator regime.
    """
    if regime == "resonant":
        if delta_s_t is not None:
            k = round(delta_s_t / TWO_PI)
            if k == 0 or abs(delta_s_t - TWO_PI * k) > 1e-9:
                raise DomainError("resonant regime requires delta_s*t = 2 pi n")
        p = quadratic_coefficient(sigma_t, convention) * omega_r_t**2
        return 1.0 / p
    if regime == "off_resonant":
        if delta_s_t is None:
            raise DomainError("off_resonant regime requires delta_s_t")
        k = round(delta_s_t / TWO_PI)
        if k != 0 and abs(delta_s_t - TWO_PI * k) < 1e-6:
            raise DomainError("off_resonant regime called on a resonance")
        h = 1e-3
        p0 = _p_two_tone(delta_s_t, omega_r_t, sigma_t, convention)
        pp = _p_two_tone(delta_s_t, omega_r_t + h, sigma_t, convention)
        pm = _p_two_tone(delta_s_t, omega_r_t - h, sigma_t, convention)
        curv = (pp - 2.0 * p0 + pm) / h**2  # in (omega_r t) units
        return p0 * (1.0 - p0) / (curv**2 * omega_r_t**4)
    raise DomainError(f"unknown regime {regime!r}")


def fisher_upper_bound(sigma_t, t=1.0):
    """Control-independent ceiling for the average information: 16 s^2 t^4/pi^2."""
    return 16.0 * sigma_t**2 * t**2 / math.pi**2


def _fd_fisher(p_of, x0, h, p_center=None):
    p = p_of(x0) if p_center is None else p_center
    dp = (p_of(x0 + h) - p_of(x0 - h)) / (2.0 * h)
    return binary_fisher(p, dp)


def fisher_sigma(delta_s_t, sigma_t, omega_r_t, t=1.0, convention=Convention.EFFECTIVE):
    """Information about the quadrature spread sigma at a given detuning."""
    h = max(sigma_t * 1e-5, 1e-8)
    fi = _fd_fisher(
        lambda st: _p_two_tone(delta_s_t, omega_r_t, st, convention), sigma_t, h
    )
    return fi * t**2  # d/d(sigma t) -> d/d sigma carries one factor of t


def fisher_omega_s(delta_s_t, sigma_t, omega_r_t, t=1.0, convention=Convention.EFFECTIVE):
    """Information about the central frequency via the detuning dependence."""
    h = 1e-5 * max(1.0, abs(delta_s_t))
    fi = _fd_fisher(
        lambda dst: _p_two_tone(dst, omega_r_t, sigma_t, convention), delta_s_t, h
    )
    return fi * t**2


def maximize_fisher_sigma(
    sigma_t, omega_r_t=0.0, t=1.0, convention=Convention.EFFECTIVE,
    bracket=(math.pi, TWO_PI),
):
    """Best detuning for estimating sigma; golden-section over the bracket."""
    lo, hi = bracket
    hi = min(hi, TWO_PI - 1e-9)
    return golden_max(
        lambda dst: fisher_sigma(dst, sigma_t, omega_r_t, t, convention), lo, hi
    )


def maximize_fisher_omega_s(
    sigma_t, omega_r_t=0.0, t=1.0, convention=Convention.EFFECTIVE,
    bracket=(math.pi, TWO_PI),
):
    """Best detuning for estimating omega_s; golden-section over the bracket."""
    lo, hi = bracket
    hi = min(hi, TWO_PI - 1e-9)
    return golden_max(
        lambda dst: fisher_omega_s(dst, sigma_t, omega_r_t, t, convention), lo, hi
    )


def ramsey_family(
    sigma_t,
    delta_s_t,
    t=1.0,
    convention=Convention.EFFECTIVE,
    params=("omega_r",),
    fd_step=1e-5,
):
    """Two-outcome averaged Ramsey state as a parametrized density family.

    The state is diagonal in the measurement basis with eigenvalues
    (1 - p, p), p from the Gaussian closed form.  `params` selects which of
    ("omega_r", "sigma", "delta_s") the family exposes, in natural units;
    the rest stay fixed at the values given here.  Information about
    delta_s equals information about omega_s (the map is a shift).
    """
    known = {"omega_r", "sigma", "delta_s"}
    if not set(params) <= known:
        raise DomainError(f"params must be a subset of {sorted(known)}")

    def evaluate(theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (len(params),):
            raise DomainError(f"theta must have {len(params)} entries")
        vals = dict(zip(params, theta))
        wrt = vals.get("omega_r", 0.0) * t
        st = vals.get("sigma", sigma_t / t) * t
        dst = vals.get("delta_s", delta_s_t / t) * t
        if st < 0:
            raise DomainError("sigma must be nonnegative")
        p = _p_two_tone(dst, wrt, st, convention)
        return DensityMatrix(np.diag([1.0 - p, p]).astype(complex))

    return ParamDensityFamily(evaluate, n_params=len(params), fd_step=fd_step)
