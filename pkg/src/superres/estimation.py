"""Likelihood construction and the maximum-likelihood protocols.

All estimators are derivative-free: the resonant likelihood is flat in
omega_r at the lower boundary (p is even in omega_r), which makes gradient
methods fragile exactly where the physics is interesting.  1-D fits use a
coarse log grid plus golden-section refinement; multiparameter fits use
Nelder-Mead from several scattered starts.  The model is even in omega_r,
so |omega_r| is what gets estimated and omega_r is bounded below by 0.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from ._optimize import golden_min
from .analytics import Convention
from .errors import DomainError, ScanFailedError, ValidationError
from .montecarlo import RunSeed, simulate_batch
from .signal import GaussianIID, TwoToneSignal, plan_for_detuning_product

P_CLAMP = 1e-12


def batch_probability(settings, omega_r, omega_s=None, sigma=None):
    """Model transition probability of a batch for trial parameter values.

    Vectorized over omega_r.  The plan, convention, and noise channels come
    from the batch settings; omega_s and sigma default to the nominal signal.
    """
    signal = settings.signal
    plan = settings.plan
    if omega_s is None:
        omega_s = signal.omega_s
    if sigma is None:
        if not isinstance(signal.amp_model, GaussianIID):
            raise DomainError("likelihood models require the Gaussian amplitude model")
        sigma = signal.amp_model.sigma
    omega_r = np.asarray(omega_r, dtype=float)
    t = plan.total_time
    x = np.zeros_like(omega_r)
    for sgn in (+1.0, -1.0):
        w = omega_s + sgn * omega_r
        d = math.pi / plan.tau - w
        if settings.convention is Convention.PHYSICAL:
            weight = np.tan(w * plan.tau / 2.0) / w
        else:
            weight = 1.0 / d
        x = x + 8.0 * sigma**2 * weight**2 * np.sin(d * t / 2.0) ** 2
    p = -0.5 * np.expm1(-x)
    # dephasing mixes toward 1/2, readout flips outcomes
    f = math.exp(-2.0 * settings.noise.kappa * t)
    p = 0.5 * (1.0 - f * (1.0 - 2.0 * p))
    p = (1.0 - 2.0 * settings.noise.readout_eps) * p + settings.noise.readout_eps
    return p if p.ndim else float(p)


@dataclass(frozen=True)
class LikelihoodModel:
    """Binomial likelihood over batches with a chosen free-parameter set.

    param_names is an ordered subset of ("omega_r", "omega_s", "sigma");
    fixed values fill in the rest.
    """

    param_names: tuple
    bounds: np.ndarray
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        known = ("omega_r", "omega_s", "sigma")
        if not set(self.param_names) <= set(known):
            raise DomainError(f"parameters must be among {known}")
        b = np.asarray(self.bounds, dtype=float).reshape(len(self.param_names), 2)
        if np.any(b[:, 0] >= b[:, 1]):
            raise DomainError("each bound must satisfy lo < hi")
        object.__setattr__(self, "bounds", b)

    def probability(self, settings, theta):
        vals = dict(zip(self.param_names, np.atleast_1d(theta)))
        vals = {**self.fixed, **vals}
        return batch_probability(
            settings,
            vals.get("omega_r", 0.0),
            omega_s=vals.get("omega_s"),
            sigma=vals.get("sigma"),
        )


def log_likelihood(batches, model, theta):
    """Binomial log-likelihood summed over independent batches."""
    if not batches:
        raise ValidationError("need at least one batch")
    total = 0.0
    for b in batches:
        p = np.clip(model.probability(b.settings, theta), P_CLAMP, 1.0 - P_CLAMP)
        total += b.n_ones * np.log(p) + (b.n_shots - b.n_ones) * np.log1p(-p)
    return float(total)


@dataclass(frozen=True)
class EstimateReport:
    estimates: dict
    std_errors: dict
    log_likelihood: float
    boundary: bool = False
    rmse: Optional[dict] = None
    n_replicates: Optional[int] = None
    samples: Optional[dict] = None


N_GRID = 512
_GRID_FLOOR = 1e-9


def mle_1d(batch, omega_s, sigma, bounds, rel_tol=1e-6):
    """Maximum-likelihood |omega_r| from a single batch with known omega_s, sigma.

    Coarse search on a 512-point log-spaced grid over the bounds, then
    golden-section refinement.  A flat or boundary-piled likelihood returns
    the boundary value with the flag set.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if lo < 0 or hi <= lo:
        raise DomainError("omega_r bounds must satisfy 0 <= lo < hi")
    n, k = batch.n_shots, batch.n_ones
    settings = batch.settings

    def nll_vec(wr):
        p = np.clip(
            batch_probability(settings, wr, omega_s=omega_s, sigma=sigma),
            P_CLAMP,
            1.0 - P_CLAMP,
        )
        return -(k * np.log(p) + (n - k) * np.log1p(-p))

    grid = np.geomspace(max(lo, hi * _GRID_FLOOR), hi, N_GRID)
    if lo < grid[0]:
        grid = np.concatenate([[lo], grid])
    vals = nll_vec(grid)
    i = int(np.argmin(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    if a == b:
        x, fx = grid[i], vals[i]
    else:
        x, fx = golden_min(lambda w: float(nll_vec(w)), a, b, rel_tol=rel_tol)
    if vals[i] < fx:
        x, fx = grid[i], vals[i]

    at_boundary = x <= lo + rel_tol * max(hi, 1.0) or x >= hi * (1.0 - rel_tol)
    if at_boundary:
        x = lo if x <= lo + rel_tol * max(hi, 1.0) else hi
    se = math.nan
    if not at_boundary:
        h = max(x * 1e-4, 1e-12)
        p0 = batch_probability(settings, x, omega_s=omega_s, sigma=sigma)
        dp = (
            batch_probability(settings, x + h, omega_s=omega_s, sigma=sigma)
            - batch_probability(settings, x - h, omega_s=omega_s, sigma=sigma)
        ) / (2.0 * h)
        if 0.0 < p0 < 1.0 and dp != 0.0:
            se = math.sqrt(p0 * (1.0 - p0)) / (abs(dp) * math.sqrt(n))
    return EstimateReport(
        estimates={"omega_r": float(x)},
        std_errors={"omega_r": se},
        log_likelihood=-float(fx),
        boundary=bool(at_boundary),
    )


def mle_1d_study(signal_truth, plan, n_shots, replicates, seed, bounds,
                 convention=Convention.PHYSICAL, noise=None, threads=1):
    """Replicated 1-D MLE; returns the RMSE about the true omega_r."""
    from .analytics import NO_NOISE

    noise = NO_NOISE if noise is None else noise
    estimates = np.empty(replicates)
    for r in range(replicates):
        batch = simulate_batch(
            signal_truth, plan, noise, n_shots, seed.child(r), convention, threads
        )
        rep = mle_1d(
            batch,
            omega_s=signal_truth.omega_s,
            sigma=signal_truth.amp_model.sigma,
            bounds=bounds,
        )
        estimates[r] = rep.estimates["omega_r"]
    rmse = float(np.sqrt(np.mean((estimates - signal_truth.omega_r) ** 2)))
    return EstimateReport(
        estimates={"omega_r": float(np.mean(estimates))},
        std_errors={"omega_r": float(np.std(estimates))},
        log_likelihood=math.nan,
        rmse={"omega_r": rmse},
        n_replicates=replicates,
        samples={"omega_r": estimates},
    )


@dataclass(frozen=True)
class ScalingResult:
    exponent: float
    prefactor: float
    n_list: np.ndarray
    rmse: np.ndarray


MIN_REPLICATES = 200


def scaling_study(signal_truth, plan, n_list, replicates, seed, bounds,
                  convention=Convention.PHYSICAL, threads=1):
    """Least-squares slope of log RMSE against log N over a shot-count ladder."""
    n_list = np.asarray(sorted(int(n) for n in n_list))
    if n_list.size < 2 or math.log10(n_list[-1] / n_list[0]) < 1.5:
        raise ValidationError("n_list must span at least 1.5 decades")
    if replicates < MIN_REPLICATES:
        raise ValidationError(f"need at least {MIN_REPLICATES} replicates")
    rmse = np.empty(n_list.size)
    for j, n in enumerate(n_list):
        rep = mle_1d_study(
            signal_truth, plan, int(n), replicates,
            seed.child(j * replicates), bounds, convention, threads=threads,
        )
        rmse[j] = rep.rmse["omega_r"]
    if np.any(rmse == 0.0):
        raise ValidationError("zero-variance study: scaling exponent undefined")
    slope, intercept = np.polyfit(np.log(n_list), np.log(rmse), 1)
    return ScalingResult(
        exponent=float(slope),
        prefactor=float(math.exp(intercept)),
        n_list=n_list,
        rmse=rmse,
    )


@dataclass(frozen=True)
class ScanPoint:
    plan: object
    n_shots: int
    n_ones: int


def fit_detuning_scan(points, center, sigma_guess, seed=0, n_starts=8,
                      convention=Convention.PHYSICAL):
    """Fit (omega_s, sigma, omega_r) to transition counts over a pulse-frequency scan.

    Direct search (Nelder-Mead) from n_starts scattered starting points;
    counts may be real-valued, so noise-free probabilities fit exactly.
    """
    freqs = np.array([math.pi / pt.plan.tau for pt in points])
    phat = np.array([pt.n_ones / pt.n_shots for pt in points])
    if phat.min() > 0.4:
        raise ScanFailedError(
            f"scan does not cover the resonance dip (min p_hat = {phat.min():.3f} > 0.4)"
        )
    # the dip sits where delta_s*t = 2 pi, one lobe above the signal frequency
    dip_freq = freqs[int(np.argmin(phat))]
    t_ref = points[int(np.argmin(phat))].plan.total_time
    omega_s0 = dip_freq - 2.0 * math.pi / t_ref

    lo = np.array([0.0, omega_s0 - 0.75 * math.pi / t_ref, sigma_guess * 0.25])
    hi = np.array([0.5 * math.pi / t_ref, omega_s0 + 0.75 * math.pi / t_ref,
                   sigma_guess * 4.0])

    def nll(theta):
        wr, ws, sg = theta
        if wr < lo[0] or ws <= 0 or sg <= 0:
            return 1e300
        total = 0.0
        for pt in points:
            plan = pt.plan
            t = plan.total_time
            x = 0.0
            for sgn in (+1.0, -1.0):
                w = ws + sgn * wr
                d = math.pi / plan.tau - w
                if convention is Convention.PHYSICAL:
                    weight = math.tan(w * plan.tau / 2.0) / w
                else:
                    weight = 1.0 / d
                x += 8.0 * sg**2 * weight**2 * math.sin(d * t / 2.0) ** 2
            p = min(max(-0.5 * math.expm1(-x), P_CLAMP), 1.0 - P_CLAMP)
            total -= pt.n_ones * math.log(p) + (pt.n_shots - pt.n_ones) * math.log1p(-p)
        return total

    rng = RunSeed(int(seed)).generator()
    starts = lo + (hi - lo) * rng.random((n_starts, 3))
    best = None
    for s in starts:
        res = minimize(nll, s, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    wr, ws, sg = best.x
    return EstimateReport(
        estimates={"omega_r": abs(float(wr)), "omega_s": float(ws), "sigma": float(sg)},
        std_errors={},
        log_likelihood=-float(best.fun),
    )


def preliminary_scan(signal_truth, delta_grid, shots_per_point, seed,
                     t_target=1.0, convention=Convention.PHYSICAL, center=None,
                     threads=1):
    """Vary the pulse frequency over center + delta_grid and fit the dip.

    Returns the rough (omega_s, sigma, omega_r) estimate; omega_s is useful
    once its error is comparable to omega_r, omega_r itself is not.
    """
    from .analytics import NO_NOISE

    if shots_per_point < 1000:
        raise ValidationError("shots_per_point must be at least 1e3 for a usable scan")
    center = signal_truth.omega_s if center is None else center
    points = []
    for i, d in enumerate(np.asarray(delta_grid, dtype=float)):
        plan = plan_for_detuning_product(center, d * t_target, t_target)
        batch = simulate_batch(
            signal_truth, plan, NO_NOISE, shots_per_point, seed.child(i),
            convention, threads,
        )
        points.append(ScanPoint(plan=plan, n_shots=batch.n_shots, n_ones=batch.n_ones))
    sigma_guess = signal_truth.amp_model.sigma
    return fit_detuning_scan(points, center, sigma_guess,
                             seed=seed.master_seed, convention=convention)


def _scatter_starts(bounds, n_starts, rng):
    lo, hi = bounds[:, 0], bounds[:, 1]
    return lo + (hi - lo) * rng.random((n_starts, bounds.shape[0]))


def mle_multiparam(batches, bounds, seed=0, n_starts=8):
    """Joint MLE of (omega_r, omega_s, sigma) over batches at distinct detunings."""
    if len(batches) < 3:
        raise DomainError("the three-parameter fit needs at least three batches")
    pulse_freqs = {round(math.pi / b.settings.plan.tau, 9) for b in batches}
    if len(pulse_freqs) < 2:
        raise DomainError(
            "all batches share one detuning: the information matrix is singular"
        )
    model = LikelihoodModel(("omega_r", "omega_s", "sigma"), bounds)

    def nll(theta):
        if np.any(theta < model.bounds[:, 0]) or np.any(theta > model.bounds[:, 1]):
            return 1e300
        return -log_likelihood(batches, model, theta)

    rng = RunSeed(int(seed)).generator()
    starts = _scatter_starts(model.bounds, n_starts, rng)
    best = None
    for s in starts:
        res = minimize(nll, s, method="Nelder-Mead",
                       options={"xatol": 1e-11, "fatol": 1e-11, "maxiter": 6000})
        if best is None or res.fun < best.fun:
            best = res
    theta = best.x

    # per-shot information matrix at the optimum for the standard errors
    info = np.zeros((3, 3))
    steps = np.maximum(np.abs(theta) * 1e-5, 1e-10)
    for b in batches:
        grad = np.empty(3)
        p0 = float(model.probability(b.settings, theta))
        for i in range(3):
            tp, tm = theta.copy(), theta.copy()
            tp[i] += steps[i]
            tm[i] -= steps[i]
            grad[i] = (
                float(model.probability(b.settings, tp))
                - float(model.probability(b.settings, tm))
            ) / (2.0 * steps[i])
        p0 = min(max(p0, P_CLAMP), 1.0 - P_CLAMP)
        info += b.n_shots * np.outer(grad, grad) / (p0 * (1.0 - p0))
    cov = np.linalg.pinv(info)
    names = ("omega_r", "omega_s", "sigma")
    return EstimateReport(
        estimates={n: float(v) for n, v in zip(names, theta)},
        std_errors={
            n: float(math.sqrt(max(cov[i, i], 0.0))) for i, n in enumerate(names)
        },
        log_likelihood=-float(best.fun),
    )


@dataclass(frozen=True)
class MultiparamStudyResult:
    rmse: dict
    predicted_delta_omega_r: float
    detunings_t: tuple
    samples: dict


def multiparam_study(omega_s, omega_r, sigma, n_per_detuning, replicates, seed,
                     t_target=1.0, convention=Convention.PHYSICAL, threads=1):
    """Replicated three-detuning joint-estimation protocol.

    One batch on resonance plus one at each auxiliary detuning maximizing
    the information about omega_s and sigma; equal shots per detuning.
    """
    from .analytics import (
        NO_NOISE, maximize_fisher_omega_s, maximize_fisher_sigma, resonant_fisher_r,
    )

    st = sigma * t_target
    d_ws, _ = maximize_fisher_omega_s(st, t=t_target, convention=convention)
    d_sg, _ = maximize_fisher_sigma(st, t=t_target, convention=convention)
    detunings_t = (2.0 * math.pi, d_ws, d_sg)
    plans = [plan_for_detuning_product(omega_s, d, t_target) for d in detunings_t]
    truth = TwoToneSignal(omega_s=omega_s, omega_r=omega_r, amp_model=GaussianIID(sigma))

    bounds = np.array([
        [0.0, max(10.0 * omega_r, 0.3 / t_target)],
        [omega_s - 0.3 / t_target, omega_s + 0.3 / t_target],
        [sigma * 0.7, sigma * 1.4],
    ])
    names = ("omega_r", "omega_s", "sigma")
    samples = {n: np.empty(replicates) for n in names}
    for r in range(replicates):
        batches = [
            simulate_batch(truth, plan, NO_NOISE, n_per_detuning,
                           seed.child(3 * r + j), convention, threads)
            for j, plan in enumerate(plans)
        ]
        rep = mle_multiparam(batches, bounds, seed=seed.master_seed + r)
        for n in names:
            samples[n][r] = rep.estimates[n]
    truths = {"omega_r": omega_r, "omega_s": omega_s, "sigma": sigma}
    rmse = {
        n: float(np.sqrt(np.mean((samples[n] - truths[n]) ** 2))) for n in names
    }
    i_r = resonant_fisher_r(st, t_target, convention)
    predicted = math.sqrt(3.0 / (i_r * 3.0 * n_per_detuning))
    return MultiparamStudyResult(
        rmse=rmse,
        predicted_delta_omega_r=predicted,
        detunings_t=detunings_t,
        samples=samples,
    )
