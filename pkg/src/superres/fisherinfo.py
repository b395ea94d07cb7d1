"""Density-matrix spectral tools, quantum/classical Fisher information, and
the eigenvalue-scaling test for superresolution.

Derivatives of rho are taken by central finite differences (default step
1e-5 in natural units).  Sums over eigenvalue pairs drop terms with
p_i + p_j below 1e-14, and eigenvector terms inside near-degenerate pairs
(|p_i - p_j| < 1e-12), where the eigenbasis is gauge-ambiguous and the
coefficient vanishes anyway.
"""

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError, ValidationError

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
EIGENVALUE_FLOOR = 1e-14
DEGENERACY_TOL = 1e-12
REGULARITY_TOL = 1e-8
DEFAULT_FD_STEP = 1e-5


@dataclass(frozen=True)
class DensityMatrix:
    """Finite-dimensional quantum state: Hermitian, unit trace, PSD."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("density matrix must be square")
        object.__setattr__(self, "matrix", m)
        herm = np.max(np.abs(m - m.conj().T))
        if herm > HERMITICITY_TOL:
            raise ValidationError(f"not Hermitian: max |rho_ij - conj(rho_ji)| = {herm:.3g}")
        tr = abs(np.trace(m) - 1.0)
        if tr > TRACE_TOL:
            raise ValidationError(f"trace differs from 1 by {tr:.3g}")
        lo = float(np.linalg.eigvalsh(m).min())
        if lo < PSD_TOL:
            raise ValidationError(f"not positive semidefinite: min eigenvalue = {lo:.3g}")

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ParamDensityFamily:
    """A map theta -> DensityMatrix with a finite-difference step policy."""

    evaluate: Callable[[np.ndarray], DensityMatrix]
    n_params: int
    fd_step: object = DEFAULT_FD_STEP

    def __post_init__(self):
        step = np.broadcast_to(np.asarray(self.fd_step, dtype=float), (self.n_params,))
        if np.any(step <= 0):
            raise ValidationError("fd_step must be positive per parameter")
        object.__setattr__(self, "fd_step", step.copy())

    def rho(self, theta):
        return self.evaluate(np.asarray(theta, dtype=float))

    def drho(self, theta, idx):
        """Central finite difference of rho about parameter idx."""
        theta = np.asarray(theta, dtype=float)
        if not 0 <= idx < self.n_params:
            raise DomainError(f"parameter index {idx} out of range")
        h = self.fd_step[idx]
        tp, tm = theta.copy(), theta.copy()
        tp[idx] += h
        tm[idx] -= h
        return (self.rho(tp).matrix - self.rho(tm).matrix) / (2.0 * h)


@dataclass(frozen=True)
class FisherMatrix:
    """Real symmetric PSD matrix of per-shot information, units 1/theta^2."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("Fisher matrix must be square")
        object.__setattr__(self, "entries", m)
        if np.max(np.abs(m - m.T)) > 1e-10:
            raise ValidationError("Fisher matrix must be symmetric")
        if float(np.linalg.eigvalsh(m).min()) < -1e-8:
            raise ValidationError("Fisher matrix must be PSD up to numerical noise")

    @property
    def n(self):
        return self.entries.shape[0]

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.entries).min())


def spectral_decompose(rho):
    """Eigenvalues (descending, clipped to [0, 1]) and orthonormal eigenvectors."""
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    vals, vecs = np.linalg.eigh(rho.matrix)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, 1.0)
    return vals, vecs[:, order]


def _eigenbasis_derivative(family, theta, idx, vecs):
    """drho/dtheta_idx expressed in a fixed eigenbasis."""
    d = family.drho(theta, idx)
    return vecs.conj().T @ d @ vecs


def qfi(family, theta, idx):
    """Quantum Fisher information about theta[idx].

    Spectral form: sum_j (dp_j)^2/p_j + eigenvector terms
    2 |(drho)_ij|^2/(p_i + p_j) over nondegenerate pairs.
    """
    vals, vecs = spectral_decompose(family.rho(theta))
    dr = _eigenbasis_derivative(family, theta, idx, vecs)
    return _qfi_from_parts(vals, dr, dr)


def _qfi_from_parts(vals, dr_k, dr_l):
    n = vals.size
    total = 0.0
    for i in range(n):
        for j in range(n):
            psum = vals[i] + vals[j]
            if psum < EIGENVALUE_FLOOR:
                continue
            if i != j and abs(vals[i] - vals[j]) < DEGENERACY_TOL:
                continue
            total += 2.0 * (dr_k[i, j] * dr_l[j, i]).real / psum
    return total


def qfi_matrix(family, theta):
    """Full quantum Fisher information matrix (same pruning rules as qfi)."""
    vals, vecs = spectral_decompose(family.rho(theta))
    derivs = [
        _eigenbasis_derivative(family, theta, k, vecs) for k in range(family.n_params)
    ]
    n = family.n_params
    m = np.zeros((n, n))
    for k in range(n):
        for l in range(k, n):
            m[k, l] = m[l, k] = _qfi_from_parts(vals, derivs[k], derivs[l])
    return FisherMatrix(m)


def classical_fi_matrix(family, theta):
    """Information carried by the eigenvalues alone (eigenbasis measurement).

    Eigenvalue derivatives come from finite differences of
    <psi_j(theta)| rho(theta +/- h) |psi_j(theta)> with the center eigenbasis held fixed.
    """
    theta = np.asarray(theta, dtype=float)
    vals, vecs = spectral_decompose(family.rho(theta))
    n = family.n_params
    dp = np.zeros((n, vals.size))
    for k in range(n):
        h = family.fd_step[k]
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        pp = np.einsum("ij,jk,ki->i", vecs.conj().T, family.rho(tp).matrix, vecs).real
        pm = np.einsum("ij,jk,ki->i", vecs.conj().T, family.rho(tm).matrix, vecs).real
        dp[k] = (pp - pm) / (2.0 * h)
    keep = vals > EIGENVALUE_FLOOR
    c = (dp[:, keep] / vals[keep]) @ dp[:, keep].T
    c = 0.5 * (c + c.T)
    return FisherMatrix(c)


def sqrt_rho_deriv_trace(family, theta, idx):
    """trace[(d sqrt(rho)/dtheta)^2] by central differences of the matrix square root."""
    theta = np.asarray(theta, dtype=float)
    if not 0 <= idx < family.n_params:
        raise DomainError(f"parameter index {idx} out of range")
    h = family.fd_step[idx]

    def sqrtm(t):
        vals, vecs = spectral_decompose(family.rho(t))
        return (vecs * np.sqrt(vals)) @ vecs.conj().T

    tp, tm = theta.copy(), theta.copy()
    tp[idx] += h
    tm[idx] -= h
    d = (sqrtm(tp) - sqrtm(tm)) / (2.0 * h)
    return float(np.sum(np.abs(d) ** 2))  # Frobenius norm^2 = trace(d^2), d Hermitian


class CriterionResult(NamedTuple):
    exponent_k: float
    limit_fi: float
    verdict: bool
    exponent_defined: bool
    fi_slope: float


EXPONENT_TOL = 0.05
_FLAT_EIGENVALUE_TOL = 1e-13


def superres_criterion(family, sep_idx, grid, theta0=None):
    """Test whether a symmetric family supports superresolution in theta[sep_idx].

    Fits the log-log slope k of the smallest nonconstant eigenvalue change
    against the separation grid, and extrapolates the information to
    separation -> 0 from the two smallest grid points.  Verdict: k in
    (1, 2] within +/-0.05 and a non-vanishing extrapolated information.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2 or np.any(grid <= 0):
        raise DomainError("grid must hold at least two strictly positive separations")
    grid = np.sort(grid)
    ratios = np.diff(np.log(grid))
    if np.max(np.abs(ratios - ratios[0])) > 1e-6:
        raise DomainError("grid must be log-spaced")

    if theta0 is None:
        theta0 = np.zeros(family.n_params)
    theta0 = np.asarray(theta0, dtype=float)

    def at(s):
        th = theta0.copy()
        th[sep_idx] = s
        return family.rho(th)

    for s in grid:
        asym = np.max(np.abs(at(s).matrix - at(-s).matrix))
        if asym > 1e-9:
            raise DomainError(
                f"family is not symmetric in the separation: |rho(s)-rho(-s)| = {asym:.3g}"
            )

    base_vals, _ = spectral_decompose(at(0.0))
    changes = np.empty((grid.size, base_vals.size))
    for i, s in enumerate(grid):
        vals, _ = spectral_decompose(at(s))
        changes[i] = np.abs(vals - base_vals)

    moving = changes.max(axis=0) > _FLAT_EIGENVALUE_TOL
    if not moving.any():
        return CriterionResult(math.nan, 0.0, False, False, math.nan)

    # among the eigenvalues that move, follow the most-vanishing one
    vals_small, _ = spectral_decompose(at(grid[0]))
    candidates = np.where(moving)[0]
    target = candidates[np.argmin(vals_small[candidates])]
    logs = np.log(grid)
    logc = np.log(np.maximum(changes[:, target], 1e-300))
    k = float(np.polyfit(logs, logc, 1)[0])

    fi = [qfi(family, _with(theta0, sep_idx, s), sep_idx) for s in grid[:2]]
    if fi[0] <= 0.0 or fi[1] <= 0.0:
        return CriterionResult(k, 0.0, False, True, math.inf)
    slope = (math.log(fi[1]) - math.log(fi[0])) / (logs[1] - logs[0])
    # continue the log-log trend one grid step below the smallest separation
    limit_fi = float(fi[0] * math.exp(-slope * (logs[1] - logs[0])))
    verdict = bool(
        1.0 + EXPONENT_TOL < k <= 2.0 + EXPONENT_TOL
        and slope < 0.5
        and limit_fi > 1e-8
    )
    return CriterionResult(k, limit_fi, verdict, True, float(slope))


def _with(theta, idx, value):
    th = np.asarray(theta, dtype=float).copy()
    th[idx] = value
    return th


class MultivariateResult(NamedTuple):
    regular: bool
    c22_min_eig: float
    qfi_min_eig: float
    qfi_regular: bool


def multivariate_criterion(family, problematic_indices, theta=None):
    """Regularity of the information matrix when some derivatives vanish.

    Checks that each listed parameter really has a vanishing derivative,
    then reports whether the classical-information block over those
    parameters is regular, alongside the full-matrix regularity it must match.
    """
    if theta is None:
        theta = np.zeros(family.n_params)
    problematic = sorted(set(int(i) for i in problematic_indices))
    if not problematic:
        raise DomainError("need at least one problematic index")
    for i in problematic:
        norm = np.max(np.abs(family.drho(theta, i)))
        if norm > 1e-6:
            raise DomainError(
                f"parameter {i} does not have a vanishing derivative (|drho| = {norm:.3g})"
            )
    c = classical_fi_matrix(family, theta).entries
    block = c[np.ix_(problematic, problematic)]
    c22_min = float(np.linalg.eigvalsh(block).min())
    full_min = qfi_matrix(family, theta).min_eigenvalue()
    return MultivariateResult(
        regular=c22_min > REGULARITY_TOL,
        c22_min_eig=c22_min,
        qfi_min_eig=full_min,
        qfi_regular=full_min > REGULARITY_TOL,
    )
