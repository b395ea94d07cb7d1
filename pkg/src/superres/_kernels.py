"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Both variants of each kernel consume pre-drawn random arrays, so the RNG
stream layout is identical no matter which path runs.  The active path is
chosen once at import: numba when importable, unless SUPERRES_PURE_NUMPY
is set to a truthy value.  `benchmarks/bench_kernels.py` times the pair.
"""

import os

import numpy as np

_FLAG = os.environ.get("SUPERRES_PURE_NUMPY", "").strip().lower()
_FORCE_NUMPY = _FLAG in {"1", "true", "yes", "on"}

try:
    if _FORCE_NUMPY:
        raise ImportError
    import numba

    NUMBA_ENABLED = True
except ImportError:
    numba = None
    NUMBA_ENABLED = False


def count_transitions_numpy(quads, uniforms, coeffs, dephasing_factor, readout_eps):
    """Bernoulli transition count for one chunk of shots.

    quads: (n, 4) quadrature draws; coeffs: (4,) phase weights so that
    phi = quads @ coeffs; per-shot probability 0.5*(1 - f*cos(2*phi))
    mixed through the readout flip; counts uniforms < p.
    """
    phi = quads @ coeffs
    p = 0.5 - 0.5 * dephasing_factor * np.cos(2.0 * phi)
    p = (1.0 - 2.0 * readout_eps) * p + readout_eps
    return int(np.count_nonzero(uniforms < p))


def ou_phases_numpy(q0, noise, decay, kick, weights, tone_tables):
    """Trapezoid-integrated phase of OU-drifting quadratures, one per shot.

    q0: (n, 4) stationary initial quadratures; noise: (n_steps, n, 4) unit
    normals; the exact OU step is q <- q*decay + kick*noise.  weights holds
    dt-scaled trapezoid weights times the square-wave sign per time sample;
    tone_tables is (n_steps+1, 4) of [cos w1 t, sin w1 t, cos w2 t, sin w2 t].
    """
    n_steps = noise.shape[0]
    q = q0.copy()
    acc = weights[0] * (q @ tone_tables[0])
    for j in range(n_steps):
        q *= decay
        q += kick * noise[j]
        acc += weights[j + 1] * (q @ tone_tables[j + 1])
    return acc


if NUMBA_ENABLED:

    @numba.njit(cache=True, nogil=True)
    def _count_transitions_numba(quads, uniforms, coeffs, dephasing_factor, readout_eps):
        n = quads.shape[0]
        count = 0
        for i in range(n):
            phi = 0.0
            for k in range(4):
                phi += quads[i, k] * coeffs[k]
            p = 0.5 - 0.5 * dephasing_factor * np.cos(2.0 * phi)
            p = (1.0 - 2.0 * readout_eps) * p + readout_eps
            if uniforms[i] < p:
                count += 1
        return count

    @numba.njit(cache=True, nogil=True)
    def _ou_phases_numba(q0, noise, decay, kick, weights, tone_tables):
        n_steps = noise.shape[0]
        n = q0.shape[0]
        out = np.empty(n)
        for i in range(n):
            a1, b1, a2, b2 = q0[i, 0], q0[i, 1], q0[i, 2], q0[i, 3]
            acc = weights[0] * (
                a1 * tone_tables[0, 0]
                + b1 * tone_tables[0, 1]
                + a2 * tone_tables[0, 2]
                + b2 * tone_tables[0, 3]
            )
            for j in range(n_steps):
                a1 = a1 * decay + kick * noise[j, i, 0]
                b1 = b1 * decay + kick * noise[j, i, 1]
                a2 = a2 * decay + kick * noise[j, i, 2]
                b2 = b2 * decay + kick * noise[j, i, 3]
                acc += weights[j + 1] * (
                    a1 * tone_tables[j + 1, 0]
                    + b1 * tone_tables[j + 1, 1]
                    + a2 * tone_tables[j + 1, 2]
                    + b2 * tone_tables[j + 1, 3]
                )
            out[i] = acc
        return out

    def count_transitions_numba(quads, uniforms, coeffs, dephasing_factor, readout_eps):
        return int(
            _count_transitions_numba(quads, uniforms, coeffs, dephasing_factor, readout_eps)
        )

    def ou_phases_numba(q0, noise, decay, kick, weights, tone_tables):
        return _ou_phases_numba(q0, noise, decay, kick, weights, tone_tables)

    count_transitions = count_transitions_numba
    ou_phases = ou_phases_numba
else:
    count_transitions_numba = None
    ou_phases_numba = None
    count_transitions = count_transitions_numpy
    ou_phases = ou_phases_numpy


def active_path():
    """Name of the kernel path chosen at import ('numba' or 'numpy')."""
    return "numba" if NUMBA_ENABLED else "numpy"
