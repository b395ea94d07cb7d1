"""Derivative-free 1-D search helpers.

Golden-section search on a bracket; used for likelihood refinement and for
maximizing Fisher-information curves over detuning.  Deterministic: no
randomness, fixed iteration policy.
"""

import math

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi


def golden_min(f, lo, hi, rel_tol=1e-6, max_iter=200):
    """Minimize a unimodal scalar function on [lo, hi].

    Returns (x, f(x)). Terminates when the bracket width drops below
    rel_tol relative to the midpoint magnitude (absolute near zero).
    """
    if not hi > lo:
        raise ValueError("golden_min needs hi > lo")
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        scale = max(abs(a), abs(b), 1e-300)
        if (b - a) <= rel_tol * scale:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    if fc < fd:
        return c, fc
    return d, fd


def golden_max(f, lo, hi, rel_tol=1e-6, max_iter=200):
    """Maximize a unimodal scalar function on [lo, hi]; returns (x, f(x))."""
    x, fneg = golden_min(lambda t: -f(t), lo, hi, rel_tol, max_iter)
    return x, -fneg
