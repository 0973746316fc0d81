"""Smooth compactly supported profiles shared by the field and plank machinery.

All spectral windows used in the package derive from two building blocks:

* a fixed even mollifier bump, supported on (-1, 1) and equal to 1 at 0,
  used as the *spectrum* of wave-packet envelopes;
* a C-infinity step, used to build radial low-pass cutoffs and band
  partitions of unity that sum to 1 exactly (by telescoping) in floating
  point.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "mollifier_spectrum",
    "mollifier",
    "MOLLIFIER_AT_ZERO",
    "smooth_step",
    "radial_lowpass",
    "geometric_band_weights",
]


def mollifier_spectrum(t):
    """Even C-infinity bump exp(1 - 1/(1-t^2)) on (-1, 1), zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - t[m] ** 2))
    return out


# quadrature nodes reused by mollifier(); 2e4 panels keep the transform
# accurate to ~1e-10, far below every tolerance asserted on packets
_QT = np.linspace(-1.0, 1.0, 20001)
_QW = mollifier_spectrum(_QT)


def mollifier(x):
    """Inverse transform of :func:`mollifier_spectrum` (cycles convention).

    Returns ``int \\hat{eta}(t) cos(2 pi x t) dt``; real, even, band
    limited to frequencies (-1, 1).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    # chunk to bound the (len(x), 20001) temporary
    step = 4096
    for i in range(0, len(x), step):
        xs = x[i : i + step]
        out[i : i + step] = np.trapezoid(
            _QW[None, :] * np.cos(2.0 * np.pi * xs[:, None] * _QT[None, :]),
            _QT,
            axis=1,
        )
    return out


MOLLIFIER_AT_ZERO = float(mollifier(0.0)[0])


def smooth_step(t):
    """C-infinity monotone step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    a = np.zeros_like(t)
    b = np.zeros_like(t)
    m = t > 0.0
    a[m] = np.exp(-1.0 / t[m])
    m = t < 1.0
    b[m] = np.exp(-1.0 / (1.0 - t[m]))
    return a / (a + b)


def radial_lowpass(r, cut):
    """Smooth radial window: 1 for ``r <= cut``, 0 for ``r >= 2 cut``."""
    return 1.0 - smooth_step(np.asarray(r, dtype=float) / cut - 1.0)


def geometric_band_weights(x, cuts, width=2.0 ** 0.25):
    """Partition of unity over bands delimited by ``cuts`` on ``|x|``.

    Parameters
    ----------
    x : array
        Evaluation points (the absolute value is used).
    cuts : increasing sequence of positive floats
        Band boundaries; band ``i`` covers ``(cuts[i-1], cuts[i]]`` with
        band 0 below ``cuts[0]`` and the last band above ``cuts[-1]``.
    width : float
        Geometric half-width of each transition; the step for cut ``c``
        ramps over ``[c/width, c*width]``.

    Returns
    -------
    list of arrays
        ``len(cuts) + 1`` weights that sum to 1 exactly (telescoping).
    """
    ax = np.abs(np.asarray(x, dtype=float))
    steps = []
    for c in cuts:
        lo, hi = c / width, c * width
        steps.append(smooth_step((ax - lo) / (hi - lo)))
    bands = [1.0 - steps[0]]
    for i in range(len(cuts) - 1):
        bands.append(steps[i] - steps[i + 1])
    bands.append(steps[-1])
    return bands
