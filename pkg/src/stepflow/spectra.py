"""Pulsation energy spectra of probe velocity records.

The spectrum of a series of N uniformly sampled values u_l is built from
the mean-free pulsation u' = u - mean(u) and the coefficient sums

    a_k = 2 * sum_l u'_l cos(2 pi l k / N)
    b_k = 2 * sum_l u'_l sin(2 pi l k / N),         k = 1 .. N/2

with energy E(k) = a_k^2 + b_k^2.  The k = 0 harmonic is the removed mean
and is never reported.  Resolving an oscillation takes 4-5 samples per
period, so the spectrum is considered reliable only up to k = N/8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Spectrum:
    k_values: np.ndarray      # integer wavenumbers 1..N/2
    energy: np.ndarray        # E(k) = a_k^2 + b_k^2
    n_samples: int
    reliable_max_k: int       # floor(N/8)

    def reliable(self) -> np.ndarray:
        """Boolean mask of the wavenumbers within the reliability cutoff."""
        return self.k_values <= self.reliable_max_k


def remove_mean(series) -> np.ndarray:
    """Pulsation component of a sample sequence (sums to zero)."""
    u = np.asarray(series, dtype=float)
    if u.ndim != 1 or u.size < 1:
        raise ValueError("need a non-empty 1D sample sequence")
    return u - u.mean()


def _check_even_length(n: int):
    if n < 8:
        raise ValueError(f"need at least 8 samples, got {n}")
    if n % 2 != 0:
        raise ValueError(
            f"series length must be even, got {n}; truncate before calling"
        )


def fourier_coefficients_direct(pulsations) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient sums evaluated literally, O(N^2).

    Reference implementation; `fourier_coefficients` is the fast equivalent.
    """
    u = np.asarray(pulsations, dtype=float)
    _check_even_length(u.size)
    n = u.size
    ks = np.arange(1, n // 2 + 1)
    a = np.empty(ks.size)
    b = np.empty(ks.size)
    ls = np.arange(n)
    # chunk over k to bound the (k, l) phase matrix at ~8 MB
    chunk = max(1, (1 << 20) // n)
    for s in range(0, ks.size, chunk):
        kc = ks[s:s + chunk, None]
        phase = 2.0 * np.pi * ls[None, :] * kc / n
        a[s:s + kc.size] = 2.0 * (np.cos(phase) @ u)
        b[s:s + kc.size] = 2.0 * (np.sin(phase) @ u)
    return a, b


def fourier_coefficients(pulsations) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient pairs (a_k, b_k) for k = 1..N/2 via a fast transform."""
    u = np.asarray(pulsations, dtype=float)
    _check_even_length(u.size)
    spec = np.fft.rfft(u)[1:]  # drop k = 0
    return 2.0 * spec.real, -2.0 * spec.imag


def energy_spectrum(series, component: str = "ux") -> Spectrum:
    """Energy spectrum E(k) of one uniformly sampled velocity record.

    `series` is a probe record (its `component` field is analyzed; uniform
    sampling is guaranteed by the record itself) or a plain 1D value
    sequence.  The mean is removed here.
    """
    if hasattr(series, component):
        series = getattr(series, component)
    u = np.asarray(series, dtype=float)
    if u.ndim != 1:
        raise ValueError("energy_spectrum expects a 1D sample sequence")
    _check_even_length(u.size)
    pulsations = remove_mean(u)
    a, b = fourier_coefficients(pulsations)
    n = u.size
    return Spectrum(
        k_values=np.arange(1, n // 2 + 1),
        energy=a * a + b * b,
        n_samples=n,
        reliable_max_k=n // 8,
    )


def spectrum_slope(spec: Spectrum, k_min: int, k_max: int) -> float:
    """Least-squares slope of log E vs log k over k in [k_min, k_max].

    Zero-energy entries fall out of the fit; raises if fewer than two
    wavenumbers remain.
    """
    sel = (spec.k_values >= k_min) & (spec.k_values <= k_max) & (spec.energy > 0)
    if sel.sum() < 2:
        raise ValueError("fewer than two usable wavenumbers in the fit range")
    logk = np.log(spec.k_values[sel].astype(float))
    loge = np.log(spec.energy[sel])
    slope, _ = np.polyfit(logk, loge, 1)
    return float(slope)
