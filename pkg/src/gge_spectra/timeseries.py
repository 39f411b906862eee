"""Autocorrelation, effective sample size and batch-means helpers for MCMC series."""

from __future__ import annotations

import numpy as np

__all__ = ["autocorrelation", "integrated_time", "effective_sample_size", "batch_means_se", "geweke_z"]


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Normalised autocorrelation function of a 1-D series (FFT based)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    y = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, size)
    acf = np.fft.irfft(f * np.conj(f), size)[:n]
    if acf[0] <= 0:
        return np.zeros(n)
    return acf / acf[0]


def integrated_time(x: np.ndarray) -> float:
    """Integrated autocorrelation time by Geyer's initial positive sequence."""
    x = np.asarray(x, dtype=float)
    if len(x) < 4 or np.ptp(x) == 0:
        return 1.0
    rho = autocorrelation(x)
    tau = -1.0
    for k in range(0, len(rho) - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return max(tau, 1.0 / len(x))


def effective_sample_size(x: np.ndarray) -> float:
    return len(x) / integrated_time(x)


def batch_means_se(x: np.ndarray, n_batches: int | None = None) -> float:
    """Standard error of the mean from non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    b = n_batches or max(2, min(50, int(np.sqrt(n))))
    size = n // b
    if size < 1:
        return float(np.std(x, ddof=1) / np.sqrt(n))
    means = x[: size * b].reshape(b, size).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(b))


def geweke_z(x: np.ndarray, first: float = 0.1, last: float = 0.5) -> float:
    """Geweke z-score comparing the means of the early and late parts of a chain."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    a = x[: int(first * n)]
    b = x[int((1 - last) * n):]

    def var_mean(y):
        return (batch_means_se(y, max(2, min(20, len(y) // 10)))) ** 2

    return float((a.mean() - b.mean()) / np.sqrt(var_mean(a) + var_mean(b)))
