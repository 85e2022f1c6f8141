"""Point estimates, error tables, traces and convergence summaries for chains."""

from __future__ import annotations

import warnings

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyChain,
    IndexOutOfRange,
    SeriesTooShort,
    ZeroVarianceWarning,
)
from .gibbs import Chain


def posterior_state_mean(chain: Chain) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise mean of the retained (post-burn-in) state references.

    Returns (fine estimates (D, T, K, p), coarse estimates (D, T, m)).
    """
    fine, coarse = chain.retained_refs()
    if fine.shape[0] == 0:
        raise EmptyChain("no state references retained after burn-in")
    return fine.mean(axis=0), coarse.mean(axis=0)


def rmse_coarse(estimates, truth) -> np.ndarray:
    """Root mean square error over coarse steps, per (individual, dimension)."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape or est.ndim != 3:
        raise DimensionMismatch(f"shapes {est.shape} vs {tru.shape}")
    return np.sqrt(np.mean((est - tru) ** 2, axis=1))


def rmse_fine(estimates, truth) -> np.ndarray:
    """Root mean square error over fine steps within each coarse step, per
    (individual, coarse step, dimension)."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape or est.ndim != 4:
        raise DimensionMismatch(f"shapes {est.shape} vs {tru.shape}")
    return np.sqrt(np.mean((est - tru) ** 2, axis=2))


def trace(chain: Chain, target: str, dim: int, individual: int | None = None) -> np.ndarray:
    """Series of one diagonal covariance entry across retained iterations.

    ``target`` is "fine" for the shared fine-scale process covariance or
    "coarse" for individual ``individual``'s coarse process covariance.
    """
    start = chain.burn_in_start
    if target == "fine":
        draws = chain.sigma_fine_draws
        if not 0 <= dim < draws.shape[1]:
            raise IndexOutOfRange(f"dim {dim} out of range for {draws.shape[1]}")
        return draws[start:, dim, dim].copy()
    if target == "coarse":
        draws = chain.sigma_coarse_draws
        if individual is None or not 0 <= individual < draws.shape[1]:
            raise IndexOutOfRange(f"individual {individual} out of range for {draws.shape[1]}")
        if not 0 <= dim < draws.shape[2]:
            raise IndexOutOfRange(f"dim {dim} out of range for {draws.shape[2]}")
        return draws[start:, individual, dim, dim].copy()
    raise IndexOutOfRange(f"unknown trace target {target!r}")


def ess(series) -> float:
    """Effective sample size via initial-positive-sequence truncation of the
    autocorrelation (Geyer). A constant series has no information content and
    is reported as 0 with a ZeroVariance warning."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"series must be 1-D, got shape {x.shape}")
    n = x.size
    if n < 10:
        raise SeriesTooShort(f"need at least 10 points, got {n}")
    centered = x - x.mean()
    var = float(np.mean(centered**2))
    if var == 0.0:
        warnings.warn("constant series: ESS undefined, reporting 0", ZeroVarianceWarning)
        return 0.0
    # Biased autocovariances via FFT, normalized to autocorrelations.
    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    spectrum = np.fft.rfft(centered, nfft)
    acov = np.fft.irfft(spectrum * np.conj(spectrum), nfft)[:n].real / n
    rho = acov / acov[0]
    # Sum adjacent pairs; keep while positive.
    tau = -1.0
    m = 0
    while 2 * m + 1 < n:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        m += 1
    tau = max(tau, 1.0)
    return float(n / tau)
