"""Closed-form references used to cross-check the samplers.

Everything here is deliberately independent of the particle machinery: a
plain Kalman filter and fixed-interval smoother for a linear-Gaussian chain
with identity observations and a constant drift term.
"""

from __future__ import annotations

import numpy as np


def kalman_filter(transition, drift, process_cov, meas_cov, prior_mean, prior_cov, observations):
    """Filtering pass for x_k = F x_{k-1} + c + w, y_k = x_k + v, k = 0..L-1.

    The first state is drawn from the prior and y_0 is observed on it (no
    transition before the first observation). Returns (filtered means,
    filtered covs, predicted means, predicted covs), each length L; the
    predicted quantities at index 0 are the prior.
    """
    F = np.asarray(transition, dtype=float)
    c = np.asarray(drift, dtype=float)
    Q = np.asarray(process_cov, dtype=float)
    R = np.asarray(meas_cov, dtype=float)
    ys = np.asarray(observations, dtype=float)
    L, p = ys.shape

    mean_f = np.zeros((L, p))
    cov_f = np.zeros((L, p, p))
    mean_p = np.zeros((L, p))
    cov_p = np.zeros((L, p, p))

    m_pred = np.asarray(prior_mean, dtype=float)
    p_pred = np.asarray(prior_cov, dtype=float)
    for k in range(L):
        if k > 0:
            m_pred = F @ mean_f[k - 1] + c
            p_pred = F @ cov_f[k - 1] @ F.T + Q
        mean_p[k] = m_pred
        cov_p[k] = p_pred
        s = p_pred + R
        gain = np.linalg.solve(s.T, p_pred.T).T
        mean_f[k] = m_pred + gain @ (ys[k] - m_pred)
        cov_f[k] = p_pred - gain @ s @ gain.T
    return mean_f, cov_f, mean_p, cov_p


def rts_smoother(transition, mean_f, cov_f, mean_p, cov_p):
    """Fixed-interval smoothing pass; returns (smoothed means, smoothed covs)."""
    F = np.asarray(transition, dtype=float)
    L = mean_f.shape[0]
    mean_s = mean_f.copy()
    cov_s = cov_f.copy()
    for k in range(L - 2, -1, -1):
        gain = np.linalg.solve(cov_p[k + 1].T, (cov_f[k] @ F.T).T).T
        mean_s[k] = mean_f[k] + gain @ (mean_s[k + 1] - mean_p[k + 1])
        cov_s[k] = cov_f[k] + gain @ (cov_s[k + 1] - cov_p[k + 1]) @ gain.T
    return mean_s, cov_s


def smoothed_means(transition, drift, process_cov, meas_cov, prior_mean, prior_cov, observations):
    """Smoothed state means for the linear-Gaussian chain above."""
    mean_f, cov_f, mean_p, cov_p = kalman_filter(
        transition, drift, process_cov, meas_cov, prior_mean, prior_cov, observations
    )
    mean_s, _ = rts_smoother(transition, mean_f, cov_f, mean_p, cov_p)
    return mean_s


def gaussian_posterior_mean(prior_mean, prior_cov, observation, meas_cov):
    """Posterior mean of x for x ~ N(prior), y = x + v observed once."""
    prior_mean = np.asarray(prior_mean, dtype=float)
    s = np.asarray(prior_cov, dtype=float) + np.asarray(meas_cov, dtype=float)
    gain = np.linalg.solve(s.T, np.asarray(prior_cov, dtype=float).T).T
    return prior_mean + gain @ (np.asarray(observation, dtype=float) - prior_mean)
