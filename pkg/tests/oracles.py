"""Independent reference implementations used to freeze expected values.

Nothing here touches the package's filter or sampler code paths: the
Kalman filter is the plain discrete recursion on an exactly discretised
LTI system, covariances are two-pass, and discretisation uses the Van
Loan matrix-exponential construction.
"""

import numpy as np
from scipy.linalg import expm

_LOG_2PI = float(np.log(2.0 * np.pi))


def lti_discretize(a, q, dt):
    """Exact discretisation of dx = A x dt + noise with intensity Q.

    Returns (A_d, Q_d) with A_d = expm(A dt) and
    Q_d = int_0^dt expm(A s) Q expm(A s)^T ds (Van Loan 1978).
    """
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    k = a.shape[0]
    block = np.zeros((2 * k, 2 * k))
    block[:k, :k] = -a
    block[:k, k:] = q
    block[k:, k:] = a.T
    eb = expm(block * dt)
    a_d = eb[k:, k:].T
    q_d = a_d @ eb[:k, k:]
    return a_d, 0.5 * (q_d + q_d.T)


def kalman_filter(a_d, q_d, h, r, x0, p0, observations):
    """Discrete Kalman filter log-likelihood on a time-invariant system.

    ``observations`` is a sequence of scalars or None (no update that
    step). ``h`` is the 1 x k observation row, ``r`` the noise variance.
    """
    h = np.asarray(h, dtype=float).reshape(-1)
    x = np.asarray(x0, dtype=float).copy()
    p = np.asarray(p0, dtype=float).copy()
    loglik = 0.0
    means, covs = [], []
    for y in observations:
        x = a_d @ x
        p = a_d @ p @ a_d.T + q_d
        if y is not None:
            s = float(h @ p @ h + r)
            nu = float(y) - float(h @ x)
            gain = (p @ h) / s
            x = x + gain * nu
            p = p - np.outer(gain, h @ p)
            p = 0.5 * (p + p.T)
            loglik += -0.5 * (_LOG_2PI + np.log(s) + nu * nu / s)
        means.append(x.copy())
        covs.append(p.copy())
    return loglik, means, covs


def two_pass_cov(samples):
    """Textbook two-pass covariance with the N denominator."""
    x = np.asarray(samples, dtype=float)
    mu = x.mean(axis=0)
    centred = x - mu
    return centred.T @ centred / x.shape[0]


def gaussian_quadrature_mass(log_density, lo, hi, n=200001):
    """Trapezoid integral of exp(log_density) over [lo, hi]."""
    grid = np.linspace(lo, hi, n)
    vals = np.exp([log_density(g) for g in grid])
    return float(np.trapezoid(vals, grid))
