"""Gaussian-process covariance of the varying coefficients.

Each included predictor ``j`` has a coefficient curve over the covariates with
covariance

    K_j = J / lambda_a + exp(-M) / lambda_z + I / r

where ``M[i, i'] = sum_k -log(rho_k) * (Z[i, k] - Z[i', k])**2``. Integrating
the curves out of the regression gives ``y ~ N(0, tau2 I + sum_j D_j K_j D_j)``
with ``D_j = diag(X[:, j])``.
"""

import numpy as np
import scipy.linalg as sla

from .model import KernelParams, NumericalFault, ValidationError

LOG_2PI = np.log(2 * np.pi)


def _check_rho(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0) or np.any(rho > 1) or not np.all(np.isfinite(rho)):
        raise ValidationError("rho values must lie in (0, 1]")
    return rho


def pairwise_sq_diffs(Z1, Z2):
    """K x n1 x n2 array of squared coordinate differences."""
    d = Z1.T[:, :, None] - Z2.T[:, None, :]
    return d * d


def distance_matrix(Z1, Z2, rho, sqdiff=None):
    """Weighted squared distance between the rows of ``Z1`` and ``Z2``.

    ``sqdiff`` may hold :func:`pairwise_sq_diffs` of the same points to avoid
    recomputing it.
    """
    weights = -np.log(_check_rho(rho))
    M = np.zeros((Z1.shape[0], Z2.shape[0]))
    for k in np.flatnonzero(weights):
        if sqdiff is None:
            d = Z1[:, k][:, None] - Z2[:, k][None, :]
            M += weights[k] * (d * d)
        else:
            M += weights[k] * sqdiff[k]
    return M


def build_distance_matrix(Z, params: KernelParams, sqdiff=None):
    M = distance_matrix(Z, Z, params.rho, sqdiff)
    np.fill_diagonal(M, 0.0)
    return M


def cross_kernel(Z1, Z2, params: KernelParams):
    """Constant plus exponential covariance between two sets of points, no jitter."""
    M = distance_matrix(Z1, Z2, params.rho)
    return 1.0 / params.lambda_a + np.exp(-M) / params.lambda_z


def build_kernel(Z, params: KernelParams, jitter=True, sqdiff=None):
    """Prior covariance matrix of one coefficient curve at the rows of ``Z``."""
    M = build_distance_matrix(Z, params, sqdiff)
    K = np.exp(-M)
    K *= 1.0 / params.lambda_z
    K += 1.0 / params.lambda_a
    if jitter:
        K[np.diag_indices_from(K)] += 1.0 / params.r
    return K


def cholesky(A):
    try:
        return sla.cholesky(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFault(f"Cholesky factorization failed: {exc}") from None


def predictor_contribution(X_col, K):
    """``D K D`` for ``D = diag(X_col)``."""
    return K * np.outer(X_col, X_col)


def marginal_covariance(X, Z, tau2, params_by_j):
    """Covariance of ``y`` with the curves of the predictors in ``params_by_j`` integrated out."""
    n = X.shape[0]
    Sigma = np.zeros((n, n))
    for j in sorted(params_by_j):
        Sigma += predictor_contribution(X[:, j], build_kernel(Z, params_by_j[j]))
    Sigma[np.diag_indices(n)] += tau2
    return Sigma


def log_mvn_zero_mean(y, Sigma):
    """log N(y; 0, Sigma) through a Cholesky factor."""
    L = cholesky(Sigma)
    alpha = sla.solve_triangular(L, y, lower=True, check_finite=False)
    return -0.5 * (y.size * LOG_2PI + alpha @ alpha) - np.log(np.diag(L)).sum()


def log_marginal_likelihood(data, state):
    """Log-likelihood of ``data.y`` given the state, coefficient curves integrated out."""
    params = {j: state.kernel_params(j) for j in state.included}
    Sigma = marginal_covariance(data.X, data.Z, state.tau2, params)
    return log_mvn_zero_mean(data.y, Sigma)


def _mvn_from_precision(rng, precision, rhs):
    """Draw from N(precision^-1 rhs, precision^-1)."""
    L = cholesky(precision)
    mean = sla.cho_solve((L, True), rhs, check_finite=False)
    z = rng.standard_normal(rhs.shape[0])
    return mean + sla.solve_triangular(L.T, z, lower=False, check_finite=False)


def sample_beta_conditional(data, state, j, rng):
    """Draw curve ``j`` from its Gaussian full conditional.

    The precision is ``K_j^-1 + D_j^2 / tau2`` and the mean solves against the
    residual left by the other included predictors' current curves.
    """
    if not state.gamma[j]:
        raise ValidationError(f"predictor {j} is not included")
    K = build_kernel(data.Z, state.kernel_params(j))
    x = data.X[:, j]
    others = [l for l in state.included if l != j]
    resid = data.y - (data.X[:, others] * state.beta[others].T).sum(axis=1)
    # whitened coordinates beta = LK u; u has precision I + LK' D^2 LK / tau2
    LK = cholesky(K)
    A = LK * (x / np.sqrt(state.tau2))[:, None]
    prec = np.eye(data.n) + A.T @ A
    rhs = LK.T @ (x * resid) / state.tau2
    u = _mvn_from_precision(rng, prec, rhs)
    return LK @ u


def sample_beta_joint(data, state, rng, Sigma=None):
    """Joint draw of all included curves given ``y`` and ``tau2``.

    Uses the prior-draw correction: draw curves and noise from the prior and
    shift them by ``K_j D_j Sigma^-1`` times the simulated residual. Returns a
    P x n array with zero rows for excluded predictors.
    """
    n = data.n
    inc = state.included
    beta = np.zeros((state.P, n))
    if inc.size == 0:
        return beta
    kernels = {j: build_kernel(data.Z, state.kernel_params(j)) for j in inc}
    if Sigma is None:
        Sigma = np.zeros((n, n))
        for j in inc:
            Sigma += predictor_contribution(data.X[:, j], kernels[j])
        Sigma[np.diag_indices(n)] += state.tau2
    fitted = np.zeros(n)
    for j in inc:
        beta[j] = cholesky(kernels[j]) @ rng.standard_normal(n)
        fitted += data.X[:, j] * beta[j]
    eps = np.sqrt(state.tau2) * rng.standard_normal(n)
    w = sla.cho_solve((cholesky(Sigma), True), data.y - fitted - eps, check_finite=False)
    for j in inc:
        beta[j] += kernels[j] @ (data.X[:, j] * w)
    return beta
