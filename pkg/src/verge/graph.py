"""Block Gibbs updates for the precision matrix and its edge indicators.

Off-diagonal precision entries follow a two-component normal mixture whose
component is chosen by the edge indicator; diagonal entries have an
exponential prior with rate ``lambda / 2``. Columns are resampled one at a
time from their exact conditional, the standard column-wise scheme for this
prior.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .model import NumericalFault, ValidationError


@dataclass(frozen=True)
class GraphScatter:
    S: np.ndarray
    n: int

    @classmethod
    def from_data(cls, X):
        X = np.asarray(X, dtype=float)
        return cls(X.T @ X, X.shape[0])


def _normal_logpdf(x, sd):
    return -0.5 * np.log(2 * np.pi) - np.log(sd) - 0.5 * (x / sd) ** 2


def edge_log_odds(omega, gamma_i, gamma_j, hyper):
    """Log odds of ``g_ij = 1`` given the precision entry and the predictor indicators."""
    return (np.log(hyper.pi_edge) - np.log1p(-hyper.pi_edge)
            + _normal_logpdf(omega, hyper.nu1) - _normal_logpdf(omega, hyper.nu0)
            + hyper.b_mrf * gamma_i * gamma_j)


def edge_inclusion_probability(omega, gamma_i, gamma_j, hyper):
    lo = edge_log_odds(omega, gamma_i, gamma_j, hyper)
    return 0.5 * (1.0 + np.tanh(0.5 * lo))


def sample_edge_indicators(state, hyper, rng):
    """Redraw every edge indicator independently from its conditional."""
    P = state.P
    iu, ju = np.triu_indices(P, 1)
    g = state.gamma.astype(float)
    prob = edge_inclusion_probability(state.Omega[iu, ju], g[iu], g[ju], hyper)
    draw = rng.random(iu.size) < prob
    adj = np.zeros((P, P), dtype=bool)
    adj[iu, ju] = draw
    adj[ju, iu] = draw
    state.adj = adj
    return state


def sample_precision_column(scatter, state, hyper, col, rng):
    """Resample row/column ``col`` of ``Omega`` from its full conditional.

    The diagonal entry is reparametrized as ``omega_cc = g + u' Omega_rest^-1 u``
    with ``g ~ Gamma(n/2 + 1, rate=(s_cc + lambda)/2)``, which keeps ``Omega``
    positive definite by construction.
    """
    P = state.P
    if not 0 <= col < P:
        raise ValidationError(f"column index {col} out of range")
    S = scatter.S
    shape = scatter.n / 2.0 + 1.0
    rate = (S[col, col] + hyper.lambda_diag) / 2.0
    g = rng.gamma(shape, 1.0 / rate)
    Omega = state.Omega
    if P == 1:
        Omega[0, 0] = g
        return state

    rest = np.r_[0:col, col + 1:P]
    try:
        L11 = sla.cholesky(Omega[np.ix_(rest, rest)], lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise NumericalFault(f"precision block without column {col} is not positive definite") from None
    inv11 = sla.cho_solve((L11, True), np.eye(P - 1), check_finite=False)
    nu = np.where(state.adj[rest, col], hyper.nu1, hyper.nu0)
    C = (S[col, col] + hyper.lambda_diag) * inv11
    C[np.diag_indices(P - 1)] += 1.0 / nu**2
    try:
        Lc = sla.cholesky(C, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise NumericalFault(f"conditional precision for column {col} is singular") from None
    mean = -sla.cho_solve((Lc, True), S[rest, col], check_finite=False)
    u = mean + sla.solve_triangular(Lc.T, rng.standard_normal(P - 1), lower=False,
                                    check_finite=False)
    Omega[rest, col] = u
    Omega[col, rest] = u
    Omega[col, col] = g + u @ inv11 @ u
    return state


def graph_sweep(scatter, state, hyper, rng):
    """Edge indicators first, then every column in ascending order."""
    sample_edge_indicators(state, hyper, rng)
    for col in range(state.P):
        sample_precision_column(scatter, state, hyper, col, rng)
    return state
