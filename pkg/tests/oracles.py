"""Independent reference computations used by the tests.

Nothing here calls into the package's linear-algebra paths: kernels are built
entry by entry, densities use determinants and explicit inverses, and the
graph posterior for two predictors is integrated numerically.
"""

import math

import numpy as np
from scipy import integrate
from scipy.special import gammaln, logsumexp


def kernel_entrywise(Z1, Z2, rho, lambda_a, lambda_z, r=None):
    """Kernel by double loop; jitter added on matching indices when ``r`` is given."""
    n1, n2 = len(Z1), len(Z2)
    K = np.empty((n1, n2))
    for a in range(n1):
        for b in range(n2):
            m = sum(-math.log(rho[k]) * (Z1[a][k] - Z2[b][k]) ** 2 for k in range(len(rho)))
            K[a, b] = 1.0 / lambda_a + math.exp(-m) / lambda_z
            if r is not None and a == b:
                K[a, b] += 1.0 / r
    return K


def dense_log_marginal(y, X, Z, tau2, params_by_j):
    """log N(y; 0, Sigma) with Sigma assembled by loops and evaluated by det/inv."""
    n = len(y)
    Sigma = tau2 * np.eye(n)
    for j, p in params_by_j.items():
        K = kernel_entrywise(Z, Z, p.rho, p.lambda_a, p.lambda_z, p.r)
        for a in range(n):
            for b in range(n):
                Sigma[a, b] += X[a, j] * K[a, b] * X[b, j]
    sign, logdet = np.linalg.slogdet(Sigma)
    assert sign > 0
    quad = y @ np.linalg.inv(Sigma) @ y
    return -0.5 * (n * math.log(2 * math.pi) + logdet + quad)


def mc_log_marginal(y, x, K, tau2, draws, rng, batch=100_000):
    """log E_beta[N(y; x * beta, tau2 I)] with beta ~ N(0, K), by Monte Carlo."""
    w, V = np.linalg.eigh(K)
    root = V * np.sqrt(np.clip(w, 0, None))
    n = len(y)
    logs = []
    done = 0
    while done < draws:
        m = min(batch, draws - done)
        beta = rng.standard_normal((m, n)) @ root.T
        resid = y - beta * x
        logs.append(-0.5 * n * math.log(2 * math.pi * tau2) - 0.5 * (resid**2).sum(axis=1) / tau2)
        done += m
    logs = np.concatenate(logs)
    return float(logsumexp(logs) - math.log(draws))


def beta_conditional_moments(resid, x, K, tau2):
    """Mean and covariance of beta | resid for resid = x * beta + noise (kriging form)."""
    D = np.diag(x)
    G = D @ K @ D + tau2 * np.eye(len(x))
    gain = K @ D @ np.linalg.inv(G)
    return gain @ resid, K - gain @ D @ K


def mcc_by_count(truth, est):
    tp = sum(1 for t, e in zip(truth, est) if t and e)
    tn = sum(1 for t, e in zip(truth, est) if not t and not e)
    fp = sum(1 for t, e in zip(truth, est) if not t and e)
    fn = sum(1 for t, e in zip(truth, est) if t and not e)
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return tp, tn, fp, fn, (None if den == 0 else (tp * tn - fp * fn) / math.sqrt(den))


def auc_by_pairs(truth, scores):
    pos = [s for t, s in zip(truth, scores) if t]
    neg = [s for t, s in zip(truth, scores) if not t]
    total = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return total / (len(pos) * len(neg))


# Two-predictor graph posterior.
#
# With Omega = [[w11, w12], [w12, w22]], substitute w22 = c + w12^2 / w11 (c > 0
# is the Schur complement, so the PD region is w11 > 0, c > 0). The integral
# over c is a gamma integral and the integral over w12 is Gaussian, leaving a
# one-dimensional integral over w11 for each value of the edge indicator.

def _log_weight_w11(w11, S, n, lam, nu):
    a = S[1, 1] + lam
    A = a / w11 + 1.0 / nu**2
    return (n / 2.0 * np.log(w11) - (S[0, 0] + lam) * w11 / 2.0
            + 0.5 * np.log(2 * np.pi / A) + S[0, 1] ** 2 / (2 * A)
            - np.log(nu) - 0.5 * np.log(2 * np.pi))


def p2_edge_posterior(S, n, lam, nu0, nu1, pi, mrf_bonus=0.0):
    """Exact P(g12 = 1 | S) for two predictors, up to quadrature error."""
    logs = []
    for nu in (nu0, nu1):
        # scale the integrand by its maximum on a coarse grid to keep quad stable
        grid = np.geomspace(1e-6, 1e4, 4000)
        ref = _log_weight_w11(grid, S, n, lam, nu).max()
        val, _ = integrate.quad(lambda w: math.exp(_log_weight_w11(w, S, n, lam, nu) - ref),
                                0, np.inf, limit=500, epsabs=0, epsrel=1e-10)
        logs.append(ref + math.log(val))
    l0 = math.log1p(-pi) + logs[0]
    l1 = math.log(pi) + mrf_bonus + logs[1]
    return 1.0 / (1.0 + math.exp(l0 - l1))


def p2_omega12_moments(S, n, lam, nu, grid_size=4001):
    """Mean and variance of w12 given a fixed edge indicator (slab/spike sd ``nu``).

    The w22 direction is integrated analytically and w11 by quadrature at each
    point of a w12 grid.
    """
    a = S[1, 1] + lam
    b = S[0, 0] + lam

    def log_dens(w12):
        def f(w11):
            return (n / 2.0 * math.log(w11) - b * w11 / 2.0 - a * w12**2 / (2 * w11))
        grid = np.geomspace(1e-8, 1e4, 2000)
        ref = max(f(w) for w in grid)
        val, _ = integrate.quad(lambda w: math.exp(f(w) - ref), 0, np.inf, limit=500)
        return ref + math.log(val) - S[0, 1] * w12 - 0.5 * (w12 / nu) ** 2

    # locate the bulk with a normal approximation from a coarse scan
    coarse = np.linspace(-10 * nu, 10 * nu, 401)
    lc = np.array([log_dens(w) for w in coarse])
    pc = np.exp(lc - lc.max())
    pc /= pc.sum()
    m0 = (coarse * pc).sum()
    s0 = math.sqrt(((coarse - m0) ** 2 * pc).sum())
    grid = np.linspace(m0 - 12 * s0, m0 + 12 * s0, grid_size)
    lg = np.array([log_dens(w) for w in grid])
    p = np.exp(lg - lg.max())
    p /= integrate.trapezoid(p, grid)
    mean = integrate.trapezoid(grid * p, grid)
    var = integrate.trapezoid((grid - mean) ** 2 * p, grid)
    return mean, var


def inverse_gamma_mean(shape, scale):
    return scale / (shape - 1.0)


def gamma_log_norm(shape, rate):
    return gammaln(shape) - shape * math.log(rate)


def batch_means_se(x, batches=50):
    """Standard error of the mean of an autocorrelated series by batch means."""
    x = np.asarray(x, dtype=float)
    m = len(x) // batches
    means = x[: m * batches].reshape(batches, m).mean(axis=1)
    return means.std(ddof=1) / math.sqrt(batches)
