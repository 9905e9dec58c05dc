"""Selection decisions, coefficient estimates and predictions from a trace."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .kernel import build_kernel, cholesky, cross_kernel
from .model import EmptyTraceError, KernelParams, PredictionError, ValidationError

THRESHOLD = 0.5


def _require_records(trace):
    if len(trace) == 0:
        raise EmptyTraceError("trace holds no records")


def predictor_ppi(trace):
    """Fraction of records in which each predictor is included."""
    _require_records(trace)
    return trace.gamma_matrix().mean(axis=0)


def covariate_ppi(trace):
    """Covariate inclusion frequency among the records where its predictor is included.

    Rows of predictors that are never included are zero.
    """
    _require_records(trace)
    gamma = trace.gamma_matrix().astype(float)
    gt = trace.gamma_tilde_array().astype(float) * gamma[:, :, None]
    counts = gamma.sum(axis=0)
    out = np.zeros(gt.shape[1:])
    nz = counts > 0
    out[nz] = gt.sum(axis=0)[nz] / counts[nz, None]
    return out


def edge_ppi(trace):
    """Map ``(i, j) -> frequency`` over every pair that appears at least once."""
    _require_records(trace)
    counts = {}
    for rec in trace.records:
        for e in rec.edges:
            e = tuple(e)
            counts[e] = counts.get(e, 0) + 1
    N = len(trace)
    return {e: c / N for e, c in sorted(counts.items())}


def posterior_median_graph(trace):
    """Edges with PPI strictly above 0.5, as sorted ``(i, j)`` pairs."""
    return [e for e, p in edge_ppi(trace).items() if p > THRESHOLD]


def expected_fdr(ppis, kappa):
    ppis = np.asarray(ppis, dtype=float)
    sel = ppis > kappa
    if not sel.any():
        return None
    return float(np.sum(1.0 - ppis[sel]) / sel.sum())


def fdr_threshold(ppis, target):
    """Smallest threshold on the grid {0} U {observed PPIs} with expected FDR <= target.

    Returns 1.0 when no grid value qualifies. A threshold that selects
    nothing does not qualify.
    """
    ppis = np.asarray(ppis, dtype=float).ravel()
    if ppis.size == 0:
        raise ValidationError("no PPIs given")
    if not 0 < target < 1:
        raise ValidationError("target FDR must lie in (0, 1)")
    for kappa in np.unique(np.r_[0.0, ppis]):
        fdr = expected_fdr(ppis, kappa)
        if fdr is not None and fdr <= target:
            return float(kappa)
    return 1.0


def beta_hat(trace, n):
    """Average sampled curve of each predictor over the records that include it."""
    _require_records(trace)
    P = trace.P
    total = np.zeros((P, n))
    counts = np.zeros(P)
    for rec in trace.records:
        for j, b in rec.beta.items():
            total[j] += b
            counts[j] += 1
    nz = counts > 0
    total[nz] /= counts[nz, None]
    return total


def _prediction_params(params, keep_cov):
    """Kernel parameters with covariates outside ``keep_cov`` switched off."""
    gt = np.where(keep_cov, params.gamma_tilde, 0).astype(np.int8)
    rho = np.where(gt == 1, params.rho, 1.0)
    return KernelParams(gt, rho, params.lambda_a, params.lambda_z, params.r)


def smoothed_curves(trace, train, Z_star, threshold=THRESHOLD):
    """Posterior-mean curves of the selected predictors at the rows of ``Z_star``.

    For each record in which every selected predictor is included, the
    averaged training curve is carried to ``Z_star`` with the cross
    covariance (constant plus exponential terms) times the inverse training
    covariance (which includes the jitter). Only covariates whose PPI exceeds
    the threshold enter the kernels. Returns ``(selected, curves)`` where
    ``curves`` has one row per selected predictor.
    """
    delta = predictor_ppi(trace)
    selected = np.flatnonzero(delta > threshold)
    keep_cov = covariate_ppi(trace) > threshold
    bh = beta_hat(trace, train.n)
    Z_star = np.asarray(Z_star, dtype=float)
    curves = np.zeros((selected.size, Z_star.shape[0]))
    L = 0
    for rec in trace.records:
        if not np.all(rec.gamma[selected] == 1):
            continue
        L += 1
        for row, j in enumerate(selected):
            params = _prediction_params(rec.params[j], keep_cov[j])
            Kzz = build_kernel(train.Z, params)
            w = sla.cho_solve((cholesky(Kzz), True), bh[j], check_finite=False)
            curves[row] += cross_kernel(Z_star, train.Z, params) @ w
    if L == 0:
        raise PredictionError(
            f"no record includes all {selected.size} selected predictors "
            f"({selected.tolist()}); cannot form predictions")
    return selected, curves / L


def predict(trace, train, X_star, Z_star, threshold=THRESHOLD):
    """Predicted (centered) responses for standardized test rows."""
    X_star = np.asarray(X_star, dtype=float)
    selected, curves = smoothed_curves(trace, train, Z_star, threshold)
    return (X_star[:, selected] * curves.T).sum(axis=1)


@dataclass
class SelectionReport:
    predictor_ppi: np.ndarray
    covariate_ppi: np.ndarray
    edge_ppi: dict
    selected_predictors: list
    selected_covariates: dict
    selected_edges: list
    beta_hat: np.ndarray
    threshold: float = THRESHOLD

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "predictor_ppi": self.predictor_ppi.tolist(),
            "covariate_ppi": self.covariate_ppi.tolist(),
            "edge_ppi": [[i, j, p] for (i, j), p in self.edge_ppi.items()],
            "selected_predictors": self.selected_predictors,
            "selected_covariates": {str(j): ks for j, ks in self.selected_covariates.items()},
            "selected_edges": [list(e) for e in self.selected_edges],
        }


def summarize(trace, n, threshold=THRESHOLD, fdr=None):
    """Build a :class:`SelectionReport`.

    With ``fdr`` set, the predictor threshold is chosen by :func:`fdr_threshold`
    instead of the fixed cutoff. Covariates and edges always use ``threshold``.
    """
    delta = predictor_ppi(trace)
    pred_cut = fdr_threshold(delta, fdr) if fdr is not None else threshold
    cov = covariate_ppi(trace)
    eppi = edge_ppi(trace)
    selected = np.flatnonzero(delta > pred_cut).tolist()
    return SelectionReport(
        predictor_ppi=delta,
        covariate_ppi=cov,
        edge_ppi=eppi,
        selected_predictors=selected,
        selected_covariates={j: np.flatnonzero(cov[j] > threshold).tolist() for j in selected},
        selected_edges=[e for e, p in eppi.items() if p > threshold],
        beta_hat=beta_hat(trace, n),
        threshold=pred_cut,
    )
