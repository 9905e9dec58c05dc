"""Synthetic cluster-graph benchmark: data generation, scoring and campaigns."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, rankdata

from .model import ValidationError, default_hyperparameters, standardize

log = logging.getLogger(__name__)

FUNCTION_TAGS = ("constant", "sine", "quadratic", "linear", "cosine", "gaussian-mix")
CLUSTER_SIZE = 5
HUB_LEAF_CORR = 0.7
METRIC_ROWS = ("TPR", "FPR", "MCC", "F1", "AUC", "PMSE")


def make_cluster_covariance(P):
    """Covariance of hub-and-leaf clusters of five and the true edge list.

    Each hub has correlation 0.7 with its four leaves, leaves correlate at
    0.49 and clusters are independent. Edges are the hub-leaf pairs.
    """
    if P < CLUSTER_SIZE or P % CLUSTER_SIZE:
        raise ValidationError(f"P must be a positive multiple of {CLUSTER_SIZE}, got {P}")
    block = np.full((CLUSTER_SIZE, CLUSTER_SIZE), HUB_LEAF_CORR**2)
    block[0, 1:] = block[1:, 0] = HUB_LEAF_CORR
    np.fill_diagonal(block, 1.0)
    Sigma = np.zeros((P, P))
    edges = []
    for c in range(P // CLUSTER_SIZE):
        s = c * CLUSTER_SIZE
        Sigma[s:s + CLUSTER_SIZE, s:s + CLUSTER_SIZE] = block
        edges.extend((s, s + leaf) for leaf in range(1, CLUSTER_SIZE))
    return Sigma, edges


def generating_function(z, tag):
    """True coefficient function ``tag`` evaluated at raw covariate values ``z``."""
    z = np.asarray(z, dtype=float)
    if tag == "constant":
        return np.full_like(z, 0.3)
    if tag == "sine":
        return 2.0 * np.sin(np.pi * z)
    if tag == "quadratic":
        return 2.0 * z**2 - 1.0
    if tag == "linear":
        return -2.0 * z
    if tag == "cosine":
        return 2.0 * np.cos(np.pi * z)
    if tag == "gaussian-mix":
        return -2.0 * norm.pdf(z, 0.3, 0.3) - 3.0 * norm.pdf(z, -0.5, 0.3)
    if tag == "zero":
        return np.zeros_like(z)
    raise ValidationError(f"unknown function tag {tag!r}")


@dataclass
class SimTruth:
    true_gamma: np.ndarray
    true_covariate_map: dict
    true_edges: list
    true_beta_fn: list
    Sigma_G: np.ndarray
    tau2_true: float = 1.0

    def covariate_truth(self, K):
        """P x K indicator of covariates that modulate a true effect.

        A constant effect depends on no covariate, so it contributes no
        positive entry.
        """
        truth = np.zeros((self.true_gamma.size, K), dtype=np.int8)
        for j, k in self.true_covariate_map.items():
            if self.true_beta_fn[j] != "constant":
                truth[j, k] = 1
        return truth

    def to_dict(self):
        return {
            "true_gamma": self.true_gamma.astype(int).tolist(),
            "true_edges": [list(e) for e in self.true_edges],
            "function_tags": list(self.true_beta_fn),
            "covariate_map": {str(j): int(k) for j, k in self.true_covariate_map.items()},
            "tau2_true": self.tau2_true,
        }


@dataclass
class SimData:
    train: object
    X_test: np.ndarray
    Z_test: np.ndarray
    y_test: np.ndarray
    raw_train: tuple
    raw_test: tuple
    truth: SimTruth


def gen_dataset(P, n, n_test, K, seed, tau2=1.0):
    """Draw one synthetic data set.

    True predictors are the hubs of the first ``P // 10`` clusters, carrying
    the generating functions in order (cycling when there are more than six).
    Each true predictor reads one covariate drawn uniformly from the ``K``.
    The test rows are standardized with the training constants; ``y_test``
    is on the centered scale.
    """
    if P % 10:
        raise ValidationError(f"P must be divisible by 10, got {P}")
    if n < 2 or n_test < 0 or K < 1:
        raise ValidationError("need n >= 2, n_test >= 0 and K >= 1")
    rng = np.random.default_rng(seed)
    Sigma, edges = make_cluster_covariance(P)
    n_true = P // 10
    true_idx = [c * CLUSTER_SIZE for c in range(n_true)]
    tags = ["zero"] * P
    for i, j in enumerate(true_idx):
        tags[j] = FUNCTION_TAGS[i % len(FUNCTION_TAGS)]
    cov_map = {j: int(rng.integers(K)) for j in true_idx}

    total = n + n_test
    X = rng.multivariate_normal(np.zeros(P), Sigma, size=total, method="cholesky")
    Z = rng.uniform(-1.0, 1.0, size=(total, K))
    mean = np.zeros(total)
    for j in true_idx:
        mean += X[:, j] * generating_function(Z[:, cov_map[j]], tags[j])
    y = mean + math.sqrt(tau2) * rng.standard_normal(total)

    gamma = np.zeros(P, dtype=np.int8)
    gamma[true_idx] = 1
    truth = SimTruth(gamma, cov_map, edges, tags, Sigma, tau2)
    train = standardize(y[:n], X[:n], Z[:n])
    st = train.standardizer
    return SimData(
        train=train,
        X_test=st.transform_X(X[n:]),
        Z_test=st.transform_Z(Z[n:]),
        y_test=st.transform_y(y[n:]),
        raw_train=(y[:n], X[:n], Z[:n]),
        raw_test=(y[n:], X[n:], Z[n:]),
        truth=truth,
    )


def selection_metrics(truth, estimate):
    """TPR, FPR, F1 and MCC; a metric with a zero denominator is ``None``."""
    truth = np.asarray(truth).astype(bool).ravel()
    estimate = np.asarray(estimate).astype(bool).ravel()
    if truth.shape != estimate.shape:
        raise ValidationError("truth and estimate must have equal lengths")
    tp = int(np.sum(truth & estimate))
    tn = int(np.sum(~truth & ~estimate))
    fp = int(np.sum(~truth & estimate))
    fn = int(np.sum(truth & ~estimate))

    def ratio(num, den):
        return num / den if den else None

    mcc_den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return {
        "TPR": ratio(tp, tp + fn),
        "FPR": ratio(fp, fp + tn),
        "F1": ratio(2 * tp, 2 * tp + fp + fn),
        "MCC": (tp * tn - fp * fn) / math.sqrt(mcc_den) if mcc_den else None,
    }


def auc_from_ppis(truth, scores):
    """ROC area via the Mann-Whitney rank statistic with tied ranks averaged."""
    truth = np.asarray(truth).astype(bool).ravel()
    scores = np.asarray(scores, dtype=float).ravel()
    if truth.shape != scores.shape:
        raise ValidationError("truth and scores must have equal lengths")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)
    return (ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pmse(y_hat, y_test):
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    y_test = np.asarray(y_test, dtype=float).ravel()
    if y_hat.shape != y_test.shape:
        raise ValidationError("prediction and test vectors must have equal lengths")
    return float(np.mean((y_hat - y_test) ** 2))


@dataclass
class Scenario:
    n: int = 200
    P: int = 60
    K: int = 3
    n_test: int = 50
    replicates: int = 25
    seed: int = 1
    run: dict = field(default_factory=lambda: {"total_iterations": 60_000, "burn_in": 30_000})
    hyper: dict = field(default_factory=dict)

    @classmethod
    def preset(cls, name, desk_scale=False):
        if name != "base":
            raise ValidationError(f"unknown scenario {name!r}")
        if desk_scale:
            return cls(P=20, replicates=3,
                       run={"total_iterations": 12_000, "burn_in": 6_000})
        return cls()

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown scenario key(s): {', '.join(sorted(unknown))}")
        return cls(**d)


def score_replicate(sim, trace, K):
    """Selection and prediction metrics of one fitted replicate."""
    from .summaries import covariate_ppi, predict, predictor_ppi

    truth = sim.truth
    delta = predictor_ppi(trace)
    sel = delta > 0.5
    cov = covariate_ppi(trace)
    cov_sel = (cov > 0.5) & sel[:, None]
    cov_truth = truth.covariate_truth(K)
    pred = selection_metrics(truth.true_gamma, sel)
    pred["AUC"] = auc_from_ppis(truth.true_gamma, delta)
    covm = selection_metrics(cov_truth, cov_sel)
    covm["AUC"] = auc_from_ppis(cov_truth, cov * delta[:, None])
    y_hat = predict(trace, sim.train, sim.X_test, sim.Z_test)
    pred["PMSE"] = pmse(y_hat, sim.y_test)
    return {"predictor": pred, "covariate": covm}


def fit_replicate(sim, scenario, seed):
    from .sampler import RunConfig, run_chain

    hyper = default_hyperparameters(scenario.P, **scenario.hyper)
    config = RunConfig(**{**scenario.run, "seed": seed})
    trace, stats = run_chain(sim.train, hyper, config)
    return trace


def run_campaign(scenario: Scenario, replicates=None, fit=fit_replicate):
    """Generate, fit and score ``replicates`` data sets.

    A replicate that raises is logged and left out; the returned dict holds
    the per-replicate metrics, the aggregated table and the failure count.
    """
    replicates = scenario.replicates if replicates is None else replicates
    results, failures = [], 0
    for r in range(replicates):
        seed = scenario.seed + r
        try:
            sim = gen_dataset(scenario.P, scenario.n, scenario.n_test, scenario.K, seed)
            trace = fit(sim, scenario, seed)
            results.append(score_replicate(sim, trace, scenario.K))
        except Exception as exc:  # noqa: BLE001 -- a failed replicate must not stop the campaign
            failures += 1
            log.warning("replicate %d failed: %s", r, exc)
    return {"replicates": results, "table": aggregate(results), "failures": failures}


def aggregate(results):
    """Mean and sd (ddof=1; 0 for one replicate) of each metric, ignoring absent values."""
    table = {}
    for group in ("predictor", "covariate"):
        for row in METRIC_ROWS:
            vals = [res[group].get(row) for res in results]
            vals = [v for v in vals if v is not None]
            if group == "covariate" and row == "PMSE":
                continue
            if not vals:
                table[(group, row)] = (None, None, 0)
                continue
            sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            table[(group, row)] = (float(np.mean(vals)), sd, len(vals))
    return table


def format_table(table):
    """Text rendering in ``mean(sd)`` style with a fixed metric row order."""
    def cell(key):
        mean, sd, _ = table.get(key, (None, None, 0))
        if mean is None:
            return "-"
        return f"{mean:.3f}({sd:.3f})".replace("(0.", "(.")

    lines = [f"{'':6}{'predictor':>16}{'covariate':>16}"]
    for row in METRIC_ROWS:
        lines.append(f"{row:6}{cell(('predictor', row)):>16}{cell(('covariate', row)):>16}")
    return "\n".join(lines)


def table_rows(table):
    """Flat rows ``(metric, group, mean, sd, count)`` in the fixed row order."""
    rows = []
    for row in METRIC_ROWS:
        for group in ("predictor", "covariate"):
            if (group, row) in table:
                mean, sd, count = table[(group, row)]
                rows.append((row, group, mean, sd, count))
    return rows
