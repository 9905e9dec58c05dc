import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import kernel_entrywise
from verge.model import (
    EmptyTraceError,
    KernelParams,
    PredictionError,
    Trace,
    TraceRecord,
    ValidationError,
    standardize,
)
from verge.summaries import (
    beta_hat,
    covariate_ppi,
    edge_ppi,
    expected_fdr,
    fdr_threshold,
    posterior_median_graph,
    predict,
    predictor_ppi,
    smoothed_curves,
    summarize,
)

N_OBS = 6


def _params(gt, rho=0.3, r=50.0):
    gt = np.asarray(gt, dtype=np.int8)
    return KernelParams(gt, np.where(gt == 1, rho, 1.0), 2.0, 1.0, r)


def _record(gamma, gamma_tilde=None, edges=(), beta=None, params=None, tau2=1.0):
    gamma = np.asarray(gamma, dtype=np.int8)
    P = gamma.size
    gt = np.zeros((P, 2), np.int8) if gamma_tilde is None else np.asarray(gamma_tilde, np.int8)
    inc = np.flatnonzero(gamma).tolist()
    beta = beta or {j: np.full(N_OBS, float(j + 1)) for j in inc}
    params = params or {j: _params(gt[j]) for j in inc}
    return TraceRecord(gamma, gt, list(edges), tau2, beta, params)


def _train(seed=0, n=N_OBS, P=3):
    rng = np.random.default_rng(seed)
    return standardize(rng.standard_normal(n), rng.standard_normal((n, P)), rng.random((n, 2)))


class TestPPI:
    def test_always_included(self):
        trace = Trace([_record([1, 0, 0]) for _ in range(5)])
        assert predictor_ppi(trace)[0] == 1.0

    def test_counting(self):
        trace = Trace([_record([1, 0, 0])] * 3 + [_record([0, 0, 0])])
        assert predictor_ppi(trace)[0] == 0.75

    def test_covariate_ppi_empty_denominator(self):
        trace = Trace([_record([1, 0, 0]) for _ in range(4)])
        assert np.all(covariate_ppi(trace)[1] == 0)

    def test_covariate_ppi_counting(self):
        on = _record([1, 0, 0], gamma_tilde=[[1, 0], [0, 0], [0, 0]])
        off = _record([1, 0, 0])
        out = _record([0, 0, 0])
        trace = Trace([on] * 4 + [off] * 6 + [out] * 5)
        assert covariate_ppi(trace)[0, 0] == pytest.approx(0.4)

    def test_empty_trace(self):
        with pytest.raises(EmptyTraceError):
            predictor_ppi(Trace([]))


class TestEdges:
    def test_always_present_selected(self):
        trace = Trace([_record([0, 0, 0], edges=[(0, 2)]) for _ in range(3)])
        assert posterior_median_graph(trace) == [(0, 2)]

    def test_half_excluded(self):
        trace = Trace([_record([0, 0, 0], edges=[(0, 1)]), _record([0, 0, 0])])
        assert edge_ppi(trace) == {(0, 1): 0.5}
        assert posterior_median_graph(trace) == []

    def test_sorted_pairs(self):
        trace = Trace([_record([0, 0, 0], edges=[(1, 2), (0, 2)])])
        assert list(edge_ppi(trace)) == [(0, 2), (1, 2)]


class TestFDR:
    def test_all_certain(self):
        assert fdr_threshold([1.0, 1.0, 1.0], 0.05) == 0.0

    def test_expected_fdr_arithmetic(self):
        assert expected_fdr([0.9, 0.9, 0.6], 0.5) == pytest.approx(0.2)

    def test_threshold_excludes_weak_entry(self):
        # FDR(0) = (0.1 + 0.6) / 2 = 0.35; at 0.4 only the 0.9 entry remains, FDR 0.1
        kappa = fdr_threshold([0.9, 0.4], 0.15)
        assert kappa == 0.4
        assert expected_fdr([0.9, 0.4], kappa) == pytest.approx(expected_fdr([0.9, 0.4], 0.5))

    def test_nothing_qualifies(self):
        assert fdr_threshold([0.2, 0.1], 0.05) == 1.0

    @pytest.mark.parametrize("target", [0.0, 1.0, -0.1])
    def test_invalid_target(self, target):
        with pytest.raises(ValidationError):
            fdr_threshold([0.5], target)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.floats(0.01, 0.5))
    def test_smallest_qualifying_grid_value(self, ppis, target):
        kappa = fdr_threshold(ppis, target)
        grid = sorted(set([0.0] + ppis))
        ok = [k for k in grid if (f := expected_fdr(ppis, k)) is not None and f <= target]
        assert kappa == (ok[0] if ok else 1.0)


class TestCurves:
    def test_beta_hat_averages_over_inclusion(self):
        a = _record([1, 0, 0], beta={0: np.full(N_OBS, 2.0)})
        b = _record([1, 0, 0], beta={0: np.full(N_OBS, 4.0)})
        c = _record([0, 0, 0])
        bh = beta_hat(Trace([a, b, c]), N_OBS)
        np.testing.assert_allclose(bh[0], 3.0)
        assert np.all(bh[1] == 0)

    def test_training_points_match_linear_algebra_oracle(self):
        train = _train()
        rng = np.random.default_rng(2)
        gt = [[1, 0], [0, 0], [0, 0]]
        recs = [_record([1, 0, 0], gamma_tilde=gt, beta={0: rng.standard_normal(N_OBS)})
                for _ in range(3)]
        trace = Trace(recs)
        sel, curves = smoothed_curves(trace, train, train.Z)
        bh = beta_hat(trace, N_OBS)[0]
        p = recs[0].params[0]
        C = kernel_entrywise(train.Z, train.Z, p.rho, p.lambda_a, p.lambda_z)
        expected = C @ np.linalg.solve(C + np.eye(N_OBS) / p.r, bh)
        assert sel.tolist() == [0]
        np.testing.assert_allclose(curves[0], expected, rtol=1e-9, atol=1e-12)
        # the gap to beta_hat is the jitter share, (I/r)(C + I/r)^-1 beta_hat
        gap = np.linalg.solve(C + np.eye(N_OBS) / p.r, bh) / p.r
        np.testing.assert_allclose(bh - curves[0], gap, rtol=1e-8, atol=1e-12)

    def test_unselected_covariates_are_switched_off(self):
        train = _train()
        # covariate 1 is on in one record of four, so its PPI is below the cutoff
        recs = [_record([1, 0, 0], gamma_tilde=[[1, 1 if i == 0 else 0], [0, 0], [0, 0]])
                for i in range(4)]
        trace = Trace(recs)
        _, curves = smoothed_curves(trace, train, train.Z)
        ref = Trace([_record([1, 0, 0], gamma_tilde=[[1, 0], [0, 0], [0, 0]])] * 4)
        _, expected = smoothed_curves(ref, train, train.Z)
        np.testing.assert_allclose(curves, expected)

    def test_zero_test_predictors(self):
        train = _train()
        trace = Trace([_record([1, 1, 0]) for _ in range(2)])
        y = predict(trace, train, np.zeros((4, 3)), np.random.default_rng(0).random((4, 2)))
        assert np.all(y == 0)

    def test_no_joint_record(self):
        train = _train()
        trace = Trace([_record([1, 0, 0]), _record([0, 1, 0])])
        with pytest.raises(PredictionError):
            smoothed_curves(trace, train, train.Z, threshold=0.4)


class TestSummarize:
    def test_report(self):
        recs = ([_record([1, 0, 1], gamma_tilde=[[1, 0], [0, 0], [0, 1]], edges=[(0, 1)])] * 3
                + [_record([1, 0, 0])])
        rep = summarize(Trace(recs), N_OBS)
        assert rep.selected_predictors == [0, 2]
        assert rep.selected_covariates == {0: [0], 2: [1]}
        assert rep.selected_edges == [(0, 1)]
        d = rep.to_dict()
        assert d["selected_edges"] == [[0, 1]] and d["threshold"] == 0.5

    def test_fdr_mode(self):
        recs = [_record([1, 1, 0])] * 6 + [_record([1, 0, 0])] * 4
        # PPIs (1, 0.6, 0): target 0.25 allows both; target 0.1 keeps only the first
        assert summarize(Trace(recs), N_OBS, fdr=0.25).selected_predictors == [0, 1]
        assert summarize(Trace(recs), N_OBS, fdr=0.1).selected_predictors == [0]
