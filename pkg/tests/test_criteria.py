import numpy as np
import pytest

import oracles
from causalbw.criteria import (
    GroupSweep,
    OracleTruth,
    cv_score,
    fit_logistic_propensity,
    joint_tau_surface,
    mse_beta_ds,
    mse_beta_inr,
    mse_beta_oracle,
    mse_tau_ds,
    mse_tau_oracle,
    mse_y_oracle,
)
from causalbw.designs import design, design_sigma2, oracle_truth
from causalbw.errors import OverlapViolationError
from causalbw.estimators import Dataset
from causalbw.kernels import TRICUBE
from causalbw.selection import BandwidthGrid, paper_grid
from causalbw.simulation import generate
from causalbw.smoothing import Bandwidth, GroupSample


def close(a, b, tol=1e-12):
    assert abs(a - b) <= tol * max(1.0, abs(a), abs(b)), (a, b)


@pytest.fixture(scope="module")
def small_sample():
    spec = design(3)
    data = generate(spec, 50, design_sigma2(spec), seed=100)
    return spec, data


class TestCvScore:
    def test_constant_outcome(self):
        rng = np.random.default_rng(0)
        group = GroupSample(rng.uniform(0, 5, 12), np.full(12, 2.0))
        assert cv_score(group, TRICUBE, Bandwidth.nn(0.5)) == pytest.approx(0.0, abs=1e-20)

    def test_linear_outcome(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 5, 15)
        group = GroupSample(x, 1.0 + 2.0 * x)
        assert cv_score(group, TRICUBE, Bandwidth.nn(0.6)) == pytest.approx(0.0, abs=1e-18)

    def test_matches_delete_refit_loop(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 2 * np.pi, 20)
        y = np.sin(x) + rng.normal(0, 0.4, 20)
        group = GroupSample(x, y)
        got = cv_score(group, TRICUBE, Bandwidth.nn(0.45))
        close(got, oracles.cv_bf(x, y, TRICUBE.fn, "nn", 0.45))


class TestMseYOracle:
    def test_zero_for_linear_truth_without_noise(self):
        rng = np.random.default_rng(3)
        group = GroupSample(rng.uniform(0, 5, 20), np.zeros(20))
        truth = OracleTruth(lambda x: 1 + x, lambda x: x, 0.0, lambda x: 0.5 * np.ones_like(x))
        val = mse_y_oracle(group, TRICUBE, Bandwidth.nn(0.5), truth, 1)
        assert val.total == pytest.approx(0.0, abs=1e-18)

    def test_unit_variance_part(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(0, 5, 15)
        group = GroupSample(x, np.zeros(15))
        truth = OracleTruth(np.sin, np.cos, 1.0, lambda x: 0.5 * np.ones_like(x))
        val = mse_y_oracle(group, TRICUBE, Bandwidth.nn(0.5), truth, 1)
        s = oracles.smoothing_matrix_bf(x, x, TRICUBE.fn, "nn", 0.5)
        close(val.variance_part, sum(float(s[i] @ s[i]) for i in range(15)) / 15)

    def test_matches_matrix_oracle(self, small_sample):
        spec, data = small_sample
        truth = oracle_truth(spec, 4.0)
        val = mse_y_oracle(data.treated, TRICUBE, Bandwidth.nn(0.5), truth, 1)
        var, bias = oracles.mse_y_bf(data.treated.x, TRICUBE.fn, "nn", 0.5, spec.beta1, 4.0)
        close(val.variance_part, var)
        close(val.bias_sq_part, bias)
        close(val.total, var + bias)


class TestMseBetaOracle:
    def test_zero_for_linear_truth(self, small_sample):
        _, data = small_sample
        truth = OracleTruth(lambda x: 1 + x, lambda x: x, 0.0, lambda x: 0.5 * np.ones_like(x))
        val = mse_beta_oracle(data.x, data.control, TRICUBE, Bandwidth.nn(0.5), truth, 0)
        assert val.total == pytest.approx(0.0, abs=1e-16)

    def test_variance_equals_double_sum(self, small_sample):
        spec, data = small_sample
        truth = oracle_truth(spec, 2.5)
        val = mse_beta_oracle(data.x, data.treated, TRICUBE, Bandwidth.nn(0.4), truth, 1)
        var, bias = oracles.mse_beta_bf(data.x, data.treated.x, TRICUBE.fn, "nn", 0.4, spec.beta1, 2.5)
        close(val.variance_part, var)
        close(val.bias_sq_part, bias)

    def test_matches_matrix_oracle_design3(self):
        spec = design(3)
        sigma2 = design_sigma2(spec)
        data = generate(spec, 60, sigma2, seed=101)
        truth = oracle_truth(spec, sigma2)
        val = mse_beta_oracle(data.x, data.control, TRICUBE, Bandwidth.nn(0.3), truth, 0)
        var, bias = oracles.mse_beta_bf(
            data.x, data.control.x, TRICUBE.fn, "nn", 0.3, spec.beta0, sigma2
        )
        close(val.variance_part, var)
        close(val.bias_sq_part, bias)


class TestMseTauOracle:
    def test_zero_for_linear_truths(self, small_sample):
        _, data = small_sample
        truth = OracleTruth(lambda x: 2 + x, lambda x: x, 0.0, lambda x: 0.5 * np.ones_like(x))
        val = mse_tau_oracle(
            data.x, data.treated, data.control, TRICUBE,
            Bandwidth.nn(0.5), Bandwidth.nn(0.5), truth,
        )
        assert val.total == pytest.approx(0.0, abs=1e-16)

    def test_identity_collapses_with_linear_control(self, small_sample):
        spec, data = small_sample
        truth = OracleTruth(spec.beta1, lambda x: 1.0 - x, 1.5, spec.propensity)
        h1, h0 = Bandwidth.nn(0.4), Bandwidth.nn(0.6)
        tau_val = mse_tau_oracle(data.x, data.treated, data.control, TRICUBE, h1, h0, truth)
        m1 = mse_beta_oracle(data.x, data.treated, TRICUBE, h1, truth, 1)
        m0 = mse_beta_oracle(data.x, data.control, TRICUBE, h0, truth, 0)
        assert m0.bias_avg == pytest.approx(0.0, abs=1e-12)
        close(tau_val.total, m1.total + m0.total, 1e-10)

    def test_matches_matrix_oracle_and_identity(self):
        spec = design(4)
        sigma2 = design_sigma2(spec)
        data = generate(spec, 55, sigma2, seed=102)
        truth = oracle_truth(spec, sigma2)
        h1, h0 = Bandwidth.nn(0.4), Bandwidth.nn(0.6)
        val = mse_tau_oracle(data.x, data.treated, data.control, TRICUBE, h1, h0, truth)
        var, bias = oracles.mse_tau_bf(
            data.x, data.treated.x, data.control.x, TRICUBE.fn, "nn",
            0.4, 0.6, spec.beta1, spec.beta0, sigma2,
        )
        close(val.variance_part, var)
        close(val.bias_sq_part, bias)
        m1 = mse_beta_oracle(data.x, data.treated, TRICUBE, h1, truth, 1)
        m0 = mse_beta_oracle(data.x, data.control, TRICUBE, h0, truth, 0)
        decomposition = m1.total + m0.total - 2.0 * m1.bias_avg * m0.bias_avg
        assert abs(val.total - decomposition) < 1e-10


class TestMseBetaInr:
    def test_zero_residuals(self, small_sample):
        _, data = small_sample
        x1 = data.treated.x
        group = GroupSample(x1, 2.0 + 0.5 * x1)
        p = np.full(group.n, 0.5)
        val = mse_beta_inr(data.x, group, TRICUBE, Bandwidth.nn(0.5), p, 3.0)
        s_grp = oracles.smoothing_matrix_bf(x1, x1, TRICUBE.fn, "nn", 0.5)
        pinv = 1.0 / p
        m = (np.eye(group.n) - s_grp) @ (np.eye(group.n) - s_grp).T
        correction = 3.0 / data.n**2 * float(pinv @ m @ pinv)
        close(val.total, val.variance_part - correction, 1e-10)

    def test_matches_matrix_oracle_small(self):
        x_all = np.array([0.3, 0.9, 1.7, 2.4, 3.3, 4.0, 4.8, 5.5])
        x_grp = x_all[[0, 2, 4, 5, 7]]
        y_grp = np.array([1.0, -0.5, 0.7, 2.0, -1.2])
        group = GroupSample(x_grp, y_grp)
        p = np.full(5, 0.5)
        val = mse_beta_inr(x_all, group, TRICUBE, Bandwidth.nn(0.8), p, 1.3)
        var, bias = oracles.mse_inr_bf(x_all, x_grp, y_grp, TRICUBE.fn, "nn", 0.8, p, 1.3)
        close(val.variance_part, var)
        close(val.bias_sq_part, bias)

    def test_unit_propensity_collapses_weights(self, small_sample):
        _, data = small_sample
        group = data.treated
        p = np.ones(group.n)
        val = mse_beta_inr(data.x, group, TRICUBE, Bandwidth.nn(0.5), p, 0.0)
        s_grp = oracles.smoothing_matrix_bf(group.x, group.x, TRICUBE.fn, "nn", 0.5)
        resid = group.y - s_grp @ group.y
        close(val.total, float(resid.sum() / data.n) ** 2, 1e-10)

    def test_overlap_violation(self, small_sample):
        _, data = small_sample
        group = data.treated
        bad = np.full(group.n, 0.5)
        bad[0] = 0.0
        with pytest.raises(OverlapViolationError, match="overlap violation"):
            mse_beta_inr(data.x, group, TRICUBE, Bandwidth.nn(0.5), bad, 1.0)
        bad[0] = 1.0001
        with pytest.raises(OverlapViolationError):
            mse_beta_inr(data.x, group, TRICUBE, Bandwidth.nn(0.5), bad, 1.0)


class TestMseBetaDs:
    def test_linear_pilot_kills_bias(self, small_sample):
        _, data = small_sample
        x1 = data.treated.x
        group = GroupSample(x1, 1.0 + 0.25 * x1)
        val = mse_beta_ds(data.x, group, TRICUBE, Bandwidth.nn(0.5), Bandwidth.nn(0.7), 2.0)
        assert val.bias_sq_part == pytest.approx(0.0, abs=1e-16)

    def test_ols_limit_idempotence(self, small_sample):
        _, data = small_sample
        group = data.treated
        huge = Bandwidth.constant(1e6)
        val = mse_beta_ds(data.x, group, TRICUBE, huge, huge, 2.0)
        assert val.bias_sq_part == pytest.approx(0.0, abs=1e-16)

    def test_matches_matrix_oracle_design5(self):
        spec = design(5)
        sigma2 = design_sigma2(spec)
        data = generate(spec, 50, sigma2, seed=103)
        group = data.control
        val = mse_beta_ds(data.x, group, TRICUBE, Bandwidth.nn(0.35), Bandwidth.nn(0.6), sigma2)
        var, bias = oracles.mse_ds_bf(
            data.x, group.x, group.y, TRICUBE.fn, "nn", 0.35, 0.6, sigma2
        )
        close(val.variance_part, var)
        close(val.bias_sq_part, bias)


class TestMseTauDs:
    def test_linear_pilots_leave_variance(self, small_sample):
        _, data = small_sample
        x1, x0 = data.treated.x, data.control.x
        g1 = GroupSample(x1, 2.0 + x1)
        g0 = GroupSample(x0, -1.0 + 0.5 * x0)
        val = mse_tau_ds(
            data.x, g1, g0, TRICUBE,
            Bandwidth.nn(0.4), Bandwidth.nn(0.5),
            Bandwidth.nn(0.8), Bandwidth.nn(0.8), 1.0, 2.0,
        )
        assert val.bias_sq_part == pytest.approx(0.0, abs=1e-16)
        close(val.total, val.variance_part, 1e-12)

    def test_identical_groups_cancel(self, small_sample):
        _, data = small_sample
        group = data.treated
        val = mse_tau_ds(
            data.x, group, group, TRICUBE,
            Bandwidth.nn(0.5), Bandwidth.nn(0.5),
            Bandwidth.nn(0.7), Bandwidth.nn(0.7), 1.0, 1.0,
        )
        assert val.bias_sq_part == pytest.approx(0.0, abs=1e-18)

    def test_matches_decomposition_oracle_design6(self):
        spec = design(6)
        sigma2 = design_sigma2(spec)
        data = generate(spec, 50, sigma2, seed=104)
        h1, h0 = Bandwidth.nn(0.45), Bandwidth.nn(0.55)
        g1, g0 = Bandwidth.nn(0.3), Bandwidth.nn(0.35)
        val = mse_tau_ds(data.x, data.treated, data.control, TRICUBE, h1, h0, g1, g0, sigma2, sigma2)
        var, bias = oracles.mse_tau_ds_bf(
            data.x, data.treated.x, data.treated.y, data.control.x, data.control.y,
            TRICUBE.fn, "nn", 0.45, 0.55, 0.3, 0.35, sigma2, sigma2,
        )
        close(val.variance_part, var)
        close(val.bias_sq_part, bias)
        m1 = mse_beta_ds(data.x, data.treated, TRICUBE, h1, g1, sigma2)
        m0 = mse_beta_ds(data.x, data.control, TRICUBE, h0, g0, sigma2)
        decomposition = m1.total + m0.total - 2.0 * m1.bias_avg * m0.bias_avg
        assert abs(val.total - decomposition) < 1e-10


class TestScalingAndInvariance:
    def test_criteria_scale_quadratically(self, small_sample):
        spec, data = small_sample
        c = 3.0
        truth = oracle_truth(spec, 2.0)
        scaled_truth = OracleTruth(
            lambda x: c * spec.beta1(x), lambda x: c * spec.beta0(x),
            c**2 * 2.0, spec.propensity,
        )
        scaled = Dataset(data.x, c * data.y, data.z)
        h = Bandwidth.nn(0.5)
        for arm, group, sgroup in ((1, data.treated, scaled.treated), (0, data.control, scaled.control)):
            a = mse_beta_oracle(data.x, group, TRICUBE, h, truth, arm)
            b = mse_beta_oracle(data.x, sgroup, TRICUBE, h, scaled_truth, arm)
            close(b.total, c**2 * a.total, 1e-10)
            a = mse_y_oracle(group, TRICUBE, h, truth, arm)
            b = mse_y_oracle(sgroup, TRICUBE, h, scaled_truth, arm)
            close(b.total, c**2 * a.total, 1e-10)
            a = cv_score(group, TRICUBE, h)
            b = cv_score(sgroup, TRICUBE, h)
            close(b, c**2 * a, 1e-10)

    def test_variance_part_ignores_outcomes(self, small_sample):
        spec, data = small_sample
        truth = oracle_truth(spec, 2.0)
        shifted = Dataset(data.x, data.y + np.cos(data.x), data.z)
        h = Bandwidth.nn(0.45)
        a = mse_beta_oracle(data.x, data.treated, TRICUBE, h, truth, 1)
        b = mse_beta_oracle(data.x, shifted.treated, TRICUBE, h, truth, 1)
        assert a.variance_part == b.variance_part


class TestGroupSweep:
    def test_surfaces_match_pointwise_functions(self):
        spec = design(2)
        sigma2 = design_sigma2(spec)
        data = generate(spec, 80, sigma2, seed=105)
        truth = oracle_truth(spec, sigma2)
        grid = BandwidthGrid(np.linspace(0.3, 1.0, 6))
        p1 = spec.propensity(data.treated.x)
        sweep = GroupSweep(data, 1, TRICUBE, grid, truth=truth, arm_propensity=p1)
        pilot = Bandwidth.nn(0.5)
        my = sweep.my_surface(sigma2)
        mbeta = sweep.mbeta_surface(sigma2)
        inr = sweep.inr_surface(sigma2)
        cv = sweep.cv_surface()
        ds = sweep.ds_surface(sigma2, pilot)
        for i in range(grid.count):
            bw = grid.bandwidth(i)
            close(my[i], mse_y_oracle(data.treated, TRICUBE, bw, truth, 1).total, 1e-9)
            close(mbeta[i], mse_beta_oracle(data.x, data.treated, TRICUBE, bw, truth, 1).total, 1e-9)
            close(inr[i], mse_beta_inr(data.x, data.treated, TRICUBE, bw, p1, sigma2).total, 1e-9)
            close(cv[i], cv_score(data.treated, TRICUBE, bw), 1e-9)
            close(ds[i], mse_beta_ds(data.x, data.treated, TRICUBE, bw, pilot, sigma2).total, 1e-9)

    def test_joint_surface_matches_tau_functions(self):
        spec = design(4)
        sigma2 = design_sigma2(spec)
        data = generate(spec, 70, sigma2, seed=106)
        truth = oracle_truth(spec, sigma2)
        grid = BandwidthGrid(np.linspace(0.4, 1.0, 4))
        sweep1 = GroupSweep(data, 1, TRICUBE, grid, truth=truth, with_loo=False)
        sweep0 = GroupSweep(data, 0, TRICUBE, grid, truth=truth, with_loo=False)
        surface = joint_tau_surface(
            sweep1.var_surface(sigma2), sweep1.bias_avg_oracle,
            sweep0.var_surface(sigma2), sweep0.bias_avg_oracle,
        )
        pilots = (Bandwidth.nn(0.6), Bandwidth.nn(0.7))
        ds_surface = joint_tau_surface(
            sweep1.var_surface(sigma2), sweep1.ds_bias_avgs(pilots[0]),
            sweep0.var_surface(sigma2), sweep0.ds_bias_avgs(pilots[1]),
        )
        for i in range(grid.count):
            for k in range(grid.count):
                h1, h0 = grid.bandwidth(i), grid.bandwidth(k)
                want = mse_tau_oracle(data.x, data.treated, data.control, TRICUBE, h1, h0, truth)
                close(surface[i, k], want.total, 1e-9)
                want_ds = mse_tau_ds(
                    data.x, data.treated, data.control, TRICUBE,
                    h1, h0, pilots[0], pilots[1], sigma2, sigma2,
                )
                close(ds_surface[i, k], want_ds.total, 1e-9)

    def test_infeasible_grid_points_are_nan(self):
        # treated donors start around x = 2.1, so windows below ~2.2 cannot
        # reach the eval points near 0 and the whole grid value drops out
        spec = design(3)
        data = generate(spec, 40, 1.0, seed=107)
        grid = BandwidthGrid(np.array([1e-4, 3.0, 5.0]), "constant")
        sweep = GroupSweep(data, 1, TRICUBE, grid, with_loo=False)
        assert np.isnan(sweep.var_quad[0])
        assert np.isfinite(sweep.var_quad[1:]).all()


class TestLogisticPropensity:
    def test_recovers_generating_coefficients(self):
        rng = np.random.default_rng(20)
        x = rng.uniform(0, 2 * np.pi, 4000)
        p_true = 1.0 / (1.0 + np.exp(-(x - 3.5)))
        z = (rng.random(4000) < p_true).astype(int)
        p_hat = fit_logistic_propensity(x, z)
        assert np.all((p_hat > 0) & (p_hat < 1))
        assert np.max(np.abs(p_hat - p_true)) < 0.06
