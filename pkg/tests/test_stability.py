import numpy as np
import pytest

from smir.factor import factor
from smir.gallery import generate
from smir.matcore import EPS, comp_residual
from smir.smsolver import RankOneSystem, SmTrace, residual, sm_ir_solve, sm_solve
from smir.stability import (
    HypothesisViolated,
    bound_report,
    componentwise_berr,
    error_report,
    forward_err,
    g_bound,
    gamma,
    h_bound,
    growth_check,
    normwise_berr,
    normwise_bound,
    rigal_gaches_check,
    sm_residual_bound,
    t_bound,
    one_step_ratio,
)


def scalar_system():
    # A = (2), u = v = (1), b = (3): B = 3, x = 1
    return RankOneSystem(np.array([[2.0]]), np.array([1.0]), np.array([1.0]), np.array([3.0]))


class TestResidual:
    def test_zero_iterate(self):
        prob = generate("4", 20, 10.0, seed=0)
        np.testing.assert_array_equal(residual(prob.sys, np.zeros(20)), prob.b)

    def test_zero_update(self):
        a = np.array([[1.0, 2.0], [3.0, 5.0]])
        x = np.array([0.3, -0.7])
        b = np.array([1.0, 1.0])
        sys = RankOneSystem(a, np.zeros(2), np.array([4.0, 4.0]), b)
        np.testing.assert_array_equal(residual(sys, x), b - a @ x)

    def test_rational_solution(self):
        a = np.array([[3.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 5.0]])
        u, v = np.array([1.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0])
        # B = [[3,2,0],[1,4,1],[0,2,5]], x = (1, -1, 2) gives b = (1, -1, 8)
        x = np.array([1.0, -1.0, 2.0])
        b = np.array([1.0, -1.0, 8.0])
        sys = RankOneSystem(a, u, v, b)
        r = residual(sys, x)
        np.testing.assert_array_equal(r, 0.0)
        assert np.all(np.abs(r) <= 4 * 3 * EPS * (np.abs(b) + sys.abs_B_matvec(x)))


class TestBackwardErrors:
    def test_zero_residual(self):
        sys = scalar_system()
        assert normwise_berr(sys, [1.0], [0.0]) == 0.0
        assert componentwise_berr(sys, [1.0], [0.0]) == 0.0

    def test_normwise_example(self):
        sys = RankOneSystem(np.eye(2), np.zeros(2), np.zeros(2), np.array([2.0, 0.0]))
        x = np.array([1.0, 0.0])
        assert normwise_berr(sys, x, residual(sys, x)) == pytest.approx(1 / 3, rel=4 * EPS)

    def test_componentwise_example(self):
        # |B||x| + |b| = (2, 4) with |r| = (1, 1)
        sys = RankOneSystem(np.eye(2), np.zeros(2), np.zeros(2), np.array([1.0, 3.0]))
        assert componentwise_berr(sys, [1.0, 1.0], [1.0, 1.0]) == 0.5

    def test_componentwise_zero_denominators(self):
        sys = RankOneSystem(np.eye(2), np.zeros(2), np.zeros(2), np.zeros(2))
        assert componentwise_berr(sys, [0.0, 0.0], [0.0, 0.0]) == 0.0
        assert componentwise_berr(sys, [0.0, 0.0], [0.0, 1.0]) == np.inf

    def test_scale_invariance(self):
        prob = generate("1i", 80, 1e8, seed=3)
        x = sm_solve(prob.sys, factor(prob.A)).solution
        e1 = error_report(prob.sys, x)
        big = prob.sys.scaled(2.0 ** 40)
        e2 = error_report(big, x)
        assert e2.normwise_berr == pytest.approx(e1.normwise_berr, rel=1e-12)
        assert e2.componentwise_berr == pytest.approx(e1.componentwise_berr, rel=1e-12)

    @pytest.mark.parametrize("case", ["1i", "2i", "4"])
    def test_gepp_plus_one_step(self, case):
        from smir.factor import plu_factor

        prob = generate(case, 150, 1e6 if case == "1i" else 1e3, seed=2)
        sys = prob.sys
        fb = plu_factor(sys.dense_B())
        x = fb.solve(sys.b)
        x = x + fb.solve(residual(sys, x))
        assert error_report(sys, x).componentwise_berr <= 8 * sys.n * EPS


class TestForwardError:
    def test_examples(self):
        x = np.array([1.0, -2.0, 4.0])
        assert forward_err(x, x) == 0.0
        assert forward_err(1.01 * x, x) == pytest.approx(0.01, rel=1e-12)
        assert forward_err(x, np.zeros(3), with_flag=True) == (4.0, True)

    def test_oracle_reference(self):
        prob = generate("2ii", 100, 1e3, seed=1)
        rep = sm_ir_solve(prob.sys, factor(prob.A))
        assert error_report(prob.sys, rep.solution, prob.x_ref).forward_err <= 1e3 * EPS * 1e3


class TestGrowthBound:
    def test_constructed_case(self):
        v = np.array([1.0, 1.0])  # v.v = 2
        tr = SmTrace(v, v, 2.0, 3.0, 2.0 / 3.0, None, None, 2.0)
        res = growth_check(tr, v)
        assert res.hypothesis_holds and res.zeta == 0.5
        assert res.c_check == pytest.approx(3.0, rel=4 * EPS)
        assert res.lhs == pytest.approx((1 + 2 / 3) * np.sqrt(2), rel=4 * EPS)
        assert res.bound_holds

    def test_hypothesis_boundary(self):
        v = np.array([1.0, 0.0])
        tr = SmTrace(v, v, 1.0, 2.0, 0.5, None, None, 1.0)
        res = growth_check(tr, v)
        assert not res.hypothesis_holds and res.bound_holds is None


class TestNormwiseBound:
    def test_plug_in(self):
        sys = RankOneSystem(np.eye(2), np.zeros(2), np.zeros(2), np.array([1.0, 0.0]))
        bound = normwise_bound(sys, 1.0, 1.0, 1.0, c_check=2.0, norm_A=1.0, norm_A_inv=1.0,
                             norm_B=1.0, norm_b=1.0)
        # eps * 2 / (1 - eps) * (1 + 1) * 1 * 1
        assert bound == 4 * EPS / (1 - EPS)

    def test_hypothesis_violated(self):
        sys = RankOneSystem(np.eye(2), np.zeros(2), np.zeros(2), np.ones(2))
        with pytest.raises(HypothesisViolated):
            normwise_bound(sys, 1 / EPS, 1.0, 1.0, c_check=2.0, norm_A=1.0, norm_A_inv=1.0)

    def test_gamma(self):
        assert gamma(3) == 3 * EPS / (1 - 3 * EPS)
        with pytest.raises(HypothesisViolated):
            gamma(2 ** 53)


class TestComponentwiseBounds:
    def test_scalar_hand_evaluation(self):
        sys = scalar_system()
        rep = sm_solve(sys, factor(sys.A))
        tr = rep.sm_trace
        assert (tr.y_hat[0], tr.z_hat[0], tr.alpha, tr.beta, tr.theta, tr.x_hat[0]) == (1.5, 0.5, 1.5, 1.5, 1.0, 1.0)
        # g|x| = c n^2 (2) + 2 + (n+1) * 1
        np.testing.assert_array_equal(g_bound(sys, tr.x_hat), [6.0])
        # h = 1 * [(2 + 3) * 2 * 0.5 + 2 * 5 * 0.5] + 2
        np.testing.assert_array_equal(h_bound(sys, tr.z_hat, 1.0), [12.0])
        np.testing.assert_array_equal(sm_residual_bound(sys, tr), [18 * EPS])
        assert residual(sys, tr.x_hat)[0] == 0.0
        np.testing.assert_allclose(t_bound(sys, tr.x_hat), [6 * gamma(3) / EPS], rtol=4 * EPS)

    def test_zero_iterate_t(self):
        prob = generate("4", 30, 10.0, seed=4)
        np.testing.assert_array_equal(t_bound(prob.sys, np.zeros(30)),
                                      gamma(32) / EPS * np.abs(prob.b))

    def test_zero_update(self):
        prob = generate("1i", 60, 1e6, seed=6)
        sys = RankOneSystem(prob.A, np.zeros(60), prob.v, prob.b)
        rep = sm_solve(sys, factor(prob.A))
        r = np.abs(residual(sys, rep.solution))
        assert np.all(h_bound(sys, rep.sm_trace.z_hat, 0.0) == 0.0)
        assert np.all(r <= EPS * g_bound(sys, rep.solution))

    @pytest.mark.parametrize("seed", range(20))
    def test_case1i_sweep(self, seed):
        prob = generate("1i", 100, [1e6, 1e8, 1e10, 1e12][seed % 4], seed=seed)
        tr = sm_solve(prob.sys, factor(prob.A)).sm_trace
        r = np.abs(residual(prob.sys, tr.x_hat))
        assert np.all(r <= 10 * sm_residual_bound(prob.sys, tr))
        r_hat = residual(prob.sys, tr.x_hat)
        r_exact = comp_residual(prob.A, prob.u, prob.v, prob.b, tr.x_hat)
        assert np.all(np.abs(r_exact - r_hat) <= 4 * EPS * t_bound(prob.sys, tr.x_hat))


class TestOneStep:
    def test_zero_update(self):
        prob = generate("4", 40, 1e2, seed=2)
        sys = RankOneSystem(prob.A, np.zeros(40), prob.v, prob.b)
        rep = sm_ir_solve(sys, factor(prob.A), tol=0.0, max_ir=1)
        assert one_step_ratio(sys, rep.ir_trace, rep.sm_trace) == 0.0

    def test_case4(self):
        prob = generate("4", 100, 1e2, seed=3)
        rep = sm_ir_solve(prob.sys, factor(prob.A), tol=0.0, max_ir=1)
        assert one_step_ratio(prob.sys, rep.ir_trace, rep.sm_trace) <= 1e2
        assert rep.ir_trace.steps[0].componentwise_berr <= 10 * EPS


class TestRigalGaches:
    @pytest.mark.parametrize("case", ["1i", "1ii", "3", "4"])
    def test_constructive(self, case):
        prob = generate(case, 100, 1e8 if case in ("1i", "1ii", "3") else 1e3, seed=7)
        x = sm_solve(prob.sys, factor(prob.A)).solution
        chk = rigal_gaches_check(prob.sys, x)
        assert chk.passed
        assert chk.eta == pytest.approx(error_report(prob.sys, x).normwise_berr, rel=1e-6, abs=EPS)

    def test_exact_solution(self):
        sys = scalar_system()
        chk = rigal_gaches_check(sys, [1.0])
        assert chk.eta == 0.0 and chk.passed


def test_bound_report_fields():
    prob = generate("1i", 80, 1e8, seed=1)
    f = factor(prob.A)
    rep = sm_ir_solve(prob.sys, f)
    br = bound_report(prob.sys, rep, sigma=(prob.sigma[0], prob.sigma[-1]), f=f)
    d = br.to_dict()
    assert br.sm_bound_ratio <= 10
    assert set(d["g_vec"]) == {"max", "min"}
    assert br.one_step_ratio is not None
