import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ultrascale.scales import (
    DEFAULT_SCHEDULE,
    EpsSchedule,
    FitError,
    check_moderate_function,
    check_scale_axioms,
    classify_constants,
    fit_exponent,
    make_scale,
)
from ultrascale.weights import make_weight


@pytest.fixture(scope="module")
def w():
    return make_weight("power(0.5)")


@pytest.fixture(scope="module")
def x(w):
    return w(DEFAULT_SCHEDULE.inv)


@pytest.fixture(scope="module")
def beurling(w):
    return make_scale("beurling", w)


@pytest.fixture(scope="module")
def roumieu(w):
    return make_scale("roumieu", w)


class TestSchedule:
    def test_defaults(self):
        s = EpsSchedule()
        assert s.eps[0] == 2 ** -4 and s.eps[-1] == 2 ** -40
        assert len(s) == 37
        assert np.all(np.diff(s.eps) < 0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            EpsSchedule(10, 10)


class TestFitExponent:
    @pytest.mark.parametrize("c", [-3.0, 0.0, 2.0])
    def test_planted_noiseless(self, w, x, c):
        assert abs(fit_exponent(log_values=c * x, w=w).slope - c) <= 0.05

    @pytest.mark.parametrize("c", [-3.0, 0.0, 2.0])
    def test_planted_with_noise(self, w, x, c):
        rng = np.random.default_rng(7)
        noise = np.log1p(0.01 * rng.standard_normal(x.size))
        fit = fit_exponent(log_values=c * x + noise, w=w)
        assert abs(fit.slope - c) <= 0.1
        assert not fit.unreliable

    def test_constant_slope_exactly_zero(self, w):
        assert fit_exponent(np.full(len(DEFAULT_SCHEDULE), 5.0), w).slope == 0.0

    def test_window(self, w, x):
        fit = fit_exponent(log_values=x, w=w)
        assert fit.window == (29, 40)
        assert fit.n_points == 12

    def test_rejects_non_finite(self, w):
        vals = np.ones(len(DEFAULT_SCHEDULE))
        vals[3] = np.nan
        with pytest.raises(FitError):
            fit_exponent(vals, w)
        with pytest.raises(FitError):
            fit_exponent(-vals, w)

    def test_super_scale_decay_diverges(self, w, x):
        fit = fit_exponent(log_values=-x ** 1.2, w=w)
        assert fit.trend == "diverging"
        assert fit.asymptotic_slope == -math.inf

    def test_slow_decay_vanishes(self, w, x):
        fit = fit_exponent(log_values=-np.sqrt(x), w=w)
        assert fit.trend == "vanishing"
        assert fit.asymptotic_slope == 0.0

    def test_deterministic(self, w, x):
        y = 1.7 * x + np.sin(x)
        a, b = fit_exponent(log_values=y, w=w), fit_exponent(log_values=y, w=w)
        assert a.to_json() == b.to_json()

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-10, 10), st.floats(-5, 5))
    def test_scale_equivariance(self, c, c0):
        w = make_weight("power(0.5)")
        x = w(DEFAULT_SCHEDULE.inv)
        base = c0 * x + np.log1p(x)
        a = fit_exponent(log_values=base, w=w).slope
        b = fit_exponent(log_values=base + c * x, w=w).slope
        assert abs((b - a) - c) < 1e-9


class TestScale:
    def test_beurling_member(self, beurling):
        assert beurling.log_member(1.0, [2 ** -10])[0] == pytest.approx(-32.0)

    def test_beurling_product_law(self, beurling):
        np.testing.assert_allclose(beurling.log_member(3.0),
                                   beurling.log_member(1.0) + beurling.log_member(2.0))

    def test_index_set(self, beurling):
        assert beurling.indices[0] == 2 ** -4 and beurling.indices[-1] == 64

    def test_roumieu_members_ordered(self, roumieu):
        for a, b in zip(roumieu.indices[:-1], roumieu.indices[1:]):
            ratio = roumieu.log_member(b) - roumieu.log_member(a)
            assert ratio[-1] < math.log(0.05)
            assert np.all(np.diff(ratio[-8:]) < 0)

    @pytest.mark.parametrize("kind", ["beurling", "roumieu"])
    def test_axioms_pass(self, w, kind):
        rep = check_scale_axioms(make_scale(kind, w))
        assert rep["passed"], rep

    def test_beurling_witness(self, beurling):
        rep = check_scale_axioms(beurling)
        for row in rep["product"]:
            assert float(row["witness"]) == float(row["l"]) + float(row["m"]) + 1

    def test_degenerate_scale_fails(self, w):
        rep = check_scale_axioms(make_scale("beurling", w, indices=[1.0]))
        assert rep["ordering"] == []
        assert rep["status"] == "fail"

    def test_roumieu_depth_bound(self, w):
        with pytest.raises(ValueError):
            make_scale("roumieu", w, roumieu_depth=9)


class TestClassifyConstants:
    def test_exp_w(self, beurling, roumieu, x):
        assert classify_constants(s=beurling, log_abs=x).cls == "Moderate"
        assert classify_constants(s=roumieu, log_abs=x).cls == "Neither"

    @pytest.mark.parametrize("pres", ["inductive", "projective"])
    def test_one(self, beurling, roumieu, pres):
        r = np.ones(len(DEFAULT_SCHEDULE))
        assert classify_constants(r, beurling).cls == "Moderate"
        assert classify_constants(r, roumieu, presentation=pres).cls == "Moderate"

    @pytest.mark.parametrize("pres", ["inductive", "projective"])
    def test_super_scale_decay(self, beurling, roumieu, x, pres):
        y = -x ** 1.2
        assert classify_constants(s=beurling, log_abs=y).cls == "Negligible"
        assert classify_constants(s=roumieu, log_abs=y, presentation=pres).cls == "Negligible"

    def test_zero_sequence_negligible(self, beurling, roumieu):
        z = np.zeros(len(DEFAULT_SCHEDULE))
        assert classify_constants(z, beurling).cls == "Negligible"
        assert classify_constants(z, roumieu).cls == "Negligible"

    def test_roumieu_only_negligible(self, beurling, roumieu, x):
        assert classify_constants(s=beurling, log_abs=-3 * x).cls == "Moderate"
        assert classify_constants(s=roumieu, log_abs=-3 * x).cls == "Negligible"

    @pytest.mark.parametrize("y", ["x", "-x", "0", "-x**1.2", "sqrt(x)", "-sqrt(x)", "0.5*x",
                                   "-2*x", "x**1.2"])
    def test_roumieu_presentations_agree(self, roumieu, x, y):
        ly = eval(y, {"x": x, "sqrt": np.sqrt}) + 0 * x
        a = classify_constants(s=roumieu, log_abs=ly)
        b = classify_constants(s=roumieu, log_abs=ly, presentation="projective")
        assert a.cls == b.cls

    def test_complex_values(self, beurling, x):
        r = np.full(x.size, 1 + 1j)
        assert classify_constants(r, beurling).cls == "Moderate"

    def test_ring_structure(self, beurling, roumieu, x):
        neg = -x ** 1.2
        for s in (beurling, roumieu):
            mod = [y for y in (0.5 * x, 0 * x, np.sqrt(x), -np.sqrt(x))
                   if classify_constants(s=s, log_abs=y).moderate]
            assert len(mod) >= 3
            for a in mod:
                for b in mod:
                    assert classify_constants(s=s, log_abs=a + b).moderate
                assert classify_constants(s=s, log_abs=a + neg).cls == "Negligible"

    def test_beurling_negligible_implies_roumieu(self, beurling, roumieu, x):
        for y in (-x ** 1.2, -70 * x, -x ** 1.5):
            if classify_constants(s=beurling, log_abs=y).negligible:
                assert classify_constants(s=roumieu, log_abs=y).negligible

    def test_noisy_fit_inconclusive(self, beurling):
        rng = np.random.default_rng(0)
        y = rng.normal(0, 5, len(DEFAULT_SCHEDULE))
        v = classify_constants(s=beurling, log_abs=y)
        assert v.cls == "Inconclusive" and v.reason

    def test_config_recorded(self, beurling, x):
        v = classify_constants(s=beurling, log_abs=x)
        assert v.evidence["config"]["k_max"] == 64.0
        assert v.to_json()["delta"] == 0.05


class TestModerateFunction:
    def test_cubic(self, beurling):
        rep = check_moderate_function(lambda t: t ** 3, beurling)
        assert rep["moderate"]
        for row in rep["per_index"]:
            if "m_fit" in row:
                assert row["m_fit"] == pytest.approx(3 * float(row["l"]), abs=0.05)
        assert rep["degree"]["degree"] == pytest.approx(3.0, abs=0.05)

    def test_cubic_log_form_probes_every_index(self, beurling):
        rep = check_moderate_function(log_F=lambda u: 3 * u, s=beurling)
        assert rep["moderate"] and not rep["range_limited"]
        assert len(rep["per_index"]) == 11

    def test_exponential_not_moderate(self, beurling, roumieu):
        rep = check_moderate_function(log_F=np.exp, s=beurling)
        assert not rep["moderate"]
        assert rep["degree"]["diverges"]
        assert not check_moderate_function(log_F=np.exp, s=roumieu)["moderate"]

    def test_constant(self, beurling, roumieu):
        for s in (beurling, roumieu):
            assert check_moderate_function(lambda t: 1 + 0 * t, s)["moderate"]

    def test_roumieu_cubic(self, roumieu):
        rep = check_moderate_function(log_F=lambda u: 3 * u, s=roumieu)
        assert rep["moderate"]
