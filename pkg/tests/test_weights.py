import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ultrascale.weights import (
    RepresentationError,
    Weight,
    WeightError,
    audit_grid,
    audit_pairs,
    check_axioms,
    compare,
    from_json,
    make_weight,
    table,
)

CATALOG = ["power(0.2)", "power(1/3)", "power(0.5)", "power(0.7)"]


class TestMakeWeight:
    def test_power_value(self):
        assert make_weight("power(0.5)")(4.0) == 2.0

    def test_power_one_rejected(self):
        with pytest.raises(WeightError, match="integral"):
            make_weight("power(1.0)")

    def test_power_zero_rejected(self):
        with pytest.raises(WeightError, match="growth"):
            make_weight("power(0)")

    @pytest.mark.parametrize("a", [0.3, 0.7])
    def test_interior_exponents_accepted(self, a):
        w = make_weight(f"power({a})")
        assert w.label == f"power({a:g})"

    def test_scaled_descriptor(self):
        w = make_weight("3*power(1/2)")
        assert w(9.0) == pytest.approx(9.0)

    def test_non_monotone_table_rejected(self):
        with pytest.raises(WeightError, match="non-monotone"):
            table([(1, 1), (2, 0.5)])

    def test_table_interpolates(self):
        w = table([(1, 1), (3, 2)])
        assert w(2.0) == pytest.approx(1.5)
        assert w(0.0) == 0.0

    def test_json_round_trip(self):
        w = make_weight("3*power(0.5)")
        w2 = from_json(json.loads(w.dumps()))
        g = audit_grid(1e6)
        np.testing.assert_array_equal(w(g), w2(g))

    def test_unknown_kind(self):
        with pytest.raises(WeightError):
            make_weight("banana(2)")


class TestAuditGrid:
    def test_grid_spacing(self):
        g = audit_grid(1e6)
        assert g[0] == 1.0
        np.testing.assert_allclose(g[1:] / g[:-1], 2 ** 0.25)

    def test_pairs_deterministic_and_capped(self):
        x1, y1 = audit_pairs(1e9)
        x2, y2 = audit_pairs(1e9)
        np.testing.assert_array_equal(x1, x2)
        assert np.all(x1 + y1 <= 1e9)
        assert (x1[0], y1[0]) == (1.0, 1.0)


class TestCheckAxioms:
    @pytest.mark.parametrize("spec", CATALOG)
    def test_catalog_passes(self, spec):
        r = check_axioms(make_weight(spec))
        assert r.passed, r.witnesses
        assert math.isfinite(r.tail_bound)

    def test_sqrt_integral_value(self):
        r = check_axioms(make_weight("power(0.5)"))
        assert abs(r.integral_bound - 2.0) < 1e-6

    def test_log_squared_subadditivity_witness(self):
        r = check_axioms(make_weight("log2"))
        assert not r.flags["a"]
        wit = r.witnesses["a"]
        assert (wit["x"], wit["y"]) == (1.0, 1.0)
        assert wit["lhs"] == pytest.approx(1.2069, abs=1e-3)
        assert wit["rhs"] == pytest.approx(0.9609, abs=1e-3)

    def test_log_fails_growth(self):
        r = check_axioms(make_weight("log1"))
        assert r.flags["a"] and r.flags["b"]
        assert r.status["c"] == "fail"

    def test_identity_fails_integral(self):
        r = check_axioms(Weight.from_function(lambda t: 1.0 * t, "t"))
        assert not r.flags["b"]
        assert r.witnesses["b"]["kind"] == "divergent"

    def test_negative_values_are_representation_errors(self):
        w = Weight.from_function(lambda t: t ** 0.5 - 1.0, "bad")
        with pytest.raises(RepresentationError):
            check_axioms(w)

    def test_nan_is_representation_error(self):
        w = Weight.from_function(lambda t: np.where(t > 10, np.nan, t ** 0.5), "nan")
        with pytest.raises(RepresentationError):
            check_axioms(w)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.1, 10.0))
    def test_concave_like_functions_are_subadditive(self, a, c):
        # f(0) = 0, f increasing and f(t)/t decreasing imply subadditivity
        w = Weight.from_function(lambda t: c * np.power(t, a) + np.log1p(t), "f", T_cap=1e12)
        assert check_axioms(w).flags["a"]


class TestCompare:
    def test_scaling_constants(self):
        v = compare(make_weight("power(0.5)"), make_weight("3*power(0.5)"), "weak-equiv")
        assert v.relation == "weak-equivalent"
        np.testing.assert_allclose(v.constants, (3.0, 3.0))

    def test_weak_symmetry(self):
        w1 = make_weight("power(0.5)")
        w2 = make_weight("2*power(0.5)")
        k, m = compare(w1, w2).constants
        k2, m2 = compare(w2, w1).constants
        np.testing.assert_allclose((k2, m2), (1 / m, 1 / k))

    def test_strong_less_powers(self):
        v = compare(make_weight("power(1/3)"), make_weight("power(1/2)"), "strong-less")
        assert v.relation == "strongly-less"
        assert 1e6 ** (-1 / 6) == pytest.approx(0.1)

    def test_equal_not_strongly_less(self):
        w = make_weight("power(0.5)")
        assert compare(w, w, "strong-less").relation != "strongly-less"

    @pytest.mark.parametrize("a,b", [(0.2, 1 / 3), (0.3, 0.7), (0.5, 0.7)])
    def test_distinct_powers_never_weak_equivalent(self, a, b):
        wa, wb = make_weight(f"power({a})"), make_weight(f"power({b})")
        assert compare(wa, wb, "strong").relation == "strongly-less"
        assert compare(wa, wb, "weak").relation != "weak-equivalent"

    def test_strong_order_respects_weak_equivalence(self):
        w1, w2 = make_weight("power(1/3)"), make_weight("power(1/2)")
        w3, w4 = make_weight("5*power(1/3)"), make_weight("0.5*power(1/2)")
        assert compare(w1, w3).relation == "weak-equivalent"
        assert compare(w2, w4).relation == "weak-equivalent"
        assert compare(w3, w4, "strong").relation == "strongly-less"

    def test_small_cap_is_inconclusive(self):
        w1 = make_weight("power(0.45)", T_cap=1e6)
        w2 = make_weight("power(0.5)", T_cap=1e6)
        v = compare(w1, w2, "strong")
        assert v.relation == "inconclusive"
        assert "threshold" in v.diagnostic

    def test_oscillating_ratio_inconclusive(self):
        base = make_weight("power(0.5)")
        osc = Weight.from_function(
            lambda t: base(t) * (1.5 + 0.5 * np.sin(4 * np.log(1 + t))), "osc")
        assert compare(osc, base, "strong").relation == "inconclusive"
