import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ultrascale import algebra as al
from ultrascale import association as asn
from ultrascale.scales import fit_exponent
from ultrascale.spectral import gevrey_profile, make_bump
from ultrascale.weights import make_weight


@pytest.fixture(scope="module")
def w():
    return make_weight("power(0.5)")


@pytest.fixture(scope="module")
def w1():
    return make_weight("power(0.25)")


@pytest.fixture(scope="module")
def delta():
    return asn.make_distribution("delta")


@pytest.fixture(scope="module")
def heaviside():
    return asn.make_distribution("heaviside")


@pytest.fixture(scope="module")
def density():
    return asn.make_distribution("density")


@pytest.fixture(scope="module")
def embedded_delta(w, delta):
    return asn.embed(delta, w)


@pytest.fixture(scope="module")
def slowed(w, w1, embedded_delta):
    return asn.slowdown(embedded_delta, w, w1)


@pytest.fixture(scope="module")
def rho():
    return make_bump("gevrey", center=0.1, radius=0.7, p=1.0)


class TestDistributions:
    def test_delta_pairing_is_point_value(self, delta, rho):
        got = delta.delta_value(rho)
        assert got["value"] == pytest.approx(float(np.interp(0.0, rho.x, rho.samples.real)),
                                             abs=1e-6)
        assert got["interpolation_error"] < 1e-8

    def test_derivative_pairing_sign(self, rho):
        d1 = asn.make_distribution("delta-derivative(1)")
        fd = np.gradient(rho.samples.real, rho.x)
        assert d1.pair(rho) == pytest.approx(-float(np.interp(0.0, rho.x, fd)), rel=1e-4)

    def test_heaviside_pairing_half_line(self, heaviside, rho):
        want, _ = quad(lambda x: gevrey_profile(np.array([(x - 0.1) / 0.7]))[0], 0.0, 0.8)
        assert heaviside.pair(rho) == pytest.approx(want, rel=1e-5)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_pairing_linear(self, a, b):
        f = make_bump("gevrey", center=0.0, radius=0.8)
        g = make_bump("gevrey", center=0.2, radius=0.5)
        mix = type(f)(a * f.samples + b * g.samples, f.L, f.support, "mix")
        for T in (asn.make_distribution("delta"), asn.make_distribution("heaviside"),
                  asn.make_distribution("delta-derivative(2)")):
            want = a * T.pair(f) + b * T.pair(g)
            # derivative pairings differentiate a floored spectrum: linear up to the floor
            assert T.pair(mix) == pytest.approx(want, abs=1e-6 * (1 + abs(want)))

    def test_derivative_order_bounded(self):
        with pytest.raises(asn.AssociationError):
            asn.DistributionSpec("delta-derivative", m=5)

    def test_unknown_distribution(self):
        with pytest.raises(asn.AssociationError):
            asn.make_distribution("comb")


class TestEmbed:
    def test_delta_net_has_unit_mass(self, embedded_delta):
        for e in (0.5, 2.0 ** -10, 2.0 ** -30):
            assert embedded_delta.hat(np.zeros(1), e)[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("name", ["delta", "delta-derivative(2)", "heaviside", "density"])
    def test_moderate_in_every_case(self, w, name):
        net = asn.embed(asn.make_distribution(name), w)
        assert all(net.meta["moderate"].values())

    def test_density_converges_in_l2(self, w, density):
        rep = asn.density_l2_error(asn.embed(density, w, check=False))
        fit = fit_exponent(log_values=rep["log_l2"], w=w, schedule=rep["schedule"])
        assert fit.slope < 0

    def test_heaviside_value_independent_of_eps(self, w):
        # (H * phi_eps)(x) depends on x/eps only; its size at x = -4 eps is
        # the mollifier's left tail mass
        a = asn.heaviside_embedding_value(-4.0, w)
        assert 0 < a["value"] <= a["tail_mass"]
        assert asn.heaviside_embedding_value(-40.0, w)["value"] < a["value"]


class TestSlowdown:
    def test_power_map_closed_form(self, w, w1):
        eta = asn.slowing_map(w, w1)
        for e in (0.25, 2.0 ** -12):
            assert eta(e) == pytest.approx(math.sqrt(e))

    def test_identity(self, w):
        assert asn.slowing_map(w, w)(0.01) == 0.01

    def test_root_finding_matches_closed_form(self, w):
        w1 = al.roumieu_family(w)[0]
        assert w1.kind != "power"
        eta = asn.slowing_map(w, w1)
        for e in (2.0 ** -8, 2.0 ** -20):
            assert float(w(1 / eta(e))) == pytest.approx(float(w1(1 / e)), rel=1e-9)
            assert eta(e) >= e

    def test_requires_strongly_less(self, w, embedded_delta):
        with pytest.raises(asn.AssociationError):
            asn.slowdown(embedded_delta, w, make_weight("power(0.7)"))

    def test_preserves_moderateness(self, slowed):
        assert all(slowed.meta["moderate"].values())


class TestAssociate:
    @pytest.mark.parametrize("case", al.CASES)
    def test_embedded_delta_strict(self, w, delta, embedded_delta, case):
        r = asn.associate(embedded_delta, delta, w, case)
        assert r.verdict == "strict" and r.ordering_ok
        assert all(float(row["s_w"]) <= -0.2 for row in r.per_test)

    def test_delta_not_associated_to_heaviside(self, w, heaviside, embedded_delta):
        r = asn.associate(embedded_delta, heaviside, w, "roumieu-inductive")
        assert r.verdict == "none" and not r.simple

    @pytest.mark.parametrize("case", ["roumieu-inductive", "roumieu-projective"])
    def test_slowed_strong_not_strict(self, w, delta, slowed, case):
        r = asn.associate(slowed, delta, w, case)
        assert r.verdict == "strong" and r.strong and not r.strict
        fam = {v.label for v in al.roumieu_family(w)}
        assert r.witness in fam
        assert all(float(row["s_w"]) >= -al.DELTA for row in r.per_test)

    def test_change_of_variables(self, w, w1, delta, embedded_delta, slowed):
        # slowed traces against w1 reproduce the original traces against w
        tests = asn.default_test_set(w, "roumieu-inductive")
        for rho in tests:
            a = asn._fit_trace(asn.pairing_trace(embedded_delta, delta, rho), w, al.DELTA)
            b = asn._fit_trace(asn.pairing_trace(slowed, delta, rho), w1, al.DELTA)
            assert b.slope == pytest.approx(a.slope, rel=0.1)

    def test_empty_test_set_rejected(self, w, delta, embedded_delta):
        with pytest.raises(asn.AssociationError):
            asn.associate(embedded_delta, delta, w, tests=[])

    def test_report_json(self, w, delta, embedded_delta):
        j = asn.associate(embedded_delta, delta, w, "beurling").to_json()
        assert j["ordering_ok"] and j["traces"] and j["witness"] is not None


class TestComparisonExperiments:
    def test_beurling_decay(self):
        r = asn.comparison_experiment("beurling-7.1")
        assert r.passed
        rows = r.conclusion["decay"]
        assert [row["lambda"] for row in rows] == [0.25, 0.5]
        for row in rows:
            assert row["bounded"]
            for c in row["crossover"]:
                assert c["second_exponent"] == pytest.approx(0.0, abs=1e-9)

    def test_beurling_needs_regular_net(self):
        r = asn.comparison_experiment("7.1", {"T": "delta"})
        assert r.status == asn.NOT_MET and r.conclusion is None

    def test_counterexample_stands(self):
        r = asn.comparison_experiment("roumieu-counterexample-7.2")
        assert r.passed
        assert r.conclusion["verdicts"] == {"regular": True, "strong": True, "strict": False}
        assert not any(t["bounded"] for t in r.conclusion["decay_tests"])

    def test_roumieu_strict(self):
        r = asn.comparison_experiment("roumieu-strict-7.3")
        assert r.passed
        l = r.hypotheses["regular"]["l"]
        for row in r.conclusion["decay"]:
            assert row["lambda"] == min(row["h"], l / 2) and row["bounded"]

    def test_negative_control(self):
        r = asn.comparison_experiment("7.3", {"net": "slowed"})
        assert r.status == asn.NOT_MET
        assert not r.hypotheses["strict"]["holds"] and r.conclusion is None

    def test_r_strong(self):
        r = asn.comparison_experiment("r-strong-7.5")
        assert r.passed and r.flags
        for row in r.conclusion["decay"]:
            assert row["bounded"] and row["leftover_below_w"]

    def test_r_strong_needs_dominating_omega_b(self):
        r = asn.comparison_experiment("7.5", {"omega_inf": "power(0.3)",
                                              "omega_b": "power(0.25)"})
        assert r.status == asn.NOT_MET

    def test_unknown(self):
        with pytest.raises(asn.AssociationError):
            asn.comparison_experiment("7.9")

    def test_decay_bound_oracles(self, w, delta, density):
        assert not asn.decay_bound(delta, lambda x: 0.01 * w(x))["bounded"]
        assert asn.decay_bound(delta, lambda x: 0 * x)["bounded"]
        assert asn.decay_bound(density, lambda x: 0.5 * w(x))["bounded"]
        assert not asn.decay_bound(density, lambda x: 2.0 * w(x))["bounded"]

    def test_weight_inverse(self, w):
        assert asn.weight_inverse(w, 3.0) == pytest.approx(9.0)
        lg = make_weight("log2")
        assert float(lg(asn.weight_inverse(lg, 7.0))) == pytest.approx(7.0)


class TestEqualityCriteria:
    def test_planted_resolves_to_constant(self, w):
        r = asn.equality_criteria("translation-8.1", w=w, case="roumieu-inductive")
        assert r.passed and r.conclusion["verdict"] == "constant"
        assert r.conclusion["constant_head"][0] == pytest.approx(float(w(16.0)))

    def test_beurling_needs_super_scale_perturbation(self, w):
        r = asn.equality_criteria("8.1", w=w, case="beurling")
        assert r.status == asn.NOT_MET
        r = asn.equality_criteria("8.1", w=w, case="beurling",
                                  params={"coef": 1.0, "power": 1.5})
        assert r.passed and r.conclusion["verdict"] == "constant"

    def test_sine_not_invariant(self, w):
        r = asn.equality_criteria("8.1", w=w, params={"planted": "sin"})
        assert r.status == asn.NOT_MET
        assert math.pi / 2 in r.hypotheses["translation_invariant"]["failing_shifts"]

    def test_translation_difference_exact(self, w):
        net = asn.planted_spatial_net(w)
        d = net.translate(0.0).minus(net)
        assert d.log_l2_ball(0.1, 1.0) == -math.inf

    @pytest.mark.parametrize("case", al.CASES)
    def test_two_mollifier_cautionary(self, w, case):
        r = asn.equality_criteria("pairing-8.2-8.3", w=w, case=case)
        c = r.conclusion
        assert c["catalog_pairings"]["negligible"]
        assert not c["self_pairing"]["negligible"]
        assert c["verdict"] == "nonzero" and c["cautionary"]
        assert r.status == asn.NOT_MET

    @pytest.mark.parametrize("mode", ["8.2", "8.4"])
    def test_negligible_net_is_zero(self, w, mode):
        net = al.planted_net(w, power=1.5)
        for case in al.CASES:
            r = asn.equality_criteria(mode, net, w, case)
            assert r.passed and r.conclusion["verdict"] == "zero"

    def test_regular_mode_rejects_irregular(self, w):
        r = asn.equality_criteria("regular-pairing-8.4-8.5", w=w, case="beurling")
        assert not r.hypotheses["regular"]["holds"]
        assert r.conclusion["verdict"] == "nonzero"

    def test_lower_test_set_certified(self, w):
        for case in ("beurling", "roumieu-inductive"):
            tests = asn.lower_test_set(w, case)
            assert tests and all(t.certified["member"] for t in tests)

    def test_unknown_mode(self, w):
        with pytest.raises(asn.AssociationError):
            asn.equality_criteria("8.9", w=w)
