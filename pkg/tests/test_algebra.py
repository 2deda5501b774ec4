import math

import numpy as np
import pytest

from ultrascale import algebra as al
from ultrascale.weights import make_weight


@pytest.fixture(scope="module")
def w():
    return make_weight("power(0.5)")


@pytest.fixture(scope="module")
def nets(w):
    return {
        "bump": al.planted_net(w, 0.0),
        "grow": al.planted_net(w, 2.0),
        "half": al.planted_net(w, 0.5),
        "neg2": al.planted_net(w, -2.0),
        "neg3": al.planted_net(w, -3.0),
        "super": al.planted_net(w, power=1.3),
        "super15": al.planted_net(w, power=1.5),
        "zero": al.zero_net(),
        "moll": al.mollifier_net(),
        "slow": al.reparametrize(al.mollifier_net(), math.sqrt),
        "embedded": al.convolved_net(al.catalog_bump()),
    }


class TestNetEvaluation:
    def test_mollifier_spectrum_flat_then_zero(self, nets):
        eps = 2.0 ** -10
        xi, lm = nets["moll"].log_spectrum(eps)
        assert np.all(lm[xi <= 1 / eps] == 0)
        assert np.all(np.isneginf(lm[xi > 2 / eps]))

    def test_planted_amplitude(self, nets, w):
        eps = 2.0 ** -20
        xi, lm = nets["grow"].log_spectrum(eps)
        _, l0 = nets["bump"].log_spectrum(eps)
        assert lm[0] - l0[0] == pytest.approx(2 * w(1 / eps))

    def test_sample_matches_mollifier_mass(self, nets):
        g = nets["moll"].sample(0.25)
        assert g.h * g.samples.real.sum() == pytest.approx(1.0, abs=1e-9)

    def test_sample_rejects_unresolved_eps(self, nets):
        with pytest.raises(al.GridError):
            nets["moll"].sample(2.0 ** -20)

    def test_l2_by_parseval(self, nets):
        g = nets["bump"].sample(0.5)
        direct = math.sqrt(g.h * np.sum(np.abs(g.samples) ** 2))
        assert math.exp(al.log_l2_sequence(nets["bump"], [0.5])[0]) == pytest.approx(direct,
                                                                                   rel=1e-6)

    def test_unknown_case(self, nets, w):
        with pytest.raises(al.NetError):
            al.classify_net(nets["bump"], w, "sideways")


class TestClassifyNet:
    def test_planted_growth_beurling(self, nets, w):
        v = al.classify_net(nets["grow"], w, "beurling")
        assert v.cls == "Moderate"
        for row in v.evidence:
            assert row["fit"]["slope"] == pytest.approx(2.0, abs=0.05)

    def test_planted_growth_not_roumieu(self, nets, w):
        assert al.classify_net(nets["grow"], w, "roumieu-inductive").cls == "Neither"

    @pytest.mark.parametrize("case", al.CASES)
    def test_zero_negligible(self, nets, w, case):
        assert al.classify_net(nets["zero"], w, case).cls == "Negligible"

    @pytest.mark.parametrize("case", al.CASES)
    def test_mollifier_moderate(self, nets, w, case):
        assert al.classify_net(nets["moll"], w, case).cls == "Moderate"

    def test_roumieu_only_negligible(self, nets, w):
        assert al.classify_net(nets["neg3"], w, "beurling").cls == "Moderate"
        assert al.classify_net(nets["neg3"], w, "roumieu").cls == "Negligible"

    def test_super_decay_negligible_everywhere(self, nets, w):
        for case in al.CASES:
            assert al.classify_net(nets["super"], w, case).cls == "Negligible"

    def test_evidence_covers_grid(self, nets, w):
        v = al.classify_net(nets["bump"], w, "beurling")
        assert [r["h"] for r in v.evidence] == list(al.INDEX_GRID)
        fam = al.roumieu_family(w)
        vp = al.classify_net(nets["bump"], w, "roumieu-projective")
        assert len(vp.evidence) == len(fam) ** 2

    @pytest.mark.parametrize("name", ["bump", "neg3", "super", "moll", "embedded"])
    def test_variant_independent(self, nets, w, name):
        for case in al.CASES:
            got = {al.classify_net(nets[name], w, case, variant=v).cls for v in ("L1", "Linf", "L2")}
            assert len(got) == 1

    def test_config_echo(self, nets, w):
        v = al.classify_net(nets["bump"], w)
        assert v.to_json()["details"]["config"]["k_max"] == 64.0


class TestCrosscheck:
    @pytest.mark.parametrize("name", ["neg2", "bump", "half", "zero", "moll", "slow", "super",
                                      "embedded"])
    def test_presentations_agree(self, nets, w, name):
        assert al.crosscheck_roumieu(nets[name], w)["status"] == "agree"

    def test_slowed_mollifier_moderate(self, nets, w):
        rep = al.crosscheck_roumieu(nets["slow"], w)
        assert rep["inductive"] == rep["projective"] == "Regular"


class TestL2Criterion:
    def test_super_decay(self, nets, w):
        rep = al.negligible_via_l2(nets["super"], w, "beurling")
        assert rep["negligible"]
        assert float(rep["evidence"][0]["fit"]["asymptotic_slope"]) == -math.inf

    def test_constant_bump(self, nets, w):
        assert not al.negligible_via_l2(nets["bump"], w, "beurling")["negligible"]

    def test_planted_minus_three(self, nets, w):
        assert al.negligible_via_l2(nets["neg3"], w, "roumieu")["negligible"]
        assert not al.negligible_via_l2(nets["neg3"], w, "beurling")["negligible"]

    def test_requires_moderate(self, nets, w):
        with pytest.raises(al.NetError):
            al.negligible_via_l2(nets["grow"], w, "roumieu")

    @pytest.mark.parametrize("name", ["bump", "neg2", "neg3", "super", "moll", "embedded", "slow"])
    def test_agrees_with_classification(self, nets, w, name):
        for case in al.CASES:
            v = al.classify_net(nets[name], w, case)
            if v.moderate:
                assert al.negligible_via_l2(nets[name], w, case)["negligible"] == v.negligible


class TestSharpBall:
    def test_zero_in_every_ball(self, nets, w):
        for l in (1.0, 8.0, 64.0):
            assert al.sharp_ball_membership(nets["zero"], w, l=l)["member"]
        assert al.sharp_ball_membership(nets["zero"], w, "roumieu")["member"]

    def test_planted_ball(self, nets, w):
        assert al.sharp_ball_membership(nets["neg3"], w, l=2)["member"]
        assert not al.sharp_ball_membership(nets["neg3"], w, l=4)["member"]

    @pytest.mark.parametrize("name", ["bump", "neg2", "neg3", "super", "moll"])
    def test_nested(self, nets, w, name):
        if al.sharp_ball_membership(nets[name], w, l=4)["member"]:
            assert al.sharp_ball_membership(nets[name], w, l=2)["member"]

    def test_support_outside_omega(self, w):
        far = al.combine_nets(al.planted_net(w, -3.0), op="translate", shift=2.5)
        rep = al.sharp_ball_membership(far, w, n=1, l=1)
        assert not rep["member"] and "Omega" in rep["flag"]


class TestRegular:
    def test_embedded_bump_regular_in_its_class(self, nets, w):
        # a p=1 bump lies in the Roumieu class only
        for case in ("roumieu-inductive", "roumieu-projective"):
            assert al.classify_regular(nets["embedded"], w, case).cls == "Regular"
        v = al.classify_regular(nets["embedded"], w, "beurling")
        assert v.moderate and not v.regular

    def test_mollifier_not_regular(self, nets, w):
        v = al.classify_regular(nets["moll"], w, "beurling")
        assert v.cls == "Moderate" and not v.regular
        slopes = [r["fit"]["slope"] for r in v.evidence]
        assert all(a < b for a, b in zip(slopes[:-1], slopes[1:]))
        for case in ("roumieu-inductive", "roumieu-projective"):
            assert not al.classify_regular(nets["moll"], w, case).regular

    def test_slowed_mollifier_roumieu_regular(self, nets, w):
        v = al.classify_regular(nets["slow"], w, "roumieu-inductive")
        assert v.cls == "Regular"
        assert v.details["crosscheck"]["agree"]

    def test_regular_implies_moderate(self, nets, w):
        for net in nets.values():
            for case in al.CASES:
                v = al.classify_regular(net, w, case)
                if v.regular:
                    assert v.moderate


class TestClosure:
    def test_moderate_times_moderate(self, nets, w):
        p = al.combine_nets(nets["moll"], nets["bump"])
        for case in al.CASES:
            assert al.classify_net(p, w, case).moderate

    def test_moderate_times_negligible(self, nets, w):
        p = al.combine_nets(nets["moll"], nets["super15"])
        for case in al.CASES:
            assert al.classify_net(p, w, case).cls == "Negligible"

    def test_spatial_product_of_bumps(self, nets, w):
        p = al.combine_nets(nets["bump"], nets["neg3"])
        assert isinstance(p.terms[0].factors[0], al.GridFactor)
        assert al.classify_net(p, w, "roumieu").cls == "Negligible"

    @pytest.mark.parametrize("name", ["moll", "super", "neg3", "zero", "embedded"])
    def test_derivative_preserves_class(self, nets, w, name):
        d = al.combine_nets(nets[name], op="derivative")
        for case in al.CASES:
            a, b = al.classify_net(nets[name], w, case), al.classify_net(d, w, case)
            assert (a.moderate, a.negligible) == (b.moderate, b.negligible)

    def test_scalar_negligible_constant(self, nets, w):
        s = al.combine_nets(nets["bump"], op="scalar", log_r=lambda e: -w(1 / e) ** 1.3)
        assert al.classify_net(s, w, "beurling").cls == "Negligible"

    def test_translate_keeps_magnitudes(self, nets):
        t = al.combine_nets(nets["bump"], op="translate", shift=0.5)
        np.testing.assert_allclose(t.log_spectrum(0.1)[1], nets["bump"].log_spectrum(0.1)[1])
        assert t.support == (-0.5, 1.5)

    def test_schedule_mismatch_rejected(self, nets):
        other = al.Net([], "x", al.EpsSchedule(4, 20))
        with pytest.raises(al.NetError):
            al.combine_nets(nets["bump"], other)


class TestNetCatalog:
    def test_parse(self):
        assert al.parse_net_spec("planted(c=2, power=1.5)") == ("planted", {"c": 2.0,
                                                                           "power": 1.5})
        assert al.parse_net_spec("zero") == ("zero", {})

    @pytest.mark.parametrize("spec", ["planted(c)", "planted(c=x)", "9net", "planted(q=1)",
                                      "zero(a=1)", "comb"])
    def test_rejects(self, w, spec):
        with pytest.raises(al.NetError):
            al.make_net(spec, w)

    @pytest.mark.parametrize("name", sorted(al.NET_CATALOG))
    def test_catalog_names_match_fixtures(self, nets, w, name):
        a, b = al.make_net(name, w), nets[name] if name in nets else None
        if b is not None:
            np.testing.assert_array_equal(a.log_spectrum(2.0 ** -10)[1],
                                          b.log_spectrum(2.0 ** -10)[1])

    def test_sampled_net_matches_analytic(self, w, tmp_path):
        net = al.make_net("neg2", w, al.EpsSchedule(4, 14))
        for k, e in zip(net.schedule.ks, net.schedule.eps):
            net.sample(e).to_csv(str(tmp_path / f"k{k}.csv"))
        s = al.load_sampled_net(str(tmp_path))
        assert s.schedule == al.EpsSchedule(4, 14)
        cfg = al.Config(window=11)
        for case in al.CASES:
            assert al.classify_net(s, w, case, cfg=cfg).cls == \
                al.classify_net(net, w, case, cfg=cfg).cls

    def test_sampled_net_needs_even_steps(self, w, tmp_path):
        f = al.make_net("bump", w).sample(0.5)
        for k in (4, 5, 7):
            f.to_csv(str(tmp_path / f"k{k}.csv"))
        with pytest.raises(al.NetError, match="evenly"):
            al.load_sampled_net(str(tmp_path))
