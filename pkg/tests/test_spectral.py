import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ultrascale import spectral as sp
from ultrascale.weights import make_weight


@pytest.fixture(scope="module")
def w():
    return make_weight("power(0.5)")


@pytest.fixture(scope="module")
def parabola():
    return sp.GridFunction.from_callable(lambda x: 1 - x ** 2, (-1, 1), label="parabola")


@pytest.fixture(scope="module")
def catalog():
    return {
        "gevrey": sp.make_bump("gevrey"),
        "gevrey-p2": sp.make_bump("gevrey", p=2),
        "gevrey-narrow": sp.make_bump("gevrey", center=0.3, radius=0.5),
        "polynomial": sp.make_bump("polynomial", p=3),
        "triangle": sp.make_bump("triangle"),
        "zero": sp.GridFunction.from_callable(lambda x: 0 * x, (-1, 1), label="zero"),
    }


class TestGridFunction:
    def test_rejects_non_power_of_two(self):
        with pytest.raises(sp.GridError):
            sp.GridFunction(np.zeros(1000), 16.0, (-1, 1))

    def test_rejects_samples_outside_support(self):
        vals = np.ones(1024)
        with pytest.raises(sp.GridError, match="outside"):
            sp.GridFunction(vals, 16.0, (-1, 1))

    def test_edge_support_is_window_error(self):
        f = sp.GridFunction.from_callable(lambda x: 1 + 0 * x, (-16, 0), label="edge")
        with pytest.raises(sp.GridError, match="edge"):
            sp.spectrum(f)

    def test_csv_round_trip(self, tmp_path, parabola):
        path = tmp_path / "f.csv"
        parabola.to_csv(str(path))
        g = sp.GridFunction.from_csv(str(path))
        np.testing.assert_array_equal(g.samples, parabola.samples)
        assert g.L == parabola.L


class TestSpectrum:
    def test_parabola_analytic(self, parabola):
        prof = sp.spectrum(parabola)
        xi = prof.xi
        m = np.abs(xi) <= prof.xi_max / 4
        xs = np.where(xi[m] == 0, 1.0, xi[m])
        exact = np.where(xi[m] == 0, 4 / 3, 4 * (np.sin(xs) - xs * np.cos(xs)) / xs ** 3)
        err = np.max(np.abs(prof.magnitudes[m] - np.abs(exact))) / (4 / 3)
        assert err < 1e-6

    def test_parabola_value_at_zero(self, parabola):
        prof = sp.spectrum(parabola)
        assert prof.values[prof.xi == 0][0].real == pytest.approx(4 / 3, rel=1e-6)

    @pytest.mark.parametrize("name", ["gevrey", "polynomial", "triangle", "gevrey-narrow"])
    def test_parseval(self, catalog, name):
        assert sp.spectrum(catalog[name]).parseval_error < 1e-6

    def test_zero_profile(self, catalog):
        assert np.all(sp.spectrum(catalog["zero"]).magnitudes == 0)

    def test_translation_keeps_magnitudes(self, catalog):
        f = catalog["gevrey"]
        g = f.translate(0.5)
        np.testing.assert_allclose(sp.spectrum(g).magnitudes, sp.spectrum(f).magnitudes,
                                   atol=1e-9)

    def test_bump_integral_is_spectrum_at_zero(self, catalog):
        f = catalog["gevrey"]
        prof = sp.spectrum(f)
        assert prof.values[prof.xi == 0][0].real == pytest.approx(f.h * f.samples.real.sum())

    def test_nyquist(self, parabola):
        assert sp.spectrum(parabola).xi_max == pytest.approx(512 * math.pi)


class TestSeminorm:
    def test_plain_l1_lower_bound(self, parabola, w):
        assert sp.seminorm(parabola, sp.SeminormSpec(w, 0.0, "L1")) >= 4 / 3

    @pytest.mark.parametrize("variant", sp.VARIANTS)
    def test_monotone_in_l(self, catalog, w, variant):
        f = catalog["gevrey"]
        vals = [sp.seminorm(f, sp.SeminormSpec(w, l, variant)) for l in (0.0, 0.1, 0.5, 1.0)]
        assert all(a <= b for a, b in zip(vals[:-1], vals[1:]))

    def test_monotone_in_weight(self, catalog):
        f = catalog["gevrey"]
        w1, w3 = make_weight("power(1/3)"), make_weight("2*power(1/3)")
        for var in sp.VARIANTS:
            assert (sp.seminorm(f, sp.SeminormSpec(w1, 0.5, var))
                    <= sp.seminorm(f, sp.SeminormSpec(w3, 0.5, var)))

    def test_zero_function(self, catalog, w):
        for var in sp.VARIANTS:
            assert sp.seminorm(catalog["zero"], sp.SeminormSpec(w, 1.0, var)) == 0.0

    def test_overflow_reports_max_index(self, catalog, w):
        with pytest.raises(sp.SeminormOverflow) as exc:
            sp.seminorm(catalog["gevrey"], sp.SeminormSpec(w, 50.0))
        assert exc.value.max_l == pytest.approx(700 / math.sqrt(512 * math.pi))

    def test_log_seminorm_matches(self, catalog, w):
        f = catalog["gevrey"]
        for var in sp.VARIANTS:
            spec = sp.SeminormSpec(w, 0.7, var)
            assert sp.log_seminorm(f, spec) == pytest.approx(math.log(sp.seminorm(f, spec)))

    def test_log_seminorm_beyond_overflow(self, catalog, w):
        val = sp.log_seminorm(catalog["gevrey"], sp.SeminormSpec(w, 50.0))
        assert math.isfinite(val) and val > 700

    def test_variant_aliases(self, w):
        assert sp.SeminormSpec(w, 1.0, "c").variant == "L2"

    @pytest.mark.parametrize("l", [0.25, 1.0])
    def test_triangle_diverges_under_refinement(self, catalog, w, l):
        rep = sp.seminorm_refinement(catalog["triangle"], sp.SeminormSpec(w, l))
        assert rep["divergent"]

    def test_gevrey_refinement_stable(self, catalog, w):
        rep = sp.seminorm_refinement(catalog["gevrey"], sp.SeminormSpec(w, 0.5))
        assert rep["stable"]

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.0, 1.2), st.floats(0.0, 1.2))
    def test_monotone_in_l_property(self, l1, l2):
        f = sp.make_bump("gevrey", N=2 ** 12)
        w = make_weight("power(0.5)")
        lo, hi = sorted((l1, l2))
        assert (sp.seminorm(f, sp.SeminormSpec(w, lo))
                <= sp.seminorm(f, sp.SeminormSpec(w, hi)) * (1 + 1e-12))


class TestNormEquivalence:
    def test_gevrey_report(self, catalog, w):
        rep = sp.norm_equivalence_report(catalog["gevrey"], w, 0.1)
        assert not rep["partial"]
        assert rep["C1_positive"] and rep["C2_ok"]
        assert all(v < 0.01 for v in rep["refinement_change"].values())

    def test_zero_report_undefined(self, catalog, w):
        rep = sp.norm_equivalence_report(catalog["zero"], w, 0.1)
        assert rep["undefined"]

    def test_partial_on_overflow(self, catalog, w):
        rep = sp.norm_equivalence_report(catalog["gevrey"], w, 20.0)
        assert rep["partial"]


class TestBumps:
    def test_gevrey_decay_exponent(self, catalog):
        fit = catalog["gevrey"].decay
        assert abs(fit.s - 2.0) <= 0.2
        assert fit.c > 0

    def test_gevrey_p2_exponent(self, catalog):
        assert abs(catalog["gevrey-p2"].decay.s - 1.5) <= 0.15

    def test_exact_zero_tails(self, catalog):
        f = catalog["gevrey"]
        assert np.all(f.samples[np.abs(f.x) >= 1] == 0)

    def test_unknown_kind(self):
        with pytest.raises(sp.GridError):
            sp.make_bump("square")


@pytest.fixture(scope="module")
def moll(w):
    return sp.make_mollifier(w)


class TestMollifier:
    def test_mass(self, moll):
        assert abs(moll.checks["mass"] - 1) < 1e-9

    def test_hat_vanishes_beyond_two(self, moll):
        xi = sp.frequency_grid(moll.phi.L, moll.phi.N)
        assert np.all(moll.hat(xi[np.abs(xi) >= 2]) == 0)
        assert np.all(moll.hat(xi[np.abs(xi) <= 1]) == 1)

    def test_first_moment(self, moll):
        assert abs(moll.checks["spatial_moments"][1]["moment"]) < 1e-6

    def test_low_moments_normalised(self, moll):
        for k in range(1, 6):
            assert abs(moll.checks["spatial_moments"][k]["normalised"]) < 1e-6

    def test_spectral_flatness(self, moll):
        assert moll.checks["spectral_flatness"] < 1e-12

    def test_small_window_rejected(self, w):
        with pytest.raises(sp.GridError, match="tail mass"):
            sp.make_mollifier(w, L=64.0, N=2 ** 13)


class TestMembership:
    def test_gevrey_roumieu(self, catalog, w):
        assert sp.test_membership(catalog["gevrey"], w, "roumieu").member is True

    def test_gevrey_not_beurling(self, catalog, w):
        assert sp.test_membership(catalog["gevrey"], w, "beurling").member is False

    def test_gevrey_p2_beurling(self, catalog, w):
        assert sp.test_membership(catalog["gevrey-p2"], w, "beurling").member is True

    @pytest.mark.parametrize("case", ["beurling", "roumieu", "roumieu-projective"])
    @pytest.mark.parametrize("name", ["triangle", "polynomial"])
    def test_polynomial_decay_non_member(self, catalog, w, case, name):
        assert sp.test_membership(catalog[name], w, case).member is False

    @pytest.mark.parametrize("case", ["beurling", "roumieu", "roumieu-projective"])
    def test_zero_member(self, catalog, w, case):
        assert sp.test_membership(catalog["zero"], w, case).member is True

    @pytest.mark.parametrize("name", ["gevrey", "gevrey-p2", "gevrey-narrow", "polynomial",
                                      "triangle", "zero"])
    def test_roumieu_presentations_agree(self, catalog, w, name):
        a = sp.test_membership(catalog[name], w, "roumieu")
        b = sp.test_membership(catalog[name], w, "roumieu-projective")
        assert a.member == b.member
