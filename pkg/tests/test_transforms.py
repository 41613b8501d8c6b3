import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import CORPUS_NAMES, corpus_smile_cached, flat_smile, spike_smile
from normvol.black_scholes import ForwardContext
from normvol.errors import EnvelopeError, NoBracket, NotMonotone
from normvol.normal_kernel import phi
from normvol.errors import SmileError
from normvol.smile import Smile, TailPolicy, lee_q_range
from normvol.transforms import (
    alpha_envelope,
    certify,
    f_of,
    f_transforms,
    fixed_point,
    g_inverse,
    normalized_vol,
    normalized_vols,
    transform_grid,
)

Z101 = np.linspace(-5.0, 5.0, 101)


class TestFTransforms:
    def test_examples(self):
        assert f_transforms(0.0, 0.2) == pytest.approx((-0.1, 0.1), abs=1e-16)
        assert f_transforms(0.02, 0.2) == pytest.approx((0.0, 0.2), abs=1e-16)

    @given(st.floats(-5, 5), st.floats(0.01, 3))
    def test_difference_of_squares(self, k, s):
        f1, f2 = f_transforms(k, s)
        assert abs((f2 * f2 - f1 * f1) - 2 * k) <= 1e-12 * max(1.0, f2 * f2)
        assert f2 - f1 == pytest.approx(s, abs=1e-15 * max(1.0, abs(f2)))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            f_transforms(0.0, 0.0)


class TestTransformGrid:
    def test_flat_monotone(self):
        g = transform_grid(flat_smile(lo=-1, hi=1, n=21), 101)
        assert g.monotone_f1 and g.monotone_f2
        assert len(g) == 101

    def test_includes_nodes(self):
        sm = corpus_smile_cached("mix3")
        g = transform_grid(sm, 401)
        assert np.all(np.isin(sm.k, g.k))
        assert np.all(np.diff(g.k) > 0)

    def test_n_below_quote_count(self):
        with pytest.raises(ValueError):
            transform_grid(flat_smile(), 10)

    @pytest.mark.parametrize("name", CORPUS_NAMES)
    def test_corpus_monotone_and_identities(self, name):
        g = transform_grid(corpus_smile_cached(name))
        assert g.monotone_f1 and g.monotone_f2
        assert np.max(np.abs(g.f2**2 - g.f1**2 - 2 * g.k)) <= 1e-12
        lhs = np.exp(g.k) * phi(g.f2)
        rhs = phi(g.f1)
        assert np.max(np.abs(lhs - rhs) / rhs) <= 1e-12
        assert np.all(g.f2 - g.f1 > 0)
        assert np.array_equal(g.f1, g.k / g.sigma - g.sigma / 2)

    @pytest.mark.parametrize("name", CORPUS_NAMES)
    def test_wing_lemmas(self, name):
        g = transform_grid(corpus_smile_cached(name))
        left, right = g.k <= 0, g.k >= 0
        assert np.all(g.f1[left] <= -np.sqrt(2 * np.abs(g.k[left])) + 1e-12)
        assert np.all(g.f2[right] >= np.sqrt(2 * g.k[right]) - 1e-12)

    def test_spike_flags(self):
        g = transform_grid(spike_smile())
        assert not (g.monotone_f1 and g.monotone_f2)

    def test_rows(self):
        g = transform_grid(flat_smile(), 41)
        assert g.rows[0] == pytest.approx((-2.0, 0.2, -10.1, -9.9))


class TestGInverse:
    def test_flat_examples(self, flat):
        assert g_inverse("second", flat, 0.0) == pytest.approx(-0.02, abs=1e-15)
        assert g_inverse("first", flat, 0.0) == pytest.approx(0.02, abs=1e-15)

    @pytest.mark.parametrize("which", ["first", "second"])
    def test_flat_closed_form(self, flat, which):
        z = np.linspace(-20, 20, 81)
        sign = 1.0 if which == "first" else -1.0
        assert np.max(np.abs(g_inverse(which, flat, z) - (0.2 * z + sign * 0.02))) <= 1e-13

    @pytest.mark.parametrize("name", CORPUS_NAMES)
    @pytest.mark.parametrize("which", ["first", "second"])
    def test_roundtrip(self, name, which):
        sm = corpus_smile_cached(name)
        z = np.linspace(-6, 6, 241)
        k = g_inverse(which, sm, z)
        assert np.max(np.abs(f_of(which, sm, k) - z)) <= 1e-10
        assert np.all(np.diff(k) > 0)

    def test_node_images(self):
        sm = corpus_smile_cached("mix2_asym")
        z = f_of("second", sm, sm.k)
        np.testing.assert_allclose(g_inverse("second", sm, z), sm.k, rtol=0, atol=1e-13)
        np.testing.assert_allclose(normalized_vols("second", sm, z), sm.sigma, rtol=0, atol=1e-13)

    def test_scalar_and_array(self, flat):
        assert isinstance(g_inverse("first", flat, 0.3), float)
        assert g_inverse("first", flat, np.array([[0.3]])).shape == (1, 1)

    def test_rejects_nonfinite(self, flat):
        with pytest.raises(ValueError):
            g_inverse("first", flat, math.inf)

    def test_spike_refused(self):
        with pytest.raises(NotMonotone) as exc:
            g_inverse("second", spike_smile(), 0.0)
        assert 0.3 < exc.value.k_lo < exc.value.k_hi < 0.6

    def test_lee_wing_tail(self):
        base = corpus_smile_cached("mix3")
        q = 0.05
        assert all(lee_q_range(float(s), k)[0] < q < lee_q_range(float(s), k)[1] for s, k in ((base.sigma[0], base.k_min), (base.sigma[-1], base.k_max)))
        sm = base.with_tail(TailPolicy("lee_wing", q, q))
        z = np.array([-30.0, -12.0, 12.0, 30.0])
        for which in ("first", "second"):
            k = g_inverse(which, sm, z)
            assert np.max(np.abs(f_of(which, sm, k) - z)) <= 1e-9

    def test_lee_wing_no_bracket(self):
        # q near 2: f1 grows like 0.0035 sqrt(k) and cannot reach z=500 within the search reach
        k = np.linspace(-1, 1, 11)
        s = np.full(11, 1.41)
        lo, hi = lee_q_range(1.41, 1.0)
        assert lo < 1.99 < hi
        sm = Smile(ForwardContext(1.0), k, s, TailPolicy("lee_wing", q_right=1.99))
        with pytest.raises(NoBracket):
            g_inverse("first", sm, 500.0)

    def test_lee_wing_above_limit_refused(self):
        k = np.linspace(-1, 1, 11)
        # limit for sigma_end=1, k_end=1 is 1/(1/4 + 1/2) = 4/3
        sm = Smile(ForwardContext(1.0), k, np.full(11, 1.0), TailPolicy("lee_wing", q_right=1.5))
        with pytest.raises(NotMonotone):
            g_inverse("first", sm, f_of("first", sm, 1.0) + 5.0)

    @pytest.mark.parametrize("s_end,k_end", [(0.3, -2.5), (0.2, 1.0), (1.2, -1.0), (0.05, 0.5)])
    def test_lee_limit_is_sharp(self, s_end, k_end):
        lo, hi = lee_q_range(s_end, k_end)
        k = np.array([k_end - 2.0, k_end - 1.0, k_end]) if k_end > 0 else np.array([k_end, k_end + 1.0, k_end + 2.0])
        side = "q_right" if k_end > 0 else "q_left"
        far = k_end * np.geomspace(1.0, 1e6, 4000)[1:]
        if k_end < 0:
            far = far[::-1]
        for q, ok in ((0.98 * hi, True), (1.02 * hi, False)):
            if not lo < q < 2.0:
                continue
            sm = Smile(ForwardContext(1.0), k, np.full(3, s_end), TailPolicy("lee_wing", **{side: q}))
            incr = all(np.all(np.diff(f_of(w, sm, far)) > 0) for w in ("first", "second"))
            assert incr == ok

    def test_lee_q_below_end_quote_rejected(self):
        with pytest.raises(SmileError):
            Smile(ForwardContext(1.0), [-1.0, 0.0, 1.0], [0.5, 0.3, 0.4], TailPolicy("lee_wing", q_left=0.2))
        with pytest.raises(SmileError):
            Smile(ForwardContext(1.0), [0.1, 0.2, 0.3], [0.5, 0.3, 0.4], TailPolicy("lee_wing", q_left=1.0))


class TestNormalizedVols:
    def test_flat(self, flat):
        for which in ("first", "second"):
            assert np.allclose(normalized_vols(which, flat, Z101), 0.2, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("name", CORPUS_NAMES)
    def test_z_plus_minus_monotone(self, name):
        sm = corpus_smile_cached(name)
        assert np.all(np.diff(Z101 + normalized_vols("first", sm, Z101)) > 0)
        assert np.all(np.diff(Z101 - normalized_vols("second", sm, Z101)) > 0)

    @pytest.mark.parametrize("name", CORPUS_NAMES)
    @pytest.mark.parametrize("which", ["first", "second"])
    def test_g_from_sigma_n(self, name, which):
        sm = corpus_smile_cached(name)
        for z in np.linspace(-4, 4, 17):
            pt = normalized_vol(which, sm, z)
            assert pt.which == which and pt.sigma_n > 0
            assert abs(pt.g - g_inverse(which, sm, z)) <= 1e-9


class TestFixedPoint:
    def test_flat(self, flat):
        assert abs(fixed_point("second", flat).z - 0.2) <= 1e-10
        assert abs(fixed_point("first", flat).z + 0.2) <= 1e-10
        assert fixed_point("second", flat).k == pytest.approx(0.02, abs=1e-15)

    @pytest.mark.parametrize("name", CORPUS_NAMES)
    def test_defining_property(self, name):
        sm = corpus_smile_cached(name)
        z2 = fixed_point("second", sm).z
        z1 = fixed_point("first", sm).z
        assert z2 > 0 and z1 < 0
        assert abs(normalized_vol("second", sm, z2).sigma_n - z2) <= 1e-8
        assert abs(normalized_vol("first", sm, z1).sigma_n + z1) <= 1e-8

    def test_absent_when_f2_never_reaches_zero(self, flat, monkeypatch):
        import normvol.transforms as tr

        def no_root(which, smile, z):
            raise NoBracket(which, z)

        monkeypatch.setattr(tr, "g_inverse", no_root)
        fp = tr.fixed_point("first", flat)
        assert fp.z is None and fp.reason == "mass_at_zero_too_large"


class TestAlphaEnvelope:
    @given(st.floats(-3, 3), st.floats(0.01, 2))
    def test_touches_at_anchor(self, z0, s0):
        if s0 + z0 >= 0:
            assert alpha_envelope("first", z0, z0, s0)[1] == pytest.approx(s0, abs=1e-12)
        if s0 - z0 >= 0:
            assert alpha_envelope("second", z0, z0, s0)[1] == pytest.approx(s0, abs=1e-12)

    @given(st.floats(0, 3), st.floats(0.001, 3), st.floats(0.01, 2))
    def test_flat_above_first_envelope(self, z0, dz, s0):
        z = z0 + dz
        assert s0 > alpha_envelope("first", z, z0, s0)[1]

    def test_negative_radicand(self):
        with pytest.raises(EnvelopeError):
            alpha_envelope("first", 0.0, -2.0, 1.0)
        with pytest.raises(ValueError):
            alpha_envelope("third", 0.0, 0.0, 1.0)

    @pytest.mark.parametrize("name", CORPUS_NAMES)
    def test_first_regions(self, name):
        sm = corpus_smile_cached(name)
        s1 = lambda z: normalized_vols("first", sm, z)  # noqa: E731
        for z0 in (0.0, 0.7, 1.5):
            z = z0 + np.linspace(0.05, 3, 30)
            lo, hi = alpha_envelope("first", z, z0, s1(z0))
            assert np.all(s1(z) > hi) and np.all(hi > s1(z0) + z0 - z)
            zin = np.linspace(0, z0, 12, endpoint=False)
            if zin.size and z0 > 0:
                _, hi_in = alpha_envelope("first", zin, z0, s1(z0))
                assert np.all(s1(zin) < hi_in) and np.all(hi_in < s1(z0) + z0 - zin)
        for z0 in (0.0, -0.6):
            z = z0 - np.linspace(0.05, 3, 30)
            lo, _ = alpha_envelope("first", z, z0, s1(z0))
            assert np.all(s1(z) > lo)

    @pytest.mark.parametrize("name", CORPUS_NAMES)
    def test_second_regions(self, name):
        sm = corpus_smile_cached(name)
        s2 = lambda z: normalized_vols("second", sm, z)  # noqa: E731
        for z0 in (0.0, -0.7, -1.5):
            z = z0 - np.linspace(0.05, 3, 30)
            _, hi = alpha_envelope("second", z, z0, s2(z0))
            assert np.all(s2(z) > hi) and np.all(hi > s2(z0) - z0 + z)
            if z0 < 0:
                zin = np.linspace(0, z0, 12, endpoint=False)
                _, hi_in = alpha_envelope("second", zin, z0, s2(z0))
                assert np.all(s2(zin) < hi_in) and np.all(hi_in < s2(z0) - z0 + zin)
        for z0 in (0.0, 0.6):
            z = z0 + np.linspace(0.05, 3, 30)
            lo, _ = alpha_envelope("second", z, z0, s2(z0))
            assert np.all(s2(z) > lo)

    @pytest.mark.parametrize("name", CORPUS_NAMES)
    def test_lower_envelope_positive_past_fixed_point(self, name):
        sm = corpus_smile_cached(name)
        z2 = fixed_point("second", sm).z
        z0 = z2 + 0.1
        lo, _ = alpha_envelope("second", z0 + np.linspace(0, 3, 20), z0, normalized_vol("second", sm, z0).sigma_n)
        assert np.all(lo > 0)


def test_certify_caches():
    sm = corpus_smile_cached("flat_20")
    first = certify("first", sm)
    assert certify("first", sm) is first
