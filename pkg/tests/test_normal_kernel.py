import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from normvol.normal_kernel import MAX_DEGREE, Phi, phi, segment_moments, shifted_moments

mpmath.mp.dps = 40


def mp_phi(x):
    return mpmath.exp(-mpmath.mpf(x) ** 2 / 2) / mpmath.sqrt(2 * mpmath.pi)


def mp_moment(j, a, b, c=0.0):
    f = lambda z: (z - c) ** j * mp_phi(z)  # noqa: E731
    return float(mpmath.quad(f, [a, b]))


class TestPhi:
    def test_values(self):
        assert phi(0.0) == 0.3989422804014327
        assert phi(1.0) == 0.24197072451914337

    @given(st.floats(-30, 30))
    def test_symmetric(self, x):
        assert phi(x) == phi(-x)

    @pytest.mark.parametrize("x", [0.3, 1.7, 5.0, 9.3, 20.0, 37.0])
    def test_relative_error_vs_mpmath(self, x):
        exact = float(mp_phi(x))
        assert abs(phi(x) - exact) <= 1e-14 * exact

    def test_infinite(self):
        assert phi(math.inf) == 0.0
        assert phi(-math.inf) == 0.0

    def test_vectorized(self):
        x = np.linspace(-3, 3, 7)
        assert np.allclose(phi(x), [phi(v) for v in x], rtol=0, atol=0)


class TestPhiCdf:
    def test_values(self):
        assert Phi(0.0) == 0.5
        assert Phi(math.inf) == 1.0
        assert Phi(-math.inf) == 0.0
        assert abs(Phi(0.1) - 0.539827837277029) <= 1e-15

    @pytest.mark.parametrize("x", [-12.0, -9.9, -5.0, -1.0, 0.7, 3.0, 8.0])
    def test_absolute_error_vs_mpmath(self, x):
        exact = float(mpmath.ncdf(x))
        assert abs(Phi(x) - exact) <= 1e-15

    def test_lower_tail_relative(self):
        # mass-at-zero estimates live out here
        exact = float(mpmath.ncdf(-9.9))
        assert abs(Phi(-9.9) - exact) <= 1e-13 * exact

    def test_monotone_on_grid(self):
        x = np.linspace(-10, 10, 4001)
        assert np.all(np.diff(Phi(x)) >= 0.0)

    @pytest.mark.parametrize("x", np.linspace(-6, 6, 13))
    def test_density_is_derivative(self, x):
        h = 1e-5
        fd = (Phi(x + h) - Phi(x - h)) / (2 * h)
        assert abs(fd - phi(x)) <= 1e-8


class TestSegmentMoments:
    def test_full_line(self):
        m = segment_moments(2, -math.inf, math.inf).moments
        assert m[0] == 1.0
        assert abs(m[1]) == 0.0
        assert m[2] == 1.0

    def test_half_line(self):
        m = segment_moments(2, 0.0, math.inf).moments
        assert m == (0.5, 0.3989422804014327, 0.5)

    def test_degenerate(self):
        assert segment_moments(4, 1.3, 1.3).moments == (0.0,) * 5
        assert segment_moments(0, 0.0, 0.0).moments == (0.0,)

    def test_degree_cap(self):
        segment_moments(MAX_DEGREE, -1.0, 1.0)
        with pytest.raises(ValueError):
            segment_moments(MAX_DEGREE + 1, -1.0, 1.0)
        with pytest.raises(ValueError):
            segment_moments(-1, -1.0, 1.0)

    def test_reversed_bounds_rejected(self):
        with pytest.raises(ValueError):
            segment_moments(2, 1.0, 0.0)

    def test_recursion_invariant(self):
        a, b = -0.7, 2.3
        m = segment_moments(8, a, b).moments
        assert abs(m[0] - (Phi(b) - Phi(a))) <= 1e-16
        for j in range(2, 9):
            rhs = (j - 1) * m[j - 2] + a ** (j - 1) * phi(a) - b ** (j - 1) * phi(b)
            assert abs(m[j] - rhs) <= 1e-14

    @given(st.floats(0.0, 6.0), st.integers(0, 4))
    def test_even_symmetric_nonnegative(self, a, half):
        m = segment_moments(2 * half, -a, a).moments
        assert all(v >= 0.0 for v in m[::2])

    @given(
        st.floats(-8, 8),
        st.floats(0.0, 6.0),
        st.floats(0.0, 6.0),
    )
    def test_additivity(self, a, w1, w2):
        b, c = a + w1, a + w1 + w2
        whole = np.array(segment_moments(8, a, c).moments)
        parts = np.array(segment_moments(8, a, b).moments) + np.array(segment_moments(8, b, c).moments)
        assert np.max(np.abs(whole - parts)) <= 1e-13

    @given(st.floats(-8, 8), st.floats(0.0, 8.0), st.integers(0, 8))
    def test_vs_quadrature(self, a, width, j):
        b = a + width
        m = segment_moments(j, a, b).moments[j]
        ref, _ = integrate.quad(lambda z: z**j * phi(z), a, b, epsabs=1e-15, epsrel=1e-13, limit=200)
        assert abs(m - ref) <= 1e-12

    @pytest.mark.parametrize("a,b", [(-3.0, -1.0), (5.0, 9.0), (-math.inf, -2.0), (1.5, math.inf), (-0.1, 0.2)])
    def test_vs_mpmath(self, a, b):
        m = segment_moments(8, a, b).moments
        for j in range(9):
            assert abs(m[j] - mp_moment(j, a, b)) <= 1e-12


class TestShifted:
    @pytest.mark.parametrize("a,b,c", [(-1.0, 1.0, 0.0), (5.0, 5.5, 5.25), (-8.0, -7.9, -7.95), (-math.inf, -6.0, -6.5)])
    def test_vs_mpmath(self, a, b, c):
        m = shifted_moments(3, a, b, c)
        for j in range(4):
            assert abs(m[j] - mp_moment(j, a, b, c)) <= 1e-15

    def test_broadcast_shape(self):
        a = np.array([-1.0, 0.0, 1.0])
        out = shifted_moments(3, a, a + 0.5, a + 0.25)
        assert out.shape == (3, 4)
        for i in range(3):
            assert np.allclose(out[i], shifted_moments(3, a[i], a[i] + 0.5, a[i] + 0.25), rtol=0, atol=1e-17)
