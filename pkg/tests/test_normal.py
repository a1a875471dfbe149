import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from lossgap.normal import erfc, normal_cdf

mpmath.mp.dps = 40


def _phi_ref(x: float) -> float:
    return float(mpmath.ncdf(x))


class TestAgainstMpmath:
    def test_dense_grid_absolute(self):
        xs = np.linspace(-30.0, 30.0, 6001)
        err = max(abs(normal_cdf(float(x)) - _phi_ref(float(x))) for x in xs)
        assert err <= 1e-15

    @pytest.mark.parametrize("x", [0.0, 0.3, 0.46875, 0.5, 1.0, 2.5, 4.0, 4.5, 10.0, 26.0])
    def test_erfc_relative(self, x):
        for v in (x, -x):
            ref = float(mpmath.erfc(v))
            assert erfc(v) == pytest.approx(ref, rel=2e-15, abs=0.0)

    def test_lower_tail_relative(self):
        # the left tail is computed directly, not as 1 - something
        for x in (-5.0, -10.0, -20.0, -37.0):
            assert normal_cdf(x) == pytest.approx(_phi_ref(x), rel=1e-14)

    def test_known_value(self):
        assert normal_cdf(1.0) == pytest.approx(0.8413447460685429, abs=1e-16)
        assert normal_cdf(0.0) == 0.5


class TestProperties:
    @given(st.floats(-40, 40))
    def test_symmetry(self, x):
        assert normal_cdf(x) + normal_cdf(-x) == pytest.approx(1.0, abs=2e-16)

    @given(st.floats(-40, 40), st.floats(0, 5))
    def test_monotone(self, x, h):
        assert normal_cdf(x + h) >= normal_cdf(x)

    def test_saturates(self):
        assert normal_cdf(50.0) == 1.0
        assert normal_cdf(-50.0) == 0.0

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError):
            normal_cdf(bad)
