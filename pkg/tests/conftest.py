import pytest

from gencalc.asymptotics import CompactBox
from gencalc.mollifier import (build_vanishing_moment_mollifier,
                               strict_delta_net, translation_kernel_net)


@pytest.fixture(scope="session")
def moll_even():
    return {q: build_vanishing_moment_mollifier(q) for q in (0, 1, 2, 4, 6)}


@pytest.fixture(scope="session")
def moll_generic():
    return {q: build_vanishing_moment_mollifier(q, parity="generic")
            for q in (0, 2, 4, 6)}


@pytest.fixture(scope="session")
def kernel2(moll_even):
    return translation_kernel_net(moll_even[2])


@pytest.fixture(scope="session")
def kernel4(moll_even):
    return translation_kernel_net(moll_even[4])


@pytest.fixture(scope="session")
def pulse2(moll_even):
    return strict_delta_net(moll_even[2])


@pytest.fixture(scope="session")
def box1():
    return CompactBox(((-1.0, 1.0),))


def mpmath_profile(tf):
    """High-precision evaluator for a 1D axis profile (independent oracle)."""
    import mpmath as mp

    ax = tf.axes[0]
    coeffs = [mp.mpf(c) for c in ax.profile.coeffs]
    R = mp.mpf(ax.profile.radius)
    m = ax.profile.denom_power
    center = mp.mpf(ax.center)
    scale = mp.mpf(ax.scale)
    power = ax.scale_power
    coef = mp.mpf(ax.coefficient)

    def value(y):
        t = (mp.mpf(y) - center) / scale
        s = t / R
        if abs(s) >= 1:
            return mp.mpf(0)
        g = 1 - s ** 2
        poly = sum(c * t ** j for j, c in enumerate(coeffs))
        val = poly * mp.e ** (-1 / g)
        if m:
            val /= g ** (2 * m)
        return coef * scale ** (-power) * val

    return value
