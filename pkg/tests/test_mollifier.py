import json
import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import trapezoid

from conftest import mpmath_profile
from gencalc.errors import ArgumentError, ConstructionError
from gencalc.mollifier import (TestFunction, build_bump,
                               build_vanishing_moment_mollifier, moment,
                               scale_translate, strict_delta_net,
                               tensor_product, translation_kernel_net)

mp.mp.dps = 30

# adaptive high-order quadrature oracle, independent of the library path
BUMP_INTEGRAL = 0.4439938161680794


def test_bump_closed_form_values():
    b = build_bump(1.0)
    assert b.values(np.array([0.0]))[0] == pytest.approx(math.exp(-1.0), abs=1e-15)
    assert b.values(np.array([1.0]))[0] == 0.0
    assert b.values(np.array([-1.0]))[0] == 0.0
    assert b.values(np.array([1.7]))[0] == 0.0


def test_bump_integral_oracle():
    b = build_bump(1.0)
    prof = mpmath_profile(b)
    oracle = float(mp.quad(prof, [-1, 0, 1]))
    assert oracle == pytest.approx(BUMP_INTEGRAL, abs=1e-12)
    assert b.mass == pytest.approx(oracle, abs=1e-12)


def test_bump_rejects_bad_radius():
    with pytest.raises(ArgumentError):
        build_bump(0.0)
    with pytest.raises(ArgumentError):
        build_bump(-2.0)


@pytest.mark.parametrize("q", [0, 2, 4, 6])
def test_moment_certificates_even(q, moll_even):
    phi = moll_even[q]
    prof = mpmath_profile(phi)
    mass = float(mp.quad(prof, [-1, 0, 1]))
    assert abs(mass - 1.0) < 1e-12
    for k in range(1, q + 1):
        mk = float(mp.quad(lambda t: mp.mpf(t) ** k * prof(t), [-1, 0, 1]))
        assert abs(mk) < 1e-10, f"moment {k} = {mk}"


def test_even_q1_odd_moment_is_symmetrically_zero(moll_even):
    phi = moll_even[1]
    assert moment(phi, (1,)) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("q", [0, 2, 4, 6])
def test_generic_parity_pins_next_moment(q, moll_generic):
    phi = moll_generic[q]
    pinned = phi.certificate["pinned_moment"]
    assert pinned["order"] == q + 1
    prof = mpmath_profile(phi)
    mk = float(mp.quad(lambda t: mp.mpf(t) ** (q + 1) * prof(t), [-1, 0, 1]))
    assert mk == pytest.approx(pinned["target"], rel=1e-9)


def test_moment_operation_examples(moll_even):
    phi = moll_even[2]
    assert moment(phi, (0,)) == pytest.approx(1.0, abs=1e-12)
    assert moment(phi, (1,)) == pytest.approx(0.0, abs=1e-12)   # odd vs even
    assert moment(phi, (2,)) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(ArgumentError):
        moment(phi, (-1,))


def test_construction_reports_conditioning():
    phi = build_vanishing_moment_mollifier(6)
    assert phi.certificate["condition_number"] > 1.0
    assert np.isfinite(phi.certificate["condition_number"])


def test_scale_translate_identity_and_mass(moll_even):
    phi = moll_even[2]
    same = scale_translate(phi, 1.0, (0.0,))
    ts = np.linspace(-1.2, 1.2, 41)
    np.testing.assert_allclose(same.values(ts[:, None]), phi.values(ts[:, None]),
                               atol=1e-15)
    scaled = scale_translate(phi, 0.25, (0.3,))
    assert scaled.mass == pytest.approx(phi.mass, abs=1e-11)
    # sup scales like eps^-n
    xs = np.linspace(0.3 - 0.26, 0.3 + 0.26, 4001)
    assert (np.max(scaled.values(xs[:, None]))
            == pytest.approx(np.max(np.abs(phi.values(ts[:, None]))) / 0.25,
                             rel=1e-3))


def test_scale_translate_group_action(moll_even):
    phi = moll_even[2]
    rng = np.random.default_rng(7)
    for e1, e2 in rng.uniform(0.2, 1.0, (5, 2)):
        a = scale_translate(scale_translate(phi, e1, (0.0,)), e2, (0.0,))
        b = scale_translate(phi, e1 * e2, (0.0,))
        ts = rng.uniform(-1, 1, 64)
        np.testing.assert_allclose(a.values(ts[:, None]), b.values(ts[:, None]),
                                   atol=1e-12 * max(1.0, 1.0 / (e1 * e2)))


def test_scale_translate_rejects_bad_eps(moll_even):
    with pytest.raises(ArgumentError):
        scale_translate(moll_even[0], 0.0, (0.0,))
    with pytest.raises(ArgumentError):
        scale_translate(moll_even[0], 1.5, (0.0,))


def test_strict_delta_net_invariants(moll_even):
    net = strict_delta_net(moll_even[2])
    l1_norms = []
    for eps in (1.0, 0.1, 0.01):
        rho = net.at(eps)
        assert rho.mass == pytest.approx(1.0, abs=1e-11)
        lo, hi = rho.axis_support(0)
        assert lo == pytest.approx(-eps, abs=1e-15)
        assert hi == pytest.approx(eps, abs=1e-15)
        ts = np.linspace(lo, hi, 20001)
        l1_norms.append(trapezoid(np.abs(rho.values(ts[:, None])), ts))
    # uniform L1 bound: the norm is eps-independent
    assert max(l1_norms) - min(l1_norms) < 1e-6
    assert net.at(0.1).values(np.array([[0.15]]))[0] == 0.0


def test_strict_delta_net_requires_unit_mass():
    with pytest.raises(ArgumentError):
        strict_delta_net(build_bump(1.0))


@pytest.mark.parametrize("q", [0, 2, 4])
def test_delta_net_convergence_order(q, moll_even):
    """Pairing error against a smooth function decays at order q+2 for even
    mollifiers (q+1 is the guaranteed rate; parity upgrades it by one)."""
    phi = moll_even[q]
    net = strict_delta_net(phi)

    def smooth(t):
        return math.cos(0.7 * t) + t ** 3

    errs = []
    eps_list = (0.4, 0.2, 0.1, 0.05)
    for eps in eps_list:
        rho = net.at(eps)
        prof = mpmath_profile(rho)
        val = float(mp.quad(lambda t: prof(t) * smooth(t), [-eps, 0, eps]))
        errs.append(abs(val - smooth(0.0)))
    fitted = np.polyfit(np.log(eps_list), np.log(errs), 1)[0]
    assert fitted == pytest.approx(q + 2, abs=0.35)


def test_translation_kernel_localizing(kernel2):
    eps, x0 = 0.05, 0.4
    tf = kernel2.at(eps, (x0,))
    lo, hi = tf.axis_support(0)
    assert lo == pytest.approx(x0 - eps, abs=1e-15)
    assert hi == pytest.approx(x0 + eps, abs=1e-15)
    assert kernel2.support_radius(eps) == pytest.approx(eps)


def test_translation_kernel_requires_unit_mass():
    with pytest.raises(ArgumentError):
        translation_kernel_net(build_bump(1.0))


def test_translation_kernel_warns_on_non_even(moll_generic):
    k = translation_kernel_net(moll_generic[2])
    assert k.warnings
    assert "reflect" in k.warnings[0]


def test_tensor_product(moll_even):
    phi = moll_even[2]
    prod = tensor_product(phi, phi)
    assert prod.dimension == 2
    assert prod.moment_order == 2
    assert moment(prod, (0, 0)) == pytest.approx(1.0, abs=1e-11)
    assert moment(prod, (1, 1)) == pytest.approx(0.0, abs=1e-11)
    v = prod.values(np.array([[0.0, 0.0]]))[0]
    v1 = phi.values(np.array([0.0]))[0]
    assert v == pytest.approx(v1 * v1, rel=1e-14)
    with pytest.raises(ArgumentError):
        tensor_product(prod, phi)


def test_construction_errors_surface_conditioning():
    with pytest.raises((ConstructionError, ArgumentError)):
        build_vanishing_moment_mollifier(-1)


def test_json_roundtrip_preserves_values(moll_even, moll_generic, tmp_path):
    for tf in (moll_even[4], moll_generic[6],
               scale_translate(moll_even[2], 0.3, (0.7,))):
        path = tmp_path / "m.json"
        tf.save(path)
        back = TestFunction.load(path)
        ts = np.linspace(-1.5, 1.5, 301)
        a = tf.values(ts[:, None])
        b = back.values(ts[:, None])
        np.testing.assert_allclose(b, a, rtol=1e-14, atol=1e-300)
        doc = json.loads(path.read_text())
        assert doc["dimension"] == 1
        assert "polynomial_coefficients" in doc
        if tf.certificate is not None:
            assert "moment_residuals" in doc["certificate"]


def test_derivatives_stay_smooth_and_supported(moll_even):
    phi = moll_even[2]
    d3 = phi
    for _ in range(3):
        d3 = d3.axis_derivative(0)
    ts = np.linspace(-1.001, 1.001, 2001)
    vals = d3.values(ts[:, None])
    assert np.all(np.isfinite(vals))
    assert vals[0] == 0.0 and vals[-1] == 0.0
