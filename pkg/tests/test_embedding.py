import mpmath as mp
import numpy as np
import pytest

from conftest import mpmath_profile
from gencalc import netcore as nc
from gencalc.embedding import (DistributionSpec, embed_distribution,
                               embed_smooth, pair_test_function, vp_pairing)
from gencalc.errors import ArgumentError
from gencalc.mollifier import scale_translate, translation_kernel_net

mp.mp.dps = 30

X = nc.coordinate(0)


def test_sigma_is_constant_net():
    one = embed_smooth(nc.ONE)
    for eps in (1.0, 0.2, 0.01):
        assert one.eval(eps, [[0.3]])[0] == 1.0


def test_sigma_multiplicativity_exact():
    f = nc.smooth("sin", X)
    g = nc.smooth("cos", X)
    residual = embed_smooth(f) * embed_smooth(g) - embed_smooth(f * g)
    pts = np.random.default_rng(0).uniform(-2, 2, (50, 1))
    assert np.max(np.abs(residual.eval(0.3, pts))) == 0.0


def test_sigma_commutes_with_derivative():
    f = nc.smooth("sin", X)
    lhs = nc.derive(embed_smooth(f), 0)
    rhs = embed_smooth(nc.derive(f, 0))
    pts = np.random.default_rng(1).uniform(-2, 2, (30, 1))
    np.testing.assert_array_equal(lhs.eval(0.3, pts), rhs.eval(0.3, pts))


def test_sigma_rejects_embeds(kernel2):
    net = embed_distribution(DistributionSpec.delta((0.0,)), kernel2)
    with pytest.raises(ArgumentError):
        embed_smooth(net)


def test_delta_embedding_closed_form(kernel2):
    d = embed_distribution(DistributionSpec.delta((0.0,)), kernel2)
    phi = kernel2.base
    for eps in (0.5, 0.1, 0.02):
        assert d.eval(eps, [[0.0]])[0] == pytest.approx(
            float(phi.values(0.0)) / eps, rel=1e-14)
        # reflected kernel evaluation away from the point
        x = 0.3 * eps
        assert d.eval(eps, [[x]])[0] == pytest.approx(
            float(phi.values(-x / eps)) / eps, rel=1e-13)


def test_heaviside_embedding_values(kernel2):
    H = embed_distribution(DistributionSpec.heaviside(), kernel2)
    eps = 0.1
    assert H.eval(eps, [[0.0]])[0] == pytest.approx(0.5, abs=1e-12)
    assert H.eval(eps, [[-0.5]])[0] == 0.0
    assert H.eval(eps, [[0.5]])[0] == pytest.approx(1.0, abs=1e-12)
    # interior value against an independent mpmath oracle
    prof = mpmath_profile(kernel2.base)
    x0 = 0.037
    oracle = float(mp.quad(lambda y: prof((y - x0) / eps) / eps,
                           [0, x0 - eps, x0, x0 + eps, 1]))
    assert H.eval(eps, [[x0]])[0] == pytest.approx(oracle, abs=1e-12)


def test_regular_unit_mass_reproduction(kernel2):
    one = embed_distribution(DistributionSpec.regular("1"), kernel2)
    for eps in (1.0, 0.3, 0.01):
        for x in (-0.4, 0.0, 0.8):
            assert one.eval(eps, [[x]])[0] == pytest.approx(1.0, abs=1e-11)


def test_regular_embedding_oracle(kernel2):
    s = embed_distribution(DistributionSpec.regular("sin(x)"), kernel2)
    prof = mpmath_profile(kernel2.base)
    eps, x0 = 0.2, 0.4
    oracle = float(mp.quad(lambda y: mp.sin(y) * prof((y - x0) / eps) / eps,
                           [x0 - eps, x0, x0 + eps]))
    assert s.eval(eps, [[x0]])[0] == pytest.approx(oracle, abs=1e-11)


def test_embedding_decay_order_matches_generic_parity(moll_generic):
    """sup |iota(f) - sigma(f)| decays at order q+1 for generic A_q."""
    from gencalc.asymptotics import CompactBox, sup_sweep, fit_order, WIDE_GRID
    box = CompactBox(((-1.0, 1.0),))
    k = translation_kernel_net(moll_generic[2])
    diff = (embed_distribution(DistributionSpec.regular("sin(x)"), k)
            - embed_smooth(nc.smooth("sin", X)))
    fit = fit_order(sup_sweep(diff, box, (0,), WIDE_GRID))
    assert fit.exponent == pytest.approx(3.0, abs=0.15)


def test_linearity_of_embedding(kernel2):
    d = DistributionSpec.delta((0.0,))
    h = DistributionSpec.heaviside()
    combo = DistributionSpec.lincomb((2.0, d), (-3.0, h))
    net = embed_distribution(combo, kernel2)
    ref = (2.0 * embed_distribution(d, kernel2)
           - 3.0 * embed_distribution(h, kernel2))
    pts = np.random.default_rng(2).uniform(-0.5, 0.5, (40, 1))
    for eps in (0.3, 0.05):
        np.testing.assert_allclose(net.eval(eps, pts), ref.eval(eps, pts),
                                   atol=1e-12)


def test_derivative_falls_on_kernel(kernel2):
    """derive(iota(u)) has identical values to iota(u')."""
    H = embed_distribution(DistributionSpec.heaviside(), kernel2)
    delta = embed_distribution(DistributionSpec.delta((0.0,)), kernel2)
    pts = np.random.default_rng(3).uniform(-0.4, 0.4, (50, 1))
    for eps in (0.3, 0.05):
        np.testing.assert_allclose(nc.derive(H, 0).eval(eps, pts),
                                   delta.eval(eps, pts), atol=1e-10)
    reg = embed_distribution(DistributionSpec.regular("x^2"), kernel2)
    dreg = embed_distribution(
        DistributionSpec.regular("x^2").derivative(0), kernel2)
    for eps in (0.3, 0.05):
        np.testing.assert_allclose(nc.derive(reg, 0).eval(eps, pts),
                                   dreg.eval(eps, pts), atol=1e-10)


def test_derivative_of_embedding_fd(kernel2):
    """Spot-check the exact derivative rule against finite differences."""
    vp = embed_distribution(DistributionSpec.vp(), kernel2)
    dvp = nc.derive(vp, 0)
    eps, x0, h = 0.2, 0.31, 1e-6
    fd = (vp.eval(eps, [[x0 + h]])[0] - vp.eval(eps, [[x0 - h]])[0]) / (2 * h)
    assert dvp.eval(eps, [[x0]])[0] == pytest.approx(fd, rel=1e-5)


def test_vp_pairing_even_function(moll_even):
    assert vp_pairing(moll_even[2]) == pytest.approx(0.0, abs=1e-10)


def test_vp_pairing_cancels_singularity(moll_even):
    from gencalc.mollifier import AxisProfile, SmoothProfile1D, TestFunction
    prof = moll_even[0].axes[0].profile
    y_phi = TestFunction(
        (AxisProfile(SmoothProfile1D((0.0,) + prof.coeffs, prof.radius)),))
    assert vp_pairing(y_phi) == pytest.approx(moll_even[0].mass, abs=1e-10)


def test_vp_pairing_excision_oracle(moll_even):
    """vp pairing of a translated bump mollifier against the excision limit."""
    psi = scale_translate(moll_even[0], 1.0, (0.5,))
    prof = mpmath_profile(psi)

    def excised(h):
        pieces = [h, 1.5]
        pos = mp.quad(lambda y: prof(y) / y, pieces)
        # int_{y < -h} psi(y)/y dy = -int_h^inf psi(-t)/t dt
        neg = -mp.quad(lambda t: prof(-t) / t, pieces)
        return float(pos + neg)

    hs = [0.1 / 2 ** k for k in range(5)]
    vals = [excised(h) for h in hs]
    # graded Richardson: the excision error expands in odd powers h, h^3, h^5
    for p in (1, 3, 5):
        vals = [(2 ** p * b - a) / (2 ** p - 1)
                for a, b in zip(vals[:-1], vals[1:])]
    oracle = vals[-1]
    assert vp_pairing(psi) == pytest.approx(oracle, abs=1e-8)


def test_vp_embedding_excision_oracle(kernel2):
    vp = embed_distribution(DistributionSpec.vp(), kernel2)
    prof = mpmath_profile(kernel2.base)
    eps, x0 = 0.1, 0.21

    def kern(y):
        return prof((y - x0) / eps) / eps

    oracle = float(mp.quad(lambda t: (kern(t) - kern(-t)) / t,
                           [0, abs(x0 - eps), x0, x0 + eps, 2]))
    assert vp.eval(eps, [[x0]])[0] == pytest.approx(oracle, abs=1e-7)
    # far-field branch
    x1 = 0.8
    oracle1 = float(mp.quad(lambda y: kern_shift(prof, eps, x1, y) / y,
                            [x1 - eps, x1, x1 + eps]))
    assert vp.eval(eps, [[x1]])[0] == pytest.approx(oracle1, abs=1e-7)


def kern_shift(prof, eps, x0, y):
    return prof((y - x0) / eps) / eps


def test_dimension_mismatch_rejected(kernel2):
    with pytest.raises(ArgumentError):
        embed_distribution(DistributionSpec.delta((0.0, 0.0)), kernel2)


def test_deriv_depth_cap():
    spec = DistributionSpec.delta((0.0,))
    for _ in range(6):
        spec = spec.derivative(0)
    with pytest.raises(ArgumentError):
        spec.derivative(0)


def test_pair_test_function_catalog(moll_even):
    psi = moll_even[2]
    assert pair_test_function(DistributionSpec.delta((0.0,)), psi) \
        == pytest.approx(float(psi.values(0.0)), rel=1e-14)
    assert pair_test_function(DistributionSpec.heaviside(), psi) \
        == pytest.approx(0.5, abs=1e-10)
    target = pair_test_function(DistributionSpec.regular("x^2"), psi)
    prof = mpmath_profile(psi)
    oracle = float(mp.quad(lambda y: y ** 2 * prof(y), [-1, 0, 1]))
    assert target == pytest.approx(oracle, abs=1e-11)
    d1 = DistributionSpec.delta((0.0,)).derivative(0)
    dpsi = psi.axis_derivative(0)
    assert pair_test_function(d1, psi) \
        == pytest.approx(-float(dpsi.values(0.0)), rel=1e-12)


def test_spec_json_roundtrip():
    specs = [DistributionSpec.delta((0.5,)).derivative(0),
             DistributionSpec.heaviside(threshold=0.2),
             DistributionSpec.vp(),
             DistributionSpec.regular("abs(x)"),
             DistributionSpec.lincomb((2.0, DistributionSpec.delta((0.0,)))),
             ]
    for spec in specs:
        back = DistributionSpec.from_json(spec.to_json())
        assert back == spec


def test_abs_payload_gets_breakpoint():
    spec = DistributionSpec.regular("abs(x)")
    assert 0.0 in spec.breakpoints


def test_two_dimensional_regular_embedding(moll_even):
    from gencalc.mollifier import tensor_product
    phi2 = tensor_product(moll_even[2], moll_even[2])
    k2 = translation_kernel_net(phi2)
    one = embed_distribution(DistributionSpec.regular("1", dimension=2), k2)
    assert one.eval(0.3, [[0.1, -0.2]])[0] == pytest.approx(1.0, abs=1e-9)
