import math

import numpy as np
import pytest

from gencalc import netcore as nc
from gencalc.asymptotics import (DEFAULT_GRID, WIDE_GRID, CompactBox, EpsGrid,
                                 classify_moderate, classify_negligible,
                                 equal_in_algebra, fit_order, sup_sweep,
                                 verify_test_object)
from gencalc.embedding import DistributionSpec, embed_distribution, embed_smooth
from gencalc.errors import ArgumentError, InsufficientDataError
from gencalc.mollifier import SmoothingKernelNet, translation_kernel_net

X = nc.coordinate(0)


def test_eps_grid_defaults():
    grid = EpsGrid()
    vals = grid.values
    assert len(vals) == 14
    assert vals[0] == 0.25
    assert vals[-1] == pytest.approx(3.0517578125e-05)
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ArgumentError):
        EpsGrid(eps0=2.0)
    with pytest.raises(ArgumentError):
        EpsGrid(ratio=1.0)


def test_box_validation():
    with pytest.raises(ArgumentError):
        CompactBox(((1.0, 1.0),))
    box = CompactBox(((-1.0, 1.0), (0.0, 2.0)), resolution=(8, 4))
    assert box.grid_points().shape == (32, 2)


def test_sup_sweep_constant_net(box1):
    samples = sup_sweep(embed_smooth(nc.smooth("sin", X)), box1)
    sups = [s.sup for s in samples]
    assert all(s == pytest.approx(math.sin(1.0), abs=1e-12) for s in sups)


def test_sup_sweep_delta_closed_form(kernel2, box1):
    d = embed_distribution(DistributionSpec.delta((0.0,)), kernel2)
    phi0 = float(kernel2.base.values(0.0))
    for s in sup_sweep(d, box1):
        assert s.sup == pytest.approx(phi0 / s.eps, rel=1e-4)


def test_sup_sweep_zero_net(box1):
    samples = sup_sweep(nc.ZERO, box1)
    assert all(s.sup == 0.0 for s in samples)


@pytest.mark.parametrize("a", [-3, -1, 0, 2, 5, 8])
def test_fit_order_exact_on_power_laws(a):
    samples = [(e, 2.7 * e ** a) for e in DEFAULT_GRID.values]
    fit = fit_order(samples)
    assert fit.exponent == pytest.approx(a, abs=1e-9)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_order_zero_sentinel_and_errors():
    samples = [(e, 0.0) for e in DEFAULT_GRID.values]
    assert math.isinf(fit_order(samples).exponent)
    with pytest.raises(InsufficientDataError):
        fit_order([(0.5, 1.0), (0.25, 0.5)])


def test_classify_moderate_bounded(box1):
    rep = classify_moderate(embed_smooth(nc.smooth("sin", X)), box1,
                            alpha_max=3)
    assert rep.verdict.kind == "moderate"
    assert rep.verdict.value == 0


def test_classify_moderate_delta(kernel2, box1):
    d = embed_distribution(DistributionSpec.delta((0.0,)), kernel2)
    rep = classify_moderate(d, box1, alpha_max=2)
    assert rep.verdict.kind == "moderate"
    assert rep.verdict.value == 3
    assert rep.fits[(0,)].exponent == pytest.approx(-1, abs=0.05)
    assert rep.fits[(1,)].exponent == pytest.approx(-2, abs=0.05)
    assert rep.fits[(2,)].exponent == pytest.approx(-3, abs=0.05)


def test_classify_not_moderate(box1):
    blow = nc.smooth("exp", nc.make_quotient(nc.ONE, nc.EPS)) * embed_smooth(nc.ONE)
    rep = classify_moderate(blow, box1, alpha_max=0)
    assert rep.verdict.kind == "not_moderate"


def test_classify_negligible_zero_and_powers(box1):
    rep = classify_negligible(nc.ZERO, box1, alpha_max=1, m_max=8)
    assert rep.verdict.kind == "negligible"

    net5 = nc.EPS ** 5 * nc.smooth("sin", X)
    rep5 = classify_negligible(net5, box1, alpha_max=1, m_max=5)
    assert rep5.verdict.kind == "negligible"
    assert rep5.fits[(0,)].exponent == pytest.approx(5.0, abs=0.05)


def test_classify_negligible_embedding_difference(moll_generic, box1):
    k6 = translation_kernel_net(moll_generic[6])
    diff = (embed_distribution(DistributionSpec.regular("sin(x)"), k6)
            - embed_smooth(nc.smooth("sin", X)))
    rep = classify_negligible(diff, box1, alpha_max=0, m_max=5,
                              grid=WIDE_GRID)
    assert rep.verdict.kind == "negligible"
    assert rep.fits[(0,)].exponent == pytest.approx(7.0, abs=0.3)
    assert rep.warnings == []


def test_negligible_warns_on_low_kernel_order(kernel2, box1):
    net = embed_distribution(DistributionSpec.regular("sin(x)"), kernel2)
    rep = classify_negligible(net, box1, alpha_max=0, m_max=8)
    assert rep.warnings


def test_not_negligible_delta(kernel2, box1):
    d = embed_distribution(DistributionSpec.delta((0.0,)), kernel2)
    rep = classify_negligible(d, box1, alpha_max=0, m_max=8)
    assert rep.verdict.kind == "not_negligible"
    assert rep.fits[(0,)].exponent == pytest.approx(-1, abs=0.05)


def test_equal_in_algebra_representative_identity(box1):
    f = nc.smooth("sin", X)
    g = nc.smooth("cos", X)
    rep = equal_in_algebra(embed_smooth(f) * embed_smooth(g),
                           embed_smooth(f * g), box1, alpha_max=2)
    assert rep.verdict.kind == "negligible"
    assert all(s.sup == 0.0 for s in rep.sweeps[(0,)])


def test_heaviside_square_not_negligible(kernel2, box1):
    H = embed_distribution(DistributionSpec.heaviside(), kernel2)
    rep = equal_in_algebra(H * H, H, box1, alpha_max=0)
    assert rep.verdict.kind == "not_negligible"
    # sup of |H_eps^2 - H_eps| converges to 1/4
    assert rep.sweeps[(0,)][-1].sup == pytest.approx(0.25, abs=1e-3)


def test_negligible_implies_moderate_zero(box1):
    """Monotone consistency: Negligible(m) implies Moderate(0)."""
    nets = [nc.EPS ** 5 * nc.smooth("sin", X), nc.ZERO,
            nc.EPS ** 2 * embed_smooth(X ** 2)]
    for net in nets:
        neg = classify_negligible(net, box1, alpha_max=1, m_max=4)
        if neg.verdict.kind != "negligible":
            continue
        mod = classify_moderate(net, box1, alpha_max=1)
        assert mod.verdict.kind == "moderate"
        assert mod.verdict.value == 0


def test_verdict_composition_corpus(kernel2, box1):
    """moderate + moderate and moderate * negligible compose as expected."""
    d = embed_distribution(DistributionSpec.delta((0.0,)), kernel2)
    H = embed_distribution(DistributionSpec.heaviside(), kernel2)
    moderates = [embed_smooth(nc.smooth("sin", X)), H, d,
                 embed_smooth(X ** 2), nc.EPS * d]
    negligibles = [nc.EPS ** 5 * embed_smooth(nc.smooth("sin", X)),
                   nc.EPS ** 6 * H]
    pairs = [(a, b) for a in moderates for b in moderates[:2]]
    for a, b in pairs[:10]:
        rep = classify_moderate(a + b, box1, alpha_max=1)
        assert rep.verdict.kind == "moderate"
    for a in moderates[:5]:
        for b in negligibles:
            rep = classify_negligible(a * b, box1, alpha_max=1, m_max=4)
            assert rep.verdict.kind == "negligible", (a, b)


def test_verdicts_invariant_under_grid_refinement(kernel2):
    d = embed_distribution(DistributionSpec.delta((0.0,)), kernel2)
    H = embed_distribution(DistributionSpec.heaviside(), kernel2)
    corpus = [embed_smooth(nc.smooth("sin", X)), d, H * H - H,
              nc.EPS ** 5 * embed_smooth(X ** 2)]
    for net in corpus:
        coarse = CompactBox(((-1.0, 1.0),), resolution=64)
        fine = CompactBox(((-1.0, 1.0),), resolution=128)
        va = classify_moderate(net, coarse, alpha_max=1).verdict
        vb = classify_moderate(net, fine, alpha_max=1).verdict
        assert (va.kind, va.value) == (vb.kind, vb.value)


def test_threaded_sweep_matches_serial(kernel2, box1):
    d = embed_distribution(DistributionSpec.delta((0.0,)), kernel2)
    serial = sup_sweep(d, box1, (0,), threads=1)
    threaded = sup_sweep(d, box1, (0,), threads=4)
    np.testing.assert_array_equal([s.sup for s in serial],
                                  [s.sup for s in threaded])


# -- smoothing-operator test objects ------------------------------------------

@pytest.fixture(scope="module")
def canonical_report(kernel4):
    return verify_test_object(kernel4)


def test_test_object_canonical_passes(canonical_report):
    rep = canonical_report
    assert rep.weak_identity.passed
    assert rep.moderateness.passed
    assert rep.smooth_order.passed
    # even A_4 kernel: convergence order on the smooth battery is >= q+1 = 5
    assert rep.smooth_order.data["min_order"] >= 5 - 0.25


def test_test_object_mass_deficit_fails(moll_even):
    kernel = SmoothingKernelNet(moll_even[4], amplitude=0.9)
    rep = verify_test_object(kernel)
    assert not rep.weak_identity.passed
    rels = [d["relative_deficit"] for d in rep.weak_identity.data.values()
            if abs(d["target"]) > 1e-6]
    assert rels
    for r in rels:
        assert r == pytest.approx(0.1, abs=1e-3)


def test_test_object_eps_scaled_kernel(moll_even, box1):
    kernel = SmoothingKernelNet(moll_even[4], eps_power=-1)
    rep = verify_test_object(kernel)
    assert not rep.weak_identity.passed
    # still moderate, with N shifted up by one
    d_plain = embed_distribution(DistributionSpec.delta((0.0,)),
                                 SmoothingKernelNet(moll_even[4]))
    d_scaled = embed_distribution(DistributionSpec.delta((0.0,)), kernel)
    n_plain = classify_moderate(d_plain, box1, alpha_max=1).verdict.value
    n_scaled = classify_moderate(d_scaled, box1, alpha_max=1).verdict.value
    assert rep.moderateness.passed
    assert n_scaled == n_plain + 1
