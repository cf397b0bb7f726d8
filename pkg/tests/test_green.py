import math

import numpy as np
import pytest

from bergreen import (
    Annulus,
    DiagonalSingularityError,
    Disk,
    DiskGreen,
    GridGreen,
    GridSpec,
    MoebiusMap,
    MonomialBasis,
    ParameterError,
    Rectangle,
    StencilError,
    UnitDisk,
    build_quadrature,
    discretize,
    exhaustion_sequence,
    green_disk,
    harmonic_part,
    identity_residual,
    kernel_from_gram,
    moebius_transport,
    solve_gauge,
    unit_weight,
    weighted_green,
    wirtinger_mixed,
)
from bergreen.weights import HoloModulusSquaredWeight

DISK = UnitDisk()


def test_green_disk_values():
    assert green_disk(1.0, 0, 0.5, 0) == pytest.approx(math.log(2), abs=1e-14)
    z, w = 0.3, 0.3j
    want = math.log(abs(1 - z * np.conj(w))) - math.log(abs(z - w))
    assert green_disk(1.0, 0, z, w) == pytest.approx(want, abs=1e-14)
    # boundary points evaluate to zero
    g = DiskGreen(0.5j, 1.5)
    for zb in g.domain.boundary_points(64):
        assert abs(g.value(zb, 0.5j + 0.2)) < 1e-12


def test_green_disk_diagonal_signal():
    with pytest.raises(DiagonalSingularityError):
        green_disk(1.0, 0, 0.4j, 0.4j)


def test_green_symmetry_and_positivity():
    g = DiskGreen(0, 1.0)
    rng = np.random.default_rng(9)
    zs = DISK.sample_interior(rng, 100, margin=0.9)
    ws = DISK.sample_interior(rng, 100, margin=0.9)
    for z, w in zip(zs, ws):
        if abs(z - w) < 1e-9:
            continue
        assert abs(g.value(z, w) - g.value(w, z)) < 1e-12
        assert g.value(z, w) > 0


def test_harmonic_part_values():
    h = harmonic_part(DiskGreen(0, 1.0))
    assert h.value(0, 0) == pytest.approx(0.0, abs=1e-15)
    assert h.value(0.5, 0.2) == pytest.approx(math.log(abs(1 - 0.5 * 0.2)), abs=1e-14)
    hr = harmonic_part(DiskGreen(0, 0.5))
    assert hr.value(0, 0) == pytest.approx(math.log(0.5), abs=1e-15)
    # finite and smooth across the diagonal, symmetric
    assert np.isfinite(h.value(0.3 + 0.1j, 0.3 + 0.1j))
    assert h.value(0.4, 0.1j) == pytest.approx(h.value(0.1j, 0.4), abs=1e-14)


def test_harmonic_part_is_harmonic():
    g = DiskGreen(0, 1.0)
    h = harmonic_part(g)
    rng = np.random.default_rng(2)
    zs = DISK.sample_interior(rng, 10, margin=0.5)
    ws = DISK.sample_interior(rng, 10, margin=0.5)
    s = 1e-3
    for z, w in zip(zs, ws):
        lap_z = (h.value(z + s, w) + h.value(z - s, w) + h.value(z + 1j * s, w)
                 + h.value(z - 1j * s, w) - 4 * h.value(z, w)) / s**2
        lap_w = (h.value(z, w + s) + h.value(z, w - s) + h.value(z, w + 1j * s)
                 + h.value(z, w - 1j * s) - 4 * h.value(z, w)) / s**2
        assert abs(lap_z) < 1e-6
        assert abs(lap_w) < 1e-6


def test_wirtinger_mixed_bilinear_and_quadratic():
    got = wirtinger_mixed(lambda z, w: z * np.conj(w), 0.3 + 0.1j, -0.2j, 1e-3)
    assert abs(got - 1.0) < 1e-10
    z0 = 0.25 + 0.1j
    got2 = wirtinger_mixed(lambda z, w: z**2 * np.conj(w), z0, 0.1, 1e-3)
    assert abs(got2 - 2 * z0) < 1e-8


def test_wirtinger_mixed_on_green_matches_analytic():
    g = DiskGreen(0, 1.0)
    # the mixed derivative of G equals that of its regular part h
    h = harmonic_part(g)
    pairs = [(0.3, 0.1), (0.2 + 0.3j, -0.3 - 0.2j), (0.5, -0.4j)]
    s = 1e-3
    for z, w in pairs:
        mg = wirtinger_mixed(g.value, z, w, s)
        mh = wirtinger_mixed(h.value, z, w, s)
        assert abs(mg - mh) < 2 * s**2
        assert abs(mg - g.mixed_analytic(z, w)) < 2 * s**2
    assert g.mixed_analytic(0, 0) == pytest.approx(-0.5, abs=1e-15)


def test_wirtinger_stencil_error():
    with pytest.raises(StencilError):
        wirtinger_mixed(lambda z, w: z * np.conj(w), 0.9999, 0.0, 1e-2, domain=DISK)


def test_weighted_green_reduction_and_values():
    g = DiskGreen(0, 1.0)
    wg_unit = weighted_green(g, None)
    assert wg_unit.value(0.5, 0) == pytest.approx(math.log(2), abs=1e-14)

    mu = HoloModulusSquaredWeight([2, 1], DISK)
    gauge = solve_gauge(mu)
    wg = weighted_green(g, gauge)
    assert wg.value(0.5, 0) == pytest.approx(2.5 * 2.0 * math.log(2), abs=1e-12)
    rng = np.random.default_rng(14)
    zs = DISK.sample_interior(rng, 20, margin=0.8)
    ws = DISK.sample_interior(rng, 20, margin=0.8)
    for z, w in zip(zs, ws):
        if abs(z - w) < 1e-9:
            continue
        assert abs(wg.value(z, w) - np.conj(wg.value(w, z))) < 1e-12


def test_weighted_green_domain_mismatch():
    mu = HoloModulusSquaredWeight([2, 1], Disk(0, 0.5))
    gauge = solve_gauge(mu)
    with pytest.raises(ParameterError):
        weighted_green(DiskGreen(0, 1.0), gauge)


def test_mixed_derivative_factor_out():
    g = DiskGreen(0, 1.0)
    mu = HoloModulusSquaredWeight([2, 1], DISK)
    gauge = solve_gauge(mu)
    wg = weighted_green(g, gauge)
    s = 1e-3
    for z, w in [(0.3, -0.2), (0.1 + 0.4j, -0.3 + 0.1j)]:
        lhs = wirtinger_mixed(wg.smooth_value, z, w, s)
        rhs = complex(gauge(z)) * np.conj(complex(gauge(w))) * g.mixed_analytic(z, w)
        assert abs(lhs - rhs) < 2 * s**2
        assert abs(wg.mixed_zwbar(z, w, method="analytic") - rhs) < 1e-14


def build_kernel(weight=None, maxdeg=30, quad=40):
    w = weight if weight is not None else unit_weight(DISK)
    rule = build_quadrature(DISK, quad)
    return kernel_from_gram(MonomialBasis(DISK, maxdeg), w, rule)


def test_identity_residual_unweighted():
    kernel = build_kernel()
    wg = weighted_green(DiskGreen(0, 1.0), None)
    uw = unit_weight(DISK)
    assert identity_residual(kernel, wg, uw, 0.3, 0.1, 1e-3, method="fd") < 1e-6
    assert identity_residual(kernel, wg, uw, 0.3, 0.1, method="analytic") < 1e-10


def test_identity_residual_weighted():
    mu = HoloModulusSquaredWeight([2, 1], DISK)
    kernel = build_kernel(weight=mu)
    wg = weighted_green(DiskGreen(0, 1.0), solve_gauge(mu))
    assert identity_residual(kernel, wg, mu, 0.2, -0.1, 1e-3, method="fd") < 1e-5
    assert identity_residual(kernel, wg, mu, 0.2, -0.1, method="analytic") < 1e-10


def test_identity_residual_diagonal_excluded():
    kernel = build_kernel()
    wg = weighted_green(DiskGreen(0, 1.0), None)
    with pytest.raises(DiagonalSingularityError):
        identity_residual(kernel, wg, unit_weight(DISK), 0.3, 0.3)


def test_identity_residual_weighted_moebius_domain():
    from bergreen import MoebiusDisk

    dom = MoebiusDisk(0.3 - 0.2j, 0.8)
    weight = HoloModulusSquaredWeight([2, 1], dom)
    rule = build_quadrature(dom, 35)
    kernel = kernel_from_gram(MonomialBasis(dom, 25), weight, rule)
    base = moebius_transport(DiskGreen(0, 1.0), dom.map)
    wg = weighted_green(base, solve_gauge(weight))
    rng = np.random.default_rng(13)
    zs = dom.sample_interior(rng, 8, margin=0.6)
    ws = dom.sample_interior(rng, 8, margin=0.6)
    for z, w in zip(zs, ws):
        assert identity_residual(kernel, wg, weight, z, w, method="analytic") < 1e-6
        assert identity_residual(kernel, wg, weight, z, w, 1e-3, method="fd") < 1e-5


def test_identity_residual_off_center_disk():
    dom = Disk(0.5 + 0.5j, 2.0)
    weight = unit_weight(dom)
    rule = build_quadrature(dom, 35)
    kernel = kernel_from_gram(MonomialBasis(dom, 25), weight, rule)
    wg = weighted_green(DiskGreen(dom.center, dom.radius), None)
    rng = np.random.default_rng(31)
    zs = dom.sample_interior(rng, 10, margin=0.6)
    ws = dom.sample_interior(rng, 10, margin=0.6)
    for z, w in zip(zs, ws):
        assert identity_residual(kernel, wg, weight, z, w, method="analytic") < 1e-6
        assert identity_residual(kernel, wg, weight, z, w, 1e-3, method="fd") < 1e-5


def test_moebius_transport():
    base = DiskGreen(0, 1.0)
    ident = moebius_transport(base, MoebiusMap(0, 0))
    assert ident.value(0.5, 0) == pytest.approx(math.log(2), abs=1e-14)

    t = moebius_transport(base, MoebiusMap(0.5, 0.0))
    # the map sends 0.5 -> 0 and 0 -> -0.5, so G_new at the images matches
    assert t.value(0, -0.5) == pytest.approx(base.value(0.5, 0), abs=1e-13)
    rng = np.random.default_rng(21)
    zs = DISK.sample_interior(rng, 30, margin=0.8)
    ws = DISK.sample_interior(rng, 30, margin=0.8)
    for z, w in zip(zs, ws):
        if abs(z - w) < 1e-9:
            continue
        assert abs(t.value(z, w) - t.value(w, z)) < 1e-12
    # conformal invariance under an automorphism: same function as the base
    assert t.value(0.3, -0.2j) == pytest.approx(base.value(0.3, -0.2j), abs=1e-12)
    with pytest.raises(ParameterError):
        moebius_transport(DiskGreen(0, 2.0), MoebiusMap(0.3, 0))


def test_exhaustion_harnack_monotonicity():
    steps = exhaustion_sequence(DISK, 6).steps
    hs = [DiskGreen(s.center, s.radius).harmonic_diagonal(0) for s in steps]
    assert hs == [math.log(s.radius) for s in steps]
    assert all(a < b for a, b in zip(hs, hs[1:]))
    assert hs[-1] < 0.0  # increases toward h(0,0) = 0 on the unit disk

    # kernel convergence under exhaustion, from closed forms
    ks = [1 / (math.pi * s.radius**2) for s in steps]
    gaps = [abs(k - 1 / math.pi) for k in ks]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_exhaustion_kernel_convergence_at_fixed_pairs():
    steps = exhaustion_sequence(DISK, 6).steps
    parent = kernel_from_gram(MonomialBasis(DISK, 20), unit_weight(DISK),
                              build_quadrature(DISK, 25))
    for z, w in [(0.2 + 0.1j, -0.3 + 0.2j), (0.4, 0.3j)]:
        target = parent.evaluate(z, w)
        gaps = []
        for step in steps:
            kern = kernel_from_gram(MonomialBasis(step, 20), unit_weight(step),
                                    build_quadrature(step, 25))
            gaps.append(abs(kern.evaluate(z, w) - target))
        assert all(a > b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 2e-2


def test_grid_green_square():
    sq = Rectangle(0, 1, 0, 1)
    op = discretize(GridSpec(sq, (64, 64)), unit_weight(sq))
    gg = GridGreen(op)
    v = gg.value(0.25 + 0.25j, 0.6 + 0.6j)
    assert v > 0
    # regular part at the center: series-extrapolated value -0.61737
    assert gg.harmonic_diagonal(0.5 + 0.5j) == pytest.approx(-0.61737, abs=0.01)
    with pytest.raises(DiagonalSingularityError):
        gg.value(0.5 + 0.5j, 0.5 + 0.5j)


def test_grid_green_annulus_harmonic_diagonal():
    ann = Annulus(0.5, 1.0)
    op = discretize(GridSpec(ann, (48, 96)), unit_weight(ann))
    gg = GridGreen(op)
    val = gg.harmonic_diagonal(0.75)
    assert np.isfinite(val)
