import math

import numpy as np
import pytest

from convexlp.bodies import Ball, Ellipsoid, Polygon2D, cube, lp_combination, segment_product
from convexlp.lpbm import random_near_ball
from convexlp.sphere import NonSmoothError, build_grid
from convexlp.volumes import (
    VOLUME_SCHEMA,
    af_const,
    aleksandrov_fenchel,
    d_const,
    dimensional_constants,
    e_const,
    intrinsic_volume,
    intrinsic_volume_2d,
    intrinsic_volume_product,
    intrinsic_volume_smooth,
    kappa,
    kubota_oracle,
    parallel_volume,
    steiner_check,
    volume_report,
)


def test_dimensional_constants_examples():
    k, d, e, C = dimensional_constants(3, 2)
    assert k == pytest.approx(2.0)
    assert d == pytest.approx(1.5)
    assert e == pytest.approx(2.0)
    assert dimensional_constants(3, 1).d == pytest.approx(3 / math.pi)
    assert dimensional_constants(3, 1).C == pytest.approx(math.pi / 8)
    with pytest.raises(ValueError):
        dimensional_constants(3, 3)
    with pytest.raises(ValueError):
        dimensional_constants(3, 0)


def test_ball_volumes(grid16):
    assert intrinsic_volume_smooth(Ball(), 1, grid16) == pytest.approx(4.0, rel=1e-13)
    assert intrinsic_volume_smooth(Ball(), 2, grid16) == pytest.approx(2 * math.pi, rel=1e-13)
    assert intrinsic_volume_smooth(Ball(), 3, grid16) == pytest.approx(4 * math.pi / 3, rel=1e-13)
    # V_j(B) = d_{n,j} kappa_n
    for j in (1, 2):
        assert intrinsic_volume_smooth(Ball(), j, grid16) == pytest.approx(d_const(3, j) * kappa(3))


def test_ellipsoid_volume(grid24):
    E = Ellipsoid.axes(1.0, 2.0, 3.0)
    assert intrinsic_volume_smooth(E, 3, grid24) == pytest.approx(8 * math.pi, rel=1e-6)
    # V_1 is proportional to the mean width
    width = 2 * grid24.integrate(E.support(grid24.nodes)) / (4 * math.pi)
    assert intrinsic_volume_smooth(E, 1, grid24) == pytest.approx(3 / math.pi * (4 * math.pi / 3) / 2 * width, rel=1e-12)


def test_smooth_path_rejects_nonsmooth(grid16):
    with pytest.raises(NonSmoothError):
        intrinsic_volume_smooth(cube(), 2, grid16)


def test_planar_examples():
    sq = Polygon2D.square(1.0)
    disk = Ball(4 / math.pi, n=2)
    assert intrinsic_volume_2d(sq, 1) == pytest.approx(4.0)
    assert intrinsic_volume_2d(sq, 2) == pytest.approx(4.0)
    assert intrinsic_volume_2d(disk, 1) == pytest.approx(4.0)
    assert intrinsic_volume_2d(disk, 2) == pytest.approx(16 / math.pi)
    with pytest.raises(ValueError):
        intrinsic_volume_2d(sq, 3)


def test_planar_smooth_quadrature_matches_closed_form():
    E = Ellipsoid.axes(1.0, 2.0)
    assert intrinsic_volume_2d(E, 2) == pytest.approx(2 * math.pi, rel=1e-12)


def test_product_formula_examples():
    sq = Polygon2D.square(1.0)
    disk = Ball(4 / math.pi, n=2)
    assert intrinsic_volume_product(sq, 5.0, 2) == pytest.approx(44.0)
    assert intrinsic_volume_product(disk, 5.0, 2) == pytest.approx(16 / math.pi + 40, rel=1e-12)
    assert intrinsic_volume_product(sq, 0.0, 2) == pytest.approx(4.0)
    assert intrinsic_volume_product(sq, 0.0, 3) == 0.0
    with pytest.raises(ValueError):
        intrinsic_volume_product(sq, 1.0, 0)


def test_cube_volumes():
    assert [intrinsic_volume(cube(2.0), j)[0] for j in (1, 2, 3)] == pytest.approx([6.0, 12.0, 8.0])


def test_product_formula_against_surface_integral_for_cylinder_limit(grid24):
    # V_j of a long box over the square equals V_j computed independently from box sides
    K = segment_product(Polygon2D.square(0.5), 2.0, [0, 0, 1.0])
    a, b, c = 1.0, 1.0, 4.0
    assert intrinsic_volume(K, 1)[0] == pytest.approx(a + b + c)
    assert intrinsic_volume(K, 2)[0] == pytest.approx(a * b + b * c + a * c)
    assert intrinsic_volume(K, 3)[0] == pytest.approx(a * b * c)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_homogeneity(t, grid16, rng):
    K = random_near_ball(rng)
    for j in (1, 2, 3):
        assert intrinsic_volume_smooth(K.scaled(t), j, grid16) == pytest.approx(
            t**j * intrinsic_volume_smooth(K, j, grid16), rel=1e-8
        )
    sq = Polygon2D.square(1.0)
    for j in (1, 2):
        assert intrinsic_volume_2d(sq.scaled(t), j) == t**j * intrinsic_volume_2d(sq, j)


def test_monotonicity(grid16):
    inner, outer = Ellipsoid.axes(1.0, 2.0, 2.5), Ball(3.0)
    assert np.all(inner.support(grid16.nodes) <= outer.support(grid16.nodes))
    for j in (1, 2, 3):
        assert intrinsic_volume_smooth(inner, j, grid16) <= intrinsic_volume_smooth(outer, j, grid16)


def _af_holds(K, j, grid=None, rtol=1e-12):
    lhs, rhs = aleksandrov_fenchel(intrinsic_volume(K, j, grid)[0], intrinsic_volume(K, j + 1, grid)[0], K.n, j)
    return lhs <= rhs * (1 + rtol), lhs, rhs


def test_aleksandrov_fenchel_random_smooth_bodies(grid16):
    rng = np.random.default_rng(5)
    bodies = [random_near_ball(rng, distance=rng.uniform(0.05, 0.4)) for _ in range(50)]
    for K in bodies:
        for j in (1, 2):
            assert _af_holds(K, j, grid16)[0]


def test_aleksandrov_fenchel_polytopes_and_equality():
    for K in (cube(2.0), segment_product(Polygon2D.square(0.2), 3.0, [0, 0, 1.0])):
        for j in (1, 2):
            assert _af_holds(K, j)[0]
    for j in (1, 2):
        ok, lhs, rhs = _af_holds(Ball(1.7), j, build_grid(3, 12))
        assert lhs == pytest.approx(rhs, rel=1e-8)


def test_af_constant_closed_form():
    # C_{n,j} makes the ball an equality case in every dimension
    for n in (3, 4, 5):
        for j in range(1, n):
            Vj = d_const(n, j) * kappa(n)
            Vj1 = d_const(n, j + 1) * kappa(n) if j + 1 < n else kappa(n)
            assert Vj1 == pytest.approx(af_const(n, j) * Vj ** ((j + 1) / j), rel=1e-12)


def test_e_const_examples():
    assert e_const(3, 2) == pytest.approx(2.0)
    # I_s has length 2s, so V_1 grows by 2s
    assert e_const(3, 1) == pytest.approx(2.0)


def test_steiner_examples(grid24):
    assert steiner_check(Ball(1.0), grid24, [1.0]) < 1e-8
    assert parallel_volume(Ball(1.0), 1.0, grid24) == pytest.approx(4 * math.pi / 3 * 8)
    assert steiner_check(Ellipsoid.axes(1.0, 1.0, 1.5), grid24, [0.1, 0.5, 1.0]) < 1e-6
    assert steiner_check(cube(2.0), None, [0.1, 0.5, 1.0, 2.0]) < 1e-10
    assert parallel_volume(cube(2.0), 1.0) == pytest.approx(8 + 24 + 6 * math.pi + 4 * math.pi / 3)


def test_kubota_examples(grid24):
    v, se = kubota_oracle(Ball(), 2, 200, seed=1)
    assert abs(v - 2 * math.pi) <= 3 * se + 1e-9 * 2 * math.pi
    v, se = kubota_oracle(cube(2.0), 1, 2000, seed=2)
    assert abs(v - 6.0) <= 3 * se
    E = Ellipsoid.axes(1.0, 1.5, 2.0)
    v, se = kubota_oracle(E, 2, 1000, seed=3)
    assert abs(v - intrinsic_volume_smooth(E, 2, grid24)) <= 3 * se


def test_kubota_is_reproducible_and_validated():
    assert kubota_oracle(cube(), 1, 100, seed=9) == kubota_oracle(cube(), 1, 100, seed=9)
    with pytest.raises(ValueError):
        kubota_oracle(cube(), 1, 99)
    with pytest.raises(ValueError):
        kubota_oracle(cube(), 3, 100)


def test_product_formula_against_kubota():
    K = lp_combination(
        segment_product(Polygon2D.square(1.0), 1.0, [0, 0, 1.0]),
        segment_product(Ball(4 / math.pi, n=2), 1.0, [0, 0, 1.0]),
        0.5,
        0.5,
    )
    for j in (1, 2):
        v, se = kubota_oracle(K, j, 600, seed=4, planar_samples=512)
        assert abs(v - intrinsic_volume(K, j)[0]) <= 3 * se


def test_volume_report_csv():
    rep = volume_report(cube(2.0), "cube")
    lines = rep.to_csv().splitlines()
    assert lines[0] == f"# schema,{VOLUME_SCHEMA}"
    assert lines[1] == "body,j,V_j,method,error"
    assert lines[2].startswith("cube,1,6.0,product-formula")
    assert rep.value(3) == pytest.approx(8.0)


def test_volume_report_surface_error_estimate():
    rep = volume_report(Ellipsoid.axes(1.0, 1.2, 0.9), "e", resolution=16)
    assert all(m == "surface-integral" and 0 <= e < 1e-8 for _, _, m, e in rep.entries)
