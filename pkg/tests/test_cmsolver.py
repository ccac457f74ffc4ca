import math

import numpy as np
import pytest

from convexlp.bodies import Ball, segment_product
from convexlp.cmsolver import (
    CMProblem,
    ExcludedParametersError,
    bound_monitor,
    cm_residual,
    fine_residual,
    holder_distance,
    linearized_operator,
    newton_solve,
    uniqueness_probe,
)
from convexlp.harmonics import HarmonicExpansion
from convexlp.sphere import build_grid

ROOT4PI = math.sqrt(4 * math.pi)


def perturbed_g(eps, l=2, m=0):
    return HarmonicExpansion.from_triples(3, [(0, 0, ROOT4PI), (l, m, eps * ROOT4PI)])


def small_problem(g, p=0.5, j=1, **kw):
    kw.setdefault("resolution", 20)
    kw.setdefault("degree", 12)
    return CMProblem(3, j, p, g, **kw)


@pytest.fixture(scope="module")
def perturbed():
    # default discretization: truncation error stays below the certificate level
    problem = CMProblem(3, 1, 0.5, perturbed_g(0.05))
    return problem, newton_solve(problem)


def test_linearized_factors():
    op = linearized_operator(0.5, 1, 3)
    assert op.factor(0) == pytest.approx(1.5)
    assert op.factor(2) == pytest.approx(-1.5)
    assert linearized_operator(0.0, 1, 3).factor(0) == pytest.approx(2.0)
    assert all(linearized_operator(0.0, 1, 3).factor(k) != 0 for k in range(0, 40, 2))


def test_linearized_apply_is_diagonal():
    op = linearized_operator(0.5, 1, 3)
    w = HarmonicExpansion.from_triples(3, [(0, 0, 1.0), (2, 1, 2.0)], 4)
    out = dict(((l, m), v) for l, m, v in op.apply(w).triples())
    assert out[(0, 0)] == pytest.approx(1.5)
    assert out[(2, 1)] == pytest.approx(-3.0)


def test_unit_data_gives_unit_ball():
    rep = newton_solve(small_problem(lambda u: np.ones(len(u))))
    assert rep.converged and rep.iterations <= 2
    assert rep.residual < 1e-12
    assert bound_monitor(rep) == pytest.approx((1.0, 1.0, 0.0), abs=1e-12)


def test_constant_data():
    rep = newton_solve(small_problem(lambda u: np.full(len(u), 2**1.5)))
    assert rep.converged
    assert rep.min_h == pytest.approx(2.0, rel=1e-10) and rep.max_h == pytest.approx(2.0, rel=1e-10)


def test_perturbed_solve(perturbed):
    problem, rep = perturbed
    assert rep.converged and rep.residual < 1e-10
    assert np.all(np.asarray(rep.convexity) > 0)
    L = problem.log_g_sup
    assert math.exp(-L) * 0.5 <= rep.min_h <= rep.max_h <= math.exp(L) * 2
    assert np.all(rep.log_ratios()[:-1] >= 1.8)


def test_fine_grid_certificate(perturbed):
    problem, rep = perturbed
    assert fine_residual(problem, rep) < 1e-10


def test_scaling_covariance(perturbed):
    problem, rep = perturbed
    c = 3.0
    scaled = newton_solve(problem.scaled(c))
    factor = c ** (1 / (problem.j - problem.p + 1))
    grid = build_grid(3, 12)
    np.testing.assert_allclose(scaled.solution(grid.nodes), factor * rep.solution(grid.nodes), rtol=1e-8)


def test_solution_is_even(perturbed):
    _, rep = perturbed
    assert all(l % 2 == 0 for l, _, _ in rep.solution.triples())


def test_bound_monitor(perturbed):
    _, rep = perturbed
    lo, hi, lip = bound_monitor(rep)
    assert 0 < lo <= hi
    assert lip <= hi + 1e-10


def test_bound_band_shrinks_with_epsilon():
    widths = []
    for eps in (0.01, 0.02, 0.03, 0.04, 0.05):
        lo, hi, _ = bound_monitor(newton_solve(small_problem(perturbed_g(eps))))
        widths.append(hi - lo)
    assert np.all(np.diff(widths) > 0)


def test_uniqueness_probe(perturbed):
    problem, rep = perturbed
    v = uniqueness_probe(problem, rep, init_count=3)
    assert v.verdict == "unique"
    assert max(v.deviations) < 1e-8


def test_uniqueness_probe_unit_data():
    problem = small_problem(lambda u: np.ones(len(u)))
    assert uniqueness_probe(problem, newton_solve(problem), init_count=5).verdict == "unique"


def test_uniqueness_probe_inconclusive_when_convexity_breaks(perturbed):
    problem, rep = perturbed
    v = uniqueness_probe(problem, rep, init_count=2, spread=3.0)
    assert v.verdict == "inconclusive"


def test_problem_validation():
    one = lambda u: np.ones(len(u))
    with pytest.raises(ExcludedParametersError):
        CMProblem(3, 1, 0.0, one)
    assert small_problem(one, p=0.0, allow_excluded=True).p == 0.0
    with pytest.raises(ValueError):
        CMProblem(3, 2, 0.5, one)
    with pytest.raises(ValueError):
        CMProblem(3, 1, 1.0, one)
    with pytest.raises(ValueError):
        small_problem(lambda u: u[:, 2])
    with pytest.raises(ValueError):
        small_problem(lambda u: 2 + u[:, 2])


def test_holder_distance_of_constant_is_zero():
    grid = build_grid(3, 8)
    assert holder_distance(np.ones(grid.size), grid.nodes) == 0.0
    assert small_problem(perturbed_g(0.05)).holder_norm > 0


def test_residual_on_degenerate_disk(rng):
    u = rng.standard_normal((40, 3))
    u /= np.linalg.norm(u, axis=1)[:, None]
    u = u[np.abs(u[:, 2]) < 0.99]
    disk = segment_product(Ball(1.0, n=2), 0.0, [0.0, 0.0, 1.0])
    r = cm_residual(disk, 0.0, 1, lambda x: np.full(len(x), 0.5), u)
    assert np.abs(r).max() < 1e-12


def test_residual_on_ball():
    grid = build_grid(3, 6)
    r = cm_residual(Ball(2.0), 0.5, 1, lambda x: np.full(len(x), 2**1.5), grid.nodes)
    assert np.abs(r).max() < 1e-12
