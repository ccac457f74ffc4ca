"""L_p-Brunn-Minkowski checks for intrinsic volumes and the planar-lift counterexample."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import (
    Ball,
    Body,
    Harmonic,
    PMean,
    Polygon2D,
    SegmentProduct,
    circle_directions,
    lp_combination,
    segment_mean,
    segment_product,
)
from .harmonics import HarmonicExpansion, harmonic_labels
from .sphere import SphereGrid, build_grid, gradient_from_jet, operator_from_jet
from .volumes import e_const, intrinsic_volume

EQUALITY_RTOL = 1e-10
COUNTEREXAMPLE_MARGIN = 1e-4
S_CAP = 1e6


def _p_mean_scalar(a: float, b: float, p: float, lam: float) -> float:
    if p == 0.0:
        return a ** (1 - lam) * b**lam
    return ((1 - lam) * a**p + lam * b**p) ** (1 / p)


@dataclass(frozen=True)
class InequalityVerdict:
    """``lhs = V_j(comb)`` against the geometric and ``p/j``-mean bounds.

    ``reverse`` marks the planar ``j = 1`` check, where the combination is
    expected to lose (``lhs <= rhs_p``).
    """

    lhs: float
    rhs_geo: float
    rhs_p: float
    n: int
    j: int
    p: float
    lam: float
    reverse: bool = False
    homothetic: bool | None = None

    @property
    def margin_geo(self) -> float:
        """Relative amount by which ``lhs`` falls short of the geometric bound."""
        return (self.rhs_geo - self.lhs) / self.rhs_geo

    @property
    def margin_p(self) -> float:
        return (self.rhs_p - self.lhs) / self.rhs_p

    @property
    def holds(self) -> bool:
        if self.reverse:
            return self.margin_p >= -EQUALITY_RTOL
        return self.margin_p <= EQUALITY_RTOL

    @property
    def strict(self) -> bool:
        return abs(self.margin_p) > EQUALITY_RTOL

    @property
    def power_mean_ordered(self) -> bool:
        """``rhs_geo <= rhs_p`` for ``p > 0`` (reversed for ``p < 0``)."""
        tol = EQUALITY_RTOL * max(self.rhs_geo, self.rhs_p)
        if self.p > 0:
            return self.rhs_geo <= self.rhs_p + tol
        if self.p < 0:
            return self.rhs_p <= self.rhs_geo + tol
        return abs(self.rhs_p - self.rhs_geo) <= tol

    def row(self) -> list:
        return [self.n, self.j, self.p, self.lam, self.lhs, self.rhs_geo, self.rhs_p, self.margin_geo, self.margin_p]


VERDICT_HEADER = ["n", "j", "p", "lambda", "lhs", "rhs_geo", "rhs_p", "margin_geo", "margin_p"]
VERDICT_SCHEMA = "lpbm-verdicts/v1"


def verdicts_to_csv(verdicts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["# schema", VERDICT_SCHEMA])
    w.writerow(VERDICT_HEADER)
    for v in verdicts:
        w.writerow([repr(x) if isinstance(x, float) else x for x in v.row()])
    return buf.getvalue()


def _volume(K: Body, j: int, grid):
    return intrinsic_volume(K, j, grid)[0]


def _verdict(VK, VL, Vc, n, j, p, lam, reverse=False, homothetic=None) -> InequalityVerdict:
    geo = VK ** (1 - lam) * VL**lam
    rhs_p = geo if p == 0 else _p_mean_scalar(VK, VL, p / j, lam)
    return InequalityVerdict(Vc, geo, rhs_p, n, j, p, lam, reverse, homothetic)


def check_lpbm(K: Body, L: Body, p: float, lam: float, j: int, grid: SphereGrid | None = None, **options) -> InequalityVerdict:
    """Evaluate ``V_j((1-lam) K +_p lam L) >= M_{p/j}(V_j(K), V_j(L); lam)``."""
    n = K.n
    if grid is None and n > 2:
        grid = build_grid(n, 16)
    comb = lp_combination(K, L, p, lam, **options)
    return _verdict(_volume(K, j, grid), _volume(L, j, grid), _volume(comb, j, grid), n, j, p, lam)


def are_homothetic(K: Body, L: Body, samples: int = 720, rtol: float = 1e-9) -> bool:
    """Origin-symmetric bodies are homothetic iff ``h_K / h_L`` is constant."""
    D = circle_directions(samples) if K.n == 2 else build_grid(K.n, 12).nodes
    ratio = K.support(D) / L.support(D)
    return bool(np.ptp(ratio) <= rtol * ratio.mean())


def reverse_j1_check(K: Body, L: Body, p: float, lam: float, **options) -> InequalityVerdict:
    """Planar base case: ``V_1`` of the combination is at most the ``p``-mean of ``V_1``."""
    if K.n != 2 or L.n != 2:
        raise ValueError("planar bodies expected")
    comb = lp_combination(K, L, p, lam, **options)
    return _verdict(
        _volume(K, 1, None), _volume(L, 1, None), _volume(comb, 1, None), 2, 1, p, lam,
        reverse=True, homothetic=are_homothetic(K, L),
    )


# -- counterexample ------------------------------------------------------------


class CounterexampleSearchError(RuntimeError):
    """No strict violation with the required margin below the ``s`` cap."""


def base_pair():
    """Square ``[-1,1]^2`` and the disk of radius ``4/pi``: equal ``V_1``, not homothetic."""
    return Polygon2D.square(1.0), Ball(4.0 / math.pi, n=2)


def lift_volumes(vols: dict, s: float, n: int) -> dict:
    """Intrinsic volumes of ``A + I_s`` in ``R^n`` from those of ``A`` (``V_0 = 1``)."""
    out = {0: 1.0}
    for j in range(1, n + 1):
        out[j] = vols.get(j, 0.0) + s * e_const(n, j) * vols.get(j - 1, 0.0)
    return out


def _planar_volumes(B: Body) -> dict:
    return {0: 1.0, 1: _volume(B, 1, None), 2: _volume(B, 2, None)}


@dataclass
class CounterexampleResult:
    K: Body | None
    L: Body | None
    verdict: InequalityVerdict
    s: float
    crossover: float
    scan: list = field(default_factory=list)  # (s, lhs, rhs_geo, margin)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["# schema", "counterexample-scan/v1"])
        w.writerow(["s", "lhs", "rhs_geo", "margin"])
        for row in self.scan:
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def construct_counterexample(
    n: int = 3,
    j: int = 2,
    p: float = 0.5,
    lam: float = 0.5,
    *,
    min_margin: float = COUNTEREXAMPLE_MARGIN,
    s_cap: float = S_CAP,
    start: float = 1.0,
    **options,
) -> CounterexampleResult:
    """Lift the planar square/disk pair by a common segment until the geometric bound fails.

    Each lift ``A -> A + I_s`` raises dimension and order by one, so
    ``j = n - 1`` is reached from the planar ``V_1`` base case.  The
    combination of the lifted bodies is the lifted planar combination (the
    segment combines as a scalar ``p``-mean of equal lengths).  The search
    doubles ``s`` until the relative margin reaches ``min_margin`` and then
    bisects for the smallest such ``s``.
    """
    if j != n - 1 or n < 3:
        raise ValueError("counterexamples are built for j = n - 1, n >= 3")
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    sq, disk = base_pair()
    M = lp_combination(sq, disk, p, lam, **options)
    vK, vL, vM = _planar_volumes(sq), _planar_volumes(disk), _planar_volumes(M)

    def lifted(vols, s):
        for m in range(3, n + 1):
            vols = lift_volumes(vols, s, m)
        return vols

    def evaluate(s):
        return _verdict(lifted(vK, s)[j], lifted(vL, s)[j], lifted(vM, s)[j], n, j, p, lam)

    scan = []

    def margin(s):
        v = evaluate(s)
        scan.append((s, v.lhs, v.rhs_geo, v.margin_geo))
        return v.margin_geo

    s = start
    prev = 0.0
    while margin(s) < min_margin:
        prev = s
        s *= 2.0
        if s > s_cap:
            best = max(r[3] for r in scan)
            raise CounterexampleSearchError(
                f"(n={n}, j={j}, p={p}, lam={lam}): margin {best:.3e} < {min_margin:.1e} for all s <= {s_cap:.0e}"
            )
    lo, hi = prev, s
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if margin(mid) >= min_margin:
            hi = mid
        else:
            lo = mid
    s = hi
    crossover = _crossover(margin, s)
    K = L = None
    if n == 3:
        theta = np.array([0.0, 0.0, 1.0])
        K, L = segment_product(sq, s, theta), segment_product(disk, s, theta)
    scan.sort()
    return CounterexampleResult(K, L, evaluate(s), s, crossover, scan)


def _crossover(margin, s_hi: float) -> float:
    """Smallest ``s`` with nonnegative margin, by bisection below ``s_hi``."""
    lo, hi = 0.0, s_hi
    while hi - lo > 1e-8 * hi:
        mid = 0.5 * (lo + hi)
        if margin(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def margin_curve(n: int, j: int, p: float, lam: float, s_values, **options) -> np.ndarray:
    """``(s, lhs, rhs_geo, margin)`` rows for the lifted square/disk pair."""
    sq, disk = base_pair()
    M = lp_combination(sq, disk, p, lam, **options)
    vK, vL, vM = _planar_volumes(sq), _planar_volumes(disk), _planar_volumes(M)
    rows = []
    for s in s_values:
        a, b, c = vK, vL, vM
        for m in range(3, n + 1):
            a, b, c = lift_volumes(a, s, m), lift_volumes(b, s, m), lift_volumes(c, s, m)
        v = _verdict(a[j], b[j], c[j], n, j, p, lam)
        rows.append((s, v.lhs, v.rhs_geo, v.margin_geo))
    return np.array(rows)


# -- Cartesian products ---------------------------------------------------------


def product_directions(planar, polar_levels: int = 9) -> np.ndarray:
    """Directions over the given planar azimuths at fixed polar angles, poles and equator included."""
    planar = np.asarray(planar, dtype=float)
    if polar_levels % 2 == 0 or polar_levels < 3:
        raise ValueError("polar_levels must be odd and >= 3")
    psi = np.linspace(-0.5 * math.pi, 0.5 * math.pi, polar_levels)[1:-1]
    rings = [np.column_stack([math.cos(t) * planar, np.full(len(planar), math.sin(t))]) for t in psi]
    poles = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    return np.concatenate(rings + [poles])


def cartesian_product_identity_check(
    A: Body,
    C: Body,
    b: float,
    d: float,
    p: float,
    lam: float,
    grid: SphereGrid | None = None,
    planar_samples: int = 256,
) -> float:
    """Max support discrepancy between the two sides of the product identity.

    Left: ``(1-lam)(A + B) +_p lam (C + D)`` as a 3D Wulff shape of the raw
    p-mean of the product supports.  Right: the planar combination of ``A``
    and ``C`` plus the segment of half-length ``M_p(b, d)``.  Both sides use
    the same planar azimuths, so the discrete problems match the continuous
    identity term for term.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    grid = grid or build_grid(3, 8)
    theta = np.array([0.0, 0.0, 1.0])
    planar = circle_directions(planar_samples)
    extra = [B.normals for B in (A, C) if isinstance(B, Polygon2D)]
    if extra:
        planar = np.concatenate([planar] + extra + [-e for e in extra])
    left3 = segment_product(A, b, theta)
    right3 = segment_product(C, d, theta)
    # planar coordinates follow the product's basis
    basis = left3.basis
    D3 = product_directions(planar)
    D3 = np.concatenate([D3[:, :2] @ basis.T + np.outer(D3[:, 2], theta)])
    direct = PMean(p, lam, left3, right3, force_wulff=p != 1.0 and not (A == C and b == d), wulff_directions=D3)
    planar_comb = lp_combination(A, C, p, lam, wulff_directions=planar)
    split = SegmentProduct(planar_comb, segment_mean(b, d, p, lam), theta, basis)
    return float(np.max(np.abs(direct.support(grid.nodes) - split.support(grid.nodes))))


# -- near-ball bodies -------------------------------------------------------------


def c2_distance_to_ball(K: Body, grid: SphereGrid) -> float:
    """``max(|h - 1|, |grad h|, ||A h - I||)`` over grid nodes."""
    jet = K.jet(grid.nodes)
    g = gradient_from_jet(jet, grid.nodes)
    A = operator_from_jet(jet, grid.nodes, grid.frame) - np.eye(grid.n - 1)
    return float(max(np.abs(jet.value - 1).max(), np.linalg.norm(g, axis=1).max(), np.linalg.norm(A, ord=2, axis=(1, 2)).max()))


def random_near_ball(rng, n: int = 3, degree: int = 4, distance: float = 0.05, grid: SphereGrid | None = None) -> Harmonic:
    """``h = 1 + eps Y`` with ``Y`` a random even harmonic of degrees ``2..degree``.

    ``eps`` is chosen so the grid-measured C^2 distance to the unit ball equals ``distance``.
    """
    grid = grid or build_grid(n, 24)
    labels = harmonic_labels(n, degree)
    coeffs = np.where([l > 0 for l, _ in labels], rng.standard_normal(len(labels)), 0.0)
    Y = Harmonic(HarmonicExpansion(n, degree, coeffs), validate=False)
    eps = distance / c2_distance_to_ball(_Offset(Y), grid)
    return Harmonic(HarmonicExpansion(n, degree, eps * coeffs).plus_constant(1.0))


class _Offset:
    """``1 + f`` as a jet provider."""

    def __init__(self, f):
        self.f = f

    def jet(self, points):
        return self.f.jet(points) + 1.0
