"""Intrinsic volumes by several independent routes.

* ``surface-integral``: ``V_j = d_{n,j}/n * int h s_{j-1}(h) dH`` for smooth bodies;
* ``exact-2D``: shoelace area and half-perimeter of planar polygons, or
  spectrally accurate quadrature for smooth planar bodies;
* ``product-formula``: ``V_j(A + I_s) = V_j(A) + s e_{n,j} V_{j-1}(A)``;
* ``monte-carlo-oracle``: Kubota's projection average over random subspaces.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .bodies import Ball, Body, PMean, Polygon2D, SegmentProduct, circle_directions, wulff_shape_2d
from .curvature import curvature_matrix, s_from_matrix
from .sphere import NonSmoothError, SphereGrid, build_grid

DEFAULT_RESOLUTION = 24
PLANAR_RESOLUTION = 256


def kappa(d: int) -> float:
    """Volume of the d-dimensional unit ball."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def d_const(n: int, j: int) -> float:
    return math.comb(n, j) / kappa(n - j)


def e_const(n: int, j: int) -> float:
    return 2 * j * d_const(n, j) / (n * d_const(n - 1, j - 1))


def af_const(n: int, j: int) -> float:
    return (
        kappa(n) ** (-1 / j)
        / kappa(n - j - 1)
        * kappa(n - j) ** ((j + 1) / j)
        * math.comb(n, j + 1)
        * math.comb(n, j) ** (-(j + 1) / j)
    )


class DimensionalConstants(NamedTuple):
    kappa: float
    d: float
    e: float
    C: float


def dimensional_constants(n: int, j: int) -> DimensionalConstants:
    """``(kappa_{n-j}, d_{n,j}, e_{n,j}, C_{n,j})``."""
    if not 1 <= j <= n - 1:
        raise ValueError(f"j must lie in [1, {n - 1}] for n={n}")
    return DimensionalConstants(kappa(n - j), d_const(n, j), e_const(n, j), af_const(n, j))


# -- deterministic paths -----------------------------------------------------


def intrinsic_volume_smooth(K: Body, j: int, grid: SphereGrid) -> float:
    n = grid.n
    if K.n != n:
        raise ValueError("grid and body dimensions differ")
    if not 1 <= j <= n:
        raise ValueError(f"j must lie in [1, {n}]")
    if not getattr(K, "smooth", False):
        raise NonSmoothError(f"{type(K).__name__} is not smooth; use the exact-2D or product-formula path")
    jet = K.jet(grid.nodes)
    h = jet.value
    if j == 1:
        integrand = h
    else:
        from .sphere import operator_from_jet

        A = operator_from_jet(jet, grid.nodes, grid.frame)
        integrand = h * s_from_matrix(A, j - 1)
    return d_const(n, j) / n * float(grid.integrate(integrand))


def _planar_polygon(K: Body) -> Polygon2D | None:
    if isinstance(K, Polygon2D):
        return K
    if isinstance(K, PMean) and K.n == 2 and not K.smooth:
        # a verbatim mean of polygons is still a polygon; its Wulff shape recovers it
        return K.polygon if not K.is_verbatim else K.wulff.polygon
    return None


def intrinsic_volume_2d(K: Body, j: int, resolution: int = PLANAR_RESOLUTION) -> float:
    """``V_1`` (half-perimeter) or ``V_2`` (area) of a planar body."""
    if K.n != 2:
        raise ValueError("planar body expected")
    if j == 0:
        return 1.0
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2 in the plane")
    poly = _planar_polygon(K)
    if poly is not None:
        if poly.area <= 0:
            raise ValueError("degenerate polygon")
        return 0.5 * poly.perimeter if j == 1 else poly.area
    if isinstance(K, Ball):
        return math.pi * K.radius if j == 1 else math.pi * K.radius**2
    if getattr(K, "smooth", False):
        return intrinsic_volume_smooth(K, j, build_grid(2, resolution))
    raise NonSmoothError(f"no planar volume path for {type(K).__name__}")


def intrinsic_volume_product(A: Body, s: float, j: int, n: int | None = None, **kw) -> float:
    """``V_j(A + I_s) = V_j(A) + s e_{n,j} V_{j-1}(A)`` for ``A`` in ``theta^perp``."""
    if j == 0:
        raise ValueError("j must be positive")
    n = A.n + 1 if n is None else n
    low = _lower_dimensional_volume(A, j, **kw)
    lower = _lower_dimensional_volume(A, j - 1, **kw)
    return low + s * e_const(n, j) * lower


def _lower_dimensional_volume(A: Body, j: int, **kw) -> float:
    if j == 0:
        return 1.0
    if j > A.n:
        return 0.0
    return intrinsic_volume(A, j, **kw)[0]


def intrinsic_volume(K: Body, j: int, grid: SphereGrid | None = None, resolution: int = DEFAULT_RESOLUTION):
    """Dispatch to the appropriate path; returns ``(value, method)``."""
    if j == 0:
        return 1.0, "exact"
    if isinstance(K, SegmentProduct):
        return intrinsic_volume_product(K.base, K.half_length, j, K.n, grid=None, resolution=resolution), "product-formula"
    if K.n == 2:
        method = "exact-2D" if _planar_polygon(K) is not None else "exact-2D"
        return intrinsic_volume_2d(K, j), method
    if grid is None:
        grid = build_grid(K.n, resolution)
    return intrinsic_volume_smooth(K, j, grid), "surface-integral"


# -- Steiner polynomial ------------------------------------------------------


def steiner_polynomial(volumes, n: int, rho: float) -> float:
    """``sum_j rho^{n-j} kappa_{n-j} V_j`` with ``volumes[j] = V_j`` (``V_0 = 1``)."""
    return sum(rho ** (n - j) * kappa(n - j) * volumes[j] for j in range(n + 1))


def _box_sides(K: SegmentProduct):
    base = K.base
    if not isinstance(base, Polygon2D) or len(base.vertices) != 4:
        return None
    V = base.vertices
    e = np.roll(V, -1, axis=0) - V
    if abs(np.dot(e[0], e[1])) > 1e-12 * np.abs(V).max() ** 2:
        return None
    return float(np.linalg.norm(e[0])), float(np.linalg.norm(e[1])), 2.0 * K.half_length


def parallel_volume(K: Body, rho: float, grid: SphereGrid | None = None) -> float:
    """Volume of ``K + rho B`` computed directly.

    Smooth bodies: ``(1/n) int (h + rho) det(A h + rho I)``.  Boxes: slab,
    quarter-cylinder and corner-ball decomposition.
    """
    if isinstance(K, SegmentProduct):
        sides = _box_sides(K)
        if sides is None or K.n != 3:
            raise NonSmoothError("closed-form parallel volume only for boxes in R^3")
        a, b, c = sides
        return (
            a * b * c
            + 2 * rho * (a * b + b * c + a * c)
            + math.pi * rho**2 * (a + b + c)
            + 4 * math.pi / 3 * rho**3
        )
    if not getattr(K, "smooth", False):
        raise NonSmoothError("parallel volume needs a smooth body or a box")
    n = K.n
    grid = grid or build_grid(n, DEFAULT_RESOLUTION)
    h = K.support(grid.nodes) + rho
    A = curvature_matrix(K, grid) + rho * np.eye(n - 1)
    return float(grid.integrate(h * np.linalg.det(A))) / n


def steiner_check(K: Body, grid: SphereGrid | None, rhos) -> float:
    """Max relative residual between direct parallel volumes and the Steiner polynomial."""
    n = K.n
    vols = [1.0] + [intrinsic_volume(K, j, grid)[0] for j in range(1, n + 1)]
    worst = 0.0
    for rho in rhos:
        direct = parallel_volume(K, rho, grid)
        poly = steiner_polynomial(vols, n, rho)
        worst = max(worst, abs(direct - poly) / abs(direct))
    return worst


def aleksandrov_fenchel(V_j: float, V_j1: float, n: int, j: int):
    """``(V_{j+1}, C_{n,j} V_j^{(j+1)/j})``; the inequality says first <= second."""
    return V_j1, af_const(n, j) * V_j ** ((j + 1) / j)


# -- Monte Carlo oracle ------------------------------------------------------


def kubota_constant(n: int, j: int) -> float:
    return math.comb(n, j) * kappa(n) / (kappa(j) * kappa(n - j))


def _projection_volume(K: Body, frame: np.ndarray, samples: int) -> float:
    j = frame.shape[1]
    if j == 1:
        u = frame[:, 0]
        return float(K.support(u) + K.support(-u))
    if j != 2:
        raise ValueError("projection volumes implemented for j <= 2")
    a, b = frame[:, 0], frame[:, 1]
    t = 2 * math.pi * np.arange(samples) / samples
    dirs = np.outer(np.cos(t), a) + np.outer(np.sin(t), b)
    if getattr(K, "smooth", False):
        jet = K.jet(dirs)
        tang = -np.outer(np.sin(t), a) + np.outer(np.cos(t), b)
        radius = np.einsum("pi,pij,pj->p", tang, jet.hess, tang)
        return 0.5 * float(np.mean(jet.value * radius)) * 2 * math.pi
    planar = wulff_shape_2d(K.support(dirs), circle_directions(samples))
    return planar.polygon.area


def kubota_oracle(
    K: Body,
    j: int,
    sample_count: int = 2000,
    seed: int = 0,
    shards: int = 4,
    planar_samples: int = 1024,
):
    """Monte Carlo estimate of ``V_j`` from projections onto random ``j``-subspaces.

    Returns ``(estimate, stderr)``.  Subspaces are spanned by orthonormalized
    Gaussian frames; each shard draws from its own spawned seed and results
    are merged in shard order.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    n = K.n
    if not 1 <= j <= n - 1:
        raise ValueError(f"j must lie in [1, {n - 1}]")
    children = np.random.SeedSequence(seed).spawn(shards)
    sizes = [sample_count // shards + (1 if i < sample_count % shards else 0) for i in range(shards)]
    draws = []
    for ss, size in zip(children, sizes):
        rng = np.random.default_rng(ss)
        for _ in range(size):
            G = rng.standard_normal((n, j))
            Qm, R = np.linalg.qr(G)
            draws.append(_projection_volume(K, Qm, planar_samples))
    draws = np.asarray(draws)
    c = kubota_constant(n, j)
    return c * float(draws.mean()), c * float(draws.std(ddof=1)) / math.sqrt(len(draws))


# -- reports -----------------------------------------------------------------

VOLUME_SCHEMA = "volumes/v1"


@dataclass
class VolumeReport:
    body_id: str
    entries: list = field(default_factory=list)  # (j, value, method, error)

    def add(self, j, value, method, error=0.0):
        self.entries.append((int(j), float(value), method, float(error)))

    def value(self, j: int) -> float:
        return next(v for jj, v, _, _ in self.entries if jj == j)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["# schema", VOLUME_SCHEMA])
        w.writerow(["body", "j", "V_j", "method", "error"])
        for j, v, m, e in self.entries:
            w.writerow([self.body_id, j, repr(v), m, repr(e)])
        return buf.getvalue()


def volume_report(K: Body, body_id: str = "body", method: str = "auto", resolution: int = DEFAULT_RESOLUTION,
                  seed: int = 0, sample_count: int = 2000) -> VolumeReport:
    report = VolumeReport(body_id)
    n = K.n
    for j in range(1, n + 1):
        if method == "monte-carlo-oracle":
            if j == n:
                continue
            v, err = kubota_oracle(K, j, sample_count, seed)
            report.add(j, v, method, err)
            continue
        if method not in ("auto", "surface-integral", "exact-2D", "product-formula"):
            raise ValueError(f"unknown method {method!r}")
        if method == "surface-integral" or (method == "auto" and K.n > 2 and not isinstance(K, SegmentProduct)):
            grid = build_grid(n, resolution)
            v = intrinsic_volume_smooth(K, j, grid)
            coarse = intrinsic_volume_smooth(K, j, build_grid(n, max(4, (2 * resolution) // 3)))
            report.add(j, v, "surface-integral", abs(v - coarse))
        else:
            v, m = intrinsic_volume(K, j, resolution=resolution)
            report.add(j, v, m, 0.0)
    return report
