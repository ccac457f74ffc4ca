"""Origin-symmetric convex bodies given by support functions.

Every body evaluates its support function at arbitrary nonzero points
(1-homogeneous extension).  Smooth representations additionally expose
``jet(points)`` with analytic derivatives; polytopal and product bodies raise
:class:`~convexlp.sphere.NonSmoothError` there.

L_p combinations are Wulff shapes of pointwise p-means.  The Wulff step is
skipped when the mean is already a support function (p = 1, identical
inputs, or a smooth mean whose curvature matrix stays positive definite on a
check grid).  Otherwise the shape is cut out of half-spaces: exactly by a
planar half-plane intersection in 2D, by one linear program per query
direction in 3D.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .harmonics import HarmonicExpansion
from .jets import Jet, p_mean, p_mean_values
from .sphere import (
    NonSmoothError,
    SphereGrid,
    build_grid,
    hessian_operator,
    operator_eigenvalues,
    tangent_frame,
    unit,
)

CONVEXITY_THRESHOLD = 1e-8
DEFAULT_WULFF_SAMPLES = 2048
DEFAULT_CHECK_RESOLUTION = 16


class WulffError(RuntimeError):
    """Empty, degenerate or unbounded half-space intersection."""


def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != n:
        raise ValueError(f"expected points in R^{n}, got shape {x.shape}")
    return x, single


def _ret(values, single):
    return float(values[0]) if single else values


class Body:
    """Base class; subclasses set ``n`` and implement ``_support``."""

    n: int
    smooth: bool = False

    def support(self, x):
        """Support function at ``x`` (a point or an array of points)."""
        pts, single = _as_points(x, self.n)
        return _ret(self._support(pts), single)

    def _support(self, pts) -> np.ndarray:
        raise NotImplementedError

    def jet(self, points) -> Jet:
        raise NonSmoothError(f"{type(self).__name__} has no analytic second derivatives")

    def scaled(self, t: float) -> "Body":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def dumps(self) -> str:
        return dumps_body(self)

    def __eq__(self, other):
        return isinstance(other, Body) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))


def support(body: Body, u):
    """Support value of ``body`` in direction(s) ``u``."""
    return body.support(u)


@dataclass(eq=False)
class Ball(Body):
    radius: float = 1.0
    n: int = 3
    smooth = True

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    def _support(self, pts):
        return self.radius * np.linalg.norm(pts, axis=1)

    def jet(self, points):
        return Jet.norm_squared(np.atleast_2d(points)).power(0.5) * self.radius

    def scaled(self, t):
        return Ball(self.radius * t, self.n)

    def to_dict(self):
        return {"kind": "ball", "n": self.n, "radius": float(self.radius)}


@dataclass(eq=False)
class Ellipsoid(Body):
    """Ellipsoid ``A B^n``; support ``|A^T x|``.  For symmetric ``A`` the
    eigenvalues of ``A`` are the semi-axes."""

    matrix: np.ndarray
    smooth = True

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("ellipsoid matrix must be square")
        if np.linalg.matrix_rank(A) < A.shape[0]:
            raise ValueError("ellipsoid matrix must be nonsingular")
        self.matrix = A
        self.n = A.shape[0]
        self._q = A @ A.T

    @classmethod
    def axes(cls, *semi_axes):
        return cls(np.diag(np.asarray(semi_axes, dtype=float)))

    def _support(self, pts):
        return np.sqrt(np.einsum("pi,ij,pj->p", pts, self._q, pts))

    def jet(self, points):
        x = np.atleast_2d(np.asarray(points, dtype=float))
        Q = self._q
        qx = x @ Q
        q = Jet(np.einsum("pi,pi->p", qx, x), 2.0 * qx, np.broadcast_to(2.0 * Q, (x.shape[0],) + Q.shape).copy())
        return q.power(0.5)

    def scaled(self, t):
        return Ellipsoid(self.matrix * t)

    def to_dict(self):
        return {"kind": "ellipsoid", "matrix": self.matrix.tolist()}


@dataclass(eq=False)
class Polygon2D(Body):
    """Origin-symmetric convex polygon, vertices stored counterclockwise."""

    vertices: np.ndarray
    n: int = field(default=2, init=False)

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or len(V) < 4:
            raise ValueError("polygon needs at least 4 planar vertices")
        scale = np.abs(V).max()
        for v in V:
            if np.min(np.linalg.norm(V + v, axis=1)) > 1e-12 * scale:
                raise ValueError("polygon vertices are not antipodally paired")
        try:
            hull = ConvexHull(V)
        except Exception as exc:  # qhull raises on degenerate input
            raise ValueError(f"degenerate polygon: {exc}") from None
        if len(hull.vertices) != len(V):
            raise ValueError("polygon vertices are not in convex position")
        order = np.argsort(np.arctan2(V[:, 1], V[:, 0]))
        self.vertices = V[order]

    @classmethod
    def square(cls, half_side: float = 1.0):
        a = float(half_side)
        return cls(np.array([[a, a], [-a, a], [-a, -a], [a, -a]]))

    def _support(self, pts):
        return (pts @ self.vertices.T).max(axis=1)

    @property
    def edges(self):
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    @property
    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def perimeter(self) -> float:
        return float(np.linalg.norm(self.edges, axis=1).sum())

    @property
    def normals(self) -> np.ndarray:
        e = self.edges
        return unit(np.stack([e[:, 1], -e[:, 0]], axis=1))

    def scaled(self, t):
        return Polygon2D(self.vertices * t)

    def to_dict(self):
        return {"kind": "polygon2d", "vertices": self.vertices.tolist()}


@dataclass(eq=False)
class Harmonic(Body):
    """Body whose support function is an even harmonic expansion."""

    expansion: HarmonicExpansion
    validate: bool = field(default=True, repr=False)
    smooth = True

    def __post_init__(self):
        self.n = self.expansion.n
        if self.validate:
            res = max(8, self.expansion.max_degree + 2)
            grid = build_grid(self.n, res)
            if self.expansion(grid.nodes).min() <= 0:
                raise ValueError("harmonic support function is not positive")

    def _support(self, pts):
        return self.expansion(pts)

    def jet(self, points):
        return self.expansion.jet(np.atleast_2d(points))

    def scaled(self, t):
        return Harmonic(self.expansion.scaled(t), validate=False)

    def to_dict(self):
        return {
            "kind": "harmonic",
            "n": self.n,
            "max_degree": self.expansion.max_degree,
            "coefficients": [[l, m, v] for l, m, v in self.expansion.triples()],
        }


@dataclass(eq=False)
class SegmentProduct(Body):
    """``A + [-s theta, s theta]`` with ``A`` living in ``theta^perp``.

    ``base`` is expressed in the coordinates of ``basis`` (an orthonormal
    basis of ``theta^perp``, columns), defaulting to the tangent frame at
    ``theta``.
    """

    base: Body
    half_length: float
    axis: np.ndarray
    basis: np.ndarray | None = None

    def __post_init__(self):
        theta = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(theta) - 1.0) > 1e-12:
            raise ValueError("segment axis must be a unit vector")
        self.axis = theta
        self.n = theta.size
        if self.base.n != self.n - 1:
            raise ValueError(f"base must live in theta^perp (dimension {self.n - 1}), got dimension {self.base.n}")
        if self.half_length < 0:
            raise ValueError("segment half-length must be nonnegative")
        if self.basis is None:
            self.basis = tangent_frame(theta[None, :])[0]
        else:
            U = np.asarray(self.basis, dtype=float)
            if U.shape != (self.n, self.n - 1):
                raise ValueError("basis must be n x (n-1)")
            if np.abs(U.T @ theta).max() > 1e-12 or np.abs(U.T @ U - np.eye(self.n - 1)).max() > 1e-12:
                raise ValueError("base is not orthogonal to theta")
            self.basis = U

    def _support(self, pts):
        return self.base.support(pts @ self.basis) + self.half_length * np.abs(pts @ self.axis)

    def embed(self, v2) -> np.ndarray:
        """Map base coordinates to R^n."""
        return np.asarray(v2, dtype=float) @ self.basis.T

    def scaled(self, t):
        return SegmentProduct(self.base.scaled(t), self.half_length * t, self.axis, self.basis)

    def to_dict(self):
        return {
            "kind": "segment_product",
            "base": self.base.to_dict(),
            "half_length": float(self.half_length),
            "axis": self.axis.tolist(),
            "basis": self.basis.tolist(),
        }


def segment_product(base: Body, s: float, theta, basis=None) -> SegmentProduct:
    """The body ``base + I_s`` with ``I_s = [-s theta, s theta]``."""
    return SegmentProduct(base, float(s), np.asarray(theta, dtype=float), basis)


def cube(side: float = 2.0) -> SegmentProduct:
    """Axis-parallel cube as ``square + segment`` along ``e_3``."""
    a = 0.5 * side
    return segment_product(Polygon2D.square(a), a, [0.0, 0.0, 1.0])


# -- Wulff shapes ------------------------------------------------------------


@dataclass
class WulffResult:
    directions: np.ndarray
    values: np.ndarray
    clipped: np.ndarray
    support: object
    is_already_convex: bool
    polygon: Polygon2D | None = None


def circle_directions(count: int) -> np.ndarray:
    t = 2.0 * math.pi * np.arange(count) / count
    return np.stack([np.cos(t), np.sin(t)], axis=1)


def wulff_shape_2d(f, directions=None, samples: int = DEFAULT_WULFF_SAMPLES, rtol: float = 1e-12) -> WulffResult:
    """Largest convex body with ``h <= f`` at the sampled directions (planar).

    ``f`` is either a callable on unit vectors or an array of samples aligned
    with ``directions``.  The intersection of half-planes is taken through
    the dual point set ``{v / f(v)}``: its hull edges are the active
    constraints and consecutive active lines meet at the polygon vertices.
    """
    if directions is None:
        directions = circle_directions(samples)
    D = unit(np.asarray(directions, dtype=float))
    if len(D) < 8:
        raise ValueError("need at least 8 sample directions")
    vals = np.asarray(f(D) if callable(f) else f, dtype=float)
    if vals.shape != (len(D),):
        raise ValueError("sample values do not match directions")
    if not np.all(np.isfinite(vals)) or vals.min() <= 0:
        raise WulffError("f must be positive at every sample direction")

    dual = D / vals[:, None]
    try:
        hull = ConvexHull(dual)
    except Exception as exc:
        raise WulffError(f"degenerate half-plane intersection: {exc}") from None
    active = hull.vertices  # counterclockwise
    ang = np.sort(np.arctan2(D[active, 1], D[active, 0]))
    gaps = np.diff(np.concatenate([ang, ang[:1] + 2 * math.pi]))
    if gaps.max() >= math.pi - 1e-12:
        raise WulffError("half-plane intersection is unbounded")

    a = active
    b = np.roll(active, -1)
    verts = np.empty((len(active), 2))
    for k, (i, j) in enumerate(zip(a, b)):
        verts[k] = np.linalg.solve(np.stack([D[i], D[j]]), [vals[i], vals[j]])
    # symmetrise: exact for even samples, removes round-off otherwise
    polygon = _symmetric_polygon(verts)
    clipped = polygon.support(D)
    convex = bool(np.all(clipped >= vals - rtol * vals.max()))
    return WulffResult(D, vals, clipped, polygon.support, convex, polygon)


def _symmetric_polygon(verts) -> Polygon2D:
    pts = np.concatenate([verts, -verts])
    hull = ConvexHull(pts)
    V = pts[hull.vertices]
    # merge near-duplicates produced by collinear active constraints
    keep = [0]
    for k in range(1, len(V)):
        if np.linalg.norm(V[k] - V[keep[-1]]) > 1e-12 * np.abs(V).max():
            keep.append(k)
    V = V[keep]
    ang = np.arctan2(V[:, 1], V[:, 0])
    V = V[np.argsort(ang)]
    m = len(V) // 2
    if len(V) % 2 == 0 and np.allclose(V[m:], -V[:m], rtol=0, atol=1e-9 * np.abs(V).max()):
        V = np.concatenate([0.5 * (V[:m] - V[m:]), -0.5 * (V[:m] - V[m:])])
    return _unchecked_polygon(V)


def _unchecked_polygon(V) -> Polygon2D:
    poly = object.__new__(Polygon2D)
    poly.vertices = V[np.argsort(np.arctan2(V[:, 1], V[:, 0]))]
    poly.n = 2
    return poly


class _LPSupport:
    """Support function of ``{x : <x, v> <= f(v), v in D}`` by linear programming."""

    def __init__(self, directions, values):
        self.A = np.asarray(directions, dtype=float)
        self.b = np.asarray(values, dtype=float)

    def __call__(self, x):
        pts, single = _as_points(x, self.A.shape[1])
        out = np.empty(len(pts))
        for k, u in enumerate(pts):
            res = linprog(-u, A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * len(u), method="highs")
            if res.status == 3:
                raise WulffError("unbounded program: f sampled too sparsely")
            if res.status != 0:
                raise WulffError(f"linear program failed: {res.message}")
            out[k] = -res.fun
        return _ret(out, single)


def wulff_shape_3d(f, grid: SphereGrid | None = None, directions=None, queries=None) -> WulffResult:
    """Wulff shape over a direction set, evaluated by one LP per query.

    Constraint directions are the grid nodes unless ``directions`` is given;
    support values are reported at the constraint directions unless
    ``queries`` is given.
    """
    if directions is None:
        if grid is None:
            raise ValueError("need a grid or explicit directions")
        if grid.resolution < 8:
            raise ValueError("grid resolution must be >= 8")
        directions = grid.nodes
    D = np.asarray(directions, dtype=float)
    vals = np.asarray(f(D) if callable(f) else f, dtype=float)
    if vals.min() <= 0:
        raise WulffError("f must be positive at every sample direction")
    lp = _LPSupport(D, vals)
    Q = D if queries is None else np.atleast_2d(np.asarray(queries, dtype=float))
    clipped = lp(Q)
    ref = vals if queries is None else (f(Q) if callable(f) and len(Q) else None)
    convex = bool(ref is not None and len(Q) and np.all(clipped >= ref - 1e-9 * np.abs(ref).max()))
    return WulffResult(D, vals, clipped, lp, convex)


# -- L_p combinations --------------------------------------------------------


def _polygon_normals(body: Body) -> list[np.ndarray]:
    if isinstance(body, Polygon2D):
        return [body.normals]
    if isinstance(body, PMean):
        return _polygon_normals(body.left) + _polygon_normals(body.right)
    return []


class PMean(Body):
    """Support function of ``(1-lam) K +_p lam L``."""

    def __init__(
        self,
        p: float,
        lam: float,
        left: Body,
        right: Body,
        *,
        wulff_samples: int = DEFAULT_WULFF_SAMPLES,
        check_resolution: int = DEFAULT_CHECK_RESOLUTION,
        wulff_resolution: int = DEFAULT_CHECK_RESOLUTION,
        force_wulff: bool = False,
        wulff_directions=None,
    ):
        if left.n != right.n:
            raise ValueError("bodies live in different dimensions")
        if not 0.0 < lam < 1.0:
            raise ValueError("lambda must lie in (0, 1)")
        if p > 1.0:
            raise ValueError("p-combinations are implemented for p <= 1")
        self.p = float(p)
        self.lam = float(lam)
        self.left = left
        self.right = right
        self.n = left.n
        self.wulff_samples = wulff_samples
        self.check_resolution = check_resolution
        self.wulff_resolution = wulff_resolution
        self.force_wulff = force_wulff
        self.wulff_directions = wulff_directions

    def raw_mean(self, pts) -> np.ndarray:
        a = self.left.support(pts)
        b = self.right.support(pts)
        if np.min(a) <= 0 or np.min(b) <= 0:
            raise ValueError("nonpositive support value: body does not contain the origin in its interior")
        return p_mean_values(a, b, self.p, self.lam)

    def _mean_jet(self, points) -> Jet:
        return p_mean(self.left.jet(points), self.right.jet(points), self.p, self.lam)

    @cached_property
    def min_curvature(self) -> float:
        """Smallest eigenvalue of the curvature matrix of the raw mean on the check grid."""
        grid = build_grid(self.n, self.check_resolution)
        A = hessian_operator(_JetOnly(self._mean_jet), grid)
        return float(operator_eigenvalues(A).min())

    @cached_property
    def is_verbatim(self) -> bool:
        """True when the raw p-mean is itself a support function."""
        if self.force_wulff:
            return False
        if self.p == 1.0 or self.left == self.right:
            return True
        if not (self.left.smooth and self.right.smooth):
            return False
        return self.min_curvature > CONVEXITY_THRESHOLD

    @property
    def smooth(self) -> bool:
        return self.is_verbatim and self.left.smooth and self.right.smooth

    @cached_property
    def wulff(self) -> WulffResult:
        if self.n == 2:
            D = self.wulff_directions
            if D is None:
                D = circle_directions(self.wulff_samples)
                extra = _polygon_normals(self.left) + _polygon_normals(self.right)
                if extra:
                    D = np.concatenate([D] + extra + [-e for e in extra])
            return wulff_shape_2d(self.raw_mean, D)
        # support values are queried lazily through the LP, so no eager evaluation
        none = np.zeros((0, self.n))
        if self.wulff_directions is not None:
            return wulff_shape_3d(self.raw_mean, directions=self.wulff_directions, queries=none)
        return wulff_shape_3d(self.raw_mean, build_grid(self.n, self.wulff_resolution), queries=none)

    @property
    def polygon(self) -> Polygon2D | None:
        if self.n != 2 or self.is_verbatim:
            return None
        return self.wulff.polygon

    def _support(self, pts):
        if self.is_verbatim:
            return self.raw_mean(pts)
        return self.wulff.support(pts)

    def jet(self, points):
        if not self.smooth:
            raise NonSmoothError("L_p combination required a Wulff step; no analytic derivatives")
        return self._mean_jet(points)

    def scaled(self, t):
        return PMean(
            self.p,
            self.lam,
            self.left.scaled(t),
            self.right.scaled(t),
            wulff_samples=self.wulff_samples,
            check_resolution=self.check_resolution,
            wulff_resolution=self.wulff_resolution,
            force_wulff=self.force_wulff,
        )

    def to_dict(self):
        return {
            "kind": "pmean",
            "p": self.p,
            "lam": self.lam,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }


class _JetOnly:
    def __init__(self, jet):
        self.jet = jet


def segment_mean(s1: float, s2: float, p: float, lam: float) -> float:
    if s1 == s2:
        return float(s1)
    if p == 0.0:
        return float(s1 ** (1 - lam) * s2**lam)
    if min(s1, s2) == 0.0 and p < 0:
        return 0.0
    return float(((1 - lam) * s1**p + lam * s2**p) ** (1 / p))


def lp_combination(K: Body, L: Body, p: float, lam: float, *, split_products: bool = True, **options) -> Body:
    """``(1-lam) K +_p lam L`` as a body.

    When both arguments are segment products over the same axis and
    ``0 <= p <= 1`` the combination splits into the planar combination of the
    bases plus the combined segment.
    """
    if (
        split_products
        and isinstance(K, SegmentProduct)
        and isinstance(L, SegmentProduct)
        and 0.0 <= p <= 1.0
        and np.array_equal(K.axis, L.axis)
        and np.array_equal(K.basis, L.basis)
    ):
        base = lp_combination(K.base, L.base, p, lam, **options)
        s = segment_mean(K.half_length, L.half_length, p, lam)
        return SegmentProduct(base, s, K.axis, K.basis)
    return PMean(p, lam, K, L, **options)


# -- body files --------------------------------------------------------------


def body_from_dict(d: dict) -> Body:
    kind = d.get("kind")
    if kind == "ball":
        return Ball(float(d["radius"]), int(d.get("n", 3)))
    if kind == "ellipsoid":
        return Ellipsoid(np.asarray(d["matrix"], dtype=float))
    if kind == "polygon2d":
        return Polygon2D(np.asarray(d["vertices"], dtype=float))
    if kind == "harmonic":
        exp = HarmonicExpansion.from_triples(int(d["n"]), d["coefficients"], d.get("max_degree"))
        return Harmonic(exp)
    if kind == "segment_product":
        return SegmentProduct(
            body_from_dict(d["base"]),
            float(d["half_length"]),
            np.asarray(d["axis"], dtype=float),
            None if d.get("basis") is None else np.asarray(d["basis"], dtype=float),
        )
    if kind == "pmean":
        return PMean(float(d["p"]), float(d["lam"]), body_from_dict(d["left"]), body_from_dict(d["right"]))
    if kind == "cube":
        return cube(float(d.get("side", 2.0)))
    raise ValueError(f"unknown body kind {kind!r}")


def dumps_body(body: Body) -> str:
    return json.dumps(body.to_dict(), indent=2, sort_keys=True)


def loads_body(text: str) -> Body:
    return body_from_dict(json.loads(text))


def load_body(path) -> Body:
    with open(path, encoding="utf-8") as fh:
        return loads_body(fh.read())


def save_body(body: Body, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_body(body) + "\n")
