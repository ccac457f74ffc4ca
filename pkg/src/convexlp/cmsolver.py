"""Newton solver for the even L_p-Christoffel-Minkowski equation ``h^{1-p} s_j(h) = g``.

The unknown is expanded in even real harmonics of degree ``<= L`` and each
step solves the Galerkin projection of the exact Frechet derivative

    D Xi(h) w = (1-p) h^{-p} s_j(h) w + h^{1-p} j D(A w, A h[j-1], I[n-1-j])

at the current iterate.  When the Galerkin matrix is nearly singular the
step falls back to the derivative at ``h = 1``, which is diagonal in the
harmonic basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bodies import Body, SegmentProduct
from .curvature import cofactor_operator, curvature_matrix, degenerate_curvature, identity_like, s_from_matrix
from .harmonics import HarmonicExpansion, basis_jets, harmonic_labels
from .sphere import SphereGrid, build_grid, gradient_from_jet, operator_eigenvalues, operator_from_jet, sphere_area

CONDITION_LIMIT = 1e10
MAX_HALVINGS = 8
HOLDER_ALPHA = 0.5


class ExcludedParametersError(ValueError):
    pass


# -- data -----------------------------------------------------------------------


def _as_field(g, n):
    if isinstance(g, (int, float)):
        value = float(g)
        return lambda pts: np.full(np.atleast_2d(pts).shape[0], value)
    if callable(g):
        return g
    raise TypeError("g must be a number, a HarmonicExpansion or a callable on unit vectors")


def holder_distance(values, nodes, alpha: float = HOLDER_ALPHA, max_pairs: int = 2000) -> float:
    """``sup |g - 1| + sup_{u != v} |g(u) - g(v)| / |u - v|^alpha`` over grid nodes."""
    values = np.asarray(values, dtype=float)
    idx = np.arange(len(values))
    if len(idx) > max_pairs:
        idx = np.linspace(0, len(values) - 1, max_pairs).astype(int)
    v, x = values[idx], nodes[idx]
    dist = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
    diff = np.abs(v[:, None] - v[None, :])
    mask = dist > 1e-12
    quotient = (diff[mask] / dist[mask] ** alpha).max() if mask.any() else 0.0
    return float(np.abs(values - 1.0).max() + quotient)


@dataclass
class CMProblem:
    """``h^{1-p} s_j(h) = g`` on ``S^{n-1}`` for even ``h``.

    ``(p, j) = (0, 1)`` is excluded by default: for the disk ``K`` in an
    equatorial plane, ``h_K s_1(K) = 1/2`` identically although ``K`` is
    degenerate, so no positive lower bound on ``h`` exists there.
    ``allow_excluded=True`` lifts the restriction for experiments.
    """

    n: int
    j: int
    p: float
    g: object
    resolution: int = 32
    degree: int = 20
    allow_excluded: bool = False
    alpha: float = HOLDER_ALPHA

    def __post_init__(self):
        if self.n != 3:
            raise ValueError("the solver supports n = 3")
        if not 1 <= self.j <= self.n - 2:
            raise ValueError(f"j must lie in [1, {self.n - 2}]")
        if not 0.0 <= self.p < 1.0:
            raise ValueError("p must lie in [0, 1)")
        if (self.p, self.j) == (0.0, 1) and not self.allow_excluded:
            raise ExcludedParametersError(
                "(p, j) = (0, 1) is excluded: the equatorial disk solves h s_1 = 1/2 while being "
                "degenerate, so the lower bound on h fails; pass allow_excluded=True to override"
            )
        if self.degree % 2 or self.degree < 2:
            raise ValueError("basis degree must be even and >= 2")
        self.field = _as_field(self.g, self.n)
        self.grid = build_grid(self.n, self.resolution)
        values = self.field(self.grid.nodes)
        if values.min() <= 0:
            raise ValueError("g must be positive")
        if np.abs(values - values[self.grid.antipode]).max() > 1e-12 * np.abs(values).max():
            raise ValueError("g must be even")
        self.g_values = values

    @property
    def holder_norm(self) -> float:
        return holder_distance(self.g_values, self.grid.nodes, self.alpha)

    @property
    def log_g_sup(self) -> float:
        return float(np.abs(np.log(self.g_values)).max())

    def scaled(self, c: float) -> "CMProblem":
        f = self.field
        return replace(self, g=lambda pts: c * f(pts))


@dataclass
class SolveReport:
    status: str
    residuals: list
    solution: HarmonicExpansion
    min_h: float
    max_h: float
    log_g_sup: float
    convexity: list
    fallbacks: int = 0
    message: str = ""
    probes: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def residual(self) -> float:
        return self.residuals[-1]

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1

    def log_ratios(self) -> np.ndarray:
        """``log r_{k+1} / log r_k`` over consecutive iterates with ``r_k < 1``."""
        r = np.asarray(self.residuals)
        out = []
        for a, b in zip(r[:-1], r[1:]):
            if 0 < a < 1 and b > 0:
                out.append(math.log(b) / math.log(a))
        return np.array(out)

    def summary(self) -> dict:
        return {
            "status": self.status,
            "message": self.message,
            "iterations": self.iterations,
            "residuals": [float(r) for r in self.residuals],
            "min_h": self.min_h,
            "max_h": self.max_h,
            "log_g_sup": self.log_g_sup,
            "min_curvature": [float(c) for c in self.convexity],
            "fallbacks": self.fallbacks,
            "coefficients": [[l, m, v] for l, m, v in self.solution.triples()],
        }


# -- linearization at h = 1 --------------------------------------------------------


@dataclass(frozen=True)
class LinearizedOperator:
    """``w -> j/(n-1) Delta w + (j-p+1) w``, diagonal in harmonics."""

    p: float
    j: int
    n: int

    def factor(self, k: int) -> float:
        return -k * (k + self.n - 2) * self.j / (self.n - 1) + (self.j - self.p + 1)

    def apply(self, w: HarmonicExpansion) -> HarmonicExpansion:
        f = np.array([self.factor(l) for l, _ in w.labels])
        return HarmonicExpansion(w.n, w.max_degree, f * w.coeffs)

    def matrix(self, labels) -> np.ndarray:
        return np.diag([self.factor(l) for l, _ in labels])


def linearized_operator(p: float, j: int, n: int) -> LinearizedOperator:
    if not 1 <= j <= n - 2 or not 0.0 <= p < 1.0:
        raise ValueError("parameters out of range")
    # factor(k) = 0 iff k(k+n-2) = (n-1)(j-p+1)/j
    target = (n - 1) * (j - p + 1) / j
    k = (-(n - 2) + math.sqrt((n - 2) ** 2 + 4 * target)) / 2
    if abs(k - round(k)) < 1e-12 and round(k) % 2 == 0:
        raise ValueError(f"even degree {round(k)} block is singular for p={p}, j={j}, n={n}")
    return LinearizedOperator(p, j, n)


# -- Newton ------------------------------------------------------------------------


class _Discretization:
    def __init__(self, problem: CMProblem):
        grid = problem.grid
        self.problem = problem
        self.labels, phi = basis_jets(problem.n, problem.degree, grid.nodes)
        self.phi = phi.value
        self.A_phi = operator_from_jet(phi, grid.nodes, grid.frame)
        self.weighted = (self.phi * grid.weights[:, None]).T
        self.linear = linearized_operator(problem.p, problem.j, problem.n).matrix(self.labels)

    def state(self, c):
        h = self.phi @ c
        A = np.einsum("pbik,b->pik", self.A_phi, c)
        return h, A

    def residual(self, h, A):
        pr = self.problem
        return h ** (1 - pr.p) * s_from_matrix(A, pr.j) - pr.g_values

    def jacobian(self, h, A):
        pr = self.problem
        n, j, p = pr.n, pr.j, pr.p
        s = s_from_matrix(A, j)
        Q = cofactor_operator(*([A] * (j - 1) + [identity_like(A)] * (n - 1 - j)))
        dmix = np.einsum("pik,pbik->pb", Q, self.A_phi)
        return ((1 - p) * h ** (-p) * s)[:, None] * self.phi + (h ** (1 - p) * j)[:, None] * dmix


def constant_coefficients(n: int, degree: int, value: float) -> np.ndarray:
    c = np.zeros(len(harmonic_labels(n, degree)))
    c[0] = value * math.sqrt(sphere_area(n))
    return c


def newton_solve(
    problem: CMProblem,
    initial: HarmonicExpansion | None = None,
    tol: float = 1e-10,
    max_iter: int = 30,
    _disc: _Discretization | None = None,
) -> SolveReport:
    disc = _disc or _Discretization(problem)
    n, j, p = problem.n, problem.j, problem.p
    if initial is None:
        mean = float(problem.grid.integrate(problem.g_values)) / sphere_area(n)
        c = constant_coefficients(n, problem.degree, mean ** (1 / (j - p + 1)))
    else:
        c = _embed(initial, disc.labels)

    residuals, convexity = [], []
    fallbacks = 0
    increases = 0
    status, message = "max-iterations", ""
    h, A = disc.state(c)
    for it in range(max_iter + 1):
        min_eig = float(operator_eigenvalues(A).min())
        convexity.append(min_eig)
        if min_eig <= 0 or h.min() <= 0:
            status, message = "convexity-loss", f"min eigenvalue of A h = {min_eig:.3e} at iterate {it}"
            if not residuals:
                residuals.append(float("inf"))
            break
        R = disc.residual(h, A)
        res = float(np.abs(R).max())
        residuals.append(res)
        if res < tol:
            status = "converged"
            break
        if it == max_iter:
            break
        J = disc.jacobian(h, A)
        G = disc.weighted @ J
        rhs = -disc.weighted @ R
        if np.linalg.cond(G) > CONDITION_LIMIT:
            G = disc.linear
            fallbacks += 1
        delta = np.linalg.solve(G, rhs)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            c_try = c + t * delta
            h_try, A_try = disc.state(c_try)
            if operator_eigenvalues(A_try).min() > 0 and h_try.min() > 0:
                if float(np.abs(disc.residual(h_try, A_try)).max()) <= res:
                    break
            t *= 0.5
        c, h, A = c_try, h_try, A_try
        new_res = float(np.abs(disc.residual(h, A)).max()) if h.min() > 0 else float("inf")
        increases = increases + 1 if new_res > res else 0
        if increases >= 2:
            residuals.append(new_res)
            status, message = "diverged", "residual increased twice in a row"
            break

    sol = HarmonicExpansion(n, problem.degree, c)
    return SolveReport(
        status,
        residuals,
        sol,
        float(h.min()),
        float(h.max()),
        problem.log_g_sup,
        convexity,
        fallbacks,
        message,
    )


def _embed(expansion: HarmonicExpansion, labels) -> np.ndarray:
    index = {lab: i for i, lab in enumerate(labels)}
    c = np.zeros(len(labels))
    for lab, v in zip(expansion.labels, expansion.coeffs):
        if v == 0.0:
            continue
        if lab not in index:
            raise ValueError("initial body exceeds the basis degree")
        c[index[lab]] = v
    return c


def fine_residual(problem: CMProblem, report: SolveReport, resolution: int | None = None) -> float:
    """Sup-norm residual of the final iterate on a finer grid."""
    grid = build_grid(problem.n, resolution or problem.resolution + 8)
    jet = report.solution.jet(grid.nodes)
    A = operator_from_jet(jet, grid.nodes, grid.frame)
    lhs = jet.value ** (1 - problem.p) * s_from_matrix(A, problem.j)
    return float(np.abs(lhs - problem.field(grid.nodes)).max())


# -- uniqueness and bounds ------------------------------------------------------------


@dataclass(frozen=True)
class ProbeVerdict:
    verdict: str  # "unique" | "disagreement" | "inconclusive"
    spread: float
    deviations: tuple
    statuses: tuple


def uniqueness_probe(problem: CMProblem, reference: SolveReport, init_count: int = 5, spread: float = 0.1, seed: int = 0,
                     tol: float = 1e-8) -> ProbeVerdict:
    """Re-solve from random even initial bodies at C^2 distance ``<= spread`` from the ball."""
    from .lpbm import random_near_ball

    disc = _Discretization(problem)
    rng = np.random.default_rng(seed)
    ref = disc.phi @ _embed(reference.solution, disc.labels)
    devs, statuses = [], []
    for _ in range(init_count):
        body = random_near_ball(rng, problem.n, degree=4, distance=spread * rng.uniform(0.5, 1.0))
        start = body.expansion.scaled(reference.max_h if reference.converged else 1.0)
        rep = newton_solve(problem, initial=start, _disc=disc)
        statuses.append(rep.status)
        devs.append(float(np.abs(disc.phi @ _embed(rep.solution, disc.labels) - ref).max()) if rep.converged else float("nan"))
    if any(s != "converged" for s in statuses) or not reference.converged:
        verdict = "inconclusive"
    elif max(devs) <= tol:
        verdict = "unique"
    else:
        verdict = "disagreement"
    return ProbeVerdict(verdict, spread, tuple(devs), tuple(statuses))


def bound_monitor(report: SolveReport, resolution: int = 48):
    """``(min h, max h, Lipschitz seminorm)`` on a dense grid; the last is ``max |grad h|``."""
    sol = report.solution
    grid = build_grid(sol.n, resolution)
    jet = sol.jet(grid.nodes)
    lip = float(np.linalg.norm(gradient_from_jet(jet, grid.nodes), axis=1).max())
    return float(jet.value.min()), float(jet.value.max()), lip


# -- residual functional on arbitrary bodies -------------------------------------------


def cm_residual(body: Body, p: float, j: int, g, points) -> np.ndarray:
    """``h^{1-p} s_j(h) - g`` at ``points``; lower-dimensional segment products
    (zero half-length) go through the geodesic-projection formula."""
    u = np.atleast_2d(np.asarray(points, dtype=float))
    gv = _as_field(g, body.n)(u)
    h = body.support(u)
    if isinstance(body, SegmentProduct) and body.half_length == 0.0:
        s = degenerate_curvature(body.base, j, u, body.axis)
    else:
        s = s_from_matrix(curvature_matrix(body, u), j)
    return h ** (1 - p) * s - gv
