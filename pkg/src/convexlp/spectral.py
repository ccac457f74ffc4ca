"""Cone-type measures, the operator T_K^j and its even spectral gap.

``T z = z - s(zh, h[j-2], 1[n-j]) / s(h[j-1], 1[n-j])`` is discretized by
Galerkin projection onto even real harmonics with the inner product of
``L^2(V_K^j)``, ``dV_K^j = (1/n) h s(h[j-1], 1[n-j]) dH``.  The stiffness
matrix is

    A_ab = (1/n) int phi_a phi_b h s_{j-1} - phi_a h D(A(phi_b h), A h[j-2], I[n-j]),

which is symmetric up to quadrature error; the mass matrix is
``M_ab = (1/n) int phi_a phi_b h s_{j-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bodies import Body
from .curvature import cofactor_operator, identity_like, mixed_curvature_from_matrices, s_from_matrix
from .harmonics import HarmonicExpansion, basis_jets
from .jets import Jet
from .sphere import (
    SphereGrid,
    gradient_from_jet,
    operator_eigenvalues,
    operator_from_jet,
    sphere_area,
)
from .volumes import d_const, intrinsic_volume_smooth

MASS_CONDITION_LIMIT = 1e12


class NotInSnError(ValueError):
    """The body has a nonpositive curvature radius somewhere on the grid."""


def _body_data(K: Body, grid: SphereGrid):
    jet = K.jet(grid.nodes)
    A = operator_from_jet(jet, grid.nodes, grid.frame)
    if operator_eigenvalues(A).min() <= 0:
        raise NotInSnError("A h has a nonpositive eigenvalue on the grid")
    return jet, A


@dataclass(frozen=True)
class ConeMeasure:
    grid: SphereGrid
    j: int
    density: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.grid.integrate(self.density))

    def inner(self, z1, z2) -> float:
        return float(self.grid.integrate(z1 * z2 * self.density))


def cone_measure(K: Body, j: int, grid: SphereGrid) -> ConeMeasure:
    """Density ``(1/n) h s_{j-1}`` of ``V_K^j`` per node."""
    n = grid.n
    if not 1 <= j <= n:
        raise ValueError(f"j must lie in [1, {n}]")
    jet, A = _body_data(K, grid)
    return ConeMeasure(grid, j, jet.value * s_from_matrix(A, j - 1) / n)


def _mixed_with_body(Az, Ah, j: int, n: int):
    """``D_{n-1}(Az, Ah[j-2], I[n-j])`` with ``Az`` carrying an extra basis axis."""
    Ah_b = Ah[:, None]
    return mixed_curvature_from_matrices([Az, Ah_b, identity_like(Az)], [1, j - 2, n - j])


@dataclass(frozen=True)
class SpectralProblem:
    grid: SphereGrid
    K: Body
    j: int
    labels: list
    matrix: np.ndarray
    mass: np.ndarray
    asymmetry: float

    @property
    def constant_vector(self) -> np.ndarray:
        """Coefficients of the constant function 1."""
        c = np.zeros(len(self.labels))
        c[0] = math.sqrt(sphere_area(self.grid.n))
        return c

    def deflation_basis(self) -> np.ndarray:
        """Orthonormal basis of the coefficients M-orthogonal to constants."""
        return scipy.linalg.null_space((self.mass @ self.constant_vector)[None, :])

    def eigenpairs(self):
        """Generalized eigenpairs of ``(A, M)`` on the mean-zero even subspace."""
        Q = self.deflation_basis()
        vals, vecs = scipy.linalg.eigh(Q.T @ self.matrix @ Q, Q.T @ self.mass @ Q)
        return vals, Q @ vecs

    def eigenvalues(self) -> np.ndarray:
        return self.eigenpairs()[0]

    def full_eigenvalues(self) -> np.ndarray:
        """Generalized eigenvalues without deflation (the constant gives 0)."""
        return scipy.linalg.eigh(self.matrix, self.mass, eigvals_only=True)

    def quadratic_form(self, c) -> float:
        return float(c @ self.matrix @ c)

    def norm_squared(self, c) -> float:
        return float(c @ self.mass @ c)

    def apply(self, c) -> np.ndarray:
        """Coefficients of ``T z`` (Galerkin projection) for ``z`` with coefficients ``c``."""
        return np.linalg.solve(self.mass, self.matrix @ c)


def assemble_T(K: Body, j: int, grid: SphereGrid, degree: int = 8) -> SpectralProblem:
    """Galerkin matrices of ``T_K^j`` over even harmonics of degree ``<= degree``."""
    n = grid.n
    if not 2 <= j <= n:
        raise ValueError(f"j must lie in [2, {n}]")
    if degree < 4 or degree % 2:
        raise ValueError("basis degree must be even and >= 4")
    hjet, Ah = _body_data(K, grid)
    labels, phi = basis_jets(n, degree, grid.nodes)
    h = hjet.value
    weight = h * s_from_matrix(Ah, j - 1) / n
    M = grid.integrate(phi.value[:, :, None] * phi.value[:, None, :] * weight[:, None, None])
    prod = phi * hjet[:, None]
    Az = operator_from_jet(prod, grid.nodes, grid.frame)
    mixed = _mixed_with_body(Az, Ah, j, n)
    cross = grid.integrate(phi.value[:, :, None] * (h[:, None] * mixed / n)[:, None, :])
    A_raw = M - cross
    scale = np.abs(A_raw).max()
    asym = float(np.abs(A_raw - A_raw.T).max() / scale)
    A = 0.5 * (A_raw + A_raw.T)
    M = 0.5 * (M + M.T)
    if np.linalg.cond(M) > MASS_CONDITION_LIMIT:
        raise np.linalg.LinAlgError("ill-conditioned mass matrix")
    return SpectralProblem(grid, K, j, labels, A, M, asym)


def lambda_1e(problem: SpectralProblem) -> float:
    """Smallest eigenvalue of ``T`` on even fields orthogonal to constants."""
    return float(problem.eigenvalues()[0])


def laplacian_spectrum(grid: SphereGrid, degree: int = 8) -> np.ndarray:
    """Galerkin eigenvalues of ``-Delta`` on even harmonics (stiffness from analytic gradients)."""
    _, phi = basis_jets(grid.n, degree, grid.nodes)
    g = gradient_from_jet(phi, grid.nodes[:, None, :])
    S = grid.integrate(np.einsum("pai,pbi->pab", g, g))
    M = grid.integrate(phi.value[:, :, None] * phi.value[:, None, :])
    return scipy.linalg.eigh(S, M, eigvals_only=True)


# -- second variation ---------------------------------------------------------


class _JetBody:
    smooth = True

    def __init__(self, n, jet_fn):
        self.n = n
        self.jet = jet_fn


def perturbed_volume(K: Body, z, j: int, p: float, t: float, grid: SphereGrid) -> float:
    """``V_j(h (1 + t z)^{1/p})``."""

    def jet(points):
        base = K.jet(points)
        return base * (z.jet(points) * t + 1.0).power(1.0 / p)

    return intrinsic_volume_smooth(_JetBody(grid.n, jet), j, grid)


def second_derivative_fd(K: Body, z, j: int, p: float, grid: SphereGrid, t: float = 1e-3) -> float:
    """Central differences of ``V_j(h(1+tz)^{1/p})^{p/j}`` with one Richardson step."""
    if t < 1e-6:
        raise ValueError("finite-difference step too small")

    def G(s):
        return perturbed_volume(K, z, j, p, s, grid) ** (p / j)

    g0 = G(0.0)

    def central(s):
        return (G(s) - 2.0 * g0 + G(-s)) / s**2

    return (4.0 * central(0.5 * t) - central(t)) / 3.0


def second_derivative_spectral(problem: SpectralProblem, z: HarmonicExpansion, p: float) -> float:
    """Closed form ``-(j-1)/(p d^{-1} V_j^{(j-p)/j}) (<z0, T z0> - (j-p)/(j-1) |z0|^2)``."""
    j = problem.j
    n = problem.grid.n
    c = _coefficients(problem, z)
    one = problem.constant_vector
    mass = problem.norm_squared(one)
    c0 = c - (one @ problem.mass @ c) / mass * one
    V = d_const(n, j) * mass
    quad = problem.quadratic_form(c0) - (j - p) / (j - 1) * problem.norm_squared(c0)
    return -(j - 1) / (p * V ** ((j - p) / j) / d_const(n, j)) * quad


def _coefficients(problem: SpectralProblem, z: HarmonicExpansion) -> np.ndarray:
    index = {lab: i for i, lab in enumerate(problem.labels)}
    c = np.zeros(len(problem.labels))
    for lab, v in zip(z.labels, z.coeffs):
        if v == 0.0:
            continue
        if lab not in index:
            raise ValueError("field degree exceeds the basis degree")
        c[index[lab]] = v
    return c


def second_derivative_identity_check(
    K: Body,
    j: int,
    p: float,
    z: HarmonicExpansion,
    grid: SphereGrid,
    degree: int | None = None,
    t: float = 1e-3,
):
    """Relative discrepancy between the finite-difference and spectral second derivatives.

    Returns ``(fd, spectral, discrepancy)``.  When both sides vanish (``z``
    constant) the discrepancy is the absolute difference.
    """
    if p == 0:
        raise ValueError("p must be nonzero")
    degree = degree or max(4, z.max_degree)
    problem = assemble_T(K, j, grid, degree)
    fd = second_derivative_fd(K, z, j, p, grid, t)
    spec = second_derivative_spectral(problem, z, p)
    scale = max(abs(fd), abs(spec))
    disc = abs(fd - spec) / scale if scale > 1e-8 else abs(fd - spec)
    return fd, spec, disc


# -- Ivaki-Milman integral inequality -------------------------------------------


@dataclass(frozen=True)
class IntegralVerdict:
    lhs: float
    rhs: float
    holds: bool


def ivaki_milman_check(K: Body, j: int, p: float, c: float, grid: SphereGrid, tol: float = 1e-8) -> IntegralVerdict:
    """Both sides of the integral inequality for ``h = h_K``.

    ``sigma_j = C(n-1, j) s_j``; ``sigma^{ik} = j C(n-1, j) Q(A h[j-1], I[n-j-1])``.
    The sum ``sum_i lambda_i sigma^{ii} (nabla_i h)^2`` is computed as
    ``g^T (A h) sigma g`` in the tangent frame, valid because ``sigma`` is a
    polynomial in ``A h``.
    """
    n = grid.n
    if not 1 <= j <= n - 2:
        raise ValueError(f"j must lie in [1, {n - 2}]")
    if c <= 0:
        raise ValueError("c must be positive")
    jet, A = _body_data(K, grid)
    h = jet.value
    I = identity_like(A)
    binom = math.comb(n - 1, j)
    sigma_j = binom * s_from_matrix(A, j)
    sigma_1 = (n - 1) * s_from_matrix(A, 1)
    cof = cofactor_operator(*([A] * (j - 1) + [I] * (n - 1 - j)))
    sig = j * binom * cof
    grad = np.einsum("pik,pi->pk", grid.frame, gradient_from_jet(jet, grid.nodes))
    grad2 = np.einsum("pk,pk->p", grad, grad)
    weighted = np.einsum("pi,pik,pkl,pl->p", grad, A, sig, grad)
    lhs = grid.integrate((c * (p + 1) + (j - 2) * h ** (1 - p) * sigma_j) * h**p * grad2 + 2 * h * weighted)
    rhs = grid.integrate((h ** (1 - p) * sigma_j - c) * h ** (p + 1) * (sigma_1 - (n - 1) * h))
    return IntegralVerdict(float(lhs), float(rhs), bool(lhs <= rhs + tol))
