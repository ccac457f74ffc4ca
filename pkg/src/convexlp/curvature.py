"""Mixed discriminants and curvature functions of smooth convex bodies.

All matrix routines are batched: arguments are arrays of shape
``(..., N, N)`` and results have the batch shape ``...``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .sphere import (
    NonSmoothError,
    SphereGrid,
    field_jet,
    operator_eigenvalues,
    operator_from_jet,
    tangent_frame,
)


def _check(mats):
    if not mats:
        raise ValueError("need at least one matrix")
    mats = [np.asarray(A, dtype=float) for A in mats]
    N = mats[0].shape[-1]
    for A in mats:
        if A.shape[-2:] != (N, N):
            raise ValueError("size mismatch: all matrices must be N x N")
    if len(mats) != N:
        raise ValueError(f"D_N takes exactly N={N} matrices, got {len(mats)}")
    return mats, N


def _minor(A, i, k):
    A = np.delete(A, i, axis=-2)
    return np.delete(A, k, axis=-1)


def _cofactor_recursion(mats):
    N = len(mats)
    if N == 1:
        return mats[0][..., 0, 0]
    first, rest = mats[0], mats[1:]
    total = 0.0
    for i in range(N):
        for k in range(N):
            a = first[..., i, k]
            if not np.any(a):
                continue
            q = _cofactor_recursion([_minor(B, i, k) for B in rest])
            total = total + a * ((-1) ** (i + k) / N) * q
    return total * np.ones(first.shape[:-2]) if np.ndim(total) == 0 else total


def _polarization(mats):
    # D_N = (1/N!) sum_{S} (-1)^{N-|S|} det(sum_{i in S} A_i)
    N = len(mats)
    total = 0.0
    for r in range(1, N + 1):
        sign = (-1) ** (N - r)
        for subset in itertools.combinations(range(N), r):
            total = total + sign * np.linalg.det(sum(mats[i] for i in subset))
    return total / math.factorial(N)


def mixed_discriminant(*mats, method: str = "auto"):
    """Mixed discriminant ``D_N(A^1, ..., A^N)``.

    ``method='cofactor'`` uses the inductive cofactor expansion (N <= 3),
    ``'polarization'`` the inclusion-exclusion sum of determinants (N <= 6).
    """
    mats, N = _check(list(mats))
    if method == "auto":
        method = "cofactor" if N <= 3 else "polarization"
    if method == "cofactor":
        if N > 3:
            raise ValueError("cofactor path supports N <= 3")
        return _cofactor_recursion(mats)
    if method == "polarization":
        if N > 6:
            raise ValueError("polarization path supports N <= 6")
        return _polarization(mats)
    raise ValueError(f"unknown method {method!r}")


def cofactor_operator(*mats) -> np.ndarray:
    """The matrix ``Q^{i,k}(A^2, ..., A^N)``; contracting with ``A^1`` gives ``D_N``."""
    mats = [np.asarray(A, dtype=float) for A in mats]
    N = mats[0].shape[-1]
    if len(mats) != N - 1 or any(A.shape[-2:] != (N, N) for A in mats):
        raise ValueError(f"cofactor operator of size {N} takes {N - 1} matrices of size {N}")
    batch = mats[0].shape[:-2]
    Q = np.empty(batch + (N, N))
    for i in range(N):
        for k in range(N):
            if N == 1:
                Q[..., i, k] = 1.0
                continue
            minors = [_minor(A, i, k) for A in mats]
            Q[..., i, k] = ((-1) ** (i + k) / N) * mixed_discriminant(*minors)
    return Q


def elementary_symmetric(values, j: int):
    """Normalized elementary symmetric polynomial of the last axis."""
    values = np.asarray(values, dtype=float)
    k = values.shape[-1]
    if j == 0:
        return np.ones(values.shape[:-1])
    total = 0.0
    for idx in itertools.combinations(range(k), j):
        total = total + np.prod(values[..., idx], axis=-1)
    return total / math.comb(k, j)


def mixed_curvature_from_matrices(mats, counts) -> np.ndarray:
    """``D_{n-1}`` with ``mats[i]`` repeated ``counts[i]`` times."""
    args = []
    for A, c in zip(mats, counts):
        args.extend([A] * c)
    return mixed_discriminant(*args)


def identity_like(A) -> np.ndarray:
    k = A.shape[-1]
    return np.broadcast_to(np.eye(k), A.shape)


def curvature_matrix(body, where):
    """``A h`` at grid nodes or at given unit vectors."""
    if isinstance(where, SphereGrid):
        u, frames = where.nodes, where.frame
    else:
        u = np.atleast_2d(np.asarray(where, dtype=float))
        frames = tangent_frame(u)
    return operator_from_jet(field_jet(body, u), u, frames)


def s_from_matrix(A, j: int) -> np.ndarray:
    """``s_j = D_{n-1}(A[j], I[n-1-j])``."""
    k = A.shape[-1]
    if not 0 <= j <= k:
        raise ValueError(f"order j must lie in [0, {k}]")
    return mixed_curvature_from_matrices([A, identity_like(A)], [j, k - j])


@dataclass(frozen=True)
class CurvatureField:
    grid: SphereGrid
    j: int
    values: np.ndarray
    radii: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.grid.n
        w.writerow([f"u{i}" for i in range(n)] + [f"radius{i}" for i in range(n - 1)] + [f"s_{self.j}"])
        for u, r, s in zip(self.grid.nodes, self.radii, self.values):
            w.writerow([repr(float(x)) for x in u] + [repr(float(x)) for x in r] + [repr(float(s))])
        return buf.getvalue()


def curvature_function(body, j: int, grid: SphereGrid) -> CurvatureField:
    """Per-node ``s_j`` and principal radii of a smooth body."""
    if not 1 <= j <= grid.n - 1:
        raise ValueError(f"order j must lie in [1, {grid.n - 1}]")
    A = curvature_matrix(body, grid)
    return CurvatureField(grid, j, s_from_matrix(A, j), operator_eigenvalues(A))


def mixed_curvature(bodies, grid: SphereGrid) -> np.ndarray:
    """``s(h_1, ..., h_{n-1}, .) = D_{n-1}(A h_1, ..., A h_{n-1})`` per node."""
    if len(bodies) != grid.n - 1:
        raise ValueError(f"need {grid.n - 1} bodies")
    mats = [curvature_matrix(b, grid) for b in bodies]
    return mixed_discriminant(*mats)


def degenerate_curvature(base, j: int, u, normal) -> np.ndarray:
    """``s_j`` of a lower-dimensional body ``K subset N^perp`` at ``u``.

    ``base`` is a smooth body of dimension ``n-1`` expressed in the tangent
    frame coordinates of ``N`` (the same convention as
    :class:`~convexlp.bodies.SegmentProduct`).  Uses

        s_j(K, u) = (1 - j/(n-1)) / <u, u~>^j * s_j^{N^perp}(K, u~)

    with ``u~`` the normalized projection of ``u`` onto ``N^perp``.
    """
    N = np.asarray(normal, dtype=float)
    n = N.size
    if not 1 <= j <= n - 2:
        raise ValueError(f"order j must lie in [1, {n - 2}]")
    if base.n != n - 1:
        raise ValueError("base must live in N^perp")
    if not getattr(base, "smooth", False):
        raise NonSmoothError("base needs a smooth representation")
    u = np.atleast_2d(np.asarray(u, dtype=float))
    proj = u - np.outer(u @ N, N)
    norm = np.linalg.norm(proj, axis=1)
    if np.any(norm < 1e-14):
        raise ValueError("u = +-N: geodesic projection undefined")
    ut = proj / norm[:, None]
    cos = np.einsum("pi,pi->p", u, ut)
    basis = tangent_frame(N[None, :])[0]
    ut_local = ut @ basis
    A = curvature_matrix(base, ut_local)
    s_low = s_from_matrix(A, j)
    return (1.0 - j / (n - 1)) / cos**j * s_low
