"""Quadrature grids and tangential differential operators on S^{n-1}.

For ``n = 3`` the grid is Gauss-Legendre in the cosine of the polar angle
times a uniform azimuthal ring; for ``n = 2`` it is a uniform ring.  Both are
antipodally symmetric, node for node, so sums of even integrands see paired
terms with bit-identical values.

Derivatives are never finite-differenced on the grid.  Every field passed to
:func:`spherical_gradient` or :func:`hessian_operator` must expose
``jet(points) -> Jet`` giving analytic ambient derivatives of *some* smooth
extension off the sphere; the tangential Hessian is corrected for the
extension's radial derivative, so the result does not depend on which
extension was chosen.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .jets import Jet

SUPPORTED_DIMENSIONS = (2, 3)


class NonSmoothError(ValueError):
    """Raised when a field or body has no analytic second derivatives."""


def sphere_area(n: int) -> float:
    """Surface area of S^{n-1}."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def _first_nonzero_sign(u, order):
    s = np.zeros(u.shape[0])
    for i in order:
        pending = s == 0
        s[pending] = np.sign(u[pending, i])
    s[s == 0] = 1.0
    return s


def tangent_frame(u) -> np.ndarray:
    """Deterministic orthonormal tangent frame at unit vectors ``u``.

    Returns an array of shape ``(P, n, n-1)`` whose columns span ``u^perp``.
    The frame is an even function of ``u`` (``frame(-u) == frame(u)``).

    For ``n = 3`` the first vector is the Gram-Schmidt projection of the
    z-axis onto ``u^perp``; within 0.9 of the poles (``|u_z| > 0.9``) the
    x-axis is used instead.  The second vector is ``+-u x e1`` with the sign
    of the first nonzero of ``(u_z, u_y, u_x)``.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    P, n = u.shape
    if n == 2:
        sgn = _first_nonzero_sign(u, (1, 0))
        e = np.stack([-u[:, 1], u[:, 0]], axis=1) * sgn[:, None]
        return e[:, :, None]
    if n != 3:
        raise ValueError(f"unsupported dimension n={n}")
    ref = np.zeros((P, 3))
    near_pole = np.abs(u[:, 2]) > 0.9
    ref[~near_pole, 2] = 1.0
    ref[near_pole, 0] = 1.0
    e1 = ref - np.einsum("pi,pi->p", ref, u)[:, None] * u
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    sgn = _first_nonzero_sign(u, (2, 1, 0))
    e2 = np.cross(u, e1) * sgn[:, None]
    return np.stack([e1, e2], axis=2)


@dataclass(frozen=True)
class SphereGrid:
    """Quadrature nodes, weights and tangent frames on S^{n-1}."""

    n: int
    resolution: int
    nodes: np.ndarray
    weights: np.ndarray
    frame: np.ndarray
    antipode: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def integrate(self, values) -> float | np.ndarray:
        """Quadrature of node-sampled values (leading axis = nodes)."""
        return np.tensordot(self.weights, np.asarray(values, dtype=float), axes=(0, 0))

    def to_descriptor(self) -> dict:
        return {"kind": "sphere_grid", "n": self.n, "resolution": self.resolution}

    def dumps(self) -> str:
        return json.dumps(self.to_descriptor(), sort_keys=True)

    @classmethod
    def from_descriptor(cls, d: dict) -> "SphereGrid":
        if d.get("kind", "sphere_grid") != "sphere_grid":
            raise ValueError(f"not a grid descriptor: {d.get('kind')!r}")
        return build_grid(int(d["n"]), int(d["resolution"]))

    @classmethod
    def loads(cls, text: str) -> "SphereGrid":
        return cls.from_descriptor(json.loads(text))


def build_grid(n: int, resolution: int) -> SphereGrid:
    """Build an antipodally symmetric quadrature grid on S^{n-1}.

    ``n = 2``: ``2 * resolution`` equally spaced angles (first node on the
    x-axis).  ``n = 3``: ``resolution + 1`` Gauss-Legendre nodes in ``z``
    times ``2 * resolution + 2`` azimuths, exact for spherical harmonics of
    degree ``<= 2 * resolution + 1``.
    """
    if n not in SUPPORTED_DIMENSIONS:
        raise ValueError(f"unsupported dimension n={n}; supported: {SUPPORTED_DIMENSIONS}")
    if resolution < 4:
        raise ValueError(f"resolution must be >= 4, got {resolution}")

    if n == 2:
        N = 2 * resolution
        half = np.arange(resolution) * (math.pi / resolution)
        first = np.stack([np.cos(half), np.sin(half)], axis=1)
        nodes = np.concatenate([first, -first])
        weights = np.full(N, 2.0 * math.pi / N)
        antipode = np.concatenate([np.arange(resolution) + resolution, np.arange(resolution)])
    else:
        m = resolution + 1
        z, wz = np.polynomial.legendre.leggauss(m)
        z = 0.5 * (z - z[::-1])
        wz = 0.5 * (wz + wz[::-1])
        M = 2 * resolution + 2
        phi = np.arange(M // 2) * (2.0 * math.pi / M)
        c, s = np.cos(phi), np.sin(phi)
        c = np.concatenate([c, -c])
        s = np.concatenate([s, -s])
        rho = np.sqrt(np.clip(1.0 - z**2, 0.0, None))
        # node index = i * M + k; antipode of (i, k) is (m-1-i, k +- M/2)
        nodes = np.empty((m, M, 3))
        nodes[:, :, 0] = rho[:, None] * c[None, :]
        nodes[:, :, 1] = rho[:, None] * s[None, :]
        nodes[:, :, 2] = z[:, None]
        ii, kk = np.meshgrid(np.arange(m), np.arange(M), indexing="ij")
        anti = (m - 1 - ii) * M + (kk + M // 2) % M
        nodes = nodes.reshape(-1, 3)
        nodes /= np.linalg.norm(nodes, axis=1)[:, None]
        antipode = anti.reshape(-1)
        first = np.arange(nodes.shape[0]) < antipode
        nodes[antipode[first]] = -nodes[first]
        weights = np.repeat(wz, M) * (2.0 * math.pi / M)

    frame = tangent_frame(nodes)
    return SphereGrid(n, resolution, nodes, weights, frame, antipode)


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_directions(n: int, count: int, rng) -> np.ndarray:
    return unit(rng.standard_normal((count, n)))


# -- operators ---------------------------------------------------------------


def _points_and_frames(where):
    if isinstance(where, SphereGrid):
        return where.nodes, where.frame
    u = np.atleast_2d(np.asarray(where, dtype=float))
    return u, tangent_frame(u)


def field_jet(f, points) -> Jet:
    jet = getattr(f, "jet", None)
    if jet is None:
        raise NonSmoothError(f"{type(f).__name__} supports evaluation only; no analytic derivatives")
    return jet(points)


def gradient_from_jet(jet: Jet, u) -> np.ndarray:
    g = jet.grad
    radial = np.einsum("...i,...i->...", g, u)
    return g - radial[..., None] * u


def operator_from_jet(jet: Jet, u, frames) -> np.ndarray:
    """Matrix of ``A f = nabla^2 f + f delta`` in the given tangent frames.

    ``jet`` holds the derivatives of an arbitrary smooth extension ``F`` of
    ``f``; batch axes beyond the node axis are allowed.
    """
    H = jet.hess
    extra = H.ndim - 3
    E = frames.reshape(frames.shape[:1] + (1,) * extra + frames.shape[1:])
    uu = u.reshape(u.shape[:1] + (1,) * extra + u.shape[1:])
    A = np.einsum("...ai,...ab,...bk->...ik", E, H, E)
    shift = jet.value - np.einsum("...i,...i->...", jet.grad, uu)
    k = frames.shape[-1]
    return A + shift[..., None, None] * np.eye(k)


def spherical_gradient(f, where) -> np.ndarray:
    """Spherical gradient ``Df - <Df, u> u`` at grid nodes or given points."""
    u, _ = _points_and_frames(where)
    return gradient_from_jet(field_jet(f, u), u)


def hessian_operator(f, where) -> np.ndarray:
    """Per-node symmetric ``(n-1) x (n-1)`` matrices of ``A f``."""
    u, frames = _points_and_frames(where)
    return operator_from_jet(field_jet(f, u), u, frames)


def laplacian(f, where) -> np.ndarray:
    """Laplace-Beltrami operator via ``trace(A f) - (n-1) f``."""
    u, frames = _points_and_frames(where)
    jet = field_jet(f, u)
    A = operator_from_jet(jet, u, frames)
    return np.trace(A, axis1=-2, axis2=-1) - (u.shape[1] - 1) * jet.value


def symmetric_eigvals_2x2(A) -> np.ndarray:
    """Closed-form eigenvalues (ascending) of symmetric 2x2 matrices."""
    a = A[..., 0, 0]
    d = A[..., 1, 1]
    b = 0.5 * (A[..., 0, 1] + A[..., 1, 0])
    mean = 0.5 * (a + d)
    rad = np.hypot(0.5 * (a - d), b)
    return np.stack([mean - rad, mean + rad], axis=-1)


def operator_eigenvalues(A) -> np.ndarray:
    k = A.shape[-1]
    if k == 1:
        return A[..., 0, :].copy()
    if k == 2:
        return symmetric_eigvals_2x2(A)
    return np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2)))
