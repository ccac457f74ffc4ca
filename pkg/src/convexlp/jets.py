"""Second-order jets of scalar functions on R^n.

A :class:`Jet` carries the value, ambient gradient and ambient Hessian of a
function at a batch of points.  Arithmetic on jets applies the product and
chain rules, so derivatives of composite expressions (p-means of support
functions, ``h * (1 + t z)**(1/p)``, ...) stay analytic.

Array layout: ``value`` has shape ``S``, ``grad`` has ``S + (n,)`` and
``hess`` has ``S + (n, n)``, where ``S`` is any batch shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Jet:
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    @property
    def n(self) -> int:
        return self.grad.shape[-1]

    @classmethod
    def constant(cls, c, shape, n):
        value = np.full(shape, float(c))
        return cls(value, np.zeros(shape + (n,)), np.zeros(shape + (n, n)))

    @classmethod
    def coordinate(cls, x, i):
        """Jet of ``x -> x_i`` at points ``x`` of shape ``(P, n)``."""
        x = np.asarray(x, dtype=float)
        P, n = x.shape
        grad = np.zeros((P, n))
        grad[:, i] = 1.0
        return cls(x[:, i].copy(), grad, np.zeros((P, n, n)))

    @classmethod
    def norm_squared(cls, x):
        x = np.asarray(x, dtype=float)
        P, n = x.shape
        hess = np.broadcast_to(2.0 * np.eye(n), (P, n, n)).copy()
        return cls(np.einsum("pi,pi->p", x, x), 2.0 * x, hess)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.value + other.value, self.grad + other.grad, self.hess + other.hess)
        return Jet(self.value + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.value, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            u, v = self, other
            gu, gv = u.grad, v.grad
            cross = gu[..., :, None] * gv[..., None, :]
            hess = (
                u.value[..., None, None] * v.hess
                + v.value[..., None, None] * u.hess
                + cross
                + np.swapaxes(cross, -1, -2)
            )
            grad = u.value[..., None] * gv + v.value[..., None] * gu
            return Jet(u.value * v.value, grad, hess)
        c = np.asarray(other, dtype=float)
        return Jet(self.value * c, self.grad * c[..., None], self.hess * c[..., None, None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.power(-1.0)
        return self * (1.0 / np.asarray(other, dtype=float))

    # -- composition ------------------------------------------------------

    def apply(self, f0, f1, f2) -> "Jet":
        """Compose with a scalar function given its value and two derivatives
        evaluated at ``self.value``."""
        g = self.grad
        outer = g[..., :, None] * g[..., None, :]
        hess = f1[..., None, None] * self.hess + f2[..., None, None] * outer
        return Jet(f0, f1[..., None] * g, hess)

    def power(self, a: float) -> "Jet":
        v = self.value
        if a == 1.0:
            return self
        if a == 0.0:
            return Jet.constant(1.0, v.shape, self.n)
        f0 = v**a
        f1 = a * v ** (a - 1.0)
        f2 = a * (a - 1.0) * v ** (a - 2.0)
        return self.apply(f0, f1, f2)

    def log(self) -> "Jet":
        v = self.value
        return self.apply(np.log(v), 1.0 / v, -1.0 / v**2)

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self.apply(e, e, e)

    def abs(self) -> "Jet":
        s = np.sign(self.value)
        return Jet(np.abs(self.value), s[..., None] * self.grad, s[..., None, None] * self.hess)

    # -- batching ---------------------------------------------------------

    def __getitem__(self, idx):
        return Jet(self.value[idx], self.grad[idx], self.hess[idx])

    @staticmethod
    def stack(jets, axis=-1) -> "Jet":
        """Stack jets along a new batch axis (placed before the derivative axes)."""
        ndim = jets[0].value.ndim
        ax = axis if axis >= 0 else ndim + 1 + axis
        return Jet(
            np.stack([j.value for j in jets], axis=ax),
            np.stack([j.grad for j in jets], axis=ax),
            np.stack([j.hess for j in jets], axis=ax),
        )

    def contract(self, coeffs) -> "Jet":
        """Linear combination over the trailing batch axis."""
        c = np.asarray(coeffs, dtype=float)
        return Jet(
            self.value @ c,
            np.einsum("...bi,b->...i", self.grad, c),
            np.einsum("...bij,b->...ij", self.hess, c),
        )


def p_mean(a: Jet, b: Jet, p: float, lam: float) -> Jet:
    """Jet of ``((1-lam) a**p + lam b**p)**(1/p)``; geometric mean for ``p == 0``."""
    if p == 0.0:
        return a.power(1.0 - lam) * b.power(lam)
    return ((1.0 - lam) * a.power(p) + lam * b.power(p)).power(1.0 / p)


def p_mean_values(a, b, p: float, lam: float):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if p == 0.0:
        return a ** (1.0 - lam) * b**lam
    return ((1.0 - lam) * a**p + lam * b**p) ** (1.0 / p)
