"""Real spherical harmonics with analytic jets, restricted to even degrees.

Harmonics are evaluated as regular solid harmonics through the stable
three-term recurrences

    (x + i y)^{m+1} = (x + i y)(x + i y)^m
    Q_{l+1}^m = ((2l+1) z Q_l^m - (l+m) r^2 Q_{l-1}^m) / (l-m+1)

run directly on jets, so values, gradients and Hessians come out of the same
arithmetic.  The returned jets are those of the 1-homogeneous extension
``r^{1-l} R_l^m(x)``.

Ordering convention: order ``m > 0`` is the cosine part, ``m < 0`` the sine
part, ``m = 0`` zonal.  In the plane the degree-``l`` pair is
``cos(l t)`` (``m = l``) and ``sin(l t)`` (``m = -l``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .jets import Jet
from .sphere import SphereGrid


def harmonic_labels(n: int, max_degree: int, even_only: bool = True) -> list[tuple[int, int]]:
    labels = []
    for l in range(max_degree + 1):
        if even_only and l % 2:
            continue
        if n == 2:
            labels.extend([(0, 0)] if l == 0 else [(l, l), (l, -l)])
        elif n == 3:
            labels.extend((l, m) for m in range(-l, l + 1))
        else:
            raise ValueError(f"unsupported dimension n={n}")
    return labels


def _log_norm(l: int, m: int) -> float:
    # log of N_lm * (2m-1)!! with N_lm the orthonormalisation constant
    am = abs(m)
    log_n = 0.5 * (math.log(2 * l + 1) - math.log(4 * math.pi) + math.lgamma(l - am + 1) - math.lgamma(l + am + 1))
    if am:
        log_n += 0.5 * math.log(2.0)
        log_n += math.lgamma(2 * am + 1) - am * math.log(2.0) - math.lgamma(am + 1)
    return log_n


def basis_jets(n: int, max_degree: int, points, even_only: bool = True) -> tuple[list, Jet]:
    """Jets of the orthonormal real harmonics at ``points`` (shape ``(P, n)``).

    Returns ``(labels, jet)``; the jet has batch shape ``(P, B)``.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    P = x.shape[0]
    labels = harmonic_labels(n, max_degree, even_only)
    X = Jet.coordinate(x, 0)
    Y = Jet.coordinate(x, 1)
    R2 = Jet.norm_squared(x)
    one = Jet.constant(1.0, (P,), n)

    C = [one]
    S = [Jet.constant(0.0, (P,), n)]
    for m in range(max_degree):
        C.append(X * C[m] - Y * S[m])
        S.append(X * S[m] + Y * C[m])

    radial = {}

    def radial_factor(l):
        if l not in radial:
            radial[l] = R2.power(0.5 * (1 - l))
        return radial[l]

    out = {}
    if n == 2:
        for l, m in labels:
            if l == 0:
                out[(0, 0)] = one * (1.0 / math.sqrt(2 * math.pi)) * radial_factor(0)
            else:
                part = C[l] if m > 0 else S[l]
                out[(l, m)] = part * (1.0 / math.sqrt(math.pi)) * radial_factor(l)
        return labels, Jet.stack([out[lab] for lab in labels], axis=-1)

    Z = Jet.coordinate(x, 2)
    wanted = set(labels)
    for m in range(max_degree + 1):
        q_prev = None
        q = one
        for l in range(m, max_degree + 1):
            if l > m:
                nxt = (2 * l - 1) * (Z * q)
                if q_prev is not None:
                    nxt = nxt - (l - 1 + m) * (R2 * q_prev)
                q_prev, q = q, nxt * (1.0 / (l - m))
            for sm in ((m,) if m == 0 else (m, -m)):
                if (l, sm) not in wanted:
                    continue
                part = C[m] if sm >= 0 else S[m]
                scale = math.exp(_log_norm(l, sm))
                out[(l, sm)] = (part * q) * scale * radial_factor(l)
    return labels, Jet.stack([out[lab] for lab in labels], axis=-1)


@dataclass(frozen=True)
class HarmonicExpansion:
    """Even real spherical-harmonic expansion on S^{n-1}.

    ``coeffs`` is aligned with ``harmonic_labels(n, max_degree)``.  Odd
    degrees have no slot, so evenness is structural.
    """

    n: int
    max_degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        expected = len(harmonic_labels(self.n, self.max_degree))
        if c.shape != (expected,):
            raise ValueError(f"expected {expected} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def labels(self):
        return harmonic_labels(self.n, self.max_degree)

    @classmethod
    def from_triples(cls, n: int, triples, max_degree: int | None = None) -> "HarmonicExpansion":
        """Build from ``(degree, order, value)`` triples; odd degrees are rejected."""
        triples = [(int(l), int(m), float(v)) for l, m, v in triples]
        for l, m, v in triples:
            if l % 2 and v != 0.0:
                raise ValueError(f"odd-degree harmonic ({l}, {m}) in an even expansion")
        if max_degree is None:
            max_degree = max([l for l, _, _ in triples] + [0])
        max_degree += max_degree % 2
        labels = harmonic_labels(n, max_degree)
        index = {lab: i for i, lab in enumerate(labels)}
        c = np.zeros(len(labels))
        for l, m, v in triples:
            if l % 2:
                continue
            if (l, m) not in index:
                raise ValueError(f"invalid harmonic label ({l}, {m}) for n={n}")
            c[index[(l, m)]] += v
        return cls(n, max_degree, c)

    @classmethod
    def constant(cls, n: int, value: float, max_degree: int = 0) -> "HarmonicExpansion":
        return cls.from_triples(n, [(0, 0, value * math.sqrt(_sphere_measure(n)))], max_degree)

    @classmethod
    def project(cls, grid: SphereGrid, values, max_degree: int) -> "HarmonicExpansion":
        """L2 projection of node-sampled values onto even harmonics."""
        labels, jet = basis_jets(grid.n, max_degree, grid.nodes)
        c = grid.integrate(jet.value * np.asarray(values, dtype=float)[:, None])
        return cls(grid.n, max_degree, c)

    def triples(self):
        return [(l, m, float(v)) for (l, m), v in zip(self.labels, self.coeffs) if v != 0.0]

    def jet(self, points) -> Jet:
        _, basis = basis_jets(self.n, self.max_degree, points)
        return basis.contract(self.coeffs)

    def __call__(self, points) -> np.ndarray:
        return self.jet(points).value

    def degree_block(self, l: int) -> np.ndarray:
        return np.array([c for (d, _), c in zip(self.labels, self.coeffs) if d == l])

    def scaled(self, t: float) -> "HarmonicExpansion":
        return HarmonicExpansion(self.n, self.max_degree, t * self.coeffs)

    def plus_constant(self, c: float) -> "HarmonicExpansion":
        out = self.coeffs.copy()
        out[0] += c * math.sqrt(_sphere_measure(self.n))
        return HarmonicExpansion(self.n, self.max_degree, out)

    def mean(self) -> float:
        return self.coeffs[0] / math.sqrt(_sphere_measure(self.n))


def _sphere_measure(n: int) -> float:
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
