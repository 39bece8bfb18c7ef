"""Basis families on an interval, Gram matrices and orthonormal frames.

Four families are available, all pre-normalized to unit L2 norm:

``trig``
    ``1, sin t, cos t, sin 2t, cos 2t, ...`` with ``t = 2 pi (x - a) / L``.
    Sine before cosine: with cosine first, an even-sized set ends in
    ``cos(m t)`` whose Volterra image ``sin(m t)/m`` is orthogonal to the same
    set, and the Galerkin matrix is exactly singular.
``legendre``
    Shifted Legendre polynomials in degree order.
``haar``
    Scaling function first, then ``psi_{j,m}`` in dyadic order
    (``j = 0, 1, ...``; ``m = 0 .. 2^j - 1``).
``pwc``
    Indicators of ``n`` equal cells. Member ``k`` depends on ``n``, so this
    family is only nested along ``n = 2^p``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NumericalError, ValidationError
from .numerics import FunctionHandle, Interval, QuadratureRule, pairing_matrix

__all__ = [
    "FAMILY_NAMES",
    "BasisFamily",
    "BasisSet",
    "OrthonormalFrame",
    "basis_member",
    "basis_set",
    "gram_matrix",
    "orthonormal_frame",
    "project",
    "reconstruct",
    "PD_TOLERANCE",
]

FAMILY_NAMES = ("trig", "legendre", "haar", "pwc")
_LONG_NAMES = {
    "trigonometric": "trig",
    "legendre": "legendre",
    "haar": "haar",
    "piecewiseconstant": "pwc",
    "piecewise-constant": "pwc",
}

# Cholesky diagonal ratio below which a Gram matrix counts as singular
PD_TOLERANCE = 1e-6


def _unit(x: np.ndarray, d: Interval) -> np.ndarray:
    return (x - d.a) / d.length


def _trig_block(x, n, d):
    t = 2.0 * np.pi * _unit(x, d)
    out = np.empty((len(x), n))
    out[:, 0] = 1.0 / np.sqrt(d.length)
    c = np.sqrt(2.0 / d.length)
    for k in range(2, n + 1):
        m = k // 2
        out[:, k - 1] = c * (np.sin(m * t) if k % 2 == 0 else np.cos(m * t))
    return out


def _legendre_block(x, n, d):
    t = 2.0 * _unit(x, d) - 1.0
    out = np.empty((len(x), n))
    out[:, 0] = 1.0
    if n > 1:
        out[:, 1] = t
    for j in range(1, n - 1):
        out[:, j + 1] = ((2 * j + 1) * t * out[:, j] - j * out[:, j - 1]) / (j + 1)
    out *= np.sqrt((2 * np.arange(n) + 1) / d.length)
    return out


def _haar_index(k: int) -> Tuple[int, int]:
    """Level and shift of the k-th Haar member, k >= 2."""
    idx = k - 1
    j = idx.bit_length() - 1
    return j, idx - (1 << j)


def _haar_block(x, n, d):
    u = _unit(x, d)
    out = np.empty((len(x), n))
    out[:, 0] = 1.0 / np.sqrt(d.length)
    for k in range(2, n + 1):
        j, m = _haar_index(k)
        halves = 1 << (j + 1)
        cell = np.clip(np.floor(u * halves), 0, halves - 1).astype(int)
        val = np.where(cell == 2 * m, 1.0, np.where(cell == 2 * m + 1, -1.0, 0.0))
        out[:, k - 1] = val * np.sqrt((1 << j) / d.length)
    return out


def _pwc_block(x, n, d):
    cell = np.clip(np.floor(_unit(x, d) * n), 0, n - 1).astype(int)
    out = np.zeros((len(x), n))
    out[np.arange(len(x)), cell] = np.sqrt(n / d.length)
    return out


_BLOCKS = {
    "trig": _trig_block,
    "legendre": _legendre_block,
    "haar": _haar_block,
    "pwc": _pwc_block,
}


def _family_breaks(kind: str, n: int, d: Interval) -> Tuple[float, ...]:
    if kind == "pwc":
        return tuple(d.a + d.length * i / n for i in range(1, n))
    if kind == "haar" and n > 1:
        j, _ = _haar_index(n)
        halves = 1 << (j + 1)
        return tuple(d.a + d.length * i / halves for i in range(1, halves))
    return ()


@dataclass(frozen=True)
class BasisFamily:
    kind: str
    domain: Interval

    def __post_init__(self):
        kind = _LONG_NAMES.get(self.kind.lower(), self.kind.lower())
        if kind not in FAMILY_NAMES:
            raise ValidationError(
                f"unknown basis family {self.kind!r}; valid names: {', '.join(FAMILY_NAMES)}"
            )
        object.__setattr__(self, "kind", kind)

    def __str__(self):
        return f"{self.kind}{self.domain}"


def basis_member(family: BasisFamily, k: int, n: Optional[int] = None) -> FunctionHandle:
    """The ``k``-th (1-based) unit-norm member of ``family``.

    ``n`` is required for ``pwc``, whose members depend on the cell count.
    """
    if k < 1:
        raise ValidationError(f"basis index must be >= 1, got {k}")
    if family.kind == "pwc":
        if n is None or n < k:
            raise ValidationError("pwc members need the cell count n >= k")
        size = n
    else:
        size = k
    block = _BLOCKS[family.kind]
    d = family.domain
    return FunctionHandle(
        lambda x: block(x, size, d)[:, k - 1],
        d,
        _family_breaks(family.kind, size, d),
        label=f"{family.kind}[{k}]",
    )


class BasisSet:
    """The first ``n`` members of a family, or an explicit list of functions.

    ``evaluate(x)`` returns the ``(len(x), n)`` block of member values.
    """

    def __init__(
        self,
        block: Callable[[np.ndarray], np.ndarray],
        n: int,
        domain: Interval,
        breaks: Sequence[float] = (),
        family: Optional[BasisFamily] = None,
        label: str = "",
    ):
        if n < 1:
            raise ValidationError(f"basis size must be >= 1, got {n}")
        self._block = block
        self.n = int(n)
        self.domain = domain
        self.breaks = tuple(breaks)
        self.family = family
        self.label = label or (str(family) if family else "custom")

    @classmethod
    def from_family(cls, family: BasisFamily, n: int) -> "BasisSet":
        if n < 1:
            raise ValidationError(f"basis size must be >= 1, got {n}")
        block, d = _BLOCKS[family.kind], family.domain
        return cls(
            lambda x: block(x, n, d),
            n,
            d,
            _family_breaks(family.kind, n, d),
            family=family,
            label=f"{family.kind}(n={n})",
        )

    @classmethod
    def from_functions(cls, functions: Sequence[FunctionHandle], label: str = "custom") -> "BasisSet":
        functions = list(functions)
        if not functions:
            raise ValidationError("basis needs at least one function")
        d = functions[0].domain
        for f in functions:
            if not f.domain.same_as(d):
                raise ValidationError("all basis functions must share one domain")
        breaks = sorted({t for f in functions for t in f.breaks})
        return cls(
            lambda x: np.column_stack([f(x) for f in functions]),
            len(functions),
            d,
            breaks,
            label=label,
        )

    def evaluate(self, x) -> np.ndarray:
        return np.asarray(self._block(np.asarray(x, dtype=float)), dtype=complex)

    @property
    def members(self) -> List[FunctionHandle]:
        return [self.member(k) for k in range(1, self.n + 1)]

    def member(self, k: int) -> FunctionHandle:
        if not 1 <= k <= self.n:
            raise ValidationError(f"member index {k} outside 1..{self.n}")
        return FunctionHandle(lambda x: self.evaluate(x)[:, k - 1], self.domain, self.breaks,
                              label=f"{self.label}[{k}]")

    def as_block(self) -> FunctionHandle:
        return FunctionHandle(self.evaluate, self.domain, self.breaks, label=self.label)

    def __repr__(self):
        return f"BasisSet({self.label}, n={self.n}, domain={self.domain})"


def basis_set(kind: str, domain: Interval, n: int) -> BasisSet:
    return BasisSet.from_family(BasisFamily(kind, domain), n)


def _check_rule(basis: BasisSet, rule: QuadratureRule):
    if not basis.domain.same_as(rule.interval):
        raise ValidationError(f"basis lives on {basis.domain}, rule on {rule.interval}")


def _cholesky(gram: np.ndarray, n: int) -> np.ndarray:
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Gram matrix is not positive definite at n={n}") from exc
    d = np.abs(np.diag(L))
    if d.min() < PD_TOLERANCE * d.max():
        raise NumericalError(
            f"Gram matrix numerically singular at n={n}: "
            f"Cholesky diagonal ratio {d.min() / d.max():.3e} < {PD_TOLERANCE:g}"
        )
    return L


def gram_matrix(basis: BasisSet, rule: QuadratureRule, check: bool = True) -> np.ndarray:
    """``G[i, j] = <xi_j, xi_i>``, Hermitian by construction."""
    _check_rule(basis, rule)
    V = basis.evaluate(rule.nodes)
    G = pairing_matrix(V, V, rule)
    G = 0.5 * (G + G.conj().T)
    if check:
        _cholesky(G, basis.n)
    return G


@dataclass(frozen=True, eq=False)
class OrthonormalFrame:
    """Orthonormalized basis ``xi_hat = xi L^{-*}`` with ``G = L L^*``.

    ``coeffs`` holds ``L^{-*}``: column ``j`` lists the raw-member weights of
    ``xi_hat_j``.
    """

    basis: BasisSet
    gram: np.ndarray
    cholesky_factor: np.ndarray
    coeffs: np.ndarray

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def domain(self) -> Interval:
        return self.basis.domain

    @property
    def breaks(self) -> Tuple[float, ...]:
        return self.basis.breaks

    def evaluate(self, x) -> np.ndarray:
        return self.basis.evaluate(x) @ self.coeffs

    def as_block(self) -> FunctionHandle:
        return FunctionHandle(self.evaluate, self.domain, self.breaks, label=f"frame[{self.basis.label}]")

    def member(self, i: int) -> FunctionHandle:
        if not 1 <= i <= self.n:
            raise ValidationError(f"frame index {i} outside 1..{self.n}")
        col = self.coeffs[:, i - 1]
        return FunctionHandle(lambda x: self.basis.evaluate(x) @ col, self.domain, self.breaks,
                              label=f"frame[{self.basis.label}][{i}]")


def orthonormal_frame(basis: BasisSet, rule: QuadratureRule) -> OrthonormalFrame:
    G = gram_matrix(basis, rule, check=False)
    L = _cholesky(G, basis.n)
    C = solve_triangular(L.conj().T, np.eye(basis.n), lower=False)
    for arr in (G, L, C):
        arr.setflags(write=False)
    return OrthonormalFrame(basis, G, L, C)


def project(f: FunctionHandle, frame: OrthonormalFrame, rule: QuadratureRule) -> np.ndarray:
    """Coordinates ``c_i = <f, xi_hat_i>`` of the best L2 approximation."""
    if not f.domain.same_as(frame.domain):
        raise ValidationError(f"function lives on {f.domain}, frame on {frame.domain}")
    _check_rule(frame.basis, rule)
    return pairing_matrix(f(rule.nodes), frame.evaluate(rule.nodes), rule)[:, 0]


def reconstruct(coeffs, frame: OrthonormalFrame) -> FunctionHandle:
    c = np.asarray(coeffs, dtype=complex)
    if c.shape != (frame.n,):
        raise ValidationError(f"expected {frame.n} coefficients, got shape {c.shape}")
    w = frame.coeffs @ c
    return FunctionHandle(lambda x: frame.basis.evaluate(x) @ w, frame.domain, frame.breaks,
                          label=f"sum over frame[{frame.basis.label}]")
