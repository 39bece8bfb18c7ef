"""Interval geometry, composite Gauss-Legendre quadrature, L2 pairings and a
checked SVD.

Everything here works on complex values; real inputs are embedded. Function
handles are vectorized: ``f(x)`` takes a 1-D array of points and returns either
an array of the same length or a block of shape ``(len(x), m)`` holding ``m``
functions at once. The block form is what makes assembly of dense Galerkin
matrices affordable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import NumericalError, ValidationError

__all__ = [
    "Interval",
    "QuadratureRule",
    "FunctionHandle",
    "make_gauss_rule",
    "default_rule",
    "inner_product",
    "l2_norm",
    "pairing_matrix",
    "svd",
    "DEFAULT_POINTS_PER_PANEL",
]

DEFAULT_POINTS_PER_PANEL = 8
_BREAK_TOL = 1e-12


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
            raise ValidationError(f"interval needs finite a < b, got ({a}, {b})")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return self.b - self.a

    def same_as(self, other: "Interval") -> bool:
        tol = 1e-12 * max(1.0, abs(self.a), abs(self.b))
        return abs(self.a - other.a) <= tol and abs(self.b - other.b) <= tol

    def __str__(self):
        return f"({self.a:g}, {self.b:g})"


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights on an interval.

    ``order`` is the polynomial degree integrated exactly on every panel.
    """

    interval: Interval
    nodes: np.ndarray
    weights: np.ndarray
    order: int
    panel_edges: np.ndarray = field(repr=False, default=None)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Sum ``w_i * values[i]`` over the leading axis."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def _merge_edges(interval: Interval, panels: int, breaks: Sequence[float]) -> np.ndarray:
    edges = np.linspace(interval.a, interval.b, panels + 1)
    inner = [float(t) for t in breaks if interval.a < t < interval.b]
    if inner:
        edges = np.unique(np.concatenate([edges, inner]))
        # drop slivers produced by breaks that coincide with uniform edges up to rounding
        tol = _BREAK_TOL * interval.length
        keep = np.concatenate([[True], np.diff(edges) > tol])
        keep[-1] = True
        edges = edges[keep]
        edges[-1] = interval.b
    return edges


def make_gauss_rule(
    interval: Interval,
    points_per_panel: int,
    panels: int,
    breaks: Sequence[float] = (),
) -> QuadratureRule:
    """Composite Gauss-Legendre rule on ``panels`` equal panels.

    Extra ``breaks`` (discontinuities of the integrands) are inserted as
    additional panel edges so that no panel straddles a jump.

    Examples
    --------
    >>> r = make_gauss_rule(Interval(0, 1), 1, 1)
    >>> r.nodes, r.weights
    (array([0.5]), array([1.]))
    """
    if int(points_per_panel) != points_per_panel or points_per_panel < 1:
        raise ValidationError(f"points_per_panel must be a positive integer, got {points_per_panel}")
    if int(panels) != panels or panels < 1:
        raise ValidationError(f"panels must be a positive integer, got {panels}")
    points_per_panel, panels = int(points_per_panel), int(panels)

    t, w = np.polynomial.legendre.leggauss(points_per_panel)
    edges = _merge_edges(interval, panels, breaks)
    left, width = edges[:-1], np.diff(edges)
    nodes = left[:, None] + 0.5 * width[:, None] * (t[None, :] + 1.0)
    weights = 0.5 * width[:, None] * w[None, :]
    return QuadratureRule(
        interval=interval,
        nodes=_frozen(nodes.ravel()),
        weights=_frozen(weights.ravel()),
        order=2 * points_per_panel - 1,
        panel_edges=_frozen(edges),
    )


def default_rule(interval: Interval, n: int, *handles: "FunctionHandle") -> QuadratureRule:
    """8-point composite rule with ``4 n`` panels, aligned to the breaks of ``handles``.

    A handle with an exact expansion of length ``K`` raises the panel count to
    ``4 K`` so its highest mode is resolved as well as the basis is.
    """
    breaks = set()
    for h in handles:
        breaks.update(h.breaks)
        if h.expansion is not None:
            n = max(n, len(h.expansion[1]))
    return make_gauss_rule(interval, DEFAULT_POINTS_PER_PANEL, 4 * max(int(n), 1), sorted(breaks))


@dataclass(frozen=True, eq=False)
class FunctionHandle:
    """A complex-valued function (or block of functions) on an interval.

    Parameters
    ----------
    func : callable
        Vectorized map from a 1-D float array to values.
    domain : Interval
    breaks : tuple of float
        Points where the function (or a low derivative) is not smooth.
        Quadrature rules built for this handle put panel edges there.
    label : str
        Human readable description.
    expansion : (str, ndarray), optional
        Exact coefficients with respect to a named orthonormal system
        (see :class:`pgdiverge.operators.SingularSystem`). Used to bypass
        quadrature where its rounding floor would be amplified.
    """

    func: Callable[[np.ndarray], np.ndarray]
    domain: Interval
    breaks: Tuple[float, ...] = ()
    label: str = ""
    expansion: Optional[Tuple[str, np.ndarray]] = None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        out = np.asarray(self.func(np.atleast_1d(x)), dtype=complex)
        if out.ndim == 0:
            out = np.full(np.atleast_1d(x).shape, out)
        return out[0] if scalar else out

    # linear combinations keep breaks and, when compatible, exact expansions

    def _combine(self, other: "FunctionHandle", alpha: complex, beta: complex) -> "FunctionHandle":
        if not self.domain.same_as(other.domain):
            raise ValidationError(f"cannot combine functions on {self.domain} and {other.domain}")
        f, g = self.func, other.func
        expansion = None
        if self.expansion and other.expansion and self.expansion[0] == other.expansion[0]:
            c1, c2 = self.expansion[1], other.expansion[1]
            m = max(len(c1), len(c2))
            c = np.zeros(m, dtype=complex)
            c[: len(c1)] += alpha * c1
            c[: len(c2)] += beta * c2
            expansion = (self.expansion[0], c)
        return FunctionHandle(
            lambda x: alpha * np.asarray(f(x), dtype=complex) + beta * np.asarray(g(x), dtype=complex),
            self.domain,
            tuple(sorted(set(self.breaks) | set(other.breaks))),
            label=f"({self.label} + {other.label})",
            expansion=expansion,
        )

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, alpha):
        if not np.isscalar(alpha):
            return NotImplemented
        f = self.func
        expansion = None if self.expansion is None else (self.expansion[0], alpha * self.expansion[1])
        return FunctionHandle(
            lambda x: alpha * np.asarray(f(x), dtype=complex),
            self.domain,
            self.breaks,
            label=f"{alpha}*{self.label}",
            expansion=expansion,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    @classmethod
    def constant(cls, value: complex, domain: Interval) -> "FunctionHandle":
        return cls(lambda x: np.full(x.shape, value, dtype=complex), domain, label=f"{value}")

    @classmethod
    def zero(cls, domain: Interval) -> "FunctionHandle":
        return cls.constant(0.0, domain)


def _check_finite(values: np.ndarray, nodes: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        rows = bad.reshape(len(nodes), -1).any(axis=1)
        node = nodes[np.argmax(rows)]
        raise NumericalError(f"{what} is not finite at quadrature node x={node!r}")


def _values(f: FunctionHandle, rule: QuadratureRule) -> np.ndarray:
    if not f.domain.same_as(rule.interval):
        raise ValidationError(f"function lives on {f.domain}, rule on {rule.interval}")
    v = f(rule.nodes)
    _check_finite(v, rule.nodes, f.label or "function")
    return v


def inner_product(f: FunctionHandle, g: FunctionHandle, rule: QuadratureRule) -> complex:
    """L2 pairing ``sum_i w_i f(x_i) conj(g(x_i))``, conjugate-linear in ``g``."""
    return complex(rule.integrate(_values(f, rule) * np.conj(_values(g, rule))))


def l2_norm(f: FunctionHandle, rule: QuadratureRule) -> float:
    v = _values(f, rule)
    return float(np.sqrt(rule.integrate(np.abs(v) ** 2)))


def pairing_matrix(f_values: np.ndarray, g_values: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """Matrix of pairings ``M[i, j] = <f_j, g_i>`` from sampled blocks.

    ``f_values`` has shape ``(nodes, m)`` and ``g_values`` shape ``(nodes, p)``;
    the result is ``(p, m)``.
    """
    f_values = np.asarray(f_values, dtype=complex).reshape(len(rule.nodes), -1)
    g_values = np.asarray(g_values, dtype=complex).reshape(len(rule.nodes), -1)
    _check_finite(f_values, rule.nodes, "block")
    _check_finite(g_values, rule.nodes, "block")
    return np.conj(g_values).T @ (rule.weights[:, None] * f_values)


def svd(M) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``M = U diag(S) V^*`` with nonincreasing ``S``.

    Returns ``V`` itself (not its adjoint). Raises :class:`NumericalError`
    for non-finite input or if LAPACK fails to converge.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or 0 in M.shape:
        raise ValidationError(f"svd needs a nonempty 2-D matrix, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise NumericalError("svd input has non-finite entries")
    try:
        U, S, Vh = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"svd did not converge: {exc}") from exc
    return U, S, Vh.conj().T
