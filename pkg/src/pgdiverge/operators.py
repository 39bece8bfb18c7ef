"""Bounded linear operators with apply maps and analytic singular systems.

Catalog:

* :func:`volterra_operator` -- ``(A phi)(x) = int_a^x phi(t) dt``.
* :func:`symm_circle_operator` -- Symm's logarithmic single-layer operator on
  a circle of given radius, applied through its Fourier diagonalization.
* :func:`backward_heat_operator` -- the backward heat kernel on ``(0, pi)``
  truncated after ``series_cap`` modes.
* :func:`synthetic_diagonal_operator` -- diagonal action on the trigonometric
  frame, exact by construction.

``apply`` accepts block handles (values of shape ``(len(x), m)``) as well as
scalar ones, so a whole basis can be mapped in one call.
"""
from __future__ import annotations

import math
import threading
import zlib
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .bases import BasisSet, _trig_block
from .errors import ValidationError
from .numerics import (
    DEFAULT_POINTS_PER_PANEL,
    FunctionHandle,
    Interval,
    QuadratureRule,
    inner_product,
    make_gauss_rule,
)

__all__ = [
    "SingularSystem",
    "OperatorSpec",
    "volterra_operator",
    "symm_circle_operator",
    "backward_heat_operator",
    "synthetic_diagonal_operator",
    "sigma_sequence",
    "SIGMA_GENERATORS",
    "adjoint_from_singular",
    "spectral_function",
    "OPERATOR_NAMES",
]

OPERATOR_NAMES = ("volterra", "symm", "heat", "diagonal")
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class SingularSystem:
    """``(sigma_k; v_k, u_k)`` with ``A v_k = sigma_k u_k``, indices from 1.

    ``sigma_fn(ks)`` maps an integer array to singular values; ``u_fn(x, ks)``
    and ``v_fn(x, ks)`` return ``(len(x), len(ks))`` blocks. ``count`` is the
    rank of the implemented operator (``None`` if infinite).

    ``key`` names the range-side system; a :class:`FunctionHandle` whose
    ``expansion`` carries this key stores exact coefficients ``<b, u_k>``.
    """

    key: str
    domain: Interval
    range: Interval
    sigma_fn: Callable[[np.ndarray], np.ndarray]
    u_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    v_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    complete_range_side: bool
    count: Optional[int] = None

    def _ks(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValidationError(f"need at least one singular index, got {n}")
        if self.count is not None and n > self.count:
            raise ValidationError(f"singular system has only {self.count} modes, asked for {n}")
        return np.arange(1, n + 1)

    def sigmas(self, n: int) -> np.ndarray:
        return np.asarray(self.sigma_fn(self._ks(n)), dtype=float)

    def sigma(self, k: int) -> float:
        return float(self.sigmas(k)[-1])

    def _member(self, fn, interval, k, side, expansion=None) -> FunctionHandle:
        self._ks(k)
        ks = np.array([k])
        return FunctionHandle(lambda x: fn(x, ks)[:, 0], interval, label=f"{self.key}.{side}[{k}]",
                              expansion=expansion)

    def u(self, k: int) -> FunctionHandle:
        """``u_k``, carrying its (unit-vector) expansion in this system."""
        e = np.zeros(k, dtype=complex)
        e[-1] = 1.0
        return self._member(self.u_fn, self.range, k, "u", (self.key, e))

    def v(self, k: int) -> FunctionHandle:
        return self._member(self.v_fn, self.domain, k, "v")

    def basis(self, side: str, n: int) -> BasisSet:
        """The first ``n`` singular functions of one side as a :class:`BasisSet`."""
        if side not in ("u", "v"):
            raise ValidationError(f"side must be 'u' or 'v', got {side!r}")
        ks = self._ks(n)
        fn = self.u_fn if side == "u" else self.v_fn
        interval = self.range if side == "u" else self.domain
        return BasisSet(lambda x: fn(x, ks), n, interval, label=f"{self.key}.{side}(n={n})")


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    name: str
    domain_interval: Interval
    range_interval: Interval
    apply_fn: Callable[[FunctionHandle], FunctionHandle]
    singular: Optional[SingularSystem] = None
    params: Dict[str, object] = field(default_factory=dict)

    def apply(self, f: FunctionHandle) -> FunctionHandle:
        if not f.domain.same_as(self.domain_interval):
            raise ValidationError(
                f"{self.name}: argument lives on {f.domain}, operator domain is {self.domain_interval}"
            )
        return self.apply_fn(f)

    __call__ = apply

    def describe(self) -> str:
        extra = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}({extra})" if extra else self.name


def spectral_function(system: SingularSystem, coeffs: Sequence[complex], label: str = "") -> FunctionHandle:
    """``b = sum_k c_k u_k`` carrying its exact coefficients."""
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim != 1 or len(c) == 0:
        raise ValidationError("need a nonempty coefficient list")
    ks = system._ks(len(c))
    return FunctionHandle(
        lambda x: system.u_fn(x, ks) @ c,
        system.range,
        label=label or f"sum c_k {system.key}.u_k",
        expansion=(system.key, c),
    )


class _Lazy:
    """Compute-once cache; the computed value is immutable."""

    def __init__(self, fn):
        self._fn = fn
        self._lock = threading.Lock()
        self._value = None
        self._done = False

    def __call__(self):
        if not self._done:
            with self._lock:
                if not self._done:
                    self._value = self._fn()
                    self._done = True
        return self._value


def _coefficients(f: FunctionHandle, basis_fn, n: int, rule: QuadratureRule) -> np.ndarray:
    """``<f, e_k>`` for a block or scalar ``f``; result shape ``(n,) + trailing``."""
    vals = f(rule.nodes)
    e = basis_fn(rule.nodes)
    wf = rule.weights.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals
    return np.tensordot(np.conj(e), wf, axes=(0, 0))


def _spectral_apply(
    name: str,
    domain: Interval,
    sigmas: np.ndarray,
    basis_fn,
    key: str,
    panels: int,
) -> Callable[[FunctionHandle], FunctionHandle]:
    """Apply ``sum_k sigma_k <f, e_k> e_k`` with ``e`` orthonormal on ``domain``."""
    n = len(sigmas)

    def apply(f: FunctionHandle) -> FunctionHandle:
        if f.expansion is not None and f.expansion[0] == key:
            c = np.zeros(n, dtype=complex)
            m = min(n, len(f.expansion[1]))
            c[:m] = f.expansion[1][:m]
            out = sigmas * c
            return FunctionHandle(lambda x: basis_fn(x) @ out, domain, label=f"{name}({f.label})",
                                  expansion=(key, out))
        rule = make_gauss_rule(domain, DEFAULT_POINTS_PER_PANEL, panels, f.breaks)
        coeffs = _Lazy(lambda: _scale(sigmas, _coefficients(f, basis_fn, n, rule)))

        def image(x):
            c = coeffs()
            return np.tensordot(basis_fn(x), c, axes=(1, 0))

        return FunctionHandle(image, domain, label=f"{name}({f.label})")

    return apply


def _scale(sigmas: np.ndarray, c: np.ndarray) -> np.ndarray:
    return sigmas.reshape((-1,) + (1,) * (c.ndim - 1)) * c


# ---------------------------------------------------------------- Volterra


def _volterra_apply(interval: Interval, panels: int, points: int):
    t, w = np.polynomial.legendre.leggauss(points)
    chunk = 512

    def apply(f: FunctionHandle) -> FunctionHandle:
        edges = make_gauss_rule(interval, 1, panels, f.breaks).panel_edges
        P = len(edges) - 1

        def prefix():
            left, width = edges[:-1], np.diff(edges)
            nodes = (left[:, None] + 0.5 * width[:, None] * (t + 1.0)).ravel()
            vals = f(nodes)
            vals = vals.reshape((P, points) + vals.shape[1:])
            ww = (0.5 * width[:, None] * w).reshape((P, points) + (1,) * (vals.ndim - 2))
            per_panel = (ww * vals).sum(axis=1)
            zero = np.zeros((1,) + per_panel.shape[1:], dtype=complex)
            return np.concatenate([zero, np.cumsum(per_panel, axis=0)])

        cum = _Lazy(prefix)

        def image(x):
            x = np.asarray(x, dtype=float)
            if ((x < interval.a - 1e-12 * interval.length) | (x > interval.b + 1e-12 * interval.length)).any():
                raise ValidationError(f"Volterra image evaluated outside {interval}")
            c = cum()
            idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, P - 1)
            out = np.empty((len(x),) + c.shape[1:], dtype=complex)
            for s in range(0, len(x), chunk):
                xs, i = x[s:s + chunk], idx[s:s + chunk]
                left = edges[i]
                h = xs - left
                sub = (left[:, None] + 0.5 * h[:, None] * (t + 1.0)).ravel()
                vals = f(sub)
                vals = vals.reshape((len(xs), points) + vals.shape[1:])
                ww = (0.5 * h[:, None] * w).reshape((len(xs), points) + (1,) * (vals.ndim - 2))
                out[s:s + chunk] = c[i] + (ww * vals).sum(axis=1)
            return out

        return FunctionHandle(image, interval, f.breaks, label=f"V({f.label})")

    return apply


def volterra_operator(interval: Interval = Interval(0.0, TWO_PI), panels: int = 1024,
                      points_per_panel: int = DEFAULT_POINTS_PER_PANEL) -> OperatorSpec:
    """Integration from the left endpoint: ``(A phi)(x) = int_a^x phi(t) dt``.

    The image is evaluated by a composite Gauss sum over whole panels to the
    left of ``x`` plus a sub-quadrature on the partial panel ``[edge, x]``.
    Breaks of the argument are inserted as panel edges.

    Singular system on ``(a, a + L)``::

        sigma_k = L / ((k - 1/2) pi)
        v_k(x)  = sqrt(2/L) cos((k - 1/2) pi (x - a) / L)
        u_k(x)  = sqrt(2/L) sin((k - 1/2) pi (x - a) / L)
    """
    L, a = interval.length, interval.a
    amp = math.sqrt(2.0 / L)

    def freq(ks):
        return (np.asarray(ks) - 0.5) * math.pi / L

    system = SingularSystem(
        key=f"volterra{interval}",
        domain=interval,
        range=interval,
        sigma_fn=lambda ks: 1.0 / freq(ks),
        u_fn=lambda x, ks: amp * np.sin(np.outer(np.asarray(x) - a, freq(ks))),
        v_fn=lambda x, ks: amp * np.cos(np.outer(np.asarray(x) - a, freq(ks))),
        complete_range_side=True,
    )
    return OperatorSpec(
        name="volterra",
        domain_interval=interval,
        range_interval=interval,
        apply_fn=_volterra_apply(interval, panels, points_per_panel),
        singular=system,
        params={"interval": str(interval)},
    )


# ------------------------------------------------------------------- Symm

# |radius - 1| must exceed this, otherwise the constant mode is (nearly) annihilated
SYMM_RADIUS_GAP = 1e-3


def _symm_modes(radius: float, cap: int):
    """Singular triples sorted by nonincreasing sigma.

    Each entry is ``(sigma, m, kind)`` with ``kind`` 0 (constant), 1 (cos) or
    2 (sin); cos precedes sin for equal frequency.
    """
    s0 = 2.0 * abs(math.log(radius))
    modes = [(1.0 / m, m, kind) for m in range(1, cap + 1) for kind in (1, 2)]
    pos = next((i for i, (s, _, _) in enumerate(modes) if s < s0), len(modes))
    modes.insert(pos, (s0, 0, 0))
    return modes


def symm_circle_operator(radius: float = 2.0, mode_cap: int = 256) -> OperatorSpec:
    """Symm's operator on the circle ``gamma(s) = radius (cos s, sin s)``.

    ``(K psi)(t) = -(1/pi) int_0^{2 pi} psi(s) ln|gamma(t) - gamma(s)| ds``.
    From ``ln(2R|sin((t-s)/2)|) = ln R - sum_k cos(k(t-s))/k`` one gets
    ``K e^{iks} = e^{ikt}/|k|`` and ``K 1 = -2 ln R``. Fourier modes above
    ``mode_cap`` are dropped.
    """
    radius = float(radius)
    if not radius > 0:
        raise ValidationError(f"radius must be positive, got {radius}")
    if abs(radius - 1.0) < SYMM_RADIUS_GAP:
        raise ValidationError(
            f"radius {radius} within {SYMM_RADIUS_GAP:g} of 1: the constant mode is lost and "
            "the operator is no longer injective"
        )
    if mode_cap < 1:
        raise ValidationError(f"mode_cap must be >= 1, got {mode_cap}")
    interval = Interval(0.0, TWO_PI)
    log_r = math.log(radius)
    modes = _symm_modes(radius, mode_cap)
    sig = np.array([m[0] for m in modes])
    freq = np.array([m[1] for m in modes])
    kind = np.array([m[2] for m in modes])
    # sign of the constant mode: K 1 = -2 ln R, so u_0 = -sign(ln R) v_0
    u_sign = np.where(kind == 0, -np.sign(log_r), 1.0)

    def v_fn(x, ks):
        idx = np.asarray(ks) - 1
        phase = np.outer(np.asarray(x), freq[idx])
        k = kind[idx]
        out = np.where(k == 1, np.cos(phase), np.where(k == 2, np.sin(phase), 1.0))
        return out * np.where(k == 0, 1.0 / math.sqrt(TWO_PI), 1.0 / math.sqrt(math.pi))

    def u_fn(x, ks):
        return v_fn(x, ks) * u_sign[np.asarray(ks) - 1]

    system = SingularSystem(
        key=f"symm(R={radius:g},M={mode_cap})",
        domain=interval,
        range=interval,
        sigma_fn=lambda ks: sig[np.asarray(ks) - 1],
        u_fn=u_fn,
        v_fn=v_fn,
        complete_range_side=False,
        count=len(modes),
    )

    ms = np.arange(-mode_cap, mode_cap + 1)
    mult = np.where(ms == 0, -2.0 * log_r, 1.0 / np.maximum(np.abs(ms), 1))
    panels = max(64, 2 * mode_cap)

    def apply(f: FunctionHandle) -> FunctionHandle:
        rule = make_gauss_rule(interval, DEFAULT_POINTS_PER_PANEL, panels, f.breaks)

        def fourier():
            # c_m = (1/2pi) int psi(s) e^{-ims} ds, scaled by the multiplier
            c = _coefficients(f, lambda x: np.exp(1j * np.outer(x, ms)), len(ms), rule) / TWO_PI
            return _scale(mult, c)

        coeffs = _Lazy(fourier)

        def image(t):
            return np.tensordot(np.exp(1j * np.outer(t, ms)), coeffs(), axes=(1, 0))

        return FunctionHandle(image, interval, label=f"K({f.label})")

    return OperatorSpec(
        name="symm",
        domain_interval=interval,
        range_interval=interval,
        apply_fn=apply,
        singular=system,
        params={"radius": radius, "mode_cap": mode_cap},
    )


# ---------------------------------------------------------- backward heat


def backward_heat_operator(series_cap: int = 24) -> OperatorSpec:
    """``(A v)(x) = int_0^pi k(x, tau) v(tau) dtau`` with
    ``k(x, tau) = (2/pi) sum_{n <= cap} e^{-n^2} sin(n tau) sin(n x)``.

    Singular system ``(e^{-n^2}; s_n, s_n)`` with ``s_n = sqrt(2/pi) sin(n x)``.
    Modes above the cap are annihilated exactly.
    """
    if int(series_cap) != series_cap or series_cap < 1:
        raise ValidationError(f"series_cap must be a positive integer, got {series_cap}")
    cap = int(series_cap)
    interval = Interval(0.0, math.pi)
    amp = math.sqrt(2.0 / math.pi)

    def sines(x, ks):
        return amp * np.sin(np.outer(np.asarray(x), np.asarray(ks)))

    system = SingularSystem(
        key="heat",
        domain=interval,
        range=interval,
        sigma_fn=lambda ks: np.exp(-np.asarray(ks, dtype=float) ** 2),
        u_fn=sines,
        v_fn=sines,
        complete_range_side=True,
        count=cap,
    )
    ks = np.arange(1, cap + 1)
    return OperatorSpec(
        name="heat",
        domain_interval=interval,
        range_interval=interval,
        apply_fn=_spectral_apply("heat", interval, system.sigmas(cap), lambda x: sines(x, ks),
                                 "heat", max(64, 4 * cap)),
        singular=system,
        params={"series_cap": cap},
    )


# -------------------------------------------------------------- diagonal


def _harmonic(count):
    return 1.0 / np.arange(1, count + 1)


def _gaussian_exp(count):
    return np.exp(-np.arange(1, count + 1, dtype=float) ** 2)


SIGMA_GENERATORS = {
    "harmonic": _harmonic,
    "gaussian-exp": _gaussian_exp,
}


def sigma_sequence(spec, count: int = 64) -> np.ndarray:
    """Resolve a generator name (``harmonic``, ``gaussian-exp``) or an explicit list."""
    if isinstance(spec, str):
        if spec not in SIGMA_GENERATORS:
            raise ValidationError(
                f"unknown sigma generator {spec!r}; valid: {', '.join(SIGMA_GENERATORS)} or a list"
            )
        return SIGMA_GENERATORS[spec](count)
    return np.asarray(spec, dtype=float)


def synthetic_diagonal_operator(sigma, range_complete: bool = False,
                                interval: Interval = Interval(0.0, TWO_PI)) -> OperatorSpec:
    """``A xi_k = sigma_k xi_k`` on the unit-norm trigonometric system of ``interval``.

    Members beyond ``len(sigma)`` are annihilated.
    """
    sig = np.asarray(sigma, dtype=float)
    if sig.ndim != 1 or len(sig) == 0:
        raise ValidationError("sigma must be a nonempty list")
    if not np.isfinite(sig).all() or (sig <= 0).any():
        raise ValidationError("sigma entries must be positive and finite")
    if (np.diff(sig) > 0).any():
        raise ValidationError("sigma must be nonincreasing")
    sig = sig.copy()
    sig.setflags(write=False)
    n = len(sig)
    def trig(x, ks):
        block = _trig_block(np.asarray(x, dtype=float), int(np.max(ks)), interval)
        return block[:, np.asarray(ks) - 1]

    key = f"diagonal[{n}]{interval}#{zlib.crc32(sig.tobytes()):08x}"
    system = SingularSystem(
        key=key,
        domain=interval,
        range=interval,
        sigma_fn=lambda ks: sig[np.asarray(ks) - 1],
        u_fn=trig,
        v_fn=trig,
        complete_range_side=bool(range_complete),
        count=n,
    )
    ks = np.arange(1, n + 1)
    return OperatorSpec(
        name="diagonal",
        domain_interval=interval,
        range_interval=interval,
        apply_fn=_spectral_apply("diagonal", interval, sig, lambda x: trig(x, ks), key, max(64, 4 * n)),
        singular=system,
        params={"rank": n},
    )


def adjoint_from_singular(op: OperatorSpec, g: FunctionHandle, k_max: int, rule: QuadratureRule) -> FunctionHandle:
    """``A^* g = sum_{k <= k_max} sigma_k <g, u_k> v_k``."""
    if op.singular is None:
        raise ValidationError(f"{op.name} has no singular system")
    s = op.singular
    ks = s._ks(k_max)
    coef = s.sigmas(k_max) * np.array([inner_product(g, s.u(int(k)), rule) for k in ks])
    return FunctionHandle(lambda x: s.v_fn(x, ks) @ coef, op.domain_interval, label=f"{op.name}*({g.label})")
