"""Numerical experiments around the divergence of ``||A_n^+ Q_n b||``.

* :func:`run_sweep` solves the Petrov-Galerkin problem for a list of ``n``.
* :func:`classify_growth` turns a sweep into Diverging / Bounded / Inconclusive.
* :func:`picard_report` evaluates the Picard partial sums
  ``S_N = sum_{k<=N} |<b,u_k>|^2 / sigma_k^2``.
* :func:`range_projection` is the projector ``sum_k <., u_k> u_k`` onto the
  closure of the range, truncated at ``k_max``.
* :func:`lemma22_check` records ``||A_n x_n - Q_n y||`` for ``y`` in the
  range closure; these residuals should decay to zero.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .bases import BasisFamily, BasisSet, orthonormal_frame
from .errors import NumericalError, ValidationError
from .galerkin import MpSolution, Truncation, assemble, mp_solve
from .numerics import DEFAULT_POINTS_PER_PANEL, FunctionHandle, QuadratureRule, default_rule, make_gauss_rule
from .operators import OperatorSpec, SingularSystem

__all__ = [
    "SINGULAR",
    "SweepResult",
    "GrowthVerdict",
    "PicardReport",
    "run_sweep",
    "classify_growth",
    "picard_report",
    "picard_coefficients",
    "range_projection",
    "lemma22_check",
    "HEAT_DEFAULT_N_CAP",
]

log = logging.getLogger(__name__)

# basis selector meaning "the operator's own singular functions"
SINGULAR = "singular"
# mode None on sigma_n = e^{-n^2} loses all digits soon after this
HEAT_DEFAULT_N_CAP = 6

FamilyLike = Union[BasisFamily, str]


@dataclass(frozen=True, eq=False)
class SweepResult:
    n_values: List[int]
    norms: List[float]
    residuals: List[float]
    effective_ranks: List[int]
    metadata: Dict[str, str] = field(default_factory=dict)
    solutions: List[MpSolution] = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class GrowthVerdict:
    classification: str  # "Diverging" | "Bounded" | "Inconclusive"
    growth_ratio: float
    tail_slope: float

    def __str__(self):
        return f"{self.classification} (growth ratio {self.growth_ratio:.4g}, tail slope {self.tail_slope:.4g})"


@dataclass(frozen=True, eq=False)
class PicardReport:
    coefficients: List[Tuple[int, float, float]]  # (k, |<b,u_k>|, sigma_k)
    partial_sums: List[float]
    range_tail: List[float]
    verdict: str  # "InRangeDomain" | "OutsideRangeDomain" | "Inconclusive"
    k_max: int
    exact_coefficients: bool = False
    operator: str = ""


def _resolve_basis(family: FamilyLike, n: int, op: OperatorSpec, side: str) -> BasisSet:
    interval = op.domain_interval if side == "v" else op.range_interval
    if isinstance(family, str):
        if family == SINGULAR:
            if op.singular is None:
                raise ValidationError(f"{op.name} has no singular system to build frames from")
            return op.singular.basis(side, n)
        family = BasisFamily(family, interval)
    if not family.domain.same_as(interval):
        raise ValidationError(f"basis family on {family.domain}, operator side lives on {interval}")
    return BasisSet.from_family(family, n)


def _family_name(family: FamilyLike) -> str:
    return family if isinstance(family, str) else family.kind


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _solve_point(op, domain_family, range_family, b, n, mode) -> MpSolution:
    try:
        dom = _resolve_basis(domain_family, n, op, "v")
        rng = _resolve_basis(range_family, n, op, "u")
        dframe = orthonormal_frame(dom, default_rule(dom.domain, n, dom.as_block()))
        rframe = orthonormal_frame(rng, default_rule(rng.domain, n, rng.as_block()))
        return mp_solve(assemble(op, dframe, rframe, b), mode)
    except NumericalError as exc:
        raise NumericalError(f"n={n}: {exc}") from exc


def run_sweep(
    op: OperatorSpec,
    domain_family: FamilyLike,
    range_family: FamilyLike,
    b: FunctionHandle,
    n_values: Sequence[int],
    mode: Truncation = Truncation.none(),
    max_n: Optional[int] = None,
    workers: int = 1,
) -> SweepResult:
    """Solve ``A_n x = Q_n b`` in the minimum-norm sense for each ``n``.

    ``domain_family`` and ``range_family`` are :class:`BasisFamily` objects,
    family names, or :data:`SINGULAR`. ``max_n`` guards against sweeps that
    only measure rounding noise; it defaults to
    :data:`HEAT_DEFAULT_N_CAP` for the backward heat operator.
    """
    ns = [int(n) for n in n_values]
    if not ns or any(n < 1 for n in ns) or any(b2 <= a2 for a2, b2 in zip(ns, ns[1:])):
        raise ValidationError(f"n_values must be positive and strictly increasing, got {list(n_values)}")
    if "pwc" in (_family_name(domain_family), _family_name(range_family)) and not all(map(_is_pow2, ns)):
        raise ValidationError("piecewise-constant sweeps need n_values that are powers of 2")
    if max_n is None and op.name == "heat":
        max_n = HEAT_DEFAULT_N_CAP
    if max_n is not None and ns[-1] > max_n:
        raise ValidationError(
            f"n={ns[-1]} exceeds the cap {max_n} for {op.name}; beyond it double precision "
            "only measures rounding noise (raise the cap explicitly to override)"
        )

    def one(n):
        return _solve_point(op, domain_family, range_family, b, n, mode)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sols = list(pool.map(one, ns))
    else:
        sols = [one(n) for n in ns]
    for n, s in zip(ns, sols):
        log.debug("n=%d norm=%.6g residual=%.3g rank=%d", n, s.norm, s.residual, s.effective_rank)

    return SweepResult(
        n_values=ns,
        norms=[s.norm for s in sols],
        residuals=[s.residual for s in sols],
        effective_ranks=[s.effective_rank for s in sols],
        metadata={
            "operator": op.describe(),
            "domain_basis": _family_name(domain_family),
            "range_basis": _family_name(range_family),
            "rhs": b.label,
            "truncation": str(mode),
        },
        solutions=sols,
    )


def _loglog_slope(n, y) -> float:
    x = np.log(np.asarray(n, dtype=float))
    y = np.log(np.maximum(np.asarray(y, dtype=float), np.finfo(float).tiny))
    if np.ptp(x) == 0:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def classify_growth(sweep: SweepResult, ratio_threshold: float = 10.0, bounded_band: float = 0.2) -> GrowthVerdict:
    """Finite-``n`` stand-in for ``lim ||x_n|| = infinity``.

    Diverging
        ``norms[-1] / norms[0] >= ratio_threshold`` and the least-squares
        slope of ``log norm`` against ``log n`` over the top half is positive.
    Bounded
        The top half varies by less than ``bounded_band`` relative to its max.
    Inconclusive
        Anything else. A sweep is never called Bounded just because it failed
        the divergence test.
    """
    norms = np.asarray(sweep.norms, dtype=float)
    if len(norms) < 4:
        raise ValidationError(f"classify_growth needs at least 4 sweep points, got {len(norms)}")
    ratio = float(norms[-1] / max(norms[0], np.finfo(float).eps))
    half = (len(norms) + 1) // 2
    top_n, top = sweep.n_values[-half:], norms[-half:]
    slope = _loglog_slope(top_n, top)
    if ratio >= ratio_threshold and slope > 0:
        cls = "Diverging"
    elif top.max() == 0 or (top.max() - top.min()) / top.max() < bounded_band:
        cls = "Bounded"
    else:
        cls = "Inconclusive"
    return GrowthVerdict(cls, ratio, slope)


def _system(op: OperatorSpec) -> SingularSystem:
    if op.singular is None:
        raise ValidationError(
            f"{op.name} has no singular system; use synthetic_diagonal_operator or one of "
            "volterra, symm, heat"
        )
    return op.singular


def _coefficient_rule(system: SingularSystem, b: FunctionHandle, k_max: int) -> QuadratureRule:
    # at least 4 panels per oscillation index so high modes are resolved
    return make_gauss_rule(system.range, DEFAULT_POINTS_PER_PANEL, max(64, 4 * k_max), b.breaks)


def picard_coefficients(
    op: OperatorSpec, b: FunctionHandle, k_max: int, rule: Optional[QuadratureRule] = None
) -> Tuple[np.ndarray, bool]:
    """``<b, u_k>`` for ``k <= k_max`` and whether they are exact.

    Exact coefficients come from ``b.expansion`` when it refers to the
    operator's own singular system; otherwise quadrature is used.
    """
    system = _system(op)
    if k_max < 1:
        raise ValidationError(f"k_max must be >= 1, got {k_max}")
    if system.count is not None and k_max > system.count:
        raise ValidationError(
            f"k_max={k_max} exceeds the {system.count} modes {op.describe()} implements; "
            "higher modes are annihilated and lie outside its range"
        )
    if not b.domain.same_as(system.range):
        raise ValidationError(f"b lives on {b.domain}, range side is {system.range}")
    if b.expansion is not None and b.expansion[0] == system.key:
        c = np.zeros(k_max, dtype=complex)
        m = min(k_max, len(b.expansion[1]))
        c[:m] = b.expansion[1][:m]
        return c, True
    if rule is None:
        rule = _coefficient_rule(system, b, k_max)
    ks = np.arange(1, k_max + 1)
    vals = b(rule.nodes)
    u = system.u_fn(rule.nodes, ks)
    return np.conj(u).T @ (rule.weights * vals), False


def _picard_verdict(sums: np.ndarray, ratio_threshold: float, plateau_tol: float, trend_tol: float) -> str:
    total = sums[-1]
    if total == 0:
        return "InRangeDomain"
    N = len(sums)
    start = (3 * N) // 4
    rel_increase = (total - (sums[start - 1] if start > 0 else 0.0)) / total
    if rel_increase < plateau_tol:
        return "InRangeDomain"
    # same 64x index span that classify_growth sees on a 4..256 sweep
    i0 = -(-N // 64) - 1
    ref = sums[i0 + np.nonzero(sums[i0:])[0][0]]
    if rel_increase >= trend_tol and total / ref >= ratio_threshold:
        return "OutsideRangeDomain"
    return "Inconclusive"


def picard_report(
    op: OperatorSpec,
    b: FunctionHandle,
    k_max: int,
    rule: Optional[QuadratureRule] = None,
    ratio_threshold: float = 10.0,
    plateau_tol: float = 1e-6,
    trend_tol: float = 1e-2,
) -> PicardReport:
    """Picard partial sums and a membership verdict for ``b``.

    With ``N = k_max``:

    InRangeDomain
        The last quarter of the terms adds less than ``plateau_tol`` of
        ``S_N``.
    OutsideRangeDomain
        The last quarter still adds at least ``trend_tol`` of ``S_N`` and
        ``S_N / S_ceil(N/64) >= ratio_threshold``.
    Inconclusive
        Neither. Slowly converging and logarithmically diverging sums land
        here at any practical ``k_max``.
    """
    system = _system(op)
    c, exact = picard_coefficients(op, b, k_max, rule)
    sig = system.sigmas(k_max)
    absc = np.abs(c)
    with np.errstate(over="ignore"):
        terms = (absc / sig) ** 2
    sums = np.cumsum(terms)
    if not np.isfinite(sums).all():
        raise NumericalError("Picard partial sums overflow; lower k_max")

    captured = np.cumsum(absc ** 2)
    if system.complete_range_side:
        if exact:
            total = float(np.sum(np.abs(b.expansion[1]) ** 2))
        else:
            r = rule or _coefficient_rule(system, b, k_max)
            total = float(r.integrate(np.abs(b(r.nodes)) ** 2))
        tail = np.maximum(total - captured, 0.0)
    else:
        # only the computed modes are known: lower estimate of the tail
        tail = captured[-1] - captured

    return PicardReport(
        coefficients=[(k, float(a), float(s)) for k, a, s in zip(range(1, k_max + 1), absc, sig)],
        partial_sums=[float(s) for s in sums],
        range_tail=[float(t) for t in tail],
        verdict=_picard_verdict(sums, ratio_threshold, plateau_tol, trend_tol),
        k_max=k_max,
        exact_coefficients=exact,
        operator=op.describe(),
    )


def range_projection(
    op: OperatorSpec, b: FunctionHandle, k_max: int, rule: Optional[QuadratureRule] = None
) -> FunctionHandle:
    """``sum_{k <= k_max} <b, u_k> u_k``, carrying its exact coefficients."""
    system = _system(op)
    c, _ = picard_coefficients(op, b, k_max, rule)
    ks = np.arange(1, k_max + 1)
    return FunctionHandle(
        lambda x: system.u_fn(x, ks) @ c,
        system.range,
        label=f"Q_range[{k_max}]({b.label})",
        expansion=(system.key, c),
    )


def lemma22_check(
    op: OperatorSpec,
    y_in_closure: FunctionHandle,
    domain_family: FamilyLike,
    range_family: FamilyLike,
    n_values: Sequence[int],
    mode: Truncation = Truncation.relative(),
) -> List[float]:
    """``||A_n x_n - Q_n y||`` for each ``n``; expected to decay to zero.

    The caller is responsible for ``y`` lying in the closure of the range,
    e.g. by passing it through :func:`range_projection` first.
    """
    return run_sweep(op, domain_family, range_family, y_in_closure, n_values, mode).residuals
