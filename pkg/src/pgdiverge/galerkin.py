"""Petrov-Galerkin assembly ``A_n = Q_n A P_n`` in orthonormal coordinates and
the Moore-Penrose solve ``x_n = A_n^+ Q_n b``.

With orthonormal frames on both sides the operator-level minimum-norm
least-squares problem is exactly the matrix-level one, so everything below is
plain dense linear algebra on an ``n x n`` complex matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .bases import OrthonormalFrame, reconstruct
from .errors import ValidationError
from .numerics import FunctionHandle, QuadratureRule, default_rule, pairing_matrix, svd
from .operators import OperatorSpec

__all__ = [
    "Truncation",
    "GalerkinSystem",
    "MpSolution",
    "AxiomResiduals",
    "assemble",
    "mp_solve",
    "pseudo_inverse",
    "mp_axioms_check",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Truncation:
    """Which singular values of ``A_n`` are treated as nonzero.

    ``kind`` is ``"none"`` (keep every ``s > 0``), ``"relative"`` (keep
    ``s > tau * s_max``; ``tau=None`` means ``max(m, n) * eps``) or
    ``"absolute"`` (keep ``s > tau``).

    Divergence studies must use ``none``: relative truncation regularizes and
    hides the blow-up.
    """

    kind: str = "relative"
    tau: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("none", "relative", "absolute"):
            raise ValidationError(f"unknown truncation mode {self.kind!r}; use none, relative or absolute")
        if self.kind == "none" and self.tau is not None:
            raise ValidationError("truncation 'none' takes no threshold")
        if self.kind == "absolute" and self.tau is None:
            raise ValidationError("absolute truncation needs a threshold")
        if self.tau is not None and not (np.isfinite(self.tau) and self.tau >= 0):
            raise ValidationError(f"truncation threshold must be finite and >= 0, got {self.tau}")

    @classmethod
    def none(cls) -> "Truncation":
        return cls("none")

    @classmethod
    def relative(cls, tau: Optional[float] = None) -> "Truncation":
        return cls("relative", tau)

    @classmethod
    def absolute(cls, tau: float) -> "Truncation":
        return cls("absolute", tau)

    @classmethod
    def parse(cls, text: str) -> "Truncation":
        """``none``, ``relative``, ``relative:1e-12`` or ``absolute:1e-300``."""
        kind, _, tau = text.strip().lower().partition(":")
        kind = kind.strip()
        try:
            value = float(tau) if tau.strip() else None
        except ValueError:
            raise ValidationError(f"bad truncation threshold in {text!r}") from None
        return cls(kind, value)

    def keep(self, s: np.ndarray, shape) -> np.ndarray:
        if self.kind == "none":
            return s > 0
        if self.kind == "absolute":
            return s > self.tau
        tau = max(shape) * _EPS if self.tau is None else self.tau
        return s > tau * (s[0] if len(s) else 0.0)

    def __str__(self):
        if self.kind == "none":
            return "None"
        if self.tau is None:
            return "Relative(max(m,n)*eps)"
        return f"{self.kind.capitalize()}({self.tau:g})"


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """``matrix[i, j] = <A xi_hat_j, eta_hat_i>``, ``rhs[i] = <b, eta_hat_i>``."""

    matrix: np.ndarray
    rhs: np.ndarray
    domain_frame: OrthonormalFrame
    range_frame: OrthonormalFrame


@dataclass(frozen=True, eq=False)
class MpSolution:
    """Minimum-norm least-squares solution in domain-frame coordinates.

    ``residual`` is ``||(I - U_k U_k^*) rhs||`` with ``U_k`` the kept left
    singular vectors. In exact arithmetic this is ``||A_n x_n - Q_n b||``;
    the projected form avoids cancellation when ``x_n`` is huge.
    """

    coeffs: np.ndarray
    norm: float
    residual: float
    effective_rank: int
    truncation: Truncation
    singular_values: np.ndarray
    rhs_norm: float
    projected_rhs_norm: float

    def function(self, frame: OrthonormalFrame) -> FunctionHandle:
        return reconstruct(self.coeffs, frame)


def assemble(
    op: OperatorSpec,
    domain_frame: OrthonormalFrame,
    range_frame: OrthonormalFrame,
    b: FunctionHandle,
    rule: Optional[QuadratureRule] = None,
) -> GalerkinSystem:
    """Assemble the Petrov-Galerkin system on the range-side quadrature ``rule``.

    The operator is applied once to the raw domain basis (as a block); frame
    coordinates follow by linearity.
    """
    if not domain_frame.domain.same_as(op.domain_interval):
        raise ValidationError(f"domain frame on {domain_frame.domain}, {op.name} acts on {op.domain_interval}")
    if not range_frame.domain.same_as(op.range_interval):
        raise ValidationError(f"range frame on {range_frame.domain}, {op.name} maps to {op.range_interval}")
    if not b.domain.same_as(op.range_interval):
        raise ValidationError(f"right-hand side on {b.domain}, {op.name} maps to {op.range_interval}")

    image = op.apply(domain_frame.basis.as_block())
    if rule is None:
        n = max(domain_frame.n, range_frame.n)
        rule = default_rule(op.range_interval, n, image, range_frame.as_block(), b)
    elif not rule.interval.same_as(op.range_interval):
        raise ValidationError(f"rule on {rule.interval}, {op.name} maps to {op.range_interval}")

    eta = range_frame.evaluate(rule.nodes)
    image_vals = np.asarray(image(rule.nodes)).reshape(len(rule.nodes), -1) @ domain_frame.coeffs
    matrix = pairing_matrix(image_vals, eta, rule)
    rhs = pairing_matrix(b(rule.nodes), eta, rule)[:, 0]
    matrix.setflags(write=False)
    rhs.setflags(write=False)
    return GalerkinSystem(matrix, rhs, domain_frame, range_frame)


def _kept_svd(matrix: np.ndarray, mode: Truncation):
    U, S, V = svd(matrix)
    keep = mode.keep(S, matrix.shape)
    return U[:, keep], S[keep], V[:, keep], S


def mp_solve(system: GalerkinSystem, mode: Truncation = Truncation.relative()) -> MpSolution:
    """``coeffs = V S_tau^+ U^* rhs``: minimum norm among least-squares minimizers
    over the kept singular directions."""
    rhs = np.asarray(system.rhs, dtype=complex)
    U, S, V, all_s = _kept_svd(system.matrix, mode)
    proj = U.conj().T @ rhs
    coeffs = V @ (proj / S) if len(S) else np.zeros(system.matrix.shape[1], dtype=complex)
    residual = float(np.linalg.norm(rhs - U @ proj))
    return MpSolution(
        coeffs=coeffs,
        norm=float(np.linalg.norm(coeffs)),
        residual=residual,
        effective_rank=int(len(S)),
        truncation=mode,
        singular_values=all_s,
        rhs_norm=float(np.linalg.norm(rhs)),
        projected_rhs_norm=float(np.linalg.norm(proj)),
    )


def pseudo_inverse(matrix, mode: Truncation = Truncation.relative()) -> np.ndarray:
    """``A^+ = V S_tau^+ U^*`` through the same SVD path as :func:`mp_solve`."""
    matrix = np.asarray(matrix, dtype=complex)
    U, S, V, _ = _kept_svd(matrix, mode)
    return (V / S) @ U.conj().T if len(S) else np.zeros(matrix.shape[::-1], dtype=complex)


class AxiomResiduals(NamedTuple):
    a_ap_a: float      # ||A A+ A - A||
    ap_a_ap: float     # ||A+ A A+ - A+||
    a_ap_herm: float   # ||(A A+)^* - A A+||
    ap_a_herm: float   # ||(A+ A)^* - A+ A||

    def max(self) -> float:
        return max(self)


def mp_axioms_check(matrix, pinv) -> AxiomResiduals:
    """Frobenius residuals of the four Penrose equations."""
    A = np.asarray(matrix, dtype=complex)
    P = np.asarray(pinv, dtype=complex)
    if A.ndim != 2 or P.shape != A.shape[::-1]:
        raise ValidationError(f"pinv shape {P.shape} incompatible with matrix shape {A.shape}")
    AP, PA = A @ P, P @ A
    fro = np.linalg.norm
    return AxiomResiduals(
        float(fro(AP @ A - A)),
        float(fro(PA @ P - P)),
        float(fro(AP.conj().T - AP)),
        float(fro(PA.conj().T - PA)),
    )
