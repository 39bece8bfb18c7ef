import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pgdiverge import (
    BasisSet,
    FunctionHandle,
    GalerkinSystem,
    Truncation,
    ValidationError,
    assemble,
    backward_heat_operator,
    basis_set,
    default_rule,
    mp_axioms_check,
    mp_solve,
    orthonormal_frame,
    pseudo_inverse,
    synthetic_diagonal_operator,
    volterra_operator,
)


def frame(kind_or_set, d=None, n=None):
    b = kind_or_set if isinstance(kind_or_set, BasisSet) else basis_set(kind_or_set, d, n)
    return orthonormal_frame(b, default_rule(b.domain, b.n, b.as_block()))


def system(matrix, rhs):
    return GalerkinSystem(np.asarray(matrix, dtype=complex), np.asarray(rhs, dtype=complex), None, None)


# ---------------------------------------------------------------- truncation


def test_truncation_parse_and_str():
    assert str(Truncation.parse("none")) == "None"
    assert Truncation.parse("relative:1e-12") == Truncation.relative(1e-12)
    assert str(Truncation.parse("absolute:1e-300")) == "Absolute(1e-300)"
    assert str(Truncation.relative()) == "Relative(max(m,n)*eps)"
    for bad in ("bogus", "absolute", "relative:x", "none:1", "relative:-1"):
        with pytest.raises(ValidationError):
            Truncation.parse(bad)


# ---------------------------------------------------------------- assemble


def test_assemble_synthetic_diagonal(circle):
    op = synthetic_diagonal_operator([1.0, 0.5, 0.25])
    fr = frame("trig", circle, 3)
    sys_ = assemble(op, fr, fr, FunctionHandle.constant(1.0, circle))
    assert np.abs(sys_.matrix - np.diag([1, 0.5, 0.25])).max() < 1e-10


def test_assemble_heat_sine_frames():
    op = backward_heat_operator()
    fr = frame(op.singular.basis("u", 3))
    sys_ = assemble(op, fr, fr, FunctionHandle.zero(op.range_interval))
    assert np.abs(sys_.matrix - np.diag(np.exp(-np.array([1.0, 4.0, 9.0])))).max() < 1e-10


def test_assemble_volterra_constant_entry(circle):
    op = volterra_operator()
    fr = frame("trig", circle, 3)
    sys_ = assemble(op, fr, fr, FunctionHandle.constant(1.0, circle))
    assert abs(sys_.matrix[0, 0] - np.pi) < 1e-8


def test_assemble_is_linear_in_rhs(circle):
    op = volterra_operator()
    fr = frame("legendre", circle, 6)
    b1 = FunctionHandle(np.sin, circle)
    b2 = FunctionHandle(lambda x: x ** 2, circle)
    r1 = assemble(op, fr, fr, b1).rhs
    r2 = assemble(op, fr, fr, b2).rhs
    r12 = assemble(op, fr, fr, 2.0 * b1 - 3j * b2).rhs
    assert np.abs(r12 - (2 * r1 - 3j * r2)).max() < 1e-10


def test_assemble_interval_mismatch(circle, half_circle):
    op = volterra_operator()
    with pytest.raises(ValidationError):
        assemble(op, frame("trig", half_circle, 3), frame("trig", circle, 3), FunctionHandle.zero(circle))
    with pytest.raises(ValidationError):
        assemble(op, frame("trig", circle, 3), frame("trig", circle, 3), FunctionHandle.zero(half_circle))


# ---------------------------------------------------------------- mp_solve


def test_mp_identity():
    r = np.array([1.0, -2.0, 3j])
    sol = mp_solve(system(np.eye(3), r))
    assert np.allclose(sol.coeffs, r) and sol.residual == 0 and sol.effective_rank == 3


def test_mp_zero_matrix():
    r = np.array([3.0, 4.0])
    for mode in (Truncation.none(), Truncation.relative()):
        sol = mp_solve(system(np.zeros((2, 2)), r), mode)
        assert sol.norm == 0 and sol.effective_rank == 0
        assert sol.residual == pytest.approx(5.0)


def test_mp_tiny_singular_value_modes():
    s = system(np.diag([1.0, 1e-20]), [1.0, 1.0])
    trunc = mp_solve(s, Truncation.relative(1e-12))
    assert trunc.effective_rank == 1
    assert np.allclose(trunc.coeffs, [1, 0])
    full = mp_solve(s, Truncation.none())
    assert full.effective_rank == 2
    assert full.coeffs[0] == pytest.approx(1.0) and full.coeffs[1] == pytest.approx(1e20)


def test_mp_absolute_mode():
    s = system(np.diag([1.0, 1e-5, 1e-9]), [1.0, 1.0, 1.0])
    assert mp_solve(s, Truncation.absolute(1e-7)).effective_rank == 2


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31), m=st.integers(1, 10), n=st.integers(1, 10), rank=st.integers(0, 10))
def test_mp_invariants(seed, m, n, rank):
    rng = np.random.default_rng(seed)
    rank = min(rank, m, n)
    A = rng.normal(size=(m, rank)) @ rng.normal(size=(rank, n)) + 0j
    b = rng.normal(size=m) + 1j * rng.normal(size=m)
    sol = mp_solve(system(A, b))
    assert sol.norm == pytest.approx(np.linalg.norm(sol.coeffs), abs=1e-12)
    assert sol.residual ** 2 + sol.projected_rhs_norm ** 2 == pytest.approx(np.linalg.norm(b) ** 2, abs=1e-8)
    assert np.allclose(sol.coeffs, np.linalg.pinv(A) @ b, atol=1e-8 * max(1, np.linalg.norm(sol.coeffs)))
    # least-squares optimality and minimal norm
    res0 = np.linalg.norm(A @ sol.coeffs - b)
    _, s, vh = np.linalg.svd(A)
    r = int(np.sum(s > max(m, n) * np.finfo(float).eps * (s[0] if len(s) else 0)))
    row, null = vh[:r].conj().T, vh[r:].conj().T
    for _ in range(5):
        if r:
            d = row @ (rng.normal(size=r) * 1e-3)
            assert np.linalg.norm(A @ (sol.coeffs + d) - b) >= res0 - 1e-10
        if null.shape[1]:
            d = null @ (rng.normal(size=null.shape[1]) * 1e-3)
            assert np.linalg.norm(sol.coeffs + d) >= sol.norm - 1e-10


def test_mp_matches_exact_diagonal_formula(circle):
    sig = 1.0 / np.arange(1, 13) ** 2
    op = synthetic_diagonal_operator(sig)
    fr = frame("trig", circle, 12)
    b = FunctionHandle(lambda x: np.exp(np.sin(x)), circle)
    s = assemble(op, fr, fr, b)
    sol = mp_solve(s, Truncation.none())
    exact = s.rhs / sig
    assert np.abs(sol.coeffs - exact).max() <= 1e-10 * np.abs(exact).max()


def test_basis_scaling_invariance(circle):
    op = volterra_operator()
    raw = basis_set("legendre", circle, 8)
    scaled = BasisSet(lambda x: -3.0 * raw.evaluate(x), 8, circle)
    b = FunctionHandle(np.sin, circle)
    n1 = mp_solve(assemble(op, frame(raw), frame(raw), b), Truncation.none()).norm
    n2 = mp_solve(assemble(op, frame(scaled), frame(scaled), b), Truncation.none()).norm
    assert n1 == pytest.approx(n2, abs=1e-8)


# ---------------------------------------------------------------- axioms


def test_axioms_identity_and_zero():
    assert mp_axioms_check(np.eye(4), np.eye(4)).max() == 0
    assert mp_axioms_check(np.zeros((3, 2)), np.zeros((2, 3))).max() == 0


def test_axioms_rank_deficient_default_truncation():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(6, 3)) @ rng.normal(size=(3, 4))
    res = mp_axioms_check(A, pseudo_inverse(A))
    assert res.max() <= 1e-8 * np.linalg.norm(A)


def test_mode_none_inverts_rounding_noise():
    # a numerically rank-3 matrix has a fourth singular value at rounding level;
    # mode None keeps it, which is exactly what divergence studies rely on
    rng = np.random.default_rng(5)
    A = rng.normal(size=(6, 3)) @ rng.normal(size=(3, 4))
    sol = mp_solve(system(A, rng.normal(size=6)), Truncation.none())
    assert sol.effective_rank == 4
    assert sol.norm > 1e10
    assert mp_solve(system(A, rng.normal(size=6))).effective_rank == 3


def test_axioms_full_rank_mode_none():
    rng = np.random.default_rng(6)
    A = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    assert mp_axioms_check(A, pseudo_inverse(A, Truncation.none())).max() <= 1e-8 * np.linalg.norm(A)


def test_axioms_shape_mismatch():
    with pytest.raises(ValidationError):
        mp_axioms_check(np.eye(3), np.eye(2))
