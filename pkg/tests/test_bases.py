import numpy as np
import pytest
import sympy as sp

from pgdiverge import (
    BasisFamily,
    BasisSet,
    FunctionHandle,
    Interval,
    NumericalError,
    ValidationError,
    basis_member,
    basis_set,
    default_rule,
    gram_matrix,
    inner_product,
    l2_norm,
    orthonormal_frame,
    project,
    reconstruct,
)

FAMILIES = ("trig", "legendre", "haar", "pwc")


def frame_for(kind, d, n):
    b = basis_set(kind, d, n)
    return orthonormal_frame(b, default_rule(d, n, b.as_block()))


def test_family_names():
    assert BasisFamily("Trigonometric", Interval(0, 1)).kind == "trig"
    assert BasisFamily("PiecewiseConstant", Interval(0, 1)).kind == "pwc"
    with pytest.raises(ValidationError, match="trig, legendre, haar, pwc"):
        BasisFamily("chebyshev", Interval(0, 1))


def test_trig_first_member(circle):
    f = basis_member(BasisFamily("trig", circle), 1)
    assert np.allclose(f(np.array([0.1, 3.0, 6.0])), 1 / np.sqrt(2 * np.pi))


def test_pwc_member_value(unit):
    f = basis_member(BasisFamily("pwc", unit), 2, n=4)
    assert np.allclose(f(np.array([0.25, 0.3, 0.49])), 2.0)
    assert np.allclose(f(np.array([0.1, 0.5, 0.9])), 0.0)


def test_legendre_members_orthogonal(circle):
    fam = BasisFamily("legendre", circle)
    r = default_rule(circle, 8)
    p3, p2 = basis_member(fam, 3), basis_member(fam, 2)
    assert abs(inner_product(p3, p2, r)) < 1e-10
    assert abs(l2_norm(p3, r) - 1) < 1e-12


def test_member_rejects_bad_index(unit):
    with pytest.raises(ValidationError):
        basis_member(BasisFamily("trig", unit), 0)
    with pytest.raises(ValidationError):
        basis_member(BasisFamily("pwc", unit), 2)


@pytest.mark.parametrize("kind,n", [("trig", 5), ("haar", 8), ("legendre", 12), ("pwc", 16)])
def test_gram_identity(circle, kind, n):
    b = basis_set(kind, circle, n)
    G = gram_matrix(b, default_rule(circle, n, b.as_block()))
    assert np.abs(G - np.eye(n)).max() < 1e-10
    assert np.abs(G - G.conj().T).max() < 1e-12


def test_raw_legendre_gram_matches_symbolic():
    # unnormalized shifted Legendre P_{k-1}(2x/L - 1) on (0, L)
    L = 3.0
    d = Interval(0.0, L)
    x = sp.symbols("x")
    polys = [sp.legendre(k, 2 * x / L - 1) for k in range(4)]
    exact = np.array([[float(sp.integrate(p * q, (x, 0, L))) for q in polys] for p in polys])
    assert np.allclose(np.diag(exact), [L * 2 / (2 * k - 1) / 2 for k in range(1, 5)])
    raw = BasisSet(
        lambda t: np.column_stack([np.polynomial.legendre.legval(2 * t / L - 1, np.eye(4)[k]) for k in range(4)]),
        4, d)
    G = gram_matrix(raw, default_rule(d, 4))
    assert np.abs(G - exact).max() < 1e-12


def test_singular_gram_names_n(unit):
    dup = FunctionHandle(lambda x: x, unit)
    b = BasisSet.from_functions([dup, FunctionHandle.constant(1, unit), 2 * dup])
    with pytest.raises(NumericalError, match="n=3"):
        orthonormal_frame(b, default_rule(unit, 3))


def test_orthonormal_set_has_identity_factor(circle):
    fr = frame_for("trig", circle, 7)
    assert np.abs(fr.cholesky_factor - np.eye(7)).max() < 1e-10
    r = default_rule(circle, 7)
    V = fr.evaluate(r.nodes)
    assert np.abs((V.T * r.weights) @ V.conj() - np.eye(7)).max() < 1e-8


def test_non_orthogonal_frame_is_orthonormal(unit):
    funcs = [FunctionHandle(lambda x, k=k: x ** k, unit) for k in range(5)]
    b = BasisSet.from_functions(funcs)
    r = default_rule(unit, 5)
    fr = orthonormal_frame(b, r)
    V = fr.evaluate(r.nodes)
    assert np.abs((V.T * r.weights) @ V.conj() - np.eye(5)).max() < 1e-8
    c = project(FunctionHandle(np.exp, unit), fr, r)
    assert abs(l2_norm(reconstruct(c, fr), r) - np.linalg.norm(c)) < 1e-8


def test_scaling_leaves_projection_unchanged(circle):
    raw = basis_set("legendre", circle, 6)
    scaled = BasisSet(lambda x: 2 * raw.evaluate(x), 6, circle)
    r = default_rule(circle, 6)
    f = FunctionHandle(lambda x: np.exp(np.sin(x)), circle)
    c1 = project(f, orthonormal_frame(raw, r), r)
    c2 = project(f, orthonormal_frame(scaled, r), r)
    assert np.abs(c1 - c2).max() < 1e-8


def test_pwc_coordinates_of_identity(unit):
    fr = frame_for("pwc", unit, 4)
    c = project(FunctionHandle(lambda x: x, unit), fr, default_rule(unit, 4, fr.as_block()))
    assert np.allclose(c, np.array([1, 3, 5, 7]) / 8 * 0.5, atol=1e-14)


def test_projection_of_span_member(circle):
    fr = frame_for("trig", circle, 9)
    r = default_rule(circle, 9)
    f = FunctionHandle(lambda x: 3 - np.sin(2 * x) + 0.5j * np.cos(4 * x), circle)
    err = f - reconstruct(project(f, fr, r), fr)
    assert l2_norm(err, r) < 1e-8


def test_projection_of_orthogonal_function(circle):
    n = 9
    fr = frame_for("trig", circle, n)
    c = project(FunctionHandle(lambda x: np.sin((n + 3) * x), circle), fr, default_rule(circle, n + 3))
    assert np.abs(c).max() < 1e-8


def test_fourier_tail_of_identity(circle):
    fr = frame_for("trig", circle, 11)
    r = default_rule(circle, 11)
    f = FunctionHandle(lambda x: x, circle)
    err = l2_norm(f - reconstruct(project(f, fr, r), fr), r) ** 2
    k = np.arange(6, 2_000_000, dtype=float)
    tail = np.sum(4 * np.pi / k ** 2)
    tail += 4 * np.pi / k[-1]  # integral estimate of the remainder
    assert abs(err - tail) < 1e-8 * tail + 1e-9


def test_pythagorean_residual(unit):
    fr = frame_for("legendre", unit, 5)
    r = default_rule(unit, 5)
    f = FunctionHandle(lambda x: np.abs(x - 0.3), unit, breaks=(0.3,))
    r = default_rule(unit, 5, f)
    res = f - reconstruct(project(f, fr, r), fr)
    for i in range(1, 6):
        assert abs(inner_product(res, fr.member(i), r)) < 1e-8


@pytest.mark.parametrize("kind", ["trig", "legendre", "haar"])
def test_nesting(circle, kind):
    f = FunctionHandle(lambda x: np.exp(np.cos(x)) * x, circle)
    prev = None
    for n in (3, 4, 7, 8):
        fr = frame_for(kind, circle, n)
        c = project(f, fr, default_rule(circle, 8, fr.as_block()))
        if prev is not None:
            assert np.abs(c[: len(prev)] - prev).max() < 1e-8
        prev = c


def test_pwc_nesting_on_powers_of_two(unit):
    f = FunctionHandle(lambda x: np.sin(5 * x), unit)
    errs = []
    for n in (2, 4, 8, 16, 32):
        fr = frame_for("pwc", unit, n)
        r = default_rule(unit, n, fr.as_block())
        errs.append(l2_norm(f - reconstruct(project(f, fr, r), fr), r))
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("kind", FAMILIES)
def test_projection_error_monotone_and_complete(circle, kind):
    f = FunctionHandle(lambda x: np.sin(x) + np.cos(2 * x), circle)
    ns = (1, 2, 4, 8, 16, 32, 64) if kind == "pwc" else (1, 2, 3, 5, 8, 13, 21, 34, 64)
    errs = []
    for n in ns:
        fr = frame_for(kind, circle, n)
        r = default_rule(circle, n, fr.as_block())
        errs.append(l2_norm(f - reconstruct(project(f, fr, r), fr), r))
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
    if kind in ("trig", "legendre"):
        assert errs[-1] < 1e-3
    else:
        # first-order family: ||f - P_n f|| ~ h ||f'|| / sqrt(12) with h = 2 pi / n
        h = 2 * np.pi / 64
        assert errs[-1] == pytest.approx(h * np.sqrt(5 * np.pi) / np.sqrt(12), rel=0.02)
