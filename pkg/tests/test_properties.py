import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st

from alpha_bundle import bundle as B
from alpha_bundle.bundle import parallel_transport
from alpha_bundle.expectation import Strategy
from alpha_bundle.expr import compile_expr, parse, to_source
from alpha_bundle.families import make_normal
from alpha_bundle.manifold import (christoffel_lower, christoffel_mixed, covariant_derivative, curvature_tensor,
                                   skewness_tensor, Trajectory)
from alpha_bundle.numerics import central_diff

NORMAL = make_normal()

unit = st.floats(-1.0, 1.0, allow_nan=False)
alphas = st.floats(-1.0, 1.0, allow_nan=False)
mus = st.floats(-2.0, 2.0, allow_nan=False)
sigmas = st.floats(0.5, 3.0, allow_nan=False)
vec2 = st.tuples(unit, unit).map(np.array)
mat2 = st.tuples(unit, unit, unit, unit).map(lambda v: np.array(v).reshape(2, 2))


@st.composite
def frames(draw):
    theta = np.array([draw(mus), draw(sigmas)])
    A = draw(mat2)
    assume(abs(np.linalg.det(A)) >= 0.1)
    return B.Frame(theta, A)


@st.composite
def group_elements(draw):
    g = draw(mat2) * 2
    assume(0.1 <= abs(np.linalg.det(g)) <= 10)
    return g


@given(frames(), alphas, vec2, mat2)
def test_split_reconstructs(u, a, base, mat):
    X = B.BundleTangent(base, mat)
    ver, hor = B.split(NORMAL, u, X, a)
    assert not np.any(ver.base)
    assert np.max(np.abs((ver + hor).flat() - X.flat())) <= 1e-15
    assert np.max(np.abs(B.bundle_connection_form(NORMAL, u, hor, a))) <= 1e-12


@given(frames(), alphas, vec2, mat2, group_elements())
def test_connection_form_equivariant(u, a, base, mat, g):
    X = B.BundleTangent(base, mat)
    lhs = B.bundle_connection_form(NORMAL, u.right(g), X.pushed_right(g), a)
    rhs = np.linalg.solve(g, B.bundle_connection_form(NORMAL, u, X, a) @ g)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


@given(frames(), alphas, vec2)
def test_canonical_of_fundamental_horizontal(u, a, xi):
    assert np.max(np.abs(B.canonical_form(u, B.fundamental_horizontal(NORMAL, u, xi, a)) - xi)) <= 1e-12


@given(mus, sigmas, alphas)
def test_alpha_family_is_skewness_shift(m, s, a):
    th = [m, s]
    diff = christoffel_lower(NORMAL, th, a) - christoffel_lower(NORMAL, th, 0.0)
    assert np.max(np.abs(diff + 0.5 * a * skewness_tensor(NORMAL, th))) <= 1e-8


@given(mus, sigmas, alphas)
def test_curvature_antisymmetric(m, s, a):
    R = curvature_tensor(NORMAL, [m, s], a, Strategy.quadrature(32))
    assert np.max(np.abs(R + R.transpose(1, 0, 2, 3))) <= 1e-12


@given(frames(), alphas, vec2, vec2)
def test_bundle_covariant_derivative_matches_chart(u, a, X, Y):
    want = covariant_derivative(christoffel_mixed(NORMAL, u.theta, a), X, Y, np.zeros((2, 2)))
    assert np.max(np.abs(B.bundle_covariant_derivative(NORMAL, X, Y, u, a) - want)) <= 1e-6


@given(frames(), alphas, vec2, vec2, vec2)
def test_curvature_form_antisymmetric(u, a, X, Y, Z):
    r1 = B.curvature_via_bundle(NORMAL, u, X, Y, Z, a)
    r2 = B.curvature_via_bundle(NORMAL, u, Y, X, Z, a)
    assert np.linalg.norm(r1 + r2) <= 1e-8 * max(1.0, np.linalg.norm(r1))


@given(st.lists(st.floats(-3, 3), min_size=5, max_size=5), st.floats(0.01, 0.2))
def test_fourth_order_stencil_exact_on_quartics(coeffs, h):
    p = np.polynomial.Polynomial(coeffs)
    assert abs(central_diff(lambda t: p(0.3 + t), h, 4) - p.deriv()(0.3)) <= 1e-9 * (1 + sum(map(abs, coeffs)))


# random expression trees for the printer/parser round trip
leaves = st.sampled_from(["x", "th1", "th2", "pi", "2", "0.5", "3e-1"])


def _combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*", "/", "^"]), children).map(
            lambda t: f"{t[0]} {t[1]} {t[2]}"),
        children.map(lambda c: f"({c})"),
        children.map(lambda c: f"-{c}"),
        st.tuples(st.sampled_from(["exp", "log", "sqrt", "abs"]), children).map(lambda t: f"{t[0]}({t[1]})"),
    )


expressions = st.recursive(leaves, _combine, max_leaves=8)


@given(expressions)
def test_printer_is_a_parser_fixed_point(src):
    tree = parse(src, 2)
    printed = to_source(tree)
    assert parse(printed, 2) == parse(printed, 2)
    assert to_source(parse(printed, 2)) == printed


@given(expressions, st.floats(0.1, 2.0), st.floats(0.1, 2.0), st.floats(0.1, 2.0))
def test_printed_expression_evaluates_identically(src, x, t1, t2):
    f = compile_expr(parse(src, 2))
    g = compile_expr(parse(to_source(parse(src, 2)), 2))
    try:
        a = float(f(x, [t1, t2]))
    except (ArithmeticError, ValueError):
        return
    assert float(g(x, [t1, t2])) == a


@given(st.one_of(st.just("closed"), st.integers(2, 500).map(lambda n: f"quad:{n}"),
                 st.tuples(st.integers(1, 10**6), st.integers(0, 2**31)).map(lambda t: f"mc:{t[0]}:{t[1]}")))
def test_strategy_text_round_trip(text):
    assert str(Strategy.parse(text)) == text


@given(st.integers(1, 10**6))
def test_strategy_default_seed_is_zero(count):
    assert str(Strategy.parse(f"mc:{count}")) == f"mc:{count}:0"


@given(frames(), alphas, vec2, vec2)
def test_transport_independent_of_initial_frame(u, a, vel, v0):
    theta0 = u.theta
    line = Trajectory.from_function(lambda t: theta0 + t * 0.3 * vel, lambda t: 0.3 * vel, 1.0, 50)
    ref = parallel_transport(NORMAL, line, v0, a)
    got = parallel_transport(NORMAL, line, v0, a, u0=u)
    assert np.max(np.abs(got - ref)) <= 1e-9 * max(1.0, np.max(np.abs(ref)))
