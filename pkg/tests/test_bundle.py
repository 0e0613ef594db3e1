import math

import numpy as np
import pytest
from scipy.linalg import expm

from alpha_bundle import bundle as B
from alpha_bundle.errors import LiftDegeneracyError, SingularFrameError
from alpha_bundle.manifold import (Trajectory, christoffel_mixed, covariant_derivative, curvature_apply,
                                   curvature_tensor, fisher_metric)
from alpha_bundle.verify import random_frame, random_group_element

ALPHAS = [-1.0, -0.5, 0.0, 0.5, 1.0]
M = np.array([[0.0, -1.0], [0.5, 0.0]])


def draw(rng, family=None):
    theta = np.array([rng.uniform(-2, 2), rng.uniform(0.5, 3)])
    return random_frame(rng, theta)


def test_frame_rejects_singular():
    with pytest.raises(SingularFrameError):
        B.Frame([0, 1], [[1, 2], [2, 4]])


def test_local_connection_form_values(normal):
    w = B.local_connection_form(normal, [0, 1], 0.0)
    assert np.allclose(w([1, 0]), [[0, -1], [0.5, 0]], atol=0)
    assert np.allclose(w([0, 1]), [[-1, 0], [0, -1]], atol=0)
    assert not np.any(w([0, 0]))


def test_local_connection_form_linear(normal, rng):
    w = B.local_connection_form(normal, [0.3, 1.7], 0.5)
    for _ in range(10):
        X, Y = rng.normal(size=(2, 2))
        a, b = rng.normal(size=2)
        assert np.max(np.abs(w(a * X + b * Y) - a * w(X) - b * w(Y))) <= 1e-10


def test_bundle_connection_form_identity_frame(normal):
    u = B.Frame.identity([0, 1])
    X = B.BundleTangent([1, 0], np.zeros((2, 2)))
    assert np.allclose(B.bundle_connection_form(normal, u, X, 0.0), [[0, -1], [0.5, 0]])


def test_connection_form_reproduces_generators(normal, rng):
    for a in ALPHAS:
        u = draw(rng)
        C = rng.uniform(-1, 1, (2, 2))
        assert np.max(np.abs(B.bundle_connection_form(normal, u, B.fundamental_vertical(u, C), a) - C)) <= 1e-12


def test_connection_form_kills_horizontal(normal, rng):
    for a in ALPHAS:
        u = draw(rng)
        h = B.horizontal_lift_vector(normal, u, rng.normal(size=2), a)
        assert np.max(np.abs(B.bundle_connection_form(normal, u, h, a))) <= 1e-12


def test_connection_form_equivariance(normal, rng):
    for a in ALPHAS:
        u = draw(rng)
        g = random_group_element(rng, 2)
        X = B.BundleTangent(rng.normal(size=2), rng.normal(size=(2, 2)))
        lhs = B.bundle_connection_form(normal, u.right(g), X.pushed_right(g), a)
        rhs = np.linalg.solve(g, B.bundle_connection_form(normal, u, X, a) @ g)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_canonical_form():
    X = B.BundleTangent([2, 3], np.zeros((2, 2)))
    assert np.allclose(B.canonical_form(B.Frame.identity([0, 1]), B.BundleTangent([1, 0], np.zeros((2, 2)))), [1, 0])
    assert np.allclose(B.canonical_form(B.Frame([0, 1], np.diag([2.0, 1.0])), X), [1, 3])


def test_split(normal, rng):
    u = B.Frame.identity([0, 1])
    ver, hor = B.split(normal, u, B.BundleTangent([1, 0], np.zeros((2, 2))), 0.0)
    assert np.allclose(hor.mat, [[0, 1], [-0.5, 0]])
    for a in ALPHAS:
        u = draw(rng)
        X = B.BundleTangent(rng.normal(size=2), rng.normal(size=(2, 2)))
        ver, hor = B.split(normal, u, X, a)
        assert not np.any(ver.base)
        assert np.max(np.abs((ver + hor).flat() - X.flat())) <= 1e-15
        assert np.max(np.abs(B.bundle_connection_form(normal, u, hor, a))) <= 1e-12
        v2, h2 = B.split(normal, u, hor, a)
        assert np.max(np.abs(v2.flat())) <= 1e-15
        v3, h3 = B.split(normal, u, B.fundamental_vertical(u, rng.normal(size=(2, 2))), a)
        assert not np.any(h3.flat())


def test_fundamental_vertical_zero_and_base():
    u = B.Frame([0, 1], [[1, 2], [0, 1]])
    assert B.fundamental_vertical(u, np.zeros((2, 2))).norm() == 0
    assert not np.any(B.fundamental_vertical(u, np.ones((2, 2))).base)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_horizontal_lift_values(normal, alpha):
    u = B.Frame.identity([0, 1])
    X = B.horizontal_lift_vector(normal, u, [1, 0], alpha)
    assert np.allclose(X.mat, [[0, 1 + alpha], [-(1 - alpha) / 2, 0]], atol=1e-15)
    assert B.horizontal_lift_vector(normal, u, [0, 0], alpha).norm() == 0


def test_horizontal_lift_second_coordinate(normal):
    Y = B.horizontal_lift_vector(normal, B.Frame.identity([0, 1]), [0, 1], 0.0)
    assert np.allclose(Y.mat, np.eye(2))


def test_fundamental_horizontal_canonical_and_equivariant(normal, rng):
    for a in ALPHAS:
        u = draw(rng)
        xi = rng.normal(size=2)
        H = B.fundamental_horizontal(normal, u, xi, a)
        assert np.max(np.abs(B.canonical_form(u, H) - xi)) <= 1e-12
        g = random_group_element(rng, 2)
        other = B.fundamental_horizontal(normal, u.right(g), np.linalg.solve(g, xi), a)
        assert (H.pushed_right(g) - other).norm() <= 1e-12


def test_vertical_horizontal_bracket(normal, rng):
    for a in ALPHAS:
        u = draw(rng)
        xi, C = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, (2, 2))
        br = B.bracket(B.vertical_field(C), B.horizontal_field(normal, xi, a), u)
        assert (br - B.fundamental_horizontal(normal, u, C @ xi, a)).norm() <= 1e-5


def test_horizontal_bracket_projects_to_chart_bracket(normal, rng):
    # pi_* of the horizontal part of [X~, Y~] is [X, Y] for affine chart fields
    for a in ALPHAS:
        u = draw(rng)
        P, Q = rng.uniform(-1, 1, (2, 2, 2))
        x0, y0 = rng.uniform(-1, 1, (2, 2))
        X = lambda th, x0=x0, P=P: x0 + P @ (th - u.theta)
        Y = lambda th, y0=y0, Q=Q: y0 + Q @ (th - u.theta)
        br = B.bracket(B.lift_field(normal, X, a), B.lift_field(normal, Y, a), u)
        _, hor = B.split(normal, u, br, a)
        assert np.max(np.abs(hor.base - (Q @ x0 - P @ y0))) <= 1e-5


def test_covariant_derivative_identity_frame(normal):
    u = B.Frame.identity([0, 1])
    for a in ALPHAS:
        assert np.allclose(B.bundle_covariant_derivative(normal, [1, 0], [1, 0], u, a), [0, (1 - a) / 2], atol=1e-8)
        assert np.allclose(B.bundle_covariant_derivative(normal, [1, 0], [0, 1], u, a), [-(1 + a), 0], atol=1e-8)


def test_covariant_derivative_matches_chart_and_is_frame_independent(normal, rng):
    for k in range(20):
        a = ALPHAS[k % 5]
        u = draw(rng)
        X, Y = rng.uniform(-1, 1, (2, 2))
        want = covariant_derivative(christoffel_mixed(normal, u.theta, a), X, Y, np.zeros((2, 2)))
        got = B.bundle_covariant_derivative(normal, X, Y, u, a)
        assert np.max(np.abs(got - want)) <= 1e-6
        other = B.bundle_covariant_derivative(normal, X, Y, random_frame(rng, u.theta), a)
        assert np.max(np.abs(got - other)) <= 1e-8


def test_torsion_free_on_coordinate_fields(normal, rng):
    for a in ALPHAS:
        u = draw(rng)
        assert np.max(np.abs(B.torsion_form_eval(normal, u, [1, 0], [0, 1], a))) <= 1e-5
        X = rng.normal(size=2)
        assert not np.any(B.torsion_form_eval(normal, u, X, X.copy(), a))


def test_torsion_on_non_coordinate_fields(normal, rng):
    for a in ALPHAS:
        u = draw(rng)
        P, Q = rng.uniform(-1, 1, (2, 2, 2))
        x0, y0 = rng.uniform(-1, 1, (2, 2))
        X = lambda th, x0=x0, P=P: x0 + P @ (th - u.theta)
        Y = lambda th, y0=y0, Q=Q: y0 + Q @ (th - u.theta)
        G = christoffel_mixed(normal, u.theta, a)
        chart = covariant_derivative(G, x0, y0, Q) - covariant_derivative(G, y0, x0, P) - (Q @ x0 - P @ y0)
        assert np.max(np.abs(u(B.torsion_form_eval(normal, u, X, Y, a)) - chart)) <= 1e-5


def test_curvature_form_identity_frame(normal):
    u = B.Frame.identity([0, 1])
    g = fisher_metric(normal, [0, 1])
    omega = B.curvature_form_eval(normal, u, [1, 0], [0, 1], 0.0)
    # pairing of R(d1, d2) d1 with d2
    assert g[1] @ (omega @ [1, 0]) == pytest.approx(1.0, abs=1e-6)
    assert np.max(np.abs(B.curvature_form_eval(normal, u, [1, 0], [0, 1], 1.0))) <= 1e-5
    assert not np.any(B.curvature_form_eval(normal, u, [1, 0], [1, 0], 0.5))


def test_curvature_via_bundle(normal, rng):
    u = B.Frame.identity([0, 1])
    g = fisher_metric(normal, [0, 1])
    assert g[1] @ B.curvature_via_bundle(normal, u, [1, 0], [0, 1], [1, 0], 0.0) == pytest.approx(1.0, abs=1e-6)
    assert not np.any(B.curvature_via_bundle(normal, u, [1, 0], [0, 1], [0, 0], 0.0))
    for a in ALPHAS:
        u = draw(rng)
        X, Y, Z = rng.normal(size=(3, 2))
        R = curvature_tensor(normal, u.theta, a)
        got = B.curvature_via_bundle(normal, u, X, Y, Z, a)
        assert np.max(np.abs(got - curvature_apply(R, fisher_metric(normal, u.theta), X, Y, Z))) <= 1e-4
        swapped = B.curvature_via_bundle(normal, u, Y, X, Z, a)
        assert np.linalg.norm(got + swapped) <= 1e-8 * max(1.0, np.linalg.norm(got))


def test_lift_of_constant_curve(normal):
    curve = Trajectory.from_function(lambda t: np.array([0.0, 1.0]), lambda t: np.zeros(2), 1.0, 10)
    u0 = B.Frame([0, 1], [[1, 2], [3, 4]])
    lift = B.horizontal_lift_curve(normal, curve, u0, 0.3)
    assert np.all(lift.A == u0.A)
    assert np.array_equal(B.parallel_transport(normal, curve, [1, 2], 0.3), [1, 2])


def line(T, steps=400):
    return Trajectory.from_function(lambda t: np.array([t, 1.0]), lambda t: np.array([1.0, 0.0]), T, steps)


def test_lift_matches_exponential_oracle(normal):
    T = math.sqrt(2) * math.pi
    lift = B.horizontal_lift_curve(normal, line(T), B.Frame.identity([0, 1]), 0.0)
    assert np.max(np.abs(lift.A[-1] + np.eye(2))) <= 1e-6
    k = len(lift.t) // 3
    assert np.max(np.abs(lift.A[k] - expm(-lift.t[k] * M))) <= 1e-6
    assert np.allclose(B.parallel_transport(normal, line(T), [1, 0], 0.0), [-1, 0], atol=1e-5)


def test_lift_projects_and_is_horizontal(normal):
    lift = B.horizontal_lift_curve(normal, line(2.0), B.Frame.identity([0, 1]), 0.5)
    for th, u in zip(lift.base.theta, lift.frames):
        assert np.array_equal(u.theta, th)
    dA = np.gradient(lift.A, lift.t, axis=0)
    k = len(lift.t) // 2
    vel = B.BundleTangent(lift.base.velocity[k], dA[k])
    assert np.max(np.abs(B.bundle_connection_form(normal, lift.frames[k], vel, 0.5))) <= 1e-3


def test_lift_right_translation(normal, rng):
    for a in ALPHAS:
        u0 = random_frame(rng, np.array([0.0, 1.0]))
        g = random_group_element(rng, 2)
        A = B.horizontal_lift_curve(normal, line(1.0, 50), u0, a).A
        Ag = B.horizontal_lift_curve(normal, line(1.0, 50), u0.right(g), a).A
        assert np.max(np.abs(Ag - A @ g)) <= 1e-8


def test_transport_frame_independent(normal, rng):
    v = rng.normal(size=2)
    ref = B.parallel_transport(normal, line(1.0, 50), v, 0.5)
    u0 = random_frame(rng, np.array([0.0, 1.0]))
    assert np.max(np.abs(B.parallel_transport(normal, line(1.0, 50), v, 0.5, u0) - ref)) <= 1e-9


def test_lift_start_must_match(normal):
    with pytest.raises(ValueError):
        B.horizontal_lift_curve(normal, line(1.0), B.Frame.identity([0, 2]), 0.0)


def test_lift_degeneracy_reports_time(normal):
    # a connection that shrinks the frame exponentially fast
    from alpha_bundle.expectation import ClosedForm, StatisticalFamily
    shrink = StatisticalFamily(name="shrink", n=1, domain=normal.domain.__class__((-np.inf,), (np.inf,)),
                               sample_space=normal.sample_space, log_density=lambda x, th: x * 0,
                               quad_hint=lambda th: (0.0, 1.0),
                               closed=ClosedForm(christoffel_mixed=lambda th, a: np.full((1, 1, 1), 40.0)))
    curve = Trajectory.from_function(lambda t: np.array([t]), lambda t: np.array([1.0]), 1.0, 100)
    with pytest.raises(LiftDegeneracyError) as info:
        B.horizontal_lift_curve(shrink, curve, B.Frame.identity([0.0]), 0.0)
    assert 0 < info.value.t < 1


def test_structure_equations_and_bianchi(normal, rng):
    for a in ALPHAS:
        u = draw(rng)
        fc = B.FormCalculus(normal, a)
        xi = rng.uniform(-1, 1, (3, 2))
        V = B.fundamental_vertical(u, rng.uniform(-1, 1, (2, 2)))
        H = [fc.H(x)(u) for x in xi]
        assert max(fc.structure_residuals(u, H[0], H[1])) <= 1e-4
        assert max(fc.structure_residuals(u, H[0], V)) <= 1e-4
        assert max(B.bianchi_residuals(normal, u, xi, a)) <= 1e-4
        assert B.bianchi_residuals(normal, u, [xi[0], xi[0], xi[1]], a) == (0.0, 0.0)


def test_forms_vanish_on_verticals(normal, rng):
    u = draw(rng)
    fc = B.FormCalculus(normal, 0.5)
    V1, V2 = (B.fundamental_vertical(u, c) for c in rng.uniform(-1, 1, (2, 2, 2)))
    assert not np.any(fc.torsion(u, V1, V2)) and not np.any(fc.curvature(u, V1, V2))
    assert np.max(np.abs(fc.second_structure_rhs(u, V1, V2))) <= 1e-6
