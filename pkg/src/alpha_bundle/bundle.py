"""Frame-bundle geometry of the alpha-connections.

A frame is ``u = (theta, A)`` where column ``j`` of ``A`` holds the chart
components of the frame vector ``e_j``, so ``u(xi) = A @ xi``.  A tangent vector
to the bundle is a pair ``(base, mat)`` of a chart vector and an ``n x n`` matrix.

The connection form is taken as

    omega~(X) = A^-1 omega(X.base) A + A^-1 X.mat

with ``omega(v)[k, j] = Gamma^k_ji v^i``.  This ordering is the one compatible with
right-equivariance ``R_g^* omega~ = Ad(g^-1) omega~`` and it agrees with the
conjugated form ``A omega A^-1`` at the identity frame.

Vector fields on the bundle are callables ``Frame -> BundleTangent``; their
derivatives and brackets are taken by central differences along straight
coordinate curves ``(theta + t V.base, A + t V.mat)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import LiftDegeneracyError, SingularFrameError
from .expectation import StatisticalFamily, Strategy, resolve
from .manifold import Trajectory, christoffel_mixed
from .numerics import BRACKET_STEP, DIRECTIONAL_STEP, FORM_STEP, central_diff, hermite_midpoint

DET_FLOOR = 1e-12


@dataclass(frozen=True)
class Frame:
    theta: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float)
        if A.shape != (theta.size, theta.size):
            raise ValueError("frame matrix must be n x n")
        det = np.linalg.det(A)
        if not abs(det) > DET_FLOOR:
            raise SingularFrameError(f"frame matrix is singular (det={det!r})")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "A", A)

    @classmethod
    def identity(cls, theta) -> "Frame":
        theta = np.asarray(theta, dtype=float).reshape(-1)
        return cls(theta, np.eye(theta.size))

    @property
    def n(self) -> int:
        return self.theta.size

    @property
    def A_inv(self) -> np.ndarray:
        return np.linalg.inv(self.A)

    def __call__(self, xi) -> np.ndarray:
        return self.A @ np.asarray(xi, dtype=float)

    def right(self, g) -> "Frame":
        return Frame(self.theta, self.A @ np.asarray(g, dtype=float))

    def moved(self, V: "BundleTangent", t: float) -> "Frame":
        return Frame(self.theta + t * V.base, self.A + t * V.mat)


@dataclass(frozen=True)
class BundleTangent:
    base: np.ndarray
    mat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float).reshape(-1))
        object.__setattr__(self, "mat", np.asarray(self.mat, dtype=float))

    @classmethod
    def zero(cls, n: int) -> "BundleTangent":
        return cls(np.zeros(n), np.zeros((n, n)))

    @classmethod
    def from_flat(cls, v: np.ndarray, n: int) -> "BundleTangent":
        return cls(v[:n], v[n:].reshape(n, n))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.base, self.mat.ravel()])

    def __add__(self, other):
        return BundleTangent(self.base + other.base, self.mat + other.mat)

    def __sub__(self, other):
        return BundleTangent(self.base - other.base, self.mat - other.mat)

    def __mul__(self, c):
        return BundleTangent(c * self.base, c * self.mat)

    __rmul__ = __mul__

    def __neg__(self):
        return BundleTangent(-self.base, -self.mat)

    def pushed_right(self, g) -> "BundleTangent":
        """Image under the differential of ``R_g``."""
        return BundleTangent(self.base, self.mat @ np.asarray(g, dtype=float))

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat()))


class ConnectionFormLocal:
    """Chart connection form ``X -> omega(X)`` with ``omega(X)[k, j] = Gamma^k_ji X^i``."""

    def __init__(self, theta, alpha: float, christoffel: np.ndarray):
        self.theta = np.asarray(theta, dtype=float)
        self.alpha = float(alpha)
        self.christoffel = np.asarray(christoffel, dtype=float)

    def __call__(self, X) -> np.ndarray:
        return np.einsum("kji,i->kj", self.christoffel, np.asarray(X, dtype=float))


def _gamma(family, theta, alpha, strategy):
    return christoffel_mixed(family, theta, alpha, strategy)


def _omega(family, theta, alpha, strategy, X) -> np.ndarray:
    return np.einsum("kji,i->kj", _gamma(family, theta, alpha, strategy), np.asarray(X, dtype=float))


def local_connection_form(family: StatisticalFamily, theta, alpha: float,
                          strategy: Optional[Strategy] = None) -> ConnectionFormLocal:
    return ConnectionFormLocal(theta, alpha, _gamma(family, theta, alpha, resolve(family, strategy)))


def bundle_connection_form(family: StatisticalFamily, u: Frame, X: BundleTangent, alpha: float,
                           strategy: Optional[Strategy] = None) -> np.ndarray:
    Ainv = u.A_inv
    w = _omega(family, u.theta, alpha, resolve(family, strategy), X.base)
    return Ainv @ w @ u.A + Ainv @ X.mat


def canonical_form(u: Frame, X: BundleTangent) -> np.ndarray:
    """``theta(X) = u^-1(pi_* X)``."""
    return np.linalg.solve(u.A, X.base)


def horizontal_lift_vector(family: StatisticalFamily, u: Frame, X_base, alpha: float,
                           strategy: Optional[Strategy] = None) -> BundleTangent:
    X_base = np.asarray(X_base, dtype=float)
    w = _omega(family, u.theta, alpha, resolve(family, strategy), X_base)
    return BundleTangent(X_base, -w @ u.A)


def split(family: StatisticalFamily, u: Frame, X: BundleTangent, alpha: float,
          strategy: Optional[Strategy] = None):
    """Return ``(vertical, horizontal)`` parts of ``X``."""
    hor = horizontal_lift_vector(family, u, X.base, alpha, strategy)
    ver = BundleTangent(np.zeros_like(X.base), X.mat - hor.mat)
    return ver, hor


def fundamental_vertical(u: Frame, C) -> BundleTangent:
    """Velocity of ``t -> (theta, A exp(tC))`` at ``t = 0``."""
    return BundleTangent(np.zeros(u.n), u.A @ np.asarray(C, dtype=float))


def fundamental_horizontal(family: StatisticalFamily, u: Frame, xi, alpha: float,
                           strategy: Optional[Strategy] = None) -> BundleTangent:
    return horizontal_lift_vector(family, u, u(xi), alpha, strategy)


# ------------------------------------------------------------------- vector fields

BundleField = Callable[[Frame], BundleTangent]
ChartField = Callable[[np.ndarray], np.ndarray]


def as_chart_field(X: Union[ChartField, Sequence[float], np.ndarray]) -> ChartField:
    if callable(X):
        return X
    v = np.asarray(X, dtype=float)
    return lambda theta: v


def lift_field(family: StatisticalFamily, X, alpha: float, strategy: Optional[Strategy] = None) -> BundleField:
    """Horizontal lift of a chart vector field (or a constant vector)."""
    Xf = as_chart_field(X)
    strategy = resolve(family, strategy)
    return lambda u: horizontal_lift_vector(family, u, Xf(u.theta), alpha, strategy)


def horizontal_field(family: StatisticalFamily, xi, alpha: float, strategy: Optional[Strategy] = None) -> BundleField:
    """Fundamental horizontal field ``H(xi)``."""
    xi = np.asarray(xi, dtype=float)
    strategy = resolve(family, strategy)
    return lambda u: fundamental_horizontal(family, u, xi, alpha, strategy)


def vertical_field(C) -> BundleField:
    """Fundamental vertical field ``tau(C)``."""
    C = np.asarray(C, dtype=float)
    return lambda u: fundamental_vertical(u, C)


def _as_array(val) -> np.ndarray:
    return val.flat() if isinstance(val, BundleTangent) else np.asarray(val, dtype=float)


def derivative_along(f: Callable[[Frame], object], u: Frame, V: BundleTangent,
                     h: float = DIRECTIONAL_STEP, order: int = 2) -> np.ndarray:
    """``V(f)`` at ``u`` for an array-valued function on the bundle."""
    return central_diff(lambda t: _as_array(f(u.moved(V, t))), h, order)


def bracket(U: BundleField, V: BundleField, u: Frame, h: float = BRACKET_STEP, order: int = 2) -> BundleTangent:
    """``[U, V]`` at ``u``: componentwise ``U(V^a) - V(U^a)``."""
    du = derivative_along(V, u, U(u), h, order)
    dv = derivative_along(U, u, V(u), h, order)
    return BundleTangent.from_flat(du - dv, u.n)


def canonical_of(field: BundleField) -> Callable[[Frame], np.ndarray]:
    return lambda u: canonical_form(u, field(u))


# ------------------------------------------------------------- curves, transport

@dataclass
class BundleTrajectory:
    t: np.ndarray
    A: np.ndarray
    base: Trajectory

    @property
    def frames(self) -> list:
        return [Frame(th, a) for th, a in zip(self.base.theta, self.A)]


def horizontal_lift_curve(family: StatisticalFamily, gamma: Trajectory, u0: Frame, alpha: float,
                          strategy: Optional[Strategy] = None) -> BundleTrajectory:
    """Solve ``A' = -omega(gamma') A`` by RK4 on the curve's time grid.

    Midpoint stages use the cubic Hermite interpolant of the sampled curve.
    """
    strategy = resolve(family, strategy)
    if not np.allclose(u0.theta, gamma.theta[0], rtol=0, atol=1e-12):
        raise ValueError("initial frame does not lie over gamma(0)")

    def rhs(theta, v, A):
        return -_omega(family, theta, alpha, strategy, v) @ A

    As = [u0.A.copy()]
    A = u0.A.copy()
    for k in range(len(gamma) - 1):
        h = gamma.t[k + 1] - gamma.t[k]
        p0, v0 = gamma.theta[k], gamma.velocity[k]
        p1, v1 = gamma.theta[k + 1], gamma.velocity[k + 1]
        pm, vm = hermite_midpoint(p0, v0, p1, v1, h)
        k1 = rhs(p0, v0, A)
        k2 = rhs(pm, vm, A + 0.5 * h * k1)
        k3 = rhs(pm, vm, A + 0.5 * h * k2)
        k4 = rhs(p1, v1, A + h * k3)
        A = A + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        det = np.linalg.det(A)
        if not abs(det) > DET_FLOOR:
            raise LiftDegeneracyError(float(gamma.t[k + 1]), float(det))
        As.append(A)
    return BundleTrajectory(gamma.t.copy(), np.array(As), gamma)


def transport_path(family: StatisticalFamily, gamma: Trajectory, v0, alpha: float,
                   u0: Optional[Frame] = None, strategy: Optional[Strategy] = None):
    """Lift plus the transported vector ``A(t) A(0)^-1 v0`` at every sample."""
    if u0 is None:
        u0 = Frame.identity(gamma.theta[0])
    lift = horizontal_lift_curve(family, gamma, u0, alpha, strategy)
    xi = np.linalg.solve(u0.A, np.asarray(v0, dtype=float))
    return lift, lift.A @ xi


def parallel_transport(family: StatisticalFamily, gamma: Trajectory, v0, alpha: float,
                       u0: Optional[Frame] = None, strategy: Optional[Strategy] = None) -> np.ndarray:
    return transport_path(family, gamma, v0, alpha, u0, strategy)[1][-1]


# ------------------------------------------------------ bundle-side evaluators of chart objects

def bundle_covariant_derivative(family: StatisticalFamily, X_field, Y_field, u: Frame, alpha: float,
                                strategy: Optional[Strategy] = None, h: float = DIRECTIONAL_STEP) -> np.ndarray:
    """``u( X~(theta(Y~)) )`` along the straight curve tangent to ``X~`` at ``u``."""
    strategy = resolve(family, strategy)
    Xf, Yf = as_chart_field(X_field), as_chart_field(Y_field)
    Xt = horizontal_lift_vector(family, u, Xf(u.theta), alpha, strategy)

    def theta_Y(t):
        w = u.moved(Xt, t)
        return np.linalg.solve(w.A, Yf(w.theta))

    return u.A @ central_diff(theta_Y, h)


def torsion_form_eval(family: StatisticalFamily, u: Frame, X, Y, alpha: float,
                      strategy: Optional[Strategy] = None,
                      h: float = DIRECTIONAL_STEP, h_bracket: float = BRACKET_STEP) -> np.ndarray:
    """``Theta(X~, Y~) = X~(theta(Y~)) - Y~(theta(X~)) - theta([X~, Y~])`` for lift fields."""
    Xt = lift_field(family, X, alpha, strategy)
    Yt = lift_field(family, Y, alpha, strategy)
    a = derivative_along(canonical_of(Yt), u, Xt(u), h)
    b = derivative_along(canonical_of(Xt), u, Yt(u), h)
    return a - b - canonical_form(u, bracket(Xt, Yt, u, h_bracket))


def curvature_form_eval(family: StatisticalFamily, u: Frame, X, Y, alpha: float,
                        strategy: Optional[Strategy] = None, h_bracket: float = BRACKET_STEP) -> np.ndarray:
    """``Omega(X~, Y~) = -omega~([X~, Y~])`` (``omega~`` vanishes on lift fields)."""
    Xt = lift_field(family, X, alpha, strategy)
    Yt = lift_field(family, Y, alpha, strategy)
    return -bundle_connection_form(family, u, bracket(Xt, Yt, u, h_bracket), alpha, strategy)


def curvature_via_bundle(family: StatisticalFamily, u: Frame, X, Y, Z, alpha: float,
                         strategy: Optional[Strategy] = None, h_bracket: float = BRACKET_STEP) -> np.ndarray:
    """``R(X, Y) Z = u( Omega(X~, Y~) u^-1(Z) )``."""
    omega = curvature_form_eval(family, u, X, Y, alpha, strategy, h_bracket)
    return u.A @ (omega @ np.linalg.solve(u.A, np.asarray(Z, dtype=float)))


# --------------------------------------------- torsion / curvature 2-forms, d, Bianchi

class FormCalculus:
    """Numerical exterior calculus of ``theta``, ``omega~``, ``Theta`` and ``Omega``.

    ``Theta`` and ``Omega`` are evaluated from their definitions ``d(.) o h``: both
    arguments are projected to horizontal vectors, extended as fundamental
    horizontal fields, and ``d`` is taken with the bracket formula.  ``step``
    is used for every directional derivative and bracket.  The default fourth-order
    stencil keeps truncation error well above round-off at ``step=1e-2`` so that
    step-halving reveals the convergence order.
    """

    def __init__(self, family: StatisticalFamily, alpha: float, strategy: Optional[Strategy] = None,
                 step: float = FORM_STEP, order: int = 4):
        self.family = family
        self.alpha = float(alpha)
        self.strategy = resolve(family, strategy)
        self.step = step
        self.order = order

    # 1-forms
    def theta(self, u: Frame, V: BundleTangent) -> np.ndarray:
        return canonical_form(u, V)

    def omega(self, u: Frame, V: BundleTangent) -> np.ndarray:
        return bundle_connection_form(self.family, u, V, self.alpha, self.strategy)

    def H(self, xi) -> BundleField:
        return horizontal_field(self.family, xi, self.alpha, self.strategy)

    def bracket(self, U: BundleField, V: BundleField, u: Frame) -> BundleTangent:
        return bracket(U, V, u, self.step, self.order)

    def d_const(self, form, u: Frame, V: BundleTangent, W: BundleTangent) -> np.ndarray:
        """``d form(V, W)`` with ``V``, ``W`` extended as constant coordinate fields."""
        a = central_diff(lambda t: form(u.moved(V, t), W), self.step, self.order)
        b = central_diff(lambda t: form(u.moved(W, t), V), self.step, self.order)
        return a - b

    def _horizontal_bracket(self, u: Frame, V: BundleTangent, W: BundleTangent) -> BundleTangent:
        return self.bracket(self.H(self.theta(u, V)), self.H(self.theta(u, W)), u)

    # 2-forms from their definitions
    def torsion(self, u: Frame, V: BundleTangent, W: BundleTangent) -> np.ndarray:
        return -self.theta(u, self._horizontal_bracket(u, V, W))

    def curvature(self, u: Frame, V: BundleTangent, W: BundleTangent) -> np.ndarray:
        return -self.omega(u, self._horizontal_bracket(u, V, W))

    # structure equations, right-hand sides
    def first_structure_rhs(self, u, V, W) -> np.ndarray:
        return (self.d_const(self.theta, u, V, W)
                + self.omega(u, V) @ self.theta(u, W) - self.omega(u, W) @ self.theta(u, V))

    def second_structure_rhs(self, u, V, W) -> np.ndarray:
        a, b = self.omega(u, V), self.omega(u, W)
        return self.d_const(self.omega, u, V, W) + a @ b - b @ a

    def structure_residuals(self, u, V, W):
        r1 = np.linalg.norm(self.torsion(u, V, W) - self.first_structure_rhs(u, V, W))
        r2 = np.linalg.norm(self.curvature(u, V, W) - self.second_structure_rhs(u, V, W))
        return float(r1), float(r2)

    # exterior derivative of a 2-form on three fields
    def d2(self, form2, fields: Sequence[BundleField], u: Frame) -> np.ndarray:
        U1, U2, U3 = fields

        def pair(P, Q):
            return lambda w: form2(w, P(w), Q(w))

        def along(P, f):
            return central_diff(lambda t: f(u.moved(P(u), t)), self.step, self.order)

        return (along(U1, pair(U2, U3)) - along(U2, pair(U1, U3)) + along(U3, pair(U1, U2))
                - form2(u, self.bracket(U1, U2, u), U3(u))
                + form2(u, self.bracket(U1, U3, u), U2(u))
                - form2(u, self.bracket(U2, U3, u), U1(u)))

    def bianchi_residuals(self, u: Frame, xis) -> tuple:
        fields = [self.H(xi) for xi in xis]
        V = [f(u) for f in fields]
        th = [self.theta(u, v) for v in V]
        om = [self.omega(u, v) for v in V]
        Th = {(i, j): self.torsion(u, V[i], V[j]) for i, j in ((0, 1), (0, 2), (1, 2))}
        Om = {(i, j): self.curvature(u, V[i], V[j]) for i, j in ((0, 1), (0, 2), (1, 2))}
        om_wedge_Th = om[0] @ Th[1, 2] - om[1] @ Th[0, 2] + om[2] @ Th[0, 1]
        Om_wedge_th = Om[0, 1] @ th[2] - Om[0, 2] @ th[1] + Om[1, 2] @ th[0]
        first = self.d2(self.torsion, fields, u) - Om_wedge_th + om_wedge_Th
        Om_wedge_om = Om[0, 1] @ om[2] - Om[0, 2] @ om[1] + Om[1, 2] @ om[0]
        om_wedge_Om = om[0] @ Om[1, 2] - om[1] @ Om[0, 2] + om[2] @ Om[0, 1]
        second = self.d2(self.curvature, fields, u) - (Om_wedge_om - om_wedge_Om)
        return float(np.linalg.norm(first)), float(np.linalg.norm(second))


def bianchi_residuals(family: StatisticalFamily, u: Frame, triple, alpha: float,
                      strategy: Optional[Strategy] = None, step: float = FORM_STEP, order: int = 4) -> tuple:
    """Norms of ``dTheta - Omega^theta + omega~^Theta`` and ``dOmega - [Omega, omega~]``
    on the fundamental horizontal fields ``H(xi_1), H(xi_2), H(xi_3)``."""
    return FormCalculus(family, alpha, strategy, step, order).bianchi_residuals(u, triple)
