"""Chart-level alpha-geometry: Fisher metric, skewness, alpha-Christoffel symbols,
curvature, flatness and alpha-geodesics.

Index conventions (0-based):

* ``christoffel_lower[i, j, k] = <nabla_i d_j, d_k>`` (symmetric in ``i, j``)
* ``christoffel_mixed[k, i, j] = Gamma^k_ij``, so ``nabla_i d_j = Gamma^k_ij d_k``
* ``curvature[i, j, k, l] = <R(d_i, d_j) d_k, d_l>`` with
  ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import DomainError, DomainMarginError, IntegrationError, SingularMetricError
from .expectation import StatisticalFamily, Strategy, resolve, score_moments
from .numerics import CHRISTOFFEL_REL_STEP, rel_step, sample_derivative, symmetrize

METRIC_EIG_FLOOR = 1e-12


def _check_metric(g: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvalsh(g)
    if not np.all(np.isfinite(eig)) or eig.min() < METRIC_EIG_FLOOR:
        raise SingularMetricError(eig)
    return g


def _closed(family, name):
    return getattr(family.closed, name, None) if family.closed is not None else None


def _quad(strategy: Strategy) -> Strategy:
    return strategy if strategy.kind != "closed" else Strategy.quadrature()


def fisher_metric(family: StatisticalFamily, theta, strategy: Optional[Strategy] = None) -> np.ndarray:
    """``g_ij = E[(d_i l)(d_j l)]``, symmetrised and checked for positive definiteness."""
    strategy = resolve(family, strategy)
    theta = family.check(theta)
    provider = _closed(family, "metric")
    if strategy.kind == "closed" and provider is not None:
        g = np.asarray(provider(theta), dtype=float)
    else:
        g = score_moments(family, theta, _quad(strategy))[0]
    return _check_metric(symmetrize(g))


def skewness_tensor(family: StatisticalFamily, theta, strategy: Optional[Strategy] = None) -> np.ndarray:
    """``T_ijk = E[(d_i l)(d_j l)(d_k l)]``."""
    strategy = resolve(family, strategy)
    theta = family.check(theta)
    provider = _closed(family, "skewness")
    if strategy.kind == "closed" and provider is not None:
        return np.asarray(provider(theta), dtype=float)
    return score_moments(family, theta, _quad(strategy))[1]


def _geometry(family, theta, alpha, strategy):
    """(g, Gamma_lower) at theta for one strategy."""
    provider_g = _closed(family, "metric")
    provider_l = _closed(family, "christoffel_lower")
    if strategy.kind == "closed" and provider_g is not None and provider_l is not None:
        g = np.asarray(provider_g(theta), dtype=float)
        low = np.asarray(provider_l(theta, alpha), dtype=float)
    else:
        g, t, e2 = score_moments(family, theta, _quad(strategy))
        low = e2 + 0.5 * (1.0 - alpha) * t
    return _check_metric(symmetrize(g)), low


def christoffel_lower(family: StatisticalFamily, theta, alpha: float,
                      strategy: Optional[Strategy] = None) -> np.ndarray:
    """``Gamma^(alpha)_ijk = E[(d_i d_j l)(d_k l)] + (1 - alpha)/2 T_ijk``."""
    strategy = resolve(family, strategy)
    theta = family.check(theta)
    return _geometry(family, theta, float(alpha), strategy)[1]


def raise_index(lower: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``Gamma^s_jk = Gamma_jki g^is`` stored as ``[s, j, k]``."""
    ginv = np.linalg.inv(g)
    return np.einsum("jki,is->sjk", lower, ginv)


def lower_index(mixed: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.einsum("sjk,si->jki", mixed, g)


def christoffel_mixed(family: StatisticalFamily, theta, alpha: float,
                      strategy: Optional[Strategy] = None) -> np.ndarray:
    strategy = resolve(family, strategy)
    theta = family.check(theta)
    provider = _closed(family, "christoffel_mixed")
    if strategy.kind == "closed" and provider is not None:
        return np.asarray(provider(theta, float(alpha)), dtype=float)
    g, low = _geometry(family, theta, float(alpha), strategy)
    return raise_index(low, g)


def _stencil_points(family, theta, h_rel):
    pts = []
    for m in range(family.n):
        h = rel_step(theta[m], h_rel)
        e = np.zeros(family.n)
        e[m] = h
        for p in (theta + e, theta - e):
            if not family.domain.contains(p):
                raise DomainMarginError(
                    f"theta={theta.tolist()} is closer than {h:g} to the domain boundary")
        pts.append((h, theta + e, theta - e))
    return pts


def christoffel_derivative(family: StatisticalFamily, theta, alpha: float,
                           strategy: Optional[Strategy] = None,
                           h_rel: float = CHRISTOFFEL_REL_STEP) -> np.ndarray:
    """``d_m Gamma^k_ij`` stored as ``[m, k, i, j]``; analytic when the family provides it."""
    strategy = resolve(family, strategy)
    theta = family.check(theta)
    provider = _closed(family, "christoffel_mixed_derivative")
    if strategy.kind == "closed" and provider is not None:
        return np.asarray(provider(theta, float(alpha)), dtype=float)
    out = []
    for h, plus, minus in _stencil_points(family, theta, h_rel):
        out.append((christoffel_mixed(family, plus, alpha, strategy)
                    - christoffel_mixed(family, minus, alpha, strategy)) / (2.0 * h))
    return np.stack(out)


def curvature_from_parts(g: np.ndarray, mixed: np.ndarray, d_mixed: np.ndarray) -> np.ndarray:
    """``R_ijkl = (d_i G^s_jk - d_j G^s_ik) g_sl + Gamma_itl G^t_jk - Gamma_jtl G^t_ik``."""
    low = lower_index(mixed, g)
    deriv = np.einsum("isjk,sl->ijkl", d_mixed, g)
    deriv = deriv - deriv.transpose(1, 0, 2, 3)
    quad = np.einsum("itl,tjk->ijkl", low, mixed)
    quad = quad - quad.transpose(1, 0, 2, 3)
    return deriv + quad


def curvature_tensor(family: StatisticalFamily, theta, alpha: float,
                     strategy: Optional[Strategy] = None,
                     h_rel: float = CHRISTOFFEL_REL_STEP) -> np.ndarray:
    """``R^(alpha)_ijkl = <R(d_i, d_j) d_k, d_l>``, antisymmetric in ``(i, j)``."""
    strategy = resolve(family, strategy)
    theta = family.check(theta)
    alpha = float(alpha)
    g, low = _geometry(family, theta, alpha, strategy)
    mixed = christoffel_mixed(family, theta, alpha, strategy)
    d_mixed = christoffel_derivative(family, theta, alpha, strategy, h_rel)
    return curvature_from_parts(g, mixed, d_mixed)


def curvature_apply(R: np.ndarray, g: np.ndarray, X, Y, Z) -> np.ndarray:
    """The vector ``R(X, Y) Z`` from the all-lower tensor and the metric."""
    low = np.einsum("ijkl,i,j,k->l", R, X, Y, Z)
    return np.linalg.solve(g, low)


def sectional_curvature(family: StatisticalFamily, theta, alpha: float = 0.0,
                        strategy: Optional[Strategy] = None) -> float:
    """``K = -R_0101 / det g`` for a two-parameter family."""
    if family.n != 2:
        raise ValueError("sectional curvature of the coordinate plane needs n = 2")
    R = curvature_tensor(family, theta, alpha, strategy)
    g = fisher_metric(family, theta, strategy)
    return float(-R[0, 1, 0, 1] / np.linalg.det(g))


def covariant_derivative(mixed: np.ndarray, X, Y, dY) -> np.ndarray:
    """Chart-side ``nabla_X Y = dY . X + Gamma^k_ij X^i Y^j``; ``dY[k, m] = d_m Y^k``."""
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    return np.asarray(dY, float) @ X + np.einsum("kij,i,j->k", mixed, X, Y)


@dataclass
class FlatnessReport:
    alpha: float
    max_abs: float
    argmax: list
    tol: float
    flat: bool


def alpha_flatness(family: StatisticalFamily, grid: Iterable, alpha: float, tol: float = 1e-6,
                   strategy: Optional[Strategy] = None) -> FlatnessReport:
    worst, where = 0.0, None
    for theta in grid:
        theta = np.asarray(theta, dtype=float)
        m = float(np.max(np.abs(curvature_tensor(family, theta, alpha, strategy))))
        if where is None or m > worst:
            worst, where = m, theta.tolist()
    if where is None:
        raise ValueError("empty grid")
    return FlatnessReport(float(alpha), worst, where, tol, worst < tol)


@dataclass
class Trajectory:
    """Time-sampled curve ``theta(t)`` with velocities; ``residual`` holds per-sample diagnostics."""

    t: np.ndarray
    theta: np.ndarray
    velocity: np.ndarray
    alpha: float = 0.0
    dt: float = 0.0
    exited: bool = False
    residual: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.t = np.asarray(self.t, float)
        self.theta = np.asarray(self.theta, float)
        self.velocity = np.asarray(self.velocity, float)
        if self.t.ndim != 1 or self.theta.shape != self.velocity.shape or len(self.t) != len(self.theta):
            raise ValueError("inconsistent trajectory shapes")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @classmethod
    def from_function(cls, curve, velocity, t_end: float, steps: int, alpha: float = 0.0):
        t = np.linspace(0.0, t_end, steps + 1)
        return cls(t, np.array([curve(s) for s in t]), np.array([velocity(s) for s in t]),
                   alpha=alpha, dt=t_end / steps)


def _acceleration(family, theta, v, alpha, strategy):
    G = christoffel_mixed(family, theta, alpha, strategy)
    return -np.einsum("kij,i,j->k", G, v, v)


def geodesic_residual(family: StatisticalFamily, traj: Trajectory, alpha: float,
                      strategy: Optional[Strategy] = None) -> np.ndarray:
    """``|d/dt theta' + Gamma(theta', theta')|`` per sample, with a 4th-order time derivative."""
    if len(traj) < 5:
        return np.full(len(traj), np.nan)
    dt = np.diff(traj.t)
    acc = sample_derivative(traj.velocity, float(dt[0]))
    out = np.empty(len(traj))
    for k in range(len(traj)):
        out[k] = np.linalg.norm(acc[k] - _acceleration(family, traj.theta[k], traj.velocity[k], alpha, strategy))
    return out


def geodesic(family: StatisticalFamily, theta0, v0, alpha: float, t_end: float, dt: float,
             strategy: Optional[Strategy] = None, diagnostics: bool = True) -> Trajectory:
    """Integrate the alpha-geodesic equation with classical RK4 at a fixed step.

    The step is adjusted down so that an integer number of steps reaches ``t_end``.
    Integration stops early (``exited=True``) when a stage leaves the domain.
    """
    strategy = resolve(family, strategy)
    theta = family.check(theta0)
    v = np.asarray(v0, dtype=float).reshape(-1)
    if v.shape != theta.shape:
        raise ValueError("initial velocity has the wrong dimension")
    if not dt > 0:
        raise ValueError("dt must be positive")
    steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    h = t_end / steps
    alpha = float(alpha)

    def rhs(p, q):
        return q, _acceleration(family, p, q, alpha, strategy)

    ts, ps, vs = [0.0], [theta.copy()], [v.copy()]
    exited = False
    for k in range(steps):
        p, q = ps[-1], vs[-1]
        try:
            k1p, k1v = rhs(p, q)
            k2p, k2v = rhs(p + 0.5 * h * k1p, q + 0.5 * h * k1v)
            k3p, k3v = rhs(p + 0.5 * h * k2p, q + 0.5 * h * k2v)
            k4p, k4v = rhs(p + h * k3p, q + h * k3v)
        except DomainError:
            exited = True
            break
        p_new = p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        q_new = q + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (np.all(np.isfinite(p_new)) and np.all(np.isfinite(q_new))):
            raise IntegrationError("non-finite geodesic state", last_sample=(ts[-1], p, q))
        if not family.domain.contains(p_new):
            exited = True
            break
        ts.append((k + 1) * h)
        ps.append(p_new)
        vs.append(q_new)
    traj = Trajectory(np.array(ts), np.array(ps), np.array(vs), alpha=alpha, dt=h, exited=exited)
    if diagnostics:
        traj.residual = geodesic_residual(family, traj, alpha, strategy)
    return traj


def speed(family: StatisticalFamily, traj: Trajectory, strategy: Optional[Strategy] = None) -> np.ndarray:
    """``g(theta', theta')`` along a trajectory."""
    return np.array([v @ fisher_metric(family, p, strategy) @ v for p, v in zip(traj.theta, traj.velocity)])
